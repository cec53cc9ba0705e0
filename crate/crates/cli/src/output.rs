//! CSV report rows and solution snapshots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fracwave::MeshSpec;

pub const CSV_HEADER: &str = "example,method,N,h_exp,error,rate,wall_seconds,max_diff_vs_tss";

/// One line of the report; `None` cells are left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub example: String,
    pub method: String,
    pub steps: usize,
    pub h_exp: u32,
    pub error: Option<f64>,
    /// Rate and whether it is degenerate.
    pub rate: Option<(f64, bool)>,
    pub wall_seconds: Option<f64>,
    pub max_diff_vs_tss: Option<f64>,
}

impl Row {
    pub fn new(example: &str, method: &str, steps: usize, h_exp: u32) -> Self {
        Row {
            example: example.to_string(),
            method: method.to_string(),
            steps,
            h_exp,
            error: None,
            rate: None,
            wall_seconds: None,
            max_diff_vs_tss: None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut line = format!("{},{},{},{},", self.example, self.method, self.steps, self.h_exp);
        if let Some(e) = self.error {
            let _ = write!(line, "{e:.6e}");
        }
        line.push(',');
        match self.rate {
            Some((r, false)) => {
                let _ = write!(line, "{r:.4}");
            }
            Some((r, true)) => {
                let _ = write!(line, "{r:.4} (degenerate)");
            }
            None => {}
        }
        line.push(',');
        if let Some(w) = self.wall_seconds {
            let _ = write!(line, "{w:.6}");
        }
        line.push(',');
        if let Some(d) = self.max_diff_vs_tss {
            let _ = write!(line, "{d:.3e}");
        }
        line
    }
}

pub fn render_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Writes to `path`, or to stdout when `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to stdout")?;
            stdout.flush().context("writing to stdout")
        }
    }
}

/// Header line `# dim=<d> m=<m> t=<t>` followed by the interior nodal values,
/// one mesh row per line (a single line in 1D).
pub fn render_snapshot(mesh: &MeshSpec, t: f64, values: &[f64]) -> String {
    let m = mesh.nodes_per_dim();
    let mut out = format!("# dim={} m={} t={}\n", mesh.dim(), m, t);
    for row in values.chunks(m) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn snapshot_path(prefix: &Path, example: &str, method: &str, t: f64) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("-{example}-{method}-t{t}.txt"));
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cells_keep_column_count() {
        let row = Row::new("ex3", "fdac", 32, 5);
        assert_eq!(row.to_csv(), "ex3,fdac,32,5,,,,");
        assert_eq!(row.to_csv().split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn full_row_formatting() {
        let row = Row {
            error: Some(0.059344),
            rate: Some((0.97123, false)),
            wall_seconds: Some(0.25),
            max_diff_vs_tss: Some(3.2e-14),
            ..Row::new("ex1", "fdac", 32, 7)
        };
        assert_eq!(row.to_csv(), "ex1,fdac,32,7,5.934400e-2,0.9712,0.250000,3.200e-14");
    }

    #[test]
    fn degenerate_rate_is_flagged() {
        let row = Row { rate: Some((0.0, true)), ..Row::new("ex1", "tss", 16, 3) };
        assert!(row.to_csv().contains("0.0000 (degenerate)"));
    }

    #[test]
    fn snapshot_layout() {
        let mesh = MeshSpec::dyadic(2, 2, 0.01).unwrap();
        let values: Vec<f64> = (0..9).map(f64::from).collect();
        let text = render_snapshot(&mesh, 0.5, &values);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# dim=2 m=3 t=0.5");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2].split(' ').count(), 3);
        assert!(lines[2].starts_with("3.000000000000e0"));
    }

    #[test]
    fn snapshot_names() {
        let p = snapshot_path(Path::new("out/snap"), "ex3", "fdac", 0.5);
        assert_eq!(p, PathBuf::from("out/snap-ex3-fdac-t0.5.txt"));
    }
}
