//! The `run`, `converge`, `bench` and `compare` subcommands.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fracwave::fdac::solve_fdac;
use fracwave::fem::l2_error;
use fracwave::kernel::{Preset, VariableOrder};
use fracwave::tss::{solve_tss, FnSource, History, Prepared, SpaceFn, ZeroSource};
use fracwave::verify::{converge_table, Axis, Example, ManufacturedCase, Method};
use fracwave::{MeshSpec, ProblemSetup, Trajectory};

use crate::config::{DataShape, ExampleChoice, MethodChoice, RunConfig, SourceShape};
use crate::output::{render_snapshot, snapshot_path, Row};

const DEFAULT_RUN_H_EXP: u32 = 5;
const DEFAULT_BENCH_H_EXP: u32 = 3;

fn methods(choice: MethodChoice) -> &'static [Method] {
    match choice {
        MethodChoice::Tss => &[Method::Tss],
        MethodChoice::Fdac => &[Method::Fdac],
        MethodChoice::Both => &[Method::Tss, Method::Fdac],
    }
}

fn solve(method: Method, prep: &Prepared, threshold: usize) -> Result<Trajectory> {
    let traj = match method {
        Method::Tss => solve_tss(prep, History::Included),
        Method::Fdac => solve_fdac(prep, threshold),
    };
    traj.with_context(|| format!("{} solve failed", method.name()))
}

/// A configured problem at one resolution.
struct Problem {
    setup: ProblemSetup,
    case: Option<ManufacturedCase>,
    /// The custom example with zero data and source has `u ≡ 0`.
    zero_exact: bool,
}

impl Problem {
    fn build(cfg: &RunConfig, h_exp: u32, steps: usize) -> Result<Self> {
        match cfg.example {
            ExampleChoice::Builtin(e) => {
                let case = manufactured(cfg, e)?;
                let setup = case.setup(h_exp, steps)?;
                Ok(Problem { setup, case: Some(case), zero_exact: false })
            }
            ExampleChoice::Custom => {
                let dim = cfg.dim.unwrap_or(1);
                let preset = cfg.alpha.unwrap_or(Preset::OneMinusCos);
                let mesh = MeshSpec::dyadic(dim, h_exp, cfg.diffusivity)?;
                let order = VariableOrder::preset(preset, cfg.horizon)?;
                let mut setup = ProblemSetup::new(mesh, order, cfg.horizon, steps)?;
                setup = setup.with_initial_data(shape_fn(cfg.u0), shape_fn(cfg.v0));
                setup = match cfg.source {
                    SourceShape::Zero => setup.with_source(Arc::new(ZeroSource)),
                    SourceShape::One => setup.with_source(Arc::new(FnSource(|_: &[f64], _: f64| 1.0))),
                };
                let zero_exact =
                    cfg.u0 == DataShape::Zero && cfg.v0 == DataShape::Zero && cfg.source == SourceShape::Zero;
                Ok(Problem { setup, case: None, zero_exact })
            }
        }
    }

    fn error(&self, traj: &Trajectory) -> Result<Option<f64>> {
        if let Some(case) = &self.case {
            return Ok(case.final_error(&self.setup, traj)?);
        }
        if self.zero_exact {
            return Ok(Some(l2_error(self.setup.mesh(), traj.last(), &|_: &[f64]| 0.0)?));
        }
        Ok(None)
    }
}

fn manufactured(cfg: &RunConfig, example: Example) -> Result<ManufacturedCase> {
    Ok(ManufacturedCase::with_parameters(example, cfg.diffusivity, cfg.horizon)?)
}

fn shape_fn(shape: DataShape) -> SpaceFn {
    match shape {
        DataShape::Zero => Arc::new(|_| 0.0),
        DataShape::Sine => Arc::new(|x| x.iter().map(|v| (PI * v).sin()).product()),
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Snapshot file path and contents.
pub type Snapshot = (PathBuf, String);

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub snapshots: Vec<Snapshot>,
}

/// Frame index of each requested snapshot time; times must lie on the grid.
fn snapshot_frames(cfg: &RunConfig) -> Result<Vec<(f64, usize)>> {
    let tau = cfg.horizon / cfg.steps as f64;
    cfg.snapshot_times
        .iter()
        .map(|&t| {
            let n = (t / tau).round() as usize;
            if (n as f64 * tau - t).abs() > 1e-9 * cfg.horizon.max(1.0) {
                bail!("invalid value for `snapshot_times`: {t} is not on the time grid (τ = {tau})");
            }
            Ok((t, n))
        })
        .collect()
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    let h_exp = cfg.h_exp.unwrap_or(DEFAULT_RUN_H_EXP);
    let frames = snapshot_frames(cfg)?;
    let problem = Problem::build(cfg, h_exp, cfg.steps)?;
    let prep = Prepared::new(&problem.setup).context("preparing the discrete problem")?;
    let example = cfg.example.name();

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut reference: Option<Trajectory> = None;
    for &method in methods(cfg.method) {
        let (traj, wall) = timed(|| solve(method, &prep, cfg.threshold))?;
        let mut row = Row::new(example, method.name(), cfg.steps, h_exp);
        row.error = problem.error(&traj)?;
        row.wall_seconds = cfg.timing.then_some(wall);
        if method == Method::Fdac {
            if let Some(tss) = &reference {
                row.max_diff_vs_tss = Some(traj.max_relative_diff(tss)?);
            }
        }
        for &(t, n) in &frames {
            let path = snapshot_path(&cfg.snapshot_prefix, example, method.name(), t);
            snapshots.push((path, render_snapshot(problem.setup.mesh(), t, traj.frame(n))));
        }
        rows.push(row);
        if method == Method::Tss {
            reference = Some(traj);
        }
    }
    Ok(RunOutput { rows, snapshots })
}

/// Level list and fixed exponent used when the config gives none.
pub fn default_study(example: Example, axis: Axis) -> (Vec<u32>, u32) {
    match (example, axis) {
        (Example::Ex1, Axis::Temporal) | (Example::Ex2, Axis::Temporal) => (vec![5, 6, 7, 8], 7),
        (Example::Ex1, Axis::Spatial) => (vec![3, 4, 5, 6], 13),
        (Example::Ex2, Axis::Spatial) => (vec![3, 4, 5, 6], 12),
        (Example::Ex3, _) => (vec![5, 6, 7, 8], 5),
    }
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<Vec<Row>> {
    let example = match cfg.example {
        ExampleChoice::Builtin(e) => e,
        ExampleChoice::Custom => bail!("invalid value for `example`: converge needs ex1, ex2 or ex3"),
    };
    let (default_levels, default_fixed) = default_study(example, cfg.axis);
    let levels = cfg.levels.clone().unwrap_or(default_levels);
    let fixed = cfg.fixed.unwrap_or(default_fixed);
    let case = manufactured(cfg, example)?;

    let mut tables = Vec::new();
    for &method in methods(cfg.method) {
        let table = converge_table(&case, cfg.axis, &levels, fixed, method, cfg.weight)
            .with_context(|| format!("{} convergence study", method.name()))?;
        tables.push((method, table));
    }
    let mut rows = Vec::new();
    for i in 0..levels.len() {
        for (method, table) in &tables {
            let r = &table.rows[i];
            let mut row = Row::new(example.name(), method.name(), r.steps, r.h_exp);
            row.error = Some(r.error);
            row.rate = r.rate.map(|rate| (rate, r.degenerate));
            row.wall_seconds = cfg.timing.then_some(r.wall_seconds);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub method: Method,
    pub slope: f64,
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    /// Wall-clock seconds per `(method, N)`, always recorded.
    pub timings: Vec<(Method, usize, f64)>,
    pub fits: Vec<SlopeFit>,
    /// `t_tss / t_fdac` at every N where both ran.
    pub speedups: Vec<(usize, f64)>,
}

impl BenchReport {
    pub fn time(&self, method: Method, steps: usize) -> Option<f64> {
        self.timings.iter().find(|(m, n, _)| *m == method && *n == steps).map(|t| t.2)
    }

    /// Slope over the timings with `N` in `[first, last]`.
    pub fn slope_between(&self, method: Method, first: usize, last: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .timings
            .iter()
            .filter(|(m, n, _)| *m == method && (first..=last).contains(n))
            .map(|&(_, n, t)| (n as f64, t))
            .collect();
        loglog_slope(&pts)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for fit in &self.fits {
            out.push_str(&format!(
                "slope {} = {:.3} over N = {}..{}\n",
                fit.method.name(),
                fit.slope,
                fit.first,
                fit.last
            ));
        }
        for (n, ratio) in &self.speedups {
            out.push_str(&format!("speedup tss/fdac at N = {n}: {ratio:.1}x\n"));
        }
        out
    }
}

/// Times both methods (regardless of `method`) over `bench_levels` (N = 2^level) with a warm-up
/// solve first; each measurement is the best of `repeats` solves and
/// excludes assembly. TSS is skipped above `2^tss_cutoff`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let h_exp = cfg.h_exp.unwrap_or(DEFAULT_BENCH_H_EXP);
    let want = methods(MethodChoice::Both);
    let example = cfg.example.name();

    // warm caches, allocator and FFT plans on the smallest level
    let first = cfg.bench_levels[0];
    let warm = Problem::build(cfg, h_exp, 1 << first)?;
    let warm_prep = Prepared::new(&warm.setup)?;
    for &method in want {
        if method == Method::Tss && first > cfg.tss_cutoff {
            continue;
        }
        solve(method, &warm_prep, cfg.threshold)?;
    }
    let mut warm = Some((warm, warm_prep));

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &level in &cfg.bench_levels {
        let steps = 1usize << level;
        let (problem, prep) = match warm.take() {
            Some(ready) if level == first => ready,
            _ => {
                let problem = Problem::build(cfg, h_exp, steps)?;
                let prep = Prepared::new(&problem.setup).with_context(|| format!("preparing N = {steps}"))?;
                (problem, prep)
            }
        };
        for &method in want {
            if method == Method::Tss && level > cfg.tss_cutoff {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut last = None;
            for _ in 0..cfg.repeats {
                let (traj, wall) = timed(|| solve(method, &prep, cfg.threshold))?;
                best = best.min(wall);
                last = Some(traj);
            }
            let traj = last.expect("at least one repeat");
            let mut row = Row::new(example, method.name(), steps, h_exp);
            row.error = problem.error(&traj)?;
            row.wall_seconds = cfg.timing.then_some(best);
            rows.push(row);
            timings.push((method, steps, best));
        }
    }

    let mut fits = Vec::new();
    for &method in want {
        let pts: Vec<(usize, f64)> = timings.iter().filter(|t| t.0 == method).map(|t| (t.1, t.2)).collect();
        let xy: Vec<(f64, f64)> = pts.iter().map(|&(n, t)| (n as f64, t)).collect();
        if let Some(slope) = loglog_slope(&xy) {
            fits.push(SlopeFit { method, slope, first: pts[0].0, last: pts[pts.len() - 1].0 });
        }
    }
    let mut speedups = Vec::new();
    for &(m, n, t_tss) in &timings {
        if m != Method::Tss {
            continue;
        }
        if let Some(&(_, _, t_fdac)) = timings.iter().find(|t| t.0 == Method::Fdac && t.1 == n) {
            speedups.push((n, t_tss / t_fdac));
        }
    }
    Ok(BenchReport { rows, timings, fits, speedups })
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<Row>,
    pub worst: f64,
    pub tolerance: f64,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Problem used by the equivalence sweep: sine initial position and
/// velocity and a time-dependent source, so every term of the scheme is
/// active.
pub fn compare_setup(dim: usize, m: usize, preset: Preset, steps: usize, cfg: &RunConfig) -> Result<ProblemSetup> {
    let h_exp = (m + 1).trailing_zeros();
    let mesh = MeshSpec::dyadic(dim, h_exp, cfg.diffusivity)?;
    let order = VariableOrder::preset(preset, cfg.horizon)?;
    let sine = shape_fn(DataShape::Sine);
    let half: SpaceFn = Arc::new(|x| 0.5 * x.iter().map(|v| (PI * v).sin()).product::<f64>());
    Ok(ProblemSetup::new(mesh, order, cfg.horizon, steps)?
        .with_initial_data(sine, half)
        .with_source(Arc::new(FnSource(|x: &[f64], t: f64| 1.0 + t * x[0]))))
}

/// TSS against FDAC over every (dim, α, N, m) combination.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &dim in &cfg.compare_dims {
        for &preset in &cfg.compare_alphas {
            for &steps in &cfg.compare_n {
                for &m in &cfg.compare_m {
                    let setup = compare_setup(dim, m, preset, steps, cfg)?;
                    let prep = Prepared::new(&setup)?;
                    let tss = solve(Method::Tss, &prep, cfg.threshold)?;
                    let (fdac, wall) = timed(|| solve(Method::Fdac, &prep, cfg.threshold))?;
                    let diff = fdac.max_relative_diff(&tss)?;
                    worst = worst.max(diff);
                    let label = format!("compare-{dim}d-{}", preset.name());
                    let mut row = Row::new(&label, "fdac", steps, (m + 1).trailing_zeros());
                    row.wall_seconds = cfg.timing.then_some(wall);
                    row.max_diff_vs_tss = Some(diff);
                    rows.push(row);
                }
            }
        }
    }
    Ok(CompareReport { rows, worst, tolerance: cfg.tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn config(text: &str) -> RunConfig {
        RawConfig::parse_text(text).unwrap().resolve().unwrap()
    }

    #[test]
    fn slope_of_power_laws() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (2f64.powi(k), 3.0 * 2f64.powi(2 * k))).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
        assert_eq!(loglog_slope(&[(2.0, 1.0), (2.0, 3.0)]), None);
    }

    #[test]
    fn custom_zero_problem_has_zero_error() {
        let out = cmd_run(&config("example = custom\nmethod = both\nN = 8\nh_exp = 3")).unwrap();
        assert_eq!(out.rows.len(), 2);
        for row in &out.rows {
            assert_eq!(row.error, Some(0.0));
        }
    }

    #[test]
    fn both_reports_diff_on_the_fdac_row() {
        let out = cmd_run(&config("example = ex3\nmethod = both\nN = 24\nh_exp = 3")).unwrap();
        assert_eq!(out.rows[0].max_diff_vs_tss, None);
        let diff = out.rows[1].max_diff_vs_tss.unwrap();
        assert!(diff <= 1e-10, "{diff}");
        assert_eq!(out.rows[1].error, None);
    }

    #[test]
    fn snapshots_at_grid_times() {
        let cfg = config("example = custom\ndim = 2\nu0 = sine\nN = 8\nh_exp = 2\nsnapshot_times = 0, 0.5");
        let out = cmd_run(&cfg).unwrap();
        assert_eq!(out.snapshots.len(), 2);
        let (path, text) = &out.snapshots[0];
        assert!(path.to_string_lossy().ends_with("-custom-fdac-t0.txt"));
        let second_row: Vec<f64> =
            text.lines().nth(2).unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
        assert!((second_row[1] - 1.0).abs() < 1e-12, "{second_row:?}");
    }

    #[test]
    fn off_grid_snapshot_is_rejected_before_solving() {
        let err = cmd_run(&config("N = 4\nsnapshot_times = 0.3")).unwrap_err();
        assert!(format!("{err:#}").contains("`snapshot_times`"));
    }

    #[test]
    fn converge_rejects_custom() {
        let err = cmd_converge(&config("example = custom")).unwrap_err();
        assert!(format!("{err:#}").contains("`example`"));
    }

    #[test]
    fn duplicate_levels_are_degenerate() {
        let rows = cmd_converge(&config("levels = 3,4,4\nfixed = 3\ntiming = off")).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].rate, None);
        assert!(!rows[1].rate.unwrap().1);
        assert_eq!(rows[2].rate, Some((0.0, true)));
    }

    #[test]
    fn small_bench_fits_slopes() {
        let report = cmd_bench(&config("bench_levels = 4..6\ntss_cutoff = 5")).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.fits.len(), 2);
        assert_eq!(report.speedups.len(), 2);
        assert!(report.time(Method::Tss, 64).is_none());
        assert!(report.summary().contains("slope fdac"));
    }

    #[test]
    fn compare_small_matrix() {
        let report = cmd_compare(&config("compare_n = 5, 9\ncompare_m = 3\ncompare_dims = 1,2")).unwrap();
        assert_eq!(report.rows.len(), 2 * 3 * 2);
        assert!(report.passed(), "{}", report.worst);
    }
}
