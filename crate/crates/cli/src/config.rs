//! Flat `key = value` configuration with command-line overrides.
//!
//! Keys are case-insensitive; `#` starts a comment. Every value is parsed and
//! validated up front, and every error names the offending key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fracwave::fem::GridWeight;
use fracwave::kernel::Preset;
use fracwave::verify::{Axis, Example};

/// Largest accepted `h_exp`; 2D meshes beyond this do not fit in memory.
pub const MAX_H_EXP: u32 = 12;
/// Largest accepted step exponent.
pub const MAX_N_EXP: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleChoice {
    Builtin(Example),
    Custom,
}

impl ExampleChoice {
    pub fn name(self) -> &'static str {
        match self {
            ExampleChoice::Builtin(e) => e.name(),
            ExampleChoice::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Tss,
    Fdac,
    Both,
}

/// Initial data of the custom example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    Zero,
    /// `∏ sin(π x_d)`.
    Sine,
}

/// Source of the custom example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceShape {
    Zero,
    One,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: ExampleChoice,
    pub method: MethodChoice,
    pub steps: usize,
    pub h_exp: Option<u32>,
    pub alpha: Option<Preset>,
    pub diffusivity: f64,
    pub horizon: f64,
    pub output: Option<PathBuf>,
    pub timing: bool,
    pub threshold: usize,
    // custom example
    pub dim: Option<usize>,
    pub u0: DataShape,
    pub v0: DataShape,
    pub source: SourceShape,
    // run
    pub snapshot_times: Vec<f64>,
    pub snapshot_prefix: PathBuf,
    // converge
    pub axis: Axis,
    pub levels: Option<Vec<u32>>,
    pub fixed: Option<u32>,
    pub weight: GridWeight,
    // bench
    pub bench_levels: Vec<u32>,
    pub tss_cutoff: u32,
    pub repeats: usize,
    // compare
    pub compare_n: Vec<usize>,
    pub compare_m: Vec<usize>,
    pub compare_dims: Vec<usize>,
    pub compare_alphas: Vec<Preset>,
    pub tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            example: ExampleChoice::Builtin(Example::Ex1),
            method: MethodChoice::Fdac,
            steps: 32,
            h_exp: None,
            alpha: None,
            diffusivity: 0.01,
            horizon: 1.0,
            output: None,
            timing: true,
            threshold: fracwave::fdac::DEFAULT_THRESHOLD,
            dim: None,
            u0: DataShape::Zero,
            v0: DataShape::Zero,
            source: SourceShape::Zero,
            snapshot_times: Vec::new(),
            snapshot_prefix: PathBuf::from("snapshot"),
            axis: Axis::Temporal,
            levels: None,
            fixed: None,
            weight: GridWeight::Volume,
            bench_levels: (8..=16).collect(),
            tss_cutoff: 15,
            repeats: 1,
            compare_n: vec![4, 8, 16, 64, 12],
            compare_m: vec![3, 7, 15],
            compare_dims: vec![1, 2],
            compare_alphas: Preset::ALL.to_vec(),
            tolerance: 1e-10,
        }
    }
}

/// Canonical spelling of every key, used in messages.
const KEYS: &[&str] = &[
    "example",
    "method",
    "N",
    "h_exp",
    "alpha",
    "K",
    "T",
    "output",
    "timing",
    "threshold",
    "dim",
    "u0",
    "v0",
    "source",
    "snapshot_times",
    "snapshot_prefix",
    "axis",
    "levels",
    "fixed",
    "weight",
    "bench_levels",
    "tss_cutoff",
    "repeats",
    "compare_n",
    "compare_m",
    "compare_dims",
    "compare_alphas",
    "tolerance",
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| k.eq_ignore_ascii_case(key.trim()))
}

/// Raw key/value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<&'static str, String>,
}

impl RawConfig {
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = canonical(key).ok_or_else(|| anyhow!("line {}: unknown key `{}`", lineno + 1, key.trim()))?;
            if let Some(prev) = seen.insert(key, lineno + 1) {
                bail!("line {}: `{key}` already set on line {prev}", lineno + 1);
            }
            raw.entries.insert(key, value.trim().to_string());
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) =
            assignment.split_once('=').ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
        let key = canonical(key).ok_or_else(|| anyhow!("unknown key `{}`", key.trim()))?;
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(canonical(key)?).map(String::as_str)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (&key, value) in &self.entries {
            apply(&mut cfg, key, value).map_err(|e| anyhow!("invalid value for `{key}`: {e}"))?;
        }
        validate(&cfg, self)?;
        Ok(cfg)
    }
}

fn apply(cfg: &mut RunConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "example" => {
            cfg.example = match v.to_ascii_lowercase().as_str() {
                "custom" => ExampleChoice::Custom,
                other => ExampleChoice::Builtin(other.parse().map_err(|_| anyhow!("expected ex1, ex2, ex3 or custom, got `{v}`"))?),
            }
        }
        "method" => {
            cfg.method = match v.to_ascii_lowercase().as_str() {
                "tss" => MethodChoice::Tss,
                "fdac" => MethodChoice::Fdac,
                "both" => MethodChoice::Both,
                _ => bail!("expected tss, fdac or both, got `{v}`"),
            }
        }
        "N" => cfg.steps = parse_count(v)?,
        "h_exp" => cfg.h_exp = Some(parse_h_exp(v)?),
        "alpha" => cfg.alpha = Some(parse_preset(v)?),
        "K" => cfg.diffusivity = parse_positive(v)?,
        "T" => cfg.horizon = parse_positive(v)?,
        "output" => cfg.output = if v.is_empty() || v == "-" { None } else { Some(PathBuf::from(v)) },
        "timing" => cfg.timing = parse_switch(v)?,
        "threshold" => {
            cfg.threshold = v.parse().map_err(|_| anyhow!("expected a positive integer, got `{v}`"))?;
            if cfg.threshold == 0 {
                bail!("must be at least 1");
            }
        }
        "dim" => {
            cfg.dim = Some(match v {
                "1" => 1,
                "2" => 2,
                _ => bail!("expected 1 or 2, got `{v}`"),
            })
        }
        "u0" => cfg.u0 = parse_data(v)?,
        "v0" => cfg.v0 = parse_data(v)?,
        "source" => {
            cfg.source = match v.to_ascii_lowercase().as_str() {
                "zero" | "0" => SourceShape::Zero,
                "one" | "1" => SourceShape::One,
                _ => bail!("expected zero or one, got `{v}`"),
            }
        }
        "snapshot_times" => {
            cfg.snapshot_times = split_list(v)
                .map(|s| s.parse::<f64>().map_err(|_| anyhow!("`{s}` is not a number")))
                .collect::<Result<_>>()?
        }
        "snapshot_prefix" => {
            if v.is_empty() {
                bail!("must not be empty");
            }
            cfg.snapshot_prefix = PathBuf::from(v)
        }
        "axis" => cfg.axis = v.parse().map_err(|e: fracwave::Error| anyhow!("{e}"))?,
        "levels" => cfg.levels = Some(parse_exponents(v)?),
        "fixed" => cfg.fixed = Some(parse_exponent(v, MAX_N_EXP)?),
        "weight" => {
            cfg.weight = match v.to_ascii_lowercase().as_str() {
                "volume" => GridWeight::Volume,
                "spacing" => GridWeight::Spacing,
                _ => bail!("expected volume or spacing, got `{v}`"),
            }
        }
        "bench_levels" => cfg.bench_levels = parse_exponents(v)?,
        "tss_cutoff" => cfg.tss_cutoff = parse_exponent(v, MAX_N_EXP)?,
        "repeats" => {
            cfg.repeats = v.parse().map_err(|_| anyhow!("expected a positive integer, got `{v}`"))?;
            if cfg.repeats == 0 {
                bail!("must be at least 1");
            }
        }
        "compare_n" => cfg.compare_n = split_list(v).map(parse_count).collect::<Result<_>>()?,
        "compare_m" => {
            cfg.compare_m = split_list(v)
                .map(|s| {
                    let m: usize = s.parse().map_err(|_| anyhow!("`{s}` is not an integer"))?;
                    if m == 0 || !(m + 1).is_power_of_two() || (m + 1).trailing_zeros() > MAX_H_EXP {
                        bail!("{m} is not of the form 2^k - 1 with 1 <= k <= {MAX_H_EXP}");
                    }
                    Ok(m)
                })
                .collect::<Result<_>>()?
        }
        "compare_dims" => {
            cfg.compare_dims = split_list(v)
                .map(|s| match s {
                    "1" => Ok(1),
                    "2" => Ok(2),
                    _ => Err(anyhow!("expected 1 or 2, got `{s}`")),
                })
                .collect::<Result<_>>()?
        }
        "compare_alphas" => cfg.compare_alphas = split_list(v).map(parse_preset).collect::<Result<_>>()?,
        "tolerance" => cfg.tolerance = parse_positive(v)?,
        _ => unreachable!("key list and parser out of sync: {key}"),
    }
    Ok(())
}

fn validate(cfg: &RunConfig, raw: &RawConfig) -> Result<()> {
    if let ExampleChoice::Builtin(e) = cfg.example {
        for key in ["dim", "u0", "v0", "source"] {
            if raw.get(key).is_some() {
                bail!("invalid value for `{key}`: only the custom example accepts it ({} is fixed)", e.name());
            }
        }
        if let Some(a) = cfg.alpha {
            if a != e.preset() {
                bail!("invalid value for `alpha`: {} uses {}, got {}", e.name(), e.preset().name(), a.name());
            }
        }
    }
    if let Some(levels) = &cfg.levels {
        if levels.len() < 2 {
            bail!("invalid value for `levels`: a convergence study needs at least 2 levels");
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            bail!("invalid value for `levels`: must be ascending");
        }
    }
    if cfg.bench_levels.windows(2).any(|w| w[1] < w[0]) {
        bail!("invalid value for `bench_levels`: must be ascending");
    }
    if cfg.bench_levels.is_empty() {
        bail!("invalid value for `bench_levels`: must not be empty");
    }
    for &t in &cfg.snapshot_times {
        if !(0.0..=cfg.horizon).contains(&t) {
            bail!("invalid value for `snapshot_times`: {t} is outside [0, T = {}]", cfg.horizon);
        }
    }
    for (key, empty) in [
        ("compare_n", cfg.compare_n.is_empty()),
        ("compare_m", cfg.compare_m.is_empty()),
        ("compare_dims", cfg.compare_dims.is_empty()),
        ("compare_alphas", cfg.compare_alphas.is_empty()),
    ] {
        if empty {
            bail!("invalid value for `{key}`: must not be empty");
        }
    }
    Ok(())
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// A step count: plain integer or `2^k`.
fn parse_count(v: &str) -> Result<usize> {
    let n = if let Some(exp) = v.trim().strip_prefix("2^") {
        let e = parse_exponent(exp, MAX_N_EXP)?;
        1usize << e
    } else {
        v.trim().parse::<usize>().map_err(|_| anyhow!("expected an integer or 2^k, got `{v}`"))?
    };
    if n < 2 {
        bail!("needs at least 2 steps, got {n}");
    }
    if n > 1 << MAX_N_EXP {
        bail!("{n} exceeds the limit 2^{MAX_N_EXP}");
    }
    Ok(n)
}

fn parse_exponent(v: &str, max: u32) -> Result<u32> {
    let e: u32 = v.trim().parse().map_err(|_| anyhow!("expected a non-negative integer, got `{v}`"))?;
    if e > max {
        bail!("{e} exceeds the limit {max}");
    }
    Ok(e)
}

fn parse_h_exp(v: &str) -> Result<u32> {
    let e = parse_exponent(v, MAX_H_EXP)?;
    if e == 0 {
        bail!("must be at least 1 (h = 1 leaves no interior nodes)");
    }
    Ok(e)
}

/// Comma list of exponents; `a..b` expands inclusively.
fn parse_exponents(v: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for item in split_list(v) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (parse_exponent(a, MAX_N_EXP)?, parse_exponent(b, MAX_N_EXP)?);
            if b < a {
                bail!("empty range `{item}`");
            }
            out.extend(a..=b);
        } else {
            out.push(parse_exponent(item, MAX_N_EXP)?);
        }
    }
    if out.is_empty() {
        bail!("no levels given");
    }
    Ok(out)
}

fn parse_positive(v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| anyhow!("`{v}` is not a number"))?;
    if !(x > 0.0 && x.is_finite()) {
        bail!("must be positive and finite, got {x}");
    }
    Ok(x)
}

fn parse_switch(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => bail!("expected on or off, got `{v}`"),
    }
}

fn parse_data(v: &str) -> Result<DataShape> {
    match v.to_ascii_lowercase().as_str() {
        "zero" | "0" => Ok(DataShape::Zero),
        "sine" | "sin" => Ok(DataShape::Sine),
        _ => bail!("expected zero or sine, got `{v}`"),
    }
}

fn parse_preset(v: &str) -> Result<Preset> {
    let norm = v.trim().to_ascii_lowercase().replace('_', "-");
    norm.parse().map_err(|e: fracwave::Error| anyhow!("{e}"))
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodChoice::Tss => "tss",
            MethodChoice::Fdac => "fdac",
            MethodChoice::Both => "both",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig> {
        RawConfig::parse_text(text)?.resolve()
    }

    #[test]
    fn defaults_resolve() {
        let cfg = resolve("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn parses_a_full_file() {
        let cfg = resolve(
            "# study\nexample = ex2\nmethod=both\nN = 2^6\nh_exp = 4\nK = 0.02 # faster waves\nT=0.5\nlevels = 3..5\n",
        )
        .unwrap();
        assert_eq!(cfg.example, ExampleChoice::Builtin(Example::Ex2));
        assert_eq!(cfg.method, MethodChoice::Both);
        assert_eq!(cfg.steps, 64);
        assert_eq!(cfg.h_exp, Some(4));
        assert_eq!(cfg.diffusivity, 0.02);
        assert_eq!(cfg.horizon, 0.5);
        assert_eq!(cfg.levels, Some(vec![3, 4, 5]));
    }

    #[test]
    fn keys_are_case_insensitive() {
        let cfg = resolve("n = 12\nk = 0.5").unwrap();
        assert_eq!(cfg.steps, 12);
        assert_eq!(cfg.diffusivity, 0.5);
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse_text("N = 8").unwrap();
        raw.set("N=16").unwrap();
        raw.set(" method = tss ").unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.steps, 16);
        assert_eq!(cfg.method, MethodChoice::Tss);
    }

    fn error_of(text: &str) -> String {
        format!("{:#}", resolve(text).unwrap_err())
    }

    #[test]
    fn errors_name_the_field() {
        for (text, field) in [
            ("N = 1", "`N`"),
            ("N = lots", "`N`"),
            ("h_exp = 0", "`h_exp`"),
            ("h_exp = 40", "`h_exp`"),
            ("K = -1", "`K`"),
            ("T = nan", "`T`"),
            ("method = magic", "`method`"),
            ("example = ex9", "`example`"),
            ("alpha = sqrt", "`alpha`"),
            ("example = ex1\nalpha = t-sin-t", "`alpha`"),
            ("dim = 2", "`dim`"),
            ("example = custom\ndim = 3", "`dim`"),
            ("levels = 5", "`levels`"),
            ("levels = 6,5", "`levels`"),
            ("weight = heavy", "`weight`"),
            ("bench_levels = 9,8", "`bench_levels`"),
            ("compare_m = 4", "`compare_m`"),
            ("snapshot_times = 2", "`snapshot_times`"),
            ("timing = maybe", "`timing`"),
            ("repeats = 0", "`repeats`"),
            ("threshold = 0", "`threshold`"),
            ("tolerance = 0", "`tolerance`"),
        ] {
            let msg = error_of(text);
            assert!(msg.contains(field), "{text:?} -> {msg}");
        }
    }

    #[test]
    fn syntax_errors_name_the_line() {
        assert!(error_of("N = 4\nbogus line").contains("line 2"));
        assert!(error_of("colour = red").contains("`colour`"));
        assert!(error_of("N = 4\nn = 8").contains("already set"));
    }

    #[test]
    fn preset_spellings() {
        let cfg = resolve("example = custom\nalpha = ONE_MINUS_COS").unwrap();
        assert_eq!(cfg.alpha, Some(Preset::OneMinusCos));
    }
}
