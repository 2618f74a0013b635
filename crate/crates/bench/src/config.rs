//! Benchmark configuration: an INI-style file overlaid by command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::functions::ProblemKind;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Ablation {
    /// Full search + poll.
    #[default]
    None,
    /// Search stage disabled.
    PollOnly,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::PollOnly => "poll-only",
        }
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(Ablation::None),
            "poll-only" | "poll_only" => Ok(Ablation::PollOnly),
            other => Err(format!("unknown ablation `{other}` (expected none or poll-only)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub problems: Vec<ProblemKind>,
    pub dim: usize,
    pub seeds: Vec<u64>,
    /// `None` uses the optimizer default of `100·D`.
    pub max_evals: Option<usize>,
    /// `None` uses each problem's default.
    pub noise_sd: Option<f64>,
    pub ablation: Ablation,
    pub out_dir: PathBuf,
    pub kappa: f64,
    /// Record wall-clock time per cell in the summary. Off by default so
    /// repeated runs produce identical files.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            problems: vec![ProblemKind::Rosenbrock],
            dim: 2,
            seeds: (0..10).collect(),
            max_evals: None,
            noise_sd: None,
            ablation: Ablation::None,
            out_dir: PathBuf::from("bench-out"),
            kappa: 2.0,
            timing: false,
        }
    }
}

/// `N` means seeds `0..N`; `a..b` is a half-open range; `a,b,c` is a list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed `{}`: {e}", t.trim()));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a >= b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect();
    }
    let n = num(s)?;
    if n == 0 {
        return Err("seed count must be positive".into());
    }
    Ok((0..n).collect())
}

fn parse_problems(s: &str) -> Result<Vec<ProblemKind>, String> {
    let out: Vec<ProblemKind> = s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("no problem given".into());
    }
    Ok(out)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| format!("bad value for {key}: `{}` ({e})", value.trim()))
}

impl BenchConfig {
    /// Sets one key. Keys match the long flag names, with `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key.trim().replace('-', "_").as_str() {
            "problem" | "problems" => self.problems = parse_problems(value)?,
            "dim" => self.dim = parse_num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "max_evals" => self.max_evals = Some(parse_num(key, value)?),
            "noise_sd" => self.noise_sd = Some(parse_num(key, value)?),
            "ablation" => self.ablation = value.parse()?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "kappa" => self.kappa = parse_num(key, value)?,
            "timing" => self.timing = parse_num(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` and `;` start comments; `[section]`
    /// headers are accepted and ignored.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            self.set(key, value).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return Err("no seeds".into());
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(format!("kappa must be positive, got {}", self.kappa));
        }
        if let Some(sd) = self.noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(format!("noise sd must be nonnegative, got {sd}"));
            }
        }
        for p in &self.problems {
            if self.dim < p.min_dim() {
                return Err(format!("{p} needs dim >= {}", p.min_dim()));
            }
        }
        Ok(())
    }
}

/// Runs seeded optimizer benchmarks and writes traces and a summary.
#[derive(Debug, Parser)]
#[command(name = "bads-bench", version)]
pub struct Cli {
    /// INI-style file with `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated problem names: rosenbrock, sphere, ellipsoid, adversarial, noisy_sphere.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// `N` (seeds 0..N), `a..b`, or `a,b,c`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// Additive Gaussian noise sd; makes any problem noisy.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_sd: Option<f64>,
    #[arg(long, value_enum)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Fill `wall_ms` in the summary.
    #[arg(long)]
    pub timing: bool,
}

impl Cli {
    pub fn into_config(self) -> Result<BenchConfig, BenchError> {
        let mut config = BenchConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io { path: path.clone(), source: e })?;
            config
                .apply_file_text(&text)
                .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        }
        let flag = |r: Result<(), String>| r.map_err(BenchError::Config);
        if let Some(p) = &self.problem {
            flag(config.set("problem", p))?;
        }
        if let Some(s) = &self.seeds {
            flag(config.set("seeds", s))?;
        }
        if let Some(d) = self.dim {
            config.dim = d;
        }
        if let Some(m) = self.max_evals {
            config.max_evals = Some(m);
        }
        if let Some(sd) = self.noise_sd {
            config.noise_sd = Some(sd);
        }
        if let Some(a) = self.ablation {
            config.ablation = a;
        }
        if let Some(o) = self.out_dir {
            config.out_dir = o;
        }
        if let Some(k) = self.kappa {
            config.kappa = k;
        }
        config.timing |= self.timing;
        config.validate().map_err(BenchError::Config)?;
        Ok(config)
    }
}
