use thiserror::Error;

use crate::gp::SubsetRule;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid option `{name}`: {reason}")]
pub struct OptionsError {
    pub name: &'static str,
    pub reason: String,
}

/// Optimizer settings. `None` entries default to multiples of the dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    /// Default `100·D`.
    pub max_evaluations: Option<usize>,
    /// Default `200·D`.
    pub max_iterations: Option<usize>,
    pub poll_size_init: f64,
    /// Termination threshold on the poll size.
    pub poll_size_min: f64,
    pub poll_size_max: f64,
    pub kappa: f64,
    /// Consecutive search failures that hand control to the poll stage.
    pub search_fail_switch: u32,
    /// Noisy targets: a point improves only if it beats the incumbent
    /// estimate by this many noise sds.
    pub sufficient_decrease_factor: f64,
    pub seed: u64,
    /// Noisy targets: iterations between incumbent re-measurements. Default `2·D`.
    pub reassess_interval: Option<usize>,
    /// Noisy targets: posterior-mean gap, in combined sds, that relocates the incumbent.
    pub relocation_threshold: f64,
    /// Iterations without improvement or mesh refinement before stopping. Default `4·D`.
    pub stall_iterations: Option<usize>,
    pub stall_tolerance: f64,
    pub candidates_per_proposal: usize,
    pub search_radius_scale: f64,
    /// `false` turns the run into plain mesh polling.
    pub search_enabled: bool,
    pub subset: SubsetRule,
    /// BFGS iterations per start when fitting GP hyperparameters.
    pub fit_iterations: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_evaluations: None,
            max_iterations: None,
            poll_size_init: 0.25,
            poll_size_min: 1e-6,
            poll_size_max: 1.0,
            kappa: 2.0,
            search_fail_switch: 2,
            sufficient_decrease_factor: 0.1,
            seed: 0,
            reassess_interval: None,
            relocation_threshold: 3.0,
            stall_iterations: None,
            stall_tolerance: 1e-9,
            candidates_per_proposal: 512,
            search_radius_scale: 1.0,
            search_enabled: true,
            subset: SubsetRule::default(),
            fit_iterations: 40,
        }
    }
}

impl Options {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_evaluations(mut self, n: usize) -> Self {
        self.max_evaluations = Some(n);
        self
    }

    pub fn poll_only(mut self) -> Self {
        self.search_enabled = false;
        self
    }

    /// Checks ranges and fills dimension-dependent defaults.
    pub fn resolve(&self, dim: usize) -> Result<Settings, OptionsError> {
        fn positive(name: &'static str, v: f64) -> Result<(), OptionsError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(OptionsError { name, reason: format!("must be positive and finite, got {v}") })
            }
        }
        fn at_least_one(name: &'static str, v: usize) -> Result<usize, OptionsError> {
            if v >= 1 {
                Ok(v)
            } else {
                Err(OptionsError { name, reason: "must be at least 1".into() })
            }
        }
        positive("poll_size_init", self.poll_size_init)?;
        positive("poll_size_min", self.poll_size_min)?;
        positive("poll_size_max", self.poll_size_max)?;
        positive("kappa", self.kappa)?;
        positive("relocation_threshold", self.relocation_threshold)?;
        positive("stall_tolerance", self.stall_tolerance)?;
        positive("search_radius_scale", self.search_radius_scale)?;
        positive("subset.radius_factor", self.subset.radius_factor)?;
        if !(self.sufficient_decrease_factor >= 0.0 && self.sufficient_decrease_factor.is_finite()) {
            return Err(OptionsError {
                name: "sufficient_decrease_factor",
                reason: format!("must be nonnegative, got {}", self.sufficient_decrease_factor),
            });
        }
        if !(self.poll_size_min < self.poll_size_init && self.poll_size_init <= self.poll_size_max) {
            return Err(OptionsError {
                name: "poll_size_init",
                reason: format!(
                    "need poll_size_min < poll_size_init <= poll_size_max, got {} / {} / {}",
                    self.poll_size_min, self.poll_size_init, self.poll_size_max
                ),
            });
        }
        if self.search_fail_switch == 0 {
            return Err(OptionsError { name: "search_fail_switch", reason: "must be at least 1".into() });
        }
        Ok(Settings {
            max_evaluations: self.max_evaluations.unwrap_or(100 * dim),
            max_iterations: at_least_one("max_iterations", self.max_iterations.unwrap_or(200 * dim))?,
            poll_size_init: self.poll_size_init,
            poll_size_min: self.poll_size_min,
            poll_size_max: self.poll_size_max,
            kappa: self.kappa,
            search_fail_switch: self.search_fail_switch,
            sufficient_decrease_factor: self.sufficient_decrease_factor,
            seed: self.seed,
            reassess_interval: at_least_one("reassess_interval", self.reassess_interval.unwrap_or(2 * dim))?,
            full_refit_interval: 2 * dim,
            relocation_threshold: self.relocation_threshold,
            stall_iterations: at_least_one("stall_iterations", self.stall_iterations.unwrap_or(4 * dim))?,
            stall_tolerance: self.stall_tolerance,
            candidates_per_proposal: at_least_one("candidates_per_proposal", self.candidates_per_proposal)?,
            search_radius_scale: self.search_radius_scale,
            search_enabled: self.search_enabled,
            subset: self.subset,
            fit_iterations: at_least_one("fit_iterations", self.fit_iterations)?,
        })
    }
}

/// [`Options`] after validation, with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub max_evaluations: usize,
    pub max_iterations: usize,
    pub poll_size_init: f64,
    pub poll_size_min: f64,
    pub poll_size_max: f64,
    pub kappa: f64,
    pub search_fail_switch: u32,
    pub sufficient_decrease_factor: f64,
    pub seed: u64,
    pub reassess_interval: usize,
    pub full_refit_interval: usize,
    pub relocation_threshold: f64,
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
    pub candidates_per_proposal: usize,
    pub search_radius_scale: f64,
    pub search_enabled: bool,
    pub subset: SubsetRule,
    pub fit_iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_scale_with_dimension() {
        let s = Options::default().resolve(3).unwrap();
        assert_eq!(s.max_evaluations, 300);
        assert_eq!(s.max_iterations, 600);
        assert_eq!(s.reassess_interval, 6);
        assert_eq!(s.stall_iterations, 12);
        assert_eq!(s.poll_size_init, 0.25);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = Options { kappa: -1.0, ..Options::default() };
        assert_eq!(bad.resolve(2).unwrap_err().name, "kappa");
        let bad = Options { max_iterations: Some(0), ..Options::default() };
        assert_eq!(bad.resolve(2).unwrap_err().name, "max_iterations");
        let bad = Options { poll_size_init: 2.0, ..Options::default() };
        assert_eq!(bad.resolve(2).unwrap_err().name, "poll_size_init");
        let bad = Options { poll_size_min: f64::NAN, ..Options::default() };
        assert!(bad.resolve(2).is_err());
    }
}
