use rand_chacha::ChaCha8Rng;

use super::options::Settings;
use super::{EvalError, EvaluationRecord, Incumbent, Stage};
use crate::gp::{self, FitSettings, GpModel};
use crate::mesh::MeshState;
use crate::points::PointSet;
use crate::problem::{Objective, SearchSpace};
use crate::search::SearchState;

/// Mutable state of one optimization run, shared by the poll and search
/// stages.
pub struct RunContext<'a, F> {
    pub(crate) space: &'a SearchSpace,
    objective: &'a mut F,
    pub(crate) settings: &'a Settings,
    pub(crate) noisy: bool,
    noise_hint: Option<f64>,
    pub(crate) history: Vec<EvaluationRecord>,
    pub(crate) seen: PointSet,
    pub(crate) incumbent: Incumbent,
    pub(crate) mesh: MeshState,
    pub(crate) search: SearchState,
    pub(crate) model: Option<GpModel>,
    /// History indices the current model was conditioned on.
    pub(crate) model_subset: Vec<usize>,
    pub(crate) fit_settings: FitSettings,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) iteration: usize,
}

impl<'a, F: Objective> RunContext<'a, F> {
    pub(crate) fn new(
        space: &'a SearchSpace,
        objective: &'a mut F,
        settings: &'a Settings,
        noisy: bool,
        noise_hint: Option<f64>,
        rng: ChaCha8Rng,
    ) -> Self {
        let fit_settings = FitSettings {
            noise: if noisy {
                gp::NoiseMode::Noisy { floor: noise_hint.unwrap_or(0.0) }
            } else {
                gp::NoiseMode::Deterministic
            },
            max_iterations: settings.fit_iterations,
        };
        Self {
            space,
            objective,
            settings,
            noisy,
            noise_hint,
            history: Vec::new(),
            seen: PointSet::new(),
            incumbent: Incumbent::placeholder(space.dim()),
            mesh: MeshState::new(settings.poll_size_init, settings.poll_size_max),
            search: SearchState {
                consecutive_failures: 0,
                radius_scale: settings.search_radius_scale,
                candidates_per_proposal: settings.candidates_per_proposal,
            },
            model: None,
            model_subset: Vec::new(),
            fit_settings,
            rng,
            iteration: 0,
        }
    }

    pub(crate) fn budget_left(&self) -> usize {
        self.settings.max_evaluations.saturating_sub(self.history.len())
    }

    /// Calls the objective once at `unit` and logs the record. Returns its
    /// history index.
    pub(crate) fn evaluate(&mut self, unit: Vec<f64>, stage: Stage) -> Result<usize, EvalError> {
        if self.budget_left() == 0 {
            return Err(EvalError::BudgetExhausted);
        }
        let original = self.space.from_unit(&unit);
        let out = self.objective.evaluate(&original).map_err(EvalError::ObjectiveRaised)?;
        let failed = !out.value.is_finite();
        let noise_sd = out.noise_sd.filter(|s| s.is_finite() && *s >= 0.0);
        let index = self.history.len();
        self.seen.insert(&unit);
        self.history.push(EvaluationRecord {
            index,
            unit_point: unit,
            original_point: original,
            value: out.value,
            failed,
            noise_sd,
            stage,
            iteration: self.iteration,
        });
        Ok(index)
    }

    /// Noise sd used for the sufficient-decrease test of a record.
    fn noise_estimate(&self, record: &EvaluationRecord) -> f64 {
        record
            .noise_sd
            .or_else(|| self.model.as_ref().map(|m| m.hyperparams().noise_sd()))
            .or(self.noise_hint)
            .unwrap_or(0.0)
    }

    pub(crate) fn is_improvement(&self, index: usize) -> bool {
        let record = &self.history[index];
        if record.failed {
            return false;
        }
        if self.noisy {
            let threshold = self.settings.sufficient_decrease_factor * self.noise_estimate(record);
            record.value < self.incumbent.estimated_value - threshold
        } else {
            record.value < self.incumbent.observed_value
        }
    }

    /// Moves the incumbent to a history record.
    pub(crate) fn accept(&mut self, index: usize) {
        let record = &self.history[index];
        let value = record.effective_value();
        let sd = record.noise_sd.unwrap_or(0.0);
        self.incumbent = Incumbent {
            record: index,
            unit_point: record.unit_point.clone(),
            observed_value: value,
            estimated_value: value,
            estimated_sd: 0.0,
        };
        if self.noisy {
            self.incumbent.estimated_sd = sd;
            if self.model.is_some() {
                self.refresh_model();
                self.estimate_incumbent();
            }
        }
    }

    /// Noisy targets: replace the incumbent estimate by the posterior.
    pub(crate) fn estimate_incumbent(&mut self) {
        if let Some(model) = &self.model {
            let (mean, sd) = model.predict(&self.incumbent.unit_point);
            self.incumbent.estimated_value = mean;
            self.incumbent.estimated_sd = sd;
        }
    }

    /// Local training subset around the incumbent, as history indices.
    pub(crate) fn training_subset(&self) -> Vec<usize> {
        let usable: Vec<usize> = self.history.iter().filter(|r| !r.failed).map(|r| r.index).collect();
        let points: Vec<&[f64]> = usable.iter().map(|&i| self.history[i].unit_point.as_slice()).collect();
        let inc_pos = usable.iter().position(|&i| i == self.incumbent.record).unwrap_or(usize::MAX);
        gp::select_training_subset(
            &points,
            &self.incumbent.unit_point,
            inc_pos,
            self.mesh.poll_size(),
            &self.settings.subset,
        )
        .into_iter()
        .map(|k| usable[k])
        .collect()
    }

    fn training_data(&self, subset: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let inputs = subset.iter().map(|&i| self.history[i].unit_point.clone()).collect();
        let values = subset.iter().map(|&i| self.history[i].value).collect();
        let noise = subset.iter().map(|&i| self.history[i].noise_sd.unwrap_or(0.0)).collect();
        (inputs, values, noise)
    }

    /// Reconditions the current model on the current subset without
    /// touching its hyperparameters.
    pub(crate) fn refresh_model(&mut self) {
        let Some(model) = &self.model else { return };
        let hp = model.hyperparams().clone();
        let subset = self.training_subset();
        let (inputs, values, noise) = self.training_data(&subset);
        match GpModel::condition(inputs, values, noise, hp) {
            Ok(m) => {
                self.model = Some(m);
                self.model_subset = subset;
            }
            Err(_) => {
                self.model = None;
                self.model_subset.clear();
            }
        }
    }

    /// Refits hyperparameters when the training subset changed. `full`
    /// adds a fresh heuristic start.
    pub(crate) fn refit_model(&mut self, full: bool) {
        let subset = self.training_subset();
        if subset.len() < 2 {
            return;
        }
        if self.model.is_some() && subset == self.model_subset && !full {
            return;
        }
        let (inputs, values, noise) = self.training_data(&subset);
        let previous = self.model.as_ref().map(|m| m.hyperparams().clone());
        let mut fit_settings = self.fit_settings.clone();
        // Reported per-point sds already carry the noise level; the hint
        // only bounds the shared noise term when some point lacks one.
        if self.noisy && subset.iter().all(|&i| self.history[i].noise_sd.is_some()) {
            fit_settings.noise = gp::NoiseMode::Noisy { floor: 0.0 };
        }
        let fitted = match (&previous, full) {
            (Some(hp), false) => gp::refine(&inputs, &values, &noise, hp, &fit_settings),
            _ => gp::fit(&inputs, &values, &noise, previous.as_ref(), &fit_settings, &mut self.rng),
        };
        match fitted {
            Ok(m) => {
                self.model = Some(m);
                self.model_subset = subset;
            }
            // Keep the old hyperparameters on the new data if the fit failed.
            Err(_) => self.refresh_model(),
        }
    }
}
