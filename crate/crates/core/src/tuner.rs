//! Coordinate-wise Gibbs search over the seven tunable thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::pipeline::Pipeline;
use crate::textsim::rouge_l_sum;
use crate::types::{SystemParams, ValueKind};

/// One tunable scalar of [`SystemParams`]. `beam_count` is not tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coordinate {
    Relevance(ValueKind),
    Embed(ValueKind),
    Ngram,
}

impl Coordinate {
    pub const ALL: [Coordinate; 7] = [
        Coordinate::Relevance(ValueKind::Value),
        Coordinate::Relevance(ValueKind::Right),
        Coordinate::Relevance(ValueKind::Duty),
        Coordinate::Embed(ValueKind::Value),
        Coordinate::Embed(ValueKind::Right),
        Coordinate::Embed(ValueKind::Duty),
        Coordinate::Ngram,
    ];

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            Coordinate::Relevance(k) => p.relevance_threshold.get(k),
            Coordinate::Embed(k) => p.embed_threshold.get(k),
            Coordinate::Ngram => p.ngram_threshold,
        }
    }

    pub fn set(self, p: &mut SystemParams, v: f64) {
        match self {
            Coordinate::Relevance(k) => p.relevance_threshold.set(k, v),
            Coordinate::Embed(k) => p.embed_threshold.set(k, v),
            Coordinate::Ngram => p.ngram_threshold = v,
        }
    }

    pub fn name(self) -> String {
        match self {
            Coordinate::Relevance(k) => format!("relevance_threshold.{k}"),
            Coordinate::Embed(k) => format!("embed_threshold.{k}"),
            Coordinate::Ngram => "ngram_threshold".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindGrid {
    #[serde(rename = "Value")]
    pub value: Vec<f64>,
    #[serde(rename = "Right")]
    pub right: Vec<f64>,
    #[serde(rename = "Duty")]
    pub duty: Vec<f64>,
}

impl KindGrid {
    pub fn uniform(values: Vec<f64>) -> Self {
        KindGrid {
            value: values.clone(),
            right: values.clone(),
            duty: values,
        }
    }

    pub fn get(&self, kind: ValueKind) -> &[f64] {
        match kind {
            ValueKind::Value => &self.value,
            ValueKind::Right => &self.right,
            ValueKind::Duty => &self.duty,
        }
    }
}

/// Candidate values per coordinate. Same key layout as [`SystemParams`], with lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub relevance_threshold: KindGrid,
    pub embed_threshold: KindGrid,
    pub ngram_threshold: Vec<f64>,
}

impl ParamGrid {
    pub fn axis(&self, c: Coordinate) -> &[f64] {
        match c {
            Coordinate::Relevance(k) => self.relevance_threshold.get(k),
            Coordinate::Embed(k) => self.embed_threshold.get(k),
            Coordinate::Ngram => &self.ngram_threshold,
        }
    }

    /// A grid holding exactly the values of `p`.
    pub fn point(p: &SystemParams) -> Self {
        let kinds = |f: &dyn Fn(ValueKind) -> f64| KindGrid {
            value: vec![f(ValueKind::Value)],
            right: vec![f(ValueKind::Right)],
            duty: vec![f(ValueKind::Duty)],
        };
        ParamGrid {
            relevance_threshold: kinds(&|k| p.relevance_threshold.get(k)),
            embed_threshold: kinds(&|k| p.embed_threshold.get(k)),
            ngram_threshold: vec![p.ngram_threshold],
        }
    }

    pub fn set_axis(&mut self, c: Coordinate, values: Vec<f64>) {
        let slot = match c {
            Coordinate::Relevance(ValueKind::Value) => &mut self.relevance_threshold.value,
            Coordinate::Relevance(ValueKind::Right) => &mut self.relevance_threshold.right,
            Coordinate::Relevance(ValueKind::Duty) => &mut self.relevance_threshold.duty,
            Coordinate::Embed(ValueKind::Value) => &mut self.embed_threshold.value,
            Coordinate::Embed(ValueKind::Right) => &mut self.embed_threshold.right,
            Coordinate::Embed(ValueKind::Duty) => &mut self.embed_threshold.duty,
            Coordinate::Ngram => &mut self.ngram_threshold,
        };
        *slot = values;
    }

    pub fn validate(&self) -> Result<()> {
        for c in Coordinate::ALL {
            let axis = self.axis(c);
            if axis.is_empty() {
                return Err(Error::invalid_params(c.name(), "grid axis is empty"));
            }
            if let Some(v) = axis.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
                return Err(Error::invalid_params(c.name(), format!("grid value {v} is outside [0,1]")));
            }
            if axis.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::invalid_params(c.name(), "grid axis is not sorted ascending"));
            }
        }
        Ok(())
    }

    fn index_of(&self, c: Coordinate, p: &SystemParams) -> Result<usize> {
        let v = c.get(p);
        self.axis(c)
            .iter()
            .position(|g| *g == v)
            .ok_or_else(|| Error::invalid_params(c.name(), format!("initial value {v} is not on the grid")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TemperatureSchedule {
    Constant { temperature: f64 },
    /// `initial * ratio^sweep`, except the final sweep which runs at 0.
    Geometric { initial: f64, ratio: f64 },
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        TemperatureSchedule::Geometric { initial: 0.1, ratio: 0.5 }
    }
}

impl TemperatureSchedule {
    pub fn at(&self, sweep: usize, sweeps: usize) -> f64 {
        match *self {
            TemperatureSchedule::Constant { temperature } => temperature,
            TemperatureSchedule::Geometric { .. } if sweep + 1 >= sweeps => 0.0,
            TemperatureSchedule::Geometric { initial, ratio } => initial * ratio.powi(sweep as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TemperatureSchedule::Constant { temperature } => temperature.is_finite() && temperature >= 0.0,
            TemperatureSchedule::Geometric { initial, ratio } => {
                initial.is_finite() && initial >= 0.0 && ratio.is_finite() && ratio >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid_params("temperature", "must be finite and non-negative"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub params: SystemParams,
    pub objective: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrace {
    pub visited: Vec<TraceStep>,
    pub best_params: SystemParams,
    pub best_objective: f64,
}

impl TuneTrace {
    fn record(&mut self, params: SystemParams, objective: f64) {
        if objective > self.best_objective {
            self.best_objective = objective;
            self.best_params = params;
        }
        self.visited.push(TraceStep {
            params,
            objective,
            best_so_far: self.best_objective,
        });
    }
}

#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub sweeps: usize,
    pub schedule: TemperatureSchedule,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            sweeps: 3,
            schedule: TemperatureSchedule::default(),
            seed: 0,
            exec: Execution::default(),
        }
    }
}

fn sample_index(objectives: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let best = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature == 0.0 {
        return objectives.iter().position(|o| *o == best).expect("non-empty axis");
    }
    let weights: Vec<f64> = objectives.iter().map(|o| ((o - best) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Round-robin over the coordinates. For each one, every grid value is
/// evaluated with the others fixed and the next value is drawn with
/// probability proportional to `exp(objective / T)`; `T = 0` takes the
/// argmax (lowest grid index on ties).
pub fn gibbs_tune<F>(grid: &ParamGrid, init: &SystemParams, cfg: &TuneConfig, objective: F) -> Result<TuneTrace>
where
    F: Fn(&SystemParams) -> Result<f64> + Sync + Send,
{
    grid.validate()?;
    cfg.schedule.validate()?;
    init.validate()?;
    for c in Coordinate::ALL {
        grid.index_of(c, init)?;
    }
    let checked = |p: &SystemParams| -> Result<f64> {
        let v = objective(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("objective returned {v}")))
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = *init;
    let start = checked(&current)?;
    let mut trace = TuneTrace {
        visited: Vec::new(),
        best_params: current,
        best_objective: f64::NEG_INFINITY,
    };
    trace.record(current, start);

    for sweep in 0..cfg.sweeps {
        let temperature = cfg.schedule.at(sweep, cfg.sweeps);
        for c in Coordinate::ALL {
            let candidates: Vec<SystemParams> = grid
                .axis(c)
                .iter()
                .map(|v| {
                    let mut p = current;
                    c.set(&mut p, *v);
                    p
                })
                .collect();
            let objectives = par::try_map(cfg.exec, &candidates, |p| checked(p))?;
            for (p, o) in candidates.iter().zip(&objectives) {
                trace.record(*p, *o);
            }
            current = candidates[sample_index(&objectives, temperature, &mut rng)];
        }
    }
    Ok(trace)
}

/// One action with its reference items (`"Kind: text"` strings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub action: String,
    pub references: Vec<String>,
}

/// Mean Rouge-L-Sum F1 of pipeline output items against the references.
pub fn objective(backend: &dyn Backend, params: &SystemParams, eval_set: &[EvalItem], exec: Execution) -> Result<f64> {
    if eval_set.is_empty() {
        return Err(Error::InvalidInput("eval set is empty".into()));
    }
    let pipeline = Pipeline::new(backend).with_execution(exec);
    let mut total = 0.0;
    for item in eval_set {
        let out = pipeline.generate_values(&item.action, params)?;
        let items: Vec<String> = out.candidates.iter().map(|c| c.entry.generation_target()).collect();
        total += rouge_l_sum(&items, &item.references).f1;
    }
    Ok(total / eval_set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with(xs: Vec<f64>, ys: Vec<f64>, base: &SystemParams) -> ParamGrid {
        let mut g = ParamGrid::point(base);
        g.set_axis(Coordinate::Relevance(ValueKind::Value), xs);
        g.set_axis(Coordinate::Embed(ValueKind::Value), ys);
        g
    }

    fn separable(p: &SystemParams) -> Result<f64> {
        let x = p.relevance_threshold.value;
        let y = p.embed_threshold.value;
        Ok(-(x - 0.5).powi(2) - (y - 0.25).powi(2))
    }

    #[test]
    fn zero_temperature_reaches_optimum() {
        let axis = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut init = SystemParams::published();
        init.relevance_threshold.value = 1.0;
        init.embed_threshold.value = 1.0;
        let grid = grid_with(axis.clone(), axis, &init);
        let cfg = TuneConfig {
            sweeps: 1,
            schedule: TemperatureSchedule::Constant { temperature: 0.0 },
            ..TuneConfig::default()
        };
        let t = gibbs_tune(&grid, &init, &cfg, separable).unwrap();
        assert_eq!(t.best_params.relevance_threshold.value, 0.5);
        assert_eq!(t.best_params.embed_threshold.value, 0.25);
        assert_eq!(t.best_objective, 0.0);
    }

    #[test]
    fn constant_objective() {
        let init = SystemParams::published();
        let grid = grid_with(vec![0.1, 0.77], vec![0.53, 0.9], &init);
        let t = gibbs_tune(&grid, &init, &TuneConfig::default(), |_| Ok(0.25)).unwrap();
        assert_eq!(t.best_objective, 0.25);
    }

    #[test]
    fn init_must_be_on_grid() {
        let init = SystemParams::published();
        let grid = grid_with(vec![0.1, 0.2], vec![0.53], &init);
        assert!(matches!(
            gibbs_tune(&grid, &init, &TuneConfig::default(), separable),
            Err(Error::InvalidParams { .. })
        ));
    }

    #[test]
    fn grid_validation() {
        let init = SystemParams::published();
        assert!(grid_with(vec![0.2, 0.1], vec![0.53], &init).validate().is_err());
        assert!(grid_with(vec![], vec![0.53], &init).validate().is_err());
        assert!(grid_with(vec![0.77, 1.5], vec![0.53], &init).validate().is_err());
        assert!(grid_with(vec![0.77], vec![0.53], &init).validate().is_ok());
    }

    #[test]
    fn geometric_ends_cold() {
        let s = TemperatureSchedule::Geometric { initial: 1.0, ratio: 0.5 };
        assert_eq!(s.at(0, 3), 1.0);
        assert_eq!(s.at(1, 3), 0.5);
        assert_eq!(s.at(2, 3), 0.0);
    }

    #[test]
    fn grid_json_shape() {
        let g: ParamGrid = serde_json::from_str(
            r#"{"relevance_threshold":{"Value":[0.7,0.77],"Right":[0.82],"Duty":[0.9]},
                "embed_threshold":{"Value":[0.53],"Right":[0.63],"Duty":[0.55]},
                "ngram_threshold":[0.05]}"#,
        )
        .unwrap();
        assert_eq!(g.axis(Coordinate::Relevance(ValueKind::Value)), &[0.7, 0.77]);
        assert!(g.index_of(Coordinate::Ngram, &SystemParams::published()).is_ok());
    }

    #[test]
    fn seeded_runs_repeat() {
        let axis = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut init = SystemParams::published();
        init.relevance_threshold.value = 0.0;
        init.embed_threshold.value = 0.0;
        let grid = grid_with(axis.clone(), axis, &init);
        let cfg = TuneConfig {
            sweeps: 4,
            schedule: TemperatureSchedule::Constant { temperature: 0.05 },
            seed: 11,
            exec: Execution::Parallel,
        };
        let a = gibbs_tune(&grid, &init, &cfg, separable).unwrap();
        let b = gibbs_tune(&grid, &init, &TuneConfig { exec: Execution::Sequential, ..cfg.clone() }, separable).unwrap();
        assert_eq!(a, b);
        assert!(a.visited.windows(2).all(|w| w[0].best_so_far <= w[1].best_so_far));
    }
}
