//! TOML run configuration.
//!
//! ```toml
//! sense = "minimize"        # or "maximize"
//! seed = 42
//! workers = 1
//!
//! [budget]
//! max_evaluations = 180
//! max_seconds = 600.0
//! target_value = 0.3979
//!
//! [evaluator]
//! builtin = "branin"        # or: command = ["python3", "train.py"], timeout_seconds = 3600
//!
//! [domain]                  # raw box, optional for builtin functions
//! lower = [-5.0, 0.0]
//! upper = [10.0, 15.0]
//! integer = []
//!
//! [space]                   # hyperparameter space, instead of [domain]
//! encoding = "count_variable"
//! params = [{ name = "lr", kind = "log10_continuous", low = -4.0, high = -1.0 }]
//! groups = [{ name = "hidden", max_layers = 3, size_low = 1, size_high = 100 }]
//!
//! [proposer]
//! weights = [0.95, 0.75, 0.5, 0.25, 0.05]
//! kernel = "thin_plate_spline"
//! local_radii = [0.2, 0.05, 0.01]   # [] turns local steps off
//! value_transform = "identity"      # or "clip_median"
//!
//! [ga]                      # every field optional
//! population_size = 100
//! generations = 20
//! mutation_rate = 0.1
//! elite_fraction = 0.25
//! ```

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, ObjectiveSense};
use crate::engine::{Budget, EngineConfig, Objective, ValueTransform};
use crate::error::ConfigError;
use crate::hpo::HpoSpace;
use crate::io::protocol::ExternalEvaluator;
use crate::io::testfns::{self, TestFunction};
use crate::proposer::{GaConfig, WeightCycle};
use crate::surrogate::Kernel;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub max_evaluations: Option<usize>,
    pub max_seconds: Option<f64>,
    pub target_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSection {
    pub builtin: Option<String>,
    pub command: Option<Vec<String>>,
    pub timeout_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub integer: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposerSection {
    pub weights: Option<Vec<f64>>,
    pub kernel: Option<Kernel>,
    pub local_radii: Option<Vec<f64>>,
    pub value_transform: Option<ValueTransform>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub population_size: Option<usize>,
    pub generations: Option<usize>,
    pub mutation_rate: Option<f64>,
    pub elite_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sense: ObjectiveSense,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub evaluator: EvaluatorSection,
    pub domain: Option<DomainSection>,
    pub space: Option<HpoSpace>,
    #[serde(default)]
    pub proposer: ProposerSection,
    #[serde(default)]
    pub ga: GaSection,
}

fn one() -> usize {
    1
}

pub enum Evaluator {
    Builtin(&'static TestFunction),
    External(ExternalEvaluator),
}

impl Objective for Evaluator {
    fn evaluate(&self, x: &[f64]) -> Result<f64, crate::error::EvalError> {
        match self {
            Evaluator::Builtin(f) => Ok(f.eval(x)),
            Evaluator::External(e) => e.evaluate(x),
        }
    }
}

/// Everything needed to start a run.
pub struct ResolvedRun {
    pub domain: BoxDomain,
    pub space: Option<HpoSpace>,
    pub sense: ObjectiveSense,
    pub budget: Budget,
    pub engine: EngineConfig,
    pub workers: usize,
    pub seed: u64,
    pub evaluator: Evaluator,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The search box: `[space]`, else `[domain]`, else the builtin function's box.
    pub fn domain(&self) -> Result<BoxDomain, ConfigError> {
        let builtin = self.evaluator.builtin.as_deref().map(testfns::lookup).transpose()?;
        let domain = match (&self.space, &self.domain) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("give either [space] or [domain], not both".into())),
            (Some(s), None) => s.to_domain()?,
            (None, Some(d)) => BoxDomain::new(d.lower.clone(), d.upper.clone(), d.integer.clone())?,
            (None, None) => match builtin {
                Some(f) => f.domain(),
                None => return Err(ConfigError::Invalid("no [domain] or [space] given".into())),
            },
        };
        if let Some(f) = builtin {
            if domain.dim() != f.dim {
                return Err(ConfigError::Invalid(format!(
                    "function {} has dimension {}, domain has {}",
                    f.name,
                    f.dim,
                    domain.dim()
                )));
            }
        }
        Ok(domain)
    }

    pub fn engine_config(&self, n: usize) -> Result<EngineConfig, ConfigError> {
        let mut engine = EngineConfig::default();
        if let Some(w) = &self.proposer.weights {
            engine.weights = WeightCycle::new(w.clone())
                .ok_or_else(|| ConfigError::Invalid("weights must be a nonempty list of values in [0, 1]".into()))?;
        }
        if let Some(k) = self.proposer.kernel {
            engine.kernel = k;
        }
        if let Some(r) = &self.proposer.local_radii {
            engine.local_radii = r.clone();
        }
        if let Some(t) = self.proposer.value_transform {
            engine.value_transform = t;
        }
        let g = &self.ga;
        if g != &GaSection::default() {
            let base = GaConfig::for_dimension(n);
            engine.ga = Some(GaConfig {
                population_size: g.population_size.unwrap_or(base.population_size),
                generations: g.generations.unwrap_or(base.generations),
                mutation_rate: g.mutation_rate.unwrap_or(base.mutation_rate),
                elite_fraction: g.elite_fraction.unwrap_or(base.elite_fraction),
            });
        }
        engine.validate(n)?;
        Ok(engine)
    }

    pub fn budget(&self) -> Result<Budget, ConfigError> {
        let max_wallclock = match self.budget.max_seconds {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                return Err(ConfigError::Invalid(format!("max_seconds must be positive, got {s}")))
            }
            s => s.map(Duration::from_secs_f64),
        };
        Ok(Budget { max_evaluations: self.budget.max_evaluations, max_wallclock, target_value: self.budget.target_value })
    }

    /// Validates the whole configuration and builds the evaluator.
    pub fn resolve(&self) -> Result<ResolvedRun, ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        let domain = self.domain()?;
        let engine = self.engine_config(domain.dim())?;
        let budget = self.budget()?;
        budget.validate(engine.design_size(domain.dim()))?;
        let evaluator = match (&self.evaluator.builtin, &self.evaluator.command) {
            (Some(name), None) => Evaluator::Builtin(testfns::lookup(name)?),
            (None, Some(cmd)) => {
                if cmd.is_empty() {
                    return Err(ConfigError::Invalid("evaluator command is empty".into()));
                }
                let timeout = match self.evaluator.timeout_seconds {
                    Some(t) if t.is_finite() && t > 0.0 => Duration::from_secs_f64(t),
                    Some(t) => return Err(ConfigError::Invalid(format!("timeout_seconds must be positive, got {t}"))),
                    None => Duration::from_secs(3600),
                };
                Evaluator::External(ExternalEvaluator::new(cmd.clone(), timeout, self.space.clone()))
            }
            _ => return Err(ConfigError::Invalid("[evaluator] needs exactly one of builtin or command".into())),
        };
        Ok(ResolvedRun {
            domain,
            space: self.space.clone(),
            sense: self.sense,
            budget,
            engine,
            workers: self.workers,
            seed: self.seed,
            evaluator,
        })
    }
}
