use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthGrid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::kernel::Kernel;

/// A caller-supplied mean function replacing the exponential truth.
pub type TruthFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The regression truth `g(x) = g0 e^{λx}`, or a custom function.
///
/// Estimators that need λ always receive `lambda`, even when `custom` is set.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub g0: f64,
    pub lambda: f64,
    #[serde(skip)]
    pub custom: Option<TruthFn>,
}

impl Truth {
    pub fn exponential(g0: f64, lambda: f64) -> Self {
        Truth {
            g0,
            lambda,
            custom: None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.custom {
            Some(g) => g(x),
            None => self.g0 * (self.lambda * x).exp(),
        }
    }
}

impl fmt::Debug for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Truth")
            .field("g0", &self.g0)
            .field("lambda", &self.lambda)
            .field("custom", &self.custom.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

/// How covariates are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    UniformRandom {
        a: f64,
        b: f64,
    },
    BetaRandom {
        alpha: f64,
        beta: f64,
    },
    /// Deterministic design at the quantiles `i/(n+1)`, `i = 1..n`.
    BetaQuantile {
        alpha: f64,
        beta: f64,
    },
    /// Draws from `base`, then drops every point in the closed `gap`.
    Gapped {
        base: Box<DesignSpec>,
        gap: (f64, f64),
    },
}

impl DesignSpec {
    /// The interval `[a, b]` carrying the design.
    pub fn interval(&self) -> (f64, f64) {
        match self {
            DesignSpec::UniformRandom { a, b } => (*a, *b),
            DesignSpec::BetaRandom { .. } | DesignSpec::BetaQuantile { .. } => (0.0, 1.0),
            DesignSpec::Gapped { base, .. } => base.interval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DesignSpec::UniformRandom { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Config(format!(
                        "design: invalid interval [{a}, {b}]"
                    )));
                }
            }
            DesignSpec::BetaRandom { alpha, beta } | DesignSpec::BetaQuantile { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::Config(format!(
                        "design: beta shapes must be positive, got ({alpha}, {beta})"
                    )));
                }
            }
            DesignSpec::Gapped { base, gap } => {
                base.validate()?;
                let (a, b) = base.interval();
                if !(gap.0 <= gap.1 && gap.0 >= a && gap.1 <= b) {
                    return Err(Error::Config(format!(
                        "design: gap [{}, {}] must lie inside [{a}, {b}]",
                        gap.0, gap.1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Additive noise distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Mean zero with standard deviation `sigma`.
    Normal {
        sigma: f64,
    },
    /// Standard Student t, unscaled.
    StudentT {
        nu: f64,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::Normal { sigma } => sigma > 0.0 && sigma.is_finite(),
            NoiseSpec::StudentT { nu } => nu > 2.0 && nu.is_finite(),
            NoiseSpec::Laplace { location, scale } => {
                location.is_finite() && scale > 0.0 && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("noise: invalid parameters {self:?}")))
        }
    }

    /// Noise variance, when finite.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Normal { sigma } => sigma * sigma,
            NoiseSpec::StudentT { nu } => nu / (nu - 2.0),
            NoiseSpec::Laplace { scale, .. } => 2.0 * scale * scale,
        }
    }
}

/// Candidate bandwidths for cross-validation, built per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CvGrid {
    /// [`BandwidthGrid::default_for`].
    #[default]
    MedianSpacing,
    /// [`BandwidthGrid::rule_of_thumb_span`].
    RuleOfThumb {
        upper: f64,
        count: usize,
    },
    Explicit {
        values: BandwidthGrid,
    },
}

impl CvGrid {
    pub fn build(&self, data: &Dataset) -> Result<BandwidthGrid> {
        match self {
            CvGrid::MedianSpacing => BandwidthGrid::default_for(data),
            CvGrid::RuleOfThumb { upper, count } => {
                BandwidthGrid::rule_of_thumb_span(data, *upper, *count)
            }
            CvGrid::Explicit { values } => Ok(values.clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CvGrid::RuleOfThumb { upper, count } if !(*upper >= 1.0) || *count == 0 => {
                Err(Error::Config(
                    "bandwidth_policy: rule-of-thumb grid needs upper >= 1 and count >= 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Bandwidth choice for every kernel method in a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthPolicy {
    /// Leave-one-out CV per replication and method.
    Loocv {
        #[serde(default)]
        grid: CvGrid,
    },
    Fixed {
        h: f64,
    },
    /// Asymptotically optimal bandwidth at `x0` (default: interval midpoint)
    /// from the true σ², λ, g and design density.
    CorollaryOptimal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
    },
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::Loocv {
            grid: CvGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub truth: Truth,
    pub design: DesignSpec,
    pub noise: NoiseSpec,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub bandwidth_policy: BandwidthPolicy,
    #[serde(default)]
    pub kernel: Kernel,
}

impl SimConfig {
    /// Parses a JSON config; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if !(self.truth.g0.is_finite() && self.truth.lambda.is_finite()) {
            return Err(Error::Config("truth parameters must be finite".into()));
        }
        for m in &self.methods {
            if matches!(m, Method::De1Linear { .. } | Method::De1General { .. }) {
                return Err(Error::Config(format!(
                    "methods: `{m}` needs a user-supplied differential equation and cannot run in a study"
                )));
            }
        }
        self.design.validate()?;
        self.noise.validate()?;
        match &self.bandwidth_policy {
            BandwidthPolicy::Fixed { h } => crate::error::check_bandwidth(*h)?,
            BandwidthPolicy::Loocv { grid } => grid.validate()?,
            BandwidthPolicy::CorollaryOptimal { .. } => {}
        }
        Ok(())
    }
}
