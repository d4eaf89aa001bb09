//! Method tags and the common per-point evaluation plumbing shared by every
//! kernel estimator.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{Dataset, Fit};
use crate::delocal::{
    self, de11_general, de1k_linear, ExponentialDe, GeneralFirstOrderDe, LinearFirstOrderDe,
    LipschitzProbe, SolverOptions,
};
use crate::error::{check_bandwidth, Error, Result};
use crate::kernel::Kernel;
use crate::localpoly;
use crate::parametric::{fit_exponential_nls, fit_loglinear, NlsOptions};

/// Kernel weight sums below this mark a grid point as degenerate.
pub const DEGENERATE_WEIGHT: f64 = 1e-12;

/// Identity of an estimator, as used in fit tags, configs and the CLI.
///
/// Text forms: `nw`, `ll`, `lq`, `lc`, `lp4`, `lp5`, `de1-<k>`,
/// `de1lin-<k>`, `de1gen-<k>`, `nls`, `nls-known`, `loglinear`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LocalPoly {
        degree: usize,
    },
    /// DE1-k under the exponential model g' = λg.
    De1 {
        k: usize,
    },
    /// DE1-k under a general linear model g' = a(x)g + b(x).
    De1Linear {
        k: usize,
    },
    /// Nonlinear-DE fit of degree 1 or 2.
    De1General {
        degree: usize,
    },
    Nls,
    /// Nonlinear least squares for `g(a)` with λ held at its known value.
    NlsKnownRate,
    LogLinear,
}

impl Method {
    pub const NW: Method = Method::LocalPoly { degree: 0 };
    pub const LL: Method = Method::LocalPoly { degree: 1 };
    pub const LQ: Method = Method::LocalPoly { degree: 2 };
    pub const LC: Method = Method::LocalPoly { degree: 3 };

    /// Whether the method smooths with a kernel (and so needs a bandwidth).
    pub fn is_kernel(self) -> bool {
        !matches!(self, Method::Nls | Method::NlsKnownRate | Method::LogLinear)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Method::LocalPoly { degree: 0 } => f.write_str("nw"),
            Method::LocalPoly { degree: 1 } => f.write_str("ll"),
            Method::LocalPoly { degree: 2 } => f.write_str("lq"),
            Method::LocalPoly { degree: 3 } => f.write_str("lc"),
            Method::LocalPoly { degree } => write!(f, "lp{degree}"),
            Method::De1 { k } => write!(f, "de1-{k}"),
            Method::De1Linear { k } => write!(f, "de1lin-{k}"),
            Method::De1General { degree } => write!(f, "de1gen-{degree}"),
            Method::Nls => f.write_str("nls"),
            Method::NlsKnownRate => f.write_str("nls-known"),
            Method::LogLinear => f.write_str("loglinear"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let unknown = || Error::Config(format!("unknown method `{s}`"));
        let number = |rest: &str| rest.parse::<usize>().map_err(|_| unknown());
        let method = match lower.as_str() {
            "nw" => Method::NW,
            "ll" => Method::LL,
            "lq" => Method::LQ,
            "lc" => Method::LC,
            "nls" => Method::Nls,
            "nls-known" => Method::NlsKnownRate,
            "loglinear" => Method::LogLinear,
            other => {
                if let Some(rest) = other.strip_prefix("de1lin-") {
                    Method::De1Linear { k: number(rest)? }
                } else if let Some(rest) = other.strip_prefix("de1gen-") {
                    Method::De1General {
                        degree: number(rest)?,
                    }
                } else if let Some(rest) = other.strip_prefix("de1-") {
                    Method::De1 { k: number(rest)? }
                } else if let Some(rest) = other.strip_prefix("lp") {
                    Method::LocalPoly {
                        degree: number(rest)?,
                    }
                } else {
                    return Err(unknown());
                }
            }
        };
        match method {
            Method::LocalPoly { degree } if degree > localpoly::MAX_DEGREE => {
                Err(Error::UnsupportedDegree {
                    degree,
                    max: localpoly::MAX_DEGREE,
                })
            }
            Method::De1 { k } | Method::De1Linear { k } if k > delocal::MAX_K => {
                Err(Error::UnsupportedDegree {
                    degree: k,
                    max: delocal::MAX_K,
                })
            }
            Method::De1General { degree } if !(1..=2).contains(&degree) => {
                Err(Error::UnsupportedDegree { degree, max: 2 })
            }
            m => Ok(m),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A kernel smoother that can be evaluated at single points, optionally
/// leaving one observation out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    LocalPoly { degree: usize },
    De1Exponential { lambda: f64, k: usize },
}

impl Estimator {
    pub fn method(&self) -> Method {
        match *self {
            Estimator::LocalPoly { degree } => Method::LocalPoly { degree },
            Estimator::De1Exponential { k, .. } => Method::De1 { k },
        }
    }

    /// Estimate at `x0`, excluding observation `skip` when given.
    pub fn estimate_at(
        &self,
        data: &Dataset,
        kernel: Kernel,
        h: f64,
        x0: f64,
        skip: Option<usize>,
    ) -> Result<PointEstimate> {
        match *self {
            Estimator::LocalPoly { degree } => {
                localpoly::estimate_at(data, degree, kernel, h, x0, skip)
            }
            Estimator::De1Exponential { lambda, k } => Ok(delocal::exponential_at(
                data, lambda, k, kernel, h, x0, skip,
            )),
        }
    }

    pub fn fit(&self, data: &Dataset, kernel: Kernel, h: f64, grid: &[f64]) -> Result<Fit> {
        match *self {
            Estimator::LocalPoly { degree } => {
                localpoly::fit_local_poly(data, degree, kernel, h, grid)
            }
            Estimator::De1Exponential { lambda, k } => {
                delocal::de1k_exponential(data, &ExponentialDe::new(lambda)?, k, kernel, h, grid)
            }
        }
    }
}

/// A single fitted value; NaN when the local window is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub value: f64,
    pub weight_sum: f64,
}

impl PointEstimate {
    pub fn degenerate(weight_sum: f64) -> Self {
        PointEstimate {
            value: f64::NAN,
            weight_sum,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.value.is_nan()
    }
}

/// Indices of the sorted `xs` that can receive nonzero weight at `x0`.
pub(crate) fn window(xs: &[f64], kernel: Kernel, h: f64, x0: f64) -> Range<usize> {
    let radius = kernel.support_radius().unwrap_or(40.0) * h;
    let lo = xs.partition_point(|&x| x < x0 - radius);
    let hi = xs.partition_point(|&x| x <= x0 + radius);
    lo..hi.max(lo)
}

/// Evaluates `at` on every grid point and assembles a [`Fit`].
pub(crate) fn collect_fit<F>(grid: &[f64], method: Method, h: f64, mut at: F) -> Result<Fit>
where
    F: FnMut(f64) -> Result<PointEstimate>,
{
    check_bandwidth(h)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut weight_sums = Vec::with_capacity(grid.len());
    let mut degenerate = Vec::with_capacity(grid.len());
    for &x0 in grid {
        let est = at(x0)?;
        degenerate.push(est.is_degenerate());
        values.push(est.value);
        weight_sums.push(est.weight_sum);
    }
    Ok(Fit {
        grid: grid.to_vec(),
        values,
        method,
        bandwidth: h,
        weight_sums,
        degenerate,
    })
}

fn parametric_fit(method: Method, grid: &[f64], predict: impl Fn(f64) -> f64) -> Fit {
    let values: Vec<f64> = grid.iter().map(|&x| predict(x)).collect();
    Fit {
        grid: grid.to_vec(),
        degenerate: values.iter().map(|v| v.is_nan()).collect(),
        weight_sums: vec![f64::NAN; grid.len()],
        values,
        method,
        bandwidth: f64::NAN,
    }
}

/// Fits any [`Method`] on `grid`. `lambda` is required by the DE methods
/// and `nls-known`; parametric fits ignore `kernel` and `h`.
pub fn fit_method(
    data: &Dataset,
    method: Method,
    lambda: Option<f64>,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
) -> Result<Fit> {
    let lambda_or = || lambda.ok_or_else(|| Error::Config(format!("method `{method}` needs λ")));
    match method {
        Method::LocalPoly { degree } => Estimator::LocalPoly { degree }.fit(data, kernel, h, grid),
        Method::De1 { k } => Estimator::De1Exponential {
            lambda: lambda_or()?,
            k,
        }
        .fit(data, kernel, h, grid),
        Method::De1Linear { k } => de1k_linear(
            data,
            &LinearFirstOrderDe::exponential(lambda_or()?),
            k,
            kernel,
            h,
            grid,
        ),
        Method::De1General { degree } => {
            let l = lambda_or()?;
            let (a, b) = data.interval();
            let y_max = data.ys().iter().fold(1.0_f64, |m, y| m.max(y.abs()));
            let de = GeneralFirstOrderDe::new(
                move |_, g| l * g,
                LipschitzProbe {
                    x_range: (a, b),
                    g_range: (-y_max, y_max),
                },
            )?
            .with_partials(|_, _| 0.0, move |_, _| l);
            de11_general(data, &de, degree, kernel, h, grid, SolverOptions::default())
        }
        Method::Nls | Method::NlsKnownRate => {
            let fixed_lambda = match method {
                Method::NlsKnownRate => Some(lambda_or()?),
                _ => None,
            };
            let fit = fit_exponential_nls(
                data,
                &NlsOptions {
                    fixed_lambda,
                    ..NlsOptions::default()
                },
            )?;
            if !fit.converged {
                return Err(Error::OptimizerFailure { x0: f64::NAN });
            }
            Ok(parametric_fit(method, grid, |x| fit.predict(x)))
        }
        Method::LogLinear => {
            let fit = fit_loglinear(data)?;
            Ok(parametric_fit(method, grid, |x| fit.predict(x)))
        }
    }
}
