//! Symmetric smoothing kernels and their moment constants.
//!
//! Moments `mu_k = ∫ w^k K(w) dw` and roughness constants
//! `R_k = ∫ w^k K(w)^2 dw` are tabulated in closed form for k ≤ 6, which is
//! as high as any bias or variance formula in the crate needs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_bandwidth, Error, Result};

/// Highest moment/roughness order that is tabulated.
pub const MAX_MOMENT: usize = 6;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

// Gaussian: mu_k = (k-1)!!, R_k = E[W^k] / (2 sqrt(pi)) with W ~ N(0, 1/2).
const GAUSSIAN_MOMENTS: [f64; 7] = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];
const GAUSSIAN_ROUGHNESS_NUM: [f64; 7] = [1.0, 0.0, 0.5, 0.0, 0.75, 0.0, 1.875];

// Epanechnikov 3/4 (1 - u^2) on [-1, 1]:
// mu_k = 3 / ((k+1)(k+3)), R_k = 9/8 (1/(k+1) - 2/(k+3) + 1/(k+5)) for even k.
const EPANECHNIKOV_MOMENTS: [f64; 7] = [1.0, 0.0, 0.2, 0.0, 3.0 / 35.0, 0.0, 1.0 / 21.0];
const EPANECHNIKOV_ROUGHNESS: [f64; 7] = [0.6, 0.0, 3.0 / 35.0, 0.0, 1.0 / 35.0, 0.0, 5.0 / 385.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Unscaled density K(u).
    #[inline]
    pub fn evaluate(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// K_h(u) = K(u / h) / h.
    pub fn eval_scaled(self, u: f64, h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.scaled_unchecked(u, h))
    }

    /// K_h(u) without validating `h`; callers check the bandwidth once per fit.
    #[inline]
    pub(crate) fn scaled_unchecked(self, u: f64, h: f64) -> f64 {
        let t = u / h;
        match self {
            // exp underflows to zero well before this cutoff
            Kernel::Gaussian if t.abs() > 40.0 => 0.0,
            _ => self.evaluate(t) / h,
        }
    }

    /// Half-width of the support in units of h, or `None` for unbounded support.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            Kernel::Gaussian => None,
            Kernel::Epanechnikov => Some(1.0),
        }
    }

    /// mu_k = ∫ w^k K(w) dw.
    pub fn moment(self, k: usize) -> Result<f64> {
        if k > MAX_MOMENT {
            return Err(Error::UnsupportedMoment(k));
        }
        Ok(match self {
            Kernel::Gaussian => GAUSSIAN_MOMENTS[k],
            Kernel::Epanechnikov => EPANECHNIKOV_MOMENTS[k],
        })
    }

    /// mu_k for any order, from the closed forms behind the table.
    pub(crate) fn moment_any(self, k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        match self {
            // (k-1)!!
            Kernel::Gaussian => (1..k).step_by(2).map(|j| j as f64).product(),
            Kernel::Epanechnikov => 3.0 / ((k + 1) * (k + 3)) as f64,
        }
    }

    /// R_k = ∫ w^k K(w)^2 dw. `roughness(0)` is R(K).
    pub fn roughness(self, k: usize) -> Result<f64> {
        if k > MAX_MOMENT {
            return Err(Error::UnsupportedMoment(k));
        }
        Ok(match self {
            Kernel::Gaussian => GAUSSIAN_ROUGHNESS_NUM[k] / (2.0 * PI.sqrt()),
            Kernel::Epanechnikov => EPANECHNIKOV_ROUGHNESS[k],
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}
