//! Leading-order bias, variance and AMSE of DE1-k and of the local
//! polynomial baselines under the exponential model, for interior points.
//!
//! The double-smoothing estimator's constants `B(x₀)` and `V` are not
//! provided.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticContext {
    pub lambda: f64,
    /// True mean g(x₀).
    pub g_x0: f64,
    pub h: f64,
    pub n: usize,
    pub sigma2: f64,
    pub f_x0: f64,
    pub fprime_x0: f64,
    pub kernel: Kernel,
}

impl AsymptoticContext {
    pub fn validate(&self) -> Result<()> {
        crate::error::check_bandwidth(self.h)?;
        if self.n == 0 || !(self.f_x0 > 0.0) || !(self.sigma2 >= 0.0) {
            return Err(Error::Config(
                "asymptotic context needs n >= 1, f(x0) > 0 and sigma2 >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn with_h(self, h: f64) -> Self {
        AsymptoticContext { h, ..self }
    }

    fn log_density_slope(&self) -> f64 {
        self.fprime_x0 / self.f_x0
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Leading conditional bias of DE1-k.
///
/// Odd k: `λ^{k+1} g h^{k+1} μ_{k+1} / (k+1)!`.
/// Even k: `λ^{k+1} g h^{k+2} μ_{k+2} (λ/(k+2) + f'/f) / (k+1)!`, which is
/// `(g^{(k+2)}/(k+2)! + g^{(k+1)}/(k+1)! · f'/f) h^{k+2} μ_{k+2}` with
/// `g^{(p)} = λ^p g`. At `k = 0` this is the Nadaraya–Watson bias.
///
/// The tabulated DE1-2 entry elsewhere in the literature prints `(λ + f'/f)`
/// and a repeated `μ₄`; this function keeps the `λ/(k+2)` form.
pub fn de1k_bias(k: usize, ctx: &AsymptoticContext) -> f64 {
    let AsymptoticContext {
        lambda,
        g_x0,
        h,
        kernel,
        ..
    } = *ctx;
    let lead = lambda.powi(k as i32 + 1) * g_x0 / factorial(k + 1);
    if k % 2 == 1 {
        lead * h.powi(k as i32 + 1) * kernel.moment_any(k + 1)
    } else {
        lead * h.powi(k as i32 + 2)
            * kernel.moment_any(k + 2)
            * (lambda / (k + 2) as f64 + ctx.log_density_slope())
    }
}

/// `σ² R(K) / (n h f(x₀))`, the same for every k.
pub fn de1k_variance(ctx: &AsymptoticContext) -> f64 {
    ctx.sigma2 * ctx.kernel.roughness(0).expect("R_0 is tabulated")
        / (ctx.n as f64 * ctx.h * ctx.f_x0)
}

/// The bias term inside [`amse`].
///
/// Odd k: identical to [`de1k_bias`]. Even k: the shift factor is
/// `(λ + f'/f)`, the form from which the closed-form optimal bandwidths and
/// their degree recursion are derived, so that
/// [`crate::bandwidth::optimal_bandwidth`] is exactly the AMSE minimizer.
pub fn amse_bias(k: usize, ctx: &AsymptoticContext) -> f64 {
    if k % 2 == 1 {
        return de1k_bias(k, ctx);
    }
    let AsymptoticContext {
        lambda,
        g_x0,
        h,
        kernel,
        ..
    } = *ctx;
    lambda.powi(k as i32 + 1) * g_x0 / factorial(k + 1)
        * h.powi(k as i32 + 2)
        * kernel.moment_any(k + 2)
        * (lambda + ctx.log_density_slope())
}

/// `amse_bias(k)² + de1k_variance`.
pub fn amse(k: usize, ctx: &AsymptoticContext) -> f64 {
    amse_bias(k, ctx).powi(2) + de1k_variance(ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Nw,
    Ll,
    Lq,
    Lc,
}

/// Leading `(bias, variance)` of the local polynomial baselines when the
/// truth is exponential, so `g^{(p)}(x₀) = λ^p g(x₀)`.
pub fn baseline_bias_variance(method: BaselineMethod, ctx: &AsymptoticContext) -> (f64, f64) {
    let AsymptoticContext {
        lambda,
        g_x0,
        h,
        kernel,
        ..
    } = *ctx;
    let mu = |k| kernel.moment_any(k);
    let v = |k| kernel.roughness(k).expect("R_0..R_4 are tabulated");
    let slope = ctx.log_density_slope();
    let scale = ctx.sigma2 / (ctx.n as f64 * h * ctx.f_x0);
    let (mu2, mu4, mu6) = (mu(2), mu(4), mu(6));
    let quartic_factor = (mu2 * mu6 - mu4 * mu4) / (mu2 * mu2 - mu4);
    let quartic_variance = scale * (mu4 * mu4 * v(0) - 2.0 * mu2 * mu4 * v(2) + mu2 * mu2 * v(4))
        / (mu2 * mu2 - mu4).powi(2);
    match method {
        BaselineMethod::Nw => (
            0.5 * (lambda * lambda * g_x0 + 2.0 * lambda * g_x0 * slope) * h * h * mu2,
            scale * v(0),
        ),
        BaselineMethod::Ll => (0.5 * lambda * lambda * g_x0 * h * h * mu2, scale * v(0)),
        BaselineMethod::Lq => (
            quartic_factor / 24.0
                * (lambda.powi(4) * g_x0 + 4.0 * lambda.powi(3) * g_x0 * slope)
                * h.powi(4),
            quartic_variance,
        ),
        BaselineMethod::Lc => (
            quartic_factor / 24.0 * lambda.powi(4) * g_x0 * h.powi(4),
            quartic_variance,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth::{optimal_bandwidth, OptimalBandwidthInputs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> AsymptoticContext {
        AsymptoticContext {
            lambda: 1.0,
            g_x0: 0.5f64.exp(),
            h: 0.1,
            n: 10_000,
            sigma2: 0.01,
            f_x0: 1.0,
            fprime_x0: 0.0,
            kernel: Kernel::Gaussian,
        }
    }

    fn bandwidth_inputs(c: &AsymptoticContext) -> OptimalBandwidthInputs {
        OptimalBandwidthInputs {
            sigma2: c.sigma2,
            n: c.n,
            f_x0: c.f_x0,
            fprime_x0: Some(c.fprime_x0),
            lambda: c.lambda,
            x0: 0.5,
            g0: 1.0,
            kernel: c.kernel,
        }
    }

    #[test]
    fn worked_values() {
        let c = ctx();
        assert!((de1k_bias(1, &c) - 0.5 * 0.5f64.exp() * 0.01).abs() < 1e-15);
        assert!((de1k_bias(1, &c) - 0.008_243_6).abs() < 1e-7);
        assert!((de1k_variance(&c) - 2.820_948e-6).abs() < 1e-12);
        let flat = AsymptoticContext { lambda: 0.0, ..c };
        for k in 0..=7 {
            assert_eq!(de1k_bias(k, &flat), 0.0);
        }
    }

    #[test]
    fn degree_ratio_and_variance_scaling() {
        let c = AsymptoticContext {
            lambda: 1.7,
            ..ctx()
        };
        let ratio = de1k_bias(3, &c) / de1k_bias(1, &c);
        let expected = c.lambda.powi(2) * c.h * c.h / 12.0 * 3.0;
        assert!((ratio - expected).abs() < 1e-12 * expected);
        let doubled = AsymptoticContext { n: 20_000, ..c };
        assert!((de1k_variance(&doubled) - 0.5 * de1k_variance(&c)).abs() < 1e-20);
        let other = AsymptoticContext { lambda: -3.0, ..c };
        assert_eq!(de1k_variance(&other), de1k_variance(&c));
    }

    #[test]
    fn even_form_equals_derivative_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let c = AsymptoticContext {
                lambda: rng.random_range(-2.0..2.0),
                g_x0: rng.random_range(0.1..5.0),
                h: rng.random_range(0.01..0.5),
                n: 100,
                sigma2: 0.04,
                f_x0: rng.random_range(0.2..3.0),
                fprime_x0: rng.random_range(-2.0..2.0),
                kernel: if rng.random_bool(0.5) {
                    Kernel::Gaussian
                } else {
                    Kernel::Epanechnikov
                },
            };
            for k in [0usize, 2, 4, 6] {
                let deriv = |p: usize| c.lambda.powi(p as i32) * c.g_x0;
                let main = (deriv(k + 2) / factorial(k + 2)
                    + deriv(k + 1) / factorial(k + 1) * c.fprime_x0 / c.f_x0)
                    * c.h.powi(k as i32 + 2)
                    * c.kernel.moment_any(k + 2);
                let ours = de1k_bias(k, &c);
                assert!(
                    (main - ours).abs() <= 1e-12 * main.abs().max(1e-300),
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn baseline_rows() {
        let c = AsymptoticContext {
            lambda: 1.3,
            ..ctx()
        };
        let (nw, nw_var) = baseline_bias_variance(BaselineMethod::Nw, &c);
        let (ll, ll_var) = baseline_bias_variance(BaselineMethod::Ll, &c);
        assert!((nw - ll).abs() < 1e-15);
        assert!((ll - de1k_bias(1, &c)).abs() < 1e-15);
        assert_eq!(nw_var, de1k_variance(&c));
        assert_eq!(ll_var, nw_var);
        // NW is DE1-0 when the design slope is present too
        let sloped = AsymptoticContext {
            fprime_x0: 0.7,
            ..c
        };
        let nw = baseline_bias_variance(BaselineMethod::Nw, &sloped).0;
        assert!((nw - de1k_bias(0, &sloped)).abs() < 1e-14);
        let (lc, lc_var) = baseline_bias_variance(BaselineMethod::Lc, &c);
        let expected = -c.lambda.powi(4) * c.g_x0 * c.h.powi(4) / 8.0;
        assert!((lc - expected).abs() < 1e-14 * expected.abs());
        let (lq, lq_var) = baseline_bias_variance(BaselineMethod::Lq, &c);
        assert!((lq - lc).abs() < 1e-15);
        assert_eq!(lq_var, lc_var);
        // Gaussian fourth-order equivalent kernel: 27/(32 sqrt(pi)) / (n h f) σ²
        let equivalent =
            27.0 / (32.0 * std::f64::consts::PI.sqrt()) * c.sigma2 / (c.n as f64 * c.h);
        assert!((lc_var - equivalent).abs() < 1e-12 * equivalent);
    }

    #[test]
    fn amse_dominates_variance_and_scales() {
        let c = ctx();
        for k in 0..=5 {
            assert!(amse(k, &c) >= de1k_variance(&c));
            let c2 = c.with_h(2.0 * c.h);
            let p = if k % 2 == 1 { k + 1 } else { k + 2 } as i32;
            let expected = amse_bias(k, &c).powi(2) * 4f64.powi(p) + de1k_variance(&c) / 2.0;
            assert!((amse(k, &c2) - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn optimal_bandwidth_is_stationary() {
        let c = ctx();
        for k in [1usize, 3, 5] {
            let h = optimal_bandwidth(k, &bandwidth_inputs(&c)).unwrap();
            let step = 1e-5 * h;
            let f = |h| amse(k, &c.with_h(h));
            let slope = (f(h + step) - f(h - step)) / (2.0 * step);
            // relative to the scale amse/h of the derivative
            assert!((slope * h / f(h)).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn optimal_bandwidth_minimizes_on_log_grid() {
        let c = AsymptoticContext {
            fprime_x0: 0.3,
            ..ctx()
        };
        for k in 0..=3 {
            let h = optimal_bandwidth(k, &bandwidth_inputs(&c)).unwrap();
            let (lo, hi) = ((h / 10.0).ln(), (10.0 * h).ln());
            let step = (hi - lo) / 399.0;
            let best = (0..400)
                .map(|i| (lo + step * i as f64).exp())
                .min_by(|a, b| amse(k, &c.with_h(*a)).total_cmp(&amse(k, &c.with_h(*b))))
                .unwrap();
            assert!((best.ln() - h.ln()).abs() <= step, "k={k}");
        }
    }

    #[test]
    fn context_validation() {
        assert!(ctx().validate().is_ok());
        assert!(ctx().with_h(0.0).validate().is_err());
        assert!(AsymptoticContext { f_x0: 0.0, ..ctx() }.validate().is_err());
        assert!(AsymptoticContext { n: 0, ..ctx() }.validate().is_err());
    }
}
