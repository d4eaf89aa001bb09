//! DE-constrained local estimators (DE1-k).
//!
//! Under a first-order model `g'(x) = F(x, g(x))`, every derivative of `g` at
//! the evaluation point can be written in terms of `g(x₀)` itself, so the
//! degree-k Taylor approximant of `g(xᵢ)` about `x₀` has a single unknown
//! local parameter `α = g(x₀)`. The estimate minimizes
//!
//! ```text
//! Σᵢ {yᵢ − g*ₖ(xᵢ; α)}² K_h(xᵢ − x₀)
//! ```
//!
//! over `α`. For linear models the approximant is affine in `α`,
//! `g*ₖ(xᵢ; α) = Sᵢ α + Tᵢ`, and the minimizer is closed form:
//! `α̂ = Σ (yᵢ − Tᵢ) Sᵢ Kᵢ / Σ Sᵢ² Kᵢ`. Nonlinear models are handled by a
//! bracketed scalar minimization in [`general`].

mod general;
mod linear;

pub use general::{de11_general, GeneralFirstOrderDe, LipschitzProbe, SolverOptions};
pub use linear::{
    affine_coeffs, de1k_linear, AffineApproximant, Coefficient, Constant, DerivativeTable,
    LinearFirstOrderDe, Polynomial,
};

use crate::data::{Dataset, Fit};
use crate::error::{check_bandwidth, Error, Result};
use crate::estimator::{collect_fit, window, Method, PointEstimate, DEGENERATE_WEIGHT};
use crate::kernel::Kernel;

/// Largest Taylor degree supported by the DE1-k estimators.
pub const MAX_K: usize = 7;

/// The exponential growth model `g' = λ g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialDe {
    lambda: f64,
}

impl ExponentialDe {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() {
            Ok(ExponentialDe { lambda })
        } else {
            Err(Error::Config(format!(
                "growth rate must be finite, got {lambda}"
            )))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k > MAX_K {
        Err(Error::UnsupportedDegree {
            degree: k,
            max: MAX_K,
        })
    } else {
        Ok(())
    }
}

/// `Σ_{p=0}^{k} (λd)^p / p!`, the exponential-model multiplier of `g(x₀)`.
#[inline]
pub(crate) fn exp_taylor(lambda_d: f64, k: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for p in 1..=k {
        term *= lambda_d / p as f64;
        sum += term;
    }
    sum
}

/// DE1-k under `g' = λg`: `ĝ(x₀) = Σ yᵢ Sᵢ Kᵢ / Σ Sᵢ² Kᵢ` with
/// `Sᵢ = Σ_{p≤k} (λ(xᵢ − x₀))^p / p!`.
///
/// `k = 0` gives the Nadaraya–Watson estimator, as does `λ = 0` for any k.
pub fn de1k_exponential(
    data: &Dataset,
    de: &ExponentialDe,
    k: usize,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
) -> Result<Fit> {
    check_k(k)?;
    check_bandwidth(h)?;
    collect_fit(grid, Method::De1 { k }, h, |x0| {
        Ok(exponential_at(data, de.lambda, k, kernel, h, x0, None))
    })
}

pub(crate) fn exponential_at(
    data: &Dataset,
    lambda: f64,
    k: usize,
    kernel: Kernel,
    h: f64,
    x0: f64,
    skip: Option<usize>,
) -> PointEstimate {
    let xs = data.xs();
    let ys = data.ys();
    let (mut num, mut den, mut weight_sum) = (0.0, 0.0, 0.0);
    for i in window(xs, kernel, h, x0) {
        if skip == Some(i) {
            continue;
        }
        let d = xs[i] - x0;
        let w = kernel.scaled_unchecked(d, h);
        if w == 0.0 {
            continue;
        }
        let s = exp_taylor(lambda * d, k);
        weight_sum += w;
        num += ys[i] * s * w;
        den += s * s * w;
    }
    if weight_sum < DEGENERATE_WEIGHT || den < DEGENERATE_WEIGHT {
        return PointEstimate::degenerate(weight_sum);
    }
    PointEstimate {
        value: num / den,
        weight_sum,
    }
}

/// The local least-squares criterion `Σ {yᵢ − prediction(xᵢ, α)}² K_h(xᵢ − x₀)`.
///
/// `approximant(xᵢ, α)` is the local model's prediction at `xᵢ`.
pub fn local_objective<F>(
    data: &Dataset,
    alpha: f64,
    x0: f64,
    approximant: F,
    kernel: Kernel,
    h: f64,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    check_bandwidth(h)?;
    Ok(data
        .iter()
        .map(|(x, y)| {
            let r = y - approximant(x, alpha);
            r * r * kernel.scaled_unchecked(x - x0, h)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localpoly::fit_local_poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(super) fn random_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.exp() + 0.2 * (rng.random::<f64>() - 0.5))
            .collect();
        Dataset::new(xs, ys).unwrap()
    }

    /// Golden-section search followed by a parabola through three points of
    /// the final bracket; exact for the quadratic objectives used here.
    pub(super) fn scalar_argmin(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        for _ in 0..60 {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - inv_phi * (b - a);
            d = a + inv_phi * (b - a);
        }
        let m = 0.5 * (a + b);
        let step = 1e-3 * (1.0 + m.abs());
        let (fl, fm, fr) = (f(m - step), f(m), f(m + step));
        m - step * (fr - fl) / (2.0 * (fl - 2.0 * fm + fr))
    }

    #[test]
    fn zero_rate_is_nadaraya_watson() {
        let data = random_data(25, 3);
        let grid = [0.1, 0.4, 0.9];
        let nw = fit_local_poly(&data, 0, Kernel::Gaussian, 0.1, &grid).unwrap();
        for k in 0..=MAX_K {
            let fit = de1k_exponential(
                &data,
                &ExponentialDe::new(0.0).unwrap(),
                k,
                Kernel::Gaussian,
                0.1,
                &grid,
            )
            .unwrap();
            for (a, b) in fit.values.iter().zip(&nw.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_datum_is_reproduced() {
        let data = Dataset::new(vec![0.4], vec![2.5]).unwrap();
        for k in 1..=MAX_K {
            let fit = de1k_exponential(
                &data,
                &ExponentialDe::new(1.3).unwrap(),
                k,
                Kernel::Gaussian,
                0.7,
                &[0.4],
            )
            .unwrap();
            assert_eq!(fit.values[0], 2.5);
        }
    }

    #[test]
    fn closed_form_matches_scalar_minimization() {
        let data = random_data(15, 5);
        let (lambda, k, h) = (1.0, 3, 0.2);
        let fit = de1k_exponential(
            &data,
            &ExponentialDe::new(lambda).unwrap(),
            k,
            Kernel::Gaussian,
            h,
            &[0.3, 0.55, 0.8],
        )
        .unwrap();
        for (&x0, &v) in fit.grid.iter().zip(&fit.values) {
            let objective = |alpha: f64| {
                local_objective(
                    &data,
                    alpha,
                    x0,
                    |x, a| a * exp_taylor(lambda * (x - x0), k),
                    Kernel::Gaussian,
                    h,
                )
                .unwrap()
            };
            let oracle = scalar_argmin(&objective, -10.0, 10.0);
            assert!((v - oracle).abs() <= 1e-8 * oracle.abs(), "{v} vs {oracle}");
        }
    }

    #[test]
    fn objective_basics() {
        let data = Dataset::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        // a line through the data gives zero loss
        let zero =
            local_objective(&data, 1.0, 0.0, |x, a| a + 2.0 * x, Kernel::Gaussian, 1.0).unwrap();
        assert_eq!(zero, 0.0);
        // affine approximant: the objective is exactly quadratic in alpha
        let f = |a: f64| {
            local_objective(&data, a, 0.5, |x, a| a * (1.0 + x), Kernel::Gaussian, 0.3).unwrap()
        };
        let (f0, f1, f2, f3) = (f(0.0), f(1.0), f(2.0), f(3.0));
        let third_difference = f3 - 3.0 * f2 + 3.0 * f1 - f0;
        assert!(third_difference.abs() < 1e-12 * f3.abs().max(1.0));
        assert!(local_objective(&data, 1.0, 0.0, |_, a| a, Kernel::Gaussian, -1.0).is_err());
    }

    #[test]
    fn closed_form_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let data = random_data(rng.random_range(5..40), trial);
            let lambda = rng.random_range(-2.0..2.0);
            let k = rng.random_range(1..=3);
            let h = rng.random_range(0.05..1.0);
            let x0 = rng.random_range(0.0..1.0);
            let est = exponential_at(&data, lambda, k, Kernel::Gaussian, h, x0, None);
            if est.is_degenerate() {
                continue;
            }
            let obj = |a: f64| {
                local_objective(
                    &data,
                    a,
                    x0,
                    |x, a| a * exp_taylor(lambda * (x - x0), k),
                    Kernel::Gaussian,
                    h,
                )
                .unwrap()
            };
            let best = obj(est.value);
            assert!(best <= obj(est.value + 1e-3));
            assert!(best <= obj(est.value - 1e-3));
        }
    }

    #[test]
    fn higher_degree_is_more_accurate_on_the_true_model() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let data = Dataset::new(xs.clone(), ys).unwrap();
        let interior: Vec<f64> = xs
            .iter()
            .copied()
            .filter(|x| *x > 0.2 && *x < 0.8)
            .collect();
        let de = ExponentialDe::new(1.0).unwrap();
        let mut previous = f64::INFINITY;
        for k in 1..=5 {
            let fit = de1k_exponential(&data, &de, k, Kernel::Gaussian, 0.2, &interior).unwrap();
            let err = fit
                .grid
                .iter()
                .zip(&fit.values)
                .map(|(x, v)| (v - x.exp()).abs())
                .fold(0.0, f64::max);
            assert!(err < previous, "k={k}: {err} !< {previous}");
            previous = err;
        }
    }

    #[test]
    fn flags_empty_windows_and_bad_degree() {
        let data = Dataset::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let de = ExponentialDe::new(1.0).unwrap();
        let fit = de1k_exponential(&data, &de, 2, Kernel::Epanechnikov, 0.1, &[0.5]).unwrap();
        assert!(fit.degenerate[0]);
        assert!(de1k_exponential(&data, &de, 8, Kernel::Gaussian, 0.1, &[0.5]).is_err());
        assert!(ExponentialDe::new(f64::INFINITY).is_err());
    }
}
