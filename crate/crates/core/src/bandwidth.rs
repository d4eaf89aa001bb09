//! Bandwidth selection: leave-one-out cross-validation and the
//! asymptotically optimal DE1-k bandwidths for the exponential model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::kernel::Kernel;

/// Number of points in the default cross-validation grid.
pub const DEFAULT_GRID_SIZE: usize = 40;

/// Strictly increasing, positive, finite bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BandwidthGrid {
    values: Vec<f64>,
}

impl BandwidthGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("bandwidth grid is empty".into()));
        }
        if let Some(h) = values.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::InvalidBandwidth(*h));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "bandwidth grid must be strictly increasing".into(),
            ));
        }
        Ok(BandwidthGrid { values })
    }

    /// `count` log-spaced bandwidths on `[lo, hi]`.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || count == 0 {
            return Err(Error::Config(format!(
                "cannot build a log grid of {count} points on [{lo}, {hi}]"
            )));
        }
        if count == 1 {
            return Self::new(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        let values = (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect();
        Self::new(values)
    }

    /// 40 log-spaced bandwidths on `[2, 32] × h_ref`, where `h_ref` is half
    /// the median spacing of the design.
    pub fn default_for(data: &Dataset) -> Result<Self> {
        let centre = 8.0 * data.reference_bandwidth();
        Self::log_spaced(0.25 * centre, 4.0 * centre, DEFAULT_GRID_SIZE)
    }

    /// `count` log-spaced bandwidths on `[1, upper] × h_rot`, where `h_rot`
    /// is [`rule_of_thumb`].
    pub fn rule_of_thumb_span(data: &Dataset, upper: f64, count: usize) -> Result<Self> {
        let h = rule_of_thumb(data);
        if count == 1 {
            return Self::new(vec![h]);
        }
        Self::log_spaced(h, upper * h, count)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for BandwidthGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<BandwidthGrid> for Vec<f64> {
    fn from(grid: BandwidthGrid) -> Self {
        grid.values
    }
}

/// Silverman's rule of thumb `0.9 min(s, IQR/1.34) n^{-1/5}` for the
/// design, with sample standard deviation `s` and linearly interpolated
/// quartiles. Falls back to [`Dataset::reference_bandwidth`] when zero.
pub fn rule_of_thumb(data: &Dataset) -> f64 {
    let xs = data.xs();
    let n = xs.len();
    if n < 2 {
        return data.reference_bandwidth();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let quantile = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 {
        h
    } else {
        data.reference_bandwidth()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSelection {
    pub h_star: f64,
    /// CV score for each grid bandwidth, in grid order.
    pub scores: Vec<f64>,
}

/// Leave-one-out cross-validation `CV(h) = Σᵢ (yᵢ − ĝ₋ᵢ(xᵢ))²`.
///
/// An observation whose leave-one-out fit is degenerate (empty window or
/// singular local design) contributes `yᵢ²`. Ties go to the smaller `h`.
pub fn loocv_select(
    data: &Dataset,
    estimator: &Estimator,
    kernel: Kernel,
    grid: &BandwidthGrid,
) -> Result<CvSelection> {
    if data.len() < 3 {
        return Err(Error::InvalidData(format!(
            "cross-validation needs at least 3 observations, got {}",
            data.len()
        )));
    }
    let per_h: Vec<(f64, bool)> = grid
        .values
        .par_iter()
        .map(|&h| cv_score(data, estimator, kernel, h))
        .collect();
    if per_h.iter().all(|(_, any_valid)| !any_valid) {
        return Err(Error::NoValidBandwidth);
    }
    let scores: Vec<f64> = per_h.iter().map(|(s, _)| *s).collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(CvSelection {
        h_star: grid.values[best],
        scores,
    })
}

/// `(score, whether any leave-one-out fit was valid)`.
pub(crate) fn cv_score(
    data: &Dataset,
    estimator: &Estimator,
    kernel: Kernel,
    h: f64,
) -> (f64, bool) {
    let mut score = 0.0;
    let mut any_valid = false;
    for (i, (x, y)) in data.iter().enumerate() {
        let residual = match estimator.estimate_at(data, kernel, h, x, Some(i)) {
            Ok(est) if !est.is_degenerate() => {
                any_valid = true;
                y - est.value
            }
            _ => y,
        };
        score += residual * residual;
    }
    (score, any_valid)
}

/// Inputs to the asymptotically optimal bandwidth of DE1-k under `g' = λg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalBandwidthInputs {
    /// Error variance σ².
    pub sigma2: f64,
    pub n: usize,
    /// Design density at `x0`.
    pub f_x0: f64,
    /// Design density derivative at `x0`; only even k use it.
    pub fprime_x0: Option<f64>,
    pub lambda: f64,
    pub x0: f64,
    /// g(0), the initial value of the exponential solution.
    pub g0: f64,
    pub kernel: Kernel,
}

impl OptimalBandwidthInputs {
    fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || self.n == 0 || !(self.f_x0 > 0.0) {
            return Err(Error::Config(
                "optimal bandwidth needs sigma2 > 0, n >= 1 and f(x0) > 0".into(),
            ));
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Minimizer of the leading-order AMSE of DE1-k.
///
/// Odd k: `h^{2k+3} = σ²R(K){(k+1)!}² / [n f e^{2λx₀} g(0)² λ^{2k+2} (2k+2) μ_{k+1}²]`.
/// Even k: `h^{2k+5} = σ²R(K){(k+1)!}² / [n f e^{2λx₀} g(0)² λ^{2k+2} (2k+4) μ_{k+2}² (λ + f'/f)²]`.
pub fn optimal_bandwidth(k: usize, inputs: &OptimalBandwidthInputs) -> Result<f64> {
    inputs.validate()?;
    let OptimalBandwidthInputs {
        sigma2,
        n,
        f_x0,
        fprime_x0,
        lambda,
        x0,
        g0,
        kernel,
    } = *inputs;
    if lambda == 0.0 {
        return Err(Error::UndefinedOptimum("growth rate is zero"));
    }
    if g0 == 0.0 {
        return Err(Error::UndefinedOptimum("initial value is zero"));
    }
    let numerator = sigma2 * kernel.roughness(0)? * factorial(k + 1).powi(2);
    let common =
        n as f64 * f_x0 * (2.0 * lambda * x0).exp() * g0 * g0 * lambda.powi(2 * k as i32 + 2);
    let (denominator, exponent) = if k % 2 == 1 {
        let mu = kernel.moment_any(k + 1);
        (common * (2 * k + 2) as f64 * mu * mu, 2 * k + 3)
    } else {
        let fprime = fprime_x0.ok_or_else(|| {
            Error::Config(format!(
                "even degree {k} needs the design density derivative"
            ))
        })?;
        let shift = lambda + fprime / f_x0;
        if shift == 0.0 {
            return Err(Error::UndefinedOptimum("lambda + f'(x0)/f(x0) is zero"));
        }
        let mu = kernel.moment_any(k + 2);
        (
            common * (2 * k + 4) as f64 * mu * mu * shift * shift,
            2 * k + 5,
        )
    };
    Ok((numerator / denominator).powf(1.0 / exponent as f64))
}

/// `h_{o,k+2}` from `h_{o,k}` (Gaussian kernel moments).
///
/// Odd k: `((k+3)(k+1)/λ⁴ · h^{2k+3})^{1/(2k+7)}`;
/// even k: `((k+2)³/((k+4)λ⁴) · h^{2k+5})^{1/(2k+9)}`.
pub fn bandwidth_recursion(h_ok: f64, k: usize, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::UndefinedOptimum("growth rate is zero"));
    }
    crate::error::check_bandwidth(h_ok)?;
    let l4 = lambda.powi(4);
    let kf = k as f64;
    Ok(if k % 2 == 1 {
        ((kf + 3.0) * (kf + 1.0) / l4 * h_ok.powi(2 * k as i32 + 3)).powf(1.0 / (2 * k + 7) as f64)
    } else {
        ((kf + 2.0).powi(3) / ((kf + 4.0) * l4) * h_ok.powi(2 * k as i32 + 5))
            .powf(1.0 / (2 * k + 9) as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localpoly::fit_local_poly;

    fn inputs() -> OptimalBandwidthInputs {
        OptimalBandwidthInputs {
            sigma2: 0.01,
            n: 10_000,
            f_x0: 1.0,
            fprime_x0: Some(0.0),
            lambda: 1.0,
            x0: 0.5,
            g0: 1.0,
            kernel: Kernel::Gaussian,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(BandwidthGrid::new(vec![]).is_err());
        assert!(BandwidthGrid::new(vec![0.1, 0.1]).is_err());
        assert!(BandwidthGrid::new(vec![-0.1, 0.1]).is_err());
        let g = BandwidthGrid::log_spaced(0.1, 10.0, 3).unwrap();
        assert!((g.values()[1] - 1.0).abs() < 1e-12);
        let json = serde_json::to_string(&g).unwrap();
        assert!(serde_json::from_str::<BandwidthGrid>("[0.2, 0.1]").is_err());
        assert_eq!(serde_json::from_str::<BandwidthGrid>(&json).unwrap(), g);
    }

    #[test]
    fn default_grid_brackets_reference() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let data = Dataset::new(xs, vec![0.0; 11]).unwrap();
        let g = BandwidthGrid::default_for(&data).unwrap();
        assert_eq!(g.values().len(), DEFAULT_GRID_SIZE);
        assert!((g.values()[0] - 0.1).abs() < 1e-12);
        assert!((g.values()[39] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn rule_of_thumb_by_hand() {
        // quartiles 2 and 4 (interpolated), sd sqrt(2.5): IQR/1.34 < sd
        let data = Dataset::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.0; 5]).unwrap();
        let expected = 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2);
        assert!((rule_of_thumb(&data) - expected).abs() < 1e-15);
        let g = BandwidthGrid::rule_of_thumb_span(&data, 10.0, 5).unwrap();
        assert!((g.values()[0] - expected).abs() < 1e-15);
        assert!((g.values()[4] - 10.0 * expected).abs() < 1e-12);
        let tied = Dataset::new(vec![2.0, 2.0, 2.0], vec![0.0; 3]).unwrap();
        assert_eq!(rule_of_thumb(&tied), 1.0);
    }

    #[test]
    fn exact_line_gives_zero_score_and_smallest_h() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 3.0 * x).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let grid = BandwidthGrid::log_spaced(0.2, 2.0, 6).unwrap();
        let sel = loocv_select(
            &data,
            &Estimator::LocalPoly { degree: 1 },
            Kernel::Gaussian,
            &grid,
        )
        .unwrap();
        assert!(sel.scores.iter().all(|s| *s < 1e-16));
        assert_eq!(sel.h_star, 0.2);
    }

    #[test]
    fn three_point_score_by_hand() {
        let data = Dataset::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 5.0]).unwrap();
        let h = 1.5;
        let k = |u: f64| (-0.5 * (u / h) * (u / h)).exp();
        // leave out each point; the remaining two form a weighted mean
        let pred0 = (2.0 * k(1.0) + 5.0 * k(3.0)) / (k(1.0) + k(3.0));
        let pred1 = (1.0 * k(1.0) + 5.0 * k(2.0)) / (k(1.0) + k(2.0));
        let pred2 = (1.0 * k(3.0) + 2.0 * k(2.0)) / (k(3.0) + k(2.0));
        let expected = (1.0 - pred0).powi(2) + (2.0 - pred1).powi(2) + (5.0 - pred2).powi(2);
        let grid = BandwidthGrid::new(vec![h]).unwrap();
        let sel = loocv_select(
            &data,
            &Estimator::LocalPoly { degree: 0 },
            Kernel::Gaussian,
            &grid,
        )
        .unwrap();
        assert!((sel.scores[0] - expected).abs() < 1e-12);
        assert_eq!(sel.h_star, h);
    }

    #[test]
    fn degenerate_bandwidths_lose_and_all_degenerate_fails() {
        let data = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 1.1, 0.9, 1.0]).unwrap();
        let est = Estimator::LocalPoly { degree: 0 };
        let grid = BandwidthGrid::new(vec![0.5, 5.0]).unwrap();
        let sel = loocv_select(&data, &est, Kernel::Epanechnikov, &grid).unwrap();
        assert_eq!(sel.h_star, 5.0);
        assert!((sel.scores[0] - (1.0 + 1.21 + 0.81 + 1.0)).abs() < 1e-12);
        let tiny = BandwidthGrid::new(vec![0.1, 0.2]).unwrap();
        assert!(matches!(
            loocv_select(&data, &est, Kernel::Epanechnikov, &tiny),
            Err(Error::NoValidBandwidth)
        ));
    }

    #[test]
    fn score_is_permutation_invariant() {
        let xs = vec![0.3, 0.1, 0.9, 0.5, 0.7];
        let ys = vec![1.0, 0.2, 2.0, 1.4, 1.1];
        let a = Dataset::new(xs.clone(), ys.clone()).unwrap();
        let b = Dataset::new(
            xs.into_iter().rev().collect(),
            ys.into_iter().rev().collect(),
        )
        .unwrap();
        let grid = BandwidthGrid::log_spaced(0.05, 1.0, 8).unwrap();
        let est = Estimator::De1Exponential { lambda: 1.0, k: 2 };
        let sa = loocv_select(&a, &est, Kernel::Gaussian, &grid).unwrap();
        let sb = loocv_select(&b, &est, Kernel::Gaussian, &grid).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(
            sa.scores[grid.values().iter().position(|h| *h == sa.h_star).unwrap()],
            sa.scores.iter().cloned().fold(f64::INFINITY, f64::min)
        );
        // sanity: CV refits really exclude the point
        let full = fit_local_poly(&a, 0, Kernel::Gaussian, 0.05, &[0.1]).unwrap();
        assert!((full.values[0] - 0.2).abs() < 1e-3);
    }

    #[test]
    fn corollary_value_by_direct_evaluation() {
        let h = optimal_bandwidth(0, &inputs()).unwrap();
        let expected = (0.01 * 0.282_094_791_773_878_1 / (10_000.0 * 1f64.exp() * 4.0)).powf(0.2);
        assert!((h - expected).abs() < 1e-12 * expected);
        assert!((h - 0.030_395).abs() < 1e-5);
    }

    #[test]
    fn sigma_scaling_law() {
        for k in [1usize, 3, 5] {
            let base = optimal_bandwidth(k, &inputs()).unwrap();
            let doubled = optimal_bandwidth(
                k,
                &OptimalBandwidthInputs {
                    sigma2: 0.02,
                    ..inputs()
                },
            )
            .unwrap();
            let expected = 2f64.powf(1.0 / (2 * k + 3) as f64);
            assert!((doubled / base - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn recursion_agrees_with_direct_formula() {
        let mut inp = inputs();
        inp.fprime_x0 = Some(0.4);
        for lambda in [0.5, 1.0, 2.0, -1.5] {
            inp.lambda = lambda;
            for k in 0..=3 {
                let direct = optimal_bandwidth(k + 2, &inp).unwrap();
                let via =
                    bandwidth_recursion(optimal_bandwidth(k, &inp).unwrap(), k, lambda).unwrap();
                assert!(
                    (direct - via).abs() < 1e-10 * direct,
                    "k={k} lambda={lambda}: {direct} vs {via}"
                );
            }
        }
    }

    #[test]
    fn worked_recursion_example() {
        let h2 = bandwidth_recursion(0.5, 0, 1.0).unwrap();
        assert!((h2 - (2.0 * 0.5f64.powi(5)).powf(1.0 / 9.0)).abs() < 1e-15);
        assert!((h2 - 0.734_87).abs() < 1e-5);
        let h3 = bandwidth_recursion(0.3, 1, 2.0).unwrap();
        assert!((h3 - (8.0 / 16.0 * 0.3f64.powi(5)).powf(1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn undefined_optima() {
        let mut inp = inputs();
        inp.lambda = 0.0;
        assert!(matches!(
            optimal_bandwidth(1, &inp),
            Err(Error::UndefinedOptimum(_))
        ));
        assert!(bandwidth_recursion(0.1, 1, 0.0).is_err());
        let mut inp = inputs();
        inp.fprime_x0 = Some(-1.0);
        assert!(matches!(
            optimal_bandwidth(2, &inp),
            Err(Error::UndefinedOptimum(_))
        ));
        assert!(optimal_bandwidth(1, &inp).is_ok());
        inp.fprime_x0 = None;
        assert!(matches!(optimal_bandwidth(0, &inp), Err(Error::Config(_))));
    }
}
