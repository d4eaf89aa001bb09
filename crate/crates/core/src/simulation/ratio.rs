use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::replication_rng;
use crate::data::Dataset;
use crate::delocal::exp_taylor;
use crate::error::{check_bandwidth, Error, Result};
use crate::kernel::Kernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Bandwidth used for this design.
    pub bandwidth: f64,
    /// Ratio at each sorted design point.
    pub ratios: Vec<f64>,
}

/// Exact conditional variance of DE1-1 over that of Nadaraya–Watson at each
/// design point, both with the Gaussian kernel and a common bandwidth.
///
/// With weights `Kᵢ` and `Sᵢ = 1 + λ(xᵢ − x₀)` the two variances are
/// `σ² ΣSᵢ²Kᵢ² / (ΣSᵢ²Kᵢ)²` and `σ² ΣKᵢ² / (ΣKᵢ)²`; σ² cancels.
pub fn variance_ratios(xs: &[f64], lambda: f64, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let kernel = Kernel::Gaussian;
    xs.iter()
        .map(|&x0| {
            let (mut de_num, mut de_den, mut nw_num, mut nw_den) = (0.0, 0.0, 0.0, 0.0);
            for &x in xs {
                let w = kernel.evaluate((x - x0) / h);
                let s2 = exp_taylor(lambda * (x - x0), 1).powi(2);
                de_num += s2 * w * w;
                de_den += s2 * w;
                nw_num += w * w;
                nw_den += w;
            }
            let ratio = (de_num / (de_den * de_den)) / (nw_num / (nw_den * nw_den));
            if ratio.is_finite() {
                Ok(ratio)
            } else {
                Err(Error::InvalidData(format!(
                    "variance ratio undefined at x0 = {x0} with h = {h}"
                )))
            }
        })
        .collect()
}

/// Variance ratios on a uniform random design of size `n` on [0, 1] with
/// λ given, using half the median spacing of the drawn design as bandwidth.
pub fn variance_ratio_study(n: usize, lambda: f64, seed: u64) -> Result<VarianceRatioSummary> {
    variance_ratio_study_with_bandwidth(n, lambda, seed, None)
}

/// As [`variance_ratio_study`], with an optional fixed bandwidth.
pub fn variance_ratio_study_with_bandwidth(
    n: usize,
    lambda: f64,
    seed: u64,
    h: Option<f64>,
) -> Result<VarianceRatioSummary> {
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "the ratio study needs at least 2 design points, got {n}"
        )));
    }
    let mut rng = replication_rng(seed, 0);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let design = Dataset::with_interval(xs, vec![0.0; n], (0.0, 1.0))?;
    let bandwidth = h.unwrap_or_else(|| design.reference_bandwidth());
    let ratios = variance_ratios(design.xs(), lambda, bandwidth)?;
    let mean = ratios.iter().sum::<f64>() / n as f64;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(VarianceRatioSummary {
        mean,
        min,
        max,
        bandwidth,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delocal::de1k_exponential;
    use crate::delocal::ExponentialDe;
    use crate::localpoly::fit_local_poly;

    #[test]
    fn zero_rate_gives_unit_ratios() {
        let s = variance_ratio_study(10, 0.0, 4).unwrap();
        assert!(s.ratios.iter().all(|r| *r == 1.0));
    }

    #[test]
    fn ratios_match_monte_carlo_variances() {
        // the ratio formula is checked against fitted-value variances computed
        // from the linear smoother rows by perturbing one response at a time
        let xs = vec![0.05, 0.2, 0.31, 0.5, 0.62, 0.8, 0.93];
        let (lambda, h) = (1.0, 0.15);
        let ratios = variance_ratios(&xs, lambda, h).unwrap();
        let base = Dataset::new(xs.clone(), vec![0.0; xs.len()]).unwrap();
        let de = ExponentialDe::new(lambda).unwrap();
        for (j, &x0) in xs.iter().enumerate() {
            let (mut v_de, mut v_nw) = (0.0, 0.0);
            for i in 0..xs.len() {
                let mut ys = vec![0.0; xs.len()];
                ys[i] = 1.0;
                let d = base.with_responses(ys).unwrap();
                let a = de1k_exponential(&d, &de, 1, Kernel::Gaussian, h, &[x0])
                    .unwrap()
                    .values[0];
                let b = fit_local_poly(&d, 0, Kernel::Gaussian, h, &[x0])
                    .unwrap()
                    .values[0];
                v_de += a * a;
                v_nw += b * b;
            }
            assert!((ratios[j] - v_de / v_nw).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_response_free() {
        let a = variance_ratio_study(10, 1.0, 8).unwrap();
        let b = variance_ratio_study(10, 1.0, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.min <= a.mean && a.mean <= a.max);
        let fixed = variance_ratio_study_with_bandwidth(10, 1.0, 8, Some(0.08)).unwrap();
        assert_eq!(fixed.bandwidth, 0.08);
        assert!(variance_ratio_study(1, 1.0, 8).is_err());
    }
}
