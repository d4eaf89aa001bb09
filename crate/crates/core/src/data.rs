//! Observation containers and fit results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Method;

/// Tumor volume (cm³) against time (days) for a single control mouse.
pub const MOUSE_TUMOR: [(f64, f64); 10] = [
    (21.0, 0.05),
    (25.0, 0.09),
    (28.0, 0.22),
    (31.0, 0.32),
    (33.0, 0.61),
    (35.0, 0.70),
    (38.0, 0.90),
    (40.0, 1.29),
    (42.0, 1.77),
    (45.0, 3.32),
];

/// Ordered `(x, y)` observations on an interval `[a, b]`.
///
/// Points are sorted by `x` on construction (stable, so ties keep their
/// input order) and the responses are permuted in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
    interval: (f64, f64),
}

impl Dataset {
    /// Builds a dataset whose interval is the observed x range.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::build(xs, ys, None)
    }

    /// Builds a dataset on an explicit interval; every x must lie inside it.
    pub fn with_interval(xs: Vec<f64>, ys: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        Self::build(xs, ys, Some(interval))
    }

    fn build(xs: Vec<f64>, ys: Vec<f64>, interval: Option<(f64, f64)>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidData(format!(
                "{} x values but {} y values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = xs.iter().chain(&ys).position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at position {}",
                i % xs.len()
            )));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
        let sorted_x: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        let sorted_y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let lo = sorted_x[0];
        let hi = sorted_x[sorted_x.len() - 1];
        let interval = match interval {
            None => (lo, hi),
            Some((a, b)) => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(Error::InvalidData(format!("invalid interval [{a}, {b}]")));
                }
                if lo < a || hi > b {
                    return Err(Error::InvalidData(format!(
                        "x values span [{lo}, {hi}], outside the interval [{a}, {b}]"
                    )));
                }
                (a, b)
            }
        };
        Ok(Dataset {
            xs: sorted_x,
            ys: sorted_y,
            interval,
        })
    }

    /// The mouse tumor series on `[21, 45]`.
    pub fn mouse_tumor() -> Self {
        let (xs, ys) = MOUSE_TUMOR.iter().copied().unzip();
        Dataset::new(xs, ys).expect("embedded data is valid")
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Copy without observation `i`, keeping the interval.
    pub fn without(&self, i: usize) -> Result<Self> {
        let mut xs = self.xs.clone();
        let mut ys = self.ys.clone();
        xs.remove(i);
        ys.remove(i);
        Dataset::with_interval(xs, ys, self.interval)
    }

    /// Same x values with every response replaced.
    pub fn with_responses(&self, ys: Vec<f64>) -> Result<Self> {
        Dataset::with_interval(self.xs.clone(), ys, self.interval)
    }

    /// Half the median of successive differences of the sorted x values.
    ///
    /// Falls back to half the mean positive gap when more than half of the
    /// gaps are ties, and to 1 for a single distinct x.
    pub fn reference_bandwidth(&self) -> f64 {
        let mut gaps: Vec<f64> = self.xs.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.is_empty() {
            return 1.0;
        }
        gaps.sort_by(f64::total_cmp);
        let m = gaps.len();
        let median = if m % 2 == 1 {
            gaps[m / 2]
        } else {
            0.5 * (gaps[m / 2 - 1] + gaps[m / 2])
        };
        if median > 0.0 {
            return 0.5 * median;
        }
        let positive: Vec<f64> = gaps.into_iter().filter(|g| *g > 0.0).collect();
        if positive.is_empty() {
            1.0
        } else {
            0.5 * positive.iter().sum::<f64>() / positive.len() as f64
        }
    }
}

/// Fitted values on an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub grid: Vec<f64>,
    /// NaN where the point is degenerate.
    pub values: Vec<f64>,
    pub method: Method,
    pub bandwidth: f64,
    /// Kernel weight sum at each grid point.
    pub weight_sums: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Fit {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|d| **d).count()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `count` equispaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_in_lockstep() {
        let d = Dataset::new(vec![3.0, 1.0, 2.0], vec![30.0, 10.0, 20.0]).unwrap();
        assert_eq!(d.xs(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.ys(), &[10.0, 20.0, 30.0]);
        assert_eq!(d.interval(), (1.0, 3.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Dataset::new(vec![], vec![]),
            Err(Error::EmptyDataset)
        ));
        assert!(Dataset::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(Dataset::with_interval(vec![2.0], vec![1.0], (0.0, 1.0)).is_err());
    }

    #[test]
    fn mouse_series() {
        let d = Dataset::mouse_tumor();
        assert_eq!(d.len(), 10);
        assert_eq!(d.interval(), (21.0, 45.0));
        assert_eq!(d.ys()[9], 3.32);
    }

    #[test]
    fn reference_bandwidth_is_half_median_gap() {
        let d = Dataset::new(vec![0.0, 1.0, 3.0, 6.0], vec![0.0; 4]).unwrap();
        // gaps 1, 2, 3 -> median 2
        assert_eq!(d.reference_bandwidth(), 1.0);
        let ties = Dataset::new(vec![0.0, 0.0, 0.0, 2.0], vec![0.0; 4]).unwrap();
        assert_eq!(ties.reference_bandwidth(), 1.0);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(0.0, 1.0, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[10], 1.0);
        assert!((g[3] - 0.3).abs() < 1e-15);
    }
}
