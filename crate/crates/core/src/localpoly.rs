//! Conventional local polynomial regression (NW, LL, LQ, LC, ...).
//!
//! At each evaluation point the kernel-weighted least-squares problem is
//! solved over the basis `{1, u, u², …, u^p}` with `u = (x − x₀)/h`; the
//! intercept is the fitted value. Centering and scaling by `h` keep the
//! columns of comparable size whatever the units of `x`.

use crate::data::{Dataset, Fit};
use crate::error::{check_bandwidth, Error, Result};
use crate::estimator::{collect_fit, window, Method, PointEstimate, DEGENERATE_WEIGHT};
use crate::kernel::Kernel;
use crate::linalg::GivensLs;

pub const MAX_DEGREE: usize = 5;

/// Local polynomial fit of the given degree at every grid point.
///
/// Points whose kernel weight sum falls below [`DEGENERATE_WEIGHT`] are
/// flagged degenerate and set to NaN; a numerically singular weighted design
/// at a non-degenerate point is an error.
pub fn fit_local_poly(
    data: &Dataset,
    degree: usize,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
) -> Result<Fit> {
    check_degree(data, degree)?;
    check_bandwidth(h)?;
    collect_fit(grid, Method::LocalPoly { degree }, h, |x0| {
        estimate_at(data, degree, kernel, h, x0, None)
    })
}

fn check_degree(data: &Dataset, degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_DEGREE,
        });
    }
    if data.len() < degree + 1 {
        return Err(Error::InvalidData(format!(
            "degree {degree} needs at least {} observations, got {}",
            degree + 1,
            data.len()
        )));
    }
    Ok(())
}

pub(crate) fn estimate_at(
    data: &Dataset,
    degree: usize,
    kernel: Kernel,
    h: f64,
    x0: f64,
    skip: Option<usize>,
) -> Result<PointEstimate> {
    let xs = data.xs();
    let ys = data.ys();
    let mut ls = GivensLs::new(degree + 1);
    let mut weight_sum = 0.0;
    let mut row = [0.0; crate::linalg::MAX_COLS];
    for i in window(xs, kernel, h, x0) {
        if skip == Some(i) {
            continue;
        }
        let w = kernel.scaled_unchecked(xs[i] - x0, h);
        if w == 0.0 {
            continue;
        }
        weight_sum += w;
        let u = (xs[i] - x0) / h;
        row[0] = 1.0;
        for p in 1..=degree {
            row[p] = row[p - 1] * u;
        }
        ls.push(&row, ys[i], w);
    }
    if weight_sum < DEGENERATE_WEIGHT {
        return Ok(PointEstimate::degenerate(weight_sum));
    }
    match ls.solve() {
        Some(beta) => Ok(PointEstimate {
            value: beta[0],
            weight_sum,
        }),
        None => Err(Error::RankDeficient { x0 }),
    }
}
