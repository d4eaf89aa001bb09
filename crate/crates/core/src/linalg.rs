//! Small weighted least-squares solver built on row-wise Givens rotations.
//!
//! Rows are streamed in one at a time and folded into an upper-triangular
//! factor, so a local fit never forms the normal equations and never
//! allocates.

pub(crate) const MAX_COLS: usize = 6;

/// Relative size of a diagonal entry of R, against its column norm, below
/// which the column is treated as linearly dependent on the earlier ones.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct GivensLs {
    cols: usize,
    r: [[f64; MAX_COLS]; MAX_COLS],
    qty: [f64; MAX_COLS],
    col_sq: [f64; MAX_COLS],
}

impl GivensLs {
    pub(crate) fn new(cols: usize) -> Self {
        assert!(cols >= 1 && cols <= MAX_COLS);
        GivensLs {
            cols,
            r: [[0.0; MAX_COLS]; MAX_COLS],
            qty: [0.0; MAX_COLS],
            col_sq: [0.0; MAX_COLS],
        }
    }

    /// Adds the row `sqrt(weight) * [row | rhs]`.
    pub(crate) fn push(&mut self, row: &[f64], rhs: f64, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        let s = weight.sqrt();
        let mut a = [0.0; MAX_COLS];
        for (dst, src) in a.iter_mut().zip(&row[..self.cols]) {
            *dst = s * src;
        }
        let mut b = s * rhs;
        for j in 0..self.cols {
            self.col_sq[j] += a[j] * a[j];
        }
        for j in 0..self.cols {
            if a[j] == 0.0 {
                continue;
            }
            let rjj = self.r[j][j];
            let norm = (rjj * rjj + a[j] * a[j]).sqrt();
            let c = rjj / norm;
            let sn = a[j] / norm;
            self.r[j][j] = norm;
            for k in j + 1..self.cols {
                let rjk = self.r[j][k];
                self.r[j][k] = c * rjk + sn * a[k];
                a[k] = c * a[k] - sn * rjk;
            }
            let z = self.qty[j];
            self.qty[j] = c * z + sn * b;
            b = c * b - sn * z;
        }
    }

    /// Least-squares coefficients, or `None` when the weighted design is
    /// numerically rank deficient.
    pub(crate) fn solve(&self) -> Option<[f64; MAX_COLS]> {
        let m = self.cols;
        for j in 0..m {
            let scale = self.col_sq[j].sqrt();
            if scale == 0.0 || self.r[j][j].abs() <= RANK_TOL * scale {
                return None;
            }
        }
        let mut beta = [0.0; MAX_COLS];
        for j in (0..m).rev() {
            let mut acc = self.qty[j];
            for k in j + 1..m {
                acc -= self.r[j][k] * beta[k];
            }
            beta[j] = acc / self.r[j][j];
        }
        Some(beta)
    }
}
