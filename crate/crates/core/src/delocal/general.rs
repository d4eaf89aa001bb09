//! DE1-1 and DE1-2 for a general first-order model `g' = F(x, g)`.
//!
//! The approximants are
//!
//! ```text
//! g*₁(xᵢ; α) = α + d F(x₀, α)
//! g*₂(xᵢ; α) = g*₁ + d²/2 {F₁(x₀, α) + F₂(x₀, α) F(x₀, α)}
//! ```
//!
//! with `d = xᵢ − x₀` and `F₁`, `F₂` the partials in `x` and `g`. They are
//! nonlinear in `α`, so each grid point runs a bracketed Brent minimization
//! started from the Nadaraya–Watson value.

use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, Fit};
use crate::error::{check_bandwidth, Error, Result};
use crate::estimator::{collect_fit, window, Method, PointEstimate, DEGENERATE_WEIGHT};
use crate::kernel::Kernel;

type Rhs = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Largest finite-difference slope in `g` tolerated by the Lipschitz probe.
pub const LIPSCHITZ_PROBE_BOUND: f64 = 1e6;

/// Rectangle of `(x, g)` values on which `F` is spot-checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzProbe {
    pub x_range: (f64, f64),
    pub g_range: (f64, f64),
}

#[derive(Clone)]
pub struct GeneralFirstOrderDe {
    f: Rhs,
    f_x: Option<Rhs>,
    f_g: Option<Rhs>,
}

impl fmt::Debug for GeneralFirstOrderDe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralFirstOrderDe")
            .field("has_partials", &(self.f_x.is_some() && self.f_g.is_some()))
            .finish()
    }
}

impl GeneralFirstOrderDe {
    /// Wraps `F` after checking on an 11×11 probe grid that its
    /// finite-difference slope in `g` is finite and below
    /// [`LIPSCHITZ_PROBE_BOUND`].
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        probe: LipschitzProbe,
    ) -> Result<Self> {
        const STEPS: usize = 10;
        let (x_lo, x_hi) = probe.x_range;
        let (g_lo, g_hi) = probe.g_range;
        let delta = 1e-13 * (1.0 + g_lo.abs().max(g_hi.abs()));
        for i in 0..=STEPS {
            let x = x_lo + (x_hi - x_lo) * i as f64 / STEPS as f64;
            for j in 0..=STEPS {
                let g = g_lo + (g_hi - g_lo) * j as f64 / STEPS as f64;
                let slope = (f(x, g + delta) - f(x, g)) / delta;
                if !slope.is_finite() || slope.abs() > LIPSCHITZ_PROBE_BOUND {
                    return Err(Error::NotLipschitz(format!(
                        "slope {slope} at (x, g) = ({x}, {g})"
                    )));
                }
            }
        }
        Ok(GeneralFirstOrderDe {
            f: Arc::new(f),
            f_x: None,
            f_g: None,
        })
    }

    /// Supplies `∂F/∂x` and `∂F/∂g`, needed for degree 2.
    pub fn with_partials(
        mut self,
        f_x: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.f_x = Some(Arc::new(f_x));
        self.f_g = Some(Arc::new(f_g));
        self
    }

    pub fn rhs(&self, x: f64, g: f64) -> f64 {
        (self.f)(x, g)
    }

    /// `(c₁, c₂)` with `g*(x₀ + d; α) = α + c₁ d + c₂ d²/2`.
    fn taylor_coefficients(&self, degree: usize, x0: f64, alpha: f64) -> (f64, f64) {
        let first = (self.f)(x0, alpha);
        let second = match (degree, &self.f_x, &self.f_g) {
            (2, Some(fx), Some(fg)) => fx(x0, alpha) + fg(x0, alpha) * first,
            _ => 0.0,
        };
        (first, second)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bracket width tolerance relative to `1 + |α|`.
    pub tol: f64,
    pub max_expansions: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_expansions: 60,
            max_iterations: 500,
        }
    }
}

pub fn de11_general(
    data: &Dataset,
    de: &GeneralFirstOrderDe,
    degree: usize,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
    opts: SolverOptions,
) -> Result<Fit> {
    if !(1..=2).contains(&degree) {
        return Err(Error::UnsupportedDegree { degree, max: 2 });
    }
    if degree == 2 && (de.f_x.is_none() || de.f_g.is_none()) {
        return Err(Error::Config(
            "degree 2 requires both partial derivatives of F".into(),
        ));
    }
    check_bandwidth(h)?;
    let xs = data.xs();
    let ys = data.ys();
    collect_fit(grid, Method::De1General { degree }, h, |x0| {
        let range = window(xs, kernel, h, x0);
        let mut local: Vec<(f64, f64, f64)> = Vec::with_capacity(range.len());
        let (mut weight_sum, mut nw) = (0.0, 0.0);
        for i in range {
            let d = xs[i] - x0;
            let w = kernel.scaled_unchecked(d, h);
            if w > 0.0 {
                local.push((d, ys[i], w));
                weight_sum += w;
                nw += w * ys[i];
            }
        }
        if weight_sum < DEGENERATE_WEIGHT {
            return Ok(PointEstimate::degenerate(weight_sum));
        }
        nw /= weight_sum;
        let objective = |alpha: f64| {
            let (c1, c2) = de.taylor_coefficients(degree, x0, alpha);
            local
                .iter()
                .map(|&(d, y, w)| {
                    let r = y - (alpha + d * (c1 + 0.5 * d * c2));
                    r * r * w
                })
                .sum::<f64>()
        };
        let spread = local
            .iter()
            .map(|&(_, y, _)| (y - nw).abs())
            .fold(0.0, f64::max);
        let step = 0.1 * spread.max(nw.abs()).max(1e-3);
        let (a, b, c) = bracket(&objective, nw, step, opts.max_expansions)
            .ok_or(Error::OptimizerFailure { x0 })?;
        let alpha = brent(&objective, a, b, c, opts.tol, opts.max_iterations)
            .ok_or(Error::OptimizerFailure { x0 })?;
        Ok(PointEstimate {
            value: alpha,
            weight_sum,
        })
    })
}

/// Downhill bracket search: returns `(a, b, c)` with `b` between `a` and
/// `c` and `f(b) ≤ min(f(a), f(c))`.
fn bracket(
    f: &dyn Fn(f64) -> f64,
    start: f64,
    step: f64,
    max_expansions: usize,
) -> Option<(f64, f64, f64)> {
    let (mut a, mut b) = (start, start + step);
    let (mut fa, mut fb) = (f(a), f(b));
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + 1.618_033_988_75 * (b - a);
    let mut fc = f(c);
    let mut expansions = 0;
    while fc < fb {
        if expansions >= max_expansions || !fc.is_finite() {
            return None;
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + 1.618_033_988_75 * (b - a);
        fc = f(c);
        expansions += 1;
    }
    if !(fa.is_finite() && fb.is_finite() && fc.is_finite()) {
        return None;
    }
    Some(if a < c { (a, b, c) } else { (c, b, a) })
}

/// Brent's parabolic/golden-section minimizer on the bracket `[a, c]`,
/// stopping when the bracket is narrower than `tol · (1 + |x|)`.
fn brent(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    c: f64,
    tol: f64,
    max_iterations: usize,
) -> Option<f64> {
    const GOLD: f64 = 0.381_966_011_250_105;
    let (mut lo, mut hi) = (a, c);
    let (mut x, mut w, mut v) = (b, b, b);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iterations {
        let mid = 0.5 * (lo + hi);
        let tol1 = 0.25 * tol * (1.0 + x.abs());
        // implies hi - lo <= 4 tol1
        if (x - mid).abs() <= 2.0 * tol1 - 0.5 * (hi - lo) {
            return Some(x);
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < 2.0 * tol1 || hi - u < 2.0 * tol1 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { lo - x } else { hi - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_data;
    use super::super::{de1k_exponential, ExponentialDe};
    use super::*;
    use crate::localpoly::fit_local_poly;

    fn probe() -> LipschitzProbe {
        LipschitzProbe {
            x_range: (0.0, 1.0),
            g_range: (-5.0, 5.0),
        }
    }

    #[test]
    fn linear_rhs_reproduces_closed_form() {
        let data = random_data(30, 21);
        let lambda = 1.2;
        let de = GeneralFirstOrderDe::new(move |_, g| lambda * g, probe())
            .unwrap()
            .with_partials(|_, _| 0.0, move |_, _| lambda);
        let grid = [0.15, 0.5, 0.85];
        for degree in 1..=2 {
            let general = de11_general(
                &data,
                &de,
                degree,
                Kernel::Gaussian,
                0.2,
                &grid,
                SolverOptions::default(),
            )
            .unwrap();
            let closed = de1k_exponential(
                &data,
                &ExponentialDe::new(lambda).unwrap(),
                degree,
                Kernel::Gaussian,
                0.2,
                &grid,
            )
            .unwrap();
            for (a, b) in general.values.iter().zip(&closed.values) {
                assert!((a - b).abs() < 1e-7, "degree {degree}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_rhs_is_nadaraya_watson() {
        let data = random_data(20, 4);
        let de = GeneralFirstOrderDe::new(|_, _| 0.0, probe()).unwrap();
        let grid = [0.2, 0.7];
        let fit = de11_general(
            &data,
            &de,
            1,
            Kernel::Gaussian,
            0.1,
            &grid,
            SolverOptions::default(),
        )
        .unwrap();
        let nw = fit_local_poly(&data, 0, Kernel::Gaussian, 0.1, &grid).unwrap();
        for (a, b) in fit.values.iter().zip(&nw.values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn logistic_error_within_taylor_remainder() {
        let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
        let xs: Vec<f64> = (0..201).map(|i| -4.0 + 8.0 * i as f64 / 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| logistic(x)).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let de = GeneralFirstOrderDe::new(
            |_, g| g * (1.0 - g),
            LipschitzProbe {
                x_range: (-4.0, 4.0),
                g_range: (0.0, 1.0),
            },
        )
        .unwrap()
        .with_partials(|_, _| 0.0, |_, g| 1.0 - 2.0 * g);
        let h = 0.5;
        let grid: Vec<f64> = (0..21).map(|i| -2.5 + 0.25 * i as f64).collect();
        let fit = de11_general(
            &data,
            &de,
            2,
            Kernel::Epanechnikov,
            h,
            &grid,
            SolverOptions::default(),
        )
        .unwrap();
        // g''' = g(1-g)(1 - 6g + 6g^2); |remainder| <= max|g'''| h^3 / 6 on the window
        let third = |x: f64| {
            let g = logistic(x);
            g * (1.0 - g) * (1.0 - 6.0 * g + 6.0 * g * g)
        };
        for (&x0, &v) in grid.iter().zip(&fit.values) {
            let m3 = (0..=100)
                .map(|j| third(x0 - h + 2.0 * h * j as f64 / 100.0).abs())
                .fold(0.0, f64::max);
            let bound = m3 * h.powi(3) / 6.0;
            let err = (v - logistic(x0)).abs();
            assert!(err <= bound, "x0={x0}: error {err} exceeds {bound}");
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let data = random_data(10, 1);
        let de = GeneralFirstOrderDe::new(|_, g| g, probe()).unwrap();
        let opts = SolverOptions::default();
        assert!(de11_general(&data, &de, 2, Kernel::Gaussian, 0.1, &[0.5], opts).is_err());
        assert!(de11_general(&data, &de, 3, Kernel::Gaussian, 0.1, &[0.5], opts).is_err());
        assert!(matches!(
            GeneralFirstOrderDe::new(|_, g: f64| g.abs().sqrt(), probe()),
            Err(Error::NotLipschitz(_))
        ));
    }

    #[test]
    fn brent_finds_parabola_vertex() {
        let f = |x: f64| (x - 1.234_567).powi(2) + 3.0;
        let (a, b, c) = bracket(&f, 10.0, 1.0, 60).unwrap();
        let x = brent(&f, a, b, c, 1e-12, 500).unwrap();
        assert!((x - 1.234_567).abs() < 1e-8);
        assert!(bracket(&|x: f64| -x, 0.0, 1.0, 10).is_none());
    }
}
