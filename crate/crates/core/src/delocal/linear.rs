//! DE1-k for linear first-order models `g'(x) = a(x) g(x) + b(x)`.

use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, Fit};
use crate::error::{check_bandwidth, Error, Result};
use crate::estimator::{collect_fit, window, Method, PointEstimate, DEGENERATE_WEIGHT};
use crate::kernel::Kernel;

use super::check_k;

/// A coefficient function that can report its derivatives.
pub trait Coefficient: Send + Sync {
    /// The `order`-th derivative at `x`, or `None` if it is not available.
    fn derivative(&self, order: usize, x: f64) -> Option<f64>;
}

/// A constant coefficient; all derivatives of order ≥ 1 vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl Coefficient for Constant {
    fn derivative(&self, order: usize, _x: f64) -> Option<f64> {
        Some(if order == 0 { self.0 } else { 0.0 })
    }
}

/// `Σ c_j x^j` with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Coefficient for Polynomial {
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (j, &c) in self.0.iter().enumerate().skip(order).rev() {
            // j! / (j - order)!
            let falling: f64 = ((j - order + 1)..=j).map(|t| t as f64).product();
            acc = acc * x + c * falling;
        }
        Some(acc)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Explicit derivative functions `[f, f', f'', …]`.
#[derive(Clone, Default)]
pub struct DerivativeTable(Vec<ScalarFn>);

impl DerivativeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the next derivative.
    pub fn then(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.0.push(Arc::new(f));
        self
    }
}

impl fmt::Debug for DerivativeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DerivativeTable({} orders)", self.0.len())
    }
}

impl Coefficient for DerivativeTable {
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.0.get(order).map(|f| f(x))
    }
}

#[derive(Clone)]
pub struct LinearFirstOrderDe {
    a: Arc<dyn Coefficient>,
    b: Arc<dyn Coefficient>,
}

impl LinearFirstOrderDe {
    pub fn new(a: impl Coefficient + 'static, b: impl Coefficient + 'static) -> Self {
        LinearFirstOrderDe {
            a: Arc::new(a),
            b: Arc::new(b),
        }
    }

    /// `g' = λ g`.
    pub fn exponential(lambda: f64) -> Self {
        Self::new(Constant(lambda), Constant(0.0))
    }
}

impl fmt::Debug for LinearFirstOrderDe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LinearFirstOrderDe")
    }
}

/// `g^{(p)}(x₀) = A_p g(x₀) + B_p` for `p = 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineApproximant {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineApproximant {
    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// `(S, T)` such that the degree-k Taylor approximant at offset `d` is
    /// `S g(x₀) + T`.
    pub fn multipliers(&self, d: f64) -> (f64, f64) {
        let mut pow = 1.0;
        let (mut s, mut t) = (0.0, 0.0);
        for p in 0..self.a.len() {
            if p > 0 {
                pow *= d / p as f64;
            }
            s += pow * self.a[p];
            t += pow * self.b[p];
        }
        (s, t)
    }
}

/// Derivative recursion for `g' = a g + b` by Leibniz' rule:
/// `g^{(p+1)} = Σ_{ℓ=0}^{p} C(p, ℓ) a^{(ℓ)} g^{(p−ℓ)} + b^{(p)}`.
pub fn affine_coeffs(de: &LinearFirstOrderDe, x0: f64, k: usize) -> Result<AffineApproximant> {
    let mut a_derivs = Vec::with_capacity(k);
    let mut b_derivs = Vec::with_capacity(k);
    for order in 0..k {
        a_derivs.push(de.a.derivative(order, x0).ok_or(Error::MissingDerivative {
            coefficient: "a",
            order,
        })?);
        b_derivs.push(de.b.derivative(order, x0).ok_or(Error::MissingDerivative {
            coefficient: "b",
            order,
        })?);
    }
    let mut big_a = vec![1.0];
    let mut big_b = vec![0.0];
    for p in 0..k {
        let mut binom = 1.0;
        let (mut next_a, mut next_b) = (0.0, b_derivs[p]);
        for l in 0..=p {
            if l > 0 {
                binom = binom * (p + 1 - l) as f64 / l as f64;
            }
            next_a += binom * a_derivs[l] * big_a[p - l];
            next_b += binom * a_derivs[l] * big_b[p - l];
        }
        big_a.push(next_a);
        big_b.push(next_b);
    }
    Ok(AffineApproximant { a: big_a, b: big_b })
}

/// DE1-k under a linear model: `α̂ = Σ (yᵢ − Tᵢ) Sᵢ Kᵢ / Σ Sᵢ² Kᵢ`.
pub fn de1k_linear(
    data: &Dataset,
    de: &LinearFirstOrderDe,
    k: usize,
    kernel: Kernel,
    h: f64,
    grid: &[f64],
) -> Result<Fit> {
    check_k(k)?;
    check_bandwidth(h)?;
    let xs = data.xs();
    let ys = data.ys();
    collect_fit(grid, Method::De1Linear { k }, h, |x0| {
        let coeffs = affine_coeffs(de, x0, k)?;
        let (mut num, mut den, mut weight_sum) = (0.0, 0.0, 0.0);
        for i in window(xs, kernel, h, x0) {
            let d = xs[i] - x0;
            let w = kernel.scaled_unchecked(d, h);
            if w == 0.0 {
                continue;
            }
            let (s, t) = coeffs.multipliers(d);
            weight_sum += w;
            num += (ys[i] - t) * s * w;
            den += s * s * w;
        }
        if weight_sum < DEGENERATE_WEIGHT || den < DEGENERATE_WEIGHT {
            return Ok(PointEstimate::degenerate(weight_sum));
        }
        Ok(PointEstimate {
            value: num / den,
            weight_sum,
        })
    })
}
