//! Parametric fits of the exponential solution `g(x) = g(a) e^{λ(x − a)}`,
//! where `a` is the left end of the dataset's interval.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsOptions {
    /// Starting `(g_a, λ)`; defaults to the log-linear fit when every
    /// response is positive and to `(mean(y), 0)` otherwise.
    pub init: Option<(f64, f64)>,
    /// Holds λ at this value and fits `g_a` alone.
    pub fixed_lambda: Option<f64>,
    pub max_iterations: usize,
}

impl Default for NlsOptions {
    fn default() -> Self {
        NlsOptions {
            init: None,
            fixed_lambda: None,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub g_a: f64,
    pub lambda: f64,
    /// The origin `a`.
    pub origin: f64,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the RSS gradient at the returned parameters.
    pub gradient_norm: f64,
    /// RSS at the start and after every accepted step.
    pub rss_trace: Vec<f64>,
}

impl ExponentialFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.g_a * (self.lambda * (x - self.origin)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub log_g_a: f64,
    pub lambda: f64,
    pub origin: f64,
}

impl LogLinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.log_g_a + self.lambda * (x - self.origin)).exp()
    }
}

fn check_design(data: &Dataset) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InvalidData(format!(
            "an exponential fit needs at least 2 observations, got {}",
            data.len()
        )));
    }
    let xs = data.xs();
    if xs[0] == xs[xs.len() - 1] {
        return Err(Error::DegenerateDesign);
    }
    Ok(())
}

/// Ordinary least squares of `log y` on `x − a`.
pub fn fit_loglinear(data: &Dataset) -> Result<LogLinearFit> {
    check_design(data)?;
    if let Some((index, &value)) = data.ys().iter().enumerate().find(|(_, y)| !(**y > 0.0)) {
        return Err(Error::NonPositiveResponse { index, value });
    }
    let origin = data.interval().0;
    let n = data.len() as f64;
    let ts: Vec<f64> = data.xs().iter().map(|x| x - origin).collect();
    let ls: Vec<f64> = data.ys().iter().map(|y| y.ln()).collect();
    let t_mean = ts.iter().sum::<f64>() / n;
    let l_mean = ls.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in ts.iter().zip(&ls) {
        sxy += (t - t_mean) * (l - l_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let lambda = sxy / sxx;
    Ok(LogLinearFit {
        log_g_a: l_mean - lambda * t_mean,
        lambda,
        origin,
    })
}

struct Problem<'a> {
    ts: Vec<f64>,
    ys: &'a [f64],
}

impl Problem<'_> {
    fn rss(&self, g: f64, lambda: f64) -> f64 {
        let total: f64 = self
            .ts
            .iter()
            .zip(self.ys)
            .map(|(t, y)| (y - g * (lambda * t).exp()).powi(2))
            .sum();
        if total.is_finite() {
            total
        } else {
            f64::INFINITY
        }
    }

    /// `(JᵀJ, Jᵀr)` for the model Jacobian `J = [e, g t e]`.
    fn normal_equations(&self, g: f64, lambda: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (t, y) in self.ts.iter().zip(self.ys) {
            let e = (lambda * t).exp();
            let j = [e, g * t * e];
            let r = y - g * e;
            for a in 0..2 {
                jtr[a] += j[a] * r;
                for b in 0..2 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        (jtj, jtr)
    }
}

/// Additive-error nonlinear least squares for `(g_a, λ)` by damped
/// Gauss–Newton (Levenberg–Marquardt).
///
/// Only steps that lower the RSS are accepted. The fit is converged when an
/// accepted step changes the RSS by less than 1e-12 relative, when the
/// gradient norm drops below 1e-10, or when no damping level yields a
/// decrease. Hitting the iteration cap returns `converged = false`.
pub fn fit_exponential_nls(data: &Dataset, options: &NlsOptions) -> Result<ExponentialFit> {
    check_design(data)?;
    let origin = data.interval().0;
    let problem = Problem {
        ts: data.xs().iter().map(|x| x - origin).collect(),
        ys: data.ys(),
    };
    let (mut g, mut lambda) = match (options.init, options.fixed_lambda) {
        (Some(init), fixed) => (init.0, fixed.unwrap_or(init.1)),
        (None, Some(fixed)) => {
            let mean = data.ys().iter().sum::<f64>() / data.len() as f64;
            (mean, fixed)
        }
        (None, None) => match fit_loglinear(data) {
            Ok(fit) => (fit.log_g_a.exp(), fit.lambda),
            Err(_) => (data.ys().iter().sum::<f64>() / data.len() as f64, 0.0),
        },
    };
    let free_lambda = options.fixed_lambda.is_none();
    let gradient_norm = |jtr: &[f64; 2]| {
        if free_lambda {
            2.0 * jtr[0].hypot(jtr[1])
        } else {
            2.0 * jtr[0].abs()
        }
    };

    let mut rss = problem.rss(g, lambda);
    let mut trace = vec![rss];
    let mut damping = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let (mut jtj, mut jtr) = problem.normal_equations(g, lambda);

    while iterations < options.max_iterations {
        if gradient_norm(&jtr) < 1e-10 {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while damping < 1e20 {
            let a00 = jtj[0][0] * (1.0 + damping);
            let (dg, dl) = if free_lambda {
                let a11 = jtj[1][1] * (1.0 + damping);
                let a01 = jtj[0][1];
                let det = a00 * a11 - a01 * a01;
                (
                    (a11 * jtr[0] - a01 * jtr[1]) / det,
                    (a00 * jtr[1] - a01 * jtr[0]) / det,
                )
            } else {
                (jtr[0] / a00, 0.0)
            };
            let (g_new, l_new) = (g + dg, lambda + dl);
            let rss_new = problem.rss(g_new, l_new);
            if dg.is_finite() && dl.is_finite() && rss_new < rss {
                let relative_change = (rss - rss_new) / rss.max(f64::MIN_POSITIVE);
                g = g_new;
                lambda = l_new;
                rss = rss_new;
                trace.push(rss);
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                (jtj, jtr) = problem.normal_equations(g, lambda);
                if relative_change < 1e-12 {
                    converged = true;
                }
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            // no damping level decreases the RSS: a numerical stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(ExponentialFit {
        g_a: g,
        lambda,
        origin,
        rss,
        iterations,
        converged,
        gradient_norm: gradient_norm(&jtr),
        rss_trace: trace,
    })
}
