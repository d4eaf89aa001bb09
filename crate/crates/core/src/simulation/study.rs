use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BandwidthPolicy, SimConfig};
use super::design::{design_density, generate_dataset, replication_rng};
use crate::asymptotics::{baseline_bias_variance, AsymptoticContext, BaselineMethod};
use crate::bandwidth::{loocv_select, optimal_bandwidth, OptimalBandwidthInputs};
use crate::data::{format_float, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, Method};
use crate::parametric::{fit_exponential_nls, fit_loglinear, NlsOptions};

/// Median of `|true − fitted|` over the points where `fitted` is not NaN.
/// An even count averages the middle two.
pub fn mad(true_values: &[f64], fitted: &[f64]) -> Result<f64> {
    if true_values.len() != fitted.len() {
        return Err(Error::InvalidData(format!(
            "{} true values but {} fitted values",
            true_values.len(),
            fitted.len()
        )));
    }
    let mut deviations: Vec<f64> = true_values
        .iter()
        .zip(fitted)
        .filter(|(_, f)| !f.is_nan())
        .map(|(t, f)| (t - f).abs())
        .collect();
    if deviations.is_empty() {
        return Err(Error::UndefinedMad);
    }
    deviations.sort_by(f64::total_cmp);
    let m = deviations.len();
    Ok(if m % 2 == 1 {
        deviations[m / 2]
    } else {
        0.5 * (deviations[m / 2 - 1] + deviations[m / 2])
    })
}

/// Per-method results of a MAD study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_mad: f64,
    /// Sample standard deviation of `mads` over `√mads.len()`.
    pub se_mad: f64,
    /// MAD of every replication in which the method produced one, in
    /// replication order.
    pub mads: Vec<f64>,
    /// Replications with at least one degenerate point excluded.
    pub degenerate_count: usize,
    /// Replications with no MAD: every point degenerate, bandwidth selection
    /// failed, or the NLS fit did not converge.
    pub failure_count: usize,
    /// Mean bandwidth over the replications that produced a MAD.
    pub mean_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
}

impl SimReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// `method,mean_mad_x1000,se_x1000,degenerate_count,failure_count`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,mean_mad_x1000,se_x1000,degenerate_count,failure_count\n");
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m.method,
                format_float(1000.0 * m.mean_mad),
                format_float(1000.0 * m.se_mad),
                m.degenerate_count,
                m.failure_count
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Mean (SE) of MAD × 1000 with two decimals, one method per row.
    pub fn table(&self) -> String {
        let mut out = format!(
            "n = {}, reps = {}, noise = {:?}\n{:<10} {}\n",
            self.config.n, self.config.reps, self.config.noise, "method", "MAD x 1000 (SE)"
        );
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{:<10} {:.2} ({:.2})",
                m.method.to_string(),
                1000.0 * m.mean_mad,
                1000.0 * m.se_mad
            );
        }
        out
    }
}

/// One method's fitted values in one replication.
struct MethodRun {
    values: Vec<f64>,
    bandwidth: Option<f64>,
}

/// Bandwidths fixed for the whole study, one per method.
fn fixed_bandwidths(config: &SimConfig) -> Result<Vec<Option<f64>>> {
    config
        .methods
        .iter()
        .map(|m| {
            if !m.is_kernel() {
                return Ok(None);
            }
            match config.bandwidth_policy {
                BandwidthPolicy::Loocv { .. } => Ok(None),
                BandwidthPolicy::Fixed { h } => Ok(Some(h)),
                BandwidthPolicy::CorollaryOptimal { x0 } => {
                    let (a, b) = config.design.interval();
                    corollary_bandwidth(*m, config, x0.unwrap_or(0.5 * (a + b))).map(Some)
                }
            }
        })
        .collect()
}

/// Asymptotically optimal bandwidth of `method` at `x0` for the study's
/// true model, noise variance and design density.
pub fn corollary_bandwidth(method: Method, config: &SimConfig, x0: f64) -> Result<f64> {
    let (f, fprime) = design_density(&config.design, x0)?;
    if !(f > 0.0) {
        return Err(Error::Config(format!(
            "bandwidth_policy: design density is zero at x0 = {x0}"
        )));
    }
    let sigma2 = config.noise.variance();
    match method {
        Method::De1 { k } => optimal_bandwidth(
            k,
            &OptimalBandwidthInputs {
                sigma2,
                n: config.n,
                f_x0: f,
                fprime_x0: Some(fprime),
                lambda: config.truth.lambda,
                x0,
                g0: config.truth.g0,
                kernel: config.kernel,
            },
        ),
        Method::LocalPoly { degree } if degree <= 3 => {
            let baseline = [
                BaselineMethod::Nw,
                BaselineMethod::Ll,
                BaselineMethod::Lq,
                BaselineMethod::Lc,
            ][degree];
            let ctx = AsymptoticContext {
                lambda: config.truth.lambda,
                g_x0: config.truth.value(x0),
                h: 1.0,
                n: config.n,
                sigma2,
                f_x0: f,
                fprime_x0: fprime,
                kernel: config.kernel,
            };
            // bias = B h^p and variance = V / h at h = 1
            let (bias, variance) = baseline_bias_variance(baseline, &ctx);
            let p = if degree < 2 { 2 } else { 4 };
            if bias == 0.0 {
                return Err(Error::UndefinedOptimum("leading bias vanishes"));
            }
            Ok((variance / (2.0 * p as f64 * bias * bias)).powf(1.0 / (2 * p + 1) as f64))
        }
        other => Err(Error::Config(format!(
            "bandwidth_policy: no optimal bandwidth available for `{other}`"
        ))),
    }
}

fn estimator_for(method: Method, lambda: f64) -> Option<Estimator> {
    match method {
        Method::LocalPoly { degree } => Some(Estimator::LocalPoly { degree }),
        Method::De1 { k } => Some(Estimator::De1Exponential { lambda, k }),
        _ => None,
    }
}

fn run_method(
    method: Method,
    data: &Dataset,
    config: &SimConfig,
    fixed_h: Option<f64>,
    eval: &[f64],
) -> Result<MethodRun> {
    match method {
        Method::Nls => {
            let fit = fit_exponential_nls(data, &NlsOptions::default())?;
            if !fit.converged {
                return Err(Error::OptimizerFailure { x0: f64::NAN });
            }
            Ok(MethodRun {
                values: eval.iter().map(|&x| fit.predict(x)).collect(),
                bandwidth: None,
            })
        }
        Method::NlsKnownRate => {
            let fit = fit_exponential_nls(
                data,
                &NlsOptions {
                    fixed_lambda: Some(config.truth.lambda),
                    ..NlsOptions::default()
                },
            )?;
            Ok(MethodRun {
                values: eval.iter().map(|&x| fit.predict(x)).collect(),
                bandwidth: None,
            })
        }
        Method::LogLinear => {
            let fit = fit_loglinear(data)?;
            Ok(MethodRun {
                values: eval.iter().map(|&x| fit.predict(x)).collect(),
                bandwidth: None,
            })
        }
        _ => {
            let estimator = estimator_for(method, config.truth.lambda).ok_or_else(|| {
                Error::Config(format!("methods: `{method}` cannot run in a study"))
            })?;
            let h = match (fixed_h, &config.bandwidth_policy) {
                (Some(h), _) => h,
                (None, BandwidthPolicy::Loocv { grid }) => {
                    loocv_select(data, &estimator, config.kernel, &grid.build(data)?)?.h_star
                }
                (None, _) => unreachable!("non-CV policies fix the bandwidth up front"),
            };
            let fit = estimator.fit(data, config.kernel, h, eval)?;
            Ok(MethodRun {
                values: fit.values,
                bandwidth: Some(h),
            })
        }
    }
}

enum Outcome {
    Mad {
        mad: f64,
        excluded: usize,
        bandwidth: Option<f64>,
    },
    Failed,
}

fn replicate_mad(config: &SimConfig, fixed: &[Option<f64>], r: usize) -> Vec<Outcome> {
    let mut rng = replication_rng(config.seed, r as u64);
    let data = match generate_dataset(
        &config.design,
        &config.truth,
        &config.noise,
        config.n,
        &mut rng,
    ) {
        Ok(d) => d,
        Err(_) => return config.methods.iter().map(|_| Outcome::Failed).collect(),
    };
    let truth: Vec<f64> = data.xs().iter().map(|&x| config.truth.value(x)).collect();
    config
        .methods
        .iter()
        .zip(fixed)
        .map(|(&method, &h)| {
            let Ok(run) = run_method(method, &data, config, h, data.xs()) else {
                return Outcome::Failed;
            };
            match mad(&truth, &run.values) {
                Ok(mad) => Outcome::Mad {
                    mad,
                    excluded: run.values.iter().filter(|v| v.is_nan()).count(),
                    bandwidth: run.bandwidth,
                },
                Err(_) => Outcome::Failed,
            }
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Monte-Carlo MAD study: per replication, simulate, choose bandwidths,
/// fit every method at the design points and score against the truth.
///
/// Replications run in parallel on independent random streams and are
/// aggregated in replication order, so the report does not depend on the
/// thread count.
pub fn run_mad_study(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let fixed = fixed_bandwidths(config)?;
    let outcomes: Vec<Vec<Outcome>> = (0..config.reps)
        .into_par_iter()
        .map(|r| replicate_mad(config, &fixed, r))
        .collect();
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut mads = Vec::with_capacity(config.reps);
            let mut bandwidths = Vec::new();
            let (mut degenerate_count, mut failure_count) = (0, 0);
            for rep in &outcomes {
                match rep[j] {
                    Outcome::Mad {
                        mad,
                        excluded,
                        bandwidth,
                    } => {
                        mads.push(mad);
                        bandwidths.extend(bandwidth);
                        if excluded > 0 {
                            degenerate_count += 1;
                        }
                    }
                    Outcome::Failed => failure_count += 1,
                }
            }
            let (mean_mad, se_mad) = mean_and_se(&mads);
            MethodSummary {
                method,
                mean_mad,
                se_mad,
                mads,
                degenerate_count,
                failure_count,
                mean_bandwidth: (!bandwidths.is_empty())
                    .then(|| bandwidths.iter().sum::<f64>() / bandwidths.len() as f64),
            }
        })
        .collect();
    Ok(SimReport {
        config: config.clone(),
        seed: config.seed,
        methods,
    })
}

/// Pointwise Monte-Carlo MSE curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub grid: Vec<f64>,
    pub methods: Vec<Method>,
    /// `log_mse[j][i]`: natural log of the MSE of method j at `grid[i]`;
    /// NaN where no replication produced a value.
    pub log_mse: Vec<Vec<f64>>,
    /// Replications contributing to each entry of `log_mse`.
    pub counts: Vec<Vec<usize>>,
    /// Bandwidth of each method when fixed for the whole study.
    pub bandwidths: Vec<Option<f64>>,
}

impl MseCurve {
    pub fn curve(&self, method: Method) -> Option<&[f64]> {
        let j = self.methods.iter().position(|m| *m == method)?;
        Some(&self.log_mse[j])
    }

    /// Long format: `method,x0,log_mse,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,x0,log_mse,count\n");
        for (j, m) in self.methods.iter().enumerate() {
            for (i, x0) in self.grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{m},{},{},{}",
                    format_float(*x0),
                    format_float(self.log_mse[j][i]),
                    self.counts[j][i]
                );
            }
        }
        out
    }
}

/// `MSE(x₀) = mean over replications of (ĝ(x₀) − g(x₀))²`, returned as its
/// natural log for every method and grid point.
pub fn run_mse_curve(config: &SimConfig, eval_grid: &[f64]) -> Result<MseCurve> {
    config.validate()?;
    let (a, b) = config.design.interval();
    if let Some(x) = eval_grid.iter().find(|x| !(**x >= a && **x <= b)) {
        return Err(Error::Config(format!(
            "evaluation point {x} lies outside [{a}, {b}]"
        )));
    }
    let fixed = fixed_bandwidths(config)?;
    let truth: Vec<f64> = eval_grid.iter().map(|&x| config.truth.value(x)).collect();
    let per_rep: Vec<Vec<Option<Vec<f64>>>> = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(config.seed, r as u64);
            let Ok(data) = generate_dataset(
                &config.design,
                &config.truth,
                &config.noise,
                config.n,
                &mut rng,
            ) else {
                return vec![None; config.methods.len()];
            };
            config
                .methods
                .iter()
                .zip(&fixed)
                .map(|(&m, &h)| {
                    run_method(m, &data, config, h, eval_grid).ok().map(|run| {
                        run.values
                            .iter()
                            .zip(&truth)
                            .map(|(v, t)| (v - t).powi(2))
                            .collect()
                    })
                })
                .collect()
        })
        .collect();
    let mut log_mse = Vec::new();
    let mut counts = Vec::new();
    for j in 0..config.methods.len() {
        let mut sums = vec![0.0; eval_grid.len()];
        let mut count = vec![0usize; eval_grid.len()];
        for rep in &per_rep {
            if let Some(errors) = &rep[j] {
                for (i, e) in errors.iter().enumerate() {
                    if !e.is_nan() {
                        sums[i] += e;
                        count[i] += 1;
                    }
                }
            }
        }
        log_mse.push(
            sums.iter()
                .zip(&count)
                .map(|(s, c)| {
                    if *c == 0 {
                        f64::NAN
                    } else {
                        (s / *c as f64).ln()
                    }
                })
                .collect(),
        );
        counts.push(count);
    }
    Ok(MseCurve {
        grid: eval_grid.to_vec(),
        methods: config.methods.clone(),
        log_mse,
        counts,
        bandwidths: fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::simulation::config::{DesignSpec, NoiseSpec, Truth};

    fn config(reps: usize, sigma: f64) -> SimConfig {
        SimConfig {
            truth: Truth::exponential(1.0, 1.0),
            design: DesignSpec::UniformRandom { a: 0.0, b: 1.0 },
            noise: NoiseSpec::Normal { sigma },
            n: 30,
            reps,
            methods: vec![Method::NW, Method::LL, Method::De1 { k: 2 }, Method::Nls],
            seed: 11,
            bandwidth_policy: BandwidthPolicy::default(),
            kernel: Kernel::Gaussian,
        }
    }

    #[test]
    fn mad_conventions() {
        assert_eq!(mad(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mad(&[0.0; 3], &[1.0, -2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mad(&[0.0; 4], &[1.0, 2.0, -3.0, 10.0]).unwrap(), 2.5);
        assert_eq!(mad(&[0.0; 4], &[1.0, f64::NAN, 3.0, 10.0]).unwrap(), 3.0);
        assert!(matches!(
            mad(&[0.0; 2], &[f64::NAN, f64::NAN]),
            Err(Error::UndefinedMad)
        ));
        assert!(mad(&[0.0; 2], &[0.0]).is_err());
    }

    #[test]
    fn exact_model_gives_tiny_nls_mad() {
        let mut c = config(1, 1e-12);
        c.methods = vec![Method::Nls];
        let report = run_mad_study(&c).unwrap();
        assert!(report.methods[0].mean_mad < 1e-8);
    }

    #[test]
    fn reports_are_deterministic_and_consistent() {
        let c = config(12, 0.1);
        let a = run_mad_study(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_mad_study(&c).unwrap());
        assert_eq!(a.methods, b.methods);
        assert_eq!(a.to_csv(), b.to_csv());
        for m in &a.methods {
            assert_eq!(m.mads.len() + m.failure_count, 12);
            let (mean, se) = mean_and_se(&m.mads);
            assert_eq!((mean, se), (m.mean_mad, m.se_mad));
        }
        let csv = a.to_csv();
        assert!(csv.starts_with("method,mean_mad_x1000,se_x1000,degenerate_count"));
        assert_eq!(csv.lines().count(), 5);
        let parsed: SimReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(parsed.methods, a.methods);
    }

    #[test]
    fn fixed_policy_is_reported() {
        let mut c = config(3, 0.1);
        c.bandwidth_policy = BandwidthPolicy::Fixed { h: 0.2 };
        let report = run_mad_study(&c).unwrap();
        assert!((report.methods[0].mean_bandwidth.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(report.summary(Method::Nls).unwrap().mean_bandwidth, None);
    }

    #[test]
    fn mse_variance_scales_with_noise() {
        let base = SimConfig {
            truth: Truth::exponential(1.0, 0.0),
            design: DesignSpec::BetaQuantile {
                alpha: 1.0,
                beta: 1.0,
            },
            noise: NoiseSpec::Normal { sigma: 0.1 },
            n: 50,
            reps: 40,
            methods: vec![Method::NW, Method::De1 { k: 1 }],
            seed: 3,
            bandwidth_policy: BandwidthPolicy::Fixed { h: 0.1 },
            kernel: Kernel::Gaussian,
        };
        let doubled = SimConfig {
            noise: NoiseSpec::Normal { sigma: 0.2 },
            ..base.clone()
        };
        let grid = [0.2, 0.5, 0.8];
        let a = run_mse_curve(&base, &grid).unwrap();
        let b = run_mse_curve(&doubled, &grid).unwrap();
        // same streams, flat truth: every error doubles exactly
        for j in 0..2 {
            for i in 0..3 {
                let ratio = (b.log_mse[j][i] - a.log_mse[j][i]).exp();
                assert!((ratio - 4.0).abs() < 1e-9);
            }
        }
        assert!(run_mse_curve(&base, &[1.5]).is_err());
    }

    #[test]
    fn corollary_bandwidths() {
        let mut c = config(1, 0.1);
        c.n = 10_000;
        let h = corollary_bandwidth(Method::De1 { k: 1 }, &c, 0.5).unwrap();
        let direct = optimal_bandwidth(
            1,
            &OptimalBandwidthInputs {
                sigma2: 0.01,
                n: 10_000,
                f_x0: 1.0,
                fprime_x0: Some(0.0),
                lambda: 1.0,
                x0: 0.5,
                g0: 1.0,
                kernel: Kernel::Gaussian,
            },
        )
        .unwrap();
        assert_eq!(h, direct);
        // LL and DE1-1 share bias and variance constants
        let ll = corollary_bandwidth(Method::LL, &c, 0.5).unwrap();
        assert!((ll - h).abs() < 1e-12 * h);
        assert!(corollary_bandwidth(Method::Nls, &c, 0.5).is_err());
    }
}
