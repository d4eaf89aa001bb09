use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::io::{emit, fit_csv, parse_csv, write_file};
use super::{
    parse_grid_spec, BandwidthArgs, FitArgs, Format, ModelArgs, MseCurveArgs, RatioArgs,
    SimulateArgs,
};
use crate::bandwidth::{loocv_select, BandwidthGrid};
use crate::data::{format_float, linspace, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{fit_method, Estimator, Method};
use crate::kernel::Kernel;
use crate::parametric::{fit_exponential_nls, fit_loglinear, NlsOptions};
use crate::simulation::{
    run_mad_study, run_mse_curve, variance_ratio_study_with_bandwidth, SimConfig,
};

/// Resolves `--method` together with `--degree`.
fn resolve_method(model: &ModelArgs) -> Result<Method> {
    let name = model.method.trim().to_ascii_lowercase();
    match (name.as_str(), model.degree) {
        ("lp", Some(d)) => format!("lp{d}").parse(),
        ("de1" | "de1lin" | "de1gen", Some(d)) => format!("{name}-{d}").parse(),
        ("lp" | "de1" | "de1lin" | "de1gen", None) => {
            Err(Error::Config(format!("method `{name}` needs --degree")))
        }
        (_, Some(_)) => Err(Error::Config(format!(
            "--degree only applies to lp, de1, de1lin and de1gen, not `{name}`"
        ))),
        (_, None) => name.parse(),
    }
}

fn needs_lambda(method: Method) -> bool {
    matches!(
        method,
        Method::De1 { .. }
            | Method::De1Linear { .. }
            | Method::De1General { .. }
            | Method::NlsKnownRate
    )
}

/// λ from the flags: given, estimated by a prefit, or absent.
fn resolve_lambda(model: &ModelArgs, method: Method, data: &Dataset) -> Result<Option<f64>> {
    if let Some(l) = model.lambda {
        if !l.is_finite() {
            return Err(Error::Config(format!("--lambda must be finite, got {l}")));
        }
        return Ok(Some(l));
    }
    if model.estimate_lambda {
        return prefit_lambda(data).map(Some);
    }
    if needs_lambda(method) {
        return Err(Error::Config(format!(
            "method `{method}` needs --lambda or --estimate-lambda"
        )));
    }
    Ok(None)
}

/// Log-linear least squares on `log y`, or NLS when some response is not
/// positive. This is a simple plug-in, not part of the estimators.
pub(crate) fn prefit_lambda(data: &Dataset) -> Result<f64> {
    if data.ys().iter().all(|&y| y > 0.0) {
        Ok(fit_loglinear(data)?.lambda)
    } else {
        Ok(fit_exponential_nls(data, &NlsOptions::default())?.lambda)
    }
}

#[derive(Serialize)]
struct FitJson<'a> {
    method: String,
    lambda: Option<f64>,
    bandwidth: Option<f64>,
    grid: &'a [f64],
    ghat: &'a [f64],
    degenerate: &'a [bool],
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

pub(crate) fn fit(args: &FitArgs) -> Result<()> {
    let method = resolve_method(&args.model)?;
    let kernel: Kernel = args.model.kernel.parse()?;
    let data = parse_csv(&args.input)?;
    let lambda = resolve_lambda(&args.model, method, &data)?;
    let h = args.bandwidth.unwrap_or_else(|| data.reference_bandwidth());
    let grid = match &args.grid {
        Some(spec) => {
            let (lo, hi, count) = parse_grid_spec(spec)?;
            linspace(lo, hi, count)
        }
        None => {
            let xs = data.xs();
            linspace(xs[0], xs[xs.len() - 1], 101)
        }
    };
    let fit = fit_method(&data, method, lambda, kernel, h, &grid)?;
    let text = match args.format {
        Format::Csv => fit_csv(&fit),
        Format::Json => to_json(&FitJson {
            method: method.to_string(),
            lambda,
            bandwidth: method.is_kernel().then_some(h),
            grid: &fit.grid,
            ghat: &fit.values,
            degenerate: &fit.degenerate,
        }),
    };
    emit(args.output.as_deref(), &text)
}

#[derive(Serialize)]
struct BandwidthJson<'a> {
    method: String,
    lambda: Option<f64>,
    h_star: f64,
    grid: &'a [f64],
    scores: &'a [f64],
}

pub(crate) fn bandwidth(args: &BandwidthArgs) -> Result<()> {
    let method = resolve_method(&args.model)?;
    let kernel: Kernel = args.model.kernel.parse()?;
    let data = parse_csv(&args.input)?;
    let lambda = resolve_lambda(&args.model, method, &data)?;
    let estimator = match method {
        Method::LocalPoly { degree } => Estimator::LocalPoly { degree },
        Method::De1 { k } => Estimator::De1Exponential {
            lambda: lambda.expect("resolved above"),
            k,
        },
        other => {
            return Err(Error::Config(format!(
                "bandwidth selection supports local polynomial and de1-k methods, not `{other}`"
            )))
        }
    };
    let grid = match &args.grid {
        Some(spec) => {
            let (lo, hi, count) = parse_grid_spec(spec)?;
            BandwidthGrid::log_spaced(lo, hi, count)?
        }
        None => BandwidthGrid::default_for(&data)?,
    };
    let selection = loocv_select(&data, &estimator, kernel, &grid)?;
    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("h,cv_score\n");
            for (h, s) in grid.values().iter().zip(&selection.scores) {
                let _ = writeln!(out, "{},{}", format_float(*h), format_float(*s));
            }
            out
        }
        Format::Json => to_json(&BandwidthJson {
            method: method.to_string(),
            lambda,
            h_star: selection.h_star,
            grid: grid.values(),
            scores: &selection.scores,
        }),
    };
    emit(args.output.as_deref(), &text)?;
    if args.format == Format::Csv {
        eprintln!("h_star = {}", format_float(selection.h_star));
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut config = SimConfig::from_json(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

pub(crate) fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = load_config(&args.config, args.seed)?;
    let report = run_mad_study(&config)?;
    let stem = args
        .config
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&args.output)
        .map_err(|e| Error::io(format!("creating {}", args.output.display()), e))?;
    write_file(&args.output.join(format!("{stem}.csv")), &report.to_csv())?;
    write_file(&args.output.join(format!("{stem}.json")), &report.to_json())?;
    print!("{}", report.table());
    Ok(())
}

pub(crate) fn mse_curve(args: &MseCurveArgs) -> Result<()> {
    let config = load_config(&args.config, args.seed)?;
    let grid = match &args.grid {
        Some(spec) => {
            let (lo, hi, count) = parse_grid_spec(spec)?;
            linspace(lo, hi, count)
        }
        None => {
            let (a, b) = config.design.interval();
            linspace(a, b, 101)
        }
    };
    let curve = run_mse_curve(&config, &grid)?;
    let text = match args.format {
        Format::Csv => curve.to_csv(),
        Format::Json => to_json(&curve),
    };
    emit(args.output.as_deref(), &text)
}

pub(crate) fn variance_ratio(args: &RatioArgs) -> Result<()> {
    let summary =
        variance_ratio_study_with_bandwidth(args.n, args.lambda, args.seed, args.bandwidth)?;
    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("statistic,value\n");
            for (name, v) in [
                ("mean", summary.mean),
                ("min", summary.min),
                ("max", summary.max),
                ("bandwidth", summary.bandwidth),
            ] {
                let _ = writeln!(out, "{name},{}", format_float(v));
            }
            out
        }
        Format::Json => to_json(&summary),
    };
    emit(args.output.as_deref(), &text)
}
