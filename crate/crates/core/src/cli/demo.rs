use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::commands::prefit_lambda;
use super::io::{fit_csv, points_csv, write_file};
use crate::data::{linspace, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{fit_method, Method};
use crate::kernel::Kernel;
use crate::parametric::{fit_exponential_nls, NlsOptions};
use crate::simulation::replication_rng;

const SIMULATED_POINTS: usize = 41;
const GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoOptions {
    pub seed: u64,
    /// Width of the removed block relative to the time range.
    pub gap_fraction: f64,
    /// Centre of the removed block relative to the time range.
    pub gap_center: f64,
    pub bandwidth: f64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            seed: 1,
            gap_fraction: 0.3,
            gap_center: 0.5,
            bandwidth: 3.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    pub method: Method,
    pub file: String,
    /// Fitted values strictly increase across the gap.
    pub monotone_in_gap: bool,
    /// Sign changes of successive differences inside the gap.
    pub direction_changes_in_gap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub seed: u64,
    pub gap: (f64, f64),
    pub bandwidth: f64,
    /// Rate of the log-linear prefit on the kept points, used by DE1-1.
    pub lambda: f64,
    /// Noise standard deviation, from the residuals of the mouse fit.
    pub noise_sd: f64,
    pub kept: usize,
    pub removed: usize,
    pub panels: Vec<PanelReport>,
}

impl DemoReport {
    pub fn panel(&self, method: Method) -> Option<&PanelReport> {
        self.panels.iter().find(|p| p.method == method)
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "gap [{:.2}, {:.2}]: kept {}, removed {}; lambda = {:.4}, h = {}\n",
            self.gap.0, self.gap.1, self.kept, self.removed, self.lambda, self.bandwidth
        );
        for p in &self.panels {
            let _ = writeln!(
                out,
                "{:<6} monotone in gap: {:<5}  direction changes: {}",
                p.method.to_string(),
                p.monotone_in_gap,
                p.direction_changes_in_gap
            );
        }
        out
    }
}

fn direction_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(|d| d > 0.0)
        .collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

/// Simulates 41 points from the NLS fit to the mouse series, removes a
/// contiguous block and fits NW, LL, LQ and DE1-1 to what remains.
///
/// Writes `fit_<method>.csv` for each panel, `points_kept.csv`,
/// `points_removed.csv` and `report.json` into `out_dir`.
pub fn demo_sparse(options: &DemoOptions, out_dir: &Path) -> Result<DemoReport> {
    let DemoOptions {
        seed,
        gap_fraction,
        gap_center,
        bandwidth,
    } = *options;
    if !(gap_fraction > 0.0 && gap_fraction < 1.0 && gap_center > 0.0 && gap_center < 1.0) {
        return Err(Error::Config(format!(
            "gap fraction and centre must lie in (0, 1), got {gap_fraction} and {gap_center}"
        )));
    }
    crate::error::check_bandwidth(bandwidth)?;

    let mouse = Dataset::mouse_tumor();
    let model = fit_exponential_nls(&mouse, &NlsOptions::default())?;
    let noise_sd = (model.rss / (mouse.len() - 2) as f64).sqrt();
    let (a, b) = mouse.interval();
    let mut rng = replication_rng(seed, 0);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidData(e.to_string()))?;
    let simulated: Vec<(f64, f64)> = linspace(a, b, SIMULATED_POINTS)
        .into_iter()
        .map(|x| (x, model.predict(x) + noise.sample(&mut rng)))
        .collect();

    let width = gap_fraction * (b - a);
    let centre = a + gap_center * (b - a);
    let gap = ((centre - 0.5 * width).max(a), (centre + 0.5 * width).min(b));
    let (removed, kept): (Vec<_>, Vec<_>) = simulated
        .iter()
        .partition(|(x, _)| *x >= gap.0 && *x <= gap.1);
    let (xs, ys) = kept.iter().copied().unzip();
    let visible = Dataset::with_interval(xs, ys, (a, b))?;
    let lambda = prefit_lambda(&visible)?;

    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_file(&out_dir.join("points_kept.csv"), &points_csv(&kept))?;
    write_file(&out_dir.join("points_removed.csv"), &points_csv(&removed))?;

    let grid = linspace(a, b, GRID_POINTS);
    let mut panels = Vec::new();
    for method in [Method::NW, Method::LL, Method::LQ, Method::De1 { k: 1 }] {
        let fit = fit_method(
            &visible,
            method,
            Some(lambda),
            Kernel::Gaussian,
            bandwidth,
            &grid,
        )?;
        let file = format!("fit_{method}.csv");
        write_file(&out_dir.join(&file), &fit_csv(&fit))?;
        let inside: Vec<f64> = grid
            .iter()
            .zip(&fit.values)
            .filter(|(x, _)| **x >= gap.0 && **x <= gap.1)
            .map(|(_, v)| *v)
            .collect();
        panels.push(PanelReport {
            method,
            file,
            monotone_in_gap: inside.windows(2).all(|w| w[1] > w[0]),
            direction_changes_in_gap: direction_changes(&inside),
        });
    }
    let report = DemoReport {
        seed,
        gap,
        bandwidth,
        lambda,
        noise_sd,
        kept: kept.len(),
        removed: removed.len(),
        panels,
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable report");
    write_file(&out_dir.join("report.json"), &(json + "\n"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_direction_changes() {
        assert_eq!(direction_changes(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(direction_changes(&[1.0, 2.0, 1.5, 1.7]), 2);
        assert_eq!(direction_changes(&[1.0, 1.0, 2.0]), 0);
    }
}
