use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, Normal, StudentT};
use statrs::distribution::{Beta, Continuous, ContinuousCDF};

use super::config::{DesignSpec, NoiseSpec, Truth};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-replication random stream: the seed selects the generator and the
/// replication index selects an independent stream within it.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn beta(alpha: f64, beta: f64) -> Result<Beta> {
    Beta::new(alpha, beta).map_err(|e| Error::Config(format!("design: {e}")))
}

fn beta_quantile(alpha: f64, b: f64, p: f64) -> Result<f64> {
    Ok(if alpha == 1.0 {
        1.0 - (1.0 - p).powf(1.0 / b)
    } else if b == 1.0 {
        p.powf(1.0 / alpha)
    } else {
        beta(alpha, b)?.inverse_cdf(p)
    })
}

fn draw_xs(design: &DesignSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(match design {
        DesignSpec::UniformRandom { a, b } => {
            (0..n).map(|_| a + (b - a) * rng.random::<f64>()).collect()
        }
        DesignSpec::BetaRandom { alpha, beta } => {
            let dist =
                BetaDist::new(*alpha, *beta).map_err(|e| Error::Config(format!("design: {e}")))?;
            (0..n).map(|_| dist.sample(rng)).collect()
        }
        DesignSpec::BetaQuantile { alpha, beta } => (1..=n)
            .map(|i| beta_quantile(*alpha, *beta, i as f64 / (n + 1) as f64))
            .collect::<Result<_>>()?,
        DesignSpec::Gapped { base, gap } => draw_xs(base, n, rng)?
            .into_iter()
            .filter(|x| *x < gap.0 || *x > gap.1)
            .collect(),
    })
}

fn draw_noise(noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> f64 {
    match *noise {
        NoiseSpec::Normal { sigma } => Normal::new(0.0, sigma)
            .expect("validated sigma")
            .sample(rng),
        NoiseSpec::StudentT { nu } => StudentT::new(nu).expect("validated nu").sample(rng),
        NoiseSpec::Laplace { location, scale } => {
            let u = rng.random::<f64>() - 0.5;
            location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

/// Draws covariates from `design`, then `yᵢ = g(xᵢ) + εᵢ`.
///
/// A gapped design returns fewer than `n` points.
pub fn generate_dataset(
    design: &DesignSpec,
    truth: &Truth,
    noise: &NoiseSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    design.validate()?;
    noise.validate()?;
    let xs = draw_xs(design, n, rng)?;
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ys = xs
        .iter()
        .map(|&x| truth.value(x) + draw_noise(noise, rng))
        .collect();
    Dataset::with_interval(xs, ys, design.interval())
}

/// Design density and its derivative at `x`.
pub fn design_density(design: &DesignSpec, x: f64) -> Result<(f64, f64)> {
    match design {
        DesignSpec::UniformRandom { a, b } => Ok(if x >= *a && x <= *b {
            (1.0 / (b - a), 0.0)
        } else {
            (0.0, 0.0)
        }),
        DesignSpec::BetaRandom { alpha, beta: b } | DesignSpec::BetaQuantile { alpha, beta: b } => {
            if !(x > 0.0 && x < 1.0) {
                return Ok((0.0, 0.0));
            }
            let f = beta(*alpha, *b)?.pdf(x);
            Ok((f, f * ((alpha - 1.0) / x - (b - 1.0) / (1.0 - x))))
        }
        DesignSpec::Gapped { base, gap } => {
            if x >= gap.0 && x <= gap.1 {
                return Ok((0.0, 0.0));
            }
            let removed = design_mass(base, gap.0, gap.1)?;
            let (f, fp) = design_density(base, x)?;
            Ok((f / (1.0 - removed), fp / (1.0 - removed)))
        }
    }
}

fn design_mass(design: &DesignSpec, lo: f64, hi: f64) -> Result<f64> {
    match design {
        DesignSpec::UniformRandom { a, b } => Ok((hi.min(*b) - lo.max(*a)).max(0.0) / (b - a)),
        DesignSpec::BetaRandom { alpha, beta: b } | DesignSpec::BetaQuantile { alpha, beta: b } => {
            let d = beta(*alpha, *b)?;
            Ok(d.cdf(hi.clamp(0.0, 1.0)) - d.cdf(lo.clamp(0.0, 1.0)))
        }
        DesignSpec::Gapped { base, gap } => {
            let inner = (lo.max(gap.0), hi.min(gap.1));
            let overlap = if inner.0 < inner.1 {
                design_mass(base, inner.0, inner.1)?
            } else {
                0.0
            };
            let removed = design_mass(base, gap.0, gap.1)?;
            Ok((design_mass(base, lo, hi)? - overlap) / (1.0 - removed))
        }
    }
}
