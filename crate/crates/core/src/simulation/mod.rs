//! Monte-Carlo studies: design and noise generation, seeded parallel
//! replications, MAD and pointwise MSE aggregation, and the variance-ratio
//! study comparing DE1-1 with Nadaraya–Watson.
//!
//! Replication `r` of a study seeded with `s` draws from ChaCha8 stream `r`
//! of seed `s`, so results are identical however the work is scheduled.

mod config;
mod design;
mod ratio;
mod study;

pub use config::{BandwidthPolicy, CvGrid, DesignSpec, NoiseSpec, SimConfig, Truth, TruthFn};
pub use design::{design_density, generate_dataset, replication_rng};
pub use ratio::{
    variance_ratio_study, variance_ratio_study_with_bandwidth, variance_ratios,
    VarianceRatioSummary,
};
pub use study::{
    corollary_bandwidth, mad, run_mad_study, run_mse_curve, MethodSummary, MseCurve, SimReport,
};
