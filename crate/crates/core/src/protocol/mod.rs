//! Complete experiments: chain and lattice runs, decoupling scenarios and
//! parameter sweeps, with their configuration documents and result series.

pub mod chain;
pub mod config;
pub mod hbn;
pub mod series;
pub mod sweep;

pub use chain::{run_chain_experiment, ChainOutcome};
pub use config::{
    Azimuth, AzimuthMode, ChainConfig, ConfigDocument, CouplingMask, Engine, ExactMethod, HbnConfig, LatticeSpec, ScanSettings, SweepAxis, SweepParam,
    SweepSpec, TauReference,
};
pub use hbn::{
    prepare_hbn, reduced_benchmark_sites, run_decoupling_scenario, run_hbn_experiment, run_prepared, short_time_comparison, HbnOutcome, HbnSetup,
    ShortTimeComparison,
};
pub use series::{Comparison, ComparisonRow, SeriesRow, SiteGroup, TimeSeries};
pub use sweep::{run_sweep, SweepRow, SweepTable};
