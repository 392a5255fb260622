//! Click-counting phase-space functions for arrays of on-off detectors in
//! unbalanced homodyne detection.
//!
//! The pipeline is `StateSpec -> PhotonNumberDistribution -> ClickDistribution
//! -> QuasiprobEstimate`:
//!
//! ```
//! use clickspace::{DetectorArray, OrderingParam, PhasePoint, StateSpec};
//!
//! let state: StateSpec = "squeezed:r=1".parse().unwrap();
//! let detector = DetectorArray::new(6, 0.9).unwrap();
//! let s = OrderingParam::new(0.0).unwrap();
//! let est = clickspace::estimate_point(&state, detector, PhasePoint::new(0.8, 0.0), s, 10_000, 1e-12).unwrap();
//! assert!(est.value < 0.0);
//! ```

pub mod detector;
pub mod error;
pub mod experiment;
pub mod phasespace;
pub mod special;
pub mod states;

pub use detector::{
    click_distribution, click_distribution_coherent, d_symbol_table, ClickDistribution, DSymbolTable, DetectorArray,
};
pub use error::{ClickError, Result};
pub use experiment::{estimate, replication_study, sample_clicks, ClickCounts, ExperimentConfig, ReplicationStudy};
pub use phasespace::{
    estimate_point, quasiprob, quasiprob_genfn, reference_quasiprob, scan_line, significance_vs_s, stderr_exact,
    stderr_paper, truncation_for, weight, LineGrid, OrderingParam, QuasiprobEstimate, ScanRecord,
};
pub use states::{PhasePoint, PhotonNumberDistribution, StateSpec, DEFAULT_TAIL_EPS};
