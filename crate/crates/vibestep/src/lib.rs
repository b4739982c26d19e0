//! Person identification from footstep-induced floor vibrations.
//!
//! The library covers the full pipeline:
//!
//! * [`beam`] — modal simulation of a simply supported beam under
//!   impulsive loads, the synthetic data source;
//! * [`gait`] — per-person gait models, walks, and calibration impulse
//!   sequences rendered through the beam;
//! * [`attenuation`] — frequency-dependent wave attenuation along the
//!   propagation path;
//! * [`detect`] / [`features`] — footstep onset detection and
//!   log-spaced band-energy features;
//! * [`variability`] — decomposition of feature scatter into
//!   footstep-induced and structure-induced parts;
//! * [`fisher`] — a regularized Fisher discriminant transform that
//!   suppresses within-group (path/structure) variability;
//! * [`dpmm`] — an online Dirichlet-process mixture model that
//!   clusters footsteps open-set, admitting new people on the fly;
//! * [`scenario`] / [`pipeline`] — the default two-structure synthetic
//!   experiment and the end-to-end stages used by the CLI;
//! * [`exec`] — data-parallel map with a sequential fallback (feature
//!   `parallel`), honoring the `VIBESTEP_THREADS` cap.
//!
//! Everything downstream of a fixed configuration and seed is
//! deterministic: reports serialize to byte-identical files across
//! runs.

pub mod attenuation;
pub mod beam;
pub mod detect;
pub mod dpmm;
pub mod error;
pub mod exec;
pub mod features;
pub mod fisher;
pub mod gait;
pub mod io;
pub mod linalg;
pub mod manifest;
pub mod matching;
pub mod niw;
pub mod pipeline;
pub mod scenario;
pub mod types;
pub mod variability;

pub use error::{Error, ErrorCategory, Result};
