//! Pre-chirp index-modulated AFDM: mapping, DAFT transceiver, doubly
//! dispersive channel, ML detection, error-rate analysis and pre-chirp
//! alphabet optimization.
//!
//! The numerical core is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`, the precision used by the simulator,
//! analysis and optimizer.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod detection;
pub mod error;
pub mod io;
pub mod mapping;
pub mod optimizer;
pub mod scalar;
pub mod sim;
pub mod transceiver;
pub mod validate;

pub use analysis::{
    abep_upper_bound, diversity_order, diversity_order_in, spectral_efficiency, AbepEvaluator, GeometrySet, PhiDomain,
    Scheme,
};
pub use channel::{PathGeometry, SparsePath};
pub use config::{Config, Constellation, ConstellationKind, RandomSource, SystemConfig};
pub use error::{Error, Result};
pub use io::ConfigFile;
pub use mapping::{PreChirpAlphabet, PreChirpPatternGroup, DEFAULT_CAP_BITS};
pub use optimizer::{pso_optimize, ObjectiveContext, PsoParams, PsoResult};
pub use scalar::Real;
pub use sim::{preset_scenario, run_ber_sweep, BerPoint, Preset, Scenario, SweepResult, TheoryMode};

pub use num_complex::{Complex32, Complex64};

pub type DaftMatricesF64 = transceiver::DaftMatrices<f64>;
pub type DaftBasisF64 = transceiver::DaftBasis<f64>;
pub type TimeFrameF64 = transceiver::TimeFrame<f64>;
pub type ChannelRealizationF64 = channel::ChannelRealization<f64>;
pub type EffectiveChannelF64 = channel::EffectiveChannel<f64>;
pub type CodewordChannelF64 = detection::CodewordChannel<f64>;
pub type MlDetectorF64<'a> = detection::MlDetector<'a, f64>;
pub type PairwiseDifferenceF64 = analysis::PairwiseDifference<f64>;

pub type DaftMatricesF32 = transceiver::DaftMatrices<f32>;
pub type ChannelRealizationF32 = channel::ChannelRealization<f32>;
