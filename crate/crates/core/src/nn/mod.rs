//! Per-link neural distance fields and their composition over the robot.

mod composite;
mod eval;
mod mlp;
mod train;

pub use composite::{sphere_clearance, CompositeQuery, CompositeSdf, ExactCompositeSdf, RobotSdf};
pub use eval::{evaluate_bands, parse_bands, sample_band_points, Band, BandReport, DEFAULT_BANDS};
pub use mlp::{Layer, MlpOutput, MlpSdf, Provenance, DEFAULT_TRUST_RADIUS, LINK_ARCHITECTURE, WEIGHTS_VERSION};
pub use train::{
    alignment_penalty, batch_gradient, chunk_gradient, evaluate, split, train_link_sdf, AlignmentGradient,
    ChunkGradient, EpochLog, Params, TrainConfig, TrainReport,
};
