//! Fixed second-order differential beamformer bank.

mod bank;
mod design;
mod steering;

pub use bank::{
    default_frequency_grid, design_bank, BeamformerBank, BANK_FORMAT, BANK_VERSION,
    PATTERN_FLOOR_DB,
};
pub use design::{
    design_beam, log_frequency_grid, white_noise_gain_db, DesignParams, TargetPattern,
};
pub use steering::{response, steering_vector};
