//! Scale-invariant SDR and the oracle baselines the separator is compared with.

mod baselines;
mod sdr;

pub use baselines::{
    irm_baseline, irm_masks, mbbf_oracle, mbirm_baseline, mvdr_weights, oracle_mvdr, IRM_FLOOR,
};
pub use sdr::{
    evaluate_mixture, evaluate_mixture_with, fit_length, sdr, SdrMeasure, SdrReference, SdrReport,
    SDR_CAP_DB,
};
