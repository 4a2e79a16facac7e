//! Room acoustics simulation and mixture corpus construction.

mod corpus;
mod geometry;
mod mixture;
mod rir;
mod scene;
mod voices;

pub use corpus::{
    build_corpus, corpus_item, derive_seed, load_item, read_manifest, write_manifest, CorpusSpec,
    DrySourcePool, LoadedMixture, ManifestRecord, RoomRecord, MANIFEST_NAME,
};
pub use geometry::{azimuth_deg, distance, ArrayGeometry, CIRCULAR_ARRAY_RADIUS};
pub use mixture::{generate_mixture, render_source, MixtureOptions, MixtureSample, REFERENCE_MIC};
pub use rir::{
    add_fractional_impulse, image_method_rir, RoomSpec, DEFAULT_IMAGE_ORDER, DEFAULT_RIR_LEN,
    SINC_HALF_WIDTH, SPEED_OF_SOUND,
};
pub use scene::{
    angular_distance, sample_scene, violates_sector_rule, Scene, SceneRanges, MAX_SCENE_DRAWS,
};
pub use voices::SyntheticVoice;
