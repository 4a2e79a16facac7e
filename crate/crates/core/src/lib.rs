pub mod adan;
pub mod beam;
pub mod dsp;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod room;
pub mod select;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stft.md")]
    mod stft {}
    #[doc = include_str!("../../../book/src/room.md")]
    mod room {}
    #[doc = include_str!("../../../book/src/beams.md")]
    mod beams {}
    #[doc = include_str!("../../../book/src/adan.md")]
    mod adan {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
