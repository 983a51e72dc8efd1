//! The guide in `book/` as doctests. Each chapter is its own module so a
//! failing snippet points at the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/saliency.md")]
pub mod saliency {}
#[doc = include_str!("../../../book/src/subtitles.md")]
pub mod subtitles {}
#[doc = include_str!("../../../book/src/trajectories.md")]
pub mod trajectories {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/synth.md")]
pub mod synth {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/reproduction.md")]
pub mod reproduction {}
