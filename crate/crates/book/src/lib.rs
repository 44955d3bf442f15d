//! Compiles the guide's code listings as doctests. One module per chapter
//! so a failing listing points at its chapter.

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/distributions.md")]
pub mod distributions {}
#[doc = include_str!("../../../book/src/channel.md")]
pub mod channel {}
#[doc = include_str!("../../../book/src/profiles.md")]
pub mod profiles {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
