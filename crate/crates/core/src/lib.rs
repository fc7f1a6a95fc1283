pub mod error;
pub mod experiments;
pub mod fitness;
pub mod flakiness;
pub mod ml;
pub mod search;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/fitness.md")]
    mod fitness {}
    #[doc = include_str!("../../../book/src/flakiness.md")]
    mod flakiness {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
