pub mod analysis;
pub mod cli;
pub mod dyadic;
pub mod error;
pub mod error_lab;
pub mod functions;
pub mod gf2;
pub mod lemmas;
pub mod merit;
pub mod net;
pub mod numeric;
pub mod weights;
pub mod wkernel;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/walsh.md")]
    mod walsh {}
    #[doc = include_str!("../../../book/src/nets.md")]
    mod nets {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/identities.md")]
    mod identities {}
    #[doc = include_str!("../../../book/src/merit.md")]
    mod merit {}
    #[doc = include_str!("../../../book/src/error-bound.md")]
    mod error_bound {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
