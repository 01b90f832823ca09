pub mod error;
pub mod field;
pub mod io;
pub mod combinatorics;
pub mod audit;
pub mod design;
pub mod protocol;
pub mod shamir;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/windows.md")]
    mod windows {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    mod protocols {}
    #[doc = include_str!("../../../book/src/audit.md")]
    mod audit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
