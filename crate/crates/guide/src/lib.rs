//! The book under `book/src`, compiled so that `cargo test` runs every
//! listing. One module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/limit.md")]
pub mod limit {}
#[doc = include_str!("../../../book/src/functionals.md")]
pub mod functionals {}
#[doc = include_str!("../../../book/src/localization.md")]
pub mod localization {}
#[doc = include_str!("../../../book/src/flow.md")]
pub mod flow {}
#[doc = include_str!("../../../book/src/minmax.md")]
pub mod minmax {}
#[doc = include_str!("../../../book/src/verify.md")]
pub mod verify {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
