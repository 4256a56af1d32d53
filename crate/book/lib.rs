//! Every chapter is pulled in as a doc comment so `cargo test` compiles and
//! runs its code blocks against the current library.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/maps.md")]
pub mod maps {}
#[doc = include_str!("src/partitions.md")]
pub mod partitions {}
#[doc = include_str!("src/recurrence.md")]
pub mod recurrence {}
#[doc = include_str!("src/escape.md")]
pub mod escape {}
#[doc = include_str!("src/densities.md")]
pub mod densities {}
#[doc = include_str!("src/semiflows.md")]
pub mod semiflows {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[doc = include_str!("src/reproducibility.md")]
pub mod reproducibility {}
