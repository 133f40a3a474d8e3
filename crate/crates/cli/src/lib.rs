//! Case-file ingestion, batch runs and artifact output for impasse-surface
//! studies. The `impasse-lab` binary is a thin clap front end over
//! [`commands`].

pub mod casefile;
pub mod commands;
pub mod error;
pub mod output;
pub mod plot;

pub use casefile::{emit_case, parse_case, parse_case_str, CaseFile, Strictness};
pub use commands::{run, run_batch, Analyses, RunConfig};
pub use error::CliError;

// The guide under book/ is compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/case-files.md")]
    mod case_files {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/singularity.md")]
    mod singularity {}
    #[doc = include_str!("../../../book/src/immunity.md")]
    mod immunity {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
