//! Library side of the `nfkp` command-line tool: config parsing, report
//! records and the four commands.

pub mod commands;
pub mod config;
pub mod report;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
