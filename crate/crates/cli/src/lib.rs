//! File formats and the command-line surface of the `sgpca` toolkit.
//!
//! Matrices travel as plain CSV with every float written to 17 significant
//! digits, so that reading a file back yields the same bits. Every output
//! directory carries a `manifest.json` with the resolved parameters, the seed
//! and SHA-256 digests of the inputs.

pub mod app;
pub mod error;
pub mod io;
pub mod manifest;
pub mod svg;

pub use app::cli_main;
pub use error::{CliError, CliResult};
pub use io::{
    read_groups, read_groups_for, read_matrix, write_results, GroupAssignment, ResultSet, Table,
};
pub use manifest::RunManifest;
pub use svg::emit_diagnostic_svg;
