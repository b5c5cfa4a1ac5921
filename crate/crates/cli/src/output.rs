//! Artifact writing with provenance headers.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::Provenance;
use crate::CliError;

pub fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// First comment line of every text artifact.
pub fn header(p: &Provenance, command: &str) -> String {
    format!(
        "cfgen {} {command} config_hash={} git={}",
        env!("CARGO_PKG_VERSION"),
        p.config_hash,
        p.git
    )
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes through a temporary file so readers never see a partial artifact.
pub fn write_file(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    let f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(f);
    fill(&mut w).map_err(io_err(&tmp))?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}
