//! Writing results with the run configuration and version stamp attached.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION_STAMP: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("POLYMERLAB_GIT_HASH"), ")");

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    polymerlab: &'static str,
    seed: Option<u64>,
    config: &'a RunConfig,
    result: &'a T,
}

pub fn json_document<T: Serialize>(cfg: &RunConfig, result: &T) -> Result<String, CliError> {
    let env = Envelope {
        polymerlab: VERSION_STAMP,
        seed: cfg.seed,
        config: cfg,
        result,
    };
    serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(format!("cannot serialise output: {e}")))
}

/// `body` is a CSV table; the stamp, seed and config go on leading `#` lines.
pub fn csv_document(cfg: &RunConfig, body: &str) -> Result<String, CliError> {
    let config = serde_json::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let seed = cfg.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
    Ok(format!("# polymerlab {VERSION_STAMP}\n# seed: {seed}\n# config: {config}\n{body}"))
}

pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
