//! Shared plumbing: error classes, config loading, provenance and outputs.

use std::path::{Path, PathBuf};

use geoerr_core::io::{self, Provenance};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Tool version embedded in every artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Numerical or domain failure (exit code 1).
    #[error("{0}")]
    Domain(geoerr_core::Error),
    /// File-system failure (exit code 2).
    #[error("{0}")]
    Io(geoerr_core::Error),
    /// Invalid or incomplete configuration (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) | CliError::Config(_) => 2,
        }
    }
}

impl From<geoerr_core::Error> for CliError {
    fn from(e: geoerr_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e)
        } else {
            CliError::Domain(e)
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a JSON config file, or the type's defaults when no path is given.
/// A malformed config file is a configuration error.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => io::read_json(p, "config").map_err(|e| match e {
            geoerr_core::Error::Format { .. } => CliError::Config(e.to_string()),
            other => other.into(),
        }),
    }
}

/// Reads a JSON input document named in the config.
pub fn read_input<T: DeserializeOwned>(path: &Path, what: &'static str) -> CliResult<T> {
    Ok(io::read_json(path, what)?)
}

/// Requires an input path to be present in the effective config.
pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("missing {what}: set it in the config file or on the command line")))
}

/// SHA-256 of the effective config's JSON form, lowercase hex.
pub fn config_hash<T: Serialize>(config: &T) -> CliResult<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Config(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Output directory, provenance and the writers that stamp it.
pub struct Outputs {
    pub dir: PathBuf,
    pub provenance: Provenance,
}

impl Outputs {
    pub fn new<T: Serialize>(dir: &Path, config: &T, seed: u64) -> CliResult<Self> {
        Ok(Outputs {
            dir: dir.to_path_buf(),
            provenance: Provenance {
                tool_version: TOOL_VERSION.to_string(),
                config_hash: config_hash(config)?,
                seed: Some(seed),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `value` as JSON with a `provenance` member appended.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut doc = serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut doc {
            let prov = serde_json::to_value(&self.provenance).map_err(|e| CliError::Config(e.to_string()))?;
            map.insert("provenance".into(), prov);
        }
        let path = self.path(name);
        io::write_json(&path, &doc)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Writes CSV text preceded by `#` provenance comment lines.
    pub fn csv(&self, name: &str, header: &str, body: &str) -> CliResult<PathBuf> {
        let p = &self.provenance;
        let mut text = format!(
            "# tool_version={}\n# config_hash={}\n# seed={}\n{header}\n",
            p.tool_version,
            p.config_hash,
            p.seed.map_or_else(String::new, |s| s.to_string())
        );
        text.push_str(body);
        let path = self.path(name);
        io::write_bytes(&path, text.as_bytes())?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}
