//! Parameter files and run fingerprints.
//!
//! A parameter file is TOML with one `[[factor]]` table per factor, a nested
//! `[factor.seasonality]` table, and the measurement std devs `h`:
//!
//! ```toml
//! h = [0.001, 0.001]
//!
//! [[factor]]
//! lambda = 0.5
//! kappa = 3.0
//! sigma = 0.25
//! rho = -0.3
//! v0 = 0.08
//! pi_f = 0.5
//!
//! [factor.seasonality]
//! pattern = "sinusoidal"
//! a = 0.09
//! b = 0.06
//! t0 = 0.6
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub fn parse_params(text: &str) -> Result<ModelParams> {
    let p: ModelParams = toml::from_str(text).map_err(|e| Error::Config(format!("bad parameter file: {e}")))?;
    p.validate()?;
    Ok(p)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_params(&text)
}

pub fn params_to_toml(p: &ModelParams) -> Result<String> {
    toml::to_string(p).map_err(|e| Error::Config(format!("cannot serialise parameters: {e}")))
}

/// Hex SHA-256 of the concatenated parts (separated by a NUL byte).
pub fn config_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Header line embedded in stochastic artifacts.
pub fn provenance_line(seed: u64, hash: &str) -> String {
    format!("# seed={seed} config_sha256={hash}")
}
