//! Versioned JSON model files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::wnw::WnwModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Tsqrf(Forest),
    Wnw(WnwModel),
}

impl SavedModel {
    pub fn p(&self) -> usize {
        match self {
            SavedModel::Tsqrf(f) => f.p(),
            SavedModel::Wnw(m) => m.p(),
        }
    }

    pub fn predict(&self, queries: &[Vec<f64>], taus: &[f64]) -> Vec<Result<Vec<f64>>> {
        match self {
            SavedModel::Tsqrf(f) => crate::estimator::predict_quantiles(f, queries, taus),
            SavedModel::Wnw(m) => m.predict(queries, taus),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format_version: u32,
    model: M,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn write_model<W: Write>(model: &SavedModel, out: W) -> Result<()> {
    serde_json::to_writer(
        out,
        &Envelope {
            format_version: MODEL_FORMAT_VERSION,
            model,
        },
    )?;
    Ok(())
}

pub fn read_model(bytes: &[u8]) -> Result<SavedModel> {
    let probe: VersionProbe = serde_json::from_slice(bytes)?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let env: Envelope<SavedModel> = serde_json::from_slice(bytes)?;
    Ok(env.model)
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    std::io::Read::read_to_end(&mut BufReader::new(file), &mut bytes)
        .map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
