//! Versioned JSON persistence of fitted density models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arf::{ArfConfig, ArfModel};
use crate::error::{Error, Result};
use crate::forde::FordeModel;

pub const FORMAT_VERSION: u32 = 1;

/// How the adversarial forest behind a model was fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub arf: ArfConfig,
    pub trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub n_train: usize,
}

impl From<&ArfModel> for FitRecord {
    fn from(m: &ArfModel) -> Self {
        FitRecord {
            arf: m.config.clone(),
            trace: m.trace.clone(),
            iterations_run: m.iterations_run,
            converged: m.converged,
            n_train: m.n_original,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Every random stream used in fitting derives from this seed.
    pub seed: u64,
    pub fit: FitRecord,
    pub model: FordeModel,
}

impl ModelFile {
    pub fn new(arf: &ArfModel, model: FordeModel) -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            seed: arf.config.seed,
            fit: arf.into(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<ModelFile> {
        Self::from_reader(text.as_bytes())
    }

    fn from_reader(reader: impl Read) -> Result<ModelFile> {
        let mut de = serde_json::Deserializer::from_reader(reader);
        // Trees can nest deeper than the default limit allows.
        de.disable_recursion_limit();
        let file = ModelFile::deserialize(&mut de)?;
        de.end()?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }
}
