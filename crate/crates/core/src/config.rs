//! The run configuration file: one JSON document with `econ`, `ga` and
//! `risk` sections, each optional.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::econ::EconomicConfig;
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::risk::RiskParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub econ: EconomicConfig,
    pub ga: GaConfig,
    pub risk: RiskParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::json(path, e))?;
        writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.econ.validate()?;
        self.ga.validate()?;
        self.risk.validate()
    }
}
