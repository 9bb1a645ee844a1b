use std::collections::BTreeMap;
use std::path::PathBuf;

use gausspert_core::numerics::QuadConfig;
use gausspert_core::series::GridParams;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::Format;

pub const SCHEMA: &str = "gausspert.report/1";

/// Settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub quad: Option<QuadConfig>,
    pub grid: Option<GridParams>,
}

/// Fully resolved run settings, echoed in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub format: Format,
    pub threads: Option<usize>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub quad: QuadConfig,
    pub grid: GridParams,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    /// Where each reported constant comes from: a closed formula or a computation.
    pub provenance: BTreeMap<&'static str, String>,
    pub table: Option<Table>,
}

impl Report {
    pub fn new(result: Value) -> Self {
        Report { result, provenance: BTreeMap::new(), table: None }
    }

    pub fn source(mut self, key: &'static str, how: impl Into<String>) -> Self {
        self.provenance.insert(key, how.into());
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn envelope(&self, command: &str, parameters: Value, settings: &Settings) -> Value {
        json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "settings": settings,
            "parameters": parameters,
            "provenance": self.provenance,
            "result": self.result,
        })
    }
}

pub fn write_csv(table: &Table) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}
