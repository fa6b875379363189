//! On-disk optimizer state: a JSON document for the scalars, config and
//! trace, plus one native field file per morphing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::io::{read_field, write_field};
use crate::mesh::NodalField;

use super::config::OptimizerConfig;
use super::trace::OptimizerTrace;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: OptimizerConfig,
    pub iteration: usize,
    pub c1: f64,
    pub c2: Option<f64>,
    pub next_event_c1: bool,
    pub trace: OptimizerTrace,
    pub initial_j: f64,
    pub displacements: Vec<NodalField>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    version: u32,
    config: OptimizerConfig,
    iteration: usize,
    c1: f64,
    c2: Option<f64>,
    next_event_c1: bool,
    trace: OptimizerTrace,
    initial_j: f64,
    morphings: usize,
}

fn field_name(i: usize) -> String {
    format!("morphing_{i:04}.field")
}

impl Checkpoint {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (i, d) in self.displacements.iter().enumerate() {
            write_field(dir.join(field_name(i)), &format!("morphing_{i}"), d)?;
        }
        let meta = Meta {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            iteration: self.iteration,
            c1: self.c1,
            c2: self.c2,
            next_event_c1: self.next_event_c1,
            trace: self.trace.clone(),
            initial_j: self.initial_j,
            morphings: self.displacements.len(),
        };
        fs::write(
            dir.join(CHECKPOINT_FILE),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join(CHECKPOINT_FILE))?)?;
        if meta.version != CHECKPOINT_VERSION {
            return Err(Error::Version(format!(
                "checkpoint version {}",
                meta.version
            )));
        }
        let displacements = (0..meta.morphings)
            .map(|i| read_field(dir.join(field_name(i))).map(|(_, f)| f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: meta.config,
            iteration: meta.iteration,
            c1: meta.c1,
            c2: meta.c2,
            next_event_c1: meta.next_event_c1,
            trace: meta.trace,
            initial_j: meta.initial_j,
            displacements,
        })
    }
}
