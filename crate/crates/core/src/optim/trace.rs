use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::mesh::io::fmt_f64;

/// State after one accepted ascent iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Efficiency of the (possibly smoothed) objective being ascended.
    pub j: f64,
    /// Penalized objective `J - c1 * sum(E)`.
    pub i: f64,
    pub c1: f64,
    /// Smoothing parameter, 0 when smoothing is off.
    pub c2: f64,
    pub min_area: f64,
    pub max_normal_violation: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub records: Vec<IterationRecord>,
    /// Number of stiffness assemblies performed over the run.
    pub assemblies: usize,
    /// Largest `max |u.n| / max |u|` over boundary nodes of every Riesz
    /// representative computed.
    #[serde(default)]
    pub max_direction_normal_ratio: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,J,I,c1,c2,min_area,max_normal_violation,step";

impl OptimizerTrace {
    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                fmt_f64(r.j),
                fmt_f64(r.i),
                fmt_f64(r.c1),
                fmt_f64(r.c2),
                fmt_f64(r.min_area),
                fmt_f64(r.max_normal_violation),
                fmt_f64(r.step)
            )
            .unwrap();
        }
        s
    }
}
