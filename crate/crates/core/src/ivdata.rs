//! Multi-cycle I-V sweep ingestion.
//!
//! Files are long-form CSV with the header `voltage,current,cycle` (SI units).
//! Rows are grouped by cycle id in order of first appearance. Conductance is
//! read from the ascending positive-voltage branch of each sweep as `G = I/V`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 3] = ["voltage", "current", "cycle"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvSample {
    pub voltage: f64,
    pub current: f64,
}

/// Raw multi-cycle sweep data for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvTrace {
    pub device_id: String,
    pub cycle_ids: Vec<u64>,
    pub cycles: Vec<Vec<IvSample>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliance_current: Option<f64>,
}

impl IvTrace {
    /// Builds a trace and checks the cycle invariants.
    pub fn new(device_id: impl Into<String>, cycle_ids: Vec<u64>, cycles: Vec<Vec<IvSample>>) -> Result<Self> {
        let trace = IvTrace {
            device_id: device_id.into(),
            cycle_ids,
            cycles,
            compliance_current: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles.is_empty() {
            return Err(Error::EmptyInput("trace has no cycles".into()));
        }
        if self.cycle_ids.len() != self.cycles.len() {
            return Err(Error::Argument(format!(
                "{} cycle ids for {} cycles",
                self.cycle_ids.len(),
                self.cycles.len()
            )));
        }
        let expected = self.cycles[0].len();
        for (id, cycle) in self.cycle_ids.iter().zip(&self.cycles) {
            if cycle.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "cycle {id} has {} samples, at least 2 are required",
                    cycle.len()
                )));
            }
            if cycle.len() != expected {
                return Err(Error::Alignment {
                    reference: self.cycle_ids[0],
                    expected,
                    cycle: *id,
                    found: cycle.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Serializes to the long-form CSV layout accepted by [`parse_iv_str`].
    ///
    /// Floats are written in shortest round-trip form, so re-parsing yields an
    /// identical trace.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("voltage,current,cycle\n");
        for (id, cycle) in self.cycle_ids.iter().zip(&self.cycles) {
            for s in cycle {
                let _ = writeln!(out, "{:?},{:?},{}", s.voltage, s.current, id);
            }
        }
        out
    }
}

pub fn parse_iv_file(path: impl AsRef<Path>) -> Result<IvTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let device_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_iv_str(&text, &device_id)
}

/// Parses CSV text in the `voltage,current,cycle` layout.
///
/// Row numbers in errors are 1-based file lines (the header is row 1).
pub fn parse_iv_str(text: &str, device_id: &str) -> Result<IvTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(Error::EmptyInput("file is empty".into())),
        Some(rec) => rec.map_err(|e| Error::Format(e.to_string()))?,
    };
    let header_fields: Vec<&str> = header.iter().collect();
    if header_fields != HEADER {
        return Err(Error::Format(format!(
            "expected header `voltage,current,cycle`, found `{}`",
            header_fields.join(",")
        )));
    }

    let mut index_of: HashMap<u64, usize> = HashMap::new();
    let mut cycle_ids = Vec::new();
    let mut cycles: Vec<Vec<IvSample>> = Vec::new();

    for rec in records {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let num = |field: usize, name: &str| -> Result<f64> {
            let cell = &rec[field];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    message: format!("non-numeric {name} `{cell}`"),
                }),
            }
        };
        let voltage = num(0, "voltage")?;
        let current = num(1, "current")?;
        let cycle: u64 = rec[2].parse().map_err(|_| Error::Parse {
            row,
            message: format!("cycle `{}` is not a non-negative integer", &rec[2]),
        })?;

        let idx = *index_of.entry(cycle).or_insert_with(|| {
            cycle_ids.push(cycle);
            cycles.push(Vec::new());
            cycles.len() - 1
        });
        cycles[idx].push(IvSample { voltage, current });
    }

    if cycles.is_empty() {
        return Err(Error::EmptyInput("no data rows after header".into()));
    }
    IvTrace::new(device_id, cycle_ids, cycles)
}

/// Conductance sequences read from the ascending positive branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductanceSet {
    /// Sample positions (within each cycle) that were retained.
    pub positive_quadrant_index: Vec<usize>,
    /// `n_cycles × n_points` conductances in siemens.
    pub per_cycle: Vec<Vec<f64>>,
    /// Smoothed cross-cycle mean; the raw mean until [`ConductanceSet::smoothed`] is applied.
    pub mean_smoothed: Vec<f64>,
}

impl ConductanceSet {
    /// Builds a set directly from conductance rows, with the raw cross-cycle
    /// mean as the curve.
    pub fn from_rows(per_cycle: Vec<Vec<f64>>) -> Result<Self> {
        let n_points = per_cycle.first().map_or(0, Vec::len);
        if per_cycle.is_empty() || n_points == 0 {
            return Err(Error::EmptyInput("no conductance samples".into()));
        }
        if per_cycle.iter().any(|r| r.len() != n_points) {
            return Err(Error::Argument("conductance rows differ in length".into()));
        }
        let mut set = ConductanceSet {
            positive_quadrant_index: (0..n_points).collect(),
            per_cycle,
            mean_smoothed: Vec::new(),
        };
        set.mean_smoothed = set.cross_cycle_mean();
        Ok(set)
    }

    pub fn n_cycles(&self) -> usize {
        self.per_cycle.len()
    }

    pub fn n_points(&self) -> usize {
        self.positive_quadrant_index.len()
    }

    pub fn cross_cycle_mean(&self) -> Vec<f64> {
        let n = self.per_cycle.len() as f64;
        (0..self.n_points())
            .map(|j| self.per_cycle.iter().map(|row| row[j]).sum::<f64>() / n)
            .collect()
    }

    /// Replaces the curve with the smoothed cross-cycle mean.
    pub fn smoothed(mut self, window: usize) -> Result<Self> {
        self.mean_smoothed = smooth_mean_curve(&self, window)?;
        Ok(self)
    }
}

/// Positions of the ascending positive branch: starting at the first sample
/// with `V > 0`, the maximal run with strictly increasing voltage.
fn ascending_branch(cycle: &[IvSample]) -> Option<(usize, usize)> {
    let start = cycle.iter().position(|s| s.voltage > 0.0)?;
    let mut end = start + 1;
    while end < cycle.len() && cycle[end].voltage > cycle[end - 1].voltage {
        end += 1;
    }
    Some((start, end))
}

pub fn extract_conductance(trace: &IvTrace) -> Result<ConductanceSet> {
    trace.validate()?;
    let mut lo = 0usize;
    let mut hi = usize::MAX;
    for (id, cycle) in trace.cycle_ids.iter().zip(&trace.cycles) {
        let (s, e) = ascending_branch(cycle)
            .ok_or_else(|| Error::Domain(format!("cycle {id} has no positive-voltage samples")))?;
        lo = lo.max(s);
        hi = hi.min(e);
    }
    if hi <= lo || hi - lo < 2 {
        return Err(Error::Domain(
            "fewer than 2 common samples on the ascending positive branch".into(),
        ));
    }

    let mut per_cycle = Vec::with_capacity(trace.n_cycles());
    for (id, cycle) in trace.cycle_ids.iter().zip(&trace.cycles) {
        let mut row = Vec::with_capacity(hi - lo);
        for (pos, s) in cycle.iter().enumerate().take(hi).skip(lo) {
            let g = s.current / s.voltage;
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Domain(format!(
                    "cycle {id} sample {pos}: conductance {g} is not positive"
                )));
            }
            row.push(g);
        }
        per_cycle.push(row);
    }
    let mut set = ConductanceSet::from_rows(per_cycle)?;
    set.positive_quadrant_index = (lo..hi).collect();
    Ok(set)
}

/// Centered moving average of the cross-cycle mean. The window is truncated
/// at the curve ends, so boundary points average fewer samples.
pub fn smooth_mean_curve(cond: &ConductanceSet, window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "smoothing window must be a positive odd integer, got {window}"
        )));
    }
    let mean = cond.cross_cycle_mean();
    if window > mean.len() {
        return Err(Error::Argument(format!(
            "smoothing window {window} exceeds curve length {}",
            mean.len()
        )));
    }
    Ok(moving_average(&mean, window))
}

pub(crate) fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
