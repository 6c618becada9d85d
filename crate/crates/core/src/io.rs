//! File formats: the system JSON document and the CSV tables.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! every value reads back bit-for-bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{InitialCondition, StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::spatial::{MoranPoint, SpatialLayout};
use crate::stats::{Dispersion, GrowthRateSeries, LogHistogram};
use crate::system::{CouplingMatrix, EnvironmentTerm, GrowthSystem, TimeTable};

/// `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum EnvDoc {
    #[default]
    Zero,
    Constant {
        c: f64,
    },
    MeanProportional {
        beta: f64,
    },
    TimeTable {
        t: Vec<f64>,
        b: Vec<f64>,
    },
}

impl EnvDoc {
    pub fn to_env(&self) -> Result<EnvironmentTerm> {
        Ok(match self {
            EnvDoc::Zero => EnvironmentTerm::Zero,
            EnvDoc::Constant { c } => EnvironmentTerm::Constant(*c),
            EnvDoc::MeanProportional { beta } => EnvironmentTerm::MeanProportional(*beta),
            EnvDoc::TimeTable { t, b } => EnvironmentTerm::TimeTable(TimeTable::new(t.clone(), b.clone())?),
        })
    }

    pub fn from_env(env: &EnvironmentTerm) -> Self {
        match env {
            EnvironmentTerm::Zero => EnvDoc::Zero,
            EnvironmentTerm::Constant(c) => EnvDoc::Constant { c: *c },
            EnvironmentTerm::MeanProportional(beta) => EnvDoc::MeanProportional { beta: *beta },
            EnvironmentTerm::TimeTable(table) => EnvDoc::TimeTable {
                t: table.times().to_vec(),
                b: table.values().to_vec(),
            },
        }
    }
}

/// The system definition document.
///
/// ```json
/// {"n": 2, "a": [0.1, -0.1], "coupling": [[0, 0.2], [0.2, 0]],
///  "env": {"kind": "zero"}, "w0": {"random_uniform": {"lo": 0.5, "hi": 1.5, "seed": 7}}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub n: usize,
    pub a: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    #[serde(default)]
    pub env: EnvDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<InitialCondition>,
    /// Accept a coupling graph that is not strongly connected.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_reducible: bool,
}

impl SystemDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_system(system: &GrowthSystem, w0: Option<InitialCondition>) -> Self {
        SystemDocument {
            n: system.n(),
            a: system.rates().to_vec(),
            coupling: system.coupling().rows(),
            env: EnvDoc::from_env(system.env()),
            w0,
            allow_reducible: !system.is_irreducible(),
        }
    }

    pub fn system(&self) -> Result<GrowthSystem> {
        if self.a.len() != self.n {
            return Err(Error::Dimension {
                what: "`a` vs `n`",
                expected: self.n,
                actual: self.a.len(),
            });
        }
        let coupling = CouplingMatrix::from_rows(&self.coupling)?;
        let env = self.env.to_env()?;
        if self.allow_reducible {
            GrowthSystem::allow_reducible(self.a.clone(), coupling, env)
        } else {
            GrowthSystem::new(self.a.clone(), coupling, env)
        }
    }

    /// Initial state; defaults to uniform draws on `[0.5, 1.5]` with seed 0.
    pub fn initial(&self) -> InitialCondition {
        self.w0
            .clone()
            .unwrap_or_else(|| InitialCondition::random_uniform(0.5, 1.5, 0))
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// `t,w_1,...,w_n`, one row per sample.
pub fn write_trajectory_csv(trajectory: &Trajectory, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(std::iter::once("t".to_string()).chain(numbered("w", trajectory.n())))?;
    for s in trajectory.samples() {
        w.write_record(std::iter::once(s.t).chain(s.w.iter().copied()).map(fmt_f64))?;
    }
    w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
    Ok(())
}

/// Reads `t,w_1,...`; the sampling step is taken from the first two rows.
pub fn read_trajectory_csv(input: impl Read, file: &str) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(schema(file, 1, "t", "header must start with `t` followed by w_1..w_n"));
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| parse_f64(field, file, line, headers.get(c).unwrap_or("?")))
            .collect::<Result<Vec<_>>>()?;
        samples.push(StateVector::new(values[0], values[1..].to_vec()));
    }
    let step = match samples.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 1.0,
    };
    Trajectory::new(samples, step)
}

/// `id,x_km,y_km,area_km2`.
pub fn write_layout_csv(layout: &SpatialLayout, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "x_km", "y_km", "area_km2"])?;
    for ((id, &(x, y)), &area) in layout.ids().iter().zip(layout.positions()).zip(layout.areas()) {
        w.write_record([id.clone(), fmt_f64(x), fmt_f64(y), fmt_f64(area)])?;
    }
    w.flush().map_err(|e| Error::io("<layout csv>", e))?;
    Ok(())
}

pub fn read_layout_csv(input: impl Read, file: &str) -> Result<SpatialLayout> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers()?.clone();
    let expected = ["id", "x_km", "y_km", "area_km2"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema(file, 1, "header", "expected `id,x_km,y_km,area_km2`"));
    }
    let (mut ids, mut positions, mut areas) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        ids.push(record[0].to_string());
        positions.push((
            parse_f64(&record[1], file, line, "x_km")?,
            parse_f64(&record[2], file, line, "y_km")?,
        ));
        areas.push(parse_f64(&record[3], file, line, "area_km2")?);
    }
    SpatialLayout::new(ids, positions, areas)
}

/// `band_lo_km,band_hi_km,pairs,I`; `I` is empty for a gap.
pub fn write_moran_csv(curve: &[MoranPoint], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["band_lo_km", "band_hi_km", "pairs", "I"])?;
    for p in curve {
        w.write_record([fmt_f64(p.lo_km), fmt_f64(p.hi_km), p.pairs.to_string(), fmt_opt(p.index)])?;
    }
    w.flush().map_err(|e| Error::io("<moran csv>", e))?;
    Ok(())
}

/// `id,crossing_time`; empty time for units that never cross.
pub fn write_crossing_csv(ids: &[String], crossing: &[Option<f64>], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "crossing_time"])?;
    for (id, c) in ids.iter().zip(crossing) {
        w.write_record([id.clone(), fmt_opt(*c)])?;
    }
    w.flush().map_err(|e| Error::io("<crossing csv>", e))?;
    Ok(())
}

/// `bin_lo,bin_hi,count`.
pub fn write_histogram_csv(hist: &LogHistogram, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (lo, hi, count) in hist.bins() {
        w.write_record([fmt_f64(lo), fmt_f64(hi), count.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<histogram csv>", e))?;
    Ok(())
}

/// `t,g_1,...,g_n` with `t` the window start.
pub fn write_growth_rates_csv(rates: &GrowthRateSeries, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    let n = rates.rates.first().map_or(0, Vec::len);
    w.write_record(std::iter::once("t".to_string()).chain(numbered("g", n)))?;
    for (t, row) in rates.times.iter().zip(&rates.rates) {
        w.write_record(std::iter::once(*t).chain(row.iter().copied()).map(fmt_f64))?;
    }
    w.flush().map_err(|e| Error::io("<growth rate csv>", e))?;
    Ok(())
}

/// `t,log_std,spread`.
pub fn write_dispersion_csv(series: &[Dispersion], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "log_std", "spread"])?;
    for d in series {
        w.write_record([fmt_f64(d.t), fmt_f64(d.log_std), fmt_f64(d.spread)])?;
    }
    w.flush().map_err(|e| Error::io("<dispersion csv>", e))?;
    Ok(())
}

pub(crate) fn schema(file: &str, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

pub(crate) fn parse_f64(field: &str, file: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| schema(file, line, column, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(schema(file, line, column, format!("`{field}` is not finite")));
    }
    Ok(v)
}
