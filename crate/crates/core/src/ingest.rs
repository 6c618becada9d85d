//! County panel data: static attributes plus a long-format activity table.
//!
//! Attributes: `id,x_km,y_km,area_km2,education_years,density`. The three
//! layout columns are either filled on every row or empty on every row.
//! Activity: `id,year,activity`. Missing `(id, year)` cells are gaps.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64, schema};
use crate::spatial::SpatialLayout;
use crate::stats::{partial_correlation, pearson};

const ATTRIBUTE_HEADER: [&str; 6] = ["id", "x_km", "y_km", "area_km2", "education_years", "density"];
const ACTIVITY_HEADER: [&str; 3] = ["id", "year", "activity"];

#[derive(Debug, Clone, PartialEq)]
pub struct CountyPanel {
    pub ids: Vec<String>,
    pub years: Vec<i64>,
    /// `activity[i][k]`: enterprises per capita of county `i` in `years[k]`.
    pub activity: Vec<Vec<Option<f64>>>,
    pub education: Vec<f64>,
    pub density: Vec<f64>,
    pub layout: Option<SpatialLayout>,
}

impl CountyPanel {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Activity of every county in year column `k`.
    pub fn year_column(&self, k: usize) -> Vec<Option<f64>> {
        self.activity.iter().map(|row| row[k]).collect()
    }
}

pub fn load_panel(attributes: &Path, activity: &Path) -> Result<CountyPanel> {
    let attr = File::open(attributes).map_err(|e| Error::io(attributes, e))?;
    let act = File::open(activity).map_err(|e| Error::io(activity, e))?;
    read_panel(
        attr,
        &attributes.display().to_string(),
        act,
        &activity.display().to_string(),
    )
}

pub fn read_panel(attributes: impl Read, attr_name: &str, activity: impl Read, act_name: &str) -> Result<CountyPanel> {
    let mut reader = csv::ReaderBuilder::new().from_reader(attributes);
    check_header(&mut reader, &ATTRIBUTE_HEADER, attr_name)?;

    let mut ids = Vec::new();
    let mut index = HashMap::new();
    let (mut positions, mut areas) = (Vec::new(), Vec::new());
    let (mut education, mut density) = (Vec::new(), Vec::new());
    let mut with_layout: Option<bool> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(schema(attr_name, line, "id", "empty id"));
        }
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(schema(attr_name, line, "id", format!("duplicate id `{id}`")));
        }
        let has_layout = !(record[1].trim().is_empty() && record[2].trim().is_empty() && record[3].trim().is_empty());
        match with_layout {
            None => with_layout = Some(has_layout),
            Some(expected) if expected != has_layout => {
                return Err(schema(
                    attr_name,
                    line,
                    "x_km",
                    "layout columns must be filled on all rows or on none",
                ))
            }
            _ => {}
        }
        if has_layout {
            positions.push((
                parse_f64(&record[1], attr_name, line, "x_km")?,
                parse_f64(&record[2], attr_name, line, "y_km")?,
            ));
            let area = parse_f64(&record[3], attr_name, line, "area_km2")?;
            if area <= 0.0 {
                return Err(schema(attr_name, line, "area_km2", "area must be positive"));
            }
            areas.push(area);
        }
        education.push(parse_f64(&record[4], attr_name, line, "education_years")?);
        density.push(parse_f64(&record[5], attr_name, line, "density")?);
        ids.push(id);
    }

    let mut reader = csv::ReaderBuilder::new().from_reader(activity);
    check_header(&mut reader, &ACTIVITY_HEADER, act_name)?;
    let mut cells = Vec::new();
    let mut seen = BTreeSet::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        let id = record[0].trim();
        let &unit = index
            .get(id)
            .ok_or_else(|| schema(act_name, line, "id", format!("id `{id}` is not in the attributes file")))?;
        let year: i64 = record[1]
            .trim()
            .parse()
            .map_err(|_| schema(act_name, line, "year", format!("`{}` is not an integer year", &record[1])))?;
        let value = parse_f64(&record[2], act_name, line, "activity")?;
        if value < 0.0 {
            return Err(schema(
                act_name,
                line,
                "activity",
                format!("negative activity {value} for id `{id}`, year {year}"),
            ));
        }
        if !seen.insert((unit, year)) {
            return Err(schema(act_name, line, "year", format!("duplicate entry for id `{id}`, year {year}")));
        }
        cells.push((unit, year, value));
    }

    let years: Vec<i64> = cells.iter().map(|c| c.1).collect::<BTreeSet<_>>().into_iter().collect();
    let column: HashMap<i64, usize> = years.iter().enumerate().map(|(k, &y)| (y, k)).collect();
    let mut activity = vec![vec![None; years.len()]; ids.len()];
    for (unit, year, value) in cells {
        activity[unit][column[&year]] = Some(value);
    }
    let layout = match with_layout {
        Some(true) => Some(SpatialLayout::new(ids.clone(), positions, areas)?),
        _ => None,
    };
    Ok(CountyPanel {
        ids,
        years,
        activity,
        education,
        density,
        layout,
    })
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str], file: &str) -> Result<()> {
    let headers = reader.headers()?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(schema(
            file,
            1,
            "header",
            format!("expected `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

pub fn save_panel(panel: &CountyPanel, attributes: &Path, activity: &Path) -> Result<()> {
    let attr = File::create(attributes).map_err(|e| Error::io(attributes, e))?;
    let act = File::create(activity).map_err(|e| Error::io(activity, e))?;
    write_panel(panel, attr, act)
}

pub fn write_panel(panel: &CountyPanel, attributes: impl Write, activity: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(attributes);
    w.write_record(ATTRIBUTE_HEADER)?;
    for i in 0..panel.n() {
        let (x, y, area) = match &panel.layout {
            Some(l) => (
                fmt_f64(l.positions()[i].0),
                fmt_f64(l.positions()[i].1),
                fmt_f64(l.areas()[i]),
            ),
            None => Default::default(),
        };
        w.write_record([
            panel.ids[i].clone(),
            x,
            y,
            area,
            fmt_f64(panel.education[i]),
            fmt_f64(panel.density[i]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<attributes csv>", e))?;

    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(activity);
    w.write_record(ACTIVITY_HEADER)?;
    for (id, row) in panel.ids.iter().zip(&panel.activity) {
        for (year, cell) in panel.years.iter().zip(row) {
            if let Some(v) = cell {
                w.write_record([id.clone(), year.to_string(), fmt_f64(*v)])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<activity csv>", e))?;
    Ok(())
}

/// Builds a panel by sampling a trajectory every `every` time units,
/// labelling the samples `start_year`, `start_year + 1`, ...
pub fn panel_from_trajectory(
    trajectory: &Trajectory,
    every: f64,
    start_year: i64,
    ids: Vec<String>,
    education: Vec<f64>,
    density: Vec<f64>,
    layout: Option<SpatialLayout>,
) -> Result<CountyPanel> {
    let n = trajectory.n();
    if ids.len() != n || education.len() != n || density.len() != n {
        return Err(Error::Dimension {
            what: "panel attributes vs trajectory units",
            expected: n,
            actual: ids.len().min(education.len()).min(density.len()),
        });
    }
    if !(every > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling interval {every} must be positive")));
    }
    let t_end = trajectory.last().t;
    let count = (t_end / every + 1e-9).floor() as usize + 1;
    let snapshots: Vec<_> = (0..count).map(|k| trajectory.nearest(k as f64 * every)).collect();
    let activity = (0..n)
        .map(|i| snapshots.iter().map(|s| Some(s.w[i])).collect())
        .collect();
    Ok(CountyPanel {
        ids,
        years: (0..count as i64).map(|k| start_year + k).collect(),
        activity,
        education,
        density,
        layout,
    })
}

/// Correlations for one year over counties with a recorded activity value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearCorrelation {
    pub year: i64,
    /// Counties with a recorded value in this year.
    pub n: usize,
    pub r_activity_education: f64,
    pub r_activity_density: f64,
    /// Activity vs education with density partialled out.
    pub partial_activity_education: f64,
    /// Activity vs density with education partialled out.
    pub partial_activity_density: f64,
}

pub fn yearly_correlation_report(panel: &CountyPanel) -> Result<Vec<YearCorrelation>> {
    (0..panel.years.len()).map(|k| year_correlation(panel, k)).collect()
}

/// Correlations for year column `k` over its pairwise-complete rows.
pub fn year_correlation(panel: &CountyPanel, k: usize) -> Result<YearCorrelation> {
    let year = panel.years[k];
    let (mut act, mut edu, mut dens) = (Vec::new(), Vec::new(), Vec::new());
    for (i, cell) in panel.year_column(k).into_iter().enumerate() {
        if let Some(v) = cell {
            act.push(v);
            edu.push(panel.education[i]);
            dens.push(panel.density[i]);
        }
    }
    let ctx = |e: Error| Error::Degenerate(format!("year {year}: {e}"));
    Ok(YearCorrelation {
        year,
        n: act.len(),
        r_activity_education: pearson(&act, &edu).map_err(ctx)?,
        r_activity_density: pearson(&act, &dens).map_err(ctx)?,
        partial_activity_education: partial_correlation(&act, &edu, &dens).map_err(ctx)?,
        partial_activity_density: partial_correlation(&act, &dens, &edu).map_err(ctx)?,
    })
}
