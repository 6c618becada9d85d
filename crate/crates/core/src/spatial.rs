//! Unit positions, distance bands, Moran's index and threshold-crossing maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::system::CouplingMatrix;

/// Default band width in km.
pub const DEFAULT_BAND_WIDTH_KM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLayout {
    ids: Vec<String>,
    positions: Vec<(f64, f64)>,
    areas: Vec<f64>,
}

impl SpatialLayout {
    pub fn new(ids: Vec<String>, positions: Vec<(f64, f64)>, areas: Vec<f64>) -> Result<Self> {
        if positions.len() != ids.len() || areas.len() != ids.len() {
            return Err(Error::InvalidArgument(format!(
                "layout columns differ in length: {} ids, {} positions, {} areas",
                ids.len(),
                positions.len(),
                areas.len()
            )));
        }
        if let Some(i) = areas.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("area of unit {} must be positive", ids[i])));
        }
        if let Some(i) = positions.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument(format!("position of unit {} is not finite", ids[i])));
        }
        Ok(SpatialLayout { ids, positions, areas })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.positions[i];
        let (xj, yj) = self.positions[j];
        (xi - xj).hypot(yi - yj)
    }
}

/// Band index of a pair distance: band `k` covers `(k w, (k + 1) w]`.
/// Coincident units (`d = 0`) go to band 0.
pub fn band_of(distance: f64, width: f64) -> usize {
    if distance <= 0.0 {
        0
    } else {
        ((distance / width).ceil() as usize).saturating_sub(1)
    }
}

/// Partition of all unordered pairs by distance band.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBands {
    width: f64,
    bands: Vec<Vec<(usize, usize)>>,
}

impl DistanceBands {
    pub fn new(layout: &SpatialLayout, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidArgument(format!("band width {width} must be positive")));
        }
        let mut bands: Vec<Vec<(usize, usize)>> = Vec::new();
        for i in 0..layout.len() {
            for j in i + 1..layout.len() {
                let k = band_of(layout.distance(i, j), width);
                if bands.len() <= k {
                    bands.resize_with(k + 1, Vec::new);
                }
                bands[k].push((i, j));
            }
        }
        Ok(DistanceBands { width, bands })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Number of bands up to and including the farthest occupied one.
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Unordered pairs `(i, j)`, `i < j`, in band `k`.
    pub fn pairs(&self, k: usize) -> &[(usize, usize)] {
        self.bands.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (k as f64 * self.width, (k + 1) as f64 * self.width)
    }

    pub fn total_pairs(&self) -> usize {
        self.bands.iter().map(Vec::len).sum()
    }
}

/// Pair weights `w_ij`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoranWeights {
    /// `w_ij = area_i`.
    #[default]
    Area,
    /// `w_ij = (area_i + area_j) / 2`.
    SymmetrizedArea,
}

impl MoranWeights {
    fn weight(self, areas: &[f64], i: usize, j: usize) -> f64 {
        match self {
            MoranWeights::Area => areas[i],
            MoranWeights::SymmetrizedArea => 0.5 * (areas[i] + areas[j]),
        }
    }
}

/// Moran's index restricted to the pairs of one distance band.
///
/// ```text
/// I = N Σ w_ij (y_i - ȳ)(y_j - ȳ) / ((Σ w_ij) Σ_i (y_i - ȳ)²)
/// ```
///
/// The pair sums run over ordered pairs `(i, j)` and `(j, i)` of the band
/// and `N` counts those ordered pairs. `ȳ` and the variance term use all
/// units.
pub fn moran_index(
    values: &[f64],
    layout: &SpatialLayout,
    bands: &DistanceBands,
    band: usize,
    weights: MoranWeights,
) -> Result<f64> {
    if values.len() != layout.len() {
        return Err(Error::Dimension {
            what: "values vs layout",
            expected: layout.len(),
            actual: values.len(),
        });
    }
    let pairs = bands.pairs(band);
    if pairs.is_empty() {
        return Err(Error::EmptyBand(band));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let dev: Vec<f64> = values.iter().map(|y| y - mean).collect();
    let variance_sum: f64 = dev.iter().map(|d| d * d).sum();
    let scale = values.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if variance_sum <= n * (f64::EPSILON * scale).powi(2) {
        return Err(Error::ZeroVariance("all values in the layout are equal"));
    }

    let areas = layout.areas();
    let mut cross = 0.0;
    let mut weight_sum = 0.0;
    for &(i, j) in pairs {
        let wij = weights.weight(areas, i, j);
        let wji = weights.weight(areas, j, i);
        cross += wij * dev[i] * dev[j] + wji * dev[j] * dev[i];
        weight_sum += wij + wji;
    }
    let ordered_pairs = 2.0 * pairs.len() as f64;
    Ok(ordered_pairs * cross / (weight_sum * variance_sum))
}

/// One point of a Moran correlogram. `index` is `None` for a gap, with `gap` saying why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranPoint {
    pub band: usize,
    pub lo_km: f64,
    pub hi_km: f64,
    /// Unordered pairs in the band.
    pub pairs: usize,
    pub index: Option<f64>,
    pub gap: Option<String>,
}

impl MoranPoint {
    pub fn midpoint_km(&self) -> f64 {
        0.5 * (self.lo_km + self.hi_km)
    }
}

/// Moran's index for every band from 0 to the farthest occupied one.
pub fn moran_curve(
    values: &[f64],
    layout: &SpatialLayout,
    bands: &DistanceBands,
    weights: MoranWeights,
) -> Result<Vec<MoranPoint>> {
    if values.len() != layout.len() {
        return Err(Error::Dimension {
            what: "values vs layout",
            expected: layout.len(),
            actual: values.len(),
        });
    }
    Ok((0..bands.len())
        .map(|k| {
            let (lo_km, hi_km) = bands.bounds(k);
            let (index, gap) = match moran_index(values, layout, bands, k, weights) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MoranPoint {
                band: k,
                lo_km,
                hi_km,
                pairs: bands.pairs(k).len(),
                index,
                gap,
            }
        })
        .collect())
}

/// Summary of Moran's index under random relabelling of the values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationNull {
    pub mean: f64,
    pub std: f64,
    /// Empirical 2.5% and 97.5% quantiles.
    pub lo: f64,
    pub hi: f64,
    pub shuffles: usize,
}

pub fn permutation_null(
    values: &[f64],
    layout: &SpatialLayout,
    bands: &DistanceBands,
    band: usize,
    weights: MoranWeights,
    shuffles: usize,
    seed: u64,
) -> Result<PermutationNull> {
    if shuffles < 2 {
        return Err(Error::InvalidArgument("need at least two shuffles".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = values.to_vec();
    let mut samples = Vec::with_capacity(shuffles);
    for _ in 0..shuffles {
        shuffled.shuffle(&mut rng);
        samples.push(moran_index(&shuffled, layout, bands, band, weights)?);
    }
    let m = samples.iter().sum::<f64>() / shuffles as f64;
    let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (shuffles - 1) as f64;
    samples.sort_by(f64::total_cmp);
    let q = |p: f64| samples[((p * (shuffles - 1) as f64).round() as usize).min(shuffles - 1)];
    Ok(PermutationNull {
        mean: m,
        std: var.sqrt(),
        lo: q(0.025),
        hi: q(0.975),
        shuffles,
    })
}

/// First sample time at which each unit reaches `threshold`; `None` if it never does.
pub fn threshold_crossing_map(trajectory: &Trajectory, threshold: f64) -> Result<Vec<Option<f64>>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must be positive")));
    }
    let mut crossing = vec![None; trajectory.n()];
    for s in trajectory.samples() {
        for (c, &w) in crossing.iter_mut().zip(&s.w) {
            if c.is_none() && w >= threshold {
                *c = Some(s.t);
            }
        }
    }
    Ok(crossing)
}

/// A rectangular grid of units with 4-neighbour transfers.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
    pub layout: SpatialLayout,
    pub coupling: CouplingMatrix,
}

impl Lattice {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn cell(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    /// Graph (Manhattan) distance in lattice steps.
    pub fn steps(&self, i: usize, j: usize) -> usize {
        let (ri, ci) = self.cell(i);
        let (rj, cj) = self.cell(j);
        ri.abs_diff(rj) + ci.abs_diff(cj)
    }

    pub fn steps_to_nearest(&self, i: usize, centers: &[usize]) -> Option<usize> {
        centers.iter().map(|&c| self.steps(i, c)).min()
    }
}

/// `rows × cols` grid, `spacing_km` apart, unit areas, `neighbor_coupling`
/// in both directions on every lattice edge.
pub fn build_lattice(rows: usize, cols: usize, spacing_km: f64, neighbor_coupling: f64) -> Result<Lattice> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("lattice needs at least one row and column".into()));
    }
    if !(neighbor_coupling >= 0.0) || !(spacing_km > 0.0) {
        return Err(Error::InvalidArgument(
            "lattice needs spacing > 0 and coupling >= 0".into(),
        ));
    }
    let n = rows * cols;
    let mut entries = Vec::new();
    let mut ids = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            ids.push(format!("r{r}c{c}"));
            positions.push((c as f64 * spacing_km, r as f64 * spacing_km));
            if neighbor_coupling > 0.0 {
                if c + 1 < cols {
                    entries.push((i, i + 1, neighbor_coupling));
                    entries.push((i + 1, i, neighbor_coupling));
                }
                if r + 1 < rows {
                    entries.push((i, i + cols, neighbor_coupling));
                    entries.push((i + cols, i, neighbor_coupling));
                }
            }
        }
    }
    Ok(Lattice {
        rows,
        cols,
        layout: SpatialLayout::new(ids, positions, vec![1.0; n])?,
        coupling: CouplingMatrix::from_entries(n, entries)?,
    })
}
