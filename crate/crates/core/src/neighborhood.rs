//! Spatiotemporal neighbourhoods.
//!
//! Spatial neighbours of an element are the elements whose generalized
//! Voronoi cells (pixels nearest to a matte, by exact Euclidean distance)
//! touch its own cell. Each adjacent pair carries a weight: the length of the
//! shared cell boundary divided by the mean distance of that boundary to the
//! two mattes. Temporal neighbours are the previous `min(W_T, t - start)`
//! appearances along the element's chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ElementMatte, SwarmLayout};

/// Exact squared Euclidean distance from every pixel to the nearest pixel in
/// `sites` (a `width x height` row-major boolean image). Pixels are unit
/// spaced, so every returned value is an integer. `f64::INFINITY` when there
/// are no sites.
pub fn squared_distance_field(sites: &[bool], width: usize, height: usize) -> Vec<f64> {
    let mut cols = vec![f64::INFINITY; width * height];
    let mut buf_in = vec![0.0; width.max(height)];
    let mut buf_out = vec![0.0; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            buf_in[y] = if sites[y * width + x] { 0.0 } else { f64::INFINITY };
        }
        lower_envelope(&buf_in[..height], &mut buf_out[..height]);
        for y in 0..height {
            cols[y * width + x] = buf_out[y];
        }
    }
    let mut out = vec![f64::INFINITY; width * height];
    for y in 0..height {
        lower_envelope(&cols[y * width..(y + 1) * width], &mut out[y * width..(y + 1) * width]);
    }
    out
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas rooted at the finite samples).
fn lower_envelope(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    v.push(sites[0]);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for &q in &sites[1..] {
        let qf = q as f64;
        loop {
            let p = *v.last().unwrap();
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            let k = v.len() - 1;
            if s <= z[k] {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z[k + 1] = s;
                z.push(f64::INFINITY);
                break;
            }
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Per-pixel owner of a frame's generalized Voronoi partition.
#[derive(Clone, Debug)]
pub struct VoronoiPartition {
    pub width: usize,
    pub height: usize,
    /// Element ids in ascending order; `owner` indexes into this list.
    pub elements: Vec<u32>,
    pub owner: Vec<usize>,
    /// Squared distance of every pixel to each matte, same order as `elements`.
    pub dist2: Vec<Vec<f64>>,
}

impl VoronoiPartition {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.elements[self.owner[y * self.width + x]]
    }
}

/// Labels every pixel with the element whose matte is nearest; ties go to the
/// lower element id.
pub fn voronoi_partition(
    mattes: &[ElementMatte],
    width: usize,
    height: usize,
) -> Result<VoronoiPartition> {
    if mattes.is_empty() {
        return Err(Error::EmptyLayout);
    }
    let mut sorted: Vec<&ElementMatte> = mattes.iter().collect();
    sorted.sort_by_key(|m| m.element);
    let dist2: Vec<Vec<f64>> = sorted
        .iter()
        .map(|m| {
            let mask = m.to_mask(width, height);
            squared_distance_field(mask.bits(), width, height)
        })
        .collect();
    let mut owner = vec![0usize; width * height];
    for (p, o) in owner.iter_mut().enumerate() {
        let mut best = 0;
        for k in 1..dist2.len() {
            if dist2[k][p] < dist2[best][p] {
                best = k;
            }
        }
        *o = best;
    }
    Ok(VoronoiPartition {
        width,
        height,
        elements: sorted.iter().map(|m| m.element).collect(),
        owner,
        dist2,
    })
}

/// Boundary statistics of one pair of adjacent cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellBoundary {
    /// Number of 4-adjacent pixel pairs labelled (i, j).
    pub length: usize,
    /// Mean over the pixels of those pairs of the average distance to both mattes.
    pub distance: f64,
}

impl CellBoundary {
    pub fn weight(&self) -> f64 {
        self.length as f64 / self.distance
    }
}

/// Shared boundaries of all adjacent cell pairs, keyed by `(i, j)` with `i < j`.
pub fn cell_boundaries(partition: &VoronoiPartition) -> BTreeMap<(u32, u32), CellBoundary> {
    let (w, h) = (partition.width, partition.height);
    let mut pairs: BTreeMap<(usize, usize), (usize, Vec<usize>)> = BTreeMap::new();
    let mut visit = |p: usize, q: usize| {
        let (a, b) = (partition.owner[p], partition.owner[q]);
        if a != b {
            let entry = pairs.entry((a.min(b), a.max(b))).or_default();
            entry.0 += 1;
            entry.1.push(p);
            entry.1.push(q);
        }
    };
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                visit(p, p + 1);
            }
            if y + 1 < h {
                visit(p, p + w);
            }
        }
    }
    pairs
        .into_iter()
        .map(|((a, b), (length, mut pixels))| {
            pixels.sort_unstable();
            pixels.dedup();
            let total: f64 = pixels
                .iter()
                .map(|&p| 0.5 * (partition.dist2[a][p].sqrt() + partition.dist2[b][p].sqrt()))
                .sum();
            let key = (partition.elements[a], partition.elements[b]);
            (
                key,
                CellBoundary {
                    length,
                    distance: total / pixels.len() as f64,
                },
            )
        })
        .collect()
}

/// "Neighborness" weight of every adjacent pair, keyed `(i, j)` with `i < j`.
pub fn neighborness_weights(partition: &VoronoiPartition) -> BTreeMap<(u32, u32), f64> {
    cell_boundaries(partition)
        .into_iter()
        .map(|(k, b)| (k, b.weight()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub t: usize,
    pub i: u32,
    pub j: u32,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalWindow {
    pub t: usize,
    pub element: u32,
    /// Frames `t - 1, t - 2, ..., t - rho_t`.
    pub frames: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemRepr {
    window: usize,
    num_frames: usize,
    weights: Vec<WeightEntry>,
    temporal: Vec<TemporalWindow>,
}

/// Spatial neighbour weights and temporal windows of a whole sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SystemRepr", into = "SystemRepr")]
pub struct NeighborhoodSystem {
    window: usize,
    num_frames: usize,
    weights: Vec<WeightEntry>,
    temporal: Vec<TemporalWindow>,
    spatial_index: BTreeMap<(usize, u32), Vec<(u32, f64)>>,
    temporal_index: BTreeMap<(usize, u32), usize>,
}

impl From<SystemRepr> for NeighborhoodSystem {
    fn from(r: SystemRepr) -> Self {
        NeighborhoodSystem::from_parts(r.window, r.num_frames, r.weights, r.temporal)
    }
}

impl From<NeighborhoodSystem> for SystemRepr {
    fn from(s: NeighborhoodSystem) -> Self {
        SystemRepr {
            window: s.window,
            num_frames: s.num_frames,
            weights: s.weights,
            temporal: s.temporal,
        }
    }
}

impl NeighborhoodSystem {
    /// Assembles a system from sparse weights (`i < j`, one entry per pair) and
    /// temporal windows.
    pub fn from_parts(
        window: usize,
        num_frames: usize,
        mut weights: Vec<WeightEntry>,
        mut temporal: Vec<TemporalWindow>,
    ) -> Self {
        weights.sort_by_key(|e| (e.t, e.i, e.j));
        temporal.sort_by_key(|w| (w.t, w.element));
        let mut spatial_index: BTreeMap<(usize, u32), Vec<(u32, f64)>> = BTreeMap::new();
        for e in &weights {
            if e.w > 0.0 && e.i != e.j {
                spatial_index.entry((e.t, e.i)).or_default().push((e.j, e.w));
                spatial_index.entry((e.t, e.j)).or_default().push((e.i, e.w));
            }
        }
        for list in spatial_index.values_mut() {
            list.sort_by_key(|(j, _)| *j);
        }
        let temporal_index = temporal
            .iter()
            .enumerate()
            .map(|(k, w)| ((w.t, w.element), k))
            .collect();
        Self {
            window,
            num_frames,
            weights,
            temporal,
            spatial_index,
            temporal_index,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Spatial neighbours of `(t, i)` with their weights, by ascending id.
    pub fn spatial(&self, t: usize, element: u32) -> &[(u32, f64)] {
        self.spatial_index
            .get(&(t, element))
            .map_or(&[], |v| v.as_slice())
    }

    /// Frames of the temporal neighbours of `(t, i)`, most recent first.
    pub fn temporal(&self, t: usize, element: u32) -> &[usize] {
        self.temporal_index
            .get(&(t, element))
            .map_or(&[], |&k| self.temporal[k].frames.as_slice())
    }

    /// Weight `w_t(i, j)`; 0 for non-neighbours and for `i == j`.
    pub fn weight(&self, t: usize, i: u32, j: u32) -> f64 {
        self.spatial(t, i)
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn weights(&self) -> &[WeightEntry] {
        &self.weights
    }

    pub fn temporal_windows(&self) -> &[TemporalWindow] {
        &self.temporal
    }
}

/// Voronoi neighbours per frame and chain-following temporal windows.
pub fn build_neighborhoods(layout: &SwarmLayout, window: usize) -> Result<NeighborhoodSystem> {
    let frames: Vec<usize> = (1..=layout.num_frames()).collect();
    let per_frame = crate::par_map(&frames, |&t| -> Result<Vec<WeightEntry>> {
        let mattes = layout.frame(t);
        if mattes.is_empty() {
            return Ok(Vec::new());
        }
        let partition = voronoi_partition(mattes, layout.width, layout.height)?;
        Ok(neighborness_weights(&partition)
            .into_iter()
            .map(|((i, j), w)| WeightEntry { t, i, j, w })
            .collect())
    });
    let mut weights = Vec::new();
    for w in per_frame {
        weights.extend(w?);
    }

    let mut temporal = Vec::new();
    for chain in layout.chains() {
        for t in chain.start..=chain.end {
            let rho = window.min(t - chain.start);
            temporal.push(TemporalWindow {
                t,
                element: chain.element,
                frames: (1..=rho).map(|j| t - j).collect(),
            });
        }
    }
    Ok(NeighborhoodSystem::from_parts(
        window,
        layout.num_frames(),
        weights,
        temporal,
    ))
}
