//! Domain values shared by every stage of the pipeline.
//!
//! Frame indices are 1-based throughout (`t = 1..=F`); a transform owned by
//! `(t, i)` maps the features of element `i` in frame `t` onto frame `t + 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One luminance frame, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFrame {
    pub t: usize,
    pub width: usize,
    pub height: usize,
    pub intensity: Vec<f64>,
}

impl GridFrame {
    pub fn new(t: usize, width: usize, height: usize, intensity: Vec<f64>) -> Result<Self> {
        if width * height == 0 {
            return Err(Error::invalid("frame has zero area"));
        }
        if intensity.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                got: intensity.len(),
            });
        }
        if let Some(v) = intensity.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            t,
            width,
            height,
            intensity,
        })
    }

    pub fn filled(t: usize, width: usize, height: usize, value: f64) -> Self {
        Self {
            t,
            width,
            height,
            intensity: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.intensity[y * self.width + x]
    }
}

/// A horizontal run of mask pixels: columns `start..start + len` of `row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Run {
    pub row: usize,
    pub start: usize,
    pub len: usize,
}

impl Run {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Dense binary mask over a `width x height` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Rasterizes runs onto a grid; runs that leave the grid are clipped.
    pub fn from_runs(width: usize, height: usize, runs: &[Run]) -> Self {
        let mut mask = Self::new(width, height);
        for r in runs {
            if r.row >= height {
                continue;
            }
            for x in r.start..r.end().min(width) {
                mask.bits[r.row * width + x] = true;
            }
        }
        mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`Mask::get`] but treats out-of-grid coordinates as unset.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Run-length encoding, sorted by row then column.
    pub fn to_runs(&self) -> Vec<Run> {
        let mut runs = Vec::new();
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let mut x = 0;
            while x < self.width {
                if row[x] {
                    let start = x;
                    while x < self.width && row[x] {
                        x += 1;
                    }
                    runs.push(Run {
                        row: y,
                        start,
                        len: x - start,
                    });
                } else {
                    x += 1;
                }
            }
        }
        runs
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    /// Shifts every pixel by `(dx, dy)`, dropping pixels that leave the grid.
    pub fn shifted(&self, dx: isize, dy: isize) -> Mask {
        let mut out = Mask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height
                    {
                        out.set(nx as usize, ny as usize, true);
                    }
                }
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct MatteRepr {
    element: u32,
    t: usize,
    runs: Vec<Run>,
}

/// Binary matte of one element in one frame, stored run-length encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatteRepr", into = "MatteRepr")]
pub struct ElementMatte {
    pub element: u32,
    pub t: usize,
    runs: Vec<Run>,
    centroid: (f64, f64),
    area: usize,
}

impl TryFrom<MatteRepr> for ElementMatte {
    type Error = Error;

    fn try_from(r: MatteRepr) -> Result<Self> {
        ElementMatte::from_runs(r.element, r.t, r.runs)
    }
}

impl From<ElementMatte> for MatteRepr {
    fn from(m: ElementMatte) -> Self {
        MatteRepr {
            element: m.element,
            t: m.t,
            runs: m.runs,
        }
    }
}

impl ElementMatte {
    /// Builds a matte from sorted, non-overlapping, non-empty runs.
    pub fn from_runs(element: u32, t: usize, runs: Vec<Run>) -> Result<Self> {
        if runs.is_empty() || runs.iter().all(|r| r.len == 0) {
            return Err(Error::EmptyMatte { t, element });
        }
        for pair in runs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if (a.row, a.start) >= (b.row, b.start) || (a.row == b.row && a.end() > b.start) {
                return Err(Error::invalid(format!(
                    "runs of element {element} in frame {t} are unsorted or overlapping"
                )));
            }
        }
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for r in &runs {
            let len = r.len as f64;
            // sum of pixel-centre x over the run
            sx += len * (r.start as f64 + (len - 1.0) / 2.0 + 0.5);
            sy += len * (r.row as f64 + 0.5);
            n += r.len;
        }
        Ok(Self {
            element,
            t,
            runs,
            centroid: (sx / n as f64, sy / n as f64),
            area: n,
        })
    }

    pub fn from_mask(element: u32, t: usize, mask: &Mask) -> Result<Self> {
        Self::from_runs(element, t, mask.to_runs())
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Mean of the pixel-centre coordinates `(x + 0.5, y + 0.5)`.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn to_mask(&self, width: usize, height: usize) -> Mask {
        Mask::from_runs(width, height, &self.runs)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.start..r.end()).map(move |x| (x, r.row)))
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.runs.iter().all(|r| r.row < height && r.end() <= width)
    }
}

/// Correspondence of element `element` between frames `from` and `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub element: u32,
    pub from: usize,
    pub to: usize,
}

/// Frames `start..=end` in which one element persists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub element: u32,
    pub start: usize,
    pub end: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-frame element mattes plus frame-to-frame correspondences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmLayout {
    pub width: usize,
    pub height: usize,
    /// `frames[t - 1]` holds the mattes of frame `t`, sorted by element id.
    pub frames: Vec<Vec<ElementMatte>>,
    pub links: Vec<Link>,
}

impl SwarmLayout {
    /// Builds a layout and links every element id present in two consecutive
    /// frames.
    pub fn from_frames(width: usize, height: usize, mut frames: Vec<Vec<ElementMatte>>) -> Self {
        for f in &mut frames {
            f.sort_by_key(|m| m.element);
        }
        let mut links = Vec::new();
        for t in 1..frames.len() {
            let next: BTreeSet<u32> = frames[t].iter().map(|m| m.element).collect();
            for m in &frames[t - 1] {
                if next.contains(&m.element) {
                    links.push(Link {
                        element: m.element,
                        from: t,
                        to: t + 1,
                    });
                }
            }
        }
        links.sort();
        Self {
            width,
            height,
            frames,
            links,
        }
    }

    /// A layout with frames but no elements.
    pub fn empty(width: usize, height: usize, num_frames: usize) -> Self {
        Self {
            width,
            height,
            frames: vec![Vec::new(); num_frames],
            links: Vec::new(),
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Mattes of frame `t` (1-based).
    pub fn frame(&self, t: usize) -> &[ElementMatte] {
        &self.frames[t - 1]
    }

    pub fn matte(&self, t: usize, element: u32) -> Option<&ElementMatte> {
        self.frames
            .get(t.checked_sub(1)?)?
            .iter()
            .find(|m| m.element == element)
    }

    pub fn element_count(&self, t: usize) -> usize {
        self.frames[t - 1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(|f| f.is_empty())
    }

    /// Transform owners `(t, element)`, one per link, sorted.
    pub fn transform_slots(&self) -> Vec<(usize, u32)> {
        let mut slots: Vec<(usize, u32)> = self
            .links
            .iter()
            .filter(|l| l.to == l.from + 1)
            .map(|l| (l.from, l.element))
            .collect();
        slots.sort();
        slots.dedup();
        slots
    }

    pub fn has_link(&self, t: usize, element: u32) -> bool {
        self.links
            .iter()
            .any(|l| l.element == element && l.from == t && l.to == t + 1)
    }

    /// Chains of linked appearances, sorted by element id then start frame.
    pub fn chains(&self) -> Vec<Chain> {
        let mut out = Vec::new();
        let mut ids: BTreeSet<u32> = BTreeSet::new();
        for f in &self.frames {
            ids.extend(f.iter().map(|m| m.element));
        }
        for id in ids {
            let mut t = 1;
            while t <= self.num_frames() {
                if self.matte(t, id).is_some() {
                    let start = t;
                    while self.has_link(t, id) {
                        t += 1;
                    }
                    out.push(Chain {
                        element: id,
                        start,
                        end: t,
                    });
                }
                t += 1;
            }
        }
        out
    }

    /// Keeps frames `1..=last` only.
    pub fn truncated(&self, last: usize) -> SwarmLayout {
        let frames = self.frames[..last.min(self.frames.len())].to_vec();
        let links = self.links.iter().filter(|l| l.to <= last).copied().collect();
        SwarmLayout {
            width: self.width,
            height: self.height,
            frames,
            links,
        }
    }
}

/// Feature vectors keyed by `(t, element)`; every vector has length `dim`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureSetRepr", into = "FeatureSetRepr")]
pub struct FeatureSet {
    dim: usize,
    entries: BTreeMap<(usize, u32), Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FeatureEntry {
    t: usize,
    element: u32,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSetRepr {
    dim: usize,
    features: Vec<FeatureEntry>,
}

impl TryFrom<FeatureSetRepr> for FeatureSet {
    type Error = Error;

    fn try_from(r: FeatureSetRepr) -> Result<Self> {
        let mut set = FeatureSet::new(r.dim);
        for e in r.features {
            set.insert(e.t, e.element, e.values)?;
        }
        Ok(set)
    }
}

impl From<FeatureSet> for FeatureSetRepr {
    fn from(s: FeatureSet) -> Self {
        FeatureSetRepr {
            dim: s.dim,
            features: s
                .entries
                .into_iter()
                .map(|((t, element), values)| FeatureEntry { t, element, values })
                .collect(),
        }
    }
}

impl FeatureSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, t: usize, element: u32, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature for element {element} in frame {t}"
            )));
        }
        self.entries.insert((t, element), values);
        Ok(())
    }

    pub fn get(&self, t: usize, element: u32) -> Option<&[f64]> {
        self.entries.get(&(t, element)).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, u32), &[f64])> {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> FeatureSet {
        FeatureSet {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (*k, v.iter().map(|x| x * c).collect()))
                .collect(),
        }
    }
}

/// Feasible set a transform is projected onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintTag {
    #[default]
    Unconstrained,
    Symmetric,
    Orthogonal,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintTag::Unconstrained => "unconstrained",
            ConstraintTag::Symmetric => "symmetric",
            ConstraintTag::Orthogonal => "orthogonal",
        })
    }
}

impl ConstraintTag {
    /// Checks the tag invariant: exact symmetry, or orthonormal columns to 1e-10.
    pub fn holds(&self, x: &DMatrix<f64>) -> bool {
        match self {
            ConstraintTag::Unconstrained => true,
            ConstraintTag::Symmetric => {
                x.is_square()
                    && (0..x.nrows()).all(|u| (0..u).all(|v| x[(u, v)] == x[(v, u)]))
            }
            ConstraintTag::Orthogonal => {
                let d = x.nrows();
                let gram = x.transpose() * x;
                x.is_square() && (gram - DMatrix::identity(d, d)).amax() <= 1e-10
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    t: usize,
    element: u32,
    tag: ConstraintTag,
    dim: usize,
    /// row-major
    data: Vec<f64>,
}

/// The `d x d` matrix mapping `f_t` of one element onto `f_{t+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct Transform {
    pub t: usize,
    pub element: u32,
    pub tag: ConstraintTag,
    pub matrix: DMatrix<f64>,
}

impl TryFrom<TransformRepr> for Transform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        if r.data.len() != r.dim * r.dim {
            return Err(Error::Dimension {
                expected: r.dim * r.dim,
                got: r.data.len(),
            });
        }
        Ok(Transform {
            t: r.t,
            element: r.element,
            tag: r.tag,
            matrix: DMatrix::from_row_slice(r.dim, r.dim, &r.data),
        })
    }
}

impl From<Transform> for TransformRepr {
    fn from(x: Transform) -> Self {
        let d = x.matrix.nrows();
        let mut data = Vec::with_capacity(d * d);
        for u in 0..d {
            for v in 0..d {
                data.push(x.matrix[(u, v)]);
            }
        }
        TransformRepr {
            t: x.t,
            element: x.element,
            tag: x.tag,
            dim: d,
            data,
        }
    }
}

/// Noise scales, AR coefficients and the temporal window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: Vec<f64>,
    pub sigma_s: f64,
    pub sigma_t: f64,
    /// `gamma[t - 1]` is the reconstruction noise scale of frame `t`.
    pub gamma: Vec<f64>,
    pub weight_floor: f64,
    pub window: usize,
}

impl ModelParams {
    /// Unit noise scales and zero AR coefficients.
    pub fn initial(window: usize, transitions: usize) -> Self {
        Self {
            alpha: vec![0.0; window],
            sigma_s: 1.0,
            sigma_t: 1.0,
            gamma: vec![1.0; transitions],
            weight_floor: 1e-6,
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonPositiveVariance(format!("{name} = {v}")))
            }
        };
        positive("sigma_s", self.sigma_s)?;
        positive("sigma_t", self.sigma_t)?;
        for (t, g) in self.gamma.iter().enumerate() {
            positive(&format!("gamma[{}]", t + 1), *g)?;
        }
        if self.weight_floor <= 0.0 {
            return Err(Error::invalid("weight floor must be positive"));
        }
        if self.alpha.len() != self.window {
            return Err(Error::Dimension {
                expected: self.window,
                got: self.alpha.len(),
            });
        }
        Ok(())
    }
}

/// One ICM iteration as recorded in the model diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Outer (layout) iteration.
    pub outer: usize,
    pub iteration: usize,
    pub objective: f64,
    pub delta: f64,
    pub sigma_s: f64,
    pub sigma_t: f64,
    /// Fraction of the Jacobi sweep that was applied (1 = full sweep).
    pub step: f64,
}

/// Learned layout and dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmModel {
    pub layout: SwarmLayout,
    pub constraint: ConstraintTag,
    pub transforms: Vec<Transform>,
    pub params: ModelParams,
    pub diagnostics: Vec<IterationRecord>,
    pub converged: bool,
}

impl SwarmModel {
    pub fn transform(&self, t: usize, element: u32) -> Option<&Transform> {
        self.transforms
            .iter()
            .find(|x| x.t == t && x.element == element)
    }

    pub fn dim(&self) -> usize {
        self.transforms.first().map_or(0, |x| x.matrix.nrows())
    }

    /// Transforms of one element ordered by frame.
    pub fn chain_transforms(&self, element: u32) -> Vec<&DMatrix<f64>> {
        let mut xs: Vec<&Transform> = self
            .transforms
            .iter()
            .filter(|x| x.element == element)
            .collect();
        xs.sort_by_key(|x| x.t);
        xs.into_iter().map(|x| &x.matrix).collect()
    }

    /// Element ids that own at least one transform, sorted.
    pub fn elements(&self) -> Vec<u32> {
        let ids: BTreeSet<u32> = self.transforms.iter().map(|x| x.element).collect();
        ids.into_iter().collect()
    }
}

/// A single invariant violation found by [`validate_sequence`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonContiguousFrames,
    FrameSize,
    IntensityRange,
    EmptyMatte,
    RunOutOfBounds,
    RunOrder,
    DuplicateElement,
    OverlappingMattes,
    NonConsecutiveLink,
    DanglingLink,
    BrokenChain,
    FrameCount,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::NonContiguousFrames => "non-contiguous frame indices",
            ViolationKind::FrameSize => "frame size mismatch",
            ViolationKind::IntensityRange => "intensity out of range",
            ViolationKind::EmptyMatte => "empty matte",
            ViolationKind::RunOutOfBounds => "run out of bounds",
            ViolationKind::RunOrder => "runs unsorted or overlapping",
            ViolationKind::DuplicateElement => "duplicate element id",
            ViolationKind::OverlappingMattes => "overlapping mattes",
            ViolationKind::NonConsecutiveLink => "non-consecutive link",
            ViolationKind::DanglingLink => "link endpoint missing",
            ViolationKind::BrokenChain => "broken correspondence chain",
            ViolationKind::FrameCount => "frame count mismatch",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

/// Checks frames and layout against every structural invariant. Violations are
/// reported, never raised.
pub fn validate_sequence(frames: &[GridFrame], layout: &SwarmLayout) -> ValidationReport {
    use ViolationKind::*;
    let mut report = ValidationReport::default();
    let (w, h) = (layout.width, layout.height);

    for (k, f) in frames.iter().enumerate() {
        if f.t != k + 1 {
            report.push(
                NonContiguousFrames,
                format!("frame at position {} has index {}", k + 1, f.t),
            );
        }
        if f.width != w || f.height != h || f.intensity.len() != w * h {
            report.push(
                FrameSize,
                format!("frame {} is {}x{}, layout is {w}x{h}", f.t, f.width, f.height),
            );
        }
        if f.intensity.iter().any(|v| !(0.0..=1.0).contains(v)) {
            report.push(IntensityRange, format!("frame {}", f.t));
        }
    }
    if !frames.is_empty() && frames.len() != layout.num_frames() {
        report.push(
            FrameCount,
            format!("{} frames, layout has {}", frames.len(), layout.num_frames()),
        );
    }

    for (k, mattes) in layout.frames.iter().enumerate() {
        let t = k + 1;
        let mut seen = BTreeSet::new();
        let mut occupied = vec![false; w * h];
        for m in mattes {
            if m.t != t {
                report.push(
                    NonContiguousFrames,
                    format!("matte of element {} stored under frame {t} claims frame {}", m.element, m.t),
                );
            }
            if !seen.insert(m.element) {
                report.push(DuplicateElement, format!("element {} in frame {t}", m.element));
            }
            if m.area() == 0 {
                report.push(EmptyMatte, format!("element {} in frame {t}", m.element));
            }
            for pair in m.runs().windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if (a.row, a.start) >= (b.row, b.start) || (a.row == b.row && a.end() > b.start) {
                    report.push(RunOrder, format!("element {} in frame {t}", m.element));
                }
            }
            let mut overlap = false;
            for r in m.runs() {
                if r.row >= h || r.end() > w {
                    report.push(
                        RunOutOfBounds,
                        format!(
                            "element {} in frame {t}: run row {} cols {}..{}",
                            m.element,
                            r.row,
                            r.start,
                            r.end()
                        ),
                    );
                    continue;
                }
                for x in r.start..r.end() {
                    let cell = &mut occupied[r.row * w + x];
                    overlap |= *cell;
                    *cell = true;
                }
            }
            if overlap {
                report.push(
                    OverlappingMattes,
                    format!("element {} in frame {t} overlaps another matte", m.element),
                );
            }
        }
    }

    for l in &layout.links {
        if l.to != l.from + 1 {
            report.push(
                NonConsecutiveLink,
                format!("element {}: frame {} -> {}", l.element, l.from, l.to),
            );
            continue;
        }
        if layout.matte(l.from, l.element).is_none() || layout.matte(l.to, l.element).is_none() {
            report.push(
                DanglingLink,
                format!("element {}: frame {} -> {}", l.element, l.from, l.to),
            );
        }
    }

    // An absent frame ends a chain; an id may not reappear afterwards, and an
    // id present in consecutive frames must be linked.
    let mut ids = BTreeSet::new();
    for f in &layout.frames {
        ids.extend(f.iter().map(|m| m.element));
    }
    for id in ids {
        let present: Vec<usize> = (1..=layout.num_frames())
            .filter(|t| layout.matte(*t, id).is_some())
            .collect();
        for pair in present.windows(2) {
            if pair[1] != pair[0] + 1 {
                report.push(
                    BrokenChain,
                    format!("element {id} reappears in frame {} after frame {}", pair[1], pair[0]),
                );
            } else if !layout.has_link(pair[0], id) {
                report.push(
                    BrokenChain,
                    format!("element {id} unlinked between frames {} and {}", pair[0], pair[1]),
                );
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(element: u32, t: usize, x0: usize, y0: usize, side: usize) -> ElementMatte {
        let runs = (y0..y0 + side)
            .map(|row| Run {
                row,
                start: x0,
                len: side,
            })
            .collect();
        ElementMatte::from_runs(element, t, runs).unwrap()
    }

    fn three_frame_layout() -> (Vec<GridFrame>, SwarmLayout) {
        let frames = (1..=3).map(|t| GridFrame::filled(t, 20, 10, 0.5)).collect();
        let mattes = (1..=3)
            .map(|t| vec![square(0, t, 1, 1, 3), square(1, t, 10, 2, 4)])
            .collect();
        (frames, SwarmLayout::from_frames(20, 10, mattes))
    }

    #[test]
    fn well_formed_sequence_is_ok() {
        let (frames, layout) = three_frame_layout();
        let report = validate_sequence(&frames, &layout);
        assert!(report.is_ok(), "{report}");
        assert_eq!(layout.links.len(), 4);
        assert_eq!(layout.transform_slots(), vec![(1, 0), (1, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn run_past_grid_width_is_reported() {
        let (frames, mut layout) = three_frame_layout();
        layout.frames[1][1] = ElementMatte::from_runs(
            1,
            2,
            vec![Run {
                row: 3,
                start: 15,
                len: 9,
            }],
        )
        .unwrap();
        let report = validate_sequence(&frames, &layout);
        assert!(report.has(ViolationKind::RunOutOfBounds));
        assert!(report.to_string().contains("run out of bounds"));
    }

    #[test]
    fn link_skipping_a_frame_is_reported() {
        let (frames, mut layout) = three_frame_layout();
        layout.links.push(Link {
            element: 0,
            from: 2,
            to: 4,
        });
        let report = validate_sequence(&frames, &layout);
        assert!(report.has(ViolationKind::NonConsecutiveLink));
        assert!(report.to_string().contains("non-consecutive link"));
    }

    #[test]
    fn reappearing_element_breaks_its_chain() {
        let (frames, mut layout) = three_frame_layout();
        layout.frames[1].retain(|m| m.element != 1);
        layout.links.retain(|l| l.element != 1);
        let report = validate_sequence(&frames, &layout);
        assert!(report.has(ViolationKind::BrokenChain));
    }

    #[test]
    fn non_contiguous_frame_index_is_reported() {
        let (mut frames, layout) = three_frame_layout();
        frames[2].t = 5;
        assert!(validate_sequence(&frames, &layout).has(ViolationKind::NonContiguousFrames));
    }

    #[test]
    fn overlapping_mattes_are_reported() {
        let (frames, mut layout) = three_frame_layout();
        layout.frames[0][1] = square(1, 1, 2, 2, 3);
        assert!(validate_sequence(&frames, &layout).has(ViolationKind::OverlappingMattes));
    }

    #[test]
    fn empty_runs_are_rejected() {
        assert!(matches!(
            ElementMatte::from_runs(3, 1, vec![]),
            Err(Error::EmptyMatte { t: 1, element: 3 })
        ));
    }

    #[test]
    fn centroid_is_mean_of_pixel_centres() {
        let m = square(0, 1, 2, 4, 3);
        let (cx, cy) = m.centroid();
        assert!((cx - 3.5).abs() < 1e-12 && (cy - 5.5).abs() < 1e-12);
        assert_eq!(m.area(), 9);
    }

    #[test]
    fn rle_roundtrip_on_every_3x3_mask() {
        for code in 0u32..512 {
            let bits: Vec<bool> = (0..9).map(|k| code >> k & 1 == 1).collect();
            let mask = Mask::from_bits(3, 3, bits).unwrap();
            let runs = mask.to_runs();
            assert_eq!(Mask::from_runs(3, 3, &runs), mask, "mask {code:09b}");
            if code != 0 {
                let matte = ElementMatte::from_runs(0, 1, runs).unwrap();
                assert_eq!(matte.area(), mask.count());
            }
        }
    }

    #[test]
    fn chains_follow_links() {
        let (_, layout) = three_frame_layout();
        let chains = layout.chains();
        assert_eq!(chains.len(), 2);
        assert_eq!((chains[0].start, chains[0].end), (1, 3));
    }

    #[test]
    fn constraint_invariants() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 2.0]);
        assert!(ConstraintTag::Symmetric.holds(&s));
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
        assert!(ConstraintTag::Orthogonal.holds(&r));
        assert!(!ConstraintTag::Orthogonal.holds(&s));
    }
}
