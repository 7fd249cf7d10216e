//! Spatial layout update: correspondence graph over candidate regions,
//! valid/invalid labeling by min-cut, and connected components.

pub mod mincut;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, BinSpec};
use crate::types::{ElementMatte, GridFrame, Link, Mask, SwarmLayout, SwarmModel};

const NO_SEGMENT: u32 = u32::MAX;

/// A low-level segment with its mean displacement to the next frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// `matte.element` is the segment id.
    pub matte: ElementMatte,
    pub dx: f64,
    pub dy: f64,
}

impl Segment {
    pub fn id(&self) -> u32 {
        self.matte.element
    }

    pub fn speed(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentInput {
    pub width: usize,
    pub height: usize,
    /// `frames[t - 1]` holds the segments of frame `t`.
    pub frames: Vec<Vec<Segment>>,
}

impl SegmentInput {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, segs) in self.frames.iter().enumerate() {
            let t = k + 1;
            let mut seen = BTreeSet::new();
            let mut cover = Mask::new(self.width, self.height);
            for s in segs {
                if s.matte.t != t {
                    return Err(Error::invalid(format!("segment {} filed under frame {t}", s.id())));
                }
                if !seen.insert(s.id()) || s.id() == NO_SEGMENT {
                    return Err(Error::invalid(format!("duplicate segment id {} in frame {t}", s.id())));
                }
                if !s.dx.is_finite() || !s.dy.is_finite() {
                    return Err(Error::invalid(format!("segment {} in frame {t}: displacement not finite", s.id())));
                }
                if !s.matte.fits(self.width, self.height) {
                    return Err(Error::invalid(format!("segment {} in frame {t} leaves the grid", s.id())));
                }
                let m = s.matte.to_mask(self.width, self.height);
                if cover.intersection_count(&m) > 0 {
                    return Err(Error::invalid(format!("segment {} in frame {t} overlaps another", s.id())));
                }
                cover.union_with(&m);
            }
        }
        Ok(())
    }

    /// Per-pixel segment id of frame `t`.
    fn label_map(&self, t: usize) -> Vec<u32> {
        let mut map = vec![NO_SEGMENT; self.width * self.height];
        for s in &self.frames[t - 1] {
            for (x, y) in s.matte.pixels() {
                map[y * self.width + x] = s.id();
            }
        }
        map
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    /// Validity threshold on node self-similarity.
    pub tau: f64,
    /// Weight of the pairwise smoothness term.
    pub lambda: f64,
    /// Minimum displacement magnitude (px/frame) of a moving segment.
    pub motion_threshold: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            lambda: 0.5,
            motion_threshold: 0.5,
        }
    }
}

/// Every moving segment as a singleton element without correspondences.
pub fn init_layout(segments: &SegmentInput, config: &LayoutConfig) -> Result<SwarmLayout> {
    segments.validate()?;
    let frames = segments
        .frames
        .iter()
        .map(|segs| {
            let mut f: Vec<ElementMatte> = segs
                .iter()
                .filter(|s| s.speed() > config.motion_threshold)
                .map(|s| s.matte.clone())
                .collect();
            f.sort_by_key(|m| m.element);
            f
        })
        .collect();
    Ok(SwarmLayout {
        width: segments.width,
        height: segments.height,
        frames,
        links: Vec::new(),
    })
}

/// A candidate region: a set of segments of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub t: usize,
    /// Sorted segment ids.
    pub segments: Vec<u32>,
    pub matte: ElementMatte,
    /// Current-layout element this region reproduces, if any.
    pub element: Option<u32>,
    pub features: Vec<f64>,
    /// Area-weighted mean displacement.
    pub shift: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceNode {
    pub t: usize,
    /// Region index in frame `t`.
    pub source: usize,
    /// Region index in frame `t + 1`.
    pub target: usize,
    pub transform: DMatrix<f64>,
    pub s1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceEdge {
    pub a: usize,
    pub b: usize,
    pub s2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceGraph {
    pub width: usize,
    pub height: usize,
    /// `regions[t - 1]` are the candidate regions of frame `t`.
    pub regions: Vec<Vec<Region>>,
    /// Mattes of the segments used by any region, per frame.
    pub segments: Vec<BTreeMap<u32, ElementMatte>>,
    pub nodes: Vec<CorrespondenceNode>,
    pub edges: Vec<CorrespondenceEdge>,
}

/// Cosine similarity of two vectors; 0 if either vanishes.
fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (
        a.iter().map(|x| x * x).sum::<f64>().sqrt(),
        b.iter().map(|x| x * x).sum::<f64>().sqrt(),
    );
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Normalized correlation `f'^T A f / (|f'| |A f|)`.
pub fn node_similarity(a: &DMatrix<f64>, f: &[f64], f_next: &[f64]) -> Option<f64> {
    let af = a * DVector::from_column_slice(f);
    cosine(af.as_slice(), f_next)
}

/// `trace(A^T B) / (|A|_F |B|_F)`.
pub fn transform_similarity(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    cosine(a.as_slice(), b.as_slice())
}

fn candidate_regions(
    t: usize,
    frame: &GridFrame,
    segments: &SegmentInput,
    labels: &[u32],
    layout: &SwarmLayout,
    spec: &BinSpec,
    config: &LayoutConfig,
) -> Result<Vec<Region>> {
    let (w, h) = (segments.width, segments.height);
    let segs: BTreeMap<u32, &Segment> = segments.frames[t - 1].iter().map(|s| (s.id(), s)).collect();
    let mut sets: BTreeMap<Vec<u32>, Option<u32>> = BTreeMap::new();
    for s in segs.values() {
        if s.speed() > config.motion_threshold {
            sets.insert(vec![s.id()], None);
        }
    }
    if t <= layout.num_frames() {
        for m in layout.frame(t) {
            // a segment belongs to an element when most of its pixels do
            let mut hits: BTreeMap<u32, usize> = BTreeMap::new();
            for (x, y) in m.pixels() {
                let id = labels[y * w + x];
                if id != NO_SEGMENT {
                    *hits.entry(id).or_default() += 1;
                }
            }
            let members: Vec<u32> = hits
                .into_iter()
                .filter(|(id, n)| 2 * n > segs[id].matte.area())
                .map(|(id, _)| id)
                .collect();
            if !members.is_empty() {
                sets.insert(members, Some(m.element));
            }
        }
    }
    let mut out = Vec::with_capacity(sets.len());
    for (members, element) in sets {
        let mut mask = Mask::new(w, h);
        let (mut sx, mut sy, mut area) = (0.0, 0.0, 0.0);
        for id in &members {
            let s = segs[id];
            mask.union_with(&s.matte.to_mask(w, h));
            let a = s.matte.area() as f64;
            sx += a * s.dx;
            sy += a * s.dy;
            area += a;
        }
        let matte = ElementMatte::from_mask(members[0], t, &mask)?;
        let features = extract_features(&matte, frame, *spec)?;
        out.push(Region {
            t,
            segments: members,
            matte,
            element,
            features,
            shift: (sx / area, sy / area),
        });
    }
    Ok(out)
}

/// Pairs of segment ids that are 4-adjacent in a label map.
fn segment_adjacency(labels: &[u32], w: usize, h: usize) -> BTreeSet<(u32, u32)> {
    let mut adj = BTreeSet::new();
    let mut add = |a: u32, b: u32| {
        if a != b && a != NO_SEGMENT && b != NO_SEGMENT {
            adj.insert((a.min(b), a.max(b)));
        }
    };
    for y in 0..h {
        for x in 0..w {
            let a = labels[y * w + x];
            if x + 1 < w {
                add(a, labels[y * w + x + 1]);
            }
            if y + 1 < h {
                add(a, labels[(y + 1) * w + x]);
            }
        }
    }
    adj
}

fn regions_touch(a: &Region, b: &Region, adj: &BTreeSet<(u32, u32)>) -> bool {
    a.segments.iter().any(|&p| {
        b.segments
            .iter()
            .any(|&q| p == q || adj.contains(&(p.min(q), p.max(q))))
    })
}

/// Builds nodes for overlapping region pairs of consecutive frames and edges
/// between nodes whose regions touch or overlap in a shared frame.
pub fn build_correspondence_graph(
    frames: &[GridFrame],
    segments: &SegmentInput,
    layout: &SwarmLayout,
    model: Option<&SwarmModel>,
    spec: &BinSpec,
    config: &LayoutConfig,
) -> Result<CorrespondenceGraph> {
    segments.validate()?;
    let n = segments.num_frames();
    if frames.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: frames.len(),
        });
    }
    let (w, h) = (segments.width, segments.height);
    let ts: Vec<usize> = (1..=n).collect();
    let labels: Vec<Vec<u32>> = crate::par_map(&ts, |&t| segments.label_map(t));
    let regions: Vec<Vec<Region>> = crate::par_map(&ts, |&t| {
        candidate_regions(t, &frames[t - 1], segments, &labels[t - 1], layout, spec, config)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let adjacency: Vec<BTreeSet<(u32, u32)>> = crate::par_map(&labels, |l| segment_adjacency(l, w, h));
    let d = spec.bins() * crate::features::STATS_PER_BIN;

    let pairs: Vec<usize> = (1..n).collect();
    let per_pair = crate::par_map(&pairs, |&t| {
        let mut nodes = Vec::new();
        let next_labels = &labels[t];
        for (si, src) in regions[t - 1].iter().enumerate() {
            let (dx, dy) = (src.shift.0.round() as isize, src.shift.1.round() as isize);
            let mut hit: BTreeSet<u32> = BTreeSet::new();
            for (x, y) in src.matte.pixels() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    let id = next_labels[ny as usize * w + nx as usize];
                    if id != NO_SEGMENT {
                        hit.insert(id);
                    }
                }
            }
            if hit.is_empty() {
                continue;
            }
            for (ti, dst) in regions[t].iter().enumerate() {
                if !dst.segments.iter().any(|s| hit.contains(s)) {
                    continue;
                }
                let learned = match (src.element, dst.element, model) {
                    (Some(a), Some(b), Some(m)) if a == b => m.transform(t, a).map(|x| x.matrix.clone()),
                    _ => None,
                };
                let a = learned.unwrap_or_else(|| DMatrix::identity(d, d));
                match node_similarity(&a, &src.features, &dst.features) {
                    Some(s1) => nodes.push(CorrespondenceNode {
                        t,
                        source: si,
                        target: ti,
                        transform: a,
                        s1,
                    }),
                    None => log::warn!("frame {t}: dropping node with a zero-norm feature vector"),
                }
            }
        }
        nodes
    });
    let nodes: Vec<CorrespondenceNode> = per_pair.into_iter().flatten().collect();

    // nodes grouped by the frame each of their regions lives in
    let mut at_frame: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, node) in nodes.iter().enumerate() {
        at_frame[node.t - 1].push((k, node.source));
        at_frame[node.t].push((k, node.target));
    }
    let mut pairs_seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (f, list) in at_frame.iter().enumerate() {
        for x in 0..list.len() {
            for y in x + 1..list.len() {
                let ((a, ra), (b, rb)) = (list[x], list[y]);
                if a == b || pairs_seen.contains(&(a.min(b), a.max(b))) {
                    continue;
                }
                if regions_touch(&regions[f][ra], &regions[f][rb], &adjacency[f]) {
                    pairs_seen.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    let edges = pairs_seen
        .into_iter()
        .filter_map(|(a, b)| {
            transform_similarity(&nodes[a].transform, &nodes[b].transform).map(|s2| CorrespondenceEdge { a, b, s2 })
        })
        .collect();
    let segment_mattes = regions
        .iter()
        .zip(&segments.frames)
        .map(|(regs, segs)| {
            let used: BTreeSet<u32> = regs.iter().flat_map(|r| r.segments.iter().copied()).collect();
            segs.iter()
                .filter(|s| used.contains(&s.id()))
                .map(|s| (s.id(), s.matte.clone()))
                .collect()
        })
        .collect();
    Ok(CorrespondenceGraph {
        width: w,
        height: h,
        regions,
        segments: segment_mattes,
        nodes,
        edges,
    })
}

/// Unary costs `(valid, invalid)` and pairwise weights of the labeling energy.
pub fn labeling_energy_terms(
    graph: &CorrespondenceGraph,
    tau: f64,
    lambda: f64,
) -> mincut::BinaryEnergy {
    let unary = graph.nodes.iter().map(|n| (1.0 - n.s1, n.s1 - tau)).collect();
    let pairwise = graph
        .edges
        .iter()
        .map(|e| (e.a, e.b, lambda * e.s2.max(0.0)))
        .collect();
    (unary, pairwise)
}

/// Valid (`true`) / invalid label per node minimizing the labeling energy.
pub fn binary_label_graph(graph: &CorrespondenceGraph, tau: f64, lambda: f64) -> Vec<bool> {
    let (unary, pairwise) = labeling_energy_terms(graph, tau, lambda);
    mincut::minimize_binary(&unary, &pairwise)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups the segments of valid nodes into element chains.
pub fn connected_components(graph: &CorrespondenceGraph, labels: &[bool]) -> Result<SwarmLayout> {
    let n = graph.regions.len();
    let (w, h) = (graph.width, graph.height);
    let mut keys: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    let key_of = |t: usize, s: u32, keys: &mut BTreeMap<(usize, u32), usize>| {
        let next = keys.len();
        *keys.entry((t, s)).or_insert(next)
    };
    let mut unions: Vec<(usize, usize)> = Vec::new();
    let mut anchor = vec![usize::MAX; graph.nodes.len()];
    for (k, node) in graph.nodes.iter().enumerate() {
        if !labels[k] {
            continue;
        }
        let src = &graph.regions[node.t - 1][node.source];
        let dst = &graph.regions[node.t][node.target];
        let first = key_of(node.t, src.segments[0], &mut keys);
        anchor[k] = first;
        for &s in &src.segments {
            let key = key_of(node.t, s, &mut keys);
            unions.push((first, key));
        }
        for &s in &dst.segments {
            let key = key_of(node.t + 1, s, &mut keys);
            unions.push((first, key));
        }
    }
    for e in &graph.edges {
        if labels[e.a] && labels[e.b] {
            unions.push((anchor[e.a], anchor[e.b]));
        }
    }
    let mut uf = UnionFind::new(keys.len());
    for (a, b) in unions {
        uf.union(a, b);
    }
    let mut comps: BTreeMap<usize, Vec<(usize, u32)>> = BTreeMap::new();
    for (&key, &idx) in &keys {
        let root = uf.find(idx);
        comps.entry(root).or_default().push(key);
    }
    // ids follow (first frame, smallest segment id)
    let mut ordered: Vec<Vec<(usize, u32)>> = comps.into_values().collect();
    for c in &mut ordered {
        c.sort();
    }
    ordered.sort_by_key(|c| {
        let first = c[0].0;
        let min_seg = c.iter().filter(|k| k.0 == first).map(|k| k.1).min();
        (first, min_seg)
    });

    let mut frames: Vec<Vec<ElementMatte>> = vec![Vec::new(); n];
    let mut links = Vec::new();
    for (id, comp) in ordered.iter().enumerate() {
        let id = id as u32;
        let mut by_frame: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for &(t, s) in comp {
            by_frame.entry(t).or_default().push(s);
        }
        for (&t, segs) in &by_frame {
            let mut mask = Mask::new(w, h);
            for s in segs {
                let m = graph.segments[t - 1]
                    .get(s)
                    .ok_or_else(|| Error::invalid(format!("segment {s} missing in frame {t}")))?;
                mask.union_with(&m.to_mask(w, h));
            }
            frames[t - 1].push(ElementMatte::from_mask(id, t, &mask)?);
            if by_frame.contains_key(&(t + 1)) {
                links.push(Link {
                    element: id,
                    from: t,
                    to: t + 1,
                });
            }
        }
    }
    for f in &mut frames {
        f.sort_by_key(|m| m.element);
    }
    links.sort();
    Ok(SwarmLayout {
        width: w,
        height: h,
        frames,
        links,
    })
}

/// One layout round: graph, labeling, components.
pub fn update_layout(
    frames: &[GridFrame],
    segments: &SegmentInput,
    current: &SwarmLayout,
    model: Option<&SwarmModel>,
    spec: &BinSpec,
    config: &LayoutConfig,
) -> Result<SwarmLayout> {
    let graph = build_correspondence_graph(frames, segments, current, model, spec, config)?;
    let labels = binary_label_graph(&graph, config.tau, config.lambda);
    log::info!(
        "layout graph: {} nodes, {} edges, {} valid",
        graph.nodes.len(),
        graph.edges.len(),
        labels.iter().filter(|v| **v).count()
    );
    connected_components(&graph, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Run;

    fn block(id: u32, t: usize, x: usize, y: usize, wd: usize, ht: usize) -> ElementMatte {
        let runs = (y..y + ht).map(|row| Run { row, start: x, len: wd }).collect();
        ElementMatte::from_runs(id, t, runs).unwrap()
    }

    #[test]
    fn static_segments_give_an_empty_layout() {
        let seg = |t| Segment {
            matte: block(0, t, 0, 0, 4, 4),
            dx: 0.0,
            dy: 0.0,
        };
        let input = SegmentInput {
            width: 10,
            height: 10,
            frames: vec![vec![seg(1)], vec![seg(2)]],
        };
        assert!(init_layout(&input, &LayoutConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn threshold_splits_background_from_movers() {
        let mut frames = Vec::new();
        for t in 1..=2 {
            let mut segs = vec![Segment {
                matte: block(0, t, 0, 0, 4, 40),
                dx: 0.0,
                dy: 0.0,
            }];
            for k in 0..8u32 {
                segs.push(Segment {
                    matte: block(k + 1, t, 6 + 4 * k as usize, 0, 3, 3),
                    dx: 1.0,
                    dy: 0.0,
                });
            }
            frames.push(segs);
        }
        let input = SegmentInput {
            width: 40,
            height: 40,
            frames,
        };
        let lay = init_layout(&input, &LayoutConfig::default()).unwrap();
        assert_eq!(lay.element_count(1), 8);
        assert!(lay.links.is_empty());
    }

    #[test]
    fn similarity_bounds() {
        let f = vec![1.0, 2.0, -0.5];
        let eye = DMatrix::identity(3, 3);
        assert!((node_similarity(&eye, &f, &f).unwrap() - 1.0).abs() < 1e-15);
        let a = DMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64 - 2.0);
        assert!((transform_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((transform_similarity(&a, &(-&a)).unwrap() + 1.0).abs() < 1e-15);
        assert!(node_similarity(&eye, &[0.0; 3], &f).is_none());
    }

    fn single_node_graph(s1: f64) -> CorrespondenceGraph {
        CorrespondenceGraph {
            width: 1,
            height: 1,
            regions: Vec::new(),
            segments: Vec::new(),
            nodes: vec![CorrespondenceNode {
                t: 1,
                source: 0,
                target: 0,
                transform: DMatrix::identity(1, 1),
                s1,
            }],
            edges: Vec::new(),
        }
    }

    #[test]
    fn single_node_labels() {
        assert_eq!(binary_label_graph(&single_node_graph(1.0), 0.5, 0.5), vec![true]);
        assert_eq!(binary_label_graph(&single_node_graph(0.0), 0.5, 0.5), vec![false]);
    }

    /// Two blocks moving right by one pixel for three frames; block A is
    /// split into two touching segments.
    fn moving_blocks() -> (Vec<GridFrame>, SegmentInput) {
        let (w, h) = (40, 20);
        let mut frames = Vec::new();
        let mut segs = Vec::new();
        for t in 1..=3 {
            let x = 2 + t;
            let mut f = GridFrame::filled(t, w, h, 0.0);
            let parts = vec![
                Segment {
                    matte: block(1, t, x, 4, 3, 6),
                    dx: 1.0,
                    dy: 0.0,
                },
                Segment {
                    matte: block(2, t, x + 3, 4, 3, 6),
                    dx: 1.0,
                    dy: 0.0,
                },
                Segment {
                    matte: block(3, t, x + 20, 8, 5, 5),
                    dx: 1.0,
                    dy: 0.0,
                },
            ];
            for (k, p) in parts.iter().enumerate() {
                for (px, py) in p.matte.pixels() {
                    f.intensity[py * w + px] = 0.3 + 0.2 * k as f64 + 0.01 * (px + py) as f64 % 0.1;
                }
            }
            frames.push(f);
            segs.push(parts);
        }
        (frames, SegmentInput { width: w, height: h, frames: segs })
    }

    #[test]
    fn graph_and_components_recover_two_chains() {
        let (frames, input) = moving_blocks();
        let spec = BinSpec::new(4).unwrap();
        let cfg = LayoutConfig::default();
        let lay0 = init_layout(&input, &cfg).unwrap();
        let graph = build_correspondence_graph(&frames, &input, &lay0, None, &spec, &cfg).unwrap();
        for n in &graph.nodes {
            assert!((-1.0..=1.0).contains(&n.s1));
        }
        for e in &graph.edges {
            assert!(e.a != e.b && (-1.0..=1.0).contains(&e.s2));
        }
        let labels = binary_label_graph(&graph, cfg.tau, cfg.lambda);
        let (u, p) = labeling_energy_terms(&graph, cfg.tau, cfg.lambda);
        let e = mincut::energy(&u, &p, &labels);
        assert!(e <= mincut::energy(&u, &p, &vec![true; labels.len()]) + 1e-12);
        assert!(e <= mincut::energy(&u, &p, &vec![false; labels.len()]) + 1e-12);
        let lay = connected_components(&graph, &labels).unwrap();
        let chains = lay.chains();
        assert_eq!(chains.len(), 2);
        assert!(chains.iter().all(|c| c.start == 1 && c.end == 3));
        assert_eq!(lay.matte(1, 0).unwrap().area(), 36);
        assert_eq!(lay.matte(1, 1).unwrap().area(), 25);

        // a second round on the recovered layout keeps the chains
        let again = update_layout(&frames, &input, &lay, None, &spec, &cfg).unwrap();
        assert_eq!(again.chains().len(), 2);
    }

    #[test]
    fn all_invalid_gives_empty_layout() {
        let (frames, input) = moving_blocks();
        let spec = BinSpec::new(4).unwrap();
        let cfg = LayoutConfig::default();
        let lay0 = init_layout(&input, &cfg).unwrap();
        let graph = build_correspondence_graph(&frames, &input, &lay0, None, &spec, &cfg).unwrap();
        let lay = connected_components(&graph, &vec![false; graph.nodes.len()]).unwrap();
        assert!(lay.is_empty());
    }

    #[test]
    fn shared_target_merges_sources() {
        let (frames, input) = moving_blocks();
        let spec = BinSpec::new(4).unwrap();
        let cfg = LayoutConfig::default();
        let lay0 = init_layout(&input, &cfg).unwrap();
        let mut graph = build_correspondence_graph(&frames, &input, &lay0, None, &spec, &cfg).unwrap();
        graph.edges.clear();
        // point two sources of frame pair 1 at the same target region
        let picks: Vec<usize> = (0..graph.nodes.len()).filter(|&k| graph.nodes[k].t == 1).collect();
        let a = picks[0];
        let b = *picks.iter().find(|&&k| graph.nodes[k].source != graph.nodes[a].source).unwrap();
        graph.nodes[b].target = graph.nodes[a].target;
        let labels: Vec<bool> = (0..graph.nodes.len()).map(|k| k == a || k == b).collect();
        let lay = connected_components(&graph, &labels).unwrap();
        assert_eq!(lay.element_count(1), 1);
        assert_eq!(lay.element_count(2), 1);
    }

    #[test]
    fn labeling_is_deterministic() {
        let (frames, input) = moving_blocks();
        let spec = BinSpec::new(4).unwrap();
        let cfg = LayoutConfig::default();
        let lay0 = init_layout(&input, &cfg).unwrap();
        let a = update_layout(&frames, &input, &lay0, None, &spec, &cfg).unwrap();
        let b = update_layout(&frames, &input, &lay0, None, &spec, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
