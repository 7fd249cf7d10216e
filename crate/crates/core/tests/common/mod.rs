#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use swarmdyn::analysis::transform_distance;
use swarmdyn::types::{ElementMatte, FeatureSet, Mask, ModelParams, SwarmLayout};

/// Golden-section bracketing down to `width`, then one parabolic step
/// through the final bracket. The parabola keeps the oracle accurate even
/// where the minimum is too flat for value comparisons alone.
pub fn minimize_1d(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (f0, f1, f2) = (f(m - h), f(m), f(m + h));
    let den = f0 - 2.0 * f1 + f2;
    if den > 0.0 {
        m + 0.5 * h * (f0 - f2) / den
    } else {
        m
    }
}

/// Random rectangles on a `w x h` grid; each element is absent from a frame
/// with probability `gap`.
pub fn random_layout(rng: &mut impl Rng, frames: usize, k: usize, w: usize, h: usize, gap: f64) -> SwarmLayout {
    let mut out = Vec::new();
    for t in 1..=frames {
        let mut taken = Mask::new(w, h);
        let mut mattes = Vec::new();
        for e in 0..k as u32 {
            if frames > 1 && rng.random_bool(gap) {
                continue;
            }
            for _ in 0..50 {
                let (rw, rh) = (rng.random_range(1..=4), rng.random_range(1..=4));
                let (x0, y0) = (rng.random_range(0..=w - rw), rng.random_range(0..=h - rh));
                let mut m = Mask::new(w, h);
                for y in y0..y0 + rh {
                    for x in x0..x0 + rw {
                        m.set(x, y, true);
                    }
                }
                if taken.intersection_count(&m) == 0 {
                    taken.union_with(&m);
                    mattes.push(ElementMatte::from_mask(e, t, &m).unwrap());
                    break;
                }
            }
        }
        out.push(mattes);
    }
    SwarmLayout::from_frames(w, h, out)
}

pub fn random_features(rng: &mut impl Rng, layout: &SwarmLayout, d: usize) -> FeatureSet {
    let mut fs = FeatureSet::new(d);
    for t in 1..=layout.num_frames() {
        for m in layout.frame(t) {
            fs.insert(t, m.element, (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
        }
    }
    fs
}

pub fn random_matrix(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_params(rng: &mut impl Rng, window: usize, transitions: usize) -> ModelParams {
    let mut p = ModelParams::initial(window, transitions);
    p.sigma_s = rng.random_range(0.3..3.0);
    p.sigma_t = rng.random_range(0.3..3.0);
    for g in &mut p.gamma {
        *g = rng.random_range(0.3..3.0);
    }
    for a in &mut p.alpha {
        *a = rng.random_range(-0.8..0.8);
    }
    p
}

/// Minimum over every monotone alignment path, enumerated explicitly.
pub fn brute_force_dtw(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    fn walk(i: usize, j: usize, cost: &[Vec<f64>], acc: f64, best: &mut f64) {
        let acc = acc + cost[i][j];
        if i + 1 == cost.len() && j + 1 == cost[0].len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < cost.len() {
            walk(i + 1, j, cost, acc, best);
        }
        if j + 1 < cost[0].len() {
            walk(i, j + 1, cost, acc, best);
        }
        if i + 1 < cost.len() && j + 1 < cost[0].len() {
            walk(i + 1, j + 1, cost, acc, best);
        }
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| transform_distance(x, y).unwrap()).collect())
        .collect();
    let mut best = f64::INFINITY;
    walk(0, 0, &cost, 0.0, &mut best);
    best
}

/// Nearest matte of every pixel by scanning all matte pixels; ties go to the
/// lower element id.
pub fn brute_force_voronoi(mattes: &[ElementMatte], w: usize, h: usize) -> Vec<u32> {
    let mut sorted: Vec<&ElementMatte> = mattes.iter().collect();
    sorted.sort_by_key(|m| m.element);
    let pix: Vec<Vec<(usize, usize)>> = sorted.iter().map(|m| m.pixels().collect()).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut best = (u64::MAX, 0u32);
            for (m, ps) in sorted.iter().zip(&pix) {
                let d = ps
                    .iter()
                    .map(|&(px, py)| {
                        let dx = px as i64 - x as i64;
                        let dy = py as i64 - y as i64;
                        (dx * dx + dy * dy) as u64
                    })
                    .min()
                    .unwrap();
                if d < best.0 {
                    best = (d, m.element);
                }
            }
            out.push(best.1);
        }
    }
    out
}

pub fn iou(a: &Mask, b: &Mask) -> f64 {
    let i = a.intersection_count(b) as f64;
    let u = (a.count() + b.count()) as f64 - i;
    if u == 0.0 {
        1.0
    } else {
        i / u
    }
}

/// Worst best-match IoU of the reference mattes against `found`, per frame.
pub fn worst_matching_iou(reference: &SwarmLayout, found: &SwarmLayout) -> f64 {
    let (w, h) = (reference.width, reference.height);
    let mut worst: f64 = 1.0;
    for t in 1..=reference.num_frames() {
        for g in reference.frame(t) {
            let gm = g.to_mask(w, h);
            let best = found
                .frame(t)
                .iter()
                .map(|m| iou(&gm, &m.to_mask(w, h)))
                .fold(0.0, f64::max);
            worst = worst.min(best);
        }
    }
    worst
}
