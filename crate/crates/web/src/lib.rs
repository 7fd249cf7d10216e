//! In-browser demo: render the synthetic swarm, inspect one element's
//! descriptor, and learn + cluster the dynamics at a small feature size.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use swarmdyn::analysis::{classical_mds, pairwise_dtw_matrix, residual_metrics, spectral_cluster};
use swarmdyn::dynamics::{icm_learn, IcmConfig};
use swarmdyn::features::{extract_features, extract_all, BinSpec};
use swarmdyn::neighborhood::build_neighborhoods;
use swarmdyn::synth::{generate_sequence, Shape, SynthConfig, SyntheticSequence};
use swarmdyn::Error;

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub elements: Vec<u32>,
    pub shapes: Vec<&'static str>,
    pub clusters: Vec<usize>,
    pub mds: Vec<[f64; 2]>,
    pub zeta_r: Vec<f64>,
    pub zeta_s: Vec<f64>,
    pub zeta_t: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[wasm_bindgen]
pub struct Demo {
    seq: SyntheticSequence,
}

#[wasm_bindgen]
impl Demo {
    /// Eight-element sequence; `opposite` makes the squares turn clockwise.
    #[wasm_bindgen(constructor)]
    pub fn new(opposite: bool, seed: u32) -> Result<Demo, JsError> {
        let mut cfg = SynthConfig::standard(opposite);
        cfg.seed = seed as u64;
        Ok(Demo {
            seq: generate_sequence(&cfg).map_err(js_err)?,
        })
    }

    pub fn width(&self) -> usize {
        self.seq.layout.width
    }

    pub fn height(&self) -> usize {
        self.seq.layout.height
    }

    pub fn frames(&self) -> usize {
        self.seq.frames.len()
    }

    /// RGBA pixels of frame `t`; with `outline` each matte boundary is tinted.
    pub fn frame_rgba(&self, t: usize, outline: bool) -> Vec<u8> {
        self.rgba(t, outline)
    }

    /// Feature vector of `element` in frame `t`, or empty if it is absent.
    pub fn descriptor(&self, t: usize, element: u32, bins: usize) -> Result<Vec<f64>, JsError> {
        let spec = BinSpec::new(bins).map_err(js_err)?;
        match (self.seq.layout.matte(t, element), self.seq.frames.get(t.wrapping_sub(1))) {
            (Some(m), Some(f)) => extract_features(m, f, spec).map_err(js_err),
            _ => Ok(Vec::new()),
        }
    }

    /// Element under pixel `(x, y)` of frame `t`, or -1.
    pub fn element_at(&self, t: usize, x: usize, y: usize) -> i32 {
        if t == 0 || t > self.seq.layout.num_frames() {
            return -1;
        }
        for m in self.seq.layout.frame(t) {
            if m.pixels().any(|p| p == (x, y)) {
                return m.element as i32;
            }
        }
        -1
    }

    /// Learns the dynamics and clusters the elements; returns JSON.
    pub fn analyze(&self, bins: usize, k_max: usize) -> Result<String, JsError> {
        let a = self.analysis(bins, k_max).map_err(js_err)?;
        serde_json::to_string(&a).map_err(|e| JsError::new(&e.to_string()))
    }
}

impl Demo {
    pub fn rgba(&self, t: usize, outline: bool) -> Vec<u8> {
        let (w, h) = (self.width(), self.height());
        let mut out = vec![0u8; w * h * 4];
        let Some(frame) = self.seq.frames.get(t.wrapping_sub(1)) else {
            return out;
        };
        for (p, v) in frame.intensity.iter().enumerate() {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            out[4 * p..4 * p + 4].copy_from_slice(&[g, g, g, 255]);
        }
        if outline {
            for m in self.seq.layout.frame(t) {
                let mask = m.to_mask(w, h);
                let c = PALETTE[m.element as usize % PALETTE.len()];
                for (x, y) in m.pixels() {
                    let (xi, yi) = (x as isize, y as isize);
                    let edge = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| !mask.get_signed(xi + dx, yi + dy));
                    if edge {
                        let p = 4 * (y * w + x);
                        out[p..p + 3].copy_from_slice(&c);
                    }
                }
            }
        }
        out
    }

    pub fn analysis(&self, bins: usize, k_max: usize) -> swarmdyn::Result<Analysis> {
        let features = extract_all(&self.seq.layout, &self.seq.frames, BinSpec::new(bins)?)?;
        let cfg = IcmConfig {
            k_max: k_max.max(1),
            ..IcmConfig::default()
        };
        let nbrs = build_neighborhoods(&self.seq.layout, cfg.window)?;
        let model = icm_learn(&features, &self.seq.layout, &nbrs, &cfg)?;
        let dm = pairwise_dtw_matrix(&model)?;
        let clusters = spectral_cluster(&dm, 2)?;
        let coords = classical_mds(&dm, 2)?;
        let res = residual_metrics(&model, &features)?;
        let elements = model.elements();
        let shapes = elements
            .iter()
            .map(|&e| match self.seq.ground_truth.shape(e) {
                Some(Shape::Leaf) => "leaf",
                Some(Shape::TexturedSquare) => "square",
                None => "",
            })
            .collect();
        Ok(Analysis {
            shapes,
            clusters,
            mds: (0..coords.nrows())
                .map(|i| [coords[(i, 0)], if coords.ncols() > 1 { coords[(i, 1)] } else { 0.0 }])
                .collect(),
            zeta_r: res.rows.iter().map(|r| r.zeta_r).collect(),
            zeta_s: res.rows.iter().map(|r| r.zeta_s).collect(),
            zeta_t: res.rows.iter().map(|r| r.zeta_t).collect(),
            iterations: model.diagnostics.len(),
            converged: model.converged,
            elements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_has_opaque_pixels_and_outlines() {
        let d = Demo::new(false, 2010).unwrap();
        let plain = d.rgba(1, false);
        let lined = d.rgba(1, true);
        assert_eq!(plain.len(), d.width() * d.height() * 4);
        assert!(plain.chunks(4).all(|p| p[3] == 255));
        assert_ne!(plain, lined);
        assert!(d.rgba(0, true).iter().all(|&b| b == 0));
    }

    #[test]
    fn picking_finds_an_element() {
        let d = Demo::new(false, 2010).unwrap();
        let m = &d.seq.layout.frame(3)[0];
        let (x, y) = m.pixels().next().unwrap();
        assert_eq!(d.element_at(3, x, y), m.element as i32);
        assert_eq!(d.element_at(0, x, y), -1);
    }

    #[test]
    fn small_analysis_labels_every_element() {
        let d = Demo::new(true, 2010).unwrap();
        let a = d.analysis(4, 3).unwrap();
        assert_eq!(a.elements.len(), 8);
        assert_eq!(a.clusters.len(), 8);
        assert_eq!(a.zeta_r.len(), 24);
    }
}
