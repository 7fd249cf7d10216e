//! Synthetic dynamic-swarm sequences: rotating leaf and textured-square
//! elements with exported ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Segment, SegmentInput};
use crate::types::{ElementMatte, GridFrame, Link, Mask, SwarmLayout};

pub const LEAF_FILL: f64 = 0.6;
pub const CHECKER_DARK: f64 = 0.35;
pub const CHECKER_LIGHT: f64 = 0.85;
/// Checkerboard cells per square side.
pub const CHECKER_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Polar curve `r(phi) = R (0.55 + 0.45 cos 2 phi)`; `size` is `R`.
    Leaf,
    /// Axis-aligned at angle 0 with a 4x4 checkerboard; `size` is the side.
    TexturedSquare,
}

impl Shape {
    /// Radius of the smallest centred disk containing the shape.
    pub fn radius(&self, size: f64) -> f64 {
        match self {
            Shape::Leaf => size,
            Shape::TexturedSquare => size * std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub shape: Shape,
    pub size: f64,
    /// Centre `(x, y)` in frame 1, grid units.
    pub position: [f64; 2],
    /// Orientation in frame 1, radians.
    pub orientation: f64,
    /// +1 rotates counter-clockwise on screen, -1 clockwise.
    pub sign: i8,
    /// Translation per frame.
    #[serde(default)]
    pub velocity: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub elements: Vec<ElementSpec>,
    /// Mean per-frame rotation, radians.
    pub theta0: f64,
    /// Standard deviation of the per-frame rotation, radians.
    pub sigma_rot: f64,
    pub seed: u64,
    /// Low-level segments emitted per element (1 or 2).
    #[serde(default = "default_segments")]
    pub segments_per_element: usize,
}

fn default_segments() -> usize {
    2
}

impl SynthConfig {
    /// Eight elements (leaves on the top row, squares below) on a 4x2 grid of
    /// a 320x240 frame, all drifting one pixel per frame to the right.
    /// `opposite` makes the squares rotate clockwise.
    pub fn standard(opposite: bool) -> Self {
        let frames = 25;
        let (width, height) = (320, 240);
        let velocity = [1.0, 0.0];
        let drift = velocity[0] * (frames - 1) as f64 / 2.0;
        let mut elements = Vec::new();
        for row in 0..2 {
            for col in 0..4 {
                let k = row * 4 + col;
                let leaf = row == 0;
                elements.push(ElementSpec {
                    shape: if leaf { Shape::Leaf } else { Shape::TexturedSquare },
                    size: if leaf { 18.0 } else { 25.5 },
                    position: [40.0 + 80.0 * col as f64 - drift, 60.0 + 120.0 * row as f64],
                    orientation: 0.3 * k as f64,
                    sign: if opposite && !leaf { -1 } else { 1 },
                    velocity,
                });
            }
        }
        Self {
            frames,
            width,
            height,
            elements,
            theta0: PI / 25.0,
            sigma_rot: 1.0 / 50.0,
            seed: 2010,
            segments_per_element: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::invalid("need at least 2 frames"));
        }
        if self.width * self.height == 0 {
            return Err(Error::invalid("grid has zero area"));
        }
        if !(self.sigma_rot >= 0.0 && self.sigma_rot.is_finite()) || !self.theta0.is_finite() {
            return Err(Error::invalid("rotation parameters must be finite, sigma >= 0"));
        }
        if !(1..=2).contains(&self.segments_per_element) {
            return Err(Error::invalid("segments_per_element must be 1 or 2"));
        }
        let last = (self.frames - 1) as f64;
        for (k, e) in self.elements.iter().enumerate() {
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::invalid(format!("element {k}: sign must be +1 or -1")));
            }
            if !(e.size > 0.0) {
                return Err(Error::invalid(format!("element {k}: size must be positive")));
            }
            let r = e.shape.radius(e.size);
            for s in [0.0, last] {
                let (x, y) = (e.position[0] + s * e.velocity[0], e.position[1] + s * e.velocity[1]);
                if x - r < 0.0 || y - r < 0.0 || x + r > self.width as f64 || y + r > self.height as f64 {
                    return Err(Error::FootprintOutOfGrid {
                        t: if s == 0.0 { 1 } else { self.frames },
                        element: k as u32,
                        width: self.width,
                        height: self.height,
                    });
                }
            }
        }
        for a in 0..self.elements.len() {
            for b in a + 1..self.elements.len() {
                let (ea, eb) = (&self.elements[a], &self.elements[b]);
                let reach = ea.shape.radius(ea.size) + eb.shape.radius(eb.size);
                for s in [0.0, last] {
                    let dx = (ea.position[0] + s * ea.velocity[0]) - (eb.position[0] + s * eb.velocity[0]);
                    let dy = (ea.position[1] + s * ea.velocity[1]) - (eb.position[1] + s * eb.velocity[1]);
                    if dx.hypot(dy) <= reach {
                        return Err(Error::invalid(format!("elements {a} and {b} may overlap")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws one per-frame rotation angle from `N(theta0, sigma^2)`.
pub fn sample_rotation<R: Rng + ?Sized>(theta0: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return theta0;
    }
    Normal::new(theta0, sigma)
        .expect("sigma is finite and positive")
        .sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub angle: f64,
}

/// Rasterized element: matte plus intensities of its pixels in matte order.
#[derive(Clone, Debug)]
pub struct Raster {
    pub matte: ElementMatte,
    pub intensity: Vec<f64>,
}

/// Quantizes to the 8-bit levels a PGM can hold.
pub fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Shape-local coordinates of a pixel centre (y axis pointing up, rotated by
/// `-angle`).
fn local(px: f64, py: f64, pose: Pose) -> (f64, f64) {
    let dx = px - pose.x;
    let dy = pose.y - py;
    let (s, c) = pose.angle.sin_cos();
    (dx * c + dy * s, -dx * s + dy * c)
}

/// Point-in-shape test and fill intensity at a point, `None` outside.
pub fn shade(shape: Shape, size: f64, pose: Pose, px: f64, py: f64) -> Option<f64> {
    let (u, v) = local(px, py, pose);
    match shape {
        Shape::Leaf => {
            let rho = u.hypot(v);
            let phi = v.atan2(u);
            (rho <= size * (0.55 + 0.45 * (2.0 * phi).cos())).then_some(LEAF_FILL)
        }
        Shape::TexturedSquare => {
            let half = size / 2.0;
            if u.abs() > half || v.abs() > half {
                return None;
            }
            let cell = size / CHECKER_CELLS as f64;
            let cu = (((u + half) / cell).floor() as usize).min(CHECKER_CELLS - 1);
            let cv = (((v + half) / cell).floor() as usize).min(CHECKER_CELLS - 1);
            Some(if (cu + cv).is_multiple_of(2) { CHECKER_DARK } else { CHECKER_LIGHT })
        }
    }
}

/// Rasterizes a shape by sampling at pixel centres.
pub fn rasterize_element(
    shape: Shape,
    size: f64,
    pose: Pose,
    width: usize,
    height: usize,
    element: u32,
    t: usize,
) -> Result<Raster> {
    let r = shape.radius(size);
    let out = Error::FootprintOutOfGrid {
        t,
        element,
        width,
        height,
    };
    if pose.x - r < 0.0 || pose.y - r < 0.0 || pose.x + r > width as f64 || pose.y + r > height as f64 {
        return Err(out);
    }
    let x0 = (pose.x - r).floor().max(0.0) as usize;
    let y0 = (pose.y - r).floor().max(0.0) as usize;
    let x1 = ((pose.x + r).ceil() as usize).min(width);
    let y1 = ((pose.y + r).ceil() as usize).min(height);
    let mut mask = Mask::new(width, height);
    let mut values = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            if let Some(v) = shade(shape, size, pose, x as f64 + 0.5, y as f64 + 0.5) {
                mask.set(x, y, true);
                values.push(quantize(v));
            }
        }
    }
    let matte = ElementMatte::from_mask(element, t, &mask)?;
    Ok(Raster {
        matte,
        intensity: values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthElement {
    pub element: u32,
    pub shape: Shape,
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRotation {
    pub t: usize,
    pub element: u32,
    /// Sampled magnitude for the transition `t -> t + 1` (sign applied separately).
    pub angle: f64,
    /// Orientation in frame `t`.
    pub orientation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub elements: Vec<GroundTruthElement>,
    pub rotations: Vec<GroundTruthRotation>,
    pub correspondences: Vec<Link>,
}

impl GroundTruth {
    pub fn sign(&self, element: u32) -> Option<i8> {
        self.elements.iter().find(|e| e.element == element).map(|e| e.sign)
    }

    pub fn shape(&self, element: u32) -> Option<Shape> {
        self.elements.iter().find(|e| e.element == element).map(|e| e.shape)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub config: SynthConfig,
    pub frames: Vec<GridFrame>,
    pub layout: SwarmLayout,
    pub segments: SegmentInput,
    pub ground_truth: GroundTruth,
}

/// Renders the whole sequence. Rotations are drawn frame by frame, element by
/// element, from one seeded stream.
pub fn generate_sequence(config: &SynthConfig) -> Result<SyntheticSequence> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.elements.len();
    let mut poses: Vec<Vec<Pose>> = Vec::with_capacity(config.frames);
    let mut rotations = Vec::new();
    let mut current: Vec<Pose> = config
        .elements
        .iter()
        .map(|e| Pose {
            x: e.position[0],
            y: e.position[1],
            angle: e.orientation,
        })
        .collect();
    for t in 1..=config.frames {
        poses.push(current.clone());
        if t == config.frames {
            break;
        }
        for (i, e) in config.elements.iter().enumerate() {
            let theta = sample_rotation(config.theta0, config.sigma_rot, &mut rng);
            rotations.push(GroundTruthRotation {
                t,
                element: i as u32,
                angle: theta,
                orientation: current[i].angle,
            });
            current[i].angle += e.sign as f64 * theta;
            current[i].x += e.velocity[0];
            current[i].y += e.velocity[1];
        }
    }

    let frame_ids: Vec<usize> = (1..=config.frames).collect();
    let rendered = crate::par_map(&frame_ids, |&t| render_frame(config, t, &poses[t - 1]));
    let mut frames = Vec::with_capacity(config.frames);
    let mut mattes = Vec::with_capacity(config.frames);
    let mut segments = Vec::with_capacity(config.frames);
    for r in rendered {
        let (frame, m, s) = r?;
        frames.push(frame);
        mattes.push(m);
        segments.push(s);
    }
    let layout = SwarmLayout::from_frames(config.width, config.height, mattes);
    let ground_truth = GroundTruth {
        elements: config
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| GroundTruthElement {
                element: i as u32,
                shape: e.shape,
                sign: e.sign,
            })
            .collect(),
        rotations,
        correspondences: layout.links.clone(),
    };
    debug_assert_eq!(layout.links.len(), n * (config.frames - 1));
    Ok(SyntheticSequence {
        config: config.clone(),
        frames,
        layout,
        segments: SegmentInput {
            width: config.width,
            height: config.height,
            frames: segments,
        },
        ground_truth,
    })
}

fn render_frame(
    config: &SynthConfig,
    t: usize,
    poses: &[Pose],
) -> Result<(GridFrame, Vec<ElementMatte>, Vec<Segment>)> {
    let (w, h) = (config.width, config.height);
    let mut frame = GridFrame::filled(t, w, h, 0.0);
    let mut mattes = Vec::new();
    let mut segments = Vec::new();
    let mut background = Mask::from_bits(w, h, vec![true; w * h])?;
    for (i, (spec, pose)) in config.elements.iter().zip(poses).enumerate() {
        let raster = rasterize_element(spec.shape, spec.size, *pose, w, h, i as u32, t)?;
        for ((x, y), v) in raster.matte.pixels().zip(&raster.intensity) {
            frame.intensity[y * w + x] = *v;
            background.set(x, y, false);
        }
        let mask = raster.matte.to_mask(w, h);
        let pieces: Vec<Mask> = if config.segments_per_element == 1 {
            vec![mask]
        } else {
            // split along the vertical line through the element centre
            let mut left = Mask::new(w, h);
            let mut right = Mask::new(w, h);
            for (x, y) in raster.matte.pixels() {
                if (x as f64 + 0.5) < pose.x {
                    left.set(x, y, true);
                } else {
                    right.set(x, y, true);
                }
            }
            vec![left, right]
        };
        for (k, piece) in pieces.iter().enumerate() {
            if piece.is_empty() {
                continue;
            }
            let id = 1 + (config.segments_per_element * i + k) as u32;
            segments.push(Segment {
                matte: ElementMatte::from_mask(id, t, piece)?,
                dx: spec.velocity[0],
                dy: spec.velocity[1],
            });
        }
        mattes.push(raster.matte);
    }
    if !background.is_empty() {
        segments.insert(
            0,
            Segment {
                matte: ElementMatte::from_mask(0, t, &background)?,
                dx: 0.0,
                dy: 0.0,
            },
        );
    }
    Ok((frame, mattes, segments))
}
