//! On-disk sequence bundles and JSON artifacts.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/frames/frame_0001.pgm          8-bit P5, one per frame
//! <dir>/mattes/t0001_e000.pbm          P4 over the full grid
//! <dir>/segments/t0001_s000.pbm        optional low-level segments
//! <dir>/flows.json                     per-segment displacement
//! <dir>/ground_truth.json              optional
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Segment, SegmentInput};
use crate::synth::GroundTruth;
use crate::types::{validate_sequence, ElementMatte, GridFrame, Link, Mask, SwarmLayout};

pub const BUNDLE_FORMAT: &str = "swarmdyn-bundle";
pub const BUNDLE_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .ok_or_else(|| format_err(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Header tokens of a Netpbm file and the offset of the raster.
fn netpbm_header(path: &Path, bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(format_err(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates header and raster
    Ok((tokens, i + 1))
}

fn parse_dim(path: &Path, s: &str) -> Result<usize> {
    s.parse().map_err(|_| format_err(path, format!("bad header value {s:?}")))
}

pub fn encode_pgm(frame: &GridFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.intensity.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn decode_pgm(path: &Path, bytes: &[u8], t: usize) -> Result<GridFrame> {
    let (h, off) = netpbm_header(path, bytes, 4)?;
    if h[0] != "P5" {
        return Err(format_err(path, format!("expected P5, found {}", h[0])));
    }
    let (w, ht, max) = (parse_dim(path, &h[1])?, parse_dim(path, &h[2])?, parse_dim(path, &h[3])?);
    if max == 0 || max > 255 {
        return Err(format_err(path, "only 8-bit PGM is supported"));
    }
    let raster = bytes.get(off..off + w * ht).ok_or_else(|| format_err(path, "truncated raster"))?;
    let intensity = raster.iter().map(|&b| b as f64 / max as f64).collect();
    GridFrame::new(t, w, ht, intensity).map_err(|e| format_err(path, e.to_string()))
}

pub fn encode_pbm(mask: &Mask) -> Vec<u8> {
    let (w, h) = (mask.width, mask.height);
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let stride = w.div_ceil(8);
    for y in 0..h {
        let mut row = vec![0u8; stride];
        for x in 0..w {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend(row);
    }
    out
}

pub fn decode_pbm(path: &Path, bytes: &[u8]) -> Result<Mask> {
    let (h, off) = netpbm_header(path, bytes, 3)?;
    if h[0] != "P4" {
        return Err(format_err(path, format!("expected P4, found {}", h[0])));
    }
    let (w, ht) = (parse_dim(path, &h[1])?, parse_dim(path, &h[2])?);
    let stride = w.div_ceil(8);
    let raster = bytes.get(off..off + stride * ht).ok_or_else(|| format_err(path, "truncated raster"))?;
    let mut mask = Mask::new(w, ht);
    for y in 0..ht {
        for x in 0..w {
            if raster[y * stride + x / 8] & (0x80 >> (x % 8)) != 0 {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub links: Vec<Link>,
    pub segments: bool,
    pub ground_truth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub t: usize,
    pub segment: u32,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub frames: Vec<GridFrame>,
    pub layout: SwarmLayout,
    pub segments: Option<SegmentInput>,
    pub ground_truth: Option<GroundTruth>,
}

pub fn frame_path(dir: &Path, t: usize) -> PathBuf {
    dir.join("frames").join(format!("frame_{t:04}.pgm"))
}

pub fn matte_path(dir: &Path, t: usize, element: u32) -> PathBuf {
    dir.join("mattes").join(format!("t{t:04}_e{element:03}.pbm"))
}

pub fn segment_path(dir: &Path, t: usize, segment: u32) -> PathBuf {
    dir.join("segments").join(format!("t{t:04}_s{segment:03}.pbm"))
}

/// Parses `t0001_e000.pbm`-style names.
fn parse_indexed(name: &str, tag: char) -> Option<(usize, u32)> {
    let stem = name.strip_suffix(".pbm")?;
    let rest = stem.strip_prefix('t')?;
    let (t, id) = rest.split_once('_')?;
    let id = id.strip_prefix(tag)?;
    Some((t.parse().ok()?, id.parse().ok()?))
}

fn list_indexed(dir: &Path, tag: char) -> Result<Vec<(usize, u32, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    for e in entries {
        let e = e.map_err(io_err(dir))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some((t, id)) = parse_indexed(&name, tag) {
            out.push((t, id, e.path()));
        }
    }
    out.sort();
    Ok(out)
}

impl Bundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let report = validate_sequence(&self.frames, &self.layout);
        if !report.is_ok() {
            return Err(Error::invalid(report.to_string()));
        }
        let (w, h) = (self.layout.width, self.layout.height);
        for f in &self.frames {
            write_atomic(&frame_path(dir, f.t), &encode_pgm(f))?;
        }
        for m in self.layout.frames.iter().flatten() {
            write_atomic(&matte_path(dir, m.t, m.element), &encode_pbm(&m.to_mask(w, h)))?;
        }
        if let Some(segs) = &self.segments {
            let mut flows = Vec::new();
            for s in segs.frames.iter().flatten() {
                write_atomic(&segment_path(dir, s.matte.t, s.id()), &encode_pbm(&s.matte.to_mask(w, h)))?;
                flows.push(FlowEntry {
                    t: s.matte.t,
                    segment: s.id(),
                    dx: s.dx,
                    dy: s.dy,
                });
            }
            write_json(&dir.join("flows.json"), &flows)?;
        }
        if let Some(gt) = &self.ground_truth {
            write_json(&dir.join("ground_truth.json"), gt)?;
        }
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            width: w,
            height: h,
            frames: self.frames.len(),
            links: self.layout.links.clone(),
            segments: self.segments.is_some(),
            ground_truth: self.ground_truth.is_some(),
        };
        // the manifest goes last so a complete manifest implies a complete bundle
        write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.json");
        let manifest: Manifest = read_json(&mpath)?;
        if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
            return Err(format_err(&mpath, "unsupported bundle format or version"));
        }
        let (w, h) = (manifest.width, manifest.height);
        let mut frames = Vec::with_capacity(manifest.frames);
        for t in 1..=manifest.frames {
            let p = frame_path(dir, t);
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            let f = decode_pgm(&p, &bytes, t)?;
            if f.width != w || f.height != h {
                return Err(format_err(&p, "frame size differs from the manifest"));
            }
            frames.push(f);
        }
        let read_masks = |sub: &str, tag: char| -> Result<Vec<Vec<ElementMatte>>> {
            let mut per = vec![Vec::new(); manifest.frames];
            let d = dir.join(sub);
            if !d.exists() {
                return Ok(per);
            }
            for (t, id, p) in list_indexed(&d, tag)? {
                if t == 0 || t > manifest.frames {
                    return Err(format_err(&p, format!("frame {t} outside 1..={}", manifest.frames)));
                }
                let bytes = fs::read(&p).map_err(io_err(&p))?;
                let mask = decode_pbm(&p, &bytes)?;
                if mask.width != w || mask.height != h {
                    return Err(format_err(&p, "matte size differs from the manifest"));
                }
                per[t - 1].push(ElementMatte::from_mask(id, t, &mask).map_err(|e| format_err(&p, e.to_string()))?);
            }
            Ok(per)
        };
        let mut mattes = read_masks("mattes", 'e')?;
        for f in &mut mattes {
            f.sort_by_key(|m| m.element);
        }
        let layout = SwarmLayout {
            width: w,
            height: h,
            frames: mattes,
            links: manifest.links.clone(),
        };
        let report = validate_sequence(&frames, &layout);
        if !report.is_ok() {
            return Err(format_err(dir, report.to_string()));
        }
        let segments = if manifest.segments {
            let fpath = dir.join("flows.json");
            let flows: Vec<FlowEntry> = read_json(&fpath)?;
            let masks = read_masks("segments", 's')?;
            let mut frames_out = Vec::with_capacity(masks.len());
            for per in masks {
                let mut segs = Vec::new();
                for m in per {
                    let flow = flows
                        .iter()
                        .find(|f| f.t == m.t && f.segment == m.element)
                        .ok_or_else(|| format_err(&fpath, format!("no flow for segment {} in frame {}", m.element, m.t)))?;
                    segs.push(Segment {
                        matte: m,
                        dx: flow.dx,
                        dy: flow.dy,
                    });
                }
                segs.sort_by_key(|s| s.id());
                frames_out.push(segs);
            }
            let input = SegmentInput {
                width: w,
                height: h,
                frames: frames_out,
            };
            input.validate().map_err(|e| format_err(dir, e.to_string()))?;
            Some(input)
        } else {
            None
        };
        let ground_truth = if manifest.ground_truth {
            Some(read_json(&dir.join("ground_truth.json"))?)
        } else {
            None
        };
        Ok(Self {
            frames,
            layout,
            segments,
            ground_truth,
        })
    }
}
