//! File formats: the binary heatmap container, the 300-W `.pts` landmark
//! annotation format, JSON-lines detection records and PNG image I/O.
//!
//! Heatmap container layout: magic `OHM1`, then little-endian u32
//! `n_maps`, `height`, `width`, then `n_maps * height * width` little-endian
//! f32 values, row-major within a map, map-major overall. A standard 68-map
//! 64x64 stack is 16 + 4 * 68 * 4096 = 1,114,128 bytes.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect, SCORE_SIZE};
use crate::heatmap::{Heatmap, HeatmapStack};
use crate::imaging::Image;
use crate::landmarks::{LandmarkSet, NUM_LANDMARKS};
use crate::pose::PoseAngles;

/// Magic bytes of the heatmap container.
pub const HEATMAP_MAGIC: &[u8; 4] = b"OHM1";

/// Write a heatmap stack (68 maps of 64x64) to the binary container.
pub fn write_heatmap_stack(path: &Path, stack: &HeatmapStack) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(HEATMAP_MAGIC)?;
    w.write_all(&(NUM_LANDMARKS as u32).to_le_bytes())?;
    w.write_all(&(SCORE_SIZE as u32).to_le_bytes())?;
    w.write_all(&(SCORE_SIZE as u32).to_le_bytes())?;
    for map in stack.maps() {
        for v in map.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a heatmap stack, validating magic and dimensions (68 x 64 x 64).
pub fn read_heatmap_stack(path: &Path) -> Result<HeatmapStack> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &magic != HEATMAP_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic {:?}, expected {:?}", magic, HEATMAP_MAGIC),
        ));
    }
    let mut word = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<fs::File>| -> Result<u32> {
        r.read_exact(&mut word)
            .map_err(|_| Error::format(path, "truncated header"))?;
        Ok(u32::from_le_bytes(word))
    };
    let n_maps = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    if n_maps != NUM_LANDMARKS || height != SCORE_SIZE || width != SCORE_SIZE {
        return Err(Error::format(
            path,
            format!("dimension mismatch: {n_maps} x {height} x {width}, expected {NUM_LANDMARKS} x {SCORE_SIZE} x {SCORE_SIZE}"),
        ));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = 4 * n_maps * height * width;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {expected}", payload.len()),
        ));
    }
    let mut maps = Vec::with_capacity(n_maps);
    for m in 0..n_maps {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height * width {
            let off = 4 * (m * height * width + i);
            data.push(f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()));
        }
        maps.push(Heatmap::from_data(data)?);
    }
    HeatmapStack::new(maps)
}

/// Parse a 300-W `.pts` annotation: `version: 1`, `n_points: 68`, a brace
/// block with 68 `x y` lines. Schemes other than 68 points are rejected.
pub fn read_pts(path: &Path) -> Result<Vec<Point2>> {
    let text = fs::read_to_string(path)?;
    parse_pts(&text).map_err(|msg| Error::format(path, msg))
}

fn parse_pts(text: &str) -> std::result::Result<Vec<Point2>, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());

    let version = lines.next().ok_or("empty file")?;
    if !version.starts_with("version:") {
        return Err(format!("expected 'version:' line, got '{version}'"));
    }
    let count_line = lines.next().ok_or("missing n_points line")?;
    let n: usize = count_line
        .strip_prefix("n_points:")
        .ok_or_else(|| format!("expected 'n_points:' line, got '{count_line}'"))?
        .trim()
        .parse()
        .map_err(|e| format!("bad n_points: {e}"))?;
    if n != NUM_LANDMARKS {
        return Err(format!("unsupported scheme: n_points {n}, only {NUM_LANDMARKS} supported"));
    }
    if lines.next() != Some("{") {
        return Err("missing opening brace".into());
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines.next().ok_or_else(|| format!("missing point {}", i + 1))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .ok_or_else(|| format!("point {}: missing x", i + 1))?
            .parse()
            .map_err(|e| format!("point {}: {e}", i + 1))?;
        let y: f64 = it
            .next()
            .ok_or_else(|| format!("point {}: missing y", i + 1))?
            .parse()
            .map_err(|e| format!("point {}: {e}", i + 1))?;
        points.push(Point2::new(x, y));
    }
    if lines.next() != Some("}") {
        return Err("missing closing brace".into());
    }
    Ok(points)
}

/// Serialize landmarks to the `.pts` format with six decimals.
pub fn write_pts(path: &Path, points: &[Point2]) -> Result<()> {
    if points.len() != NUM_LANDMARKS {
        return Err(Error::LandmarkCount {
            expected: NUM_LANDMARKS,
            got: points.len(),
        });
    }
    let mut out = String::new();
    out.push_str("version: 1\n");
    out.push_str(&format!("n_points: {}\n{{\n", NUM_LANDMARKS));
    for p in points {
        out.push_str(&format!("{:.6} {:.6}\n", p.x, p.y));
    }
    out.push_str("}\n");
    fs::write(path, out)?;
    Ok(())
}

/// One detection (or ground-truth face) as a JSON-lines record. Optional
/// fields carry the refinement outputs once computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Identifier of the source image; records with equal ids are grouped.
    pub image: String,
    /// `[x, y, w, h]` in original-image coordinates.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub det_score: f64,
    /// Path to this detection's heatmap container, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<String>,
    /// `[w, h]` of the source image, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occ_scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occ_flags: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseAngles>,
}

impl DetectionRecord {
    pub fn new(image: impl Into<String>, rect: &Rect, det_score: f64) -> Self {
        DetectionRecord {
            image: image.into(),
            bbox: [rect.x, rect.y, rect.w, rect.h],
            det_score,
            heatmap: None,
            image_size: None,
            landmarks: None,
            occ_scores: None,
            occ_flags: None,
            detected: None,
            face_score: None,
            pose: None,
        }
    }

    pub fn rect(&self) -> Result<Rect> {
        Rect::new(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])
    }

    /// Store a landmark set's fields on the record.
    pub fn set_landmarks(&mut self, lms: &LandmarkSet) {
        self.landmarks = Some(lms.points.iter().map(|p| [p.x, p.y]).collect());
        self.occ_scores = Some(lms.occ_score.clone());
        self.occ_flags = Some(lms.occ_flag.clone());
        self.detected = Some(lms.detected.clone());
    }

    /// Rebuild a landmark set from the record's optional fields.
    pub fn landmark_set(&self) -> Option<LandmarkSet> {
        let pts = self.landmarks.as_ref()?;
        if pts.len() != NUM_LANDMARKS {
            return None;
        }
        let mut lms =
            LandmarkSet::from_points(pts.iter().map(|&[x, y]| Point2::new(x, y)).collect()).ok()?;
        if let Some(s) = &self.occ_scores {
            if s.len() == NUM_LANDMARKS {
                lms.occ_score = s.clone();
            }
        }
        if let Some(f) = &self.occ_flags {
            if f.len() == NUM_LANDMARKS {
                lms.occ_flag = f.clone();
            }
        }
        if let Some(d) = &self.detected {
            if d.len() == NUM_LANDMARKS {
                lms.detected = d.clone();
            }
        }
        Some(lms)
    }
}

/// Read a JSON-lines file of detection records, with line numbers in errors.
pub fn read_jsonl(path: &Path) -> Result<Vec<DetectionRecord>> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        if !rec.bbox.iter().all(|v| v.is_finite()) {
            return Err(Error::format(path, format!("line {}: non-finite box", i + 1)));
        }
        records.push(rec);
    }
    Ok(records)
}

/// Write detection records as JSON lines.
pub fn write_jsonl(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load a PNG as an 8-bit image; gray stays 1-channel, everything else
/// becomes RGB. Returns the optional alpha plane when the file has one.
pub fn load_png(path: &Path) -> Result<(Image, Option<Vec<u8>>)> {
    let dyn_img = image::open(path)?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    match dyn_img {
        image::DynamicImage::ImageLuma8(buf) => {
            Ok((Image::new(w, h, 1, buf.into_raw())?, None))
        }
        image::DynamicImage::ImageLumaA8(buf) => {
            let raw = buf.into_raw();
            let mut gray = Vec::with_capacity(w * h);
            let mut alpha = Vec::with_capacity(w * h);
            for px in raw.chunks_exact(2) {
                gray.push(px[0]);
                alpha.push(px[1]);
            }
            Ok((Image::new(w, h, 1, gray)?, Some(alpha)))
        }
        image::DynamicImage::ImageRgba8(buf) => {
            let raw = buf.into_raw();
            let mut rgb = Vec::with_capacity(w * h * 3);
            let mut alpha = Vec::with_capacity(w * h);
            for px in raw.chunks_exact(4) {
                rgb.extend_from_slice(&px[..3]);
                alpha.push(px[3]);
            }
            Ok((Image::new(w, h, 3, rgb)?, Some(alpha)))
        }
        other => {
            let buf = other.to_rgb8();
            Ok((Image::new(w, h, 3, buf.into_raw())?, None))
        }
    }
}

/// Save an image as PNG.
pub fn save_png(path: &Path, img: &Image) -> Result<()> {
    match img.channels() {
        1 => {
            let buf = image::GrayImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.data().to_vec(),
            )
            .expect("consistent dimensions");
            buf.save(path)?;
        }
        _ => {
            let buf = image::RgbImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.data().to_vec(),
            )
            .expect("consistent dimensions");
            buf.save(path)?;
        }
    }
    Ok(())
}
