//! Contrast-limited adaptive histogram equalization.
//!
//! Color images are converted to YCrCb (full-range BT.601) and only the luma
//! channel is equalized; chroma passes through untouched. The clip limit is
//! expressed relative to the uniform bin height, so `2.0` caps each of the
//! 256 histogram bins at twice `tile_area / 256`. Clipped mass is spread
//! uniformly over all bins and tile lookup tables are blended bilinearly.

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Default tile grid used by the pipeline.
pub const DEFAULT_TILES: (usize, usize) = (8, 8);
/// Default clip limit relative to the uniform bin height.
pub const DEFAULT_CLIP_LIMIT: f64 = 2.0;

/// Full-range BT.601 RGB -> YCrCb, all channels in 0..=255.
pub fn rgb_to_ycrcb(r: u8, g: u8, b: u8) -> (u8, u8, u8) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cr = (r - y) * 0.713 + 128.0;
    let cb = (b - y) * 0.564 + 128.0;
    (
        y.round().clamp(0.0, 255.0) as u8,
        cr.round().clamp(0.0, 255.0) as u8,
        cb.round().clamp(0.0, 255.0) as u8,
    )
}

/// Inverse of [`rgb_to_ycrcb`].
pub fn ycrcb_to_rgb(y: u8, cr: u8, cb: u8) -> (u8, u8, u8) {
    let (y, cr, cb) = (y as f64, cr as f64 - 128.0, cb as f64 - 128.0);
    let r = y + 1.403 * cr;
    let g = y - 0.714 * cr - 0.344 * cb;
    let b = y + 1.773 * cb;
    (
        r.round().clamp(0.0, 255.0) as u8,
        g.round().clamp(0.0, 255.0) as u8,
        b.round().clamp(0.0, 255.0) as u8,
    )
}

/// Clip a 256-bin histogram at `clip_limit` times the uniform bin height and
/// spread the excess uniformly over all bins. A non-finite clip limit
/// disables clipping.
fn clip_histogram(hist: &mut [f64; 256], clip_limit: f64, area: f64) {
    if !clip_limit.is_finite() {
        return;
    }
    let cap = clip_limit * area / 256.0;
    let mut excess = 0.0;
    for bin in hist.iter_mut() {
        if *bin > cap {
            excess += *bin - cap;
            *bin = cap;
        }
    }
    let share = excess / 256.0;
    for bin in hist.iter_mut() {
        *bin += share;
    }
}

/// Cumulative-histogram lookup table for one tile.
fn tile_lut(values: impl Iterator<Item = u8>, clip_limit: f64) -> [u8; 256] {
    let mut hist = [0.0f64; 256];
    let mut area = 0.0;
    for v in values {
        hist[v as usize] += 1.0;
        area += 1.0;
    }
    clip_histogram(&mut hist, clip_limit, area);
    let mut lut = [0u8; 256];
    let mut cdf = 0.0;
    for (i, &h) in hist.iter().enumerate() {
        cdf += h;
        lut[i] = (cdf * 255.0 / area).round().clamp(0.0, 255.0) as u8;
    }
    lut
}

fn equalize_channel(
    plane: &[u8],
    width: usize,
    height: usize,
    clip_limit: f64,
    tiles: (usize, usize),
) -> Vec<u8> {
    let (tiles_x, tiles_y) = tiles;
    // tile i spans [bound(i), bound(i+1))
    let bound_x: Vec<usize> = (0..=tiles_x).map(|i| i * width / tiles_x).collect();
    let bound_y: Vec<usize> = (0..=tiles_y).map(|i| i * height / tiles_y).collect();

    let mut luts = vec![[0u8; 256]; tiles_x * tiles_y];
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let cells = (bound_y[ty]..bound_y[ty + 1])
                .flat_map(|y| (bound_x[tx]..bound_x[tx + 1]).map(move |x| (x, y)))
                .map(|(x, y)| plane[y * width + x]);
            luts[ty * tiles_x + tx] = tile_lut(cells, clip_limit);
        }
    }

    let tile_w = width as f64 / tiles_x as f64;
    let tile_h = height as f64 / tiles_y as f64;
    let mut out = vec![0u8; plane.len()];
    for y in 0..height {
        // fractional tile coordinate of this pixel center
        let tyf = (y as f64 + 0.5) / tile_h - 0.5;
        let ty0 = tyf.floor();
        let fy = tyf - ty0;
        let ty0c = (ty0.max(0.0) as usize).min(tiles_y - 1);
        let ty1c = ((ty0 + 1.0).max(0.0) as usize).min(tiles_y - 1);
        for x in 0..width {
            let txf = (x as f64 + 0.5) / tile_w - 0.5;
            let tx0 = txf.floor();
            let fx = txf - tx0;
            let tx0c = (tx0.max(0.0) as usize).min(tiles_x - 1);
            let tx1c = ((tx0 + 1.0).max(0.0) as usize).min(tiles_x - 1);

            let v = plane[y * width + x] as usize;
            let tl = luts[ty0c * tiles_x + tx0c][v] as f64;
            let tr = luts[ty0c * tiles_x + tx1c][v] as f64;
            let bl = luts[ty1c * tiles_x + tx0c][v] as f64;
            let br = luts[ty1c * tiles_x + tx1c][v] as f64;
            let top = tl * (1.0 - fx) + tr * fx;
            let bottom = bl * (1.0 - fx) + br * fx;
            out[y * width + x] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Equalize an image. Grayscale input is processed directly; RGB input is
/// equalized on the luma channel in YCrCb space and converted back.
pub fn clahe(img: &Image, clip_limit: f64, tiles: (usize, usize)) -> Result<Image> {
    if clip_limit <= 0.0 {
        return Err(Error::BadClipLimit(clip_limit));
    }
    let (tiles_x, tiles_y) = tiles;
    if tiles_x == 0 || tiles_y == 0 || tiles_x > img.width() || tiles_y > img.height() {
        return Err(Error::BadTileGrid {
            tiles_x,
            tiles_y,
            width: img.width(),
            height: img.height(),
        });
    }

    match img.channels() {
        1 => {
            let plane = equalize_channel(img.data(), img.width(), img.height(), clip_limit, tiles);
            Image::new(img.width(), img.height(), 1, plane)
        }
        _ => {
            let n = img.width() * img.height();
            let mut luma = vec![0u8; n];
            let mut cr_plane = vec![0u8; n];
            let mut cb_plane = vec![0u8; n];
            for i in 0..n {
                let (y, cr, cb) =
                    rgb_to_ycrcb(img.data()[i * 3], img.data()[i * 3 + 1], img.data()[i * 3 + 2]);
                luma[i] = y;
                cr_plane[i] = cr;
                cb_plane[i] = cb;
            }
            let eq = equalize_channel(&luma, img.width(), img.height(), clip_limit, tiles);
            let mut data = vec![0u8; n * 3];
            for i in 0..n {
                let (r, g, b) = ycrcb_to_rgb(eq[i], cr_plane[i], cb_plane[i]);
                data[i * 3] = r;
                data[i * 3 + 1] = g;
                data[i * 3 + 2] = b;
            }
            Image::new(img.width(), img.height(), 3, data)
        }
    }
}
