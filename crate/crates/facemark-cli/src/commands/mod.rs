pub mod augment;
pub mod decode;
pub mod encode;
pub mod evals;
pub mod features;
pub mod pose;
pub mod refine;
pub mod synth;

use std::path::Path;

use anyhow::{bail, Context, Result};
use facemark::geometry::{Point2, Rect};

/// Parse `x,y,w,h`.
pub fn parse_rect(s: &str) -> Result<Rect> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad box `{s}`"))?;
    if parts.len() != 4 {
        bail!("box `{s}` needs four comma-separated values x,y,w,h");
    }
    Ok(Rect::new(parts[0], parts[1], parts[2], parts[3])?)
}

/// Parse `x,y`.
pub fn parse_point(s: &str) -> Result<Point2> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad point `{s}`"))?;
    if parts.len() != 2 {
        bail!("point `{s}` needs two comma-separated values x,y");
    }
    Ok(Point2::new(parts[0], parts[1]))
}

/// Write `text` to the file at `out`, or to stdout when absent.
pub fn write_text_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Resolve a heatmap path relative to the detections file's directory.
pub fn resolve_heatmap_path(jsonl: &Path, heatmap: &str) -> std::path::PathBuf {
    let p = Path::new(heatmap);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        jsonl.parent().unwrap_or(Path::new(".")).join(p)
    }
}
