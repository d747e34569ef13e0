//! Portable pixmap rendering of scalar fields.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::check_finite;

const DIVERGING: &str = include_str!("../data/diverging.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// 8-bit grayscale, written as binary PGM.
    Gray,
    /// The embedded blue-white-red map, written as binary PPM.
    Diverging,
}

/// Anchor points `(position, rgb)` of the embedded colormap.
fn diverging_anchors() -> Vec<(f64, [f64; 3])> {
    DIVERGING
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().expect("colormap table is numeric"))
                .collect();
            (v[0], [v[1], v[2], v[3]])
        })
        .collect()
}

/// 256-entry lookup table interpolated from the anchors.
pub fn diverging_lut() -> Vec<[u8; 3]> {
    let anchors = diverging_anchors();
    (0..256)
        .map(|i| {
            let t = i as f64 / 255.0;
            let k = anchors
                .windows(2)
                .position(|w| t <= w[1].0)
                .unwrap_or(anchors.len() - 2);
            let (t0, c0) = anchors[k];
            let (t1, c1) = anchors[k + 1];
            let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            std::array::from_fn(|j| (c0[j] + f * (c1[j] - c0[j])).round() as u8)
        })
        .collect()
}

/// Symmetric range `[-m, m]` covering the data, or `[-1, 1]` for zeros.
pub fn symmetric_range(values: &Array2<f64>) -> (f64, f64) {
    let m = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if m > 0.0 {
        (-m, m)
    } else {
        (-1.0, 1.0)
    }
}

/// Linear map of `v` from `[lo, hi]` onto `0..=255`, clamped.
pub fn quantize(v: f64, lo: f64, hi: f64) -> u8 {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Renders `scale * values` over `range` to PGM or PPM bytes.
pub fn render(values: &Array2<f64>, scale: f64, range: (f64, f64), palette: Palette) -> Result<Vec<u8>> {
    check_finite(values, "rendered field")?;
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(
            "range",
            format!("need finite lo < hi, got [{lo}, {hi}]"),
        ));
    }
    if !scale.is_finite() {
        return Err(Error::invalid("scale", "must be finite"));
    }
    let (rows, cols) = values.dim();
    let levels = values.iter().map(|&v| quantize(scale * v, lo, hi));
    let mut out = match palette {
        Palette::Gray => format!("P5\n{cols} {rows}\n255\n").into_bytes(),
        Palette::Diverging => format!("P6\n{cols} {rows}\n255\n").into_bytes(),
    };
    match palette {
        Palette::Gray => out.extend(levels),
        Palette::Diverging => {
            let lut = diverging_lut();
            for q in levels {
                out.extend_from_slice(&lut[q as usize]);
            }
        }
    }
    Ok(out)
}
