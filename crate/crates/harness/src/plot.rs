//! Minimal raster line plots: axes, ticks with numeric labels, and one
//! polyline (with point markers) per series.

use image::{Rgb, RgbImage};

const MARGIN_LEFT: i64 = 56;
const MARGIN_RIGHT: i64 = 16;
const MARGIN_TOP: i64 = 16;
const MARGIN_BOTTOM: i64 = 32;
const TICKS: usize = 5;
const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [148, 103, 189],
    [255, 127, 14],
    [23, 190, 207],
];

pub struct Series {
    pub points: Vec<(f64, f64)>,
}

/// 3×5 glyphs for tick labels, one `u16` per glyph, rows top to bottom,
/// three bits per row.
fn glyph(c: char) -> Option<u16> {
    Some(match c {
        '0' => 0b111_101_101_101_111,
        '1' => 0b010_110_010_010_111,
        '2' => 0b111_001_111_100_111,
        '3' => 0b111_001_111_001_111,
        '4' => 0b101_101_111_001_001,
        '5' => 0b111_100_111_001_111,
        '6' => 0b111_100_111_101_111,
        '7' => 0b111_001_010_010_010,
        '8' => 0b111_101_111_101_111,
        '9' => 0b111_101_111_001_111,
        '.' => 0b000_000_000_000_010,
        '-' => 0b000_000_111_000_000,
        'e' => 0b000_111_101_110_011,
        _ => return None,
    })
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Draws `text` at scale 2 with its top-left corner at `(x, y)`.
    fn text(&mut self, x: i64, y: i64, text: &str) {
        let mut cx = x;
        for ch in text.chars() {
            if let Some(g) = glyph(ch) {
                for row in 0..5 {
                    for col in 0..3 {
                        if g >> (14 - (row * 3 + col)) & 1 == 1 {
                            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                self.put(cx + col * 2 + a, y + row * 2 + b, [0, 0, 0]);
                            }
                        }
                    }
                }
            }
            cx += 8;
        }
    }
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Renders the series on a white `width×height` canvas. Non-finite points are
/// skipped and break the polyline.
pub fn line_plot(series: &[Series], width: u32, height: u32) -> RgbImage {
    let mut cv = Canvas {
        img: RgbImage::from_pixel(width, height, Rgb([255, 255, 255])),
    };
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let (left, right) = (MARGIN_LEFT, width as i64 - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, height as i64 - MARGIN_BOTTOM);
    let px = |x: f64| left + ((x - x0) / (x1 - x0) * (right - left) as f64).round() as i64;
    let py = |y: f64| bottom - ((y - y0) / (y1 - y0) * (bottom - top) as f64).round() as i64;

    let axis = [0, 0, 0];
    cv.line((left, top), (left, bottom), axis);
    cv.line((left, bottom), (right, bottom), axis);
    for t in 0..TICKS {
        let f = t as f64 / (TICKS - 1) as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        cv.line((tx, bottom), (tx, bottom + 4), axis);
        cv.line((left - 4, ty), (left, ty), axis);
        let xl = label(xv);
        cv.text(tx - 4 * xl.len() as i64, bottom + 8, &xl);
        let yl = label(yv);
        cv.text(left - 8 - 8 * yl.len() as i64, ty - 5, &yl);
    }

    for (i, s) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut prev: Option<(i64, i64)> = None;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                prev = None;
                continue;
            }
            let p = (px(x), py(y));
            if let Some(q) = prev {
                cv.line(q, p, c);
            }
            for d in -2..=2 {
                cv.put(p.0 + d, p.1, c);
                cv.put(p.0, p.1 + d, c);
            }
            prev = Some(p);
        }
    }
    cv.img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_series_inside_the_frame() {
        let s = Series {
            points: vec![(0.0, 1.0), (5.0, 2.0), (10.0, f64::NAN), (20.0, 0.5)],
        };
        let img = line_plot(&[s], 320, 200);
        assert_eq!(img.dimensions(), (320, 200));
        let colored = img.pixels().filter(|p| p.0 == PALETTE[0]).count();
        assert!(colored > 20);
    }

    #[test]
    fn constant_and_empty_series_do_not_panic() {
        line_plot(&[Series { points: vec![(1.0, 3.0)] }], 100, 80);
        line_plot(&[], 100, 80);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(label(2.5), "2.5");
        assert_eq!(label(20.0), "20");
        assert_eq!(label(-0.0001), "0");
    }
}
