//! Seeded procedural test scenes: a shaded background with anti-aliased
//! rectangles, ellipses, polygons and strokes. Piecewise-smooth content with
//! sharp edges is what kernel error turns into visible ringing.

use rand::Rng;
use semiblind_core::{rng, Image, Result};

/// Random stream reserved for scene synthesis.
const SCENE_STREAM: u64 = 0x5C;
const SUPERSAMPLE: usize = 4;

enum Shape {
    Rect { cx: f64, cy: f64, hw: f64, hh: f64, angle: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, angle: f64 },
    Triangle { p: [(f64, f64); 3] },
    Stroke { a: (f64, f64), b: (f64, f64), half_width: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { cx, cy, hw, hh, angle } => {
                let (u, v) = rotate(x - cx, y - cy, angle);
                u.abs() <= hw && v.abs() <= hh
            }
            Shape::Ellipse { cx, cy, rx, ry, angle } => {
                let (u, v) = rotate(x - cx, y - cy, angle);
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Triangle { p } => {
                let s = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
                let d = [s(p[0], p[1]), s(p[1], p[2]), s(p[2], p[0])];
                d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
            }
            Shape::Stroke { a, b, half_width } => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let t = (((x - a.0) * dx + (y - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                let (px, py) = (a.0 + t * dx - x, a.1 + t * dy - y);
                px * px + py * py <= half_width * half_width
            }
        }
    }
}

fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x + s * y, -s * x + c * y)
}

/// Grayscale `height×width` scene in `[0.05, 0.95]`, fully determined by `seed`.
pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> Result<Image> {
    let mut r = rng::stream(seed, SCENE_STREAM);
    // Coordinates are in units of the shorter side.
    let unit = height.min(width) as f64;
    let (sx, sy) = (width as f64 / unit, height as f64 / unit);
    let pt = |r: &mut rand_chacha::ChaCha8Rng| (r.gen_range(0.0..sx), r.gen_range(0.0..sy));

    let (g0, g1) = (r.gen_range(0.15..0.45), r.gen_range(0.15..0.45));
    let gdir: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let mut shapes: Vec<(Shape, f64)> = Vec::new();
    let count = r.gen_range(7..11);
    for i in 0..count {
        let level = r.gen_range(0.05..0.95);
        let (cx, cy) = pt(&mut r);
        let angle = r.gen_range(0.0..std::f64::consts::PI);
        let shape = match i % 4 {
            0 => Shape::Rect {
                cx,
                cy,
                hw: r.gen_range(0.06..0.25),
                hh: r.gen_range(0.06..0.25),
                angle,
            },
            1 => Shape::Ellipse {
                cx,
                cy,
                rx: r.gen_range(0.06..0.22),
                ry: r.gen_range(0.06..0.22),
                angle,
            },
            2 => {
                let mut p = [(0.0, 0.0); 3];
                for v in &mut p {
                    let d = r.gen_range(0.08..0.3);
                    let a: f64 = r.gen_range(0.0..std::f64::consts::TAU);
                    *v = (cx + d * a.cos(), cy + d * a.sin());
                }
                Shape::Triangle { p }
            }
            _ => Shape::Stroke {
                a: (cx, cy),
                b: pt(&mut r),
                half_width: r.gen_range(0.008..0.03),
            },
        };
        shapes.push((shape, level));
    }

    let mut data = Vec::with_capacity(height * width);
    let inv = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for i in 0..height {
        for j in 0..width {
            let mut acc = 0.0;
            for a in 0..SUPERSAMPLE {
                for b in 0..SUPERSAMPLE {
                    let y = (i as f64 + (a as f64 + 0.5) / SUPERSAMPLE as f64) / unit;
                    let x = (j as f64 + (b as f64 + 0.5) / SUPERSAMPLE as f64) / unit;
                    let t = ((x / sx) * gdir.cos() + (y / sy) * gdir.sin()).clamp(-1.0, 1.0) * 0.5 + 0.5;
                    let mut v = g0 + (g1 - g0) * t;
                    for (s, level) in &shapes {
                        if s.contains(x, y) {
                            v = *level;
                        }
                    }
                    acc += v;
                }
            }
            data.push((acc * inv).clamp(0.05, 0.95));
        }
    }
    Image::gray(height, width, data)
}
