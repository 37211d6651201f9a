//! Seeded handwritten-style digit images drawn from stroke glyphs.
//!
//! Each glyph is a set of polylines in a unit box. A sample applies a random
//! rotation, shear, anisotropic scale, translation and stroke thickness, then
//! rasterizes the strokes with an anti-aliased distance falloff into an 18-pixel
//! box centred on a `side × side` canvas (scaled for other sides). Pixel
//! values lie in `[0, 1]`.

use crate::matrix::Matrix;
use crate::rng::Rng;

pub const NUM_CLASSES: usize = 10;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64) -> Stroke {
    let steps = (((a1 - a0).abs() / 15.0).ceil() as usize).max(2);
    (0..=steps)
        .map(|i| {
            let a = (a0 + (a1 - a0) * i as f64 / steps as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn chain(parts: &[Stroke]) -> Stroke {
    parts.iter().flatten().copied().collect()
}

/// Strokes for one class in unit coordinates, x right and y down.
pub fn glyph(class: usize) -> Vec<Stroke> {
    match class {
        0 => vec![arc(0.5, 0.5, 0.34, 0.47, 0.0, 360.0)],
        1 => vec![vec![(0.3, 0.2), (0.52, 0.02), (0.52, 0.98)]],
        2 => vec![chain(&[
            arc(0.5, 0.28, 0.32, 0.26, 180.0, 405.0),
            vec![(0.15, 0.98), (0.88, 0.98)],
        ])],
        3 => vec![chain(&[
            arc(0.5, 0.27, 0.3, 0.25, 200.0, 450.0),
            arc(0.5, 0.74, 0.34, 0.24, 270.0, 520.0),
        ])],
        4 => vec![vec![(0.66, 0.98), (0.66, 0.02), (0.12, 0.68), (0.9, 0.68)]],
        5 => vec![chain(&[
            vec![(0.8, 0.02), (0.26, 0.02), (0.22, 0.47)],
            arc(0.48, 0.68, 0.34, 0.3, 220.0, 500.0),
        ])],
        6 => vec![
            vec![(0.74, 0.04), (0.45, 0.2), (0.24, 0.46), (0.18, 0.7)],
            arc(0.5, 0.7, 0.32, 0.28, 0.0, 360.0),
        ],
        7 => vec![vec![(0.12, 0.02), (0.88, 0.02), (0.38, 0.98)]],
        8 => vec![
            arc(0.5, 0.26, 0.27, 0.24, 0.0, 360.0),
            arc(0.5, 0.73, 0.33, 0.26, 0.0, 360.0),
        ],
        9 => vec![
            arc(0.5, 0.3, 0.32, 0.28, 0.0, 360.0),
            vec![(0.82, 0.3), (0.78, 0.62), (0.6, 0.98)],
        ],
        _ => panic!("digit class {class} out of range"),
    }
}

/// Per-sample shape parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Style {
    pub rotation_deg: f64,
    pub shear: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub dx: f64,
    pub dy: f64,
    pub thickness: f64,
}

impl Style {
    pub const UPRIGHT: Style = Style {
        rotation_deg: 0.0,
        shear: 0.0,
        scale_x: 1.0,
        scale_y: 1.0,
        dx: 0.0,
        dy: 0.0,
        thickness: 1.3,
    };

    pub fn random(rng: &mut Rng) -> Style {
        Style {
            rotation_deg: rng.uniform_range(-12.0, 12.0),
            shear: rng.uniform_range(-0.25, 0.25),
            scale_x: rng.uniform_range(0.75, 1.05),
            scale_y: rng.uniform_range(0.85, 1.05),
            dx: rng.uniform_range(-1.5, 1.5),
            dy: rng.uniform_range(-1.5, 1.5),
            thickness: rng.uniform_range(0.8, 1.9),
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (wx - t * vx, wy - t * vy);
    (ex * ex + ey * ey).sqrt()
}

/// Rasterizes one digit as a flattened `side × side` image.
pub fn render(class: usize, style: &Style, side: usize) -> Vec<f64> {
    let unit = side as f64 / 28.0;
    let box_px = 18.0 * unit;
    let centre = side as f64 / 2.0;
    let (s, c) = style.rotation_deg.to_radians().sin_cos();
    let map = |(u, v): (f64, f64)| {
        let x = (u - 0.5) * style.scale_x + style.shear * (v - 0.5);
        let y = (v - 0.5) * style.scale_y;
        (
            centre + box_px * (c * x - s * y) + style.dx * unit,
            centre + box_px * (s * x + c * y) + style.dy * unit,
        )
    };
    let segments: Vec<((f64, f64), (f64, f64))> = glyph(class)
        .iter()
        .flat_map(|stroke| {
            let pts: Vec<_> = stroke.iter().copied().map(map).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();
    let half = style.thickness * unit;
    let mut img = vec![0.0; side * side];
    for r in 0..side {
        for col in 0..side {
            let p = (col as f64 + 0.5, r as f64 + 0.5);
            let dist = segments
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            img[r * side + col] = (half + 0.5 - dist).clamp(0.0, 1.0);
        }
    }
    img
}

/// `n` digits with uniformly random classes and styles.
pub fn gen_digits(n: usize, side: usize, rng: &mut Rng) -> (Matrix, Vec<usize>) {
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = rng.below(NUM_CLASSES);
        let style = Style::random(rng);
        data.extend(render(class, &style, side));
        labels.push(class);
    }
    (Matrix::from_vec(n, side * side, data).expect("sized buffer"), labels)
}
