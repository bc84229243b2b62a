use std::io::Write;
use std::path::Path;

use super::physics::{BALL_RADIUS, BLOCK_HALF_WIDTH};
use super::EnvId;
use crate::error::{Error, Result};

/// Row-major RGB frame, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = 3 * (row * self.width + col);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn mean_brightness(&self) -> f64 {
        self.data.iter().map(|&b| b as f64).sum::<f64>() / self.data.len() as f64
    }
}

type Rgb = [f64; 3];

enum Shape {
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Segment {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        half_width: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Circle { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Segment {
                x0,
                y0,
                x1,
                y1,
                half_width,
            } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (x0 + t * dx, y0 + t * dy);
                (x - px).powi(2) + (y - py).powi(2) <= half_width * half_width
            }
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
        }
    }
}

struct Scene {
    background: Rgb,
    shapes: Vec<(Shape, Rgb)>,
    gain: f64,
}

const PENDULUM_PIVOT: (f64, f64) = (0.5, 0.5);
const PENDULUM_DRAWN_LENGTH: f64 = 0.36;
const ROD_HALF_WIDTH: f64 = 0.035;
const BOB_RADIUS: f64 = 0.07;
const BLOCK_FLOOR: f64 = 0.1;
const BLOCK_BACKGROUND: f64 = 0.35;
const BLOCK_FLOOR_SHADE: f64 = 0.15;

fn rgb(p: &[f64]) -> Rgb {
    [p[0], p[1], p[2]]
}

fn scene(env: EnvId, s: &[f64], p: &[f64]) -> Scene {
    match env {
        EnvId::BouncingBall => Scene {
            background: rgb(&p[5..8]),
            shapes: vec![(
                Shape::Circle {
                    cx: s[0],
                    cy: s[1],
                    r: BALL_RADIUS,
                },
                rgb(&p[2..5]),
            )],
            gain: 1.0,
        },
        EnvId::DampedPendulum => {
            let (px, py) = PENDULUM_PIVOT;
            let (bx, by) = (
                px + PENDULUM_DRAWN_LENGTH * s[0].sin(),
                py - PENDULUM_DRAWN_LENGTH * s[0].cos(),
            );
            let color = rgb(&p[2..5]);
            Scene {
                background: rgb(&p[5..8]),
                shapes: vec![
                    (
                        Shape::Segment {
                            x0: px,
                            y0: py,
                            x1: bx,
                            y1: by,
                            half_width: ROD_HALF_WIDTH,
                        },
                        color,
                    ),
                    (
                        Shape::Circle {
                            cx: bx,
                            cy: by,
                            r: BOB_RADIUS,
                        },
                        color,
                    ),
                ],
                gain: 1.0,
            }
        }
        EnvId::SlidingBlock => Scene {
            background: [BLOCK_BACKGROUND; 3],
            shapes: vec![
                (
                    Shape::Rect {
                        x0: 0.0,
                        y0: 0.0,
                        x1: 1.0,
                        y1: BLOCK_FLOOR,
                    },
                    [BLOCK_FLOOR_SHADE; 3],
                ),
                (
                    Shape::Rect {
                        x0: s[0] - BLOCK_HALF_WIDTH,
                        y0: BLOCK_FLOOR,
                        x1: s[0] + BLOCK_HALF_WIDTH,
                        y1: BLOCK_FLOOR + 2.0 * BLOCK_HALF_WIDTH,
                    },
                    rgb(&p[3..6]),
                ),
            ],
            gain: p[2],
        },
    }
}

/// 2x2 supersampled rasterization of the env's primitives. World space is
/// the unit square with y pointing up.
pub(super) fn rasterize(env: EnvId, size: usize, state: &[f64], params: &[f64]) -> Frame {
    const OFFSETS: [f64; 2] = [0.25, 0.75];
    let scene = scene(env, state, params);
    let inv = 1.0 / size as f64;
    let mut data = Vec::with_capacity(size * size * 3);
    for row in 0..size {
        for col in 0..size {
            let mut acc = [0.0; 3];
            for oy in OFFSETS {
                for ox in OFFSETS {
                    let x = (col as f64 + ox) * inv;
                    let y = 1.0 - (row as f64 + oy) * inv;
                    let color = scene
                        .shapes
                        .iter()
                        .rev()
                        .find(|(shape, _)| shape.contains(x, y))
                        .map_or(scene.background, |(_, c)| *c);
                    for k in 0..3 {
                        acc[k] += color[k];
                    }
                }
            }
            for c in acc {
                let v = (0.25 * c * scene.gain).clamp(0.0, 1.0);
                data.push((v * 255.0).round() as u8);
            }
        }
    }
    Frame {
        width: size,
        height: size,
        data,
    }
}

/// Writes a binary PPM (P6).
pub fn write_ppm(frame: &Frame, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(frame.data.len() + 32);
    write!(out, "P6\n{} {}\n255\n", frame.width, frame.height).expect("write to Vec");
    out.extend_from_slice(&frame.data);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
