//! Node placement and the distance-based mean path gain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Placement, ScenarioConfig};

/// Planar coordinate in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Resolve both placement directives into coordinates.
pub fn place_nodes(cfg: &ScenarioConfig) -> Result<(Vec<Point>, Vec<Point>), ConfigError> {
    let es = resolve("es_positions", &cfg.es_positions, cfg.num_ess, cfg.area_side)?;
    let md = resolve("md_positions", &cfg.md_positions, cfg.num_mds, cfg.area_side)?;
    Ok((es, md))
}

fn resolve(field: &str, p: &Placement, n: usize, side: f64) -> Result<Vec<Point>, ConfigError> {
    match p {
        Placement::Grid => Ok(grid(n, side)),
        Placement::Uniform { seed } => Ok(uniform(n, side, *seed)),
        Placement::Explicit(points) => {
            if points.len() != n {
                return Err(ConfigError::InconsistentDimensions {
                    field: field.to_string(),
                    expected: n,
                    found: points.len(),
                });
            }
            for (k, pt) in points.iter().enumerate() {
                let inside = |v: f64| v.is_finite() && (0.0..=side).contains(&v);
                if !(inside(pt.x) && inside(pt.y)) {
                    return Err(ConfigError::Malformed {
                        field: format!("{field}[{k}]"),
                        reason: format!("({}, {}) lies outside [0, {side}]²", pt.x, pt.y),
                    });
                }
            }
            Ok(points.clone())
        }
    }
}

/// Cell centroids of a ⌈√n⌉×⌈√n⌉ partition, filled row-major from the origin.
pub fn grid(n: usize, side: f64) -> Vec<Point> {
    let k = (n as f64).sqrt().ceil().max(1.0) as usize;
    let cell = side / k as f64;
    (0..n)
        .map(|m| {
            let (col, row) = (m % k, m / k);
            Point::new((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell)
        })
        .collect()
}

pub fn uniform(n: usize, side: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * side;
            let y = rng.random::<f64>() * side;
            Point::new(x, y)
        })
        .collect()
}

/// Log-distance path gain g0·(max(d, d0)/d0)^(−α).
pub fn mean_gain(distance: f64, cfg: &ScenarioConfig) -> f64 {
    let d0 = cfg.reference_distance;
    let ratio = distance.max(d0) / d0;
    cfg.reference_gain * ratio.powf(-cfg.pathloss_exponent)
}
