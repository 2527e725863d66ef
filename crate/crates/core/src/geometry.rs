//! Network layout: hexagonal cells, tiered sub-array placement, random user
//! drops, and distance-dependent large-scale gains.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

/// Rejection-sampling retry cap per user position.
const MAX_SAMPLING_ATTEMPTS: usize = 100_000;

/// A 2-D coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` towards `other`, in radians.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// The generated network layout.
///
/// Immutable after construction; coordinates are meter-valued floats so the
/// whole structure serializes cleanly to JSON for golden-file tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub cell_centers: Vec<Point>,
    /// Indexed `[cell][subarray]`.
    pub subarray_positions: Vec<Vec<Point>>,
    /// Indexed `[cell][user]`.
    pub user_positions: Vec<Vec<Point>>,
}

/// True when `p` lies inside the hexagon of circumradius `radius` centered at
/// `center`, oriented with vertical edges left and right (vertices at
/// 30 + 60k degrees).
pub fn in_hexagon(p: &Point, center: &Point, radius: f64) -> bool {
    let x = (p.x - center.x).abs();
    let y = (p.y - center.y).abs();
    x <= 3f64.sqrt() / 2.0 * radius && x / 3f64.sqrt() + y <= radius
}

/// Cell centers for `cells` hexagons of circumradius `radius` laid out in a
/// row of edge-sharing neighbours along the x axis.
pub fn cell_centers(cells: usize, radius: f64) -> Vec<Point> {
    let pitch = 3f64.sqrt() * radius;
    (0..cells).map(|l| Point::new(l as f64 * pitch, 0.0)).collect()
}

/// Places the N sub-arrays of one cell.
///
/// A single sub-array sits at the cell center. Otherwise positions fill
/// concentric rings: ring t (t = 1, 2, ...) has radius `subarray_offset * t`
/// and capacity 6t. The points assigned to a ring are equally spaced in
/// angle, with ring t rotated by pi / (6t) so consecutive tiers interleave.
pub fn place_subarrays(config: &NetworkConfig, cell_center: Point) -> Vec<Point> {
    let n = config.subarrays_per_cell;
    if n == 1 {
        return vec![cell_center];
    }
    let mut positions = Vec::with_capacity(n);
    let mut remaining = n;
    let mut tier = 1usize;
    while remaining > 0 {
        let count = remaining.min(6 * tier);
        let radius = config.subarray_offset * tier as f64;
        let rotation = std::f64::consts::PI / (6.0 * tier as f64);
        for i in 0..count {
            let angle = rotation + 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            positions.push(Point::new(
                cell_center.x + radius * angle.cos(),
                cell_center.y + radius * angle.sin(),
            ));
        }
        remaining -= count;
        tier += 1;
    }
    positions
}

/// Draws K user positions per cell, uniform over each cell's hexagon minus
/// the exclusion disks of radius `min_user_distance` around every sub-array.
pub fn drop_users<R: Rng>(
    config: &NetworkConfig,
    centers: &[Point],
    subarrays: &[Vec<Point>],
    rng: &mut R,
) -> Result<Vec<Vec<Point>>> {
    let half_width = 3f64.sqrt() / 2.0 * config.cell_radius;
    let mut users = Vec::with_capacity(centers.len());
    for (cell, center) in centers.iter().enumerate() {
        let mut cell_users = Vec::with_capacity(config.users_per_cell);
        for _ in 0..config.users_per_cell {
            let mut attempts = 0;
            let p = loop {
                attempts += 1;
                if attempts > MAX_SAMPLING_ATTEMPTS {
                    return Err(Error::SamplingExhausted {
                        cell,
                        attempts: MAX_SAMPLING_ATTEMPTS,
                    });
                }
                let candidate = Point::new(
                    center.x + (rng.random::<f64>() * 2.0 - 1.0) * half_width,
                    center.y + (rng.random::<f64>() * 2.0 - 1.0) * config.cell_radius,
                );
                if !in_hexagon(&candidate, center, config.cell_radius) {
                    continue;
                }
                let clear = subarrays.iter().flatten().all(|s| {
                    candidate.distance(s) >= config.min_user_distance
                });
                if clear {
                    break candidate;
                }
            };
            cell_users.push(p);
        }
        users.push(cell_users);
    }
    Ok(users)
}

/// Large-scale gain beta = (d / 1 m)^-kappa.
pub fn large_scale_gain(distance: f64, path_loss_exponent: f64) -> Result<f64> {
    if distance <= 0.0 {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(distance.powf(-path_loss_exponent))
}

/// Generates the full layout for one drop.
pub fn build_layout<R: Rng>(config: &NetworkConfig, rng: &mut R) -> Result<Layout> {
    config.validate()?;
    let centers = cell_centers(config.cells, config.cell_radius);
    let subarrays: Vec<Vec<Point>> = centers
        .iter()
        .map(|c| place_subarrays(config, *c))
        .collect();
    let users = drop_users(config, &centers, &subarrays, rng)?;
    Ok(Layout {
        cell_centers: centers,
        subarray_positions: subarrays,
        user_positions: users,
    })
}
