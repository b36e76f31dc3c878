//! Voxelized sensing space and camera coverage.
//!
//! A photo sees a solid cone: apex at the shooting location, axis along the
//! viewing direction, half-angle of half the field of view, cut off at the
//! photo's range. A grid cell counts as seen when its center lies in that
//! cone. The target area is the set of cells seen by at least `threshold`
//! photos.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::photo::{PhotoId, PhotoMeta};

/// Edge length of every grid cell.
pub const CELL_SIZE_M: f64 = 1.0;

/// Absolute slack on the cosine comparison at the cone boundary.
pub const COS_TOLERANCE: f64 = 1e-12;

const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}, {z}) has a non-finite component")]
    NonFinitePoint { x: f64, y: f64, z: f64 },
    #[error("direction ({dx}, {dy}, {dz}) is not a unit vector")]
    NotUnit { dx: f64, dy: f64, dz: f64 },
    #[error("cannot normalize a zero or non-finite direction")]
    DegenerateDirection,
    #[error("grid side count must be positive")]
    EmptyGrid,
    #[error("coverage threshold must be at least 1")]
    ZeroThreshold,
    #[error("no photos supplied for target-area estimation")]
    NoPhotos,
    #[error("no cell reaches coverage threshold {threshold}")]
    EmptyTargetArea { threshold: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let p = Point3 { x, y, z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.x.is_finite() && self.y.is_finite() && self.z.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::NonFinitePoint {
                x: self.x,
                y: self.y,
                z: self.z,
            })
        }
    }

    pub fn offset(&self, dx: f64, dy: f64, dz: f64) -> Point3 {
        Point3 {
            x: self.x + dx,
            y: self.y + dy,
            z: self.z + dz,
        }
    }

    /// Vector from `self` to `other`.
    pub fn to(&self, other: &Point3) -> [f64; 3] {
        [other.x - self.x, other.y - self.y, other.z - self.z]
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        norm(self.to(other))
    }
}

/// Unit viewing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction3 {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Direction3 {
    pub const X: Direction3 = Direction3 {
        dx: 1.0,
        dy: 0.0,
        dz: 0.0,
    };
    pub const Y: Direction3 = Direction3 {
        dx: 0.0,
        dy: 1.0,
        dz: 0.0,
    };
    pub const Z: Direction3 = Direction3 {
        dx: 0.0,
        dy: 0.0,
        dz: 1.0,
    };

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(dx: f64, dy: f64, dz: f64) -> Result<Self, GeometryError> {
        let n = norm([dx, dy, dz]);
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::DegenerateDirection);
        }
        Ok(Direction3 {
            dx: dx / n,
            dy: dy / n,
            dz: dz / n,
        })
    }

    pub fn towards(from: &Point3, to: &Point3) -> Result<Self, GeometryError> {
        let [dx, dy, dz] = from.to(to);
        Self::normalized(dx, dy, dz)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = norm([self.dx, self.dy, self.dz]);
        if n.is_finite() && (n - 1.0).abs() <= UNIT_NORM_TOLERANCE {
            Ok(())
        } else {
            Err(GeometryError::NotUnit {
                dx: self.dx,
                dy: self.dy,
                dz: self.dz,
            })
        }
    }

    /// Azimuth in the x-y plane, radians in (-pi, pi].
    pub fn azimuth(&self) -> f64 {
        self.dy.atan2(self.dx)
    }

    /// Elevation above the x-y plane, radians in [-pi/2, pi/2].
    pub fn elevation(&self) -> f64 {
        self.dz.clamp(-1.0, 1.0).asin()
    }

    fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Index triple of one grid cell, each component in `[0, G)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl Cell {
    pub fn new(i: u32, j: u32, k: u32) -> Self {
        Cell { i, j, k }
    }
}

/// Cubic grid of `side_count`³ unit cells anchored at `origin` (the minimum
/// corner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingGrid {
    pub side_count: u32,
    pub origin: Point3,
    /// Number of photos covering each cell, filled by target-area estimation.
    #[serde(skip)]
    coverage_count: Vec<u32>,
}

impl SensingGrid {
    pub fn new(side_count: u32, origin: Point3) -> Result<Self, GeometryError> {
        let grid = SensingGrid {
            side_count,
            origin,
            coverage_count: Vec::new(),
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.side_count == 0 {
            return Err(GeometryError::EmptyGrid);
        }
        self.origin.validate()
    }

    pub fn cell_size(&self) -> f64 {
        CELL_SIZE_M
    }

    pub fn cell_total(&self) -> usize {
        let g = self.side_count as usize;
        g * g * g
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.i < self.side_count && cell.j < self.side_count && cell.k < self.side_count
    }

    pub fn center(&self, cell: Cell) -> Point3 {
        let h = 0.5 * CELL_SIZE_M;
        self.origin.offset(
            cell.i as f64 * CELL_SIZE_M + h,
            cell.j as f64 * CELL_SIZE_M + h,
            cell.k as f64 * CELL_SIZE_M + h,
        )
    }

    /// The cell containing `point`, if it lies inside the grid.
    pub fn cell_of(&self, point: &Point3) -> Option<Cell> {
        let g = self.side_count as f64;
        let idx = |v: f64, o: f64| {
            let t = ((v - o) / CELL_SIZE_M).floor();
            (t >= 0.0 && t < g).then_some(t as u32)
        };
        Some(Cell::new(
            idx(point.x, self.origin.x)?,
            idx(point.y, self.origin.y)?,
            idx(point.z, self.origin.z)?,
        ))
    }

    fn linear(&self, cell: Cell) -> usize {
        let g = self.side_count as usize;
        (cell.i as usize * g + cell.j as usize) * g + cell.k as usize
    }

    /// Coverage count recorded by the last target-area estimation.
    pub fn coverage_count(&self, cell: Cell) -> u32 {
        if self.coverage_count.is_empty() || !self.contains(cell) {
            0
        } else {
            self.coverage_count[self.linear(cell)]
        }
    }

    pub fn reset_counts(&mut self) {
        self.coverage_count.clear();
    }

    /// Every cell in index order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let g = self.side_count;
        (0..g).flat_map(move |i| (0..g).flat_map(move |j| (0..g).map(move |k| Cell::new(i, j, k))))
    }

    /// Cells whose centers may lie within `radius` of `p`, padded by one cell
    /// on each side.
    fn candidate_range(&self, p: &Point3, radius: f64) -> Option<[(u32, u32); 3]> {
        let g = self.side_count as i64;
        let axis = |v: f64, o: f64| -> Option<(u32, u32)> {
            let lo = ((v - radius - o) / CELL_SIZE_M - 0.5).floor() as i64 - 1;
            let hi = ((v + radius - o) / CELL_SIZE_M - 0.5).ceil() as i64 + 1;
            let lo = lo.max(0);
            let hi = hi.min(g - 1);
            (lo <= hi).then_some((lo as u32, hi as u32))
        };
        Some([
            axis(p.x, self.origin.x)?,
            axis(p.y, self.origin.y)?,
            axis(p.z, self.origin.z)?,
        ])
    }
}

/// Whether `point` lies inside the photo's viewing cone.
///
/// The shooting location itself is always covered.
pub fn covers(photo: &PhotoMeta, point: &Point3) -> bool {
    let v = photo.location.to(point);
    let dist = norm(v);
    if dist == 0.0 {
        return true;
    }
    if dist > photo.range_m {
        return false;
    }
    let cos_angle = dot(photo.direction.as_array(), v) / dist;
    cos_angle >= (0.5 * photo.fov_rad).cos() - COS_TOLERANCE
}

/// Cells of `grid` whose centers the photo covers.
pub fn cell_coverage(photo: &PhotoMeta, grid: &SensingGrid) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    let Some([(i0, i1), (j0, j1), (k0, k1)]) = grid.candidate_range(&photo.location, photo.range_m)
    else {
        return out;
    };
    for i in i0..=i1 {
        for j in j0..=j1 {
            for k in k0..=k1 {
                let cell = Cell::new(i, j, k);
                if covers(photo, &grid.center(cell)) {
                    out.insert(cell);
                }
            }
        }
    }
    out
}

/// Estimated target area: cells covered by at least `threshold_used` photos.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetArea {
    pub cells: BTreeSet<Cell>,
    pub threshold_used: u32,
}

impl TargetArea {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Stable 64-bit fingerprint of the cell set (FNV-1a over the sorted
    /// index triples). Used as the identity of the reconstructed model.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for c in &self.cells {
            for v in [c.i, c.j, c.k] {
                for b in v.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Counts coverage of every cell over `photos` and keeps the cells reaching
/// `threshold`. The per-cell counts are left on `grid`.
pub fn estimate_target_area(
    photos: &[PhotoMeta],
    grid: &mut SensingGrid,
    threshold: u32,
) -> Result<TargetArea, GeometryError> {
    if threshold == 0 {
        return Err(GeometryError::ZeroThreshold);
    }
    if photos.is_empty() {
        return Err(GeometryError::NoPhotos);
    }
    let mut counts = vec![0u32; grid.cell_total()];
    for photo in photos {
        for cell in cell_coverage(photo, grid) {
            counts[grid.linear(cell)] += 1;
        }
    }
    let cells: BTreeSet<Cell> = grid
        .cells()
        .filter(|&c| counts[grid.linear(c)] >= threshold)
        .collect();
    grid.coverage_count = counts;
    if cells.is_empty() {
        return Err(GeometryError::EmptyTargetArea { threshold });
    }
    Ok(TargetArea {
        cells,
        threshold_used: threshold,
    })
}

/// Target cells seen by one photo.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSet {
    pub photo_id: PhotoId,
    pub cells: BTreeSet<Cell>,
}

/// Per-photo coverage restricted to the target area, in input order.
pub fn coverage_sets(
    photos: &[PhotoMeta],
    target: &TargetArea,
    grid: &SensingGrid,
) -> Vec<CoverageSet> {
    photos
        .iter()
        .map(|photo| CoverageSet {
            photo_id: photo.photo_id,
            cells: cell_coverage(photo, grid)
                .intersection(&target.cells)
                .copied()
                .collect(),
        })
        .collect()
}
