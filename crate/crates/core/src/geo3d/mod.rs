//! Point-cloud geometry: voxel downsampling, horizontal patch gridding,
//! total-least-squares plane fitting and per-patch geometric features.

mod format;

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub use format::{read_points, read_points_file, write_points, write_points_file};

/// A point in the vehicle frame (x forward, y left, z up), meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// RGB in [0, 1].
    pub color: Option<[f64; 3]>,
    /// Kelvin.
    pub temperature: Option<f64>,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            color: None,
            temperature: None,
        }
    }

    pub fn with_color(mut self, rgb: [f64; 3]) -> Self {
        self.color = Some(rgb);
        self
    }

    pub fn with_temperature(mut self, kelvin: f64) -> Self {
        self.temperature = Some(kelvin);
        self
    }

    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Checks the point invariants: finite coordinates, colors in [0,1],
    /// positive temperature.
    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::param("non-finite point coordinate"));
        }
        if let Some(c) = self.color {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::param("color channel outside [0, 1]"));
            }
        }
        if let Some(t) = self.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param("temperature must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_id: u64) -> Self {
        Self { points, frame_id }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridParams {
    pub voxel_size: f64,
}

impl Default for VoxelGridParams {
    fn default() -> Self {
        Self { voxel_size: 0.1 }
    }
}

#[derive(Default)]
struct VoxelAccumulator {
    sum: [f64; 3],
    count: usize,
    color_sum: [f64; 3],
    colored: usize,
    temp_sum: f64,
    heated: usize,
}

/// Replaces the points of every occupied voxel with their centroid.
///
/// Output order follows the first appearance of each voxel in the input.
pub fn voxel_downsample(cloud: &PointCloud, params: VoxelGridParams) -> Result<PointCloud> {
    let size = params.voxel_size;
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::param(format!("voxel_size must be > 0, got {size}")));
    }
    let mut slots: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut accs: Vec<VoxelAccumulator> = Vec::new();
    for p in &cloud.points {
        let key = (
            (p.x / size).floor() as i64,
            (p.y / size).floor() as i64,
            (p.z / size).floor() as i64,
        );
        let slot = *slots.entry(key).or_insert_with(|| {
            accs.push(VoxelAccumulator::default());
            accs.len() - 1
        });
        let acc = &mut accs[slot];
        acc.sum[0] += p.x;
        acc.sum[1] += p.y;
        acc.sum[2] += p.z;
        acc.count += 1;
        if let Some(c) = p.color {
            for k in 0..3 {
                acc.color_sum[k] += c[k];
            }
            acc.colored += 1;
        }
        if let Some(t) = p.temperature {
            acc.temp_sum += t;
            acc.heated += 1;
        }
    }
    let points = accs
        .into_iter()
        .map(|acc| {
            let n = acc.count as f64;
            let color = (acc.colored == acc.count).then(|| {
                [
                    (acc.color_sum[0] / n).clamp(0.0, 1.0),
                    (acc.color_sum[1] / n).clamp(0.0, 1.0),
                    (acc.color_sum[2] / n).clamp(0.0, 1.0),
                ]
            });
            let temperature = (acc.heated == acc.count).then(|| acc.temp_sum / n);
            Point3 {
                x: acc.sum[0] / n,
                y: acc.sum[1] / n,
                z: acc.sum[2] / n,
                color,
                temperature,
            }
        })
        .collect();
    Ok(PointCloud::new(points, cloud.frame_id))
}

/// Geometry of a horizontal grid: columns run along x, rows along y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

fn axis_index(v: f64, origin: f64, size: f64, n: usize) -> Option<usize> {
    let q = (v - origin) / size;
    if !q.is_finite() {
        return None;
    }
    let mut i = q.floor();
    // Division can land just below an exact edge; a point on an edge
    // belongs to the higher-index cell.
    if origin + (i + 1.0) * size <= v {
        i += 1.0;
    } else if origin + i * size > v {
        i -= 1.0;
    }
    if i < 0.0 || i >= n as f64 {
        None
    } else {
        Some(i as usize)
    }
}

impl GridGeometry {
    pub fn new(origin: (f64, f64), cell_size: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::param(format!("cell size must be > 0, got {cell_size}")));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::param("grid needs at least one row and one column"));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::param("grid origin must be finite"));
        }
        Ok(Self {
            origin,
            cell_size,
            n_rows,
            n_cols,
        })
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.n_cols, index % self.n_cols)
    }

    /// (row, col) of the cell containing (x, y), if inside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = axis_index(x, self.origin.0, self.cell_size, self.n_cols)?;
        let row = axis_index(y, self.origin.1, self.cell_size, self.n_rows)?;
        Some((row, col))
    }

    pub fn locate_index(&self, x: f64, y: f64) -> Option<usize> {
        self.locate(x, y).map(|(r, c)| self.index(r, c))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// (x_min, y_min, x_max, y_max) of a cell.
    pub fn cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let x0 = self.origin.0 + col as f64 * self.cell_size;
        let y0 = self.origin.1 + row as f64 * self.cell_size;
        (x0, y0, x0 + self.cell_size, y0 + self.cell_size)
    }
}

/// Points of a cloud partitioned into horizontal terrain patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub geometry: GridGeometry,
    /// Member point indices per cell, row-major.
    pub patches: Vec<Vec<usize>>,
    /// Points that fell outside the grid.
    pub dropped: usize,
}

impl PatchGrid {
    pub fn patch(&self, row: usize, col: usize) -> &[usize] {
        &self.patches[self.geometry.index(row, col)]
    }

    pub fn patch_points(&self, cloud: &PointCloud, index: usize) -> Vec<Point3> {
        self.patches[index].iter().map(|&i| cloud.points[i]).collect()
    }
}

pub fn build_patch_grid(
    cloud: &PointCloud,
    origin: (f64, f64),
    patch_size: f64,
    n_rows: usize,
    n_cols: usize,
) -> Result<PatchGrid> {
    let geometry = GridGeometry::new(origin, patch_size, n_rows, n_cols)?;
    Ok(grid_points(cloud, geometry))
}

pub fn grid_points(cloud: &PointCloud, geometry: GridGeometry) -> PatchGrid {
    let mut patches = vec![Vec::new(); geometry.len()];
    let mut dropped = 0;
    for (i, p) in cloud.points.iter().enumerate() {
        match geometry.locate_index(p.x, p.y) {
            Some(idx) => patches[idx].push(i),
            None => dropped += 1,
        }
    }
    PatchGrid {
        geometry,
        patches,
        dropped,
    }
}

/// Plane `normal · p = offset` with a unit, upward-oriented normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    /// The horizontal plane z = `height`.
    pub fn horizontal(height: f64) -> Self {
        Self {
            normal: Vector3::z(),
            offset: height,
        }
    }

    pub fn signed_distance(&self, x: f64, y: f64, z: f64) -> f64 {
        self.normal.dot(&Vector3::new(x, y, z)) - self.offset
    }
}

fn orient(mut n: Vector3<f64>) -> Vector3<f64> {
    let flip = if n.z != 0.0 {
        n.z < 0.0
    } else if n.x != 0.0 {
        n.x < 0.0
    } else {
        n.y < 0.0
    };
    if flip {
        n = -n;
    }
    n
}

/// Total-least-squares plane: normal is the eigenvector of the smallest
/// eigenvalue of the centered scatter matrix.
pub fn fit_plane_lsq(points: &[Point3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "plane fit needs 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points.iter().map(Point3::xyz).sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.xyz() - centroid;
        scatter += d * d.transpose();
    }
    scatter /= n;
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(hi > 0.0) || mid <= 1e-12 * hi {
        return Err(Error::DegenerateGeometry(
            "points are coincident or collinear".into(),
        ));
    }
    debug_assert!(lo <= mid);
    let normal = orient(eig.eigenvectors.column(order[0]).normalize());
    Ok(Plane {
        normal,
        offset: normal.dot(&centroid),
    })
}

/// Geometric statistics of one terrain patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoFeatures {
    pub n_points: usize,
    pub mean_height: f64,
    pub height_std: f64,
    pub height_range: f64,
    pub normal_z: f64,
    pub fit_residual: f64,
    /// Fewer than three points, or collinear: plane fields hold the
    /// flat fallback (normal_z = 0, fit_residual = height_std).
    pub degenerate: bool,
}

impl GeoFeatures {
    /// The classifier feature vector, in fixed order.
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.mean_height,
            self.height_std,
            self.height_range,
            self.normal_z,
            self.fit_residual,
        ]
    }
}

pub fn compute_patch_features(points: &[Point3]) -> Result<GeoFeatures> {
    if points.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.z).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.z - mean).powi(2)).sum::<f64>() / n;
    let height_std = var.sqrt();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.z), hi.max(p.z))
        });
    let (normal_z, fit_residual, degenerate) = match fit_plane_lsq(points) {
        Ok(plane) => {
            let ms = points
                .iter()
                .map(|p| plane.signed_distance(p.x, p.y, p.z).powi(2))
                .sum::<f64>()
                / n;
            (plane.normal.z.clamp(0.0, 1.0), ms.sqrt(), false)
        }
        Err(_) => (0.0, height_std, true),
    };
    Ok(GeoFeatures {
        n_points: points.len(),
        mean_height: mean,
        height_std,
        height_range: hi - lo,
        normal_z,
        fit_residual,
        degenerate,
    })
}
