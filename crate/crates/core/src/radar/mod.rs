//! Fan-beam radar obstacle localization.
//!
//! Pipeline: CFAR detection on the polar image, projection of detections
//! onto a Cartesian grid, morphological cleanup, then connected components
//! with convex hull and centroid per obstacle.

mod cfar;
mod format;
pub mod hull;
mod morph;

use std::f64::consts::TAU;

pub use cfar::{cfar_alpha, cfar_threshold, CfarParams};
pub use format::{read_radar_image, read_radar_image_file, write_pgm, write_radar_image, write_radar_image_file};
pub use morph::{close, components, dilate, disk_offsets, erode, morph_filter, open, remove_small_components};

use crate::error::{Error, Result};
use crate::geo3d::GridGeometry;

/// Polar intensity image. Row `i` is range bin `i` covering
/// `[min_range + i·res, min_range + (i+1)·res)`; column `j` is the azimuth
/// bin centered on `j·Δ`, with `Δ = 2π / azimuth_bins` and azimuth measured
/// counter-clockwise from +x.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImage {
    pub intensities: Vec<f64>,
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub range_resolution: f64,
    pub min_range: f64,
}

impl RadarImage {
    pub fn new(
        intensities: Vec<f64>,
        range_bins: usize,
        azimuth_bins: usize,
        range_resolution: f64,
        min_range: f64,
    ) -> Result<Self> {
        if range_bins == 0 || azimuth_bins == 0 {
            return Err(Error::param("radar image needs at least one bin per axis"));
        }
        if intensities.len() != range_bins * azimuth_bins {
            return Err(Error::param(format!(
                "{} intensities for a {range_bins}x{azimuth_bins} image",
                intensities.len()
            )));
        }
        if !(range_resolution > 0.0 && range_resolution.is_finite()) {
            return Err(Error::param("range resolution must be positive"));
        }
        if !(min_range >= 0.0 && min_range.is_finite()) {
            return Err(Error::param("min range must be nonnegative"));
        }
        if let Some(v) = intensities.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::param(format!("radar intensity {v} is not a nonnegative number")));
        }
        Ok(Self {
            intensities,
            range_bins,
            azimuth_bins,
            range_resolution,
            min_range,
        })
    }

    pub fn zeros(range_bins: usize, azimuth_bins: usize, range_resolution: f64, min_range: f64) -> Result<Self> {
        Self::new(
            vec![0.0; range_bins * azimuth_bins],
            range_bins,
            azimuth_bins,
            range_resolution,
            min_range,
        )
    }

    pub fn max_range(&self) -> f64 {
        self.min_range + self.range_bins as f64 * self.range_resolution
    }

    pub fn azimuth_resolution(&self) -> f64 {
        TAU / self.azimuth_bins as f64
    }

    #[inline]
    pub fn at(&self, range_bin: usize, azimuth_bin: usize) -> f64 {
        self.intensities[range_bin * self.azimuth_bins + azimuth_bin]
    }

    #[inline]
    pub fn at_mut(&mut self, range_bin: usize, azimuth_bin: usize) -> &mut f64 {
        &mut self.intensities[range_bin * self.azimuth_bins + azimuth_bin]
    }

    pub fn range_center(&self, range_bin: usize) -> f64 {
        self.min_range + (range_bin as f64 + 0.5) * self.range_resolution
    }

    pub fn azimuth_center(&self, azimuth_bin: usize) -> f64 {
        azimuth_bin as f64 * self.azimuth_resolution()
    }

    /// Polar bin containing the point `(x, y)`, if it lies in the annulus.
    pub fn bin_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let r = x.hypot(y);
        if !(r >= self.min_range && r < self.max_range()) {
            return None;
        }
        let i = (((r - self.min_range) / self.range_resolution).floor() as usize).min(self.range_bins - 1);
        let d = self.azimuth_resolution();
        let theta = y.atan2(x).rem_euclid(TAU);
        let j = ((theta + 0.5 * d) / d).floor() as usize % self.azimuth_bins;
        Some((i, j))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.intensities.iter().map(|v| v * c).collect(),
            self.range_bins,
            self.azimuth_bins,
            self.range_resolution,
            self.min_range,
        )
    }
}

/// Boolean mask over the bins of a [`RadarImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarMask {
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub cells: Vec<bool>,
}

impl PolarMask {
    pub fn new(range_bins: usize, azimuth_bins: usize) -> Self {
        Self {
            range_bins,
            azimuth_bins,
            cells: vec![false; range_bins * azimuth_bins],
        }
    }

    #[inline]
    pub fn get(&self, range_bin: usize, azimuth_bin: usize) -> bool {
        self.cells[range_bin * self.azimuth_bins + azimuth_bin]
    }

    #[inline]
    pub fn set(&mut self, range_bin: usize, azimuth_bin: usize, v: bool) {
        self.cells[range_bin * self.azimuth_bins + azimuth_bin] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }
}

/// Boolean raster on a horizontal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![false; geometry.len()],
            geometry,
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn with_cells(&self, cells: Vec<bool>) -> Self {
        debug_assert_eq!(cells.len(), self.cells.len());
        Self {
            geometry: self.geometry,
            cells,
        }
    }
}

/// Square Cartesian resampling of a polar image, centered on the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianRadarGrid {
    pub geometry: GridGeometry,
    /// Half-width of the square, in meters.
    pub extent: f64,
    /// Intensity per cell; zero where invalid.
    pub intensities: Vec<f64>,
    /// Source polar bin (`range_bin * azimuth_bins + azimuth_bin`) of each
    /// valid cell; `None` outside the annulus.
    pub source: Vec<Option<usize>>,
}

impl CartesianRadarGrid {
    pub fn cell_size(&self) -> f64 {
        self.geometry.cell_size
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.source[index].is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.source.iter().filter(|s| s.is_some()).count()
    }
}

/// Nearest-neighbor resampling covering the full annulus.
pub fn polar_to_cartesian(img: &RadarImage, cell_size: f64) -> Result<CartesianRadarGrid> {
    polar_to_cartesian_extent(img, cell_size, img.max_range())
}

/// Nearest-neighbor resampling restricted to the square `[-extent, extent]²`.
/// Each cell takes the intensity of the polar bin containing its center.
pub fn polar_to_cartesian_extent(img: &RadarImage, cell_size: f64, extent: f64) -> Result<CartesianRadarGrid> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::param("cell size must be positive"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::param("extent must be positive"));
    }
    let n = (2.0 * extent / cell_size).ceil() as usize;
    let geometry = GridGeometry::new((-extent, -extent), cell_size, n, n)?;
    let mut intensities = vec![0.0; geometry.len()];
    let mut source = vec![None; geometry.len()];
    for idx in 0..geometry.len() {
        let (r, c) = geometry.row_col(idx);
        let (x, y) = geometry.cell_center(r, c);
        if let Some((i, j)) = img.bin_of(x, y) {
            let s = i * img.azimuth_bins + j;
            source[idx] = Some(s);
            intensities[idx] = img.intensities[s];
        }
    }
    Ok(CartesianRadarGrid {
        geometry,
        extent,
        intensities,
        source,
    })
}

/// Marks each valid Cartesian cell whose source bin was detected.
pub fn project_detections(mask: &PolarMask, grid: &CartesianRadarGrid) -> BinaryGrid {
    let cells = grid
        .source
        .iter()
        .map(|s| s.is_some_and(|s| mask.cells[s]))
        .collect();
    BinaryGrid {
        geometry: grid.geometry,
        cells,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarObstacle {
    /// Counter-clockwise convex hull of the member cell centers.
    pub hull: Vec<(f64, f64)>,
    pub centroid: (f64, f64),
    /// Member count times the cell area.
    pub area: f64,
    pub member_cells: usize,
}

impl RadarObstacle {
    pub fn range(&self) -> f64 {
        self.centroid.0.hypot(self.centroid.1)
    }
}

/// One obstacle per 8-connected component, sorted by centroid range.
pub fn extract_obstacles(grid: &BinaryGrid) -> Vec<RadarObstacle> {
    let g = grid.geometry;
    let mut out: Vec<RadarObstacle> = components(g.n_rows, g.n_cols, &grid.cells)
        .into_iter()
        .map(|members| {
            // Hull on integer lattice coordinates so orientation tests are exact.
            let lattice: Vec<(f64, f64)> = members
                .iter()
                .map(|&i| {
                    let (r, c) = g.row_col(i);
                    (c as f64, r as f64)
                })
                .collect();
            let to_xy = |(c, r): (f64, f64)| {
                (
                    g.origin.0 + (c + 0.5) * g.cell_size,
                    g.origin.1 + (r + 0.5) * g.cell_size,
                )
            };
            let hull = hull::convex_hull(&lattice).into_iter().map(to_xy).collect();
            let n = members.len() as f64;
            let (sc, sr) = lattice.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
            RadarObstacle {
                hull,
                centroid: to_xy((sc / n, sr / n)),
                area: n * g.cell_size * g.cell_size,
                member_cells: members.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.range().total_cmp(&b.range()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    pub cfar: CfarParams,
    /// Cartesian cell size in meters.
    pub cell_size: f64,
    /// Half-width of the Cartesian map; `None` covers the full annulus.
    pub extent: Option<f64>,
    pub open_radius: usize,
    pub min_area: usize,
    pub close_radius: usize,
}

impl Default for RadarParams {
    fn default() -> Self {
        Self {
            cfar: CfarParams::default(),
            cell_size: 0.1,
            extent: None,
            open_radius: 1,
            min_area: 4,
            close_radius: 2,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        self.cfar.validate()?;
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::param("radar cell size must be positive"));
        }
        if let Some(e) = self.extent {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::param("radar map extent must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RadarDetections {
    pub polar: PolarMask,
    pub grid: CartesianRadarGrid,
    /// Detections projected onto the grid, before cleanup.
    pub raw: BinaryGrid,
    /// After opening, small-component removal and closing.
    pub mask: BinaryGrid,
    pub obstacles: Vec<RadarObstacle>,
}

/// Full detection chain from a polar image to a sorted obstacle list.
pub fn detect_obstacles(img: &RadarImage, params: &RadarParams) -> Result<RadarDetections> {
    params.validate()?;
    let polar = cfar_threshold(img, &params.cfar)?;
    let grid = match params.extent {
        Some(e) => polar_to_cartesian_extent(img, params.cell_size, e)?,
        None => polar_to_cartesian(img, params.cell_size)?,
    };
    let raw = project_detections(&polar, &grid);
    let mask = morph_filter(&raw, params.open_radius, params.min_area, params.close_radius);
    let obstacles = extract_obstacles(&mask);
    Ok(RadarDetections {
        polar,
        grid,
        raw,
        mask,
        obstacles,
    })
}
