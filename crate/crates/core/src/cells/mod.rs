//! Cell classifier over colored, temperature-annotated points.
//!
//! The field of view is split into square cells. Each cell collects
//! samples of chromaticity, height above a reference plane and
//! temperature, fits a Gaussian mixture to them, and is scored against a
//! library of mixtures learned on traversable ground.

mod gmm;
mod hdr;
mod library;
mod occlusion;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;

pub use gmm::{
    bhattacharyya, bhattacharyya_gaussian, fit_gmm_bic, fit_gmm_em, gmm_distance, EmFit, EmParams, GaussianComponent,
    GaussianMixture,
};
pub use hdr::{fuse_exposures, fuse_pixel, Exposure, ExposureStack, SATURATION};
pub use library::{read_library, read_library_file, write_library, write_library_file};
pub use occlusion::occlusion_shadows;

use crate::error::{Error, Result};
use crate::geo3d::{GridGeometry, Plane, Point3};
use crate::map::{sensor, Label, PatchLabel, TraversabilityMap};
use crate::rng::indexed_stream;

/// Sample layout: `[r', g', height, temperature]`.
pub const FEATURE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSample {
    pub chroma: (f64, f64),
    /// Meters above the reference plane.
    pub height: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl CellSample {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.chroma.0, self.chroma.1, self.height, self.temperature)
    }
}

/// Normalized `(R/(R+G+B), G/(R+G+B))`; black maps to the gray point.
pub fn chromaticity(rgb: [f64; 3]) -> (f64, f64) {
    let s = rgb[0] + rgb[1] + rgb[2];
    if s > 0.0 {
        (rgb[0] / s, rgb[1] / s)
    } else {
        (1.0 / 3.0, 1.0 / 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureWeights {
    pub w_chroma: f64,
    pub w_height: f64,
    pub w_temp: f64,
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self {
            w_chroma: 0.0,
            w_height: 1.0,
            w_temp: 1.0,
        }
    }
}

impl FeatureWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_chroma, self.w_height, self.w_temp];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("feature weights must be nonnegative"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::param("at least one feature weight must be positive"));
        }
        Ok(())
    }

    pub fn axis_weight(&self, axis: usize) -> f64 {
        match axis {
            0 | 1 => self.w_chroma,
            2 => self.w_height,
            _ => self.w_temp,
        }
    }

    /// Feature axes with a nonzero weight.
    pub fn active_axes(&self) -> Vec<usize> {
        (0..FEATURE_DIM).filter(|&a| self.axis_weight(a) > 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Traversable,
    NotTraversable,
    /// Not traversable because it lies behind a blocked cell.
    Occluded,
    Unknown,
}

impl CellLabel {
    pub fn to_label(self) -> Label {
        match self {
            CellLabel::Traversable => Label::Ground,
            CellLabel::NotTraversable => Label::NonGround,
            CellLabel::Occluded => Label::Occluded,
            CellLabel::Unknown => Label::Unknown,
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellLabel::Traversable => "traversable",
            CellLabel::NotTraversable => "not_traversable",
            CellLabel::Occluded => "occluded",
            CellLabel::Unknown => "unknown",
        })
    }
}

impl FromStr for CellLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traversable" => Ok(CellLabel::Traversable),
            "not_traversable" => Ok(CellLabel::NotTraversable),
            "occluded" => Ok(CellLabel::Occluded),
            "unknown" => Ok(CellLabel::Unknown),
            other => Err(Error::param(format!("unknown cell label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub cell_size: f64,
    /// Cells with fewer usable samples stay unknown.
    pub min_samples: usize,
    /// Largest score still classified traversable.
    pub threshold: f64,
    pub weights: FeatureWeights,
    /// Samples higher than this above the reference plane pass over the
    /// vehicle and are ignored.
    pub clearance: f64,
    pub k_max: usize,
    pub em: EmParams,
    /// Library entries closer than this to an earlier entry are dropped.
    pub dedup_distance: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            cell_size: 0.6,
            min_samples: 20,
            threshold: 0.25,
            weights: FeatureWeights::default(),
            clearance: 2.5,
            k_max: 3,
            em: EmParams::default(),
            dedup_distance: 0.05,
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::param("cell size must be positive"));
        }
        if self.min_samples == 0 {
            return Err(Error::param("min_samples must be at least 1"));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::param("cell threshold must be nonnegative"));
        }
        if !(self.clearance > 0.0) {
            return Err(Error::param("clearance must be positive"));
        }
        if self.k_max == 0 {
            return Err(Error::param("k_max must be at least 1"));
        }
        if !(self.dedup_distance >= 0.0) {
            return Err(Error::param("dedup distance must be nonnegative"));
        }
        self.weights.validate()?;
        self.em.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub geometry: GridGeometry,
    pub samples: Vec<Vec<CellSample>>,
    pub labels: Vec<CellLabel>,
    pub mixtures: Vec<Option<GaussianMixture>>,
    pub scores: Vec<Option<f64>>,
}

impl CellGrid {
    pub fn new(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            samples: vec![Vec::new(); n],
            labels: vec![CellLabel::Unknown; n],
            mixtures: vec![None; n],
            scores: vec![None; n],
        }
    }

    /// Single-sensor traversability map, with scores carried over.
    pub fn to_map(&self) -> TraversabilityMap {
        let cells = self
            .labels
            .iter()
            .zip(&self.scores)
            .map(|(l, s)| PatchLabel {
                label: l.to_label(),
                score: *s,
            })
            .collect();
        TraversabilityMap::from_labels(self.geometry, cells, sensor::THERMAL).expect("grid and labels share a size")
    }
}

/// Adds one sample per point to the cell containing its `(x, y)`. Points
/// outside the grid are skipped and counted in the return value.
pub fn accumulate_cell_samples(grid: &mut CellGrid, points: &[Point3], plane: &Plane) -> Result<usize> {
    let mut outside = 0;
    for p in points {
        let temperature = p
            .temperature
            .ok_or_else(|| Error::param("cell samples need a temperature on every point"))?;
        if !(temperature > 0.0) {
            return Err(Error::param(format!("temperature {temperature} K is not positive")));
        }
        let Some(i) = grid.geometry.locate_index(p.x, p.y) else {
            outside += 1;
            continue;
        };
        grid.samples[i].push(CellSample {
            chroma: p.color.map(chromaticity).unwrap_or((1.0 / 3.0, 1.0 / 3.0)),
            height: plane.signed_distance(p.x, p.y, p.z),
            temperature,
        });
    }
    Ok(outside)
}

/// Samples of a cell that lie at or below the clearance height.
pub fn usable_samples(samples: &[CellSample], clearance: f64) -> Vec<CellSample> {
    samples.iter().filter(|s| s.height <= clearance).cloned().collect()
}

/// Fits a BIC-selected mixture to every cell with enough usable samples;
/// other cells lose any previous fit. Each cell draws from its own RNG
/// stream so results do not depend on evaluation order.
pub fn fit_cells(grid: &mut CellGrid, params: &CellParams, seed: u64) -> Result<()> {
    params.validate()?;
    for i in 0..grid.geometry.len() {
        let usable = usable_samples(&grid.samples[i], params.clearance);
        grid.mixtures[i] = if usable.len() >= params.min_samples {
            let mut rng = indexed_stream(seed, "cells.em", i as u64);
            Some(fit_gmm_bic(&usable, params.k_max, &params.weights, &params.em, &mut rng)?.mixture)
        } else {
            None
        };
    }
    Ok(())
}

/// Lowest mixture distance from `mixture` to any library entry.
pub fn library_score(mixture: &GaussianMixture, library: &[GaussianMixture], weights: &FeatureWeights) -> Result<f64> {
    let mut best = f64::INFINITY;
    for entry in library {
        best = best.min(gmm_distance(mixture, entry, weights)?);
    }
    Ok(best)
}

/// Scores each fitted cell against the library; a cell is traversable when
/// its score is at most the threshold. Unfitted cells become unknown.
pub fn classify_cells(grid: &mut CellGrid, library: &[GaussianMixture], params: &CellParams) -> Result<()> {
    params.validate()?;
    if library.is_empty() {
        return Err(Error::Configuration("the cell library is empty".into()));
    }
    for i in 0..grid.geometry.len() {
        match &grid.mixtures[i] {
            Some(m) => {
                let s = library_score(m, library, &params.weights)?;
                grid.scores[i] = Some(s);
                grid.labels[i] = if s <= params.threshold {
                    CellLabel::Traversable
                } else {
                    CellLabel::NotTraversable
                };
            }
            None => {
                grid.scores[i] = None;
                grid.labels[i] = CellLabel::Unknown;
            }
        }
    }
    Ok(())
}

/// Builds a library from fitted cells of driven-over (traversable) grids.
/// A candidate closer than `dedup_distance` to an entry already kept is
/// dropped.
pub fn train_library(grids: &[CellGrid], params: &CellParams) -> Result<Vec<GaussianMixture>> {
    params.validate()?;
    let mut library: Vec<GaussianMixture> = Vec::new();
    let mut seen = 0;
    for m in grids.iter().flat_map(|g| g.mixtures.iter().flatten()) {
        seen += 1;
        let mut duplicate = false;
        for entry in &library {
            if gmm_distance(m, entry, &params.weights)? < params.dedup_distance {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            library.push(m.clone());
        }
    }
    if seen == 0 {
        return Err(Error::InsufficientTraining("no fitted cells in the training grids".into()));
    }
    Ok(library)
}

/// Applies [`occlusion_shadows`] to the grid labels.
pub fn mark_occlusion_shadows(grid: &mut CellGrid, sensor_origin: (f64, f64)) {
    grid.labels = occlusion_shadows(&grid.geometry, &grid.labels, sensor_origin);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> CellGrid {
        CellGrid::new(GridGeometry::new((0.0, 0.0), 0.6, 4, 4).unwrap())
    }

    #[test]
    fn sample_placement_and_chroma() {
        let mut g = grid();
        let p = Point3::new(0.3, 0.3, 0.2).with_color([0.5, 0.5, 0.5]).with_temperature(290.0);
        let outside = accumulate_cell_samples(&mut g, &[p, Point3::new(-1.0, 0.0, 0.0).with_temperature(290.0)], &Plane::horizontal(0.0)).unwrap();
        assert_eq!(outside, 1);
        assert_eq!(g.samples[g.geometry.index(0, 0)].len(), 1);
        let s = g.samples[0][0];
        assert!((s.chroma.0 - 1.0 / 3.0).abs() < 1e-15 && (s.chroma.1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.height - 0.2).abs() < 1e-15);
        assert!(accumulate_cell_samples(&mut g, &[Point3::new(0.1, 0.1, 0.0)], &Plane::horizontal(0.0)).is_err());
    }

    #[test]
    fn binning_matches_brute_force() {
        let mut rng = stream(9, "cells.binning");
        let geometry = GridGeometry::new((-3.0, 0.0), 0.6, 10, 10).unwrap();
        let mut g = CellGrid::new(geometry);
        let pts: Vec<Point3> = (0..10_000)
            .map(|_| Point3::new(rng.gen_range(-3.5..3.5), rng.gen_range(-0.5..6.5), 0.0).with_temperature(290.0))
            .collect();
        accumulate_cell_samples(&mut g, &pts, &Plane::horizontal(0.0)).unwrap();
        let mut counts = vec![0usize; geometry.len()];
        for p in &pts {
            for i in 0..geometry.len() {
                let (r, c) = geometry.row_col(i);
                let (x0, y0, x1, y1) = geometry.cell_bounds(r, c);
                let last_c = c + 1 == geometry.n_cols;
                let last_r = r + 1 == geometry.n_rows;
                let in_x = p.x >= x0 && (p.x < x1 || (last_c && p.x <= x1));
                let in_y = p.y >= y0 && (p.y < y1 || (last_r && p.y <= y1));
                if in_x && in_y {
                    counts[i] += 1;
                    break;
                }
            }
        }
        let got: Vec<usize> = g.samples.iter().map(|s| s.len()).collect();
        assert_eq!(got, counts);
    }

    fn crop_cell(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<CellSample> {
        let temp = Normal::new(288.0, 0.5).unwrap();
        (0..n)
            .map(|_| CellSample {
                chroma: (rng.gen_range(0.2..0.3), rng.gen_range(0.4..0.5)),
                height: rng.gen_range(0.0..2.0),
                temperature: temp.sample(rng),
            })
            .collect()
    }

    #[test]
    fn classify_train_and_recolor_invariance() {
        let mut rng = stream(10, "cells.classify");
        let params = CellParams::default();
        let mut train = grid();
        for i in 0..4 {
            train.samples[i] = crop_cell(&mut rng, 300);
        }
        fit_cells(&mut train, &params, 1).unwrap();
        let library = train_library(std::slice::from_ref(&train), &params).unwrap();
        assert!(!library.is_empty() && library.len() <= 4);

        let mut test = grid();
        test.samples[5] = crop_cell(&mut rng, 300);
        let mut warm = crop_cell(&mut rng, 240);
        warm.extend((0..60).map(|_| CellSample {
            chroma: (0.4, 0.3),
            height: rng.gen_range(0.3..1.2),
            temperature: 310.0 + rng.gen_range(-0.5..0.5),
        }));
        test.samples[6] = warm;
        test.samples[7] = crop_cell(&mut rng, 5);
        fit_cells(&mut test, &params, 2).unwrap();
        classify_cells(&mut test, &library, &params).unwrap();
        assert_eq!(test.labels[5], CellLabel::Traversable, "{:?}", test.scores[5]);
        assert_eq!(test.labels[6], CellLabel::NotTraversable, "{:?}", test.scores[6]);
        assert_eq!(test.labels[7], CellLabel::Unknown);

        let mut recolored = test.clone();
        for s in recolored.samples.iter_mut().flatten() {
            s.chroma = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5));
        }
        fit_cells(&mut recolored, &params, 2).unwrap();
        classify_cells(&mut recolored, &library, &params).unwrap();
        assert_eq!(recolored.labels, test.labels);
        assert_eq!(recolored.scores, test.scores);
    }

    #[test]
    fn library_rules() {
        let mut rng = stream(11, "cells.library");
        let params = CellParams::default();
        let mut one = grid();
        one.samples[0] = crop_cell(&mut rng, 100);
        fit_cells(&mut one, &params, 3).unwrap();
        assert_eq!(train_library(std::slice::from_ref(&one), &params).unwrap().len(), 1);
        let mut twins = one.clone();
        twins.samples[1] = one.samples[0].clone();
        fit_cells(&mut twins, &params, 3).unwrap();
        assert_eq!(train_library(&[twins], &params).unwrap().len(), 1);
        assert!(matches!(train_library(&[grid()], &params), Err(Error::InsufficientTraining(_))));
        let mut g = one.clone();
        assert!(matches!(classify_cells(&mut g, &[], &params), Err(Error::Configuration(_))));
    }

    #[test]
    fn identical_mixture_scores_zero() {
        let mut rng = stream(12, "cells.identity");
        let params = CellParams::default();
        let mut g = grid();
        g.samples[3] = crop_cell(&mut rng, 100);
        fit_cells(&mut g, &params, 4).unwrap();
        let lib = vec![g.mixtures[3].clone().unwrap()];
        classify_cells(&mut g, &lib, &params).unwrap();
        assert_eq!(g.scores[3], Some(0.0));
        assert_eq!(g.labels[3], CellLabel::Traversable);
    }

    #[test]
    fn clearance_gate_drops_high_samples() {
        let s = |h| CellSample { chroma: (0.3, 0.3), height: h, temperature: 290.0 };
        let kept = usable_samples(&[s(0.0), s(2.5), s(2.5000001), s(4.0)], 2.5);
        assert_eq!(kept.len(), 2);
    }
}
