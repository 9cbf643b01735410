//! Self-learning ground classifier.
//!
//! The ground class is modelled by the mean and covariance of a rolling
//! buffer of patch feature vectors. A patch is ground when its squared
//! Mahalanobis distance to the model is within a chi-square quantile. The
//! buffer is seeded from an obstacle-free start region and then refreshed
//! with the patches the model itself labels ground.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::geo3d::{
    compute_patch_features, grid_points, voxel_downsample, GeoFeatures, GridGeometry, PointCloud,
    VoxelGridParams,
};
use crate::map::{Label, PatchLabel, TraversabilityMap};
use crate::textio::{content_lines, parse_field};

/// Dimension of the patch feature vector.
pub const FEATURE_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<&GeoFeatures> for FeatureVector {
    fn from(f: &GeoFeatures) -> Self {
        FeatureVector(f.to_array().to_vec())
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundParams {
    /// Rolling buffer capacity W.
    pub capacity: usize,
    /// Chi-square confidence for the ground threshold.
    pub confidence: f64,
    /// Diagonal regularization added to the covariance.
    pub epsilon: f64,
    /// Patches with fewer points are treated as unobserved.
    pub min_points: usize,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            capacity: 1000,
            confidence: 0.95,
            epsilon: 1e-6,
            min_points: 3,
        }
    }
}

impl GroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon must be > 0"));
        }
        if self.capacity == 0 {
            return Err(Error::param("capacity must be positive"));
        }
        if self.min_points == 0 {
            return Err(Error::param("min_points must be positive"));
        }
        Ok(())
    }
}

/// Squared-distance threshold at the given chi-square confidence.
pub fn chi_square_threshold(dim: usize, confidence: f64) -> Result<f64> {
    let dist = ChiSquared::new(dim as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(dist.inverse_cdf(confidence))
}

#[derive(Debug, Clone)]
pub struct GroundModel {
    dim: usize,
    capacity: usize,
    epsilon: f64,
    threshold: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    buffer: VecDeque<FeatureVector>,
}

fn check_vector(v: &FeatureVector, dim: usize) -> Result<()> {
    if v.dim() != dim {
        return Err(Error::param(format!(
            "feature dimension {} does not match model dimension {dim}",
            v.dim()
        )));
    }
    if v.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("non-finite feature value"));
    }
    Ok(())
}

fn moments(
    buffer: &VecDeque<FeatureVector>,
    dim: usize,
    epsilon: f64,
) -> Result<(DVector<f64>, DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let n = buffer.len() as f64;
    // Shifted accumulation: identical samples give their exact value back.
    let first = DVector::from_column_slice(&buffer[0].0);
    let mut shift = DVector::zeros(dim);
    for v in buffer {
        shift += DVector::from_column_slice(&v.0) - &first;
    }
    let mean = first + shift / n;
    let mut cov = DMatrix::zeros(dim, dim);
    for v in buffer {
        let d = DVector::from_column_slice(&v.0) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    for i in 0..dim {
        cov[(i, i)] += epsilon;
    }
    let factor = Cholesky::new(cov.clone())
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    Ok((mean, cov, factor))
}

impl GroundModel {
    /// Seeds the model from features of an obstacle-free start region.
    /// When more than `capacity` features are given, the most recent ones
    /// are kept.
    pub fn bootstrap(params: GroundParams, features: &[FeatureVector]) -> Result<Self> {
        params.validate()?;
        let dim = features.first().map_or(FEATURE_DIM, FeatureVector::dim);
        if dim == 0 {
            return Err(Error::param("zero-dimensional features"));
        }
        if params.capacity < dim + 1 {
            return Err(Error::param(format!(
                "capacity {} below minimum {}",
                params.capacity,
                dim + 1
            )));
        }
        if features.len() < dim + 1 {
            return Err(Error::InsufficientBootstrap {
                needed: dim + 1,
                got: features.len(),
            });
        }
        for v in features {
            check_vector(v, dim)?;
        }
        let start = features.len().saturating_sub(params.capacity);
        let buffer: VecDeque<FeatureVector> = features[start..].iter().cloned().collect();
        let (mean, covariance, factor) = moments(&buffer, dim, params.epsilon)?;
        Ok(Self {
            dim,
            capacity: params.capacity,
            epsilon: params.epsilon,
            threshold: chi_square_threshold(dim, params.confidence)?,
            mean,
            covariance,
            factor,
            buffer,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(Error::param("threshold must be a nonnegative number"));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn buffer(&self) -> &VecDeque<FeatureVector> {
        &self.buffer
    }

    /// Squared Mahalanobis distance `(x - μ)ᵀ Σ⁻¹ (x - μ)`.
    pub fn mahalanobis_score(&self, x: &FeatureVector) -> Result<f64> {
        check_vector(x, self.dim)?;
        let d = DVector::from_column_slice(&x.0) - &self.mean;
        let y = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::Numeric("singular covariance factor".into()))?;
        Ok(y.norm_squared())
    }

    /// Ground when the score is within the threshold (inclusive).
    pub fn classify_vector(&self, x: &FeatureVector) -> Result<PatchLabel> {
        let score = self.mahalanobis_score(x)?;
        let label = if score <= self.threshold {
            Label::Ground
        } else {
            Label::NonGround
        };
        Ok(PatchLabel::new(label, score))
    }

    /// Labels a patch; empty or degenerate patches are unknown.
    pub fn classify(&self, features: Option<&GeoFeatures>) -> PatchLabel {
        match features {
            Some(f) if !f.degenerate => self
                .classify_vector(&FeatureVector::from(f))
                .unwrap_or(PatchLabel::UNKNOWN),
            _ => PatchLabel::UNKNOWN,
        }
    }

    /// Appends ground-labelled features to the rolling buffer, evicting the
    /// oldest beyond capacity, and recomputes the model. The threshold is
    /// left unchanged.
    pub fn update(&mut self, features: &[FeatureVector]) -> Result<()> {
        if features.is_empty() {
            return Ok(());
        }
        for v in features {
            check_vector(v, self.dim)?;
        }
        let mut buffer = self.buffer.clone();
        for v in features {
            buffer.push_back(v.clone());
            if buffer.len() > self.capacity {
                buffer.pop_front();
            }
        }
        let (mean, covariance, factor) = moments(&buffer, self.dim, self.epsilon)?;
        self.buffer = buffer;
        self.mean = mean;
        self.covariance = covariance;
        self.factor = factor;
        Ok(())
    }

    /// Writes the model snapshot: dimension, capacity, threshold, epsilon,
    /// mean, row-major covariance, then the buffer rows. Values use the
    /// shortest exact decimal form so a reload is bit-identical.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# ground model snapshot")?;
        writeln!(w, "d {}", self.dim)?;
        writeln!(w, "W {}", self.capacity)?;
        writeln!(w, "threshold {}", self.threshold)?;
        writeln!(w, "epsilon {}", self.epsilon)?;
        writeln!(w, "mean {}", join(self.mean.iter()))?;
        for r in 0..self.dim {
            writeln!(w, "cov {}", join(self.covariance.row(r).iter()))?;
        }
        writeln!(w, "buffer {}", self.buffer.len())?;
        for v in &self.buffer {
            writeln!(w, "{}", join(v.0.iter()))?;
        }
        Ok(())
    }

    pub fn write_snapshot_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_snapshot(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(reader: R, path: &str) -> Result<Self> {
        let lines = content_lines(reader)?;
        let mut it = lines.iter();
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (ln, text) = it
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("missing `{key}`")))?;
            let mut toks = text.split_whitespace();
            if key.is_empty() {
                return Ok((*ln, text.split_whitespace().map(String::from).collect()));
            }
            if toks.next() != Some(key) {
                return Err(Error::parse(path, *ln, format!("expected `{key}`")));
            }
            Ok((*ln, toks.map(String::from).collect()))
        };
        let scalar = |(ln, t): (usize, Vec<String>), what: &str| -> Result<String> {
            t.into_iter()
                .next()
                .ok_or_else(|| Error::parse(path, ln, format!("missing {what} value")))
        };
        let floats = |(ln, t): (usize, Vec<String>), n: usize| -> Result<Vec<f64>> {
            if t.len() != n {
                return Err(Error::parse(path, ln, format!("expected {n} values")));
            }
            t.iter().map(|s| parse_field(s, path, ln, "value")).collect()
        };

        let (ln, t) = next("d")?;
        let dim: usize = parse_field(&scalar((ln, t), "d")?, path, ln, "d")?;
        let (ln, t) = next("W")?;
        let capacity: usize = parse_field(&scalar((ln, t), "W")?, path, ln, "W")?;
        let (ln, t) = next("threshold")?;
        let threshold: f64 = parse_field(&scalar((ln, t), "threshold")?, path, ln, "threshold")?;
        let (ln, t) = next("epsilon")?;
        let epsilon: f64 = parse_field(&scalar((ln, t), "epsilon")?, path, ln, "epsilon")?;
        let mean = DVector::from_vec(floats(next("mean")?, dim)?);
        let mut covariance = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            let row = floats(next("cov")?, dim)?;
            for (c, v) in row.into_iter().enumerate() {
                covariance[(r, c)] = v;
            }
        }
        let (ln, t) = next("buffer")?;
        let n: usize = parse_field(&scalar((ln, t), "buffer")?, path, ln, "buffer size")?;
        let mut buffer = VecDeque::with_capacity(n);
        for _ in 0..n {
            buffer.push_back(FeatureVector(floats(next("")?, dim)?));
        }
        if buffer.len() > capacity || n < 2 {
            return Err(Error::parse(path, ln, "buffer size inconsistent with capacity"));
        }
        let factor = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::parse(path, 0, "covariance is not positive definite"))?;
        Ok(Self {
            dim,
            capacity,
            epsilon,
            threshold,
            mean,
            covariance,
            factor,
            buffer,
        })
    }

    pub fn read_snapshot_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::read_snapshot(BufReader::new(file), &path.display().to_string())
    }
}

fn join<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    vals.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Per-patch features of one frame.
#[derive(Debug, Clone)]
pub struct PatchFeatures {
    pub geometry: GridGeometry,
    /// `None` for empty patches.
    pub features: Vec<Option<GeoFeatures>>,
}

impl PatchFeatures {
    /// Voxelizes `cloud`, grids it, and computes the features of every
    /// non-empty patch.
    pub fn extract(cloud: &PointCloud, geometry: GridGeometry, voxel: VoxelGridParams) -> Result<Self> {
        let reduced = voxel_downsample(cloud, voxel)?;
        let grid = grid_points(&reduced, geometry);
        let features = (0..geometry.len())
            .map(|i| {
                let pts = grid.patch_points(&reduced, i);
                compute_patch_features(&pts).ok()
            })
            .collect();
        Ok(Self { geometry, features })
    }

    /// Forgets patches holding fewer than `min_points` points, leaving them
    /// unobserved.
    pub fn drop_sparse(mut self, min_points: usize) -> Self {
        for f in &mut self.features {
            if f.as_ref().is_some_and(|f| f.n_points < min_points) {
                *f = None;
            }
        }
        self
    }

    /// Non-degenerate feature vectors of the patches inside `region`
    /// (x_min, y_min, x_max, y_max), judged by patch center.
    pub fn vectors_in(&self, region: (f64, f64, f64, f64)) -> Vec<FeatureVector> {
        let (x0, y0, x1, y1) = region;
        self.features
            .iter()
            .enumerate()
            .filter_map(|(i, f)| {
                let f = f.as_ref().filter(|f| !f.degenerate)?;
                let (r, c) = self.geometry.row_col(i);
                let (cx, cy) = self.geometry.cell_center(r, c);
                (cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1).then(|| FeatureVector::from(f))
            })
            .collect()
    }
}

/// Labels every patch of a frame.
pub fn classify_patches(model: &GroundModel, patches: &PatchFeatures, sensor_bit: u8) -> TraversabilityMap {
    let cells = patches
        .features
        .iter()
        .map(|f| model.classify(f.as_ref()))
        .collect();
    TraversabilityMap::from_labels(patches.geometry, cells, sensor_bit)
        .expect("one label per patch")
}

/// Features of the patches labelled ground, in grid order: the
/// self-supervised training input for the next update.
pub fn ground_labelled(map: &TraversabilityMap, patches: &PatchFeatures) -> Vec<FeatureVector> {
    map.cells
        .iter()
        .zip(&patches.features)
        .filter_map(|(cell, f)| match (cell.label, f) {
            (Label::Ground, Some(f)) => Some(FeatureVector::from(f)),
            _ => None,
        })
        .collect()
}

/// Frame-by-frame driver for the self-learning classifier.
#[derive(Debug, Clone)]
pub struct SelfLearningClassifier {
    pub model: GroundModel,
    pub voxel: VoxelGridParams,
    pub min_points: usize,
    /// Freeze the model after bootstrap (ablation).
    pub frozen: bool,
}

impl SelfLearningClassifier {
    /// Bootstraps from the patches of `cloud` that fall in the obstacle-free
    /// `start_region`.
    pub fn bootstrap(
        params: GroundParams,
        cloud: &PointCloud,
        geometry: GridGeometry,
        voxel: VoxelGridParams,
        start_region: (f64, f64, f64, f64),
    ) -> Result<Self> {
        let patches = PatchFeatures::extract(cloud, geometry, voxel)?.drop_sparse(params.min_points);
        let model = GroundModel::bootstrap(params, &patches.vectors_in(start_region))?;
        Ok(Self {
            model,
            voxel,
            min_points: params.min_points,
            frozen: false,
        })
    }

    /// Classifies one frame, then updates the model with the frame's
    /// ground-labelled patches unless frozen.
    pub fn process(&mut self, cloud: &PointCloud, geometry: GridGeometry, sensor_bit: u8) -> Result<(TraversabilityMap, PatchFeatures)> {
        let patches = PatchFeatures::extract(cloud, geometry, self.voxel)?.drop_sparse(self.min_points);
        let map = classify_patches(&self.model, &patches, sensor_bit);
        if !self.frozen {
            self.model.update(&ground_labelled(&map, &patches))?;
        }
        Ok((map, patches))
    }
}
