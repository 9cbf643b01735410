//! Simulator benchmarks with their calibrated configurations. Each one
//! runs a scenario family for a seed and reports the numbers the
//! evaluation tables are built from.

use crate::cells::{CellLabel, CellParams, GaussianMixture};
use crate::error::{Error, Result};
use crate::fuse::{ClassifierWeights, ConfusionMatrix};
use crate::geo3d::{GridGeometry, VoxelGridParams};
use crate::ground::GroundParams;
use crate::pipeline::{
    run_cells_frame, run_fusion_sequence, run_ground_sequence, run_radar_frame, train_cell_library, CellSetup,
    GroundSensor, GroundSetup,
};
use crate::radar::{CfarParams, RadarParams};
use crate::radarstereo::RadarStereoParams;
use crate::sim::scenarios::{
    cell_grid, drift_sequence, fusion_grid, fusion_sequence, ground_grid, maize_field, negative_cliff, open_field,
    overhang, pole_field, warm_jacket, water_puddle, PoleTarget, FUSION_START_REGION, GROUND_START_REGION, NEAR_FIELD, POLE_HEIGHT,
};
use crate::sim::spec::RIG_BASELINES;
use crate::sim::{generate_scene, radar_peak_signal, HdrParams, SceneSpec, SensorParams, ShapeSpec, TerrainSpec};
use crate::map::Label;

/// Default sensors with the widest stereo baseline of the rig.
pub fn wide_baseline_sensors() -> SensorParams {
    let mut s = SensorParams::default();
    s.stereo.baseline = RIG_BASELINES[3];
    s
}

pub const DRIFT_FRAMES: usize = 50;
pub const DRIFT_RISE: f64 = 0.5;

pub fn drift_setup() -> GroundSetup {
    GroundSetup {
        ground: GroundParams { confidence: 0.9999, min_points: 8, ..Default::default() },
        voxel: VoxelGridParams::default(),
        grid: ground_grid(),
        start_region: GROUND_START_REGION,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// Per-frame accuracy with the rolling update.
    pub learning: Vec<f64>,
    /// Per-frame accuracy with the model frozen after bootstrap.
    pub frozen: Vec<f64>,
}

impl DriftReport {
    pub fn min_learning(&self) -> f64 {
        self.learning.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn accuracy(c: &ConfusionMatrix) -> Result<f64> {
    c.accuracy()
        .ok_or_else(|| Error::InsufficientGroundTruth("no labelled cells to score".into()))
}

fn accuracies(confusions: impl Iterator<Item = ConfusionMatrix>) -> Result<Vec<f64>> {
    confusions.map(|c| accuracy(&c)).collect()
}

/// Stereo self-learning vs frozen model on the terrain-drift sequence.
pub fn drift_benchmark(seed: u64, frames: usize) -> Result<DriftReport> {
    let specs = drift_sequence(seed, frames, DRIFT_RISE);
    let sensors = wide_baseline_sensors();
    let setup = drift_setup();
    let run = |frozen| -> Result<Vec<f64>> {
        let out = run_ground_sequence(&specs, &sensors, &setup, GroundSensor::Stereo, frozen, seed)?;
        accuracies(out.into_iter().map(|o| o.confusion))
    };
    Ok(DriftReport { learning: run(false)?, frozen: run(true)? })
}

pub const FUSION_FRAMES: usize = 8;

pub fn fusion_setup() -> GroundSetup {
    GroundSetup {
        ground: GroundParams::default(),
        voxel: VoxelGridParams::default(),
        grid: fusion_grid(),
        start_region: FUSION_START_REGION,
    }
}

/// Accuracies on the cells both sensors labelled, pooled over frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionReport {
    pub lidar: f64,
    pub stereo: f64,
    pub fused: f64,
    pub co_observed: usize,
}

impl FusionReport {
    pub fn best_single(&self) -> f64 {
        self.lidar.max(self.stereo)
    }
}

pub fn fusion_benchmark(seed: u64, frames: usize) -> Result<FusionReport> {
    let specs = fusion_sequence(seed, frames);
    let out = run_fusion_sequence(
        &specs,
        &wide_baseline_sensors(),
        &fusion_setup(),
        ClassifierWeights::LIDAR_DEFAULT,
        ClassifierWeights::STEREO_DEFAULT,
        seed,
    )?;
    let (mut l, mut s, mut f) = (ConfusionMatrix::default(), ConfusionMatrix::default(), ConfusionMatrix::default());
    let mut co = 0;
    for frame in &out {
        l += frame.confusion_lidar;
        s += frame.confusion_stereo;
        f += frame.confusion_fused;
        co += frame.co_observed.len();
    }
    Ok(FusionReport { lidar: accuracy(&l)?, stereo: accuracy(&s)?, fused: accuracy(&f)?, co_observed: co })
}

pub const POLE_COUNT: usize = 6;
pub const POLE_RANGE: (f64, f64) = (3.5, 30.0);
pub const POLE_SNR: (f64, f64) = (5.0, 8.0);
/// Detections farther than this from a pole do not count as finding it.
pub const POLE_MATCH_RADIUS: f64 = 1.0;

/// Stereo with a fixed 5 cm point noise, tilted up to see pole tops.
pub fn pole_sensors() -> SensorParams {
    let mut s = SensorParams::default();
    s.stereo.fixed_sigma = Some(0.05);
    s.stereo.pitch_deg = 6.0;
    s.stereo.sample_rows = 288;
    s.stereo.sample_cols = 384;
    s
}

pub fn pole_radar_params() -> RadarParams {
    RadarParams {
        cfar: CfarParams { n_train: 16, n_guard: 4, p_fa: 0.03 },
        extent: Some(32.0),
        open_radius: 0,
        min_area: 12,
        close_radius: 2,
        ..Default::default()
    }
}

pub fn pole_ground_setup() -> GroundSetup {
    GroundSetup {
        ground: GroundParams { confidence: 0.999, ..Default::default() },
        voxel: VoxelGridParams::default(),
        grid: GridGeometry::new((2.0, -16.0), 0.5, 64, 60).expect("static geometry"),
        start_region: (2.0, -16.0, 32.0, 16.0),
    }
}

/// Pole field whose reflectivities are scaled so each pole's noise-free
/// peak return is its target SNR times the clutter mean.
pub fn calibrated_pole_field(seed: u64, sensors: &SensorParams) -> Result<(SceneSpec, Vec<PoleTarget>)> {
    let (mut spec, targets) = pole_field(seed, POLE_COUNT, POLE_RANGE, POLE_SNR);
    let scene = generate_scene(&spec)?;
    for (i, t) in targets.iter().enumerate() {
        let peak = radar_peak_signal(&scene, &sensors.radar, i);
        spec.obstacles[i].reflectivity = t.snr * sensors.radar.clutter_mean / peak;
    }
    Ok((spec, targets))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleHit {
    pub target: PoleTarget,
    /// Distance from the matched radar centroid, if matched.
    pub centroid_error: Option<f64>,
    /// Stereo height of the matched obstacle above its ground.
    pub height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleReport {
    pub hits: Vec<PoleHit>,
    pub false_detections: usize,
}

impl PoleReport {
    pub fn detected(&self) -> usize {
        self.hits.iter().filter(|h| h.centroid_error.is_some()).count()
    }

    pub fn squared_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.hits.iter().filter_map(|h| h.centroid_error.map(|e| e * e))
    }

    /// Largest height error over matched poles; a matched pole with no
    /// height counts as infinitely wrong.
    pub fn max_height_error(&self) -> f64 {
        self.hits
            .iter()
            .filter(|h| h.centroid_error.is_some())
            .map(|h| h.height.map_or(f64::INFINITY, |z| (z - POLE_HEIGHT).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn pole_benchmark(seed: u64) -> Result<PoleReport> {
    let sensors = pole_sensors();
    let (spec, targets) = calibrated_pole_field(seed, &sensors)?;
    let out = run_radar_frame(
        &spec,
        &sensors,
        &pole_radar_params(),
        &RadarStereoParams::default(),
        &pole_ground_setup(),
        seed,
        0,
    )?;
    let obstacles = &out.detections.obstacles;
    let mut used = vec![false; obstacles.len()];
    let hits = targets
        .into_iter()
        .map(|t| {
            let nearest = obstacles
                .iter()
                .enumerate()
                .map(|(j, o)| (j, (o.centroid.0 - t.x).hypot(o.centroid.1 - t.y)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|&(_, d)| d < POLE_MATCH_RADIUS);
            match nearest {
                Some((j, d)) => {
                    used[j] = true;
                    let height = out
                        .characterized
                        .iter()
                        .find(|c| c.obstacle == j)
                        .and_then(|c| c.info.as_ref())
                        .map(|i| i.max_height);
                    PoleHit { target: t, centroid_error: Some(d), height }
                }
                None => PoleHit { target: t, centroid_error: None, height: None },
            }
        })
        .collect();
    Ok(PoleReport { hits, false_detections: used.iter().filter(|u| !**u).count() })
}

/// Stereo sampled densely enough to fill cells out to the crop edge.
pub fn cell_sensors() -> SensorParams {
    let mut s = SensorParams::default();
    s.stereo.sample_rows = 288;
    s.stereo.sample_cols = 384;
    s
}

pub fn cell_setup() -> CellSetup {
    CellSetup { params: CellParams::default(), grid: cell_grid(), near_field: NEAR_FIELD, hdr: HdrParams::default() }
}

/// Driven-over scenes for the library: bare ground and crop.
pub fn cell_training_specs() -> Vec<SceneSpec> {
    vec![open_field(100), maize_field(101, false), open_field(102), maize_field(103, false)]
}

pub const CELL_TRAINING_SEED: u64 = 7;

pub fn cell_library() -> Result<Vec<GaussianMixture>> {
    train_cell_library(&cell_training_specs(), &cell_sensors(), &cell_setup(), CELL_TRAINING_SEED)
}

/// Label of the cell containing `(x, y)` after classifying `spec`.
pub fn cell_label_at(spec: &SceneSpec, library: &[GaussianMixture], seed: u64, x: f64, y: f64) -> Result<CellLabel> {
    let setup = cell_setup();
    let out = run_cells_frame(spec, library, &cell_sensors(), &setup, seed, 0)?;
    let i = setup
        .grid
        .locate_index(x, y)
        .ok_or_else(|| Error::param(format!("({x}, {y}) lies outside the cell grid")))?;
    Ok(out.grid.labels[i])
}

/// Position of the person in a maize scene.
pub fn person_position(spec: &SceneSpec) -> Option<(f64, f64)> {
    spec.obstacles.iter().find_map(|o| match o.shape {
        ShapeSpec::Person { x, y, .. } => Some((x, y)),
        _ => None,
    })
}

/// Labels of the four cells under the overhang slab.
pub fn overhang_labels(bottom: f64, library: &[GaussianMixture], seed: u64) -> Result<Vec<CellLabel>> {
    let setup = cell_setup();
    let spec = overhang(bottom);
    let out = run_cells_frame(&spec, library, &cell_sensors(), &setup, seed, 0)?;
    let g = setup.grid;
    Ok([(4, 7), (4, 8), (5, 7), (5, 8)].iter().map(|&(r, c)| out.grid.labels[g.index(r, c)]).collect())
}

/// Scenes the cell classifier is known to get wrong: truth says the
/// ground is drivable, the classifier refuses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownFailure {
    WaterPuddle,
    NegativeCliff,
    WarmJacket,
}

impl KnownFailure {
    pub const ALL: [KnownFailure; 3] = [KnownFailure::WaterPuddle, KnownFailure::NegativeCliff, KnownFailure::WarmJacket];

    pub fn name(self) -> &'static str {
        match self {
            KnownFailure::WaterPuddle => "water puddle",
            KnownFailure::NegativeCliff => "negative cliff",
            KnownFailure::WarmJacket => "warm jacket",
        }
    }

    pub fn spec(self, seed: u64) -> SceneSpec {
        match self {
            KnownFailure::WaterPuddle => water_puddle(seed),
            KnownFailure::NegativeCliff => negative_cliff(seed),
            KnownFailure::WarmJacket => warm_jacket(seed),
        }
    }

    /// Does the cell centered at `(x, y)` belong to the misleading feature?
    fn covers(self, spec: &SceneSpec, x: f64, y: f64) -> bool {
        match self {
            KnownFailure::WaterPuddle => spec.water.iter().any(|w| (x - w.x).hypot(y - w.y) < w.radius),
            KnownFailure::NegativeCliff => match spec.terrain {
                TerrainSpec::Crest { crest_x, .. } => x > crest_x + cell_grid().cell_size,
                _ => false,
            },
            KnownFailure::WarmJacket => spec.hotspots.iter().any(|h| (x - h.x).hypot(y - h.y) < h.radius),
        }
    }
}

/// Truth and predicted labels of the feature cells of a known-failure
/// scene.
pub fn known_failure_cells(kind: KnownFailure, library: &[GaussianMixture], seed: u64) -> Result<Vec<(Label, CellLabel)>> {
    let setup = cell_setup();
    let spec = kind.spec(seed);
    let out = run_cells_frame(&spec, library, &cell_sensors(), &setup, seed, 0)?;
    let g = setup.grid;
    Ok((0..g.len())
        .filter(|&i| {
            let (r, c) = g.row_col(i);
            let (x, y) = g.cell_center(r, c);
            kind.covers(&spec, x, y)
        })
        .map(|i| (out.truth.labels[i], out.grid.labels[i]))
        .collect())
}

/// The documented failure: every feature cell is drivable ground, none is
/// classified traversable, and at least one is actively rejected.
pub fn shows_known_failure(cells: &[(Label, CellLabel)]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|&(t, p)| t == Label::Ground && p != CellLabel::Traversable)
        && cells.iter().any(|&(_, p)| p == CellLabel::NotTraversable)
}
