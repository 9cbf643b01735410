//! End-to-end runs of each method over simulated frames, scored against
//! the simulator's ground truth.

use crate::cells::{
    accumulate_cell_samples, classify_cells, fit_cells, mark_occlusion_shadows, train_library, CellGrid, CellParams,
    GaussianMixture,
};
use crate::error::{Error, Result};
use crate::fuse::{co_observed, confusion_on, fuse_maps, ClassifierWeights, ConfusionMatrix, FusionParams};
use crate::geo3d::{fit_plane_lsq, GridGeometry, Plane, Point3, PointCloud, VoxelGridParams};
use crate::ground::{GroundParams, SelfLearningClassifier};
use crate::map::{sensor, Label, TraversabilityMap};
use crate::radar::{detect_obstacles, RadarDetections, RadarParams};
use crate::radarstereo::{analyze, Characterized, RadarStereoParams};
use crate::rng::{derive_seed, indexed_stream};
use crate::sim::{
    generate_scene, ground_truth, render_hdr_colors, render_lidar_scan, render_radar_image, render_stereo_cloud,
    render_thermal_points, GroundTruth, HdrParams, Scan, Scene, SceneSpec, SensorParams,
};

/// Region `(x0, y0, x1, y1)`.
pub type Region = (f64, f64, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundSensor {
    Stereo,
    Lidar,
}

impl GroundSensor {
    pub fn bit(self) -> u8 {
        match self {
            GroundSensor::Stereo => sensor::STEREO,
            GroundSensor::Lidar => sensor::LIDAR,
        }
    }
}

pub fn stereo_scan(scene: &Scene, sensors: &SensorParams, seed: u64, frame: u64) -> Scan {
    render_stereo_cloud(scene, &sensors.stereo, frame, &mut indexed_stream(seed, "sim.stereo", frame))
}

pub fn lidar_scan(scene: &Scene, sensors: &SensorParams, seed: u64, frame: u64) -> Scan {
    render_lidar_scan(scene, &sensors.lidar, frame, &mut indexed_stream(seed, "sim.lidar", frame))
}

fn scan_for(which: GroundSensor, scene: &Scene, sensors: &SensorParams, seed: u64, frame: u64) -> Scan {
    match which {
        GroundSensor::Stereo => stereo_scan(scene, sensors, seed, frame),
        GroundSensor::Lidar => lidar_scan(scene, sensors, seed, frame),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSetup {
    pub ground: GroundParams,
    pub voxel: VoxelGridParams,
    pub grid: GridGeometry,
    /// Obstacle-free region of the first frame used for bootstrapping.
    pub start_region: Region,
}

/// A labelled frame scored on its observed cells.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub frame: u64,
    pub map: TraversabilityMap,
    pub truth: GroundTruth,
    pub confusion: ConfusionMatrix,
}

fn observed(map: &TraversabilityMap) -> Vec<usize> {
    (0..map.cells.len()).filter(|&i| map.cells[i].label != Label::Unknown).collect()
}

fn scenes(specs: &[SceneSpec]) -> Result<Vec<Scene>> {
    if specs.is_empty() {
        return Err(Error::param("a sequence needs at least one frame"));
    }
    specs.iter().map(generate_scene).collect()
}

/// Bootstraps on the first frame's start region, then classifies every
/// frame in order, updating the model after each unless `frozen`.
pub fn run_ground_sequence(
    specs: &[SceneSpec],
    sensors: &SensorParams,
    setup: &GroundSetup,
    which: GroundSensor,
    frozen: bool,
    seed: u64,
) -> Result<Vec<FrameOutcome>> {
    let scenes = scenes(specs)?;
    let first = scan_for(which, &scenes[0], sensors, seed, 0);
    let mut clf = SelfLearningClassifier::bootstrap(setup.ground, &first.cloud, setup.grid, setup.voxel, setup.start_region)
        .map_err(|e| e.in_stage("ground bootstrap"))?;
    clf.frozen = frozen;
    let mut out = Vec::with_capacity(scenes.len());
    for (f, scene) in scenes.iter().enumerate() {
        let scan = if f == 0 { first.clone() } else { scan_for(which, scene, sensors, seed, f as u64) };
        let (map, _) = clf.process(&scan.cloud, setup.grid, which.bit()).map_err(|e| e.in_stage("ground"))?;
        let truth = ground_truth(scene, setup.grid);
        let confusion = confusion_on(&map, &truth.labels, &observed(&map))?;
        out.push(FrameOutcome { frame: f as u64, map, truth, confusion });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FusionFrame {
    pub lidar: FrameOutcome,
    pub stereo: FrameOutcome,
    pub fused: FrameOutcome,
    /// Cells labelled by both sensors.
    pub co_observed: Vec<usize>,
    pub confusion_lidar: ConfusionMatrix,
    pub confusion_stereo: ConfusionMatrix,
    pub confusion_fused: ConfusionMatrix,
}

/// Runs a self-learning classifier per sensor over the sequence and fuses
/// their maps frame by frame. The `*_co` confusions are restricted to the
/// cells both sensors labelled.
pub fn run_fusion_sequence(
    specs: &[SceneSpec],
    sensors: &SensorParams,
    setup: &GroundSetup,
    weights_lidar: ClassifierWeights,
    weights_stereo: ClassifierWeights,
    seed: u64,
) -> Result<Vec<FusionFrame>> {
    let lidar = run_ground_sequence(specs, sensors, setup, GroundSensor::Lidar, false, seed)?;
    let stereo = run_ground_sequence(specs, sensors, setup, GroundSensor::Stereo, false, seed)?;
    let t = crate::ground::chi_square_threshold(crate::ground::FEATURE_DIM, setup.ground.confidence)?;
    let params = FusionParams::new(weights_lidar, weights_stereo, t, t);
    lidar
        .into_iter()
        .zip(stereo)
        .map(|(l, s)| {
            let map = fuse_maps(&l.map, &s.map, &params).map_err(|e| e.in_stage("fuse"))?;
            let both = co_observed(&l.map, &s.map);
            let truth = &l.truth.labels;
            let fused = FrameOutcome {
                frame: l.frame,
                confusion: confusion_on(&map, truth, &observed(&map))?,
                map,
                truth: l.truth.clone(),
            };
            Ok(FusionFrame {
                confusion_lidar: confusion_on(&l.map, truth, &both)?,
                confusion_stereo: confusion_on(&s.map, truth, &both)?,
                confusion_fused: confusion_on(&fused.map, truth, &both)?,
                co_observed: both,
                lidar: l,
                stereo: s,
                fused,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RadarOutcome {
    pub detections: RadarDetections,
    pub characterized: Vec<Characterized>,
    pub stereo: Scan,
    pub ground_map: TraversabilityMap,
    pub truth: GroundTruth,
}

/// Radar detection on one frame, characterized with the stereo cloud and
/// a stereo ground map bootstrapped on the same frame.
pub fn run_radar_frame(
    spec: &SceneSpec,
    sensors: &SensorParams,
    radar: &RadarParams,
    radarstereo: &RadarStereoParams,
    setup: &GroundSetup,
    seed: u64,
    frame: u64,
) -> Result<RadarOutcome> {
    let scene = generate_scene(spec)?;
    let img = render_radar_image(&scene, &sensors.radar, &mut indexed_stream(seed, "sim.radar", frame))?;
    let detections = detect_obstacles(&img, radar).map_err(|e| e.in_stage("radar"))?;
    let stereo = stereo_scan(&scene, sensors, seed, frame);
    let mut clf = SelfLearningClassifier::bootstrap(setup.ground, &stereo.cloud, setup.grid, setup.voxel, setup.start_region)
        .map_err(|e| e.in_stage("ground bootstrap"))?;
    clf.frozen = true;
    let (ground_map, _) = clf.process(&stereo.cloud, setup.grid, sensor::STEREO)?;
    let characterized =
        analyze(&stereo.cloud, &ground_map, &detections.obstacles, radarstereo).map_err(|e| e.in_stage("radarstereo"))?;
    let truth = ground_truth(&scene, setup.grid);
    Ok(RadarOutcome { detections, characterized, stereo, ground_map, truth })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSetup {
    pub params: CellParams,
    pub grid: GridGeometry,
    /// Points here define the reference plane for sample heights.
    pub near_field: Region,
    pub hdr: HdrParams,
}

/// Stereo points with HDR colors and thermal temperatures; points outside
/// the thermal field of view are dropped.
pub fn thermal_cloud(scene: &Scene, sensors: &SensorParams, hdr: &HdrParams, seed: u64, frame: u64) -> Result<PointCloud> {
    let scan = stereo_scan(scene, sensors, seed, frame);
    let colors = render_hdr_colors(scene, &scan, hdr, &mut indexed_stream(seed, "sim.hdr", frame))?;
    let annotated = render_thermal_points(
        scene,
        &sensors.stereo,
        &sensors.thermal,
        &scan,
        &mut indexed_stream(seed, "sim.thermal", frame),
    );
    let points = annotated
        .points
        .into_iter()
        .zip(colors)
        .filter(|(p, _)| p.temperature.is_some())
        .map(|(p, c)| Point3 { color: Some(c), ..p })
        .collect();
    Ok(PointCloud::new(points, frame))
}

/// Least-squares plane through the points inside `region`.
pub fn reference_plane(cloud: &PointCloud, region: Region) -> Result<Plane> {
    let near: Vec<Point3> = cloud
        .points
        .iter()
        .filter(|p| p.x >= region.0 && p.y >= region.1 && p.x <= region.2 && p.y <= region.3)
        .cloned()
        .collect();
    fit_plane_lsq(&near).map_err(|e| e.in_stage("reference plane"))
}

/// Accumulates and fits the cells of one frame.
pub fn cell_frame(spec: &SceneSpec, sensors: &SensorParams, setup: &CellSetup, seed: u64, frame: u64) -> Result<CellGrid> {
    let scene = generate_scene(spec)?;
    let cloud = thermal_cloud(&scene, sensors, &setup.hdr, seed, frame)?;
    let plane = reference_plane(&cloud, setup.near_field)?;
    let mut grid = CellGrid::new(setup.grid);
    accumulate_cell_samples(&mut grid, &cloud.points, &plane)?;
    fit_cells(&mut grid, &setup.params, derive_seed(seed, &format!("cells.fit.{frame}")))?;
    Ok(grid)
}

/// Library from the fitted cells of traversable training frames.
pub fn train_cell_library(
    specs: &[SceneSpec],
    sensors: &SensorParams,
    setup: &CellSetup,
    seed: u64,
) -> Result<Vec<GaussianMixture>> {
    let grids = specs
        .iter()
        .enumerate()
        .map(|(f, s)| cell_frame(s, sensors, setup, seed, f as u64))
        .collect::<Result<Vec<_>>>()?;
    train_library(&grids, &setup.params).map_err(|e| e.in_stage("cells training"))
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub grid: CellGrid,
    pub truth: GroundTruth,
    pub confusion: ConfusionMatrix,
}

/// Classifies one frame against `library` and marks occlusion shadows.
pub fn run_cells_frame(
    spec: &SceneSpec,
    library: &[GaussianMixture],
    sensors: &SensorParams,
    setup: &CellSetup,
    seed: u64,
    frame: u64,
) -> Result<CellOutcome> {
    let mut grid = cell_frame(spec, sensors, setup, seed, frame)?;
    classify_cells(&mut grid, library, &setup.params).map_err(|e| e.in_stage("cells"))?;
    mark_occlusion_shadows(&mut grid, (0.0, 0.0));
    let truth = ground_truth(&generate_scene(spec)?, setup.grid);
    let map = grid.to_map();
    let confusion = confusion_on(&map, &truth.labels, &observed(&map))?;
    Ok(CellOutcome { grid, truth, confusion })
}
