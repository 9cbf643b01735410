//! Deterministic synthetic scenes, sensor renders and exact ground truth.

pub mod render;
pub mod scenarios;
pub mod scene;
pub mod spec;
pub mod truth;

pub use render::{
    fan_coverage, radar_peak_signal, render_hdr_colors, render_lidar_scan, render_radar_image, render_stereo_cloud,
    render_thermal_points, stereo_frame, HdrParams, Scan, Surface,
};
pub use scene::{generate_scene, Hit, Material, Scene, Solid};
pub use spec::{
    CropSpec, HotspotSpec, LidarParams, ObstacleSpec, RadarSimParams, SceneSpec, SensorParams, ShapeSpec, StereoParams,
    TerrainSpec, ThermalParams, WaterSpec,
};
pub use truth::{ground_truth, GroundTruth, TruthObstacle};
