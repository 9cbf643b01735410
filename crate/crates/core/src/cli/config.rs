//! Pipeline configuration file: TOML with one section per module.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cells::{CellParams, EmParams, FeatureWeights};
use crate::error::{Error, Result};
use crate::fuse::ClassifierWeights;
use crate::geo3d::{GridGeometry, VoxelGridParams};
use crate::ground::{chi_square_threshold, GroundParams, FEATURE_DIM};
use crate::pipeline::{CellSetup, GroundSensor, GroundSetup, Region};
use crate::radar::{CfarParams, RadarParams};
use crate::radarstereo::RadarStereoParams;
use crate::sim::scenarios::{cell_grid, ground_grid, GROUND_START_REGION, NEAR_FIELD};
use crate::sim::{HdrParams, SceneSpec, SensorParams};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSection {
    fn from_geometry(g: GridGeometry) -> Self {
        Self { origin: [g.origin.0, g.origin.1], cell_size: g.cell_size, rows: g.n_rows, cols: g.n_cols }
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new((self.origin[0], self.origin[1]), self.cell_size, self.rows, self.cols)
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self::from_geometry(ground_grid())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSection {
    pub capacity: usize,
    pub confidence: f64,
    pub epsilon: f64,
    pub min_points: usize,
    pub voxel_size: f64,
    pub grid: GridSection,
    /// `[x0, y0, x1, y1]` of the obstacle-free bootstrap region.
    pub start_region: [f64; 4],
    /// `stereo` or `lidar`.
    pub sensor: String,
}

impl Default for GroundSection {
    fn default() -> Self {
        let p = GroundParams::default();
        let r = GROUND_START_REGION;
        Self {
            capacity: p.capacity,
            confidence: p.confidence,
            epsilon: p.epsilon,
            min_points: p.min_points,
            voxel_size: VoxelGridParams::default().voxel_size,
            grid: GridSection::default(),
            start_region: [r.0, r.1, r.2, r.3],
            sensor: "stereo".into(),
        }
    }
}

pub fn parse_sensor(name: &str) -> Result<GroundSensor> {
    match name {
        "stereo" => Ok(GroundSensor::Stereo),
        "lidar" => Ok(GroundSensor::Lidar),
        other => Err(Error::Configuration(format!("unknown ground sensor `{other}` (expected stereo or lidar)"))),
    }
}

impl GroundSection {
    pub fn params(&self) -> GroundParams {
        GroundParams {
            capacity: self.capacity,
            confidence: self.confidence,
            epsilon: self.epsilon,
            min_points: self.min_points,
        }
    }

    pub fn setup(&self) -> Result<GroundSetup> {
        let r = self.start_region;
        if !(r[0] < r[2] && r[1] < r[3]) {
            return Err(Error::Configuration("ground start_region must have x0 < x1 and y0 < y1".into()));
        }
        Ok(GroundSetup {
            ground: self.params(),
            voxel: VoxelGridParams { voxel_size: self.voxel_size },
            grid: self.grid.geometry()?,
            start_region: (r[0], r[1], r[2], r[3]),
        })
    }

    fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::param("voxel size must be positive"));
        }
        self.setup()?;
        parse_sensor(&self.sensor)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    /// `[precision, rejection precision]` of the LIDAR classifier.
    pub lidar: [f64; 2],
    pub stereo: [f64; 2],
}

impl Default for FusionSection {
    fn default() -> Self {
        let (l, s) = (ClassifierWeights::LIDAR_DEFAULT, ClassifierWeights::STEREO_DEFAULT);
        Self { lidar: [l.p, l.rp], stereo: [s.p, s.rp] }
    }
}

impl FusionSection {
    /// Both weight pairs, rejecting any combination whose sum could be
    /// zero for some pair of labels.
    pub fn weights(&self) -> Result<(ClassifierWeights, ClassifierWeights)> {
        let wl = ClassifierWeights::new(self.lidar[0], self.lidar[1])?;
        let ws = ClassifierWeights::new(self.stereo[0], self.stereo[1])?;
        for a in self.lidar {
            for b in self.stereo {
                if a + b <= 0.0 {
                    return Err(Error::Configuration("fusion weights sum to zero for some label pair".into()));
                }
            }
        }
        Ok((wl, ws))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub n_train: usize,
    pub n_guard: usize,
    pub p_fa: f64,
    pub cell_size: f64,
    /// Half-width of the Cartesian map; absent covers the whole annulus.
    pub extent: Option<f64>,
    pub open_radius: usize,
    pub min_area: usize,
    pub close_radius: usize,
}

impl Default for RadarSection {
    fn default() -> Self {
        let p = RadarParams::default();
        Self {
            n_train: p.cfar.n_train,
            n_guard: p.cfar.n_guard,
            p_fa: p.cfar.p_fa,
            cell_size: p.cell_size,
            extent: p.extent,
            open_radius: p.open_radius,
            min_area: p.min_area,
            close_radius: p.close_radius,
        }
    }
}

impl RadarSection {
    pub fn params(&self) -> RadarParams {
        RadarParams {
            cfar: CfarParams { n_train: self.n_train, n_guard: self.n_guard, p_fa: self.p_fa },
            cell_size: self.cell_size,
            extent: self.extent,
            open_radius: self.open_radius,
            min_area: self.min_area,
            close_radius: self.close_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarStereoSection {
    pub margin: f64,
    pub ground_ring: f64,
}

impl Default for RadarStereoSection {
    fn default() -> Self {
        let p = RadarStereoParams::default();
        Self { margin: p.margin, ground_ring: p.ground_ring }
    }
}

impl RadarStereoSection {
    pub fn params(&self) -> RadarStereoParams {
        RadarStereoParams { margin: self.margin, ground_ring: self.ground_ring }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellsSection {
    pub min_samples: usize,
    pub threshold: f64,
    pub w_chroma: f64,
    pub w_height: f64,
    pub w_temp: f64,
    pub clearance: f64,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub dedup_distance: f64,
    pub grid: GridSection,
    pub near_field: [f64; 4],
    /// Scene files of driven-over terrain for the library; the built-in
    /// open-field and crop scenes when empty.
    pub training: Vec<PathBuf>,
    /// Existing library file; skips training when set.
    pub library: Option<PathBuf>,
}

impl Default for CellsSection {
    fn default() -> Self {
        let p = CellParams::default();
        let n = NEAR_FIELD;
        Self {
            min_samples: p.min_samples,
            threshold: p.threshold,
            w_chroma: p.weights.w_chroma,
            w_height: p.weights.w_height,
            w_temp: p.weights.w_temp,
            clearance: p.clearance,
            k_max: p.k_max,
            max_iter: p.em.max_iter,
            tol: p.em.tol,
            dedup_distance: p.dedup_distance,
            grid: GridSection::from_geometry(cell_grid()),
            near_field: [n.0, n.1, n.2, n.3],
            training: Vec::new(),
            library: None,
        }
    }
}

impl CellsSection {
    pub fn setup(&self) -> Result<CellSetup> {
        let grid = self.grid.geometry()?;
        let params = CellParams {
            cell_size: grid.cell_size,
            min_samples: self.min_samples,
            threshold: self.threshold,
            weights: FeatureWeights { w_chroma: self.w_chroma, w_height: self.w_height, w_temp: self.w_temp },
            clearance: self.clearance,
            k_max: self.k_max,
            em: EmParams { max_iter: self.max_iter, tol: self.tol, ..Default::default() },
            dedup_distance: self.dedup_distance,
        };
        params.validate()?;
        let n = self.near_field;
        if !(n[0] < n[2] && n[1] < n[3]) {
            return Err(Error::Configuration("cells near_field must have x0 < x1 and y0 < y1".into()));
        }
        let near_field: Region = (n[0], n[1], n[2], n[3]);
        Ok(CellSetup { params, grid, near_field, hdr: HdrParams::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Scene file; each method falls back to its benchmark scenario when
    /// absent.
    pub scene: Option<PathBuf>,
    pub out: PathBuf,
    pub frames: usize,
    pub sensors: SensorParams,
    pub ground: GroundSection,
    pub fusion: FusionSection,
    pub radar: RadarSection,
    pub radarstereo: RadarStereoSection,
    pub cells: CellsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: None,
            out: PathBuf::from("out"),
            frames: 5,
            sensors: SensorParams::default(),
            ground: GroundSection::default(),
            fusion: FusionSection::default(),
            radar: RadarSection::default(),
            radarstereo: RadarStereoSection::default(),
            cells: CellsSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Configuration(format!("{}: {}", path.display(), e)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.scene.as_mut() {
            resolve(p);
        }
        cfg.cells.training.iter_mut().for_each(resolve);
        if let Some(p) = cfg.cells.library.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    /// Checks every module's parameters and loads every referenced scene,
    /// so a bad config fails before any processing starts.
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Configuration("frames must be at least 1".into()));
        }
        self.sensors.validate()?;
        self.ground.validate()?;
        chi_square_threshold(FEATURE_DIM, self.ground.confidence)?;
        self.fusion.weights()?;
        self.radar.params().validate()?;
        self.radarstereo.params().validate()?;
        self.cells.setup()?;
        self.scene_spec()?;
        self.training_specs()?;
        if let Some(p) = &self.cells.library {
            if !p.exists() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn scene_spec(&self) -> Result<Option<SceneSpec>> {
        self.scene.as_deref().map(SceneSpec::from_file).transpose()
    }

    pub fn training_specs(&self) -> Result<Vec<SceneSpec>> {
        self.cells.training.iter().map(|p| SceneSpec::from_file(p)).collect()
    }
}
