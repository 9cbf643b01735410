//! Declarative scene and sensor descriptions, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PERSON_TEMPERATURE: f64 = 310.0;
pub const AMBIENT_TEMPERATURE: f64 = 288.0;

/// Stereo baselines of the reference rig, meters.
pub const RIG_BASELINES: [f64; 4] = [0.12, 0.24, 0.40, 0.80];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainSpec {
    Flat {
        #[serde(default)]
        height: f64,
    },
    /// `z = height + grade_x·x + grade_y·y`.
    Sloped {
        #[serde(default)]
        height: f64,
        grade_x: f64,
        #[serde(default)]
        grade_y: f64,
    },
    /// Sinusoidal ruts across the direction `direction_deg`.
    Rutted {
        amplitude: f64,
        wavelength: f64,
        #[serde(default)]
        direction_deg: f64,
    },
    /// Rises with `up_grade` until `crest_x`, then falls with `down_grade`.
    Crest {
        crest_x: f64,
        up_grade: f64,
        down_grade: f64,
    },
}

impl Default for TerrainSpec {
    fn default() -> Self {
        TerrainSpec::Flat { height: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// Axis-aligned box standing on the terrain.
    Box {
        x: f64,
        y: f64,
        size_x: f64,
        size_y: f64,
        height: f64,
    },
    Cylinder {
        x: f64,
        y: f64,
        radius: f64,
        height: f64,
    },
    /// A warm upright cylinder: person or animal.
    Person {
        x: f64,
        y: f64,
        #[serde(default = "default_person_radius")]
        radius: f64,
        #[serde(default = "default_person_height")]
        height: f64,
    },
    /// Horizontal slab whose underside is `bottom` above the terrain.
    Overhang {
        x: f64,
        y: f64,
        size_x: f64,
        size_y: f64,
        bottom: f64,
        #[serde(default = "default_thickness")]
        thickness: f64,
    },
}

fn default_person_radius() -> f64 {
    0.25
}
fn default_person_height() -> f64 {
    1.7
}
fn default_thickness() -> f64 {
    0.3
}
fn one() -> f64 {
    1.0
}

impl ShapeSpec {
    pub fn center(&self) -> (f64, f64) {
        match *self {
            ShapeSpec::Box { x, y, .. }
            | ShapeSpec::Cylinder { x, y, .. }
            | ShapeSpec::Person { x, y, .. }
            | ShapeSpec::Overhang { x, y, .. } => (x, y),
        }
    }

    /// Footprint bounding rectangle `(x0, y0, x1, y1)`.
    pub fn footprint_bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            ShapeSpec::Box { x, y, size_x, size_y, .. } | ShapeSpec::Overhang { x, y, size_x, size_y, .. } => {
                (x - size_x / 2.0, y - size_y / 2.0, x + size_x / 2.0, y + size_y / 2.0)
            }
            ShapeSpec::Cylinder { x, y, radius, .. } | ShapeSpec::Person { x, y, radius, .. } => {
                (x - radius, y - radius, x + radius, y + radius)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShapeSpec::Box { size_x, size_y, height, .. } => size_x > 0.0 && size_y > 0.0 && height > 0.0,
            ShapeSpec::Cylinder { radius, height, .. } | ShapeSpec::Person { radius, height, .. } => {
                radius > 0.0 && height > 0.0
            }
            ShapeSpec::Overhang { size_x, size_y, bottom, thickness, .. } => {
                size_x > 0.0 && size_y > 0.0 && bottom >= 0.0 && thickness > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("obstacle dimensions must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    /// Radar reflectivity multiplier.
    #[serde(default = "one")]
    pub reflectivity: f64,
    /// Surface temperature, K. Defaults to 310 K for people, ambient otherwise.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub albedo: Option<[f64; 3]>,
}

impl ObstacleSpec {
    pub fn new(shape: ShapeSpec) -> Self {
        Self {
            shape,
            reflectivity: 1.0,
            temperature: None,
            albedo: None,
        }
    }
}

/// A patch of tall vegetation: an attenuating volume between the terrain
/// and a per-plant canopy height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub height: f64,
    #[serde(default = "default_height_std")]
    pub height_std: f64,
    /// Extinction coefficient, 1/m.
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_crop_albedo")]
    pub albedo: [f64; 3],
}

fn default_height_std() -> f64 {
    0.1
}
fn default_density() -> f64 {
    1.5
}
fn default_crop_albedo() -> [f64; 3] {
    [0.22, 0.45, 0.16]
}

/// A disk of standing water: most rays are mirrored, a few return from the
/// surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterSpec {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    #[serde(default = "default_water_temperature")]
    pub temperature: f64,
    /// Probability that a ray returns from the surface itself.
    #[serde(default = "default_surface_return")]
    pub surface_return: f64,
}

fn default_water_temperature() -> f64 {
    283.0
}
fn default_surface_return() -> f64 {
    0.2
}

/// A disk of ground at a different temperature, invisible to geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotSpec {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub temperature: f64,
}

/// Two crossing sinusoidal undulations of peak `amplitude` (m) and
/// wavelength `wavelength` (m), phased by the scene seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliefSpec {
    pub amplitude: f64,
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub name: String,
    /// `[x_min, y_min, x_max, y_max]`.
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
    #[serde(default)]
    pub terrain: TerrainSpec,
    /// Micro-relief added on top of `terrain`.
    #[serde(default)]
    pub relief: Option<ReliefSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub crops: Vec<CropSpec>,
    #[serde(default)]
    pub water: Vec<WaterSpec>,
    #[serde(default)]
    pub hotspots: Vec<HotspotSpec>,
    #[serde(default = "default_ambient")]
    pub ambient_temperature: f64,
    /// Bare-ground temperature; ambient when absent.
    #[serde(default)]
    pub ground_temperature: Option<f64>,
    #[serde(default = "default_ground_albedo")]
    pub ground_albedo: [f64; 3],
    /// Vehicle clearance for ground truth, m.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    /// Steepest traversable slope, degrees.
    #[serde(default = "default_max_slope")]
    pub max_slope_deg: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_bounds() -> [f64; 4] {
    [-5.0, -20.0, 40.0, 20.0]
}
fn default_ambient() -> f64 {
    AMBIENT_TEMPERATURE
}
fn default_ground_albedo() -> [f64; 3] {
    [0.42, 0.33, 0.24]
}
fn default_clearance() -> f64 {
    2.5
}
fn default_max_slope() -> f64 {
    30.0
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            name: String::new(),
            bounds: default_bounds(),
            terrain: TerrainSpec::default(),
            relief: None,
            obstacles: Vec::new(),
            crops: Vec::new(),
            water: Vec::new(),
            hotspots: Vec::new(),
            ambient_temperature: AMBIENT_TEMPERATURE,
            ground_temperature: None,
            ground_albedo: default_ground_albedo(),
            clearance: default_clearance(),
            max_slope_deg: default_max_slope(),
            seed: 0,
        }
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{what} must be positive, got {v}")))
    }
}

fn albedo_ok(a: &[f64; 3]) -> Result<()> {
    if a.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(Error::param("albedo channels must lie in [0, 1]"))
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::param("scene bounds must have positive extent"));
        }
        let inside = |b: (f64, f64, f64, f64)| b.0 >= x0 && b.1 >= y0 && b.2 <= x1 && b.3 <= y1;
        match self.terrain {
            TerrainSpec::Rutted { amplitude, wavelength, .. } => {
                if amplitude < 0.0 {
                    return Err(Error::param("rut amplitude must be >= 0"));
                }
                positive(wavelength, "rut wavelength")?;
            }
            TerrainSpec::Crest { up_grade, down_grade, .. } => {
                if !(up_grade.is_finite() && down_grade.is_finite()) {
                    return Err(Error::param("crest grades must be finite"));
                }
            }
            _ => {}
        }
        if let Some(r) = self.relief {
            if !(r.amplitude >= 0.0 && r.amplitude.is_finite()) {
                return Err(Error::param("relief amplitude must be >= 0"));
            }
            positive(r.wavelength, "relief wavelength")?;
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.shape.validate()?;
            if !inside(o.shape.footprint_bounds()) {
                return Err(Error::param(format!("obstacle {i} footprint leaves the scene bounds")));
            }
            if o.reflectivity < 0.0 {
                return Err(Error::param(format!("obstacle {i} reflectivity must be >= 0")));
            }
            if let Some(t) = o.temperature {
                positive(t, "obstacle temperature")?;
            }
            if let Some(a) = &o.albedo {
                albedo_ok(a)?;
            }
        }
        for c in &self.crops {
            if !(c.x_max > c.x_min && c.y_max > c.y_min) {
                return Err(Error::param("crop rectangle must have positive extent"));
            }
            if !inside((c.x_min, c.y_min, c.x_max, c.y_max)) {
                return Err(Error::param("crop region leaves the scene bounds"));
            }
            positive(c.height, "crop height")?;
            positive(c.density, "crop density")?;
            if c.height_std < 0.0 {
                return Err(Error::param("crop height_std must be >= 0"));
            }
            albedo_ok(&c.albedo)?;
        }
        for w in &self.water {
            positive(w.radius, "water radius")?;
            positive(w.temperature, "water temperature")?;
            if !(0.0..=1.0).contains(&w.surface_return) {
                return Err(Error::param("water surface_return must lie in [0, 1]"));
            }
        }
        for h in &self.hotspots {
            positive(h.radius, "hotspot radius")?;
            positive(h.temperature, "hotspot temperature")?;
        }
        positive(self.ambient_temperature, "ambient temperature")?;
        if let Some(t) = self.ground_temperature {
            positive(t, "ground temperature")?;
        }
        albedo_ok(&self.ground_albedo)?;
        positive(self.clearance, "clearance")?;
        if !(self.max_slope_deg > 0.0 && self.max_slope_deg < 90.0) {
            return Err(Error::param("max_slope_deg must lie in (0, 90)"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Configuration(msg) => Error::Configuration(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoParams {
    /// Camera height above the terrain under the vehicle, m.
    pub mount_height: f64,
    /// Downward tilt of the optical axis, degrees.
    pub pitch_deg: f64,
    pub focal_px: f64,
    pub width_px: f64,
    pub height_px: f64,
    /// Rays cast per image row and column.
    pub sample_cols: usize,
    pub sample_rows: usize,
    pub baseline: f64,
    /// Disparity noise, px.
    pub disparity_sigma: f64,
    /// Replaces the depth-dependent noise with a constant range σ, m.
    pub fixed_sigma: Option<f64>,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            mount_height: 2.0,
            pitch_deg: 12.0,
            focal_px: 985.0,
            width_px: 1280.0,
            height_px: 960.0,
            sample_cols: 256,
            sample_rows: 192,
            baseline: 0.24,
            disparity_sigma: 0.25,
            fixed_sigma: None,
            min_range: 2.0,
            max_range: 30.0,
        }
    }
}

impl StereoParams {
    /// Depth noise σ at depth `z` along the optical axis.
    pub fn depth_sigma(&self, z: f64) -> f64 {
        z * z / (self.focal_px * self.baseline) * self.disparity_sigma
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.mount_height, "stereo mount_height")?;
        positive(self.focal_px, "stereo focal_px")?;
        positive(self.width_px, "stereo width_px")?;
        positive(self.height_px, "stereo height_px")?;
        positive(self.baseline, "stereo baseline")?;
        positive(self.min_range, "stereo min_range")?;
        if self.sample_cols == 0 || self.sample_rows == 0 {
            return Err(Error::param("stereo sample grid must be non-empty"));
        }
        if !(self.disparity_sigma >= 0.0) {
            return Err(Error::param("disparity_sigma must be >= 0"));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s >= 0.0) {
                return Err(Error::param("fixed_sigma must be >= 0"));
            }
        }
        if !(self.max_range > self.min_range) {
            return Err(Error::param("stereo max_range must exceed min_range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarParams {
    pub mount_height: f64,
    /// Elevation of the lowest and highest ring, degrees.
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub rings: usize,
    /// Horizontal field of view centered on +x, degrees.
    pub azimuth_fov_deg: f64,
    pub azimuth_step_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
    pub range_sigma: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        Self {
            mount_height: 1.0,
            elevation_min_deg: -25.0,
            elevation_max_deg: -2.0,
            rings: 24,
            azimuth_fov_deg: 120.0,
            azimuth_step_deg: 0.5,
            min_range: 0.5,
            max_range: 17.0,
            range_sigma: 0.02,
        }
    }
}

impl LidarParams {
    pub fn ring_elevations_deg(&self) -> Vec<f64> {
        if self.rings == 1 {
            return vec![self.elevation_min_deg];
        }
        let step = (self.elevation_max_deg - self.elevation_min_deg) / (self.rings - 1) as f64;
        (0..self.rings).map(|i| self.elevation_min_deg + step * i as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.mount_height, "lidar mount_height")?;
        positive(self.azimuth_fov_deg, "lidar azimuth_fov_deg")?;
        positive(self.azimuth_step_deg, "lidar azimuth_step_deg")?;
        positive(self.min_range, "lidar min_range")?;
        if self.rings == 0 {
            return Err(Error::param("lidar needs at least one ring"));
        }
        if !(self.elevation_max_deg >= self.elevation_min_deg) {
            return Err(Error::param("lidar elevation range is inverted"));
        }
        if !(self.max_range > self.min_range) {
            return Err(Error::param("lidar max_range must exceed min_range"));
        }
        if !(self.range_sigma >= 0.0) {
            return Err(Error::param("lidar range_sigma must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSimParams {
    pub mount_height: f64,
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub min_range: f64,
    pub range_resolution: f64,
    /// Full vertical opening of the fan, degrees.
    pub vertical_fov_deg: f64,
    pub clutter_mean: f64,
    /// Peak return per meter of illuminated height at unit reflectivity.
    pub target_gain: f64,
    pub sigma_range: f64,
    pub sigma_azimuth_deg: f64,
    /// Spacing of the footprint samples that make up an extended target.
    pub footprint_step: f64,
}

impl Default for RadarSimParams {
    fn default() -> Self {
        Self {
            mount_height: 1.0,
            range_bins: 485,
            azimuth_bins: 1440,
            min_range: 3.0,
            range_resolution: 0.2,
            vertical_fov_deg: 25.0,
            clutter_mean: 1.0,
            target_gain: 10.0,
            sigma_range: 0.25,
            sigma_azimuth_deg: 1.0,
            footprint_step: 0.05,
        }
    }
}

impl RadarSimParams {
    pub fn validate(&self) -> Result<()> {
        positive(self.mount_height, "radar mount_height")?;
        positive(self.min_range, "radar min_range")?;
        positive(self.range_resolution, "radar range_resolution")?;
        positive(self.vertical_fov_deg, "radar vertical_fov_deg")?;
        positive(self.sigma_range, "radar sigma_range")?;
        positive(self.sigma_azimuth_deg, "radar sigma_azimuth_deg")?;
        positive(self.footprint_step, "radar footprint_step")?;
        if self.range_bins == 0 || self.azimuth_bins == 0 {
            return Err(Error::param("radar image needs at least one bin"));
        }
        if !(self.clutter_mean >= 0.0 && self.target_gain >= 0.0) {
            return Err(Error::param("radar clutter_mean and target_gain must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    pub sigma: f64,
    /// Field of view around the stereo optical axis, degrees.
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            hfov_deg: 40.0,
            vfov_deg: 45.0,
            min_range: 2.0,
            max_range: 20.0,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::param("thermal sigma must be >= 0"));
        }
        positive(self.hfov_deg, "thermal hfov_deg")?;
        positive(self.vfov_deg, "thermal vfov_deg")?;
        if !(self.max_range > self.min_range && self.min_range >= 0.0) {
            return Err(Error::param("thermal range interval is invalid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub stereo: StereoParams,
    pub lidar: LidarParams,
    pub radar: RadarSimParams,
    pub thermal: ThermalParams,
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        self.stereo.validate()?;
        self.lidar.validate()?;
        self.radar.validate()?;
        self.thermal.validate()
    }
}
