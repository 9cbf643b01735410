//! Analytic scene: height field, solid obstacles, vegetation, water and
//! thermal features, with point queries and ray casting.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::spec::{CropSpec, ReliefSpec, SceneSpec, ShapeSpec, TerrainSpec, PERSON_TEMPERATURE};
use crate::error::Result;

pub type Vec3 = [f64; 3];

/// Rays leave solids and surfaces this far from the hit point.
const SURFACE_EPS: f64 = 1e-7;
/// Step of the vegetation attenuation integral, m.
const CROP_STEP: f64 = 0.05;
/// Plant spacing for canopy height variation, m.
const PLANT_PITCH: f64 = 0.3;

const OBSTACLE_ALBEDO: [f64; 3] = [0.35, 0.35, 0.38];
const PERSON_ALBEDO: [f64; 3] = [0.55, 0.2, 0.15];
const WATER_ALBEDO: [f64; 3] = [0.1, 0.14, 0.2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Ground,
    Obstacle(usize),
    Crop(usize),
    Water(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance along the (unit) ray to the returned point.
    pub range: f64,
    /// Returned point; for mirrored water rays this is the virtual point
    /// below the surface.
    pub point: Vec3,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Volume {
    Aabb { min: Vec3, max: Vec3 },
    /// Vertical cylinder.
    Cylinder { cx: f64, cy: f64, r: f64, z0: f64, z1: f64 },
}

/// An obstacle resolved against the terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solid {
    pub spec: ShapeSpec,
    volume: Volume,
    /// Terrain height under the footprint center.
    pub base: f64,
    pub temperature: f64,
    pub albedo: [f64; 3],
    pub reflectivity: f64,
}

impl Solid {
    /// Vertical interval `(bottom, top)` of the solid in world z.
    pub fn z_range(&self) -> (f64, f64) {
        match self.volume {
            Volume::Aabb { min, max } => (min[2], max[2]),
            Volume::Cylinder { z0, z1, .. } => (z0, z1),
        }
    }

    /// Height of the top above the terrain under the center.
    pub fn height(&self) -> f64 {
        self.z_range().1 - self.base
    }

    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        match self.volume {
            Volume::Aabb { min, max } => x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1],
            Volume::Cylinder { cx, cy, r, .. } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (z0, z1) = self.z_range();
        self.footprint_contains(p[0], p[1]) && p[2] >= z0 && p[2] <= z1
    }

    /// Footprint as a closed polygon, counter-clockwise.
    pub fn footprint_polygon(&self) -> Vec<(f64, f64)> {
        match self.volume {
            Volume::Aabb { min, max } => vec![(min[0], min[1]), (max[0], min[1]), (max[0], max[1]), (min[0], max[1])],
            Volume::Cylinder { cx, cy, r, .. } => (0..64)
                .map(|k| {
                    let a = k as f64 * std::f64::consts::TAU / 64.0;
                    (cx + r * a.cos(), cy + r * a.sin())
                })
                .collect(),
        }
    }

    /// Entry parameter of the ray into the solid, if it enters at
    /// `t ∈ (eps, t_max]`.
    fn intersect(&self, o: Vec3, d: Vec3, t_max: f64) -> Option<f64> {
        let t = match self.volume {
            Volume::Aabb { min, max } => slab(o, d, min, max)?,
            Volume::Cylinder { cx, cy, r, z0, z1 } => cylinder(o, d, cx, cy, r, z0, z1)?,
        };
        (t > SURFACE_EPS && t <= t_max).then_some(t)
    }
}

fn slab(o: Vec3, d: Vec3, min: Vec3, max: Vec3) -> Option<f64> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < min[k] || o[k] > max[k] {
                return None;
            }
        } else {
            let (a, b) = ((min[k] - o[k]) / d[k], (max[k] - o[k]) / d[k]);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (hi >= lo && lo > 0.0).then_some(lo)
}

fn cylinder(o: Vec3, d: Vec3, cx: f64, cy: f64, r: f64, z0: f64, z1: f64) -> Option<f64> {
    let (px, py) = (o[0] - cx, o[1] - cy);
    let mut best = f64::INFINITY;
    let a = d[0] * d[0] + d[1] * d[1];
    if a > 0.0 {
        let b = px * d[0] + py * d[1];
        let c = px * px + py * py - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let t = (-b - disc.sqrt()) / a;
            let z = o[2] + t * d[2];
            if t > 0.0 && z >= z0 && z <= z1 {
                best = t;
            }
        }
    }
    if d[2] != 0.0 {
        for cap in [z0, z1] {
            let t = (cap - o[2]) / d[2];
            let (x, y) = (px + t * d[0], py + t * d[1]);
            if t > 0.0 && x * x + y * y <= r * r && t < best {
                best = t;
            }
        }
    }
    best.is_finite().then_some(best)
}

impl TerrainSpec {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            TerrainSpec::Flat { height } => height,
            TerrainSpec::Sloped { height, grade_x, grade_y } => height + grade_x * x + grade_y * y,
            TerrainSpec::Rutted { amplitude, wavelength, direction_deg } => {
                let a = direction_deg.to_radians();
                amplitude * (std::f64::consts::TAU * (x * a.cos() + y * a.sin()) / wavelength).sin()
            }
            TerrainSpec::Crest { crest_x, up_grade, down_grade } => {
                if x <= crest_x {
                    up_grade * x
                } else {
                    up_grade * crest_x - down_grade * (x - crest_x)
                }
            }
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            TerrainSpec::Flat { .. } => (0.0, 0.0),
            TerrainSpec::Sloped { grade_x, grade_y, .. } => (grade_x, grade_y),
            TerrainSpec::Rutted { amplitude, wavelength, direction_deg } => {
                let a = direction_deg.to_radians();
                let k = std::f64::consts::TAU / wavelength;
                let g = amplitude * k * (k * (x * a.cos() + y * a.sin())).cos();
                (g * a.cos(), g * a.sin())
            }
            TerrainSpec::Crest { crest_x, up_grade, down_grade } => {
                if x <= crest_x {
                    (up_grade, 0.0)
                } else {
                    (-down_grade, 0.0)
                }
            }
        }
    }

    /// Slope angle at `(x, y)`, radians.
    pub fn slope(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = self.gradient(x, y);
        gx.hypot(gy).atan()
    }

    /// First `t ∈ (0, t_max]` where the ray meets the terrain.
    pub fn intersect(&self, o: Vec3, d: Vec3, t_max: f64) -> Option<f64> {
        let f0 = o[2] - self.height(o[0], o[1]);
        if f0 < 0.0 {
            return None;
        }
        let plane = |h0: f64, gx: f64, gy: f64| {
            let rate = gx * d[0] + gy * d[1] - d[2];
            let f = o[2] - (h0 + gx * o[0] + gy * o[1]);
            (rate > 0.0).then(|| f / rate)
        };
        let t = match *self {
            TerrainSpec::Flat { height } => plane(height, 0.0, 0.0),
            TerrainSpec::Sloped { height, grade_x, grade_y } => plane(height, grade_x, grade_y),
            TerrainSpec::Crest { crest_x, up_grade, down_grade } => {
                let near = plane(0.0, up_grade, 0.0).filter(|t| o[0] + t * d[0] <= crest_x);
                let far = plane(up_grade * crest_x + down_grade * crest_x, -down_grade, 0.0)
                    .filter(|t| o[0] + t * d[0] > crest_x);
                match (near, far) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            }
            TerrainSpec::Rutted { .. } => {
                march(|t| o[2] + t * d[2] - self.height(o[0] + t * d[0], o[1] + t * d[1]), self.lipschitz() * d[0].hypot(d[1]) - d[2], t_max)
            }
        };
        t.filter(|t| *t >= 0.0 && *t <= t_max)
    }
}

/// Sphere-tracing style root search for `f(t) = 0` where `f` can fall no
/// faster than `rate`.
fn march(f: impl Fn(f64) -> f64, rate: f64, t_max: f64) -> Option<f64> {
    if rate <= 0.0 {
        return None;
    }
    let mut t = 0.0;
    for _ in 0..20_000 {
        let v = f(t);
        if v < 1e-10 {
            return Some(t);
        }
        t += v / rate;
        if t > t_max {
            return None;
        }
    }
    Some(t)
}

fn hash_unit(seed: u64, a: i64, b: i64, c: u64) -> f64 {
    let mut z = seed ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ c.rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ((z >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Resolved micro-relief: two crossing sinusoids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relief {
    amplitude: f64,
    /// Unit directions and wavenumbers of the two components.
    waves: [(f64, f64, f64, f64); 2],
}

impl Relief {
    fn new(spec: ReliefSpec, seed: u64) -> Self {
        let k = std::f64::consts::TAU / spec.wavelength;
        let wave = |j: u64, dir_deg: f64, scale: f64| {
            let a = dir_deg.to_radians();
            (a.cos(), a.sin(), k * scale, std::f64::consts::TAU * hash_unit(seed, 0, 0, 0x5e11 + j))
        };
        Self { amplitude: spec.amplitude, waves: [wave(0, 20.0, 1.0), wave(1, 115.0, 1.37)] }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        0.5 * self.amplitude * self.waves.iter().map(|&(c, s, k, p)| (k * (c * x + s * y) + p).sin()).sum::<f64>()
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        self.waves.iter().fold((0.0, 0.0), |(gx, gy), &(c, s, k, p)| {
            let g = 0.5 * self.amplitude * k * (k * (c * x + s * y) + p).cos();
            (gx + g * c, gy + g * s)
        })
    }

    /// Upper bound on the horizontal rate of change of the height.
    pub fn lipschitz(&self) -> f64 {
        0.5 * self.amplitude * self.waves.iter().map(|w| w.2).sum::<f64>()
    }
}

impl TerrainSpec {
    /// Upper bound on the horizontal rate of change of the height.
    fn lipschitz(&self) -> f64 {
        match *self {
            TerrainSpec::Flat { .. } => 0.0,
            TerrainSpec::Sloped { grade_x, grade_y, .. } => grade_x.hypot(grade_y),
            TerrainSpec::Rutted { amplitude, wavelength, .. } => amplitude * std::f64::consts::TAU / wavelength,
            TerrainSpec::Crest { up_grade, down_grade, .. } => up_grade.abs().max(down_grade.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub solids: Vec<Solid>,
    pub relief: Option<Relief>,
}

/// Validates `spec` and resolves every obstacle against the terrain.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let relief = spec.relief.map(|r| Relief::new(r, spec.seed));
    let t = |x: f64, y: f64| spec.terrain.height(x, y) + relief.map_or(0.0, |r| r.height(x, y));
    let sink = relief.map_or(0.0, |r| r.amplitude);
    let solids = spec
        .obstacles
        .iter()
        .map(|o| {
            let (cx, cy) = o.shape.center();
            let base = t(cx, cy);
            let (x0, y0, x1, y1) = o.shape.footprint_bounds();
            let low = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (cx, cy)]
                .iter()
                .map(|&(x, y)| t(x, y))
                .fold(f64::INFINITY, f64::min)
                - sink;
            let volume = match o.shape {
                ShapeSpec::Box { height, .. } => Volume::Aabb { min: [x0, y0, low], max: [x1, y1, base + height] },
                ShapeSpec::Overhang { bottom, thickness, .. } => Volume::Aabb {
                    min: [x0, y0, base + bottom],
                    max: [x1, y1, base + bottom + thickness],
                },
                ShapeSpec::Cylinder { x, y, radius, height } | ShapeSpec::Person { x, y, radius, height } => {
                    Volume::Cylinder { cx: x, cy: y, r: radius, z0: low, z1: base + height }
                }
            };
            let person = matches!(o.shape, ShapeSpec::Person { .. });
            Solid {
                spec: o.shape,
                volume,
                base,
                temperature: o
                    .temperature
                    .unwrap_or(if person { PERSON_TEMPERATURE } else { spec.ambient_temperature }),
                albedo: o.albedo.unwrap_or(if person { PERSON_ALBEDO } else { OBSTACLE_ALBEDO }),
                reflectivity: o.reflectivity,
            }
        })
        .collect();
    Ok(Scene { spec: spec.clone(), solids, relief })
}

impl Scene {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.spec.terrain.height(x, y) + self.relief.map_or(0.0, |r| r.height(x, y))
    }

    /// Terrain slope angle at `(x, y)`, radians.
    pub fn slope(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = self.spec.terrain.gradient(x, y);
        let (rx, ry) = self.relief.map_or((0.0, 0.0), |r| r.gradient(x, y));
        (gx + rx).hypot(gy + ry).atan()
    }

    /// First `t ∈ [0, t_max]` where the ray meets the terrain.
    pub fn intersect_terrain(&self, o: Vec3, d: Vec3, t_max: f64) -> Option<f64> {
        match self.relief {
            None => self.spec.terrain.intersect(o, d, t_max),
            Some(r) => {
                if o[2] < self.height(o[0], o[1]) {
                    return None;
                }
                let lip = self.spec.terrain.lipschitz() + r.lipschitz();
                march(|t| o[2] + t * d[2] - self.height(o[0] + t * d[0], o[1] + t * d[1]), lip * d[0].hypot(d[1]) - d[2], t_max)
            }
        }
    }

    pub fn ground_temperature(&self) -> f64 {
        self.spec.ground_temperature.unwrap_or(self.spec.ambient_temperature)
    }

    /// Is `(x, y, z)` inside any obstacle?
    pub fn occupancy(&self, x: f64, y: f64, z: f64) -> bool {
        self.solids.iter().any(|s| s.contains([x, y, z]))
    }

    fn crop_at(&self, x: f64, y: f64) -> Option<(usize, &CropSpec)> {
        self.spec
            .crops
            .iter()
            .enumerate()
            .find(|(_, c)| x >= c.x_min && x <= c.x_max && y >= c.y_min && y <= c.y_max)
    }

    /// Canopy height above the terrain at `(x, y)`, zero outside crops.
    pub fn canopy_height(&self, x: f64, y: f64) -> f64 {
        match self.crop_at(x, y) {
            None => 0.0,
            Some((i, c)) => {
                let (ix, iy) = ((x / PLANT_PITCH).floor() as i64, (y / PLANT_PITCH).floor() as i64);
                let u1 = hash_unit(self.spec.seed, ix, iy, 2 * i as u64);
                let u2 = hash_unit(self.spec.seed, ix, iy, 2 * i as u64 + 1);
                let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (c.height + c.height_std * n).max(0.0)
            }
        }
    }

    fn in_canopy(&self, p: Vec3) -> Option<usize> {
        let (i, _) = self.crop_at(p[0], p[1])?;
        let h = self.height(p[0], p[1]);
        (p[2] >= h && p[2] <= h + self.canopy_height(p[0], p[1])).then_some(i)
    }

    fn water_at(&self, x: f64, y: f64) -> Option<usize> {
        self.spec
            .water
            .iter()
            .position(|w| (x - w.x).powi(2) + (y - w.y).powi(2) <= w.radius * w.radius)
    }

    /// Surface temperature of `material` at the point `p`.
    pub fn material_temperature(&self, material: Material, p: Vec3) -> f64 {
        match material {
            Material::Obstacle(i) => self.solids[i].temperature,
            Material::Crop(i) => self.spec.crops[i].temperature.unwrap_or(self.spec.ambient_temperature),
            Material::Water(i) => self.spec.water[i].temperature,
            Material::Ground => self
                .spec
                .hotspots
                .iter()
                .find(|h| (p[0] - h.x).powi(2) + (p[1] - h.y).powi(2) <= h.radius * h.radius)
                .map_or(self.ground_temperature(), |h| h.temperature),
        }
    }

    pub fn albedo(&self, material: Material) -> [f64; 3] {
        match material {
            Material::Obstacle(i) => self.solids[i].albedo,
            Material::Crop(i) => self.spec.crops[i].albedo,
            Material::Water(_) => WATER_ALBEDO,
            Material::Ground => self.spec.ground_albedo,
        }
    }

    /// Temperature at an arbitrary location: the solid containing it, the
    /// canopy, water, a hotspot or the bare ground, in that order.
    pub fn temperature(&self, x: f64, y: f64, z: f64) -> f64 {
        let p = [x, y, z];
        if let Some(i) = self.solids.iter().position(|s| s.contains(p)) {
            return self.solids[i].temperature;
        }
        if let Some(i) = self.in_canopy(p) {
            return self.material_temperature(Material::Crop(i), p);
        }
        if let Some(i) = self.water_at(x, y) {
            if (z - self.height(x, y)).abs() < 1e-6 {
                return self.spec.water[i].temperature;
            }
        }
        if z <= self.height(x, y) + 1e-6 {
            return self.material_temperature(Material::Ground, p);
        }
        self.spec.ambient_temperature
    }

    /// Nearest opaque surface (terrain or solid) along the ray.
    pub fn first_surface(&self, o: Vec3, d: Vec3, t_max: f64) -> Option<(f64, Material)> {
        let mut best = self.intersect_terrain(o, d, t_max).map(|t| (t, Material::Ground));
        for (i, s) in self.solids.iter().enumerate() {
            let limit = best.map_or(t_max, |b| b.0);
            if let Some(t) = s.intersect(o, d, limit) {
                if best.map_or(true, |b| t < b.0) {
                    best = Some((t, Material::Obstacle(i)));
                }
            }
        }
        best
    }

    /// Where a ray with optical-depth budget `budget` stops inside the
    /// vegetation before `t_end`, if it does.
    fn crop_stop(&self, o: Vec3, d: Vec3, t_end: f64, budget: f64) -> Option<(f64, usize)> {
        let mut t0 = f64::INFINITY;
        let mut t1 = 0.0f64;
        for c in &self.spec.crops {
            let (mut lo, mut hi) = (0.0f64, t_end);
            for (ov, dv, a, b) in [(o[0], d[0], c.x_min, c.x_max), (o[1], d[1], c.y_min, c.y_max)] {
                if dv == 0.0 {
                    if ov < a || ov > b {
                        lo = f64::INFINITY;
                    }
                } else {
                    let (ta, tb) = ((a - ov) / dv, (b - ov) / dv);
                    lo = lo.max(ta.min(tb));
                    hi = hi.min(ta.max(tb));
                }
            }
            if lo < hi {
                t0 = t0.min(lo);
                t1 = t1.max(hi);
            }
        }
        if !(t0 < t1) {
            return None;
        }
        let mut tau = 0.0;
        let mut t = t0;
        while t < t1 {
            let dt = CROP_STEP.min(t1 - t);
            let mid = t + 0.5 * dt;
            let p = [o[0] + mid * d[0], o[1] + mid * d[1], o[2] + mid * d[2]];
            if let Some(i) = self.in_canopy(p) {
                let k = self.spec.crops[i].density;
                if tau + k * dt >= budget {
                    return Some((t + (budget - tau) / k, i));
                }
                tau += k * dt;
            }
            t += dt;
        }
        None
    }

    /// Casts a unit-direction ray. Vegetation stops rays at random depths
    /// and water mirrors most of them, so the caller supplies the ray's RNG.
    pub fn cast<R: Rng + ?Sized>(&self, o: Vec3, d: Vec3, t_max: f64, rng: &mut R) -> Option<Hit> {
        let budget: f64 = Exp1.sample(rng);
        let u: f64 = rng.gen();
        self.cast_with(o, d, t_max, budget, u, true)
    }

    fn cast_with(&self, o: Vec3, d: Vec3, t_max: f64, budget: f64, u: f64, allow_mirror: bool) -> Option<Hit> {
        let surface = self.first_surface(o, d, t_max);
        let t_end = surface.map_or(t_max, |s| s.0);
        let at = |t: f64| [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        if !self.spec.crops.is_empty() {
            if let Some((t, i)) = self.crop_stop(o, d, t_end, budget) {
                return Some(Hit { range: t, point: at(t), material: Material::Crop(i) });
            }
        }
        let (t, material) = surface?;
        let p = at(t);
        if material == Material::Ground {
            if let Some(w) = self.water_at(p[0], p[1]) {
                if u < self.spec.water[w].surface_return || !allow_mirror {
                    return Some(Hit { range: t, point: p, material: Material::Water(w) });
                }
                let r = [d[0], d[1], -d[2]];
                let start = [p[0] + SURFACE_EPS * r[0], p[1] + SURFACE_EPS * r[1], p[2] + SURFACE_EPS * r[2]];
                let back = self.cast_with(start, r, t_max - t, budget, 1.0, false)?;
                let range = t + back.range;
                return Some(Hit { range, point: at(range), material: Material::Water(w) });
            }
        }
        Some(Hit { range: t, point: p, material })
    }
}
