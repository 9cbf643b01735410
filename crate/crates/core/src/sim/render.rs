//! Sensor models: pinhole stereo, ring-scanning LIDAR, fan-beam radar,
//! thermal annotation and bracketed exposures.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::scene::{Material, Scene, Vec3};
use super::spec::{LidarParams, RadarSimParams, StereoParams, ThermalParams};
use crate::cells::{fuse_exposures, Exposure, ExposureStack};
use crate::error::Result;
use crate::geo3d::{Point3, PointCloud};
use crate::radar::RadarImage;

/// True surface behind a rendered point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub point: Vec3,
    pub material: Material,
}

/// A rendered point cloud with the noise-free surface of every point,
/// index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub cloud: PointCloud,
    pub surfaces: Vec<Surface>,
    /// Sensor position.
    pub origin: Vec3,
}

fn normalize(v: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Camera frame of the stereo head: origin, forward, left and up axes.
pub fn stereo_frame(scene: &Scene, params: &StereoParams) -> (Vec3, Vec3, Vec3, Vec3) {
    let p = params.pitch_deg.to_radians();
    let origin = [0.0, 0.0, scene.height(0.0, 0.0) + params.mount_height];
    (origin, [p.cos(), 0.0, -p.sin()], [0.0, 1.0, 0.0], [p.sin(), 0.0, p.cos()])
}

/// Ray-casts a grid of `sample_cols × sample_rows` pixels spread over the
/// image. Depth noise `z²/(f·b)·σ_d` (or `fixed_sigma`) is applied along
/// each ray; colors are surface albedos.
pub fn render_stereo_cloud<R: Rng + ?Sized>(scene: &Scene, params: &StereoParams, frame_id: u64, rng: &mut R) -> Scan {
    let (o, fwd, left, up) = stereo_frame(scene, params);
    let mut points = Vec::new();
    let mut surfaces = Vec::new();
    for row in 0..params.sample_rows {
        let v = (row as f64 + 0.5) * params.height_px / params.sample_rows as f64;
        let dv = (params.height_px / 2.0 - v) / params.focal_px;
        for col in 0..params.sample_cols {
            let u = (col as f64 + 0.5) * params.width_px / params.sample_cols as f64;
            let du = (params.width_px / 2.0 - u) / params.focal_px;
            let d = normalize([
                fwd[0] + du * left[0] + dv * up[0],
                fwd[1] + du * left[1] + dv * up[1],
                fwd[2] + du * left[2] + dv * up[2],
            ]);
            let noise = normal(rng);
            let Some(hit) = scene.cast(o, d, params.max_range, rng) else {
                continue;
            };
            if hit.range < params.min_range {
                continue;
            }
            let depth = hit.range * dot(d, fwd);
            let sigma = params.fixed_sigma.unwrap_or_else(|| params.depth_sigma(depth));
            let range = hit.range * (depth + sigma * noise) / depth;
            let p = [o[0] + range * d[0], o[1] + range * d[1], o[2] + range * d[2]];
            points.push(Point3::new(p[0], p[1], p[2]).with_color(scene.albedo(hit.material)));
            surfaces.push(Surface { point: hit.point, material: hit.material });
        }
    }
    Scan { cloud: PointCloud::new(points, frame_id), surfaces, origin: o }
}

/// Sweeps every ring across the horizontal field of view.
pub fn render_lidar_scan<R: Rng + ?Sized>(scene: &Scene, params: &LidarParams, frame_id: u64, rng: &mut R) -> Scan {
    let o = [0.0, 0.0, scene.height(0.0, 0.0) + params.mount_height];
    let steps = (params.azimuth_fov_deg / params.azimuth_step_deg).round() as usize + 1;
    let mut points = Vec::new();
    let mut surfaces = Vec::new();
    for el in params.ring_elevations_deg() {
        let el = el.to_radians();
        for k in 0..steps {
            let az = (-params.azimuth_fov_deg / 2.0 + k as f64 * params.azimuth_step_deg).to_radians();
            let d = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
            let noise = normal(rng);
            let Some(hit) = scene.cast(o, d, params.max_range, rng) else {
                continue;
            };
            if hit.range < params.min_range {
                continue;
            }
            let range = hit.range + params.range_sigma * noise;
            points.push(Point3::new(o[0] + range * d[0], o[1] + range * d[1], o[2] + range * d[2]));
            surfaces.push(Surface { point: hit.point, material: hit.material });
        }
    }
    Scan { cloud: PointCloud::new(points, frame_id), surfaces, origin: o }
}

/// Annotates the points of a stereo scan that fall inside the thermal
/// camera's field of view with the temperature of their true surface plus
/// Gaussian noise. Points outside keep no temperature.
pub fn render_thermal_points<R: Rng + ?Sized>(
    scene: &Scene,
    stereo: &StereoParams,
    params: &ThermalParams,
    scan: &Scan,
    rng: &mut R,
) -> PointCloud {
    let (o, fwd, left, up) = stereo_frame(scene, stereo);
    let (th, tv) = ((params.hfov_deg / 2.0).to_radians().tan(), (params.vfov_deg / 2.0).to_radians().tan());
    let points = scan
        .cloud
        .points
        .iter()
        .zip(&scan.surfaces)
        .map(|(p, s)| {
            let noise = normal(rng);
            let rel = [s.point[0] - o[0], s.point[1] - o[1], s.point[2] - o[2]];
            let z = dot(rel, fwd);
            let range = dot(rel, rel).sqrt();
            let visible = z > 0.0
                && (dot(rel, left) / z).abs() <= th
                && (dot(rel, up) / z).abs() <= tv
                && range >= params.min_range
                && range <= params.max_range;
            let mut q = *p;
            if visible {
                q.temperature = Some(scene.material_temperature(s.material, s.point) + params.sigma * noise);
            }
            q
        })
        .collect();
    PointCloud::new(points, scan.cloud.frame_id)
}

/// Vertical extent of `[z0, z1]` inside the radar fan at horizontal
/// distance `rho`.
pub fn fan_coverage(params: &RadarSimParams, radar_z: f64, rho: f64, z0: f64, z1: f64) -> f64 {
    let half = (params.vertical_fov_deg / 2.0).to_radians().tan() * rho;
    (z1.min(radar_z + half) - z0.max(radar_z - half)).max(0.0)
}

fn footprint_samples(scene: &Scene, i: usize, step: f64) -> Vec<(f64, f64)> {
    let s = &scene.solids[i];
    let (x0, y0, x1, y1) = s.spec.footprint_bounds();
    let nx = ((x1 - x0) / step).ceil().max(1.0) as usize;
    let ny = ((y1 - y0) / step).ceil().max(1.0) as usize;
    let mut out = vec![s.spec.center()];
    for a in 0..=nx {
        for b in 0..=ny {
            let (x, y) = (x0 + (x1 - x0) * a as f64 / nx as f64, y0 + (y1 - y0) * b as f64 / ny as f64);
            if s.footprint_contains(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Noise-free peak return of obstacle `i`: gain times reflectivity times
/// the largest height of the obstacle inside the fan over its footprint.
pub fn radar_peak_signal(scene: &Scene, params: &RadarSimParams, i: usize) -> f64 {
    let s = &scene.solids[i];
    let radar_z = scene.height(0.0, 0.0) + params.mount_height;
    let (z0, z1) = s.z_range();
    footprint_samples(scene, i, params.footprint_step)
        .iter()
        .map(|&(x, y)| fan_coverage(params, radar_z, x.hypot(y), z0, z1))
        .fold(0.0, f64::max)
        * params.target_gain
        * s.reflectivity
}

/// Polar image: exponential clutter plus, per obstacle, the strongest
/// point-spread response over its footprint samples. Each footprint sample
/// returns gain · reflectivity · (height inside the fan).
pub fn render_radar_image<R: Rng + ?Sized>(scene: &Scene, params: &RadarSimParams, rng: &mut R) -> Result<RadarImage> {
    let mut img = RadarImage::zeros(params.range_bins, params.azimuth_bins, params.range_resolution, params.min_range)?;
    for v in img.intensities.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *v = params.clutter_mean * e;
    }
    let radar_z = scene.height(0.0, 0.0) + params.mount_height;
    let sig_a = params.sigma_azimuth_deg.to_radians();
    let sig_r = params.sigma_range;
    let az_res = img.azimuth_resolution();
    let na = params.azimuth_bins as isize;
    for i in 0..scene.solids.len() {
        let (z0, z1) = scene.solids[i].z_range();
        let gain = params.target_gain * scene.solids[i].reflectivity;
        let mut response: HashMap<usize, f64> = HashMap::new();
        for (x, y) in footprint_samples(scene, i, params.footprint_step) {
            let (rho, theta) = (x.hypot(y), y.atan2(x));
            let s = gain * fan_coverage(params, radar_z, rho, z0, z1);
            if s <= 0.0 {
                continue;
            }
            let r_lo = ((rho - 4.0 * sig_r - params.min_range) / params.range_resolution).floor().max(0.0) as usize;
            let r_hi = (((rho + 4.0 * sig_r - params.min_range) / params.range_resolution).ceil().max(0.0) as usize)
                .min(params.range_bins);
            let c = (theta.rem_euclid(std::f64::consts::TAU) / az_res).round() as isize;
            let span = (4.0 * sig_a / az_res).ceil() as isize;
            for rb in r_lo..r_hi {
                let dr = img.range_center(rb) - rho;
                let fr = (-dr * dr / (2.0 * sig_r * sig_r)).exp();
                for k in -span..=span {
                    let ab = (c + k).rem_euclid(na) as usize;
                    let mut da = img.azimuth_center(ab) - theta;
                    da = (da + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                    let v = s * fr * (-da * da / (2.0 * sig_a * sig_a)).exp();
                    let e = response.entry(rb * params.azimuth_bins + ab).or_insert(0.0);
                    *e = e.max(v);
                }
            }
        }
        let mut keys: Vec<_> = response.into_iter().collect();
        keys.sort_by_key(|(k, _)| *k);
        for (k, v) in keys {
            img.intensities[k] += v;
        }
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdrParams {
    /// Exposure times, increasing.
    pub times: [f64; 3],
    pub sun: f64,
    pub sky: f64,
    /// Unit vector toward the sun.
    pub sun_dir: Vec3,
    pub pixel_noise: f64,
}

impl Default for HdrParams {
    fn default() -> Self {
        Self {
            times: [0.25, 1.0, 4.0],
            sun: 1.0,
            sky: 0.08,
            sun_dir: normalize([-0.4, 0.3, 0.8]),
            pixel_noise: 0.002,
        }
    }
}

/// Colors for the points of a scan recovered through bracketed exposures:
/// surfaces shadowed by an obstacle see only sky light, each channel is
/// captured at every exposure time, clipped, and fused back to radiance.
pub fn render_hdr_colors<R: Rng + ?Sized>(scene: &Scene, scan: &Scan, params: &HdrParams, rng: &mut R) -> Result<Vec<[f64; 3]>> {
    let n = scan.surfaces.len();
    let radiance: Vec<[f64; 3]> = scan
        .surfaces
        .iter()
        .map(|s| {
            let lit = scene.first_surface(s.point, params.sun_dir, 100.0).is_none();
            let e = if lit { params.sun } else { params.sky };
            scene.albedo(s.material).map(|a| a * e)
        })
        .collect();
    let scale = 0.8 / (params.sun * params.times[1]);
    let mut out = vec![[0.0; 3]; n];
    if n == 0 {
        return Ok(out);
    }
    for ch in 0..3 {
        let images = params
            .times
            .iter()
            .map(|&t| Exposure {
                pixels: radiance
                    .iter()
                    .map(|r| (r[ch] * t * scale + params.pixel_noise * normal(rng)).clamp(0.0, 1.0))
                    .collect(),
                time: t,
            })
            .collect();
        let fused = fuse_exposures(&ExposureStack::new(n, 1, images)?)?;
        for (o, v) in out.iter_mut().zip(fused) {
            o[ch] = (v / (scale * params.sun)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sim::scene::generate_scene;
    use crate::sim::spec::{ObstacleSpec, SceneSpec, ShapeSpec};

    fn scene(obstacles: Vec<ShapeSpec>) -> Scene {
        generate_scene(&SceneSpec {
            obstacles: obstacles.into_iter().map(ObstacleSpec::new).collect(),
            ..Default::default()
        })
        .unwrap()
    }

    fn quiet_stereo() -> StereoParams {
        StereoParams { disparity_sigma: 0.0, ..Default::default() }
    }

    #[test]
    fn noise_free_flat_stereo_lies_on_the_plane() {
        let s = scene(vec![]);
        let scan = render_stereo_cloud(&s, &quiet_stereo(), 0, &mut stream(1, "t"));
        assert!(scan.cloud.len() > 10_000);
        for p in &scan.cloud.points {
            assert!(p.z.abs() < 1e-9);
            let r = (p.x * p.x + p.y * p.y + (p.z - 2.0).powi(2)).sqrt();
            assert!((2.0 - 1e-9..=30.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn stereo_depth_noise_scales_inversely_with_baseline() {
        // Wall facing the camera, so depth noise is range noise along x.
        let s = scene(vec![ShapeSpec::Box { x: 12.5, y: 0.0, size_x: 1.0, size_y: 30.0, height: 6.0 }]);
        let spread = |b: f64, seed: u64| {
            let p = StereoParams { baseline: b, pitch_deg: 0.0, sample_cols: 128, sample_rows: 96, ..Default::default() };
            let mut xs = Vec::new();
            let mut k = 0;
            while xs.len() < 10_000 {
                let scan = render_stereo_cloud(&s, &p, 0, &mut stream(seed, &format!("baseline{k}")));
                for (pt, sf) in scan.cloud.points.iter().zip(&scan.surfaces) {
                    if sf.material == Material::Obstacle(0) && sf.point[2] > 1.0 && sf.point[2] < 3.0 {
                        xs.push(pt.x - sf.point[0]);
                    }
                }
                k += 1;
            }
            xs.truncate(10_000);
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        let ratio = spread(0.24, 1) / spread(0.48, 2);
        assert!((ratio - 2.0).abs() <= 0.2, "σ ratio {ratio}");
    }

    #[test]
    fn no_point_hides_behind_an_obstacle() {
        let s = scene(vec![
            ShapeSpec::Box { x: 6.0, y: 0.0, size_x: 1.0, size_y: 2.0, height: 1.5 },
            ShapeSpec::Cylinder { x: 9.0, y: -3.0, radius: 0.4, height: 2.5 },
        ]);
        let check = |scan: &Scan| {
            for sf in &scan.surfaces {
                let o = scan.origin;
                let v = [sf.point[0] - o[0], sf.point[1] - o[1], sf.point[2] - o[2]];
                let len = dot(v, v).sqrt();
                let d = [v[0] / len, v[1] / len, v[2] / len];
                // sample the sight line: never inside a solid before the surface
                for j in 1..200 {
                    let t = len * j as f64 / 200.0 - 1e-6;
                    let q = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
                    assert!(!s.occupancy(q[0], q[1], q[2]) || t > len - 1e-3, "{:?}", sf.point);
                }
            }
        };
        check(&render_stereo_cloud(&s, &StereoParams { sample_cols: 96, sample_rows: 72, ..Default::default() }, 0, &mut stream(2, "t")));
        check(&render_lidar_scan(&s, &LidarParams::default(), 0, &mut stream(3, "t")));
        let stereo = render_stereo_cloud(&s, &quiet_stereo(), 0, &mut stream(2, "t"));
        let behind = stereo.surfaces.iter().filter(|sf| sf.point[0] > 6.5 && sf.point[0] < 9.0 && sf.point[1].abs() < 0.3);
        assert_eq!(behind.count(), 0, "ground right behind the box is in shadow");
    }

    #[test]
    fn lidar_cutoff_and_rings() {
        let s = scene(vec![]);
        let p = LidarParams { range_sigma: 0.0, ..Default::default() };
        let scan = render_lidar_scan(&s, &p, 0, &mut stream(4, "t"));
        let elevations = p.ring_elevations_deg();
        for pt in &scan.cloud.points {
            let rho = pt.x.hypot(pt.y);
            let r = (rho * rho + 1.0).sqrt();
            assert!(r <= 17.0 + 1e-9);
            // closed-form ring radius h / tan(-e)
            assert!(elevations.iter().any(|e| (rho - 1.0 / (-e.to_radians()).tan()).abs() < 1e-9), "rho {rho}");
        }
        let noisy = render_lidar_scan(&s, &LidarParams::default(), 0, &mut stream(4, "t"));
        let worst = noisy
            .cloud
            .points
            .iter()
            .map(|pt| {
                let rho = pt.x.hypot(pt.y);
                elevations
                    .iter()
                    .map(|e| (rho - 1.0 / (-e.to_radians()).tan()).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(worst < 6.0 * 0.02, "{worst}");
    }

    #[test]
    fn lidar_ignores_targets_beyond_max_range() {
        let far = scene(vec![ShapeSpec::Box { x: 18.0, y: 0.0, size_x: 1.0, size_y: 2.0, height: 3.0 }]);
        let p = LidarParams { elevation_min_deg: 0.0, elevation_max_deg: 5.0, rings: 3, ..Default::default() };
        assert!(render_lidar_scan(&far, &p, 0, &mut stream(5, "t")).cloud.is_empty());
        let wall = scene(vec![ShapeSpec::Box { x: 10.5, y: 0.0, size_x: 1.0, size_y: 4.0, height: 3.0 }]);
        let p = LidarParams { range_sigma: 0.0, elevation_min_deg: 0.0, elevation_max_deg: 0.0, rings: 1, azimuth_fov_deg: 2.0, ..Default::default() };
        let scan = render_lidar_scan(&wall, &p, 0, &mut stream(5, "t"));
        assert!(!scan.cloud.is_empty());
        for pt in &scan.cloud.points {
            assert!((pt.x - 10.0).abs() < 1e-9, "{}", pt.x);
        }
    }

    #[test]
    fn thermal_annotation() {
        let s = generate_scene(&SceneSpec {
            obstacles: vec![ObstacleSpec::new(ShapeSpec::Person { x: 8.0, y: 1.0, radius: 0.25, height: 1.7 })],
            ..Default::default()
        })
        .unwrap();
        let stereo = StereoParams::default();
        let scan = render_stereo_cloud(&s, &stereo, 0, &mut stream(6, "t"));
        let exact = render_thermal_points(&s, &stereo, &ThermalParams { sigma: 0.0, ..Default::default() }, &scan, &mut stream(6, "th"));
        let mut person = 0;
        for (p, sf) in exact.points.iter().zip(&scan.surfaces) {
            if let Some(t) = p.temperature {
                // query just beneath the surface along the sight line
                let o = scan.origin;
                let v = [sf.point[0] - o[0], sf.point[1] - o[1], sf.point[2] - o[2]];
                let k = 1.0 + 1e-6 / dot(v, v).sqrt();
                assert_eq!(t, s.temperature(o[0] + k * v[0], o[1] + k * v[1], o[2] + k * v[2]));
                if sf.material == Material::Obstacle(0) {
                    assert_eq!(t, 310.0);
                    person += 1;
                } else {
                    assert_eq!(t, 288.0);
                }
            }
        }
        assert!(person > 20);
        let noisy = render_thermal_points(&s, &stereo, &ThermalParams::default(), &scan, &mut stream(6, "th"));
        let ground: Vec<f64> = noisy
            .points
            .iter()
            .zip(&scan.surfaces)
            .filter(|(_, sf)| sf.material == Material::Ground)
            .filter_map(|(p, _)| p.temperature)
            .collect();
        let m = ground.iter().sum::<f64>() / ground.len() as f64;
        assert!((m - 288.0).abs() < 0.05, "{m}");
    }

    fn ks_exponential(xs: &mut [f64], mean: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / mean).exp();
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn empty_scene_radar_is_exponential_clutter() {
        let p = RadarSimParams { clutter_mean: 2.5, ..Default::default() };
        let img = render_radar_image(&scene(vec![]), &p, &mut stream(7, "radar")).unwrap();
        let mut xs = img.intensities.clone();
        assert!(xs.len() >= 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean / 2.5 - 1.0).abs() < 0.05, "{mean}");
        // 1% critical value of the one-sample KS statistic
        let d = ks_exponential(&mut xs, 2.5);
        assert!(d < 1.63 / (xs.len() as f64).sqrt(), "KS {d}");
    }

    #[test]
    fn pole_peaks_in_its_bin() {
        let (r, a) = (20.0, 30f64.to_radians());
        let s = scene(vec![ShapeSpec::Cylinder { x: r * a.cos(), y: r * a.sin(), radius: 0.1, height: 3.0 }]);
        let p = RadarSimParams { clutter_mean: 0.0, ..Default::default() };
        let img = render_radar_image(&s, &p, &mut stream(8, "radar")).unwrap();
        let (best, _) = img.intensities.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (rb, ab) = (best / p.azimuth_bins, best % p.azimuth_bins);
        assert_eq!(Some((rb, ab)), img.bin_of(r * a.cos(), r * a.sin()));
        let peak = img.intensities[best];
        assert!((peak - radar_peak_signal(&s, &p, 0)).abs() / peak < 0.05);
        assert_eq!(img.intensities.iter().filter(|&&v| v == peak).count(), 1);
    }

    #[test]
    fn small_bright_matches_large_dull() {
        let mk = |shape, refl| ObstacleSpec { reflectivity: refl, ..ObstacleSpec::new(shape) };
        let spec = SceneSpec {
            obstacles: vec![
                mk(ShapeSpec::Cylinder { x: 15.0, y: -4.0, radius: 0.1, height: 1.0 }, 2.0),
                mk(ShapeSpec::Box { x: 15.0, y: 4.0, size_x: 1.0, size_y: 1.0, height: 2.0 }, 1.0),
            ],
            ..Default::default()
        };
        let s = generate_scene(&spec).unwrap();
        let p = RadarSimParams { clutter_mean: 0.0, ..Default::default() };
        let img = render_radar_image(&s, &p, &mut stream(9, "radar")).unwrap();
        let peak_near = |x: f64, y: f64| {
            let (rb, ab) = img.bin_of(x, y).unwrap();
            let mut m: f64 = 0.0;
            for r in rb.saturating_sub(5)..(rb + 6).min(p.range_bins) {
                for a in ab.saturating_sub(40)..(ab + 41).min(p.azimuth_bins) {
                    m = m.max(img.at(r, a));
                }
            }
            m
        };
        let (a, b) = (peak_near(15.0, -4.0), peak_near(15.0, 4.0));
        assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
    }

    #[test]
    fn hdr_colors_recover_albedo_in_and_out_of_shadow() {
        let s = scene(vec![ShapeSpec::Box { x: 8.0, y: 0.0, size_x: 2.0, size_y: 2.0, height: 3.0 }]);
        let scan = render_stereo_cloud(&s, &StereoParams { sample_cols: 64, sample_rows: 48, ..quiet_stereo() }, 0, &mut stream(10, "t"));
        let params = HdrParams::default();
        let colors = render_hdr_colors(&s, &scan, &params, &mut stream(10, "hdr")).unwrap();
        let mut shadowed = 0;
        for (c, sf) in colors.iter().zip(&scan.surfaces) {
            if sf.material != Material::Ground {
                continue;
            }
            let lit = s.first_surface(sf.point, params.sun_dir, 100.0).is_none();
            let e = if lit { params.sun } else { params.sky };
            if !lit {
                shadowed += 1;
            }
            for ch in 0..3 {
                let want = s.spec.ground_albedo[ch] * e;
                assert!((c[ch] - want).abs() < 0.015, "{c:?} vs {want} lit={lit}");
            }
        }
        assert!(shadowed > 0);
    }

    #[test]
    fn renders_are_deterministic() {
        let s = scene(vec![ShapeSpec::Box { x: 6.0, y: 0.0, size_x: 1.0, size_y: 2.0, height: 1.5 }]);
        let a = render_stereo_cloud(&s, &StereoParams::default(), 3, &mut stream(11, "t"));
        let b = render_stereo_cloud(&s, &StereoParams::default(), 3, &mut stream(11, "t"));
        assert_eq!(a, b);
        let ra = render_radar_image(&s, &RadarSimParams::default(), &mut stream(11, "r")).unwrap();
        let rb = render_radar_image(&s, &RadarSimParams::default(), &mut stream(11, "r")).unwrap();
        assert_eq!(ra, rb);
    }
}
