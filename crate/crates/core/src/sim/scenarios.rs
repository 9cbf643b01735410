//! Named scene generators used by the demo, the evaluation runs and the
//! tests.

use rand::Rng;

use super::spec::{CropSpec, HotspotSpec, ObstacleSpec, ReliefSpec, SceneSpec, ShapeSpec, TerrainSpec, WaterSpec};
use crate::geo3d::GridGeometry;
use crate::rng::indexed_stream;

/// Patch size of the ground-classifier scenarios, m.
pub const PATCH: f64 = 0.5;

/// Region of interest for the ground-classifier scenarios.
pub fn ground_grid() -> GridGeometry {
    GridGeometry::new((2.0, -5.0), PATCH, 20, 20).expect("static geometry")
}

/// Obstacle-free start region used to bootstrap the ground model.
pub const GROUND_START_REGION: (f64, f64, f64, f64) = (2.0, -5.0, 12.0, 5.0);

/// Region of interest for the fusion benchmark: the LIDAR's reach.
pub fn fusion_grid() -> GridGeometry {
    GridGeometry::new((2.0, -6.0), PATCH, 24, 30).expect("static geometry")
}

pub const FUSION_START_REGION: (f64, f64, f64, f64) = (2.0, -6.0, 17.0, 6.0);

/// Grid of the cell classifier scenarios.
pub fn cell_grid() -> GridGeometry {
    GridGeometry::new((3.2, -3.0), 0.6, 10, 24).expect("static geometry")
}

/// Region whose points define the reference plane for cell heights.
pub const NEAR_FIELD: (f64, f64, f64, f64) = (3.0, -2.0, 6.0, 2.0);

fn overlaps(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), gap: f64) -> bool {
    a.0 < b.2 + gap && b.0 < a.2 + gap && a.1 < b.3 + gap && b.1 < a.3 + gap
}

/// Random boxes inside `area` (x0, y0, x1, y1), each filling a block of
/// patches less an `inset` margin on every side, kept one patch apart.
fn grid_boxes<R: Rng>(
    rng: &mut R,
    count: usize,
    area: (f64, f64, f64, f64),
    heights: (f64, f64),
    inset: f64,
) -> Vec<ObstacleSpec> {
    let mut out: Vec<ObstacleSpec> = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 1000 {
        tries += 1;
        let sx = PATCH * rng.gen_range(1..=2) as f64;
        let sy = PATCH * rng.gen_range(1..=3) as f64;
        let nx = ((area.2 - area.0 - sx) / PATCH).floor() as i64;
        let ny = ((area.3 - area.1 - sy) / PATCH).floor() as i64;
        if nx < 0 || ny < 0 {
            break;
        }
        let x0 = area.0 + PATCH * rng.gen_range(0..=nx) as f64;
        let y0 = area.1 + PATCH * rng.gen_range(0..=ny) as f64;
        let height = rng.gen_range(heights.0..heights.1);
        let shape = ShapeSpec::Box {
            x: x0 + sx / 2.0,
            y: y0 + sy / 2.0,
            size_x: sx - 2.0 * inset,
            size_y: sy - 2.0 * inset,
            height,
        };
        if out.iter().any(|o| overlaps(o.shape.footprint_bounds(), shape.footprint_bounds(), PATCH)) {
            continue;
        }
        out.push(ObstacleSpec::new(shape));
    }
    out
}

/// Margin between a drift box and the edges of the patches it stands on.
pub const DRIFT_BOX_INSET: f64 = 0.15;
pub const FUSION_BOX_INSET: f64 = 0.15;

/// Undulation of the drift sequence's field.
pub const DRIFT_RELIEF: ReliefSpec = ReliefSpec { amplitude: 0.12, wavelength: 3.0 };

/// Ground-classifier sequence: an undulating field tilts progressively so
/// the mean ground height over the region of interest ramps by
/// `final_mean_height`; every frame after the first holds a fresh set of
/// boxes.
pub fn drift_sequence(seed: u64, frames: usize, final_mean_height: f64) -> Vec<SceneSpec> {
    let g = ground_grid();
    let mid_x = g.origin.0 + 0.5 * g.n_cols as f64 * g.cell_size;
    (0..frames)
        .map(|f| {
            let ramp = if frames > 1 { f as f64 / (frames - 1) as f64 } else { 0.0 };
            let mut rng = indexed_stream(seed, "scenario.drift", f as u64);
            let obstacles = if f == 0 {
                Vec::new()
            } else {
                let n = rng.gen_range(3..=5);
                grid_boxes(&mut rng, n, (4.0, -4.0, 12.0, 4.0), (0.4, 1.2), DRIFT_BOX_INSET)
            };
            SceneSpec {
                name: format!("drift-{f:03}"),
                terrain: TerrainSpec::Sloped { height: 0.0, grade_x: final_mean_height / mid_x * ramp, grade_y: 0.0 },
                relief: Some(DRIFT_RELIEF),
                obstacles,
                seed,
                ..Default::default()
            }
        })
        .collect()
}

/// Fusion benchmark sequence on flat ground: an empty first frame, then
/// boxes and poles spread over the LIDAR's range.
pub fn fusion_sequence(seed: u64, frames: usize) -> Vec<SceneSpec> {
    (0..frames)
        .map(|f| {
            let mut rng = indexed_stream(seed, "scenario.fusion", f as u64);
            let mut obstacles = Vec::new();
            if f > 0 {
                let n = rng.gen_range(4..=7);
                obstacles = grid_boxes(&mut rng, n, (4.0, -5.5, 16.5, 5.5), (0.3, 1.5), FUSION_BOX_INSET);
            }
            SceneSpec { name: format!("fusion-{f:03}"), obstacles, seed: seed.wrapping_add(f as u64), ..Default::default() }
        })
        .collect()
}

/// One radar pole target: where it stands and the peak-to-clutter ratio it
/// was scaled to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleTarget {
    pub x: f64,
    pub y: f64,
    pub snr: f64,
}

pub const POLE_HEIGHT: f64 = 3.0;
pub const POLE_RADIUS: f64 = 0.15;

/// Smallest azimuth gap between two poles, degrees. Keeps every pole out
/// of its neighbors' CFAR columns and stereo shadows.
pub const POLE_AZIMUTH_GAP_DEG: f64 = 5.0;

/// Poles of height 3 m between `range.0` and `range.1`, inside the stereo
/// field of view, at least 3 m and [`POLE_AZIMUTH_GAP_DEG`] apart.
/// Reflectivities are left at 1; scale them with
/// [`super::radar_peak_signal`] to reach the requested ratios.
pub fn pole_field(seed: u64, count: usize, range: (f64, f64), snr: (f64, f64)) -> (SceneSpec, Vec<PoleTarget>) {
    let mut rng = indexed_stream(seed, "scenario.poles", 0);
    let mut targets: Vec<PoleTarget> = Vec::new();
    let mut tries = 0;
    while targets.len() < count && tries < 10_000 {
        tries += 1;
        let r = rng.gen_range(range.0..range.1);
        let a = rng.gen_range(-25f64..25.0).to_radians();
        let (x, y) = (r * a.cos(), r * a.sin());
        if targets
            .iter()
            .any(|t| (t.x - x).hypot(t.y - y) < 3.0 || (t.y.atan2(t.x) - a).abs().to_degrees() < POLE_AZIMUTH_GAP_DEG)
        {
            continue;
        }
        // the first target sits exactly at the lower ratio
        let s = if targets.is_empty() { snr.0 } else { rng.gen_range(snr.0..snr.1) };
        targets.push(PoleTarget { x, y, snr: s });
    }
    let obstacles = targets
        .iter()
        .map(|t| ObstacleSpec::new(ShapeSpec::Cylinder { x: t.x, y: t.y, radius: POLE_RADIUS, height: POLE_HEIGHT }))
        .collect();
    (SceneSpec { name: "poles".into(), obstacles, seed, ..Default::default() }, targets)
}

pub const MAIZE_FRONT: f64 = 8.0;

/// Tall maize starting at `MAIZE_FRONT`, optionally hiding a person whose
/// center is 1.6 m inside the crop.
pub fn maize_field(seed: u64, person: bool) -> SceneSpec {
    let obstacles = if person {
        let mut rng = indexed_stream(seed, "scenario.maize", 0);
        let y = rng.gen_range(-1.0..1.0);
        vec![ObstacleSpec::new(ShapeSpec::Person { x: MAIZE_FRONT + 1.6, y, radius: 0.25, height: 1.7 })]
    } else {
        Vec::new()
    };
    SceneSpec {
        name: if person { "maize-person".into() } else { "maize".into() },
        crops: vec![CropSpec {
            x_min: MAIZE_FRONT,
            y_min: -8.0,
            x_max: 20.0,
            y_max: 8.0,
            height: 2.2,
            height_std: 0.15,
            density: 0.8,
            temperature: None,
            albedo: [0.22, 0.45, 0.16],
        }],
        obstacles,
        seed,
        ..Default::default()
    }
}

/// Bare flat field used to train the cell library.
pub fn open_field(seed: u64) -> SceneSpec {
    SceneSpec { name: "open".into(), seed, ..Default::default() }
}

/// A branch-like slab over flat ground, its underside `bottom` above it.
pub fn overhang(bottom: f64) -> SceneSpec {
    let g = cell_grid();
    let (x0, y0) = (g.origin.0 + 7.0 * g.cell_size, g.origin.1 + 4.0 * g.cell_size);
    SceneSpec {
        name: "overhang".into(),
        obstacles: vec![ObstacleSpec {
            albedo: Some([0.3, 0.4, 0.2]),
            ..ObstacleSpec::new(ShapeSpec::Overhang {
                x: x0 + g.cell_size,
                y: y0 + g.cell_size,
                size_x: 2.0 * g.cell_size,
                size_y: 2.0 * g.cell_size,
                bottom,
                thickness: 0.3,
            })
        }],
        ..Default::default()
    }
}

pub fn water_puddle(seed: u64) -> SceneSpec {
    SceneSpec {
        name: "puddle".into(),
        water: vec![WaterSpec { x: 9.5, y: 0.3, radius: 1.2, temperature: 283.0, surface_return: 0.2 }],
        seed,
        ..Default::default()
    }
}

/// Climbing toward a crest beyond which the ground falls away gently: the
/// far side sits well below the near-field plane.
pub fn negative_cliff(seed: u64) -> SceneSpec {
    SceneSpec {
        name: "crest".into(),
        terrain: TerrainSpec::Crest { crest_x: 8.0, up_grade: 0.15, down_grade: 0.04 },
        seed,
        ..Default::default()
    }
}

/// A flat warm patch in the grass: geometry says ground, temperature says
/// otherwise.
pub fn warm_jacket(seed: u64) -> SceneSpec {
    SceneSpec {
        name: "jacket".into(),
        hotspots: vec![HotspotSpec { x: 9.5, y: 0.3, radius: 0.35, temperature: 303.0 }],
        seed,
        ..Default::default()
    }
}
