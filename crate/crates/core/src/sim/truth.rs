//! Exact labels computed from the scene description alone.

use super::scene::{Scene, Solid};
use crate::geo3d::GridGeometry;
use crate::map::{Label, PatchLabel, TraversabilityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TruthObstacle {
    /// Index into the scene's obstacle list.
    pub index: usize,
    pub centroid: (f64, f64),
    /// Footprint polygon, counter-clockwise.
    pub hull: Vec<(f64, f64)>,
    /// Top of the obstacle above the terrain under its center.
    pub height: f64,
    /// Does it block the vehicle (underside at or below the clearance)?
    pub blocking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub geometry: GridGeometry,
    /// `Ground` or `NonGround` per cell.
    pub labels: Vec<Label>,
    pub obstacles: Vec<TruthObstacle>,
}

impl GroundTruth {
    pub fn to_map(&self) -> TraversabilityMap {
        TraversabilityMap {
            geometry: self.geometry,
            cells: self.labels.iter().map(|&label| PatchLabel { label, score: None }).collect(),
            observed: vec![0; self.labels.len()],
        }
    }
}

/// Does the solid's footprint overlap the open rectangle?
fn overlaps(s: &Solid, (x0, y0, x1, y1): (f64, f64, f64, f64)) -> bool {
    let (a0, b0, a1, b1) = s.spec.footprint_bounds();
    if !(a0 < x1 && a1 > x0 && b0 < y1 && b1 > y0) {
        return false;
    }
    match s.spec {
        super::spec::ShapeSpec::Cylinder { x, y, radius, .. } | super::spec::ShapeSpec::Person { x, y, radius, .. } => {
            let dx = x - x.clamp(x0, x1);
            let dy = y - y.clamp(y0, y1);
            dx * dx + dy * dy < radius * radius
        }
        _ => true,
    }
}

fn blocks(s: &Solid, clearance: f64) -> bool {
    s.z_range().0 - s.base <= clearance
}

/// A cell is `NonGround` when a blocking obstacle's footprint overlaps it
/// or the terrain slope at its center exceeds the scene's limit. Water,
/// vegetation and hotspots are traversable.
pub fn ground_truth(scene: &Scene, geometry: GridGeometry) -> GroundTruth {
    let clearance = scene.spec.clearance;
    let max_slope = scene.spec.max_slope_deg.to_radians();
    let labels = (0..geometry.len())
        .map(|i| {
            let (r, c) = geometry.row_col(i);
            let bounds = geometry.cell_bounds(r, c);
            let (cx, cy) = geometry.cell_center(r, c);
            let blocked = scene.solids.iter().any(|s| blocks(s, clearance) && overlaps(s, bounds));
            if blocked || scene.slope(cx, cy) > max_slope {
                Label::NonGround
            } else {
                Label::Ground
            }
        })
        .collect();
    let obstacles = scene
        .solids
        .iter()
        .enumerate()
        .map(|(index, s)| TruthObstacle {
            index,
            centroid: s.spec.center(),
            hull: s.footprint_polygon(),
            height: s.height(),
            blocking: blocks(s, clearance),
        })
        .collect();
    GroundTruth { geometry, labels, obstacles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sim::render::render_stereo_cloud;
    use crate::sim::scene::generate_scene;
    use crate::sim::spec::{ObstacleSpec, SceneSpec, ShapeSpec, StereoParams, TerrainSpec};

    fn grid() -> GridGeometry {
        GridGeometry::new((0.0, -5.0), 0.5, 20, 40).unwrap()
    }

    fn with(shapes: Vec<ShapeSpec>) -> Scene {
        generate_scene(&SceneSpec { obstacles: shapes.into_iter().map(ObstacleSpec::new).collect(), ..Default::default() }).unwrap()
    }

    #[test]
    fn flat_empty_is_all_ground() {
        let t = ground_truth(&with(vec![]), grid());
        assert!(t.labels.iter().all(|&l| l == Label::Ground));
    }

    #[test]
    fn box_marks_exactly_its_cells() {
        let s = with(vec![ShapeSpec::Box { x: 5.0, y: 0.0, size_x: 1.0, size_y: 1.0, height: 2.0 }]);
        let g = grid();
        let t = ground_truth(&s, g);
        for i in 0..g.len() {
            let (r, c) = g.row_col(i);
            let (cx, cy) = g.cell_center(r, c);
            let inside = (cx - 5.0).abs() < 0.5 && cy.abs() < 0.5;
            assert_eq!(t.labels[i] == Label::NonGround, inside, "cell ({r},{c})");
        }
        assert_eq!(t.labels.iter().filter(|&&l| l == Label::NonGround).count(), 4);
        assert_eq!(t.obstacles[0].centroid, (5.0, 0.0));
        assert!((t.obstacles[0].height - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overhang_clearance() {
        let slab = |bottom| ShapeSpec::Overhang { x: 5.0, y: 0.0, size_x: 2.0, size_y: 2.0, bottom, thickness: 0.3 };
        let high = ground_truth(&with(vec![slab(3.0)]), grid());
        assert!(high.labels.iter().all(|&l| l == Label::Ground));
        let low = ground_truth(&with(vec![slab(2.0)]), grid());
        assert_eq!(low.labels.iter().filter(|&&l| l == Label::NonGround).count(), 16);
    }

    #[test]
    fn steep_slope_is_non_ground() {
        let steep = generate_scene(&SceneSpec {
            terrain: TerrainSpec::Crest { crest_x: 6.0, up_grade: 0.1, down_grade: 1.0 },
            ..Default::default()
        })
        .unwrap();
        let g = grid();
        let t = ground_truth(&steep, g);
        for i in 0..g.len() {
            let (r, c) = g.row_col(i);
            let (cx, _) = g.cell_center(r, c);
            assert_eq!(t.labels[i] == Label::NonGround, cx > 6.0);
        }
    }

    #[test]
    fn cylinder_overlap_is_geometric() {
        let s = with(vec![ShapeSpec::Cylinder { x: 5.0, y: 0.0, radius: 0.3, height: 1.0 }]);
        let t = ground_truth(&s, grid());
        // the disk touches the four cells around (5, 0) only
        assert_eq!(t.labels.iter().filter(|&&l| l == Label::NonGround).count(), 4);
        let s = with(vec![ShapeSpec::Cylinder { x: 5.25, y: 0.25, radius: 0.2, height: 1.0 }]);
        assert_eq!(ground_truth(&s, grid()).labels.iter().filter(|&&l| l == Label::NonGround).count(), 1);
    }

    #[test]
    fn noise_never_changes_truth() {
        let s = with(vec![ShapeSpec::Box { x: 5.0, y: 1.0, size_x: 1.0, size_y: 2.0, height: 1.0 }]);
        let before = ground_truth(&s, grid());
        for seed in 0..3 {
            let _ = render_stereo_cloud(&s, &StereoParams { sample_cols: 32, sample_rows: 24, ..Default::default() }, 0, &mut stream(seed, "n"));
            assert_eq!(ground_truth(&s, grid()), before);
        }
    }
}
