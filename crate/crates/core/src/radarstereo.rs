//! Radar-guided analysis of the stereo point cloud: per radar obstacle,
//! gather the nearby stereo points and measure height, extent and color.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo3d::{Point3, PointCloud};
use crate::map::{Label, TraversabilityMap};
use crate::radar::hull::distance_to_convex;
use crate::radar::RadarObstacle;
use crate::textio::fmt17;

/// Stereo points attributed to one radar obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct SubCloud {
    pub points: Vec<Point3>,
    /// Index of the source obstacle in the radar obstacle list.
    pub source_obstacle: usize,
}

impl SubCloud {
    pub fn to_cloud(&self, frame_id: u64) -> PointCloud {
        PointCloud::new(self.points.clone(), frame_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    pub fn of(points: &[Point3]) -> Option<Self> {
        let first = points.first()?;
        let mut b = BoundingBox {
            min: [first.x, first.y, first.z],
            max: [first.x, first.y, first.z],
        };
        for p in &points[1..] {
            for (k, v) in [p.x, p.y, p.z].into_iter().enumerate() {
                b.min[k] = b.min[k].min(v);
                b.max[k] = b.max[k].max(v);
            }
        }
        Some(b)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        [p.x, p.y, p.z]
            .iter()
            .enumerate()
            .all(|(k, v)| *v >= self.min[k] && *v <= self.max[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleInfo {
    /// Radar centroid.
    pub centroid_2d: (f64, f64),
    /// Height of the highest point above the local ground level.
    pub max_height: f64,
    pub bbox: BoundingBox,
    pub mean_color: Option<[f64; 3]>,
    pub point_count: usize,
}

/// Ground reference under an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundLevel {
    pub z0: f64,
    /// Set when no ground-labelled points were found nearby and the lowest
    /// sub-cloud point was used instead.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarStereoParams {
    /// Distance outside the hull still attributed to the obstacle, in meters.
    pub margin: f64,
    /// Width of the ring outside the dilated hull searched for ground, in meters.
    pub ground_ring: f64,
}

impl Default for RadarStereoParams {
    fn default() -> Self {
        Self {
            margin: 0.5,
            ground_ring: 2.0,
        }
    }
}

impl RadarStereoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::param("margin must be nonnegative"));
        }
        if !(self.ground_ring > 0.0 && self.ground_ring.is_finite()) {
            return Err(Error::param("ground ring width must be positive"));
        }
        Ok(())
    }
}

/// Points whose `(x, y)` lies inside the hull or within `margin` of it.
pub fn extract_subcloud(cloud: &PointCloud, obstacle: &RadarObstacle, index: usize, margin: f64) -> Result<SubCloud> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::param("margin must be nonnegative"));
    }
    let points = cloud
        .points
        .iter()
        .filter(|p| distance_to_convex(&obstacle.hull, (p.x, p.y)) <= margin)
        .cloned()
        .collect();
    Ok(SubCloud {
        points,
        source_obstacle: index,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median height of ground-labelled points in the ring
/// `margin < d ≤ margin + ground_ring` around the hull; falls back to the
/// lowest sub-cloud point when the ring holds no ground.
pub fn estimate_ground_level(
    map: &TraversabilityMap,
    cloud: &PointCloud,
    obstacle: &RadarObstacle,
    sub: &SubCloud,
    params: &RadarStereoParams,
) -> Result<GroundLevel> {
    params.validate()?;
    let outer = params.margin + params.ground_ring;
    let ring: Vec<f64> = cloud
        .points
        .iter()
        .filter(|p| {
            let d = distance_to_convex(&obstacle.hull, (p.x, p.y));
            d > params.margin && d <= outer && map.label_at(p.x, p.y) == Some(Label::Ground)
        })
        .map(|p| p.z)
        .collect();
    if !ring.is_empty() {
        return Ok(GroundLevel {
            z0: median(ring),
            low_confidence: false,
        });
    }
    sub.points
        .iter()
        .map(|p| p.z)
        .min_by(f64::total_cmp)
        .map(|z0| GroundLevel {
            z0,
            low_confidence: true,
        })
        .ok_or(Error::NoGroundReference)
}

pub fn characterize(sub: &SubCloud, obstacle: &RadarObstacle, z0: f64) -> Result<ObstacleInfo> {
    let bbox = BoundingBox::of(&sub.points).ok_or(Error::EmptyObstacle)?;
    let max_height = (bbox.max[2] - z0).max(0.0);
    let colored: Vec<[f64; 3]> = sub.points.iter().filter_map(|p| p.color).collect();
    let mean_color = (!colored.is_empty()).then(|| {
        let n = colored.len() as f64;
        let mut s = [0.0; 3];
        for c in &colored {
            for k in 0..3 {
                s[k] += c[k];
            }
        }
        s.map(|v| v / n)
    });
    Ok(ObstacleInfo {
        centroid_2d: obstacle.centroid,
        max_height,
        bbox,
        mean_color,
        point_count: sub.points.len(),
    })
}

/// Result for one obstacle; `info` is `None` when no stereo points fell
/// near it.
#[derive(Debug, Clone, PartialEq)]
pub struct Characterized {
    pub obstacle: usize,
    pub info: Option<ObstacleInfo>,
    pub ground: Option<GroundLevel>,
}

/// Runs extraction, ground estimation and characterization for every
/// obstacle.
pub fn analyze(
    cloud: &PointCloud,
    map: &TraversabilityMap,
    obstacles: &[RadarObstacle],
    params: &RadarStereoParams,
) -> Result<Vec<Characterized>> {
    params.validate()?;
    obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let sub = extract_subcloud(cloud, o, i, params.margin)?;
            if sub.points.is_empty() {
                return Ok(Characterized {
                    obstacle: i,
                    info: None,
                    ground: None,
                });
            }
            let ground = estimate_ground_level(map, cloud, o, &sub, params)?;
            let info = characterize(&sub, o, ground.z0)?;
            Ok(Characterized {
                obstacle: i,
                info: Some(info),
                ground: Some(ground),
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "frame,id,cx,cy,max_height,xmin,ymin,zmin,xmax,ymax,zmax,r,g,b,n";

pub fn write_obstacle_csv<W: Write>(mut w: W, rows: &[(u64, usize, ObstacleInfo)]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (frame, id, info) in rows {
        let b = &info.bbox;
        let color = match info.mean_color {
            Some(c) => c.map(fmt17).join(","),
            None => "NA,NA,NA".to_string(),
        };
        writeln!(
            w,
            "{frame},{id},{},{},{},{},{},{},{},{},{},{color},{}",
            fmt17(info.centroid_2d.0),
            fmt17(info.centroid_2d.1),
            fmt17(info.max_height),
            fmt17(b.min[0]),
            fmt17(b.min[1]),
            fmt17(b.min[2]),
            fmt17(b.max[0]),
            fmt17(b.max[1]),
            fmt17(b.max[2]),
            info.point_count
        )?;
    }
    Ok(())
}

pub fn write_obstacle_csv_file(path: &Path, rows: &[(u64, usize, ObstacleInfo)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obstacle_csv(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo3d::GridGeometry;
    use crate::map::{sensor, PatchLabel};
    use proptest::prelude::*;

    fn square_obstacle() -> RadarObstacle {
        RadarObstacle {
            hull: vec![(9.0, -1.0), (11.0, -1.0), (11.0, 1.0), (9.0, 1.0)],
            centroid: (10.0, 0.0),
            area: 4.0,
            member_cells: 16,
        }
    }

    fn cloud(points: Vec<Point3>) -> PointCloud {
        PointCloud::new(points, 0)
    }

    fn ground_map() -> TraversabilityMap {
        let g = GridGeometry::new((0.0, -10.0), 0.5, 40, 40).unwrap();
        TraversabilityMap::from_labels(g, vec![PatchLabel::new(Label::Ground, 0.0); g.len()], sensor::STEREO).unwrap()
    }

    #[test]
    fn margin_membership() {
        let o = square_obstacle();
        let c = cloud(vec![
            Point3::new(10.0, 0.0, 1.0),
            Point3::new(11.4, 0.0, 1.0),
            Point3::new(11.6, 0.0, 1.0),
        ]);
        let sub = extract_subcloud(&c, &o, 0, 0.5).unwrap();
        assert_eq!(sub.points.len(), 2);
        assert!(sub.points.iter().all(|p| p.x < 11.5));
        assert!(extract_subcloud(&c, &o, 0, -0.1).is_err());
    }

    #[test]
    fn ground_level_cases() {
        let o = square_obstacle();
        let params = RadarStereoParams::default();
        let mut pts: Vec<Point3> = (0..12).map(|k| Point3::new(12.0 + 0.1 * k as f64, 0.0, 0.1)).collect();
        pts.push(Point3::new(12.5, 0.5, 2.0));
        pts.push(Point3::new(10.0, 0.0, 1.5));
        let c = cloud(pts);
        let sub = extract_subcloud(&c, &o, 0, params.margin).unwrap();
        let gl = estimate_ground_level(&ground_map(), &c, &o, &sub, &params).unwrap();
        assert_eq!(gl, GroundLevel { z0: 0.1, low_confidence: false });

        let flat = cloud(vec![Point3::new(12.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0)]);
        let sub = extract_subcloud(&flat, &o, 0, params.margin).unwrap();
        assert_eq!(estimate_ground_level(&ground_map(), &flat, &o, &sub, &params).unwrap().z0, 0.0);

        let lone = cloud(vec![Point3::new(10.0, 0.0, 0.3), Point3::new(10.2, 0.0, 1.3)]);
        let sub = extract_subcloud(&lone, &o, 0, params.margin).unwrap();
        let unknown = TraversabilityMap::unknown(ground_map().geometry);
        let gl = estimate_ground_level(&unknown, &lone, &o, &sub, &params).unwrap();
        assert_eq!(gl, GroundLevel { z0: 0.3, low_confidence: true });

        let empty = SubCloud { points: vec![], source_obstacle: 0 };
        assert!(matches!(
            estimate_ground_level(&unknown, &cloud(vec![]), &o, &empty, &params),
            Err(Error::NoGroundReference)
        ));
    }

    #[test]
    fn characterize_heights_and_color() {
        let o = square_obstacle();
        let sub = SubCloud {
            points: vec![
                Point3::new(10.0, 0.0, 2.5).with_color([1.0, 0.0, 0.0]),
                Point3::new(10.5, 0.5, 0.2).with_color([0.0, 1.0, 0.0]),
                Point3::new(9.5, -0.5, 1.0),
            ],
            source_obstacle: 0,
        };
        let info = characterize(&sub, &o, 0.1).unwrap();
        assert!((info.max_height - 2.4).abs() < 1e-12);
        assert_eq!(info.mean_color, Some([0.5, 0.5, 0.0]));
        assert_eq!(info.bbox.min, [9.5, -0.5, 0.2]);
        assert_eq!(info.point_count, 3);
        assert_eq!(characterize(&sub, &o, 5.0).unwrap().max_height, 0.0);
        let empty = SubCloud { points: vec![], source_obstacle: 0 };
        assert!(matches!(characterize(&empty, &o, 0.0), Err(Error::EmptyObstacle)));
    }

    #[test]
    fn csv_row_shape() {
        let o = square_obstacle();
        let sub = SubCloud { points: vec![Point3::new(10.0, 0.0, 1.0)], source_obstacle: 0 };
        let info = characterize(&sub, &o, 0.0).unwrap();
        let mut buf = Vec::new();
        write_obstacle_csv(&mut buf, &[(3, 0, info)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), CSV_HEADER.split(',').count());
        assert!(lines[1].starts_with("3,0,") && lines[1].ends_with("NA,NA,NA,1"));
    }

    proptest! {
        #[test]
        fn membership_monotone_in_margin(
            pts in proptest::collection::vec((5.0f64..15.0, -5.0f64..5.0), 1..80),
            m1 in 0.0f64..2.0,
            extra in 0.0f64..2.0,
        ) {
            let o = square_obstacle();
            let c = cloud(pts.iter().map(|&(x, y)| Point3::new(x, y, 0.0)).collect());
            let a = extract_subcloud(&c, &o, 0, m1).unwrap();
            let b = extract_subcloud(&c, &o, 0, m1 + extra).unwrap();
            for p in &a.points {
                prop_assert!(b.points.contains(p));
            }
        }

        #[test]
        fn bbox_is_tight(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0), 1..40)) {
            let points: Vec<Point3> = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let b = BoundingBox::of(&points).unwrap();
            prop_assert!(points.iter().all(|p| b.contains(p)));
            for k in 0..3 {
                let eps = 1e-9;
                let mut lo = b;
                lo.min[k] += eps;
                prop_assert!(points.iter().any(|p| !lo.contains(p)));
                let mut hi = b;
                hi.max[k] -= eps;
                prop_assert!(points.iter().any(|p| !hi.contains(p)));
            }
        }
    }
}
