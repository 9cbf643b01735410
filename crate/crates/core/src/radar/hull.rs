//! Planar convex-polygon helpers.

/// Counter-clockwise convex hull (Andrew's monotone chain) without
/// collinear vertices. Fewer than three distinct points come back as-is,
/// deduplicated.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// `(b - a) × (c - a)`; positive when `a, b, c` turn left.
#[inline]
pub fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s
}

pub fn is_convex_ccw(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    if n < 3 {
        return true;
    }
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) > 0.0)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - (a.0 + t * dx)).hypot(p.1 - (a.1 + t * dy))
}

/// Distance from `p` to the boundary of a convex CCW polygon, or zero when
/// `p` is inside. Points and segments are handled as degenerate polygons.
pub fn distance_to_convex(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p.0 - poly[0].0).hypot(p.1 - poly[0].1),
        2 => segment_distance(p, poly[0], poly[1]),
        n => {
            if contains_convex(poly, p, 0.0) {
                return 0.0;
            }
            (0..n)
                .map(|i| segment_distance(p, poly[i], poly[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Point-in-convex-polygon test, inclusive of the boundary within `tol`
/// meters.
pub fn contains_convex(poly: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return distance_to_convex(poly, p) <= tol;
    }
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        cross(a, b, p) >= -tol * len
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_with_interior_and_collinear_points() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0), (0.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        assert_eq!(polygon_area(&h), 4.0);
        assert!(is_convex_ccw(&h));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(convex_hull(&[]).is_empty());
        assert_eq!(convex_hull(&[(1.0, 1.0), (1.0, 1.0)]), vec![(1.0, 1.0)]);
        let line = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(line, vec![(0.0, 0.0), (2.0, 0.0)]);
        assert!((distance_to_convex(&line, (1.0, 0.5)) - 0.5).abs() < 1e-12);
        assert!((distance_to_convex(&[(0.0, 0.0)], (3.0, 4.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn distance_outside_square() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert_eq!(distance_to_convex(&sq, (0.5, 0.5)), 0.0);
        assert!((distance_to_convex(&sq, (1.4, 0.5)) - 0.4).abs() < 1e-12);
        assert!((distance_to_convex(&sq, (2.0, 2.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hull_contains_all_points(pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..60)) {
            let h = convex_hull(&pts);
            prop_assert!(is_convex_ccw(&h));
            for p in &pts {
                prop_assert!(contains_convex(&h, *p, 1e-9));
            }
        }
    }
}
