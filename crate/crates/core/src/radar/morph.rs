//! Binary morphology with disk structuring elements. Pixels outside the
//! raster are ignored, so erosion does not eat into objects touching the
//! border and dilation does not grow from outside it.

use std::collections::VecDeque;

use super::BinaryGrid;

/// Offsets `(dr, dc)` with `dr² + dc² ≤ r²`.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn apply(rows: usize, cols: usize, cells: &[bool], radius: usize, want_all: bool) -> Vec<bool> {
    if radius == 0 {
        return cells.to_vec();
    }
    let offsets = disk_offsets(radius);
    let mut out = vec![false; cells.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut neighbors = offsets.iter().filter_map(|&(dr, dc)| {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                (rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols)
                    .then(|| cells[rr as usize * cols + cc as usize])
            });
            out[r * cols + c] = if want_all {
                neighbors.all(|v| v)
            } else {
                neighbors.any(|v| v)
            };
        }
    }
    out
}

pub fn erode(rows: usize, cols: usize, cells: &[bool], radius: usize) -> Vec<bool> {
    apply(rows, cols, cells, radius, true)
}

pub fn dilate(rows: usize, cols: usize, cells: &[bool], radius: usize) -> Vec<bool> {
    apply(rows, cols, cells, radius, false)
}

pub fn open(rows: usize, cols: usize, cells: &[bool], radius: usize) -> Vec<bool> {
    dilate(rows, cols, &erode(rows, cols, cells, radius), radius)
}

pub fn close(rows: usize, cols: usize, cells: &[bool], radius: usize) -> Vec<bool> {
    erode(rows, cols, &dilate(rows, cols, cells, radius), radius)
}

/// 8-connected components as lists of raster indices, each sorted, in
/// order of their first index.
pub fn components(rows: usize, cols: usize, cells: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; cells.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if !cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr as usize >= rows || cc as usize >= cols {
                        continue;
                    }
                    let j = rr as usize * cols + cc as usize;
                    if cells[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

pub fn remove_small_components(rows: usize, cols: usize, cells: &[bool], min_area: usize) -> Vec<bool> {
    let mut out = vec![false; cells.len()];
    for comp in components(rows, cols, cells) {
        if comp.len() >= min_area {
            for i in comp {
                out[i] = true;
            }
        }
    }
    out
}

/// Opening, then removal of components smaller than `min_area`, then
/// closing.
pub fn morph_filter(grid: &BinaryGrid, open_radius: usize, min_area: usize, close_radius: usize) -> BinaryGrid {
    let (rows, cols) = (grid.geometry.n_rows, grid.geometry.n_cols);
    let opened = open(rows, cols, &grid.cells, open_radius);
    let kept = remove_small_components(rows, cols, &opened, min_area);
    grid.with_cells(close(rows, cols, &kept, close_radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo3d::GridGeometry;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid(rows: usize, cols: usize, cells: Vec<bool>) -> BinaryGrid {
        BinaryGrid {
            geometry: GridGeometry::new((0.0, 0.0), 1.0, rows, cols).unwrap(),
            cells,
        }
    }

    // Reference stages written directly from the set definitions.
    fn ref_erode(rows: usize, cols: usize, m: &[bool], rad: usize) -> Vec<bool> {
        let r2 = (rad * rad) as i64;
        (0..rows * cols)
            .map(|p| {
                let (pr, pc) = ((p / cols) as i64, (p % cols) as i64);
                (0..rows * cols).all(|q| {
                    let (qr, qc) = ((q / cols) as i64, (q % cols) as i64);
                    (qr - pr).pow(2) + (qc - pc).pow(2) > r2 || m[q]
                })
            })
            .collect()
    }

    fn ref_dilate(rows: usize, cols: usize, m: &[bool], rad: usize) -> Vec<bool> {
        let r2 = (rad * rad) as i64;
        (0..rows * cols)
            .map(|p| {
                let (pr, pc) = ((p / cols) as i64, (p % cols) as i64);
                (0..rows * cols).any(|q| {
                    let (qr, qc) = ((q / cols) as i64, (q % cols) as i64);
                    m[q] && (qr - pr).pow(2) + (qc - pc).pow(2) <= r2
                })
            })
            .collect()
    }

    // Union-find labelling, independent of the BFS in `components`.
    fn ref_area_filter(rows: usize, cols: usize, m: &[bool], min_area: usize) -> Vec<bool> {
        let n = rows * cols;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for a in 0..n {
            for b in 0..n {
                let (ar, ac) = ((a / cols) as i64, (a % cols) as i64);
                let (br, bc) = ((b / cols) as i64, (b % cols) as i64);
                if m[a] && m[b] && (ar - br).abs() <= 1 && (ac - bc).abs() <= 1 {
                    let (x, y) = (find(&mut parent, a), find(&mut parent, b));
                    parent[x] = y;
                }
            }
        }
        let mut size = vec![0usize; n];
        for a in 0..n {
            if m[a] {
                let root = find(&mut parent, a);
                size[root] += 1;
            }
        }
        (0..n).map(|a| m[a] && size[find(&mut parent, a)] >= min_area).collect()
    }

    #[test]
    fn isolated_pixel_removed_by_opening() {
        let mut cells = vec![false; 49];
        cells[24] = true;
        let out = morph_filter(&grid(7, 7, cells), 1, 1, 0);
        assert_eq!(out.count(), 0);
    }

    #[test]
    fn closing_bridges_one_pixel_gap() {
        let (rows, cols) = (7, 11);
        let mut cells = vec![false; rows * cols];
        for r in 2..5 {
            for c in (1..4).chain(5..8) {
                cells[r * cols + c] = true;
            }
        }
        assert_eq!(components(rows, cols, &cells).len(), 2);
        let out = morph_filter(&grid(rows, cols, cells), 0, 1, 1);
        assert_eq!(components(rows, cols, &out.cells).len(), 1);
    }

    #[test]
    fn disk_shapes() {
        assert_eq!(disk_offsets(0), vec![(0, 0)]);
        assert_eq!(disk_offsets(1).len(), 5);
        assert_eq!(disk_offsets(2).len(), 13);
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let cells = vec![true, false, false, true];
        assert_eq!(components(2, 2, &cells), vec![vec![0, 3]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn matches_stagewise_reference(seed in 0u64..10_000, ro in 0usize..3, rc in 0usize..3, min_area in 1usize..8) {
            let (rows, cols) = (13, 11);
            let mut rng = stream(seed, "morph.noise");
            let cells: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(0.55)).collect();
            let got = morph_filter(&grid(rows, cols, cells.clone()), ro, min_area, rc);
            let opened = ref_dilate(rows, cols, &ref_erode(rows, cols, &cells, ro), ro);
            let kept = ref_area_filter(rows, cols, &opened, min_area);
            let closed = ref_erode(rows, cols, &ref_dilate(rows, cols, &kept, rc), rc);
            prop_assert_eq!(got.cells, closed);
        }

        #[test]
        fn output_within_dilated_input(seed in 0u64..10_000, ro in 0usize..3, rc in 0usize..3) {
            let (rows, cols) = (15, 15);
            let mut rng = stream(seed, "morph.contain");
            let cells: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(0.4)).collect();
            let out = morph_filter(&grid(rows, cols, cells.clone()), ro, 3, rc);
            let bound = dilate(rows, cols, &cells, ro + rc);
            for i in 0..cells.len() {
                prop_assert!(!out.cells[i] || bound[i]);
            }
            // Every large component surviving the opening is kept.
            let opened = open(rows, cols, &cells, ro);
            for comp in components(rows, cols, &opened) {
                if comp.len() >= 3 {
                    prop_assert!(comp.iter().all(|&i| out.cells[i]));
                }
            }
        }
    }
}
