use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::map::{Label, TraversabilityMap};

pub const GREEN: [u8; 3] = [0, 200, 0];
pub const RED: [u8; 3] = [220, 0, 0];
pub const GRAY: [u8; 3] = [128, 128, 128];
pub const PURPLE: [u8; 3] = [128, 0, 160];

pub fn label_color(label: Label) -> [u8; 3] {
    match label {
        Label::Ground => GREEN,
        Label::NonGround => RED,
        Label::Unknown => GRAY,
        Label::Occluded => PURPLE,
    }
}

/// Binary PPM with one pixel per cell. Columns run along +x; the top
/// image row is the grid row with the largest y.
pub fn write_ppm<W: Write>(map: &TraversabilityMap, mut w: W) -> Result<()> {
    let g = map.geometry;
    write!(w, "P6\n{} {}\n255\n", g.n_cols, g.n_rows)?;
    let mut buf = Vec::with_capacity(3 * g.len());
    for r in (0..g.n_rows).rev() {
        for c in 0..g.n_cols {
            buf.extend_from_slice(&label_color(map.cells[g.index(r, c)].label));
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Writes `<stem>.ppm` and `<stem>.csv` into `dir`.
pub fn export_map(map: &TraversabilityMap, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.ppm")))?);
    write_ppm(map, &mut w)?;
    w.flush()?;
    map.write_csv_file(&dir.join(format!("{stem}.csv")))
}
