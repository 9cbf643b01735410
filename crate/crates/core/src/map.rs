//! Labelled horizontal grids shared by the classifiers, the fusion stage and
//! the exporters.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geo3d::GridGeometry;
use crate::textio::{fmt17, parse_field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Ground,
    NonGround,
    /// Not traversable because it lies in the shadow of an obstacle.
    Occluded,
    Unknown,
}

impl Label {
    /// Ground/non-ground view used for metrics; occluded counts as
    /// non-ground, unknown has no class.
    pub fn is_ground(self) -> Option<bool> {
        match self {
            Label::Ground => Some(true),
            Label::NonGround | Label::Occluded => Some(false),
            Label::Unknown => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Ground => "ground",
            Label::NonGround => "nonground",
            Label::Occluded => "occluded",
            Label::Unknown => "unknown",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground" => Ok(Label::Ground),
            "nonground" => Ok(Label::NonGround),
            "occluded" => Ok(Label::Occluded),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::param(format!("unknown label `{other}`"))),
        }
    }
}

/// A cell's label with the classifier score that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchLabel {
    pub label: Label,
    pub score: Option<f64>,
}

impl PatchLabel {
    pub const UNKNOWN: PatchLabel = PatchLabel {
        label: Label::Unknown,
        score: None,
    };

    pub fn new(label: Label, score: f64) -> Self {
        Self {
            label,
            score: Some(score),
        }
    }
}

/// Sensor bits for the per-cell observation mask.
pub mod sensor {
    pub const LIDAR: u8 = 1;
    pub const STEREO: u8 = 1 << 1;
    pub const THERMAL: u8 = 1 << 2;
    pub const RADAR: u8 = 1 << 3;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityMap {
    pub geometry: GridGeometry,
    pub cells: Vec<PatchLabel>,
    /// Bitmask of sensors that observed each cell.
    pub observed: Vec<u8>,
}

impl TraversabilityMap {
    pub fn unknown(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![PatchLabel::UNKNOWN; geometry.len()],
            observed: vec![0; geometry.len()],
        }
    }

    /// Builds a single-sensor map; every labelled cell is marked observed
    /// by `sensor_bit`.
    pub fn from_labels(geometry: GridGeometry, cells: Vec<PatchLabel>, sensor_bit: u8) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::param(format!(
                "label count {} does not match grid size {}",
                cells.len(),
                geometry.len()
            )));
        }
        let observed = cells
            .iter()
            .map(|c| if c.label == Label::Unknown { 0 } else { sensor_bit })
            .collect();
        Ok(Self {
            geometry,
            cells,
            observed,
        })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.cells.iter().map(|c| c.label).collect()
    }

    pub fn label_at(&self, x: f64, y: f64) -> Option<Label> {
        self.geometry.locate_index(x, y).map(|i| self.cells[i].label)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        writeln!(
            w,
            "# grid {} {} {} {} {}",
            g.origin.0, g.origin.1, g.cell_size, g.n_rows, g.n_cols
        )?;
        writeln!(w, "row,col,label,score")?;
        for (i, cell) in self.cells.iter().enumerate() {
            let (r, c) = g.row_col(i);
            let score = cell.score.map(fmt17).unwrap_or_default();
            writeln!(w, "{r},{c},{},{score}", cell.label)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a map written by [`write_csv`](Self::write_csv). Cells not
    /// listed stay unknown; observation bits are set for labelled cells.
    pub fn read_csv<R: BufRead>(reader: R, path: &str) -> Result<Self> {
        let mut geometry: Option<GridGeometry> = None;
        let mut map: Option<TraversabilityMap> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# grid") {
                let t: Vec<&str> = rest.split_whitespace().collect();
                if t.len() != 5 {
                    return Err(Error::parse(path, lineno, "grid header needs 5 fields"));
                }
                let g = GridGeometry::new(
                    (
                        parse_field(t[0], path, lineno, "origin x")?,
                        parse_field(t[1], path, lineno, "origin y")?,
                    ),
                    parse_field(t[2], path, lineno, "cell size")?,
                    parse_field(t[3], path, lineno, "rows")?,
                    parse_field(t[4], path, lineno, "cols")?,
                )
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
                geometry = Some(g);
                map = Some(TraversabilityMap::unknown(g));
                continue;
            }
            if line.starts_with('#') || line.starts_with("row,") {
                continue;
            }
            let (Some(g), Some(m)) = (geometry.as_ref(), map.as_mut()) else {
                return Err(Error::parse(path, lineno, "cell row before grid header"));
            };
            let t: Vec<&str> = line.split(',').collect();
            if t.len() != 4 {
                return Err(Error::parse(path, lineno, "expected row,col,label,score"));
            }
            let r: usize = parse_field(t[0], path, lineno, "row")?;
            let c: usize = parse_field(t[1], path, lineno, "col")?;
            if r >= g.n_rows || c >= g.n_cols {
                return Err(Error::parse(path, lineno, "cell outside grid"));
            }
            let label: Label = t[2]
                .parse()
                .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
            let score = if t[3].is_empty() {
                None
            } else {
                Some(parse_field::<f64>(t[3], path, lineno, "score")?)
            };
            let idx = g.index(r, c);
            m.cells[idx] = PatchLabel { label, score };
            m.observed[idx] = u8::from(label != Label::Unknown);
        }
        map.ok_or_else(|| Error::parse(path, 0, "missing `# grid` header"))
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::read_csv(BufReader::new(file), &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label_strategy() -> impl Strategy<Value = PatchLabel> {
        prop_oneof![
            Just(PatchLabel::UNKNOWN),
            (0.0f64..1e6).prop_map(|s| PatchLabel::new(Label::Ground, s)),
            (0.0f64..1e6).prop_map(|s| PatchLabel::new(Label::NonGround, s)),
            (0.0f64..1e6).prop_map(|s| PatchLabel::new(Label::Occluded, s)),
            Just(PatchLabel {
                label: Label::Occluded,
                score: None
            }),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(cells in proptest::collection::vec(label_strategy(), 12)) {
            let g = GridGeometry::new((-1.5, 0.25), 0.4, 3, 4).unwrap();
            let map = TraversabilityMap::from_labels(g, cells, sensor::STEREO).unwrap();
            let mut buf = Vec::new();
            map.write_csv(&mut buf).unwrap();
            let back = TraversabilityMap::read_csv(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back.geometry, map.geometry);
            prop_assert_eq!(back.cells, map.cells);
        }
    }

    #[test]
    fn csv_rejects_missing_header() {
        assert!(TraversabilityMap::read_csv("row,col,label,score\n0,0,ground,1\n".as_bytes(), "m").is_err());
    }

    #[test]
    fn from_labels_checks_size() {
        let g = GridGeometry::new((0.0, 0.0), 1.0, 2, 2).unwrap();
        assert!(TraversabilityMap::from_labels(g, vec![PatchLabel::UNKNOWN; 3], 1).is_err());
    }
}
