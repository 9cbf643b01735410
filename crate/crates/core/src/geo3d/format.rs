//! Plain-text point format: one point per line, `x y z [r g b] [t]`,
//! whitespace separated, `#` comments. A `# frame_id N` comment sets the
//! cloud's frame number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::textio::parse_field;

pub fn read_points<R: BufRead>(reader: R, path: &str) -> Result<PointCloud> {
    let mut cloud = PointCloud::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut toks = rest.split_whitespace();
            if toks.next() == Some("frame_id") {
                if let Some(v) = toks.next() {
                    cloud.frame_id = parse_field(v, path, lineno, "frame_id")?;
                }
            }
            continue;
        }
        let body = trimmed.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals = body
            .split_whitespace()
            .map(|t| parse_field::<f64>(t, path, lineno, "coordinate"))
            .collect::<Result<Vec<_>>>()?;
        let mut p = match vals.len() {
            3 | 4 | 6 | 7 => Point3::new(vals[0], vals[1], vals[2]),
            n => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 3, 4, 6 or 7 fields, got {n}"),
                ))
            }
        };
        if vals.len() >= 6 {
            p.color = Some([vals[3], vals[4], vals[5]]);
        }
        if vals.len() == 4 {
            p.temperature = Some(vals[3]);
        } else if vals.len() == 7 {
            p.temperature = Some(vals[6]);
        }
        p.validate()
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        cloud.points.push(p);
    }
    Ok(cloud)
}

pub fn read_points_file(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_points(BufReader::new(file), &path.display().to_string())
}

pub fn write_points<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    writeln!(w, "# x y z [r g b] [t]")?;
    writeln!(w, "# frame_id {}", cloud.frame_id)?;
    for p in &cloud.points {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(c) = p.color {
            write!(w, " {} {} {}", c[0], c[1], c[2])?;
        }
        if let Some(t) = p.temperature {
            write!(w, " {t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_points_file(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_points(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}
