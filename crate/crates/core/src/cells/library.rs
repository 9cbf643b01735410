//! Plain-text persistence for the mixture library.
//!
//! ```text
//! mixtures 2
//! k 1
//! <weight> <mean ×4> <covariance ×16, row-major>
//! k 2
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use super::{GaussianComponent, GaussianMixture};
use crate::error::{Error, Result};
use crate::textio::{content_lines, fmt17, parse_field};

pub fn write_library<W: Write>(library: &[GaussianMixture], mut w: W) -> Result<()> {
    writeln!(w, "mixtures {}", library.len())?;
    for m in library {
        writeln!(w, "k {}", m.components.len())?;
        for c in &m.components {
            let mut fields = vec![fmt17(c.weight)];
            fields.extend(c.mean.iter().map(|v| fmt17(*v)));
            for r in 0..4 {
                for col in 0..4 {
                    fields.push(fmt17(c.covariance[(r, col)]));
                }
            }
            writeln!(w, "{}", fields.join(" "))?;
        }
    }
    Ok(())
}

pub fn write_library_file(library: &[GaussianMixture], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_library(library, &mut w)?;
    w.flush()?;
    Ok(())
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str, path: &str, lineno: usize) -> Result<T> {
    let mut t = line.split_whitespace();
    if t.next() != Some(key) {
        return Err(Error::parse(path, lineno, format!("expected `{key} <n>`")));
    }
    let v = t.next().ok_or_else(|| Error::parse(path, lineno, format!("`{key}` needs a value")))?;
    parse_field(v, path, lineno, key)
}

pub fn read_library<R: BufRead>(reader: R, path: &str) -> Result<Vec<GaussianMixture>> {
    let lines = content_lines(reader)?;
    let mut it = lines.iter();
    let (l0, first) = it.next().ok_or_else(|| Error::parse(path, 0, "empty library file"))?;
    let count: usize = keyed(first, "mixtures", path, *l0)?;
    let mut library = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, line) = it.next().ok_or_else(|| Error::parse(path, *l0, "fewer mixtures than declared"))?;
        let k: usize = keyed(line, "k", path, *ln)?;
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            let (ln, line) = it.next().ok_or_else(|| Error::parse(path, *ln, "fewer components than declared"))?;
            let vals = line
                .split_whitespace()
                .map(|t| parse_field::<f64>(t, path, *ln, "component value"))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 21 {
                return Err(Error::parse(path, *ln, format!("component needs 21 values, found {}", vals.len())));
            }
            components.push(GaussianComponent {
                weight: vals[0],
                mean: Vector4::from_column_slice(&vals[1..5]),
                covariance: Matrix4::from_row_slice(&vals[5..21]),
            });
        }
        let m = GaussianMixture { components };
        m.validate().map_err(|e| Error::parse(path, *ln, e.to_string()))?;
        library.push(m);
    }
    if let Some((ln, _)) = it.next() {
        return Err(Error::parse(path, *ln, "trailing data after the declared mixtures"));
    }
    Ok(library)
}

pub fn read_library_file(path: &Path) -> Result<Vec<GaussianMixture>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_library(BufReader::new(file), &path.display().to_string())
}
