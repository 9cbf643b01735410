use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::RadarImage;
use crate::error::{Error, Result};
use crate::textio::{content_lines, fmt17, parse_field};

/// Reads a radar image: four `key value` header lines (`range_bins`,
/// `azimuth_bins`, `range_resolution_m`, `min_range_m`, any order) followed
/// by the intensities in row-major order, one range bin per line or freely
/// wrapped.
pub fn read_radar_image<R: BufRead>(reader: R, path: &str) -> Result<RadarImage> {
    let mut range_bins: Option<usize> = None;
    let mut azimuth_bins: Option<usize> = None;
    let mut resolution: Option<f64> = None;
    let mut min_range: Option<f64> = None;
    let mut values = Vec::new();
    let mut last_line = 0;
    for (lineno, line) in content_lines(reader)? {
        last_line = lineno;
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap_or_default();
        let header = match first {
            "range_bins" | "azimuth_bins" | "range_resolution_m" | "min_range_m" => true,
            _ => false,
        };
        if header {
            if !values.is_empty() {
                return Err(Error::parse(path, lineno, "header after intensity data"));
            }
            let v = toks
                .next()
                .ok_or_else(|| Error::parse(path, lineno, format!("`{first}` needs a value")))?;
            match first {
                "range_bins" => range_bins = Some(parse_field(v, path, lineno, first)?),
                "azimuth_bins" => azimuth_bins = Some(parse_field(v, path, lineno, first)?),
                "range_resolution_m" => resolution = Some(parse_field(v, path, lineno, first)?),
                _ => min_range = Some(parse_field(v, path, lineno, first)?),
            }
            continue;
        }
        for tok in line.split_whitespace() {
            values.push(parse_field::<f64>(tok, path, lineno, "intensity")?);
        }
    }
    let missing = |what: &str| Error::parse(path, last_line, format!("missing `{what}` header"));
    let range_bins = range_bins.ok_or_else(|| missing("range_bins"))?;
    let azimuth_bins = azimuth_bins.ok_or_else(|| missing("azimuth_bins"))?;
    let resolution = resolution.ok_or_else(|| missing("range_resolution_m"))?;
    let min_range = min_range.ok_or_else(|| missing("min_range_m"))?;
    RadarImage::new(values, range_bins, azimuth_bins, resolution, min_range)
        .map_err(|e| Error::parse(path, last_line, e.to_string()))
}

pub fn read_radar_image_file(path: &Path) -> Result<RadarImage> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_radar_image(BufReader::new(file), &path.display().to_string())
}

pub fn write_radar_image<W: Write>(img: &RadarImage, mut w: W) -> Result<()> {
    writeln!(w, "range_bins {}", img.range_bins)?;
    writeln!(w, "azimuth_bins {}", img.azimuth_bins)?;
    writeln!(w, "range_resolution_m {}", img.range_resolution)?;
    writeln!(w, "min_range_m {}", img.min_range)?;
    for row in img.intensities.chunks(img.azimuth_bins) {
        let line: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_radar_image_file(img: &RadarImage, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_radar_image(img, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Binary 8-bit PGM; `cells` is row-major with `width` columns and set
/// cells are written as 255. Rows are written in the given order.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, cells: &[bool]) -> Result<()> {
    if cells.len() != width * height {
        return Err(Error::param(format!("{} cells for a {width}x{height} image", cells.len())));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = cells.iter().map(|&c| if c { 255 } else { 0 }).collect();
    w.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let img = RadarImage::new(vec![0.0, 1.5, 1e-7, 3.0, 0.1, 2.0 / 3.0], 2, 3, 0.2, 3.0).unwrap();
        let mut buf = Vec::new();
        write_radar_image(&img, &mut buf).unwrap();
        assert_eq!(read_radar_image(buf.as_slice(), "mem").unwrap(), img);
    }

    #[test]
    fn wrapped_values_and_comments() {
        let text = "# sweep\nmin_range_m 3\nrange_bins 2\nazimuth_bins 2\nrange_resolution_m 0.5\n1 2 3\n4\n";
        let img = read_radar_image(text.as_bytes(), "mem").unwrap();
        assert_eq!(img.intensities, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(img.max_range(), 4.0);
    }

    #[test]
    fn errors_name_the_problem() {
        let text = "range_bins 2\nazimuth_bins 2\nrange_resolution_m 0.5\n1 2 3 4\n";
        assert!(read_radar_image(text.as_bytes(), "mem").unwrap_err().to_string().contains("min_range_m"));
        let text = "range_bins 2\nazimuth_bins 2\nrange_resolution_m 0.5\nmin_range_m 1\n1 2 x 4\n";
        assert!(read_radar_image(text.as_bytes(), "mem").is_err());
        let text = "range_bins 2\nazimuth_bins 2\nrange_resolution_m 0.5\nmin_range_m 1\n1 2 3\n";
        assert!(read_radar_image(text.as_bytes(), "mem").is_err());
        let missing = read_radar_image_file(Path::new("/nonexistent/radar.txt")).unwrap_err();
        assert!(matches!(missing, Error::MissingFile(_)));
    }

    #[test]
    fn pgm_layout() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 3, 1, &[true, false, true]).unwrap();
        assert_eq!(buf, b"P5\n3 1\n255\n\xff\x00\xff");
        assert!(write_pgm(Vec::new(), 2, 2, &[true]).is_err());
    }
}
