//! Small helpers shared by the plain-text file formats.

use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every f64.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers. Inline
/// `#` comments are stripped.
pub fn content_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let body = body.trim();
        if !body.is_empty() {
            out.push((i + 1, body.to_string()));
        }
    }
    Ok(out)
}

pub fn parse_field<T: FromStr>(tok: &str, path: &str, line: usize, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {what} from `{tok}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.9979e-300, 123456.789, 0.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let text = "# header\n\n1 2 3 # tail\n  4 5 6\n";
        let lines = content_lines(text.as_bytes()).unwrap();
        assert_eq!(lines, vec![(3, "1 2 3".to_string()), (4, "4 5 6".to_string())]);
    }
}
