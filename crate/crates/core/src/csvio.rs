//! Plain numeric CSV files: point sets in, preference rays out.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

/// Reads a header row followed by rows of finite numbers, all of one width.
///
/// A file holding only a header (or nothing at all) yields no points.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Data(format!(
                "row {}: expected {width} columns, found {}",
                i + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!("row {}, column {}: `{field}` is not a number", i + 1, c + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { context: format!("row {}", i + 1), index: c });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(row);
    }
    Ok(points)
}

/// Writes `r_1..r_J` rows with a header, LF line endings.
pub fn write_rays_csv<W: Write>(rays: &[PreferenceVector], writer: W) -> Result<()> {
    let j = rays.first().map_or(0, PreferenceVector::dim);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record((1..=j).map(|k| format!("r_{k}")))?;
    for r in rays {
        w.write_record(r.weights().iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_points() {
        let pts = read_points_csv("a,b\n1,0\n 0 ,1\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn empty_inputs() {
        assert!(read_points_csv("".as_bytes()).unwrap().is_empty());
        assert!(read_points_csv("a,b\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(read_points_csv("a,b\n1,x\n".as_bytes()).is_err());
        assert!(read_points_csv("a,b\n1,nan\n".as_bytes()).is_err());
        assert!(read_points_csv("a,b\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn rays_round_trip() {
        let rays = crate::preference::test_rays(3, 10).unwrap();
        let mut buf = Vec::new();
        write_rays_csv(&rays, &mut buf).unwrap();
        let back = read_points_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rays.len());
        for (a, b) in back.iter().zip(&rays) {
            assert_eq!(a.as_slice(), b.weights());
        }
    }
}
