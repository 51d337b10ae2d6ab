//! CSV datasets: header `u1,...,u{n_u},y1,...,y{n_y}`, one sample per row.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ssenc_core::Dataset;

use crate::error::{Error, Result};

pub fn header_names(n_u: usize, n_y: usize) -> Vec<String> {
    (1..=n_u)
        .map(|i| format!("u{i}"))
        .chain((1..=n_y).map(|i| format!("y{i}")))
        .collect()
}

/// Channel counts implied by a header of the form `u1..u{n_u}, y1..y{n_y}`.
pub fn header_dims(header: &[&str]) -> Option<(usize, usize)> {
    let n_u = header.iter().take_while(|h| h.starts_with('u')).count();
    let n_y = header.len() - n_u;
    (n_y > 0 && header_names(n_u, n_y).iter().zip(header).all(|(a, b)| a == b)).then_some((n_u, n_y))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_header(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(h.iter().map(str::to_owned).collect())
}

/// Loads a dataset whose header must be exactly `u1..u{n_u},y1..y{n_y}`.
pub fn load_csv(path: impl AsRef<Path>, n_u: usize, n_y: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let header = read_header(path, &mut rdr)?;
    let expected = header_names(n_u, n_y);
    if header != expected {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    read_rows(path, rdr, &header, n_u, n_y)
}

/// Loads a dataset, taking the channel counts from its header.
pub fn load_csv_auto(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let header = read_header(path, &mut rdr)?;
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    let (n_u, n_y) = header_dims(&names).ok_or_else(|| Error::Header {
        path: path.to_path_buf(),
        expected: "u1,...,u{n_u},y1,...,y{n_y}".into(),
        found: header.join(","),
    })?;
    read_rows(path, rdr, &header, n_u, n_y)
}

fn read_rows(path: &Path, mut rdr: csv::Reader<File>, header: &[String], n_u: usize, n_y: usize) -> Result<Dataset> {
    let width = n_u + n_y;
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if rec.len() != width {
            return Err(Error::RowLength {
                path: path.to_path_buf(),
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: header[c].clone(),
                value: field.to_owned(),
            })?;
            if c < n_u {
                u.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
        });
    }
    Ok(Dataset::new(u, y, n_u, n_y)?)
}

/// Loads only the input columns `u1..u{n_u}` of a CSV; any further
/// columns are ignored.
pub fn load_inputs(path: impl AsRef<Path>, n_u: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let header = read_header(path, &mut rdr)?;
    let expected = header_names(n_u, 0);
    if header.len() < n_u || header[..n_u] != expected[..] {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    let mut u = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if rec.len() < n_u {
            return Err(Error::RowLength {
                path: path.to_path_buf(),
                row: i + 1,
                expected: header.len(),
                found: rec.len(),
            });
        }
        for (c, field) in rec.iter().take(n_u).enumerate() {
            let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                column: header[c].clone(),
                value: field.to_owned(),
            })?;
            u.push(v);
        }
    }
    if u.is_empty() {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
        });
    }
    Ok(u)
}

/// Writes `d` with the standard header. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn save_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let header = header_names(d.n_u(), d.n_y());
    let rows = (0..d.len()).map(|t| d.u_at(t).iter().chain(d.y_at(t)).copied().collect::<Vec<_>>());
    write_table(path, &header, rows)
}

/// Writes a numeric table with the given column names.
pub fn write_table<I>(path: impl AsRef<Path>, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
    inner.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_dims_recognizes_the_layout() {
        assert_eq!(header_dims(&["u1", "u2", "y1"]), Some((2, 1)));
        assert_eq!(header_dims(&["y1"]), Some((0, 1)));
        assert_eq!(header_dims(&["u1", "y2"]), None);
        assert_eq!(header_dims(&["u1"]), None);
        assert_eq!(header_dims(&["y1", "u1"]), None);
    }
}
