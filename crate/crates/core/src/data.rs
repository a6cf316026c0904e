//! Datasets: synthetic generation, validation and CSV input/output.
//!
//! The CSV layout is a required `x,y` header followed by one sample per
//! line. Values are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bezier::Partition;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("row {row}: x = {x} is not larger than the previous abscissa")]
    NotIncreasing { row: u64, x: f64 },
    #[error("row {row}: y = {y} is negative")]
    Negative { row: u64, y: f64 },
    #[error("expected header `x,y`, found `{0}`")]
    Header(String),
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Loaded,
    Constructed,
}

/// Samples `(x_i, y_i)` with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    seed: Option<u64>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, DataError> {
        Self::build(x, y, None, Provenance::Constructed)
    }

    fn build(
        x: Vec<f64>,
        y: Vec<f64>,
        seed: Option<u64>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if x.len() != y.len() {
            return Err(DataError::Parse {
                row: 0,
                message: format!("{} abscissae but {} ordinates", x.len(), y.len()),
            });
        }
        if x.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(DataError::Parse {
                    row: i as u64 + 2,
                    message: "non-finite value".into(),
                });
            }
            if i > 0 && !(xi > x[i - 1]) {
                return Err(DataError::NotIncreasing {
                    row: i as u64 + 2,
                    x: xi,
                });
            }
        }
        Ok(Self {
            x,
            y,
            seed,
            provenance,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_nonnegative(&self) -> bool {
        self.y.iter().all(|&v| v >= 0.0)
    }

    /// Partition whose knots are the sample abscissae.
    pub fn knot_partition(&self) -> crate::Result<Partition> {
        Partition::new(self.x.clone())
    }
}

/// `count` standard normal draws from ChaCha20 seeded with `seed`.
pub fn standard_normals(count: usize, seed: u64) -> Vec<f64> {
    let rng = ChaCha20Rng::seed_from_u64(seed);
    rng.sample_iter(StandardNormal).take(count).collect()
}

/// Whether sample `i` belongs to the damped positions `5t + 2`, `5t + 3`.
pub fn is_damped_index(i: usize) -> bool {
    matches!(i % 5, 2 | 3)
}

/// Synthetic nonnegative data at `x_i = i`, `i = 0..=n`: absolute values of
/// standard normal draws, divided by 100 at the damped positions.
pub fn generate_data(n: usize, seed: u64) -> Dataset {
    let raw = standard_normals(n + 1, seed);
    let x = (0..=n).map(|i| i as f64).collect();
    let y = raw
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if is_damped_index(i) {
                v.abs() / 100.0
            } else {
                v.abs()
            }
        })
        .collect();
    Dataset::build(x, y, Some(seed), Provenance::Generated).expect("generated abscissae increase")
}

/// Reads an `x,y` CSV file. With `nonnegative` set, negative ordinates are
/// rejected.
pub fn load_dataset(path: impl AsRef<Path>, nonnegative: bool) -> Result<Dataset, DataError> {
    let file = File::open(path)?;
    parse_dataset(file, nonnegative)
}

pub fn parse_dataset(reader: impl std::io::Read, nonnegative: bool) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if header.len() != 2 || &header[0] != "x" || &header[1] != "y" {
        return Err(DataError::Header(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            row: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(DataError::Parse {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let parse = |s: &str, name: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    row,
                    message: format!("cannot parse {name} value `{s}`"),
                })
        };
        let xi = parse(&record[0], "x")?;
        let yi = parse(&record[1], "y")?;
        if let Some(&prev) = x.last() {
            if !(xi > prev) {
                return Err(DataError::NotIncreasing { row, x: xi });
            }
        }
        if nonnegative && yi < 0.0 {
            return Err(DataError::Negative { row, y: yi });
        }
        x.push(xi);
        y.push(yi);
    }
    Dataset::build(x, y, None, Provenance::Loaded)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset(dataset: &Dataset, out: &mut impl Write) -> Result<(), DataError> {
    writeln!(out, "x,y")?;
    for (x, y) in dataset.x.iter().zip(&dataset.y) {
        writeln!(out, "{x:.16e},{y:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_data_is_nonnegative_and_damped() {
        let raw = standard_normals(51, 7);
        let ds = generate_data(50, 7);
        assert_eq!(ds.len(), 51);
        assert!(ds.is_nonnegative());
        let max_raw = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..=50 {
            assert_eq!(ds.x()[i], i as f64);
            if is_damped_index(i) {
                assert_eq!(ds.y()[i], raw[i].abs() / 100.0);
                assert!(ds.y()[i] <= max_raw / 100.0);
            } else {
                assert_eq!(ds.y()[i], raw[i].abs());
            }
        }
        assert!(is_damped_index(2) && is_damped_index(13) && !is_damped_index(4));
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_data(20, 3), generate_data(20, 3));
        assert_ne!(generate_data(20, 3).y(), generate_data(20, 4).y());
    }

    #[test]
    fn normals_look_standard() {
        let v = standard_normals(20_000, 11);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn bad_field_names_row() {
        let err = parse_dataset("x,y\n1,abc\n".as_bytes(), true).unwrap_err();
        assert!(matches!(err, DataError::Parse { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn non_increasing_rejected() {
        let err = parse_dataset("x,y\n0,1\n1,1\n1,2\n".as_bytes(), true).unwrap_err();
        assert!(
            matches!(err, DataError::NotIncreasing { row: 4, .. }),
            "{err}"
        );
    }

    #[test]
    fn negative_rejected_only_in_nonnegative_mode() {
        let text = "x,y\n0,1\n1,-0.5\n";
        assert!(matches!(
            parse_dataset(text.as_bytes(), true),
            Err(DataError::Negative { row: 3, .. })
        ));
        assert!(parse_dataset(text.as_bytes(), false).is_ok());
    }

    #[test]
    fn header_required() {
        assert!(matches!(
            parse_dataset("a,b\n0,1\n".as_bytes(), true),
            Err(DataError::Header(_))
        ));
    }
}
