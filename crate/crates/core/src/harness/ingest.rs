use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::domain::{Context, Outcome};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::adversary::TAIL_RADIUS;

/// A labelled dataset mapped into the context domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested<R: Real = f64> {
    pub samples: Vec<(Context<R>, Outcome)>,
    /// Factor applied to every raw feature vector.
    pub scale: f64,
}

pub fn ingest_csv<R: Real>(path: impl AsRef<Path>) -> Result<Ingested<R>> {
    ingest_csv_reader(File::open(path)?)
}

/// Headerless rows of numeric features followed by a 0/1 label. Features get a
/// leading constant `1/2` and are scaled by `min(1, (sqrt(3)/2) / max row norm)`.
pub fn ingest_csv_reader<R: Real, T: Read>(input: T) -> Result<Ingested<R>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut raw: Vec<(Vec<f64>, Outcome)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format { row, msg: e.to_string() })?;
        if rec.len() < 2 {
            return Err(Error::Format {
                row,
                msg: "need at least one feature and a label".into(),
            });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Format {
                row,
                msg: format!("non-numeric cell '{field}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    row,
                    msg: format!("non-finite cell '{field}'"),
                });
            }
            vals.push(v);
        }
        let label = vals.pop().expect("non-empty row");
        let y = if label == 0.0 {
            Outcome::ZERO
        } else if label == 1.0 {
            Outcome::ONE
        } else {
            return Err(Error::Format {
                row,
                msg: format!("label {label} is not 0 or 1"),
            });
        };
        raw.push((vals, y));
    }
    let max_norm = raw
        .iter()
        .map(|(f, _)| f.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let scale = if max_norm > TAIL_RADIUS { TAIL_RADIUS / max_norm } else { 1.0 };
    let samples = raw
        .into_iter()
        .enumerate()
        .map(|(i, (f, y))| {
            let mut x = Vec::with_capacity(f.len() + 1);
            x.push(R::lit(0.5));
            x.extend(f.iter().map(|&v| R::lit(v * scale)));
            let x = Context::new(x).map_err(|e| Error::Format {
                row: i + 1,
                msg: e.to_string(),
            })?;
            Ok((x, y))
        })
        .collect::<Result<_>>()?;
    Ok(Ingested { samples, scale })
}

impl<R: Real> Ingested<R> {
    /// Re-expresses the data under a smaller overall factor, so that two files
    /// can share one scaling.
    pub fn rescaled(self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= self.scale) {
            return Err(crate::error::invalid(format!(
                "cannot rescale from factor {} to {scale}",
                self.scale
            )));
        }
        let ratio = R::lit(scale / self.scale);
        let samples = self
            .samples
            .into_iter()
            .map(|(x, y)| {
                let mut c = x.coords().to_vec();
                c[1..].iter_mut().for_each(|v| *v *= ratio);
                Ok((Context::new(c)?, y))
            })
            .collect::<Result<_>>()?;
        Ok(Ingested { samples, scale })
    }
}
