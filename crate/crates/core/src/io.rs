//! JSON-lines transcript persistence: a header line followed by one line per round.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{Context, Grid, Outcome, Transcript, TranscriptStep};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    /// Feature scaling applied at ingestion, when the stream came from a file.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepLine {
    t: usize,
    x: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<f64>,
    pi: usize,
    y: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    w: Option<Vec<f64>>,
}

fn f64s<R: Real>(v: &[R]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Writes the header and one line per step; `per_cell_w[t]` (the learners'
/// unrounded predictions) is included when given.
pub fn write_transcript<R: Real, W: Write>(
    out: &mut W,
    header: &TranscriptHeader,
    tr: &Transcript<R>,
    per_cell_w: Option<&[Vec<R>]>,
) -> Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for (i, s) in tr.steps().iter().enumerate() {
        let line = StepLine {
            t: i + 1,
            x: f64s(s.context.coords()),
            p: f64s(&s.cond_dist),
            pi: s.sampled_index,
            y: s.outcome.bit(),
            w: per_cell_w.map(|w| f64s(&w[i])),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transcript<R: Real, B: BufRead>(input: B) -> Result<(TranscriptHeader, Transcript<R>)> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines.next().ok_or(Error::Format {
        row: 0,
        msg: "missing header line".into(),
    })?;
    let header: TranscriptHeader = serde_json::from_str(&first?).map_err(|e| Error::Format {
        row: 1,
        msg: e.to_string(),
    })?;
    let grid = Grid::new(header.n)?;
    let mut tr = Transcript::new(grid, header.d);
    for (i, line) in lines {
        let row = i + 1;
        let fmt = |msg: String| Error::Format { row, msg };
        let s: StepLine = serde_json::from_str(&line?).map_err(|e| fmt(e.to_string()))?;
        let lit = |v: &[f64]| v.iter().map(|&x| R::lit(x)).collect::<Vec<R>>();
        let step = Context::new(lit(&s.x))
            .and_then(|x| TranscriptStep::new(x, lit(&s.p), s.pi, Outcome::from_u8(s.y)?))
            .map_err(|e| fmt(e.to_string()))?;
        tr.push(step).map_err(|e| fmt(e.to_string()))?;
    }
    if tr.horizon() != header.t {
        return Err(Error::Format {
            row: 1,
            msg: format!("header announces {} rounds, found {}", header.t, tr.horizon()),
        });
    }
    Ok((header, tr))
}
