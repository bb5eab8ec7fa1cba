use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Context, Outcome};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, RunRng, Stream};
use crate::scalar::Real;

use super::ingest::ingest_csv;

/// Norm budget of the non-constant coordinates: `1/4 + 3/4 = 1`.
pub const TAIL_RADIUS: f64 = 0.866_025_403_784_438_6;

/// Source of the `(x_t, y_t)` sequence. All kinds are oblivious: the whole
/// sequence is fixed by the seed before the forecaster runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Tail coordinates uniform in the ball of radius `sqrt(3)/2`;
    /// `y ~ Ber(clamp(1/2 + (<theta*, x> + noise * xi) / 2))` with standard normal `xi`.
    /// `theta_star` defaults to the normalized all-ones vector on the tail coordinates.
    IidLogistic {
        #[serde(default)]
        theta_star: Option<Vec<f64>>,
        #[serde(default)]
        noise: f64,
    },
    /// Constant context `(1/2, 0, ..., 0)` with `y ~ Ber(bias)`.
    IidBernoulli { bias: f64 },
    /// Rows of a headerless CSV file, features then a 0/1 label.
    Csv { path: PathBuf },
    /// Logistic-style contexts with labels whose bias drifts sinusoidally, so
    /// that any fixed forecast is miscalibrated on some window.
    AntiCalibration {
        #[serde(default)]
        adaptive: bool,
    },
}

impl Default for AdversaryKind {
    fn default() -> Self {
        AdversaryKind::IidLogistic {
            theta_star: None,
            noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    #[serde(default)]
    pub seed: u64,
}

impl AdversarySpec {
    pub fn new(kind: AdversaryKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// `iid-logistic`, `iid-bernoulli[:BIAS]`, `anti-calibration` or `csv:PATH`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        let kind = match s.split_once(':') {
            None if s == "iid-logistic" => AdversaryKind::default(),
            None if s == "iid-bernoulli" => AdversaryKind::IidBernoulli { bias: 0.5 },
            None if s == "anti-calibration" => AdversaryKind::AntiCalibration { adaptive: false },
            Some(("iid-bernoulli", b)) => AdversaryKind::IidBernoulli {
                bias: b.parse().map_err(|_| invalid(format!("bad bias '{b}'")))?,
            },
            Some(("csv", path)) => AdversaryKind::Csv { path: path.into() },
            _ => return Err(invalid(format!("unknown adversary '{s}'"))),
        };
        Ok(Self { kind, seed })
    }
}

/// Uniform point of the `k`-dimensional ball of the given radius.
fn uniform_in_ball(rng: &mut RunRng, k: usize, radius: f64) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.gen::<f64>().powf(1.0 / k as f64);
    if norm == 0.0 {
        return vec![0.0; k];
    }
    g.into_iter().map(|v| v / norm * r).collect()
}

fn context<R: Real>(tail: &[f64]) -> Result<Context<R>> {
    let mut x = Vec::with_capacity(tail.len() + 1);
    x.push(R::lit(0.5));
    x.extend(tail.iter().map(|&v| R::lit(v)));
    Context::new(x)
}

fn default_theta_star(d: usize) -> Vec<f64> {
    let mut t = vec![0.0; d];
    if d > 1 {
        let c = 1.0 / ((d - 1) as f64).sqrt();
        t[1..].iter_mut().for_each(|v| *v = c);
    }
    t
}

/// The first `t` rounds of the adversary's sequence in dimension `d`.
pub fn generate_stream<R: Real>(spec: &AdversarySpec, t: usize, d: usize) -> Result<Vec<(Context<R>, Outcome)>> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let mut rng = stream(spec.seed, Stream::Adversary);
    match &spec.kind {
        AdversaryKind::IidLogistic { theta_star, noise } => {
            let theta = theta_star.clone().unwrap_or_else(|| default_theta_star(d));
            if theta.len() != d {
                return Err(invalid(format!("theta_star has dimension {}, expected {d}", theta.len())));
            }
            if !(*noise >= 0.0) {
                return Err(invalid("noise scale must be non-negative"));
            }
            (0..t)
                .map(|_| {
                    let tail = uniform_in_ball(&mut rng, d - 1, TAIL_RADIUS);
                    let x = context::<R>(&tail)?;
                    let mut lin = 0.5 * theta[0] + tail.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
                    if *noise > 0.0 {
                        lin += noise * rng.sample::<f64, _>(StandardNormal);
                    }
                    let prob = (0.5 + lin / 2.0).clamp(0.0, 1.0);
                    Ok((x, Outcome::new(rng.gen_bool(prob))))
                })
                .collect()
        }
        AdversaryKind::IidBernoulli { bias } => {
            if !(0.0..=1.0).contains(bias) {
                return Err(invalid(format!("bias {bias} outside [0, 1]")));
            }
            let x = context::<R>(&vec![0.0; d - 1])?;
            Ok((0..t).map(|_| (x.clone(), Outcome::new(rng.gen_bool(*bias)))).collect())
        }
        AdversaryKind::Csv { path } => {
            let data = ingest_csv::<R>(path)?;
            if let Some((x, _)) = data.samples.first() {
                if x.dim() != d {
                    return Err(Error::Format {
                        row: 1,
                        msg: format!("file gives contexts of dimension {}, expected {d}", x.dim()),
                    });
                }
            }
            Ok(data.samples.into_iter().take(t).collect())
        }
        AdversaryKind::AntiCalibration { adaptive } => {
            if *adaptive {
                return Err(invalid("adaptive adversaries are not supported"));
            }
            let period = (t as f64).sqrt().max(16.0);
            (0..t)
                .map(|i| {
                    let tail = uniform_in_ball(&mut rng, d - 1, TAIL_RADIUS);
                    let bias = 0.5 + 0.45 * (2.0 * PI * i as f64 / period).sin();
                    Ok((context::<R>(&tail)?, Outcome::new(rng.gen_bool(bias))))
                })
                .collect()
        }
    }
}
