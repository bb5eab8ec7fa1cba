use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{default_menu, Hypothesis, HypothesisClass, LossSpec, Transcript};
use crate::error::{invalid, Result};
use crate::forecaster::{choose_n, NObjective};
use crate::metrics::{cal, mcal, psmcal, psreg, smcal, somni, sreg, MetricReport};
use crate::scalar::Real;

/// A named error functional of a transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricName {
    Smcal(u32),
    Psmcal(u32),
    Mcal(u32),
    Cal(u32),
    Sreg,
    Psreg,
    Somni,
}

impl FromStr for MetricName {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let with_q = |rest: &str| -> Result<u32> {
            match rest {
                "1" => Ok(1),
                "2" => Ok(2),
                _ => Err(invalid(format!("unknown metric '{s}'"))),
            }
        };
        Ok(match s {
            "sreg" => MetricName::Sreg,
            "psreg" => MetricName::Psreg,
            "somni" => MetricName::Somni,
            _ if s.starts_with("psmcal") => MetricName::Psmcal(with_q(&s[6..])?),
            _ if s.starts_with("smcal") => MetricName::Smcal(with_q(&s[5..])?),
            _ if s.starts_with("mcal") => MetricName::Mcal(with_q(&s[4..])?),
            _ if s.starts_with("cal") => MetricName::Cal(with_q(&s[3..])?),
            _ => return Err(invalid(format!("unknown metric '{s}'"))),
        })
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricName::Smcal(q) => write!(f, "smcal{q}"),
            MetricName::Psmcal(q) => write!(f, "psmcal{q}"),
            MetricName::Mcal(q) => write!(f, "mcal{q}"),
            MetricName::Cal(q) => write!(f, "cal{q}"),
            MetricName::Sreg => f.write_str("sreg"),
            MetricName::Psreg => f.write_str("psreg"),
            MetricName::Somni => f.write_str("somni"),
        }
    }
}

impl MetricName {
    /// Comparator class used when none is given.
    pub fn default_class(self) -> &'static str {
        match self {
            MetricName::Sreg | MetricName::Psreg => "ball4",
            MetricName::Somni => "affine-res",
            _ => "ball1",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum HypothesisJson {
    Linear { theta: Vec<f64> },
    Affine { theta: Vec<f64> },
    Constant { value: f64 },
}

/// `ball1`, `ball4`, `ball:R`, `affine-res`, `cover:EPS[:R]` or `finite:FILE`,
/// where FILE is a JSON list such as `[{"kind": "linear", "theta": [1, 0]}]`.
pub fn parse_class<R: Real>(s: &str) -> Result<HypothesisClass<R>> {
    let num = |v: &str| -> Result<R> {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite() && *x > 0.0)
            .map(R::lit)
            .ok_or_else(|| invalid(format!("bad number '{v}' in class '{s}'")))
    };
    let parts: Vec<&str> = s.splitn(3, ':').collect();
    Ok(match parts.as_slice() {
        ["ball1"] => HypothesisClass::ball(R::one()),
        ["ball4"] => HypothesisClass::ball(R::lit(4.0)),
        ["ball", r] => HypothesisClass::ball(num(r)?),
        ["affine-res"] => HypothesisClass::AffineRestricted,
        ["cover", eps] => HypothesisClass::Cover {
            eps: num(eps)?,
            radius: R::one(),
        },
        ["cover", eps, r] => HypothesisClass::Cover {
            eps: num(eps)?,
            radius: num(r)?,
        },
        ["finite", _] | ["finite", _, _] => load_finite_class(&s["finite:".len()..])?,
        _ => return Err(invalid(format!("unknown class '{s}'"))),
    })
}

pub fn load_finite_class<R: Real>(path: impl AsRef<Path>) -> Result<HypothesisClass<R>> {
    let text = std::fs::read_to_string(path)?;
    let items: Vec<HypothesisJson> = serde_json::from_str(&text)?;
    let lit = |v: &[f64]| v.iter().map(|&x| R::lit(x)).collect::<Vec<R>>();
    Ok(HypothesisClass::Finite(
        items
            .into_iter()
            .map(|h| match h {
                HypothesisJson::Linear { theta } => Hypothesis::Linear(lit(&theta)),
                HypothesisJson::Affine { theta } => Hypothesis::Affine(lit(&theta)),
                HypothesisJson::Constant { value } => Hypothesis::Constant(R::lit(value)),
            })
            .collect(),
    ))
}

/// Comma-separated loss names; the default menu when `None`.
pub fn parse_losses<R: Real>(s: Option<&str>) -> Result<Vec<LossSpec<R>>> {
    match s {
        None => Ok(default_menu()),
        Some(list) => list.split(',').map(|t| LossSpec::parse(t.trim())).collect(),
    }
}

pub fn evaluate<R: Real>(
    tr: &Transcript<R>,
    metric: MetricName,
    class: &HypothesisClass<R>,
    losses: &[LossSpec<R>],
) -> Result<MetricReport> {
    match metric {
        MetricName::Smcal(q) => smcal(tr, class, q),
        MetricName::Psmcal(q) => psmcal(tr, class, q),
        MetricName::Mcal(q) => mcal(tr, class, q),
        MetricName::Cal(q) => cal(tr, q),
        MetricName::Sreg => sreg(tr, class),
        MetricName::Psreg => psreg(tr, class),
        MetricName::Somni => somni(tr, losses, class),
    }
}

/// How the grid size is chosen for a horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NRule {
    Auto(NObjective),
    Fixed(usize),
}

impl NRule {
    pub fn resolve(self, t: usize, d: usize) -> Result<usize> {
        match self {
            NRule::Auto(obj) => choose_n(t.max(2), d, obj),
            NRule::Fixed(n) => Ok(n),
        }
    }
}

impl FromStr for NRule {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto-smcal" => NRule::Auto(NObjective::Smcal),
            "auto-sreg" => NRule::Auto(NObjective::Sreg),
            "auto-somni" => NRule::Auto(NObjective::Somni),
            _ => match s.parse::<usize>() {
                Ok(n) if n >= 1 => NRule::Fixed(n),
                _ => return Err(invalid(format!("grid rule must be auto-smcal, auto-sreg, auto-somni or a positive integer, got '{s}'"))),
            },
        })
    }
}

impl fmt::Display for NRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NRule::Auto(NObjective::Smcal) => f.write_str("auto-smcal"),
            NRule::Auto(NObjective::Sreg) => f.write_str("auto-sreg"),
            NRule::Auto(NObjective::Somni) => f.write_str("auto-somni"),
            NRule::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for NRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NRule::Fixed(n) => s.serialize_u64(*n as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for NRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Fixed(usize),
            Named(String),
        }
        match Repr::deserialize(d)? {
            Repr::Fixed(n) => format!("{n}").parse().map_err(serde::de::Error::custom),
            Repr::Named(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for s in ["smcal1", "smcal2", "psmcal1", "psmcal2", "mcal2", "cal2", "sreg", "psreg", "somni"] {
            assert_eq!(s.parse::<MetricName>().unwrap().to_string(), s);
        }
        assert!("smcal3".parse::<MetricName>().is_err());
        assert!("foo".parse::<MetricName>().is_err());
    }

    #[test]
    fn classes_parse() {
        assert!(matches!(parse_class::<f64>("ball4").unwrap(), HypothesisClass::LinearBall { radius } if radius == 4.0));
        assert!(matches!(parse_class::<f64>("cover:0.25").unwrap(), HypothesisClass::Cover { eps, radius } if eps == 0.25 && radius == 1.0));
        assert!(matches!(parse_class::<f64>("affine-res").unwrap(), HypothesisClass::AffineRestricted));
        assert!(parse_class::<f64>("cover:-1").is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        std::fs::write(&p, r#"[{"kind":"linear","theta":[1,0]},{"kind":"constant","value":0.5}]"#).unwrap();
        match parse_class::<f64>(&format!("finite:{}", p.display())).unwrap() {
            HypothesisClass::Finite(fs) => assert_eq!(fs.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn n_rules() {
        let r: NRule = serde_json::from_str("\"auto-smcal\"").unwrap();
        assert_eq!(r.resolve(1000, 2).unwrap(), 4);
        let r: NRule = serde_json::from_str("7").unwrap();
        assert_eq!(r, NRule::Fixed(7));
        assert_eq!(serde_json::to_string(&r).unwrap(), "7");
        assert!("0".parse::<NRule>().is_err());
    }
}
