//! Reports: ordered check records, each stamped with the config hash.
//! Floats are written with 17 significant digits; non-finite values become
//! `null`.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

fn raw17(x: f64) -> Option<Box<RawValue>> {
    if !x.is_finite() {
        return None;
    }
    // {:.16e} keeps 17 significant digits; -0 prints as 0
    let x = if x == 0.0 { 0.0 } else { x };
    Some(RawValue::from_string(format!("{x:.16e}")).expect("float literal is valid JSON"))
}

pub fn num17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match raw17(*x) {
        Some(r) => r.serialize(s),
        None => s.serialize_none(),
    }
}

pub fn num17_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => num17(x, s),
        None => s.serialize_none(),
    }
}

pub fn num17_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&raw17(*x))?;
    }
    seq.end()
}

/// What a record certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    SymbolTable,
    Commutator,
    Factorization,
    Smoothness,
    KpHierarchy,
    Conjugation,
    ZeroCurvature,
    YangMills,
    Kp2Reduction,
    NonFormalFlow,
    CommutingFlows,
    Plumbing,
}

/// How a value is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bound {
    AtMost {
        #[serde(serialize_with = "num17")]
        tol: f64,
    },
    AtLeast {
        #[serde(serialize_with = "num17")]
        min: f64,
    },
    Within {
        #[serde(serialize_with = "num17")]
        lo: f64,
        #[serde(serialize_with = "num17")]
        hi: f64,
    },
    /// Structural assertion; the value is 1 when it holds.
    Holds,
}

impl Bound {
    fn accepts(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost { tol } => v <= tol,
            Bound::AtLeast { min } => v >= min,
            Bound::Within { lo, hi } => lo <= v && v <= hi,
            Bound::Holds => v == 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub name: String,
    pub anchor: Anchor,
    #[serde(serialize_with = "num17")]
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub pass: bool,
}

/// SHA-256 of the canonical (re-serialized) config.
pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub struct ReportBuilder {
    command: String,
    config: RunConfig,
    hash: String,
    only: Option<Vec<String>>,
    records: Vec<Record>,
}

impl ReportBuilder {
    pub fn new(command: &str, config: RunConfig, only: Option<Vec<String>>) -> Self {
        let hash = config_hash(&config);
        ReportBuilder {
            command: command.into(),
            config,
            hash,
            only,
            records: Vec::new(),
        }
    }

    /// Whether the record `name` is kept under `--only`: it is listed, or
    /// one of its dotted prefixes is.
    pub fn wants(&self, name: &str) -> bool {
        self.only
            .as_ref()
            .is_none_or(|list| list.iter().any(|p| name == p || name.starts_with(&format!("{p}."))))
    }

    /// Whether the group `group` has any record `--only` keeps.
    pub fn runs(&self, group: &str) -> bool {
        self.wants(group)
            || self
                .only
                .as_ref()
                .is_some_and(|list| list.iter().any(|p| p.starts_with(&format!("{group}."))))
    }

    pub fn push(&mut self, name: impl Into<String>, anchor: Anchor, value: f64, bound: Bound) {
        self.push_note(name, anchor, value, bound, None);
    }

    pub fn push_note(&mut self, name: impl Into<String>, anchor: Anchor, value: f64, bound: Bound, note: Option<String>) {
        let name = name.into();
        if !self.wants(&name) {
            return;
        }
        let pass = value.is_finite() && bound.accepts(value);
        log::debug!("{name}: {value:e} pass {pass}");
        self.records.push(Record {
            name,
            anchor,
            value,
            bound,
            pass,
            note,
            config_hash: self.hash.clone(),
        });
    }

    /// Records a check that could not be evaluated.
    pub fn push_error(&mut self, name: impl Into<String>, anchor: Anchor, bound: Bound, err: &nfkp::Error) {
        self.push_note(name, anchor, f64::NAN, bound, Some(err.to_string()));
    }

    pub fn push_holds(&mut self, name: impl Into<String>, anchor: Anchor, holds: bool) {
        self.push(name, anchor, if holds { 1.0 } else { 0.0 }, Bound::Holds);
    }

    pub fn finish(self) -> Report {
        let pass = self.records.iter().all(|r| r.pass);
        Report {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").into(),
            seed: self.config.seed,
            config_hash: self.hash,
            config: self.config,
            records: self.records,
            pass,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
