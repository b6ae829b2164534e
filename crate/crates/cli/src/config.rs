//! Run configuration: JSON in, validated [`RunConfig`] out.
//!
//! Checks that concern a single value (an S0 order, a positive step) run
//! while deserializing, so serde reports the exact line and column. Checks
//! that relate two fields run afterwards and name the line of the first
//! offending key.

use nfkp::{LoopFn, Symbol, TruncParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::report::{num17, num17_opt, num17_vec};

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A symbol order that must be `≤ -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct NegativeOrder(i32);

impl TryFrom<i32> for NegativeOrder {
    type Error = String;
    fn try_from(n: i32) -> Result<Self, String> {
        if n <= -1 {
            Ok(NegativeOrder(n))
        } else {
            Err(format!("S0 order must be <= -1, got {n}"))
        }
    }
}

impl From<NegativeOrder> for i32 {
    fn from(n: NegativeOrder) -> i32 {
        n.0
    }
}

/// A strictly positive, finite real.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "f64")]
pub struct Positive(f64);

impl Serialize for Positive {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        num17(&self.0, s)
    }
}

impl TryFrom<f64> for Positive {
    type Error = String;
    fn try_from(x: f64) -> Result<Self, String> {
        if x > 0.0 && x.is_finite() {
            Ok(Positive(x))
        } else {
            Err(format!("expected a finite value > 0, got {x}"))
        }
    }
}

impl From<Positive> for f64 {
    fn from(x: Positive) -> f64 {
        x.0
    }
}

impl Positive {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Real part and imaginary part of one Fourier coefficient; a bare number
/// for `d = 1`, row-major `d×d` lists otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Scalar(#[serde(serialize_with = "num17")] f64),
    Matrix(#[serde(serialize_with = "num17_vec")] Vec<f64>),
}

impl Entry {
    fn values(&self) -> Vec<f64> {
        match self {
            Entry::Scalar(x) => vec![*x],
            Entry::Matrix(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub mode: i32,
    pub re: Entry,
    #[serde(default = "zero_entry")]
    pub im: Entry,
}

fn zero_entry() -> Entry {
    Entry::Scalar(0.0)
}

/// `a_n(x) ξⁿ` of the dressing datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S0Term {
    pub order: NegativeOrder,
    pub coeffs: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cube {
    #[serde(serialize_with = "num17")]
    pub k: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_end: Positive,
    /// Defaults to `t_end / 256`.
    #[serde(default, serialize_with = "num17_opt")]
    pub dt: Option<f64>,
    #[serde(default = "default_directions")]
    pub directions: Vec<usize>,
    /// Scales `s` of the convergence table; direction `n` runs to `sⁿ`.
    #[serde(default = "default_scales", serialize_with = "num17_vec")]
    pub scales: Vec<f64>,
}

fn default_directions() -> Vec<usize> {
    vec![2, 3]
}

fn default_scales() -> Vec<f64> {
    vec![0.02, 0.01]
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_end: Positive(0.01),
            dt: None,
            directions: default_directions(),
            scales: default_scales(),
        }
    }
}

/// `u₋₁`, `u₋₂` for the symbol table; random from the seed when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableInput {
    pub u1: Vec<Coefficient>,
    pub u2: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Write the solved `S` and `Y` next to the report.
    #[serde(default)]
    pub series: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d1")]
    pub d: usize,
    #[serde(rename = "M", default = "m32")]
    pub m: usize,
    #[serde(rename = "F", default = "f10")]
    pub f: i32,
    #[serde(rename = "N", default = "n14")]
    pub n: i32,
    #[serde(rename = "V", default = "v6")]
    pub v: u32,
    #[serde(rename = "K", default = "k3")]
    pub k: usize,
    #[serde(default = "g8")]
    pub guard: u32,
    #[serde(rename = "Mr", default = "mr24")]
    pub mr: usize,
    #[serde(rename = "Q", default = "q8")]
    pub q: usize,
    #[serde(default = "cube")]
    pub cube: Cube,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub s0: Vec<S0Term>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub table: Option<TableInput>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn d1() -> usize {
    1
}
fn m32() -> usize {
    32
}
fn f10() -> i32 {
    -10
}
fn n14() -> i32 {
    14
}
fn v6() -> u32 {
    6
}
fn k3() -> usize {
    3
}
fn g8() -> u32 {
    8
}
fn mr24() -> usize {
    24
}
fn q8() -> usize {
    8
}
fn cube() -> Cube {
    Cube { k: 0.05, n: 2 }
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

/// Line (1-based) of the first `"key"` in `text`, or 1.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

/// serde can report a rejected value past the whitespace and brackets that
/// follow it; step back to the value's last character.
fn value_end(text: &str, line: usize, column: usize) -> (usize, usize) {
    let offset: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum::<usize>() + column;
    let offset = offset.min(text.len());
    if !text.is_char_boundary(offset) {
        return (line, column);
    }
    let head = &text[..offset];
    let end = head.trim_end_matches(|c: char| c.is_whitespace() || c == '}' || c == ']');
    if end.is_empty() {
        return (line, column);
    }
    let line = end.matches('\n').count() + 1;
    let column = end.len() - end.rfind('\n').map_or(0, |i| i + 1);
    (line, column)
}

impl RunConfig {
    /// Parses and validates a JSON config.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            let (line, column) = if e.is_data() { value_end(text, e.line(), e.column()) } else { (e.line(), e.column()) };
            let full = e.to_string();
            let message = full
                .rfind(" at line ")
                .map_or(full.as_str(), |i| &full[..i])
                .to_string();
            ConfigError { line, column, message }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| ConfigError {
            line: line_of(text, key),
            column: 1,
            message,
        };
        if self.d == 0 {
            return Err(fail("d", "d must be >= 1".into()));
        }
        if self.m == 0 {
            return Err(fail("M", "M must be >= 1".into()));
        }
        if self.f > -1 {
            return Err(fail("F", format!("need F <= -1, got {}", self.f)));
        }
        if self.n < 1 {
            return Err(fail("N", format!("need N >= 1, got {}", self.n)));
        }
        if self.v == 0 {
            return Err(fail("V", "V must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(fail("K", "K must be >= 1".into()));
        }
        if self.mr == 0 || self.mr > self.m {
            return Err(fail("Mr", format!("need 1 <= Mr <= M = {}, got {}", self.m, self.mr)));
        }
        if self.q == 0 {
            return Err(fail("Q", "Q must be >= 1".into()));
        }
        if !(self.cube.k > 0.0 && self.cube.k.is_finite()) {
            return Err(fail("k", format!("cube half-width must be > 0, got {}", self.cube.k)));
        }
        if self.cube.n == 0 || self.cube.n > self.k {
            return Err(fail("n", format!("cube dimension must lie in [1, K = {}], got {}", self.k, self.cube.n)));
        }
        if let Some(dt) = self.flow.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(fail("dt", format!("flow dt must be > 0, got {dt}")));
            }
        }
        if let Some(&n) = self.flow.directions.iter().find(|&&n| n == 0 || n > self.k) {
            return Err(fail("directions", format!("flow direction {n} outside [1, K = {}]", self.k)));
        }
        if let Some(&s) = self.flow.scales.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(fail("scales", format!("flow scales must be > 0, got {s}")));
        }
        let lo = self.f - self.guard as i32;
        for term in &self.s0 {
            let order = i32::from(term.order);
            if order < lo {
                return Err(fail("order", format!("S0 order {order} below the working floor {lo}")));
            }
            self.check_coeffs(text, &term.coeffs)?;
        }
        if let Some(t) = &self.table {
            self.check_coeffs(text, &t.u1)?;
            self.check_coeffs(text, &t.u2)?;
        }
        Ok(())
    }

    fn check_coeffs(&self, text: &str, coeffs: &[Coefficient]) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| ConfigError {
            line: line_of(text, key),
            column: 1,
            message,
        };
        let block = self.d * self.d;
        for c in coeffs {
            if c.mode.unsigned_abs() as usize > self.m {
                return Err(fail("mode", format!("mode {} exceeds M = {}", c.mode, self.m)));
            }
            for (key, e) in [("re", &c.re), ("im", &c.im)] {
                let n = e.values().len();
                // a scalar `im` for d > 1 is only the default 0
                let scalar_ok = match e {
                    Entry::Scalar(x) => self.d == 1 || (key == "im" && *x == 0.0),
                    Entry::Matrix(_) => false,
                };
                if n != block && !scalar_ok {
                    return Err(fail(key, format!("coefficient needs {block} entries, has {n}")));
                }
            }
        }
        Ok(())
    }

    /// KP-II pipelines need three times.
    pub fn require_kp2(&self) -> Result<(), ConfigError> {
        if self.k < 3 {
            return Err(ConfigError {
                line: 1,
                column: 1,
                message: format!("this command needs K >= 3, got {}", self.k),
            });
        }
        Ok(())
    }

    pub fn params(&self) -> TruncParams {
        TruncParams {
            dim: self.d,
            modes: self.m,
            floor: self.f,
            ceiling: self.n,
            val_cap: self.v,
            times: self.k,
            guard: self.guard,
            hbar: 1.0,
        }
    }

    pub fn loopfn(&self, coeffs: &[Coefficient]) -> LoopFn {
        let block = self.d * self.d;
        let mut f = LoopFn::zero(self.d, self.m);
        for c in coeffs {
            let re = c.re.values();
            let im = c.im.values();
            let slot = f.coeff_mut(c.mode);
            for (i, s) in slot.iter_mut().enumerate().take(block) {
                let r = if re.len() == 1 && self.d == 1 { re[0] } else { re[i] };
                let j = if im.len() == 1 { im[0] } else { im[i] };
                *s += Complex64::new(r, j);
            }
        }
        f
    }

    /// `1 + Σ a_n ξⁿ`.
    pub fn dressing(&self) -> nfkp::Result<Symbol> {
        let p = self.params();
        let mut s0 = Symbol::identity(p);
        for term in &self.s0 {
            let order = i32::from(term.order);
            let f = &s0.coeff_or_zero(order) + &self.loopfn(&term.coeffs);
            s0.set_coeff(order, f)?;
        }
        Ok(s0)
    }

    /// Whether `S0 = 1`, for which the negative controls are degenerate.
    pub fn trivial_dressing(&self) -> bool {
        self.s0.iter().all(|t| self.loopfn(&t.coeffs).is_zero())
    }

    pub fn flow_dt(&self, t_end: f64) -> f64 {
        self.flow.dt.unwrap_or(t_end / 256.0)
    }
}
