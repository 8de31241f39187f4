//! Exact q-series checks of the modular identities used by the transform routes.
//!
//! Each identity is built as `lhs − rhs` and checked to vanish through a given
//! exponent. Sides are formal sums of q-series whose leads may differ by
//! non-integers, so a corrupted eta exponent still produces a comparable
//! difference instead of an arithmetic error.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rug::Rational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qseries::{
    eta_quotient_series, lambert_series, ArithmeticSequence, EisensteinLikeSeries, EtaQuotient, QSeries, QSeriesError,
};

/// Extra relative order built into every input series.
const MARGIN: usize = 16;
/// Terms shown in `lhs_head` / `rhs_head`.
const HEAD_TERMS: usize = 6;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("unknown identity `{0}` (expected one of: {names})", names = Identity::ALL.map(|i| i.name()).join(", "))]
    Unknown(String),
    #[error("identity {identity} has no quotient `{label}` with scale {scale}")]
    BadMutation { identity: String, label: String, scale: u32 },
    #[error(transparent)]
    Series(#[from] QSeriesError),
}

pub type Result<T> = std::result::Result<T, IdentityError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    LambertEta,
    Weight2Resum,
    Weight0Resum,
    XAlgebraic,
    XDifferential,
}

impl Identity {
    pub const ALL: [Identity; 5] =
        [Identity::LambertEta, Identity::Weight2Resum, Identity::Weight0Resum, Identity::XAlgebraic, Identity::XDifferential];

    pub fn name(self) -> &'static str {
        match self {
            Identity::LambertEta => "lambert_eta",
            Identity::Weight2Resum => "weight2_resum",
            Identity::Weight0Resum => "weight0_resum",
            Identity::XAlgebraic => "x_algebraic",
            Identity::XDifferential => "x_differential",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            Identity::LambertEta => "sum_{m,n>=1, n odd} (-4/m) q^{mn} = eta8^4 / eta4^2",
            Identity::Weight2Resum => "sum_{m,n>=1} (-4/mn) n q^{mn} = eta2^4 eta8^4 / eta4^4",
            Identity::Weight0Resum => "sum_{m,n>=1, m,n odd} q^{mn} / n = -1/2 log(eta1^2 eta4 / eta2^3)",
            Identity::XAlgebraic => "2 eta8^2 eta32^4 / eta16^6 (1 + x) = 1 - x,  x = eta2^4 eta8^2 / eta4^6",
            Identity::XDifferential => "x^2 (q dx/dq)^2 = 4 (1 - x^4) E^2,  E = eta2^4 eta8^4 / eta4^4",
        }
    }

    /// The eta quotients the identity is built from, with their labels.
    pub fn quotients(self) -> Vec<(&'static str, EtaQuotient)> {
        let q = |s: &str| EtaQuotient::parse(s).expect("registry quotient");
        match self {
            Identity::LambertEta => vec![("rhs", q("8:4,4:-2"))],
            Identity::Weight2Resum => vec![("rhs", q("2:4,8:4,4:-4"))],
            Identity::Weight0Resum => vec![("log_arg", q("1:2,4:1,2:-3"))],
            Identity::XAlgebraic => vec![("p", q("8:2,32:4,16:-6")), ("x", q("2:4,8:2,4:-6"))],
            Identity::XDifferential => vec![("x", q("2:4,8:2,4:-6")), ("e", q("2:4,8:4,4:-4"))],
        }
    }

    /// Every single-exponent corruption by `delta` of the identity's quotients.
    pub fn mutations(self, delta: i32) -> Vec<Mutation> {
        self.quotients()
            .into_iter()
            .flat_map(|(label, eq)| {
                eq.factors().iter().map(move |&(scale, _)| Mutation { label: label.to_string(), scale, delta }).collect::<Vec<_>>()
            })
            .collect()
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Identity {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self> {
        Identity::ALL.into_iter().find(|i| i.name() == s).ok_or_else(|| IdentityError::Unknown(s.to_string()))
    }
}

/// Shift of one eta exponent in one of an identity's quotients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub label: String,
    pub scale: u32,
    pub delta: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equal,
    Mismatch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub statement: String,
    pub order_checked: usize,
    pub verdict: Verdict,
    /// Exponent of the first coefficient where the sides differ.
    pub first_mismatch: Option<String>,
    pub lhs_lead: String,
    pub rhs_lead: String,
    pub lhs_head: Vec<String>,
    pub rhs_head: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Equal
    }
}

/// A finite sum of q-series, one per class of leads modulo 1.
#[derive(Clone, Debug)]
struct FormalSum {
    terms: Vec<QSeries>,
    /// Everything through `q^order` is known exactly.
    order: Rational,
}

impl FormalSum {
    fn from_series(s: QSeries) -> Self {
        let order = s.order();
        let terms = if s.is_zero() { vec![] } else { vec![s] };
        Self { terms, order }
    }

    fn min_lead(&self) -> Rational {
        self.terms.iter().map(|t| t.lead().clone()).min().unwrap_or_else(|| self.order.clone())
    }

    fn add(&self, other: &Self) -> Result<Self> {
        let order = self.order.clone().min(other.order.clone());
        let mut terms: Vec<QSeries> = self.terms.clone();
        for s in &other.terms {
            match terms.iter().position(|t| Rational::from(t.lead() - s.lead()).denom() == &1u32) {
                Some(i) => terms[i] = terms[i].add(s)?,
                None => terms.push(s.clone()),
            }
        }
        Ok(Self::settle(terms, order))
    }

    fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(QSeries::neg).collect(), order: self.order.clone() }
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        let order = Rational::from(&self.order + other.min_lead()).min(Rational::from(&other.order + self.min_lead()));
        let mut acc = Self { terms: vec![], order: order.clone() };
        for a in &self.terms {
            for b in &other.terms {
                acc = acc.add(&Self::from_series(a.mul(b)))?;
            }
        }
        Ok(Self::settle(acc.terms, order))
    }

    fn scale(&self, c: &Rational) -> Self {
        Self::settle(self.terms.iter().map(|t| t.scale(c)).collect(), self.order.clone())
    }

    fn settle(terms: Vec<QSeries>, order: Rational) -> Self {
        let terms = terms.into_iter().map(|t| t.truncate_to_order(&order)).filter(|t| !t.is_zero()).collect();
        Self { terms, order }
    }

    /// Lowest exponent with a nonzero coefficient, if it is at most `t`.
    fn first_nonzero_through(&self, t: &Rational) -> Result<Option<Rational>> {
        if self.order < *t {
            return Err(QSeriesError::BeyondTruncation { requested: t.to_string(), available: self.order.to_string() }.into());
        }
        Ok(self.terms.iter().map(|s| s.lead().clone()).filter(|l| l <= t).min())
    }

    fn head(&self) -> Vec<String> {
        let mut all: Vec<(Rational, Rational)> = Vec::new();
        for s in &self.terms {
            for (j, c) in s.coeffs().iter().enumerate() {
                if *c != 0 {
                    all.push((Rational::from(s.lead() + j as u64), c.clone()));
                }
            }
        }
        all.sort();
        all.into_iter().take(HEAD_TERMS).map(|(e, c)| format!("{c}*q^{e}")).collect()
    }
}

/// A registry quotient with the mutation applied.
fn quotient(identity: Identity, label: &str, mutation: Option<&Mutation>) -> EtaQuotient {
    let (_, eq) = identity.quotients().into_iter().find(|(l, _)| *l == label).expect("known label");
    match mutation {
        Some(m) if m.label == label => eq.with_exponent_shift(m.scale, m.delta),
        _ => eq,
    }
}

fn series(eq: &EtaQuotient, t: usize) -> FormalSum {
    FormalSum::from_series(eta_quotient_series(eq, t))
}

struct Sides {
    lhs: FormalSum,
    rhs: FormalSum,
    notes: Vec<String>,
    /// Set when the sides cannot agree for a structural reason (a log-q term).
    forced_mismatch: Option<Rational>,
}

fn build(identity: Identity, t: usize, mutation: Option<&Mutation>) -> Result<Sides> {
    let n = t + MARGIN;
    let q = |label: &str| quotient(identity, label, mutation);
    let chi = ArithmeticSequence::char_minus4;
    let odd = ArithmeticSequence::odd_indicator;
    let mut notes = Vec::new();
    let mut forced_mismatch = None;
    let (lhs, rhs) = match identity {
        Identity::LambertEta => {
            let g = EisensteinLikeSeries::new(1, chi(), odd());
            (FormalSum::from_series(lambert_series(&g, n)), series(&q("rhs"), n))
        }
        Identity::Weight2Resum => {
            let g = EisensteinLikeSeries::new(2, chi(), chi());
            let rhs = series(&q("rhs"), n);
            if mutation.is_none() {
                notes = weight2_readings(&rhs, n, t)?;
            }
            (FormalSum::from_series(lambert_series(&g, n)), rhs)
        }
        Identity::Weight0Resum => {
            let g = EisensteinLikeSeries::new(0, odd(), odd());
            let lhs = FormalSum::from_series(lambert_series(&g, n));
            let arg = eta_quotient_series(&q("log_arg"), n);
            let rhs = match arg.log_series() {
                Ok(log) => FormalSum::from_series(log.scale(&Rational::from((-1, 2)))),
                Err(QSeriesError::LogOutOfDomain { lead, .. }) => {
                    notes.push(format!("log argument has lead {lead}; its logarithm carries a log q term absent on the left"));
                    forced_mismatch = Some(Rational::new());
                    FormalSum::from_series(QSeries::zero(Rational::from(n)))
                }
                Err(e) => return Err(e.into()),
            };
            (lhs, rhs)
        }
        Identity::XAlgebraic => {
            let x = series(&q("x"), n);
            let one = FormalSum::from_series(QSeries::one(n));
            let lhs = series(&q("p"), n).scale(&Rational::from(2)).mul(&one.add(&x)?)?;
            (lhs, one.sub(&x)?)
        }
        Identity::XDifferential => {
            let x_series = eta_quotient_series(&q("x"), n);
            let x = FormalSum::from_series(x_series.clone());
            let dx = FormalSum::from_series(x_series.q_derivative());
            let e = series(&q("e"), n);
            let x2 = x.mul(&x)?;
            let lhs = x2.mul(&dx.mul(&dx)?)?;
            let one = FormalSum::from_series(QSeries::one(n));
            let rhs = one.sub(&x2.mul(&x2)?)?.mul(&e.mul(&e)?)?.scale(&Rational::from(4));
            (lhs, rhs)
        }
    };
    Ok(Sides { lhs, rhs, notes, forced_mismatch })
}

/// Compares the two one-variable Lambert readings of the weight-2 left side,
/// `Σ n(−4/n) qⁿ/(1+q^{2n})` and the same with `n²`, against `rhs`.
fn weight2_readings(rhs: &FormalSum, n: usize, t: usize) -> Result<Vec<String>> {
    let reading = |power: u32| -> FormalSum {
        let mut coeffs = vec![Rational::new(); n + 1];
        for k in 1..=n {
            let chi = ArithmeticSequence::char_minus4().value(k as u64);
            if chi == 0 {
                continue;
            }
            let w = Rational::from(chi * (k as i64).pow(power));
            // qᵏ/(1+q^{2k}) = Σ_j (−1)^j q^{k(2j+1)}
            let mut j = 0usize;
            while k * (2 * j + 1) <= n {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                coeffs[k * (2 * j + 1)] += Rational::from(&w * sign);
                j += 1;
            }
        }
        FormalSum::from_series(QSeries::new(Rational::new(), coeffs, n))
    };
    let through = Rational::from(t);
    let mut notes = Vec::new();
    for (power, label) in [(1, "n (-4/n) q^n / (1 + q^{2n})"), (2, "n^2 (-4/n) q^n / (1 + q^{2n})")] {
        let diff = reading(power).sub(rhs)?;
        let line = match diff.first_nonzero_through(&through)? {
            None => format!("single-sum reading sum {label} agrees with the right side through q^{t}"),
            Some(e) => format!("single-sum reading sum {label} differs from the right side first at q^{e}"),
        };
        notes.push(line);
    }
    Ok(notes)
}

fn lead_of(s: &FormalSum) -> String {
    if s.terms.is_empty() {
        format!("> {}", s.order)
    } else {
        s.min_lead().to_string()
    }
}

fn report(identity: Identity, t: usize, mutation: Option<&Mutation>) -> Result<IdentityReport> {
    if let Some(m) = mutation {
        let known = identity.quotients().iter().any(|(l, eq)| *l == m.label && eq.factors().iter().any(|&(k, _)| k == m.scale));
        if !known {
            return Err(IdentityError::BadMutation { identity: identity.name().into(), label: m.label.clone(), scale: m.scale });
        }
    }
    let sides = build(identity, t, mutation)?;
    let first = match sides.forced_mismatch {
        Some(e) => Some(e),
        None => sides.lhs.sub(&sides.rhs)?.first_nonzero_through(&Rational::from(t))?,
    };
    Ok(IdentityReport {
        name: identity.name().to_string(),
        statement: identity.statement().to_string(),
        order_checked: t,
        verdict: if first.is_none() { Verdict::Equal } else { Verdict::Mismatch },
        first_mismatch: first.map(|e| e.to_string()),
        lhs_lead: lead_of(&sides.lhs),
        rhs_lead: lead_of(&sides.rhs),
        lhs_head: sides.lhs.head(),
        rhs_head: sides.rhs.head(),
        mutation: mutation.cloned(),
        notes: sides.notes,
    })
}

/// Checks `identity` exactly through `q^t`.
pub fn verify_identity(identity: Identity, t: usize) -> Result<IdentityReport> {
    report(identity, t, None)
}

/// Checks an identity by registry name.
pub fn verify(name: &str, t: usize) -> Result<IdentityReport> {
    verify_identity(name.parse()?, t)
}

/// Runs the whole registry in parallel; reports come back in registry order.
pub fn verify_all(t: usize) -> Result<Vec<IdentityReport>> {
    Identity::ALL.par_iter().map(|&id| verify_identity(id, t)).collect()
}

/// Checks `identity` with one eta exponent corrupted.
pub fn verify_mutated(identity: Identity, t: usize, mutation: &Mutation) -> Result<IdentityReport> {
    report(identity, t, Some(mutation))
}
