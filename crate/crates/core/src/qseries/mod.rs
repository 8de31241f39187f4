//! Exact truncated q-series.
//!
//! A [`QSeries`] is `q^lead · (c₀ + c₁q + … + c_T q^T + O(q^{T+1}))` with
//! big-rational coefficients. Every operation tracks how far its result is
//! trusted: binary operations keep the smaller of the two trusted orders, so
//! a result never claims coefficients its inputs do not determine.

mod eta;
mod lambert;

pub use eta::{eta_quotient_integer_coeffs, eta_quotient_series, eta_series, EtaQuotient};
pub use lambert::{lambert_series, ArithmeticSequence, EisensteinLikeSeries, SequenceKind};

use std::fmt;

use rug::{Float, Integer, Rational};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QSeriesError {
    #[error("division by the zero series")]
    DivisionByZero,
    #[error("logarithm needs lead 0 and constant term 1, got lead {lead} and constant term {constant}")]
    LogOutOfDomain { lead: String, constant: String },
    #[error("series leads {0} and {1} differ by a non-integer; cannot add on one exponent grid")]
    IncompatibleLeads(String, String),
    #[error("comparison through q^{requested} exceeds trusted order q^{available}")]
    BeyondTruncation { requested: String, available: String },
    #[error("invalid eta quotient: {0}")]
    InvalidEtaQuotient(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("integer overflow while expanding {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, QSeriesError>;

/// Truncated formal power series in `q` with a rational leading exponent.
///
/// Nonzero series are normalized so that `coeffs[0] != 0` and
/// `coeffs.len() == trunc + 1`. The zero series has no coefficients and
/// `trunc == 0`; its `lead` is the exponent through which it is known to vanish.
#[derive(Clone, PartialEq, Eq)]
pub struct QSeries {
    lead: Rational,
    coeffs: Vec<Rational>,
    trunc: usize,
}

/// Outcome of [`series_equal`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub equal: bool,
    /// Absolute exponent of the first differing coefficient.
    pub first_mismatch: Option<Rational>,
}

impl QSeries {
    /// Builds a series from `coeffs` (coefficient `j` multiplies `q^{lead+j}`),
    /// trusted through relative order `trunc`. Missing coefficients up to
    /// `trunc` are zero; extra ones are dropped.
    pub fn new(lead: Rational, mut coeffs: Vec<Rational>, trunc: usize) -> Self {
        coeffs.resize(trunc + 1, Rational::new());
        Self { lead, coeffs, trunc }.normalized()
    }

    pub fn from_integers(lead: Rational, coeffs: &[i64], trunc: usize) -> Self {
        let coeffs = coeffs.iter().take(trunc + 1).map(|&c| Rational::from(c)).collect();
        Self::new(lead, coeffs, trunc)
    }

    /// The zero series, known to vanish through `q^order`.
    pub fn zero(order: Rational) -> Self {
        Self { lead: order, coeffs: Vec::new(), trunc: 0 }
    }

    pub fn constant(c: Rational, trunc: usize) -> Self {
        Self::new(Rational::new(), vec![c], trunc)
    }

    pub fn one(trunc: usize) -> Self {
        Self::constant(Rational::from(1), trunc)
    }

    /// `c · q^exp`, trusted through relative order `trunc`.
    pub fn monomial(c: Rational, exp: Rational, trunc: usize) -> Self {
        Self::new(exp, vec![c], trunc)
    }

    pub fn lead(&self) -> &Rational {
        &self.lead
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest exponent whose coefficient is trusted.
    pub fn order(&self) -> Rational {
        Rational::from(&self.lead + self.trunc as u64)
    }

    /// Coefficient of `q^exp`; `None` when `exp` lies beyond the trusted order.
    pub fn coeff_at(&self, exp: &Rational) -> Option<Rational> {
        if *exp > self.order() {
            return None;
        }
        if self.is_zero() || *exp < self.lead {
            return Some(Rational::new());
        }
        let offset = Rational::from(exp - &self.lead);
        if *offset.denom() != 1 {
            return Some(Rational::new());
        }
        let j = offset.numer().to_usize().expect("offset bounded by trunc");
        Some(self.coeffs[j].clone())
    }

    fn normalized(mut self) -> Self {
        match self.coeffs.iter().position(|c| *c != 0) {
            None => Self::zero(self.order()),
            Some(0) => self,
            Some(i) => {
                self.coeffs.drain(..i);
                self.lead += i as u64;
                self.trunc -= i;
                self
            }
        }
    }

    /// Keeps only coefficients through absolute exponent `order`.
    pub fn truncate_to_order(&self, order: &Rational) -> Self {
        if *order >= self.order() {
            return self.clone();
        }
        if self.is_zero() || *order < self.lead {
            return Self::zero(order.clone());
        }
        let rel = Rational::from(order - &self.lead);
        let trunc = rel.floor().numer().to_usize().expect("non-negative");
        Self::new(self.lead.clone(), self.coeffs[..=trunc].to_vec(), trunc)
    }

    /// Keeps coefficients through relative order `trunc`.
    pub fn truncate(&self, trunc: usize) -> Self {
        if self.is_zero() || trunc >= self.trunc {
            return self.clone();
        }
        Self::new(self.lead.clone(), self.coeffs[..=trunc].to_vec(), trunc)
    }

    pub fn neg(&self) -> Self {
        Self {
            lead: self.lead.clone(),
            coeffs: self.coeffs.iter().map(|c| Rational::from(-c)).collect(),
            trunc: self.trunc,
        }
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if *factor == 0 {
            return Self::zero(self.order());
        }
        Self {
            lead: self.lead.clone(),
            coeffs: self.coeffs.iter().map(|c| Rational::from(c * factor)).collect(),
            trunc: self.trunc,
        }
    }

    /// Multiplies by `q^shift`.
    pub fn shift(&self, shift: &Rational) -> Self {
        let mut out = self.clone();
        out.lead += shift;
        out
    }

    /// The substitution `q ↦ q^k`.
    pub fn substitute_power(&self, k: u32) -> Self {
        assert!(k > 0, "substitution power must be positive");
        let lead = Rational::from(&self.lead * k);
        if self.is_zero() {
            return Self::zero(lead);
        }
        let k = k as usize;
        let trunc = self.trunc * k;
        let mut coeffs = vec![Rational::new(); trunc + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            coeffs[j * k] = c.clone();
        }
        // q^k-series is trusted through (trunc+1)k - 1 in the new variable.
        let trunc = trunc + k - 1;
        Self::new(lead, coeffs, trunc)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let order = self.order().min(other.order());
        if self.is_zero() {
            return Ok(other.truncate_to_order(&order));
        }
        if other.is_zero() {
            return Ok(self.truncate_to_order(&order));
        }
        let diff = Rational::from(&self.lead - &other.lead);
        if *diff.denom() != 1 {
            return Err(QSeriesError::IncompatibleLeads(self.lead.to_string(), other.lead.to_string()));
        }
        let lead = self.lead.clone().min(other.lead.clone());
        if order < lead {
            return Ok(Self::zero(order));
        }
        let trunc = Rational::from(&order - &lead).floor().numer().to_usize().expect("order ≥ lead");
        let mut coeffs = vec![Rational::new(); trunc + 1];
        for s in [self, other] {
            let off = Rational::from(&s.lead - &lead).numer().to_usize().expect("integral offset");
            for (j, c) in s.coeffs.iter().enumerate() {
                if off + j > trunc {
                    break;
                }
                coeffs[off + j] += c;
            }
        }
        Ok(Self::new(lead, coeffs, trunc))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Cauchy product.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(Rational::from(&self.lead + &other.lead));
        }
        let trunc = self.trunc.min(other.trunc);
        let (sparse, dense) = if nonzero_count(&self.coeffs[..=trunc]) <= nonzero_count(&other.coeffs[..=trunc]) {
            (self, other)
        } else {
            (other, self)
        };
        let mut coeffs = vec![Rational::new(); trunc + 1];
        let mut prod = Rational::new();
        for (i, a) in sparse.coeffs[..=trunc].iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in dense.coeffs[..=trunc - i].iter().enumerate() {
                if *b == 0 {
                    continue;
                }
                prod.assign_mul_ref(a, b);
                coeffs[i + j] += &prod;
            }
        }
        Self::new(Rational::from(&self.lead + &other.lead), coeffs, trunc)
    }

    /// Power-series division by a nonzero series.
    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.is_zero() {
            return Err(QSeriesError::DivisionByZero);
        }
        let lead = Rational::from(&self.lead - &other.lead);
        if self.is_zero() {
            return Ok(Self::zero(lead));
        }
        let trunc = self.trunc.min(other.trunc);
        let inv_b0 = Rational::from(other.coeffs[0].recip_ref());
        let divisor: Vec<(usize, &Rational)> =
            other.coeffs[1..=trunc].iter().enumerate().filter(|(_, c)| **c != 0).map(|(i, c)| (i + 1, c)).collect();
        let mut out: Vec<Rational> = Vec::with_capacity(trunc + 1);
        let mut prod = Rational::new();
        for j in 0..=trunc {
            let mut acc = self.coeffs[j].clone();
            for &(i, b) in &divisor {
                if i > j {
                    break;
                }
                prod.assign_mul_ref(b, &out[j - i]);
                acc -= &prod;
            }
            acc *= &inv_b0;
            out.push(acc);
        }
        Ok(Self::new(lead, out, trunc))
    }

    pub fn pow_int(&self, e: i64) -> Result<Self> {
        if e < 0 {
            let pos = self.pow_int(-e)?;
            return Self::one(pos.trunc).div(&pos);
        }
        if e == 0 {
            return Ok(Self::one(self.trunc));
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc.expect("e > 0"))
    }

    /// `q · d/dq`.
    pub fn q_derivative(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| Rational::from(&self.lead + j as u64) * c)
            .collect();
        Self::new(self.lead.clone(), coeffs, self.trunc)
    }

    /// Formal logarithm of a series `1 + O(q)`.
    ///
    /// Uses `j·ℓ_j = j·c_j − Σ_{i<j} i·ℓ_i·c_{j−i}`, which is `q·d/dq` of
    /// `log s` equal to `(q·ds/dq)/s`.
    pub fn log_series(&self) -> Result<Self> {
        if self.is_zero() || self.lead != 0 || self.coeffs[0] != 1 {
            return Err(QSeriesError::LogOutOfDomain {
                lead: self.lead.to_string(),
                constant: self.coeffs.first().map(|c| c.to_string()).unwrap_or_else(|| "0".into()),
            });
        }
        let t = self.trunc;
        let c = &self.coeffs;
        // weighted[i] holds i·ℓ_i
        let mut weighted: Vec<Rational> = vec![Rational::new(); t + 1];
        let mut prod = Rational::new();
        for j in 1..=t {
            let mut acc = Rational::from(&c[j] * j as u64);
            for i in 1..j {
                if weighted[i] == 0 || c[j - i] == 0 {
                    continue;
                }
                prod.assign_mul_ref(&weighted[i], &c[j - i]);
                acc -= &prod;
            }
            weighted[j] = acc;
        }
        let coeffs = weighted.into_iter().enumerate().map(|(j, w)| if j == 0 { w } else { w / j as u64 }).collect();
        Ok(Self::new(Rational::new(), coeffs, t))
    }

    /// Numerical value at a real `q` in `(0,1)` using the trusted coefficients.
    pub fn evaluate(&self, q: &Float) -> Float {
        let prec = q.prec();
        let mut sum = Float::with_val(prec, 0);
        if self.is_zero() {
            return sum;
        }
        for c in self.coeffs.iter().rev() {
            sum *= q;
            sum += Float::with_val(prec, c);
        }
        let lead = Float::with_val(prec, &self.lead);
        let prefactor = Float::with_val(prec, q.ln_ref()) * lead;
        sum * prefactor.exp()
    }

    /// First `n` coefficients rendered as strings.
    pub fn head(&self, n: usize) -> Vec<String> {
        self.coeffs.iter().take(n).map(|c| c.to_string()).collect()
    }
}

fn nonzero_count(c: &[Rational]) -> usize {
    c.iter().filter(|x| **x != 0).count()
}

trait AssignMulRef {
    fn assign_mul_ref(&mut self, a: &Rational, b: &Rational);
}

impl AssignMulRef for Rational {
    fn assign_mul_ref(&mut self, a: &Rational, b: &Rational) {
        use rug::Assign;
        self.assign(a * b);
    }
}

impl fmt::Debug for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "O(q^{})", self.order());
        }
        write!(f, "q^({}) * (", self.lead)?;
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate().take(12) {
            if *c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}q^{j}")?;
        }
        write!(f, " + O(q^{}))", self.trunc + 1)
    }
}

/// Exact comparison through relative order `t` above the smaller lead.
///
/// Errors when either series is not trusted that far.
pub fn series_equal(a: &QSeries, b: &QSeries, t: usize) -> Result<Comparison> {
    let base = match (a.is_zero(), b.is_zero()) {
        (true, true) => {
            return Ok(Comparison { equal: true, first_mismatch: None });
        }
        (true, false) => b.lead.clone(),
        (false, true) => a.lead.clone(),
        (false, false) => a.lead.clone().min(b.lead.clone()),
    };
    let last = Rational::from(&base + t as u64);
    for s in [a, b] {
        if s.order() < last {
            return Err(QSeriesError::BeyondTruncation { requested: last.to_string(), available: s.order().to_string() });
        }
    }
    if a.lead != b.lead {
        return Ok(Comparison { equal: false, first_mismatch: Some(base) });
    }
    for j in 0..=t {
        if a.coeffs[j] != b.coeffs[j] {
            return Ok(Comparison { equal: false, first_mismatch: Some(Rational::from(&base + j as u64)) });
        }
    }
    Ok(Comparison { equal: true, first_mismatch: None })
}

/// Integer helper shared by the eta expansions.
pub(crate) fn integers_to_rationals(v: Vec<Integer>) -> Vec<Rational> {
    v.into_iter().map(Rational::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn ints(s: &QSeries) -> Vec<i64> {
        s.coeffs().iter().map(|c| c.numer().to_i64().unwrap()).collect()
    }

    #[test]
    fn normalization_strips_leading_zeros() {
        let s = QSeries::from_integers(r(1, 24), &[0, 0, 3, 1], 3);
        assert_eq!(*s.lead(), r(49, 24));
        assert_eq!(s.trunc(), 1);
        assert_eq!(ints(&s), vec![3, 1]);
        assert_eq!(s.order(), r(1, 24) + Rational::from(3));
    }

    #[test]
    fn all_zero_becomes_canonical_zero() {
        let s = QSeries::from_integers(Rational::from(2), &[0, 0, 0], 2);
        assert!(s.is_zero());
        assert_eq!(s.order(), Rational::from(4));
    }

    #[test]
    fn mul_by_one_is_identity() {
        let e = eta_series(30);
        assert_eq!(e.mul(&QSeries::one(30)), e);
    }

    #[test]
    fn div_self_is_one() {
        let e = eta_quotient_series(&EtaQuotient::parse("4:2,8:2").unwrap(), 25);
        let one = e.div(&e).unwrap();
        assert_eq!(*one.lead(), 0);
        assert_eq!(one, QSeries::one(25));
    }

    #[test]
    fn div_by_zero_rejected() {
        let z = QSeries::zero(Rational::from(5));
        assert_eq!(QSeries::one(3).div(&z), Err(QSeriesError::DivisionByZero));
    }

    #[test]
    fn pow_24_matches_quotient_path() {
        let t = 40;
        let via_pow = eta_series(t).pow_int(24).unwrap();
        let via_quotient = eta_quotient_series(&EtaQuotient::parse("1:24").unwrap(), t);
        assert_eq!(via_pow, via_quotient);
        // Ramanujan tau: 1, -24, 252, -1472, 4830
        assert_eq!(&ints(&via_pow)[..5], &[1, -24, 252, -1472, 4830]);
        assert_eq!(*via_pow.lead(), 1);
    }

    #[test]
    fn negative_power_inverts() {
        let e = eta_series(20);
        let inv = e.pow_int(-1).unwrap();
        assert_eq!(e.mul(&inv), QSeries::one(20));
        // 1/eta has partition numbers
        assert_eq!(&ints(&inv)[..8], &[1, 1, 2, 3, 5, 7, 11, 15]);
    }

    #[test]
    fn q_derivative_rules() {
        assert!(QSeries::constant(Rational::from(7), 10).q_derivative().is_zero());
        let m = QSeries::monomial(Rational::from(1), r(1, 24), 0);
        let d = m.q_derivative();
        assert_eq!(*d.lead(), r(1, 24));
        assert_eq!(d.coeffs()[0], r(1, 24));
        let e = eta_series(15);
        let ratio = e.q_derivative().div(&e).unwrap();
        assert_eq!(*ratio.lead(), 0);
        assert_eq!(ratio.coeffs()[0], r(1, 24));
    }

    #[test]
    fn log_of_one_is_zero() {
        assert!(QSeries::one(20).log_series().unwrap().is_zero());
    }

    #[test]
    fn log_rejects_bad_input() {
        assert!(matches!(eta_series(5).log_series(), Err(QSeriesError::LogOutOfDomain { .. })));
        let two = QSeries::constant(Rational::from(2), 5);
        assert!(matches!(two.log_series(), Err(QSeriesError::LogOutOfDomain { .. })));
    }

    #[test]
    fn log_of_eta_quotient_oracle() {
        // -Σ_{m,k} (2q^{mk} + q^{4mk} - 3q^{2mk})/k
        let t = 40;
        let mut oracle = vec![Rational::new(); t + 1];
        for m in 1..=t {
            for k in 1..=t {
                for (scale, weight) in [(1usize, 2i64), (4, 1), (2, -3)] {
                    let e = scale * m * k;
                    if e <= t {
                        oracle[e] -= Rational::from((weight, k as i64));
                    }
                }
            }
        }
        let p = eta_quotient_series(&EtaQuotient::parse("1:2,4:1,2:-3").unwrap(), t as usize);
        let log = p.log_series().unwrap();
        let expected = QSeries::new(Rational::new(), oracle, t);
        assert_eq!(log, expected);
        assert_eq!(log.coeff_at(&Rational::from(1)).unwrap(), -2);
    }

    #[test]
    fn log_derivative_property() {
        let s = eta_quotient_series(&EtaQuotient::parse("2:4,8:2,4:-6").unwrap(), 30);
        let lhs = s.log_series().unwrap().q_derivative();
        let rhs = s.q_derivative().div(&s).unwrap();
        assert!(series_equal(&lhs, &rhs, 28).unwrap().equal);
    }

    #[test]
    fn add_respects_orders() {
        let a = QSeries::from_integers(Rational::new(), &[1, 1, 1, 1, 1], 4);
        let b = QSeries::from_integers(Rational::from(1), &[2, 2], 1);
        let c = a.add(&b).unwrap();
        assert_eq!(c.order(), Rational::from(2));
        assert_eq!(ints(&c), vec![1, 3, 3]);
        let d = a.sub(&a).unwrap();
        assert!(d.is_zero());
        assert_eq!(d.order(), Rational::from(4));
    }

    #[test]
    fn add_rejects_fractional_offsets() {
        let a = QSeries::one(3);
        let b = QSeries::monomial(Rational::from(1), r(1, 2), 3);
        assert!(matches!(a.add(&b), Err(QSeriesError::IncompatibleLeads(..))));
    }

    #[test]
    fn series_equal_reports_first_mismatch() {
        let e = eta_series(50);
        assert!(series_equal(&e, &e, 50).unwrap().equal);
        let mut coeffs = e.coeffs().to_vec();
        coeffs[17] += 1;
        let bad = QSeries::new(e.lead().clone(), coeffs, 50);
        let cmp = series_equal(&e, &bad, 50).unwrap();
        assert!(!cmp.equal);
        assert_eq!(cmp.first_mismatch, Some(r(1, 24) + Rational::from(17)));
        assert!(matches!(series_equal(&e, &bad, 51), Err(QSeriesError::BeyondTruncation { .. })));
    }

    #[test]
    fn series_equal_differing_leads() {
        let a = QSeries::one(5);
        let b = QSeries::monomial(Rational::from(1), Rational::from(1), 4);
        let cmp = series_equal(&a, &b, 3).unwrap();
        assert_eq!(cmp.first_mismatch, Some(Rational::new()));
    }

    #[test]
    fn substitute_power_spreads() {
        let e = eta_series(10).substitute_power(4);
        assert_eq!(*e.lead(), r(1, 6));
        assert_eq!(e.trunc(), 43);
        assert_eq!(e.coeff_at(&(r(1, 6) + Rational::from(4))).unwrap(), -1);
        assert_eq!(e.coeff_at(&(r(1, 6) + Rational::from(5))).unwrap(), 0);
    }

    #[test]
    fn evaluate_matches_closed_form() {
        let q = Float::with_val(128, 0.1);
        let geometric = QSeries::from_integers(Rational::new(), &[1; 200], 199);
        let v = geometric.evaluate(&q);
        let expected = Float::with_val(128, 1) / (Float::with_val(128, 1) - &q);
        assert!(Float::with_val(128, v - expected).abs() < 1e-30);
    }
}
