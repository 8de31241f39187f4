//! Floating evaluation on the imaginary axis `τ = it` with truncation bounds.
//!
//! Precision follows the argument: every routine works at `t.prec()` bits.
//! Returned bounds cover both series truncation and an allowance for
//! rounding at that precision.

use std::sync::RwLock;

use rug::float::Round;
use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::qseries::{EisensteinLikeSeries, EtaQuotient};

/// Default working precision in bits (about 38 significant digits).
pub const DEFAULT_PREC: u32 = 128;

/// Above this many terms an Eisenstein-like evaluation is reported as unachievable.
pub const MAX_TERMS: usize = 4_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("t must be positive, got {0}")]
    NonPositiveT(f64),
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("accuracy {eps:e} at t = {t} needs more than {limit} terms")]
    Unachievable { t: f64, eps: f64, limit: usize },
    #[error("x(it) = {value} at t = {t} lies outside (0, 1)")]
    OutOfRange { t: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// A value with a bound on `|value − exact|`.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub value: Float,
    pub tail_bound: f64,
    pub terms_used: usize,
}

fn check_inputs(t: &Float, eps: f64) -> Result<()> {
    if !(t.is_finite() && *t > 0) {
        return Err(EvalError::NonPositiveT(t.to_f64()));
    }
    if !(eps > 0.0) {
        return Err(EvalError::NonPositiveEps(eps));
    }
    Ok(())
}

fn unit_roundoff(prec: u32) -> f64 {
    2f64.powi(1 - prec as i32)
}

fn up(x: &Float) -> f64 {
    x.to_f64_round(Round::Up)
}

struct EtaParts {
    value: Float,
    rel_err: f64,
    terms: usize,
}

/// `η(it)` to full working precision, with a relative error bound.
///
/// For `t < 1` uses `η(it) = η(i/t)/√t`.
fn eta_parts(t: &Float) -> EtaParts {
    let prec = t.prec();
    if *t < 1 {
        let inv = Float::with_val(prec, t.recip_ref());
        let mut inner = eta_parts(&inv);
        inner.value /= Float::with_val(prec, t.sqrt_ref());
        inner.rel_err += 4.0 * unit_roundoff(prec);
        return inner;
    }
    let two_pi_t = Float::with_val(prec, rug::float::Constant::Pi) * 2u32 * t;
    let log_q = Float::with_val(prec, -&two_pi_t);
    let q = Float::with_val(prec, log_q.exp_ref());
    let ln_q = log_q.to_f64();
    let ln_one_minus_q = (-q.to_f64()).ln_1p();
    let target = unit_roundoff(prec).ln() - 0.01;

    // Σ (−1)^n q^{n(3n+1)/2} over n = 0, −1, 1, −2, 2, … in increasing exponent.
    let mut sum = Float::with_val(prec, 1);
    let mut terms = 1usize;
    let mut tail = 0.0f64;
    for n in 1u64.. {
        let sign_negative = n % 2 == 1;
        let mut stop = false;
        for p in [n * (3 * n - 1) / 2, n * (3 * n + 1) / 2] {
            // every remaining exponent is ≥ p, so the rest is ≤ q^p / (1 − q)
            let log_rest = p as f64 * ln_q - ln_one_minus_q;
            if log_rest < target {
                tail = log_rest.exp();
                stop = true;
                break;
            }
            let term = Float::with_val(prec, Float::with_val(prec, &log_q * p).exp_ref());
            if sign_negative {
                sum -= term;
            } else {
                sum += term;
            }
            terms += 1;
        }
        if stop {
            break;
        }
    }
    let prefactor = Float::with_val(prec, Float::with_val(prec, &log_q / 24u32).exp_ref());
    // S ≥ 1 − q − q² > 0.99 for t ≥ 1
    let rel_err = tail / 0.99 + (terms as f64 + 8.0) * unit_roundoff(prec);
    EtaParts { value: sum * prefactor, rel_err, terms }
}

/// `η(it)`.
pub fn eta_value(t: &Float, eps: f64) -> Result<EvalResult> {
    check_inputs(t, eps)?;
    let parts = eta_parts(t);
    let bound = up(&Float::with_val(53, parts.value.abs_ref())) * parts.rel_err;
    Ok(EvalResult { value: parts.value, tail_bound: bound, terms_used: parts.terms })
}

/// `∏ η(ikt)^{e_k}` with relative errors propagated through the product.
pub fn eta_quotient_value(eq: &EtaQuotient, t: &Float, eps: f64) -> Result<EvalResult> {
    check_inputs(t, eps)?;
    let prec = t.prec();
    let mut value = Float::with_val(prec, 1);
    let mut log_growth = 0.0f64;
    let mut terms = 0usize;
    for &(k, e) in eq.factors() {
        let kt = Float::with_val(prec, t * k);
        let parts = eta_parts(&kt);
        terms += parts.terms;
        let r = parts.rel_err.min(0.5);
        // (1 ± r)^{±|e|} stays within exp(|e|·r/(1−r))
        log_growth += e.unsigned_abs() as f64 * r / (1.0 - r);
        value *= parts.value.pow(e);
    }
    let rounding = 4.0 * (eq.factors().len() as f64 + 1.0) * unit_roundoff(prec);
    let rho = log_growth.exp_m1() + rounding;
    let magnitude = up(&Float::with_val(53, value.abs_ref()));
    let bound = magnitude * rho / (1.0 - rho).max(0.5);
    Ok(EvalResult { value, tail_bound: bound, terms_used: terms })
}

/// The eta quotient `x = η₂⁴η₈²/η₄⁶`.
pub fn x_quotient() -> EtaQuotient {
    EtaQuotient::new([(2, 4), (8, 2), (4, -6)]).expect("valid quotient")
}

/// `x(it)`; a value whose error interval misses `(0, 1)` is reported as an error.
///
/// Near `t → ∞` the value may round to exactly 1 (`1 − x ≈ 4e^{−4πt}`).
pub fn x_value(t: &Float, eps: f64) -> Result<EvalResult> {
    let r = eta_quotient_value(&x_quotient(), t, eps)?;
    let slack = r.tail_bound + unit_roundoff(t.prec());
    let low = Float::with_val(t.prec(), &r.value + slack);
    let high = Float::with_val(t.prec(), &r.value - slack);
    if !(low > 0 && high < 1) {
        return Err(EvalError::OutOfRange { t: t.to_f64(), value: r.value.to_f64() });
    }
    Ok(r)
}

/// `Σ_{j≥1} j^p r^j` for `p ≥ 1`, via Eulerian numbers.
pub fn polylog_neg(p: u32, r: f64) -> f64 {
    // A(p, m) with A(1, 0) = 1
    let mut row = vec![1.0f64];
    for n in 2..=p as usize {
        let mut next = vec![0.0f64; n];
        for m in 0..n {
            let left = if m < row.len() { (m + 1) as f64 * row[m] } else { 0.0 };
            let right = if m >= 1 && m - 1 < row.len() { (n - m) as f64 * row[m - 1] } else { 0.0 };
            next[m] = left + right;
        }
        row = next;
    }
    let poly: f64 = row.iter().rev().fold(0.0, |acc, a| acc * r + a);
    r * poly / (1.0 - r).powi(p as i32 + 1)
}

/// Evaluates one [`EisensteinLikeSeries`] at many points, caching the
/// coefficients `c_j = Σ_{mn=j} a(m) b(n) n^{k−1}` as it goes.
pub struct EisensteinEvaluator {
    series: EisensteinLikeSeries,
    prec: u32,
    table: RwLock<Vec<Float>>,
}

impl EisensteinEvaluator {
    pub fn new(series: EisensteinLikeSeries, prec: u32) -> Self {
        Self { series, prec, table: RwLock::new(Vec::new()) }
    }

    pub fn series(&self) -> &EisensteinLikeSeries {
        &self.series
    }

    /// Exponent `p = max(k, 1)` in the crude coefficient bound `|c_j| ≤ B_a B_b j^p`.
    fn growth(&self) -> u32 {
        self.series.weight.max(1) as u32
    }

    fn coefficient_bound(&self) -> f64 {
        (self.series.a.bound() * self.series.b.bound()) as f64
    }

    /// Smallest `M` whose tail `B Σ_{j>M} j^p e^{−2πjt}` is below `eps`.
    pub fn terms_needed(&self, t: f64, eps: f64) -> Result<usize> {
        let bound = self.coefficient_bound();
        if bound == 0.0 {
            return Ok(0);
        }
        let p = self.growth() as f64;
        let ln_r = -2.0 * std::f64::consts::PI * t;
        let log_tail = |m: f64| -> Option<f64> {
            let rho = p * ((m + 2.0) / (m + 1.0)).ln() + ln_r;
            if rho >= 0.0 {
                return None;
            }
            Some(bound.ln() + p * (m + 1.0).ln() + (m + 1.0) * ln_r - (-rho.exp_m1()).ln())
        };
        let goal = eps.ln();
        let mut m = ((-goal).max(1.0) / (2.0 * std::f64::consts::PI * t)).floor().max(1.0);
        loop {
            if m > MAX_TERMS as f64 {
                return Err(EvalError::Unachievable { t, eps, limit: MAX_TERMS });
            }
            if let Some(l) = log_tail(m) {
                if l < goal {
                    return Ok(m as usize);
                }
            }
            m = (m * 1.1).ceil();
        }
    }

    /// Upper bound on `|g(it)|` without evaluating the series.
    pub fn magnitude_bound(&self, t: f64) -> f64 {
        let c = self.series.const_term.to_f64().abs();
        let r = (-2.0 * std::f64::consts::PI * t).exp();
        c + self.coefficient_bound() * polylog_neg(self.growth(), r)
    }

    fn ensure_table(&self, m: usize) {
        if self.table.read().expect("table lock").len() > m {
            return;
        }
        let mut table = self.table.write().expect("table lock");
        if table.len() > m {
            return;
        }
        let size = (m + 1).max(2 * table.len()).max(64);
        let prec = self.prec;
        let k1 = self.series.weight - 1;
        let mut c = vec![Float::new(prec); size];
        let powers: Vec<Float> = (0..size)
            .map(|n| if n == 0 { Float::new(prec) } else { Float::with_val(prec, n).pow(k1) })
            .collect();
        let last = size - 1;
        for mm in 1..=last {
            let am = self.series.a.value(mm as u64);
            if am == 0 {
                continue;
            }
            for n in 1..=last / mm {
                let bn = self.series.b.value(n as u64);
                if bn == 0 {
                    continue;
                }
                c[mm * n] += Float::with_val(prec, &powers[n] * (am * bn));
            }
        }
        *table = c;
    }

    /// `g(it)` with `|value − g(it)| ≤ tail_bound`, aiming for `tail_bound < eps`.
    pub fn value(&self, t: &Float, eps: f64) -> Result<EvalResult> {
        check_inputs(t, eps)?;
        let prec = self.prec.max(t.prec());
        let tf = t.to_f64();
        let m = self.terms_needed(tf, eps)?;
        let mut sum = Float::with_val(prec, 0);
        let mut abs_sum = Float::with_val(prec, 0);
        if m > 0 {
            self.ensure_table(m);
            let table = self.table.read().expect("table lock");
            let q = Float::with_val(prec, Float::with_val(prec, Float::with_val(prec, rug::float::Constant::Pi) * -2i32 * t).exp_ref());
            let mut qj = Float::with_val(prec, 1);
            let mut term = Float::new(prec);
            for c in &table[1..=m] {
                qj *= &q;
                if c.is_zero() {
                    continue;
                }
                term.assign_mul(c, &qj);
                sum += &term;
                abs_sum += Float::with_val(prec, term.abs_ref());
            }
        }
        let tail = if m == 0 { 0.0 } else { eps };
        let rounding = up(&abs_sum) * (2.0 * m as f64 + 10.0) * unit_roundoff(prec);
        let value = sum + Float::with_val(prec, &self.series.const_term);
        Ok(EvalResult { value, tail_bound: tail + rounding, terms_used: m })
    }
}

trait AssignMul {
    fn assign_mul(&mut self, a: &Float, b: &Float);
}

impl AssignMul for Float {
    fn assign_mul(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a * b);
    }
}

/// `const + Σ_{mn≤M} a(m) b(n) n^{k−1} e^{−2πmnt}` with `M` chosen from `eps`.
pub fn eisenstein_like_value(g: &EisensteinLikeSeries, t: &Float, eps: f64) -> Result<EvalResult> {
    EisensteinEvaluator::new(g.clone(), t.prec()).value(t, eps)
}

/// `q·d/dq log η(τ)` at `τ = it`: `1/24 − Σ m q^m/(1 − q^m)`.
fn eta_log_derivative(t: &Float) -> Float {
    let prec = t.prec();
    let q = Float::with_val(prec, Float::with_val(prec, Float::with_val(prec, rug::float::Constant::Pi) * -2i32 * t).exp_ref());
    let cutoff = unit_roundoff(prec) * 1e-3;
    let mut sum = Float::with_val(prec, 1) / 24u32;
    let mut qm = Float::with_val(prec, 1);
    for m in 1u32.. {
        qm *= &q;
        let denom = Float::with_val(prec, 1) - &qm;
        let term = Float::with_val(prec, &qm * m) / denom;
        if term.to_f64() < cutoff {
            break;
        }
        sum -= term;
    }
    sum
}

/// Numerical form of the differential identity on the axis.
#[derive(Debug, Clone)]
pub struct DifferentialCheck {
    /// `x · q dx/dq` at `τ = it`.
    pub lhs: f64,
    /// `2 E √(1 − x⁴)` with `E = η₂⁴η₈⁴/η₄⁴`.
    pub rhs_magnitude: f64,
    /// Sign `s` with `x · q dx/dq ≈ s · 2E√(1 − x⁴)`.
    pub sign: i8,
    pub residual: f64,
}

/// Fixes the sign in `x · q dx/dq = ±2E√(1 − x⁴)` by evaluating both sides at `t`.
pub fn differential_sign(t: &Float) -> Result<DifferentialCheck> {
    let prec = t.prec();
    let x = x_value(t, 1e-30)?.value;
    let mut dlog = Float::with_val(prec, 0);
    for &(k, e) in x_quotient().factors() {
        let kt = Float::with_val(prec, t * k);
        dlog += eta_log_derivative(&kt) * (k as i64 * e as i64);
    }
    let lhs = Float::with_val(prec, &x * &x) * dlog;
    let e_quotient = EtaQuotient::new([(2, 4), (8, 4), (4, -4)]).expect("valid quotient");
    let e_val = eta_quotient_value(&e_quotient, t, 1e-30)?.value;
    let one_minus_x4 = Float::with_val(prec, 1) - Float::with_val(prec, (&x).pow(4u32));
    let rhs = e_val * one_minus_x4.sqrt() * 2u32;
    let sign: i8 = if lhs.is_sign_negative() { -1 } else { 1 };
    let residual = Float::with_val(prec, &lhs - Float::with_val(prec, &rhs * sign as i32)).abs().to_f64();
    Ok(DifferentialCheck { lhs: lhs.to_f64(), rhs_magnitude: rhs.to_f64(), sign, residual })
}
