//! L-values of products of Eisenstein-like series and the change of
//! variables that swaps their sequences.
//!
//! For `f(τ) = g₁(τ)·g₂(τ)` with `g₁` of weight `k1` at `τ = it` and `g₂` of
//! weight `k2` at `τ = i/(Nt)`, the product route computes
//!
//! ```text
//! P · ∫₀^∞ g₁(it) g₂(i/(Nt)) t^{k0−k2−1} dt,   P = (−1)^{k0−1} (2π)^{k0} / ((k0−1)! N^{k2/2})
//! ```
//!
//! Substituting `t = n₂u/n₁` termwise turns the integrand into
//! `g'(iu) g''(i/(Nu)) u^{k0−k2−1}` where `g'` has sequences `(a₁, b₂)` and
//! weight `k0` and `g''` has `(a₂, b₁)` and weight `k1+k2−k0`.
//!
//! L-values follow `L(f, s) = Σ aₙ n^{−s}`; comparisons between routes are
//! made on magnitudes with the relative signs reported alongside.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::float::Constant;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modular_eval::{eta_quotient_value, x_value, EisensteinEvaluator, EvalError};
use crate::quadrature::{integrate_finite, integrate_halfline, IntegralResult, QuadConfig, QuadError};
use crate::qseries::{eta_quotient_integer_coeffs, ArithmeticSequence, EisensteinLikeSeries, EtaQuotient, QSeries, QSeriesError};

/// `L(E₃₂, 2)`, the period integral evaluated independently at 40 digits.
pub const L_E32_2: &str = "0.917050635318654988640921616479";

/// Dirichlet terms used by the `dirichlet` route of the E32 preset.
pub const E32_DIRICHLET_TERMS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("invalid transform spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Series(#[from] QSeriesError),
    #[error("dirichlet series: {0}")]
    Dirichlet(String),
    #[error("unknown route `{0}` (expected dirichlet, product, transformed, intermediate, period or all)")]
    UnknownRoute(String),
}

pub type Result<T> = std::result::Result<T, TransformError>;

/// `sign · √radicand`, an exact real scale factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surd {
    pub sign: i8,
    pub radicand: Rational,
}

impl Surd {
    pub fn one() -> Self {
        Self { sign: 1, radicand: Rational::from(1) }
    }

    pub fn sqrt(sign: i8, radicand: impl Into<Rational>) -> Self {
        Self { sign, radicand: radicand.into() }
    }

    pub fn value(&self, prec: u32) -> Float {
        let r = Float::with_val(prec, &self.radicand).sqrt();
        if self.sign < 0 {
            -r
        } else {
            r
        }
    }

    /// Parses `1`, `-2/3`, `sqrt(8)`, `-sqrt(1/2)`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let t = text.trim();
        let (sign, body) = match t.strip_prefix('-') {
            Some(rest) => (-1, rest.trim()),
            None => (1, t.strip_prefix('+').unwrap_or(t).trim()),
        };
        let rational = |s: &str| s.trim().parse::<Rational>().map_err(|_| format!("bad scale `{text}`"));
        if let Some(inner) = body.strip_prefix("sqrt(").and_then(|s| s.strip_suffix(')')) {
            let r = rational(inner)?;
            if r < 0 {
                return Err(format!("negative radicand in `{text}`"));
            }
            return Ok(Self { sign, radicand: r });
        }
        let r = rational(body)?;
        let sign = if r < 0 { -sign } else { sign };
        Ok(Self { sign, radicand: Rational::from(r.abs_ref()).square() })
    }
}

impl Default for Surd {
    fn default() -> Self {
        Self::one()
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign < 0 { "-" } else { "" };
        write!(f, "{sign}sqrt({})", self.radicand)
    }
}

impl Serialize for Surd {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Surd {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Surd::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// The data of one transformation: `g₁ = (a1, b1; k1)`, `g₂ = g2_scale · (a2, b2; k2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub k1: i64,
    pub k2: i64,
    pub k0: i64,
    #[serde(rename = "N")]
    pub n: u32,
    pub a1: ArithmeticSequence,
    pub b1: ArithmeticSequence,
    pub a2: ArithmeticSequence,
    pub b2: ArithmeticSequence,
    /// Normalization of `g₂`; `-sqrt(8)` for the E32 preset.
    #[serde(default)]
    pub g2_scale: Surd,
}

impl TransformSpec {
    /// The conductor-32 example: `f₃₂ = η₄²η₈² = g₁ · g₂` at `k0 = 2`.
    pub fn e32() -> Self {
        Self {
            k1: 1,
            k2: 1,
            k0: 2,
            n: 32,
            a1: ArithmeticSequence::char_minus4(),
            b1: ArithmeticSequence::odd_indicator(),
            a2: ArithmeticSequence::odd_indicator(),
            b2: ArithmeticSequence::char_minus4(),
            g2_scale: Surd::sqrt(-1, 8),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "E32" => Ok(Self::e32()),
            _ => Err(TransformError::InvalidSpec(format!("unknown preset `{name}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 < 1 || self.k2 < 1 || self.k0 < 1 {
            return Err(TransformError::InvalidSpec(format!(
                "weights must be positive (k1 = {}, k2 = {}, k0 = {})",
                self.k1, self.k2, self.k0
            )));
        }
        if self.n == 0 {
            return Err(TransformError::InvalidSpec("N must be positive".into()));
        }
        Ok(())
    }

    pub fn g1(&self) -> EisensteinLikeSeries {
        EisensteinLikeSeries::new(self.k1, self.a1.clone(), self.b1.clone())
    }

    pub fn g2(&self) -> EisensteinLikeSeries {
        EisensteinLikeSeries::new(self.k2, self.a2.clone(), self.b2.clone())
    }

    /// `(a₁, b₂)` at weight `k0`.
    pub fn swapped_first(&self) -> EisensteinLikeSeries {
        EisensteinLikeSeries::new(self.k0, self.a1.clone(), self.b2.clone())
    }

    /// `(a₂, b₁)` at weight `k1 + k2 − k0`, possibly `≤ 0`.
    pub fn swapped_second(&self) -> EisensteinLikeSeries {
        EisensteinLikeSeries::new(self.k1 + self.k2 - self.k0, self.a2.clone(), self.b1.clone())
    }

    /// Power of `t` in the integrand, `k0 − k2 − 1`.
    pub fn integrand_exponent(&self) -> i64 {
        self.k0 - self.k2 - 1
    }

    pub fn prefactor(&self) -> Prefactor {
        Prefactor {
            sign: if (self.k0 - 1) % 2 == 0 { 1 } else { -1 },
            two_pi_power: self.k0 as u32,
            factorial_of: (self.k0 - 1) as u32,
            n: self.n,
            n_half_power: self.k2 as u32,
        }
    }
}

/// `sign · (2π)^{two_pi_power} / (factorial_of! · N^{n_half_power/2})`, kept exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefactor {
    pub sign: i8,
    pub two_pi_power: u32,
    pub factorial_of: u32,
    pub n: u32,
    pub n_half_power: u32,
}

impl Prefactor {
    pub fn value(&self, prec: u32) -> Float {
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        let num = Float::with_val(prec, rug::ops::Pow::pow(&two_pi, self.two_pi_power));
        let fact = Float::with_val(prec, rug::Integer::from(rug::Integer::factorial(self.factorial_of)));
        let n_pow = Float::with_val(prec, self.n).sqrt();
        let n_pow = Float::with_val(prec, rug::ops::Pow::pow(&n_pow, self.n_half_power));
        let v = num / fact / n_pow;
        if self.sign < 0 {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for Prefactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign < 0 { "-" } else { "+" };
        write!(
            f,
            "{sign}(2pi)^{} / ({}! * {}^({}/2))",
            self.two_pi_power, self.factorial_of, self.n, self.n_half_power
        )
    }
}

/// Integrand contributions below `tol · NEGLIGIBLE` are skipped without evaluation.
const NEGLIGIBLE: f64 = 1e-9;
/// Smallest per-factor accuracy requested from the series evaluator.
const EPS_FLOOR: f64 = 1e-34;

/// Keeps the first evaluation error seen inside a parallel integrand.
struct ErrorSlot(Mutex<Option<EvalError>>);

impl ErrorSlot {
    fn new() -> Self {
        Self(Mutex::new(None))
    }

    fn nan(&self, e: EvalError, prec: u32) -> Float {
        let mut slot = self.0.lock().expect("error slot");
        slot.get_or_insert(e);
        Float::with_val(prec, f64::NAN)
    }

    fn resolve(&self, r: std::result::Result<IntegralResult, QuadError>) -> Result<IntegralResult> {
        match (r, self.0.lock().expect("error slot").take()) {
            (Ok(v), _) => Ok(v),
            (Err(QuadError::NonFinite { .. }), Some(e)) => Err(e.into()),
            (Err(e), _) => Err(e.into()),
        }
    }
}

/// `∫₀^∞ first(it) · second(i/(Nt)) · t^{p} dt`.
fn mellin_pair(
    first: &EisensteinLikeSeries,
    second: &EisensteinLikeSeries,
    n: u32,
    p: i64,
    cfg: &QuadConfig,
) -> Result<IntegralResult> {
    let prec = cfg.prec;
    let f1 = EisensteinEvaluator::new(first.clone(), prec);
    let f2 = EisensteinEvaluator::new(second.clone(), prec);
    let errors = ErrorSlot::new();
    let target = cfg.tol * NEGLIGIBLE;
    let integrand = |t: &Float| -> Float {
        let tf = t.to_f64();
        let y = Float::with_val(prec, Float::with_val(prec, t * n).recip_ref());
        let yf = y.to_f64();
        // the quadrature weights by t, so compare |f·t|
        let jac = tf.powi(p as i32 + 1);
        let b1 = f1.magnitude_bound(tf);
        let b2 = f2.magnitude_bound(yf);
        let size = b1 * b2 * jac;
        if size.is_finite() && size < target {
            return Float::with_val(prec, 0);
        }
        let eps1 = (target / (b2 * jac).max(1e-300)).clamp(EPS_FLOOR, 1.0);
        let eps2 = (target / (b1 * jac).max(1e-300)).clamp(EPS_FLOOR, 1.0);
        let v1 = match f1.value(t, eps1) {
            Ok(v) => v.value,
            Err(e) => return errors.nan(e, prec),
        };
        let v2 = match f2.value(&y, eps2) {
            Ok(v) => v.value,
            Err(e) => return errors.nan(e, prec),
        };
        let tp = Float::with_val(prec, rug::ops::Pow::pow(t, p as i32));
        v1 * v2 * tp
    };
    errors.resolve(integrate_halfline(integrand, cfg))
}

/// One route's value with its accuracy metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RouteValue {
    pub route: Route,
    pub value: f64,
    /// The value to about 30 significant digits.
    pub digits: String,
    pub accuracy: Accuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Accuracy {
    /// Level difference of the quadrature (an estimate, not a bound).
    ErrEstimate { value: f64, levels: u32, evaluations: usize },
    /// Scale of the Dirichlet tail, `M^{3/2 − k0}` (commentary, not a bound).
    TailScale { value: f64, terms: usize },
}

impl RouteValue {
    fn from_integral(route: Route, r: &IntegralResult, factor: &Float) -> Self {
        let v = Float::with_val(r.value.prec(), &r.value * factor);
        let factor_abs = factor.to_f64().abs();
        Self {
            route,
            value: v.to_f64(),
            digits: format!("{v:.30}"),
            accuracy: Accuracy::ErrEstimate {
                value: r.err_estimate * factor_abs,
                levels: r.levels,
                evaluations: r.evaluations,
            },
        }
    }

    /// The error figure carried by the accuracy metadata.
    pub fn error_figure(&self) -> f64 {
        match self.accuracy {
            Accuracy::ErrEstimate { value, .. } | Accuracy::TailScale { value, .. } => value,
        }
    }
}

/// `P · s₂ · ∫₀^∞ g₁(it) g₂(i/(Nt)) t^{k0−k2−1} dt`.
pub fn lvalue_product_route(spec: &TransformSpec, cfg: &QuadConfig) -> Result<RouteValue> {
    spec.validate()?;
    let r = mellin_pair(&spec.g1(), &spec.g2(), spec.n, spec.integrand_exponent(), cfg)?;
    Ok(RouteValue::from_integral(Route::Product, &r, &scale_factor(spec, cfg.prec)))
}

/// The product route after `t → 1/(Nt)`:
/// `∫₀^∞ g₂(it) g₁(i/(Nt)) (Nt)^{−(k0−k2−1)} dt/(Nt²)`.
pub fn lvalue_product_route_reparametrized(spec: &TransformSpec, cfg: &QuadConfig) -> Result<RouteValue> {
    spec.validate()?;
    let p = spec.integrand_exponent();
    let r = mellin_pair(&spec.g2(), &spec.g1(), spec.n, -p - 2, cfg)?;
    let n_pow = Float::with_val(cfg.prec, rug::ops::Pow::pow(Float::with_val(cfg.prec, spec.n), (-p - 1) as i32));
    let factor = scale_factor(spec, cfg.prec) * n_pow;
    Ok(RouteValue::from_integral(Route::Product, &r, &factor))
}

/// `P · s₂ · ∫₀^∞ g'(iu) g''(i/(Nu)) u^{k0−k2−1} du` with the sequences swapped.
pub fn lvalue_transformed_route(spec: &TransformSpec, cfg: &QuadConfig) -> Result<RouteValue> {
    spec.validate()?;
    let r = mellin_pair(&spec.swapped_first(), &spec.swapped_second(), spec.n, spec.integrand_exponent(), cfg)?;
    Ok(RouteValue::from_integral(Route::Transformed, &r, &scale_factor(spec, cfg.prec)))
}

fn scale_factor(spec: &TransformSpec, prec: u32) -> Float {
    spec.prefactor().value(prec) * spec.g2_scale.value(prec)
}

/// `Σ_{n≤M} aₙ n^{−k0}` for a q-series `Σ aₙ qⁿ` of the given weight.
///
/// Requires an integral lead `≥ 1` and `k0 > weight/2`.
pub fn lvalue_dirichlet(f: &QSeries, weight: i64, k0: i64, m: usize) -> Result<RouteValue> {
    check_dirichlet_args(weight, k0)?;
    let lead = f.lead();
    if *lead.denom() != 1 || *lead < 1 {
        return Err(TransformError::Dirichlet(format!("lead must be a positive integer, got {lead}")));
    }
    if f.order() < m as u64 {
        return Err(QSeriesError::BeyondTruncation { requested: m.to_string(), available: f.order().to_string() }.into());
    }
    let start = lead.numer().to_usize().expect("small lead");
    let terms = (start..=m).map(|n| (n, f.coeff_at(&Rational::from(n as u64)).expect("within order").to_f64()));
    Ok(dirichlet_sum(terms, k0, m))
}

/// The Dirichlet route for `f₃₂ = η₄²η₈²` using machine-integer coefficients.
pub fn lvalue_dirichlet_f32(m: usize) -> Result<RouteValue> {
    let eq = EtaQuotient::parse("4:2,8:2").expect("f32 quotient");
    let coeffs = eta_quotient_integer_coeffs(&eq, m.saturating_sub(1))?;
    // lead 1: coefficient j belongs to q^{j+1}
    let terms = coeffs.iter().enumerate().map(|(j, &c)| (j + 1, c as f64));
    Ok(dirichlet_sum(terms, 2, m))
}

fn check_dirichlet_args(weight: i64, k0: i64) -> Result<()> {
    if 2 * k0 <= weight {
        return Err(TransformError::Dirichlet(format!("k0 = {k0} is too small for weight {weight}")));
    }
    Ok(())
}

fn dirichlet_sum(terms: impl Iterator<Item = (usize, f64)>, k0: i64, m: usize) -> RouteValue {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (n, a) in terms {
        if a == 0.0 {
            continue;
        }
        // Kahan summation
        let y = a / (n as f64).powi(k0 as i32) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    RouteValue {
        route: Route::Dirichlet,
        value: sum,
        digits: format!("{sum:.17e}"),
        accuracy: Accuracy::TailScale { value: (m as f64).powf(1.5 - k0 as f64), terms: m },
    }
}

/// `(π/8) ∫₀¹ x/√(1−x⁴) · log((1+x)/(1−x)) dx`.
pub fn period_route(cfg: &QuadConfig) -> Result<RouteValue> {
    let prec = cfg.prec;
    let f = |x: &Float| {
        let x2 = Float::with_val(prec, x.square_ref());
        let root = Float::with_val(prec, 1 - Float::with_val(prec, x2.square_ref())).sqrt();
        let ratio = Float::with_val(prec, 1 + x) / Float::with_val(prec, 1 - x);
        Float::with_val(prec, x / root) * ratio.ln()
    };
    let r = integrate_finite(f, 0.0, 1.0, cfg)?;
    let factor = Float::with_val(prec, Constant::Pi) / 8u32;
    Ok(RouteValue::from_integral(Route::Period, &r, &factor))
}

/// `E = η₂⁴η₈⁴/η₄⁴`.
fn weight_two_quotient() -> EtaQuotient {
    EtaQuotient::parse("2:4,8:4,4:-4").expect("valid quotient")
}

/// `√2 η₈η₃₂²/η₁₆³` enters through its logarithm.
fn log_factor_quotient() -> EtaQuotient {
    EtaQuotient::parse("8:1,32:2,16:-3").expect("valid quotient")
}

/// `log(√2 η₈η₃₂²/η₁₆³)(iu)`: as `−atanh(x)` for `u < 1`, directly above.
fn log_factor(u: &Float, eps: f64) -> std::result::Result<Float, EvalError> {
    let prec = u.prec();
    if *u < 1 {
        let x = x_value(u, eps)?.value;
        return Ok(-x.atanh());
    }
    let r = eta_quotient_value(&log_factor_quotient(), u, eps)?.value;
    Ok(r.ln() + Float::with_val(prec, 2).sqrt().ln())
}

/// `π² ∫₀^∞ E(iu) · log(√2 η₈η₃₂²/η₁₆³)(iu) du`.
pub fn intermediate_route_e32(cfg: &QuadConfig) -> Result<RouteValue> {
    let prec = cfg.prec;
    let eps = cfg.tol * NEGLIGIBLE;
    let errors = ErrorSlot::new();
    let e_quotient = weight_two_quotient();
    let integrand = |u: &Float| -> Float {
        let e = match eta_quotient_value(&e_quotient, u, eps) {
            Ok(v) => v.value,
            Err(err) => return errors.nan(err, prec),
        };
        match log_factor(u, eps) {
            Ok(l) => e * l,
            Err(err) => errors.nan(err, prec),
        }
    };
    let r = errors.resolve(integrate_halfline(integrand, cfg))?;
    let pi = Float::with_val(prec, Constant::Pi);
    let factor = Float::with_val(prec, pi.square_ref());
    Ok(RouteValue::from_integral(Route::Intermediate, &r, &factor))
}

/// The integrand of [`intermediate_route_e32`] without the `π²`.
pub fn intermediate_integrand(u: &Float, eps: f64) -> Result<Float> {
    let e = eta_quotient_value(&weight_two_quotient(), u, eps)?.value;
    Ok(e * log_factor(u, eps)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Dirichlet,
    Product,
    Transformed,
    Intermediate,
    Period,
}

impl Route {
    pub const ALL: [Route; 5] = [Route::Dirichlet, Route::Product, Route::Transformed, Route::Intermediate, Route::Period];

    pub fn name(self) -> &'static str {
        match self {
            Route::Dirichlet => "dirichlet",
            Route::Product => "product",
            Route::Transformed => "transformed",
            Route::Intermediate => "intermediate",
            Route::Period => "period",
        }
    }

    /// Parses a route name; `all` gives every route.
    pub fn parse_list(text: &str) -> Result<Vec<Route>> {
        if text == "all" {
            return Ok(Route::ALL.to_vec());
        }
        Ok(vec![text.parse()?])
    }
}

impl FromStr for Route {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self> {
        Route::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| TransformError::UnknownRoute(s.to_string()))
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs one route of the E32 example.
pub fn e32_route(route: Route, cfg: &QuadConfig) -> Result<RouteValue> {
    let spec = TransformSpec::e32();
    match route {
        Route::Dirichlet => lvalue_dirichlet_f32(E32_DIRICHLET_TERMS),
        Route::Product => lvalue_product_route(&spec, cfg),
        Route::Transformed => lvalue_transformed_route(&spec, cfg),
        Route::Intermediate => intermediate_route_e32(cfg),
        Route::Period => period_route(cfg),
    }
}

/// Magnitude comparison of two routes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairComparison {
    pub first: Route,
    pub second: Route,
    /// `||a| − |b||`.
    pub abs_diff: f64,
    /// `sign(a)·sign(b)`.
    pub relative_sign: i8,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoutesReport {
    pub tol: f64,
    pub values: Vec<RouteValue>,
    pub comparisons: Vec<PairComparison>,
}

impl RoutesReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(|c| c.passed)
    }
}

/// Agreement required between analytic routes.
pub const ROUTE_AGREEMENT: f64 = 1e-8;
/// Agreement required between the Dirichlet partial sum and any analytic route.
pub const DIRICHLET_AGREEMENT: f64 = 5e-3;

/// Runs the requested E32 routes concurrently and compares every pair by magnitude.
pub fn e32_routes(routes: &[Route], cfg: &QuadConfig) -> Result<RoutesReport> {
    let values: Vec<RouteValue> = routes.par_iter().map(|&r| e32_route(r, cfg)).collect::<Result<_>>()?;
    let mut comparisons = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let (a, b) = (&values[i], &values[j]);
            let threshold = if a.route == Route::Dirichlet || b.route == Route::Dirichlet {
                DIRICHLET_AGREEMENT
            } else {
                ROUTE_AGREEMENT
            };
            let abs_diff = (a.value.abs() - b.value.abs()).abs();
            comparisons.push(PairComparison {
                first: a.route,
                second: b.route,
                abs_diff,
                relative_sign: (a.value.signum() * b.value.signum()) as i8,
                threshold,
                passed: abs_diff < threshold,
            });
        }
    }
    Ok(RoutesReport { tol: cfg.tol, values, comparisons })
}

/// Both sides of the change of variables for one spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformReport {
    pub spec: TransformSpec,
    pub prefactor: Prefactor,
    pub prefactor_display: String,
    pub integrand_exponent: i64,
    pub lhs: RouteValue,
    pub rhs: RouteValue,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Product route against transformed route, computed concurrently.
pub fn transform_check(spec: &TransformSpec, cfg: &QuadConfig, threshold: f64) -> Result<TransformReport> {
    let (lhs, rhs) = rayon::join(|| lvalue_product_route(spec, cfg), || lvalue_transformed_route(spec, cfg));
    let (lhs, rhs) = (lhs?, rhs?);
    let abs_diff = (lhs.value - rhs.value).abs();
    let scale = lhs.value.abs().max(rhs.value.abs());
    let rel_diff = if scale > 0.0 { abs_diff / scale } else { 0.0 };
    let prefactor = spec.prefactor();
    Ok(TransformReport {
        spec: spec.clone(),
        prefactor_display: prefactor.to_string(),
        prefactor,
        integrand_exponent: spec.integrand_exponent(),
        lhs,
        rhs,
        abs_diff,
        rel_diff,
        threshold,
        passed: abs_diff < threshold,
    })
}

/// Largest period of a random table.
const MAX_RANDOM_PERIOD: usize = 6;

fn random_sequence(rng: &mut impl Rng) -> ArithmeticSequence {
    let period = rng.gen_range(1..=MAX_RANDOM_PERIOD);
    loop {
        let values: Vec<i64> = (0..period).map(|_| rng.gen_range(-1..=1)).collect();
        if values.iter().any(|&v| v != 0) {
            return ArithmeticSequence::periodic(values).expect("nonempty table");
        }
    }
}

/// A spec with `k1 = k2 = 1`, `k0 ∈ {1, 2}`, `N ∈ {4, 16, 32}` and four random periodic tables.
pub fn random_spec(rng: &mut impl Rng) -> TransformSpec {
    let k0 = rng.gen_range(1..=2);
    let n = [4, 16, 32][rng.gen_range(0..3)];
    TransformSpec {
        k1: 1,
        k2: 1,
        k0,
        n,
        a1: random_sequence(rng),
        b1: random_sequence(rng),
        a2: random_sequence(rng),
        b2: random_sequence(rng),
        g2_scale: Surd::one(),
    }
}

/// `count` random specs from a ChaCha stream seeded with `seed`.
pub fn random_specs(seed: u64, count: usize) -> Vec<TransformSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_spec(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tol: f64) -> QuadConfig {
        QuadConfig::with_tol(tol)
    }

    fn reference() -> f64 {
        L_E32_2.parse().unwrap()
    }

    #[test]
    fn prefactor_audit() {
        let p = TransformSpec::e32().prefactor();
        assert_eq!(p.sign, -1);
        assert_eq!(p.to_string(), "-(2pi)^2 / (1! * 32^(1/2))");
        let expected = -(2.0 * std::f64::consts::PI).powi(2) / 32f64.sqrt();
        assert!((p.value(128).to_f64() - expected).abs() < 1e-14);
    }

    #[test]
    fn surd_parsing() {
        assert_eq!(Surd::parse("-sqrt(8)").unwrap(), Surd::sqrt(-1, 8));
        assert_eq!(Surd::parse("1").unwrap(), Surd::one());
        assert_eq!(Surd::parse("-2/3").unwrap(), Surd::sqrt(-1, Rational::from((4, 9))));
        assert!(Surd::parse("sqrt(-1)").is_err());
        assert!(Surd::parse("two").is_err());
    }

    #[test]
    fn period_matches_reference() {
        let r = period_route(&cfg(1e-12)).unwrap();
        assert!(r.value > 0.0);
        assert!((r.value - reference()).abs() < 1e-12, "{}", r.digits);
    }

    #[test]
    fn period_integrand_vanishes_at_zero() {
        let cfg = QuadConfig::default();
        let drop_log = integrate_finite(
            |x: &Float| Float::with_val(128, x / Float::with_val(128, 1 - Float::with_val(128, x.square_ref()).square()).sqrt()),
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert!((drop_log.value.to_f64() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn product_route_e32() {
        let r = lvalue_product_route(&TransformSpec::e32(), &cfg(1e-10)).unwrap();
        assert!((r.value - reference()).abs() < 1e-9, "{}", r.digits);
    }

    #[test]
    fn transformed_equals_product_e32() {
        let spec = TransformSpec::e32();
        let report = transform_check(&spec, &cfg(1e-10), 1e-8).unwrap();
        assert!(report.passed, "{} vs {}", report.lhs.digits, report.rhs.digits);
    }

    #[test]
    fn reparametrized_product_agrees() {
        let spec = TransformSpec::e32();
        let a = lvalue_product_route(&spec, &cfg(1e-10)).unwrap();
        let b = lvalue_product_route_reparametrized(&spec, &cfg(1e-10)).unwrap();
        assert!((a.value - b.value).abs() < 2e-10);
    }

    #[test]
    fn intermediate_is_negative_l() {
        let r = intermediate_route_e32(&cfg(1e-10)).unwrap();
        assert!((r.value + reference()).abs() < 1e-9, "{}", r.digits);
    }

    #[test]
    fn intermediate_integrand_decays() {
        let u = Float::with_val(128, 10);
        let v = intermediate_integrand(&u, 1e-30).unwrap().to_f64();
        // E = q + O(q²) and the log factor is log(√2 q) + O(q), so the integrand ~ q log(√2 q)
        let log_q = -2.0 * std::f64::consts::PI * 10.0;
        let leading = log_q.exp() * (log_q + 0.5 * 2f64.ln());
        assert!((v / leading - 1.0).abs() < 1e-6, "{v} vs {leading}");
    }

    #[test]
    fn zero_sequence_gives_zero() {
        let mut spec = TransformSpec::e32();
        spec.a1 = ArithmeticSequence::periodic(vec![0]).unwrap();
        let r = lvalue_product_route(&spec, &cfg(1e-10)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn dirichlet_first_term_and_tail() {
        let one = lvalue_dirichlet_f32(1).unwrap();
        assert_eq!(one.value, 1.0);
        let a = lvalue_dirichlet_f32(100_000).unwrap();
        let b = lvalue_dirichlet_f32(1_000_000).unwrap();
        assert!((a.value - b.value).abs() < 10.0 * 1e5f64.powf(-0.5));
        assert!((b.value - reference()).abs() < 5e-3);
    }

    #[test]
    fn dirichlet_from_series_matches_integer_path() {
        let f = crate::qseries::eta_quotient_series(&EtaQuotient::parse("4:2,8:2").unwrap(), 400);
        let a = lvalue_dirichlet(&f, 2, 2, 400).unwrap();
        let b = lvalue_dirichlet_f32(400).unwrap();
        assert!((a.value - b.value).abs() < 1e-15);
        assert!(lvalue_dirichlet(&f, 2, 1, 400).is_err());
        assert!(lvalue_dirichlet(&f, 2, 2, 1000).is_err());
    }

    #[test]
    fn k0_one_on_e32_sequences() {
        let mut spec = TransformSpec::e32();
        spec.k0 = 1;
        let report = transform_check(&spec, &cfg(1e-10), 1e-8).unwrap();
        assert!(report.passed, "{} vs {}", report.lhs.digits, report.rhs.digits);
    }

    #[test]
    fn random_specs_are_seeded_and_valid() {
        let a = random_specs(7, 10);
        assert_eq!(a, random_specs(7, 10));
        for s in &a {
            s.validate().unwrap();
            assert!([4, 16, 32].contains(&s.n));
            for seq in [&s.a1, &s.b1, &s.a2, &s.b2] {
                assert!(seq.period() <= 6 && !seq.is_zero());
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = TransformSpec::e32();
        spec.n = 0;
        assert!(matches!(lvalue_product_route(&spec, &cfg(1e-8)), Err(TransformError::InvalidSpec(_))));
        assert!(TransformSpec::preset("E11").is_err());
        assert!("bogus".parse::<Route>().is_err());
    }
}
