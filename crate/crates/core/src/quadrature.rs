//! Double-exponential quadrature.
//!
//! [`integrate_finite`] uses the tanh-sinh substitution on `(a, b)`;
//! [`integrate_halfline`] maps `(0, ∞)` to the real line with `t = e^v` and
//! applies the trapezoidal rule, which converges double-exponentially when
//! the integrand decays exponentially at both ends of `(0, ∞)`.
//!
//! Both halve the step per level and report the difference between the last
//! two levels as `err_estimate`. That is a heuristic estimate, not a bound.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rug::float::Constant;
use rug::Float;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("empty or reversed interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("integrand is not finite at node {node}")]
    NonFinite { node: f64 },
    #[error("no convergence after {levels} levels (last difference {err_estimate:e})")]
    NotConverged { levels: u32, err_estimate: f64, value: f64 },
    #[error("integrand does not decay towards t = {node}")]
    Divergent { node: f64 },
}

pub type Result<T> = std::result::Result<T, QuadError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Stop once two successive levels differ by less than this.
    pub tol: f64,
    pub max_level: u32,
    /// Working precision in bits.
    pub prec: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_level: 12, prec: 128 }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralResult {
    pub value: Float,
    /// `|I_L − I_{L−1}|` at the final level; an estimate, not a bound.
    pub err_estimate: f64,
    pub levels: u32,
    pub evaluations: usize,
    /// `|I_l − I_{l−1}|` for `l = 1..=levels`.
    pub level_diffs: Vec<f64>,
}

/// Levels below this never stop the refinement.
const MIN_LEVELS: u32 = 3;

/// One tanh-sinh abscissa pair `±s`, stored through its distance to the endpoint.
struct Node {
    /// `1 − tanh(π/2 · sinh s)`, computed without cancellation.
    complement: Float,
    /// `π/2 · cosh s / cosh²(π/2 · sinh s)`.
    weight: Float,
    center: bool,
}

type NodeCache = Mutex<HashMap<(u32, u32), Arc<Vec<Node>>>>;

fn node_cache() -> &'static NodeCache {
    static CACHE: OnceLock<NodeCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes new at `level` (step `2^{−level}`): all `k ≥ 0` at level 0, odd `k` after.
fn tanh_sinh_nodes(prec: u32, level: u32) -> Arc<Vec<Node>> {
    if let Some(nodes) = node_cache().lock().expect("node cache").get(&(prec, level)) {
        return nodes.clone();
    }
    let h = Float::with_val(prec, 0.5f64.powi(level as i32));
    let half_pi = Float::with_val(prec, Constant::Pi) / 2u32;
    // complement below 2^{−2·prec} contributes nothing at this precision
    let cutoff = Float::with_val(prec, Float::i_exp(1, -2 * prec as i32));
    let (start, stride) = if level == 0 { (0u64, 1u64) } else { (1, 2) };
    let mut nodes = Vec::new();
    let mut k = start;
    loop {
        let s = Float::with_val(prec, &h * k);
        let u = Float::with_val(prec, s.sinh_ref()) * &half_pi;
        let cosh_u = Float::with_val(prec, u.cosh_ref());
        let complement = Float::with_val(prec, 1) / (Float::with_val(prec, u.exp_ref()) * &cosh_u);
        if complement < cutoff {
            break;
        }
        let weight = Float::with_val(prec, s.cosh_ref()) * &half_pi / Float::with_val(prec, cosh_u.square_ref());
        nodes.push(Node { complement, weight, center: k == 0 });
        k += stride;
    }
    let nodes = Arc::new(nodes);
    node_cache().lock().expect("node cache").insert((prec, level), nodes.clone());
    nodes
}

fn check_value(v: Float, node: &Float) -> Result<Float> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { node: node.to_f64() })
    }
}

/// `∫_a^b f(x) dx` by tanh-sinh. Integrable endpoint singularities are fine;
/// nodes that round onto an endpoint at working precision are dropped.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<IntegralResult>
where
    F: Fn(&Float) -> Float + Sync,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidInterval { a, b });
    }
    let prec = cfg.prec;
    let a_f = Float::with_val(prec, a);
    let b_f = Float::with_val(prec, b);
    let half = Float::with_val(prec, &b_f - &a_f) / 2u32;
    let mid = Float::with_val(prec, &a_f + &b_f) / 2u32;

    // Σ w·f over the new nodes of one level
    let level_sum = |level: u32| -> Result<(Float, usize)> {
        let nodes = tanh_sinh_nodes(prec, level);
        let parts: Vec<Result<(Float, usize)>> = nodes
            .par_iter()
            .map(|node| {
                if node.center {
                    let v = check_value(f(&mid), &mid)?;
                    return Ok((v * &node.weight, 1));
                }
                let offset = Float::with_val(prec, &half * &node.complement);
                let left = Float::with_val(prec, &a_f + &offset);
                let right = Float::with_val(prec, &b_f - &offset);
                let mut acc = Float::with_val(prec, 0);
                let mut count = 0;
                if left > a_f {
                    acc += check_value(f(&left), &left)?;
                    count += 1;
                }
                if right < b_f {
                    acc += check_value(f(&right), &right)?;
                    count += 1;
                }
                Ok((acc * &node.weight, count))
            })
            .collect();
        let mut sum = Float::with_val(prec, 0);
        let mut evals = 0;
        for p in parts {
            let (v, c) = p?;
            sum += v;
            evals += c;
        }
        Ok((sum, evals))
    };

    refine(cfg, |level| level_sum(level), |sum, level| {
        let h = Float::with_val(prec, 0.5f64.powi(level as i32));
        Float::with_val(prec, sum * &h) * &half
    })
}

/// Shared level loop: `I_l = I_{l−1}/2 + scale(new_sum_l)`.
fn refine<S, T>(cfg: &QuadConfig, mut level_sum: S, scale: T) -> Result<IntegralResult>
where
    S: FnMut(u32) -> Result<(Float, usize)>,
    T: Fn(&Float, u32) -> Float,
{
    let (s0, mut evaluations) = level_sum(0)?;
    let mut estimate = scale(&s0, 0);
    let mut diffs = Vec::new();
    for level in 1..=cfg.max_level {
        let (s, evals) = level_sum(level)?;
        evaluations += evals;
        let next = Float::with_val(cfg.prec, &estimate / 2u32) + scale(&s, level);
        let diff = Float::with_val(cfg.prec, &next - &estimate).abs().to_f64();
        diffs.push(diff);
        estimate = next;
        if level >= MIN_LEVELS && diff < cfg.tol {
            return Ok(IntegralResult { value: estimate, err_estimate: diff, levels: level, evaluations, level_diffs: diffs });
        }
    }
    Err(QuadError::NotConverged {
        levels: cfg.max_level,
        err_estimate: diffs.last().copied().unwrap_or(f64::INFINITY),
        value: estimate.to_f64(),
    })
}

/// Coarsest step in `v = log t`.
const HALFLINE_STEP: f64 = 0.5;
/// The range search always covers `t ∈ [e^{−MIN_REACH}, e^{MIN_REACH}]`.
const MIN_REACH: f64 = 6.0;
/// Giving up on decay beyond `|v| = MAX_REACH`.
const MAX_REACH: f64 = 80.0;
/// Consecutive negligible samples that end the range search.
const QUIET_RUN: usize = 3;

/// `∫_0^∞ f(t) dt` via `t = e^v` and the trapezoidal rule in `v`.
///
/// The integration range in `v` is fixed at the coarsest level by walking
/// outwards until the transformed integrand stays negligible; a walk that
/// reaches `|v| = 80` without decay is reported as divergence.
pub fn integrate_halfline<F>(f: F, cfg: &QuadConfig) -> Result<IntegralResult>
where
    F: Fn(&Float) -> Float + Sync,
{
    let prec = cfg.prec;
    let g = |v: f64| -> Result<Float> {
        let t = Float::with_val(prec, Float::with_val(prec, v).exp_ref());
        let val = check_value(f(&t), &t)?;
        Ok(val * t)
    };
    let negligible = cfg.tol * 1e-5;

    // walk outwards at the coarsest step to fix the range
    let mut coarse_sum = g(0.0)?;
    let mut evaluations = 1;
    let mut reach = [0i64; 2];
    for (dir, slot) in [(1i64, 0usize), (-1, 1)] {
        let mut quiet = 0;
        let mut k = 0i64;
        loop {
            k += 1;
            let v = dir as f64 * k as f64 * HALFLINE_STEP;
            if v.abs() > MAX_REACH {
                return Err(QuadError::Divergent { node: v.exp() });
            }
            let val = g(v)?;
            evaluations += 1;
            let small = val.to_f64().abs() < negligible;
            coarse_sum += val;
            quiet = if small { quiet + 1 } else { 0 };
            if quiet >= QUIET_RUN && v.abs() >= MIN_REACH {
                break;
            }
        }
        reach[slot] = k;
    }
    let (k_hi, k_lo) = (reach[0], reach[1]);

    let level_sum = |level: u32| -> Result<(Float, usize)> {
        if level == 0 {
            return Ok((coarse_sum.clone(), 0));
        }
        let denom = 1i64 << level;
        let lo = -k_lo * denom;
        let hi = k_hi * denom;
        let odd: Vec<i64> = (lo..=hi).filter(|j| j.rem_euclid(2) == 1).collect();
        let parts: Vec<Result<Float>> =
            odd.par_iter().map(|&j| g(j as f64 * HALFLINE_STEP / denom as f64)).collect();
        let mut sum = Float::with_val(prec, 0);
        for p in parts {
            sum += p?;
        }
        Ok((sum, odd.len()))
    };
    let mut result = refine(cfg, level_sum, |sum, level| {
        Float::with_val(prec, sum * HALFLINE_STEP) / Float::with_val(prec, Float::i_exp(1, level as i32))
    })?;
    result.evaluations += evaluations;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(r: &IntegralResult, expected: &Float, tol: f64) -> bool {
        Float::with_val(r.value.prec(), &r.value - expected).abs().to_f64() < tol
    }

    fn pi() -> Float {
        Float::with_val(128, Constant::Pi)
    }

    #[test]
    fn constant_integrand() {
        let r = integrate_finite(|_| Float::with_val(128, 1), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!(close(&r, &Float::with_val(128, 1), 1e-14));
    }

    #[test]
    fn log_singularity() {
        let r = integrate_finite(|x| -Float::with_val(128, x.ln_ref()), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!(close(&r, &Float::with_val(128, 1), 1e-12), "{}", r.value);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let f = |x: &Float| {
            let x4 = Float::with_val(128, x.square_ref()).square();
            Float::with_val(128, x / Float::with_val(128, 1 - x4).sqrt())
        };
        let r = integrate_finite(f, 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!(close(&r, &(pi() / 4u32), 1e-12));
    }

    #[test]
    fn shifted_interval() {
        // ∫_{-1}^{3} x² dx = 28/3
        let r = integrate_finite(|x| Float::with_val(128, x.square_ref()), -1.0, 3.0, &QuadConfig::default()).unwrap();
        assert!(close(&r, &(Float::with_val(128, 28) / 3u32), 1e-12));
    }

    #[test]
    fn rejects_bad_interval() {
        let r = integrate_finite(|x| x.clone(), 1.0, 1.0, &QuadConfig::default());
        assert!(matches!(r, Err(QuadError::InvalidInterval { .. })));
    }

    #[test]
    fn reports_non_finite() {
        let r = integrate_finite(|x| Float::with_val(128, Float::with_val(128, x - 0.5).recip_ref()), 0.0, 1.0, &QuadConfig::default());
        assert!(matches!(r, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn halfline_exponential() {
        // ∫ e^{−t} = 1
        let r = integrate_halfline(|t| Float::with_val(128, (-t.clone()).exp_ref()), &QuadConfig::default()).unwrap();
        assert!(close(&r, &Float::with_val(128, 1), 1e-12));
    }

    #[test]
    fn halfline_scaling() {
        let c = 3.5;
        let f = |t: &Float| Float::with_val(128, (-(t.clone()) - Float::with_val(128, t.recip_ref())).exp_ref());
        let base = integrate_halfline(f, &QuadConfig::default()).unwrap();
        let scaled = integrate_halfline(|t| f(&Float::with_val(128, t * c)), &QuadConfig::default()).unwrap();
        let expected = Float::with_val(128, &base.value / c);
        assert!(close(&scaled, &expected, 1e-12));
    }

    #[test]
    fn halfline_divergence_detected() {
        let r = integrate_halfline(|t| Float::with_val(128, t.recip_ref()), &QuadConfig::default());
        assert!(matches!(r, Err(QuadError::Divergent { .. })));
    }

    #[test]
    fn zero_integrand() {
        let r = integrate_halfline(|_| Float::with_val(128, 0), &QuadConfig::default()).unwrap();
        assert_eq!(r.value, 0);
    }

    #[test]
    fn non_convergence_reported() {
        let cfg = QuadConfig { tol: 1e-30, max_level: 4, prec: 128 };
        let r = integrate_finite(|x| Float::with_val(128, x.sqrt_ref()), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(QuadError::NotConverged { levels: 4, .. })));
    }

    #[test]
    fn nodes_are_cached() {
        let a = tanh_sinh_nodes(96, 2);
        let b = tanh_sinh_nodes(96, 2);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
