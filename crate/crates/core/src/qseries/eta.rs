use std::fmt;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::{integers_to_rationals, QSeries, QSeriesError, Result};

/// Formal product `∏ η(kτ)^{e_k}` with distinct, sorted scales.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EtaQuotient {
    factors: Vec<(u32, i32)>,
}

impl EtaQuotient {
    /// Collects `(scale, exponent)` pairs; repeated scales are merged and
    /// factors whose exponent cancels to zero are dropped.
    pub fn new(factors: impl IntoIterator<Item = (u32, i32)>) -> Result<Self> {
        let mut merged: Vec<(u32, i32)> = Vec::new();
        for (k, e) in factors {
            if k == 0 {
                return Err(QSeriesError::InvalidEtaQuotient("scale must be positive".into()));
            }
            match merged.iter_mut().find(|(s, _)| *s == k) {
                Some((_, acc)) => *acc += e,
                None => merged.push((k, e)),
            }
        }
        merged.retain(|&(_, e)| e != 0);
        merged.sort_unstable();
        Ok(Self { factors: merged })
    }

    /// Parses `"k:e,k:e,..."`, e.g. `"4:2,8:2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut factors = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, e) = part
                .split_once(':')
                .ok_or_else(|| QSeriesError::InvalidEtaQuotient(format!("expected k:e, got `{part}`")))?;
            let k: u32 = k.trim().parse().map_err(|_| QSeriesError::InvalidEtaQuotient(format!("bad scale `{k}`")))?;
            let e: i32 =
                e.trim().parse().map_err(|_| QSeriesError::InvalidEtaQuotient(format!("bad exponent `{e}`")))?;
            factors.push((k, e));
        }
        Self::new(factors)
    }

    pub fn factors(&self) -> &[(u32, i32)] {
        &self.factors
    }

    /// `Σe / 2`.
    pub fn weight(&self) -> Rational {
        let total: i64 = self.factors.iter().map(|&(_, e)| e as i64).sum();
        Rational::from((total, 2))
    }

    /// `Σ e·k / 24`.
    pub fn lead(&self) -> Rational {
        let total: i64 = self.factors.iter().map(|&(k, e)| k as i64 * e as i64).sum();
        Rational::from((total, 24))
    }

    /// Copy with the exponent at `scale` shifted by `delta`.
    pub fn with_exponent_shift(&self, scale: u32, delta: i32) -> Self {
        Self::new(self.factors.iter().copied().chain(std::iter::once((scale, delta)))).expect("scales stay positive")
    }
}

impl fmt::Display for EtaQuotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|(k, e)| format!("{k}:{e}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Generalized pentagonal exponents `n(3n+1)/2` up to `t`, with signs `(−1)^n`.
fn pentagonal_terms(t: usize) -> Vec<(usize, i64)> {
    let mut out = vec![(0usize, 1i64)];
    let mut n: i64 = 1;
    loop {
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let p_minus = (n * (3 * n - 1) / 2) as usize;
        let p_plus = (n * (3 * n + 1) / 2) as usize;
        if p_minus > t {
            break;
        }
        out.push((p_minus, sign));
        if p_plus <= t {
            out.push((p_plus, sign));
        }
        n += 1;
    }
    out.sort_unstable();
    out
}

/// `η(τ) = q^{1/24} Σ (−1)^n q^{n(3n+1)/2}`, through relative order `t`.
pub fn eta_series(t: usize) -> QSeries {
    let mut coeffs = vec![0i64; t + 1];
    for (p, s) in pentagonal_terms(t) {
        coeffs[p] = s;
    }
    QSeries::from_integers(Rational::from((1, 24)), &coeffs, t)
}

/// Exact expansion of an eta quotient through relative order `t`.
///
/// Works factor by factor on the Euler product: multiplying by `(1 − q^a)`
/// is `c_j −= c_{j−a}` (descending `j`), dividing is `c_j += c_{j−a}`
/// (ascending). This path never touches the pentagonal expansion.
pub fn eta_quotient_series(eq: &EtaQuotient, t: usize) -> QSeries {
    let mut c = vec![Integer::new(); t + 1];
    c[0] = Integer::from(1);
    for &(k, e) in eq.factors() {
        let k = k as usize;
        for m in 1..=t / k {
            let a = k * m;
            for _ in 0..e.unsigned_abs() {
                if e > 0 {
                    for j in (a..=t).rev() {
                        let (lo, hi) = c.split_at_mut(j);
                        hi[0] -= &lo[j - a];
                    }
                } else {
                    for j in a..=t {
                        let (lo, hi) = c.split_at_mut(j);
                        hi[0] += &lo[j - a];
                    }
                }
            }
        }
    }
    QSeries::new(eq.lead(), integers_to_rationals(c), t)
}

/// Machine-integer coefficients of an eta quotient through relative order `t`,
/// for expansions far beyond what exact rationals handle comfortably.
///
/// Multiplies (or divides) by the sparse pentagonal series of each factor,
/// working in `q^g` where `g` is the gcd of the scales. Costs
/// `O(t^{3/2}·Σ|e|)`. Overflow is detected and reported.
pub fn eta_quotient_integer_coeffs(eq: &EtaQuotient, t: usize) -> Result<Vec<i64>> {
    let g = eq.factors().iter().fold(0u32, |g, &(k, _)| gcd(g, k)).max(1) as usize;
    let reduced = t / g;
    let mut c = vec![0i64; reduced + 1];
    c[0] = 1;
    let overflow = || QSeriesError::Overflow(eq.to_string());
    for &(k, e) in eq.factors() {
        let step = k as usize / g;
        let terms: Vec<(usize, i64)> = pentagonal_terms(reduced / step)
            .into_iter()
            .filter(|&(p, _)| p > 0)
            .map(|(p, s)| (p * step, s))
            .collect();
        for _ in 0..e.unsigned_abs() {
            if e > 0 {
                for j in (1..=reduced).rev() {
                    let mut acc = c[j];
                    for &(p, s) in terms.iter().take_while(|&&(p, _)| p <= j) {
                        acc = acc.checked_add(s * c[j - p]).ok_or_else(overflow)?;
                    }
                    c[j] = acc;
                }
            } else {
                for j in 1..=reduced {
                    let mut acc = c[j];
                    for &(p, s) in terms.iter().take_while(|&&(p, _)| p <= j) {
                        acc = acc.checked_sub(s * c[j - p]).ok_or_else(overflow)?;
                    }
                    c[j] = acc;
                }
            }
        }
    }
    let mut out = vec![0i64; t + 1];
    for (j, v) in c.into_iter().enumerate() {
        out[j * g] = v;
    }
    Ok(out)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(s: &QSeries) -> Vec<i64> {
        s.coeffs().iter().map(|c| c.numer().to_i64().unwrap()).collect()
    }

    #[test]
    fn eta_head() {
        let e = eta_series(12);
        assert_eq!(*e.lead(), Rational::from((1, 24)));
        assert_eq!(ints(&e), vec![1, -1, -1, 0, 0, 1, 0, 1, 0, 0, 0, 0, -1]);
    }

    #[test]
    fn eta_order_zero() {
        let e = eta_series(0);
        assert_eq!(ints(&e), vec![1]);
        assert_eq!(e.trunc(), 0);
    }

    #[test]
    fn eta_pentagonal_count() {
        // n(3n±1)/2 ≤ 100: 0,1,2,5,7,12,15,22,26,35,40,51,57,70,77,92,100
        let oracle = {
            let mut v = vec![0i64];
            for n in 1i64.. {
                let a = n * (3 * n - 1) / 2;
                if a > 100 {
                    break;
                }
                v.push(a);
                if n * (3 * n + 1) / 2 <= 100 {
                    v.push(n * (3 * n + 1) / 2);
                }
            }
            v.len()
        };
        let abs_sum: i64 = ints(&eta_series(100)).iter().map(|c| c.abs()).sum();
        assert_eq!(abs_sum as usize, oracle);
        assert_eq!(oracle, 17);
    }

    #[test]
    fn f32_expansion() {
        let f = eta_quotient_series(&EtaQuotient::parse("4:2,8:2").unwrap(), 30);
        assert_eq!(*f.lead(), 1);
        // brute force: q ∏ (1 − q^{4m})²(1 − q^{8m})²
        let mut brute = vec![0i64; 31];
        brute[0] = 1;
        for m in 1..=30 {
            for a in [4 * m, 4 * m, 8 * m, 8 * m] {
                for j in (a..=30).rev() {
                    brute[j] -= brute[j - a];
                }
            }
        }
        assert_eq!(ints(&f), brute);
        assert_eq!(f.coeff_at(&Rational::from(5)).unwrap(), -2);
        assert_eq!(f.coeff_at(&Rational::from(9)).unwrap(), -3);
        assert_eq!(f.coeff_at(&Rational::from(13)).unwrap(), 6);
    }

    #[test]
    fn single_factor_matches_eta() {
        assert_eq!(eta_quotient_series(&EtaQuotient::parse("1:1").unwrap(), 200), eta_series(200));
    }

    #[test]
    fn x_quotient_has_lead_zero() {
        let x = eta_quotient_series(&EtaQuotient::parse("2:4,8:2,4:-6").unwrap(), 20);
        assert_eq!(*x.lead(), 0);
        assert_eq!(x.coeffs()[0], 1);
        assert_eq!(x.coeffs()[2], -4);
    }

    #[test]
    fn parse_merges_and_sorts() {
        let q = EtaQuotient::parse("8:2, 4:1, 4:1").unwrap();
        assert_eq!(q.factors(), &[(4, 2), (8, 2)]);
        assert_eq!(q.weight(), 2);
        assert_eq!(q.lead(), 1);
        assert!(EtaQuotient::parse("0:1").is_err());
        assert!(EtaQuotient::parse("4").is_err());
        assert_eq!(EtaQuotient::parse("2:1,2:-1").unwrap().factors(), &[]);
    }

    #[test]
    fn integer_path_agrees_with_exact_path() {
        for text in ["4:2,8:2", "8:4,4:-2", "2:4,8:4,4:-4", "8:-1,16:3", "16:-6,8:2,32:4"] {
            let eq = EtaQuotient::parse(text).unwrap();
            let exact = eta_quotient_series(&eq, 400);
            let fast = QSeries::from_integers(eq.lead(), &eta_quotient_integer_coeffs(&eq, 400).unwrap(), 400);
            assert_eq!(exact, fast, "{text}");
        }
    }

    #[test]
    fn integer_path_reports_overflow() {
        let eq = EtaQuotient::parse("1:-24").unwrap();
        assert!(matches!(eta_quotient_integer_coeffs(&eq, 3000), Err(QSeriesError::Overflow(_))));
    }
}
