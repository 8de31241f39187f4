use std::fmt;

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::{QSeries, QSeriesError, Result};

/// The shape of a bounded, periodic coefficient sequence `a(m)`, `m ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SequenceKind {
    Const1,
    /// The character `(−4/m)`: 1, 0, −1, 0, …
    CharMinus4,
    /// `1 − δ_{2|m}`: 1, 0, 1, 0, …
    OddIndicator,
    /// `a(m) = values[(m − 1) mod p]`.
    PeriodicTable(Vec<i64>),
}

/// A bounded periodic sequence together with `B = max |a(m)|`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArithmeticSequence {
    kind: SequenceKind,
    bound: u64,
}

impl ArithmeticSequence {
    pub fn new(kind: SequenceKind) -> Result<Self> {
        let bound = match &kind {
            SequenceKind::Const1 | SequenceKind::CharMinus4 | SequenceKind::OddIndicator => 1,
            SequenceKind::PeriodicTable(values) => {
                if values.is_empty() {
                    return Err(QSeriesError::InvalidSequence("periodic table needs at least one value".into()));
                }
                values.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
            }
        };
        Ok(Self { kind, bound })
    }

    pub fn const_one() -> Self {
        Self { kind: SequenceKind::Const1, bound: 1 }
    }

    pub fn char_minus4() -> Self {
        Self { kind: SequenceKind::CharMinus4, bound: 1 }
    }

    pub fn odd_indicator() -> Self {
        Self { kind: SequenceKind::OddIndicator, bound: 1 }
    }

    pub fn periodic(values: Vec<i64>) -> Result<Self> {
        Self::new(SequenceKind::PeriodicTable(values))
    }

    /// Parses a kind name (`Const1`, `CharMinus4`, `OddIndicator`, in any
    /// case, with or without separators) or a bracketed table such as `[1,0,-1]`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let values = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<i64>().map_err(|_| QSeriesError::InvalidSequence(format!("bad table entry `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            return Self::periodic(values);
        }
        let key: String = t.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "const1" | "one" => Ok(Self::const_one()),
            "charminus4" | "chi4" | "chiminus4" => Ok(Self::char_minus4()),
            "oddindicator" | "odd" => Ok(Self::odd_indicator()),
            _ => Err(QSeriesError::InvalidSequence(format!("unknown sequence kind `{t}`"))),
        }
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn period(&self) -> usize {
        match &self.kind {
            SequenceKind::Const1 => 1,
            SequenceKind::CharMinus4 => 4,
            SequenceKind::OddIndicator => 2,
            SequenceKind::PeriodicTable(v) => v.len(),
        }
    }

    /// `a(m)` for `m ≥ 1`.
    pub fn value(&self, m: u64) -> i64 {
        debug_assert!(m >= 1, "sequences are indexed from 1");
        match &self.kind {
            SequenceKind::Const1 => 1,
            SequenceKind::CharMinus4 => match m % 4 {
                1 => 1,
                3 => -1,
                _ => 0,
            },
            SequenceKind::OddIndicator => (m % 2) as i64,
            SequenceKind::PeriodicTable(v) => v[((m - 1) % v.len() as u64) as usize],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bound == 0
    }
}

impl TryFrom<SequenceKind> for ArithmeticSequence {
    type Error = QSeriesError;

    fn try_from(kind: SequenceKind) -> Result<Self> {
        Self::new(kind)
    }
}

impl From<ArithmeticSequence> for SequenceKind {
    fn from(seq: ArithmeticSequence) -> Self {
        seq.kind
    }
}

impl TryFrom<String> for ArithmeticSequence {
    type Error = QSeriesError;

    fn try_from(text: String) -> Result<Self> {
        Self::parse(&text)
    }
}

impl From<ArithmeticSequence> for String {
    fn from(seq: ArithmeticSequence) -> Self {
        seq.to_string()
    }
}

impl fmt::Display for ArithmeticSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SequenceKind::Const1 => write!(f, "Const1"),
            SequenceKind::CharMinus4 => write!(f, "CharMinus4"),
            SequenceKind::OddIndicator => write!(f, "OddIndicator"),
            SequenceKind::PeriodicTable(v) => {
                let parts: Vec<String> = v.iter().map(i64::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
        }
    }
}

/// `const_term + Σ_{m,n≥1} a(m) b(n) n^{k−1} q^{mn}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EisensteinLikeSeries {
    pub weight: i64,
    pub a: ArithmeticSequence,
    pub b: ArithmeticSequence,
    pub const_term: Rational,
}

impl EisensteinLikeSeries {
    /// A cusp-vanishing series (constant term 0).
    pub fn new(weight: i64, a: ArithmeticSequence, b: ArithmeticSequence) -> Self {
        Self { weight, a, b, const_term: Rational::new() }
    }

    pub fn with_const_term(mut self, c: Rational) -> Self {
        self.const_term = c;
        self
    }

    /// `Σ_{n | j} a(j/n) b(n) n^{k−1}`, the coefficient of `q^j` for `j ≥ 1`.
    pub fn coefficient(&self, j: u64) -> Rational {
        let mut acc = Rational::new();
        for n in 1..=j {
            if j % n == 0 {
                let ab = self.a.value(j / n) * self.b.value(n);
                if ab != 0 {
                    acc += Rational::from(ab) * power(n, self.weight - 1);
                }
            }
        }
        acc
    }
}

/// `n^e` as an exact rational, `e` of either sign.
pub(crate) fn power(n: u64, e: i64) -> Rational {
    let p = Integer::from(n).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rational::from(p)
    } else {
        Rational::from((Integer::from(1), p))
    }
}

/// Exact Lambert expansion through `q^t`, iterating all pairs with `mn ≤ t`.
pub fn lambert_series(g: &EisensteinLikeSeries, t: usize) -> QSeries {
    let mut coeffs = vec![Rational::new(); t + 1];
    coeffs[0] = g.const_term.clone();
    for m in 1..=t as u64 {
        let am = g.a.value(m);
        if am == 0 {
            continue;
        }
        for n in 1..=t as u64 / m {
            let bn = g.b.value(n);
            if bn == 0 {
                continue;
            }
            coeffs[(m * n) as usize] += Rational::from(am * bn) * power(n, g.weight - 1);
        }
    }
    QSeries::new(Rational::new(), coeffs, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tail(s: &QSeries, t: usize) -> Vec<Rational> {
        (1..=t).map(|j| s.coeff_at(&Rational::from(j as u64)).unwrap()).collect()
    }

    fn rs(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| Rational::from(x)).collect()
    }

    #[test]
    fn char_and_odd_weight_one() {
        let g = EisensteinLikeSeries::new(1, ArithmeticSequence::char_minus4(), ArithmeticSequence::odd_indicator());
        assert_eq!(tail(&lambert_series(&g, 9), 9), rs(&[1, 0, 0, 0, 2, 0, 0, 0, 1]));
    }

    #[test]
    fn divisor_function() {
        let g = EisensteinLikeSeries::new(1, ArithmeticSequence::const_one(), ArithmeticSequence::const_one());
        assert_eq!(tail(&lambert_series(&g, 6), 6), rs(&[1, 2, 2, 3, 2, 4]));
        let s = lambert_series(&g, 500);
        for j in 1..=500u64 {
            let d = (1..=j).filter(|n| j % n == 0).count() as i64;
            assert_eq!(s.coeff_at(&Rational::from(j)).unwrap(), d, "d({j})");
        }
    }

    #[test]
    fn weight_two_character_square() {
        let chi = ArithmeticSequence::char_minus4();
        let g = EisensteinLikeSeries::new(2, chi.clone(), chi);
        assert_eq!(tail(&lambert_series(&g, 3), 3), rs(&[1, 0, -4]));
    }

    #[test]
    fn weight_zero_gives_fractions() {
        let odd = ArithmeticSequence::odd_indicator();
        let g = EisensteinLikeSeries::new(0, odd.clone(), odd);
        let s = lambert_series(&g, 9);
        // q^9: (m,n) = (9,1),(3,3),(1,9) → 1 + 1/3 + 1/9
        assert_eq!(s.coeff_at(&Rational::from(9)).unwrap(), Rational::from((13, 9)));
        assert_eq!(s.coeff_at(&Rational::from(9)).unwrap(), g.coefficient(9));
    }

    #[test]
    fn const_term_sits_at_q0() {
        let g = EisensteinLikeSeries::new(1, ArithmeticSequence::const_one(), ArithmeticSequence::const_one())
            .with_const_term(Rational::from((-1, 4)));
        let s = lambert_series(&g, 4);
        assert_eq!(*s.lead(), 0);
        assert_eq!(s.coeffs()[0], Rational::from((-1, 4)));
    }

    #[test]
    fn sequence_values_and_bounds() {
        let chi = ArithmeticSequence::char_minus4();
        assert_eq!((1..=8).map(|m| chi.value(m)).collect::<Vec<_>>(), vec![1, 0, -1, 0, 1, 0, -1, 0]);
        let odd = ArithmeticSequence::odd_indicator();
        assert_eq!((1..=4).map(|m| odd.value(m)).collect::<Vec<_>>(), vec![1, 0, 1, 0]);
        let t = ArithmeticSequence::periodic(vec![2, -3, 0]).unwrap();
        assert_eq!(t.bound(), 3);
        assert_eq!(t.value(4), 2);
        assert_eq!(t.value(5), -3);
        assert!(ArithmeticSequence::periodic(vec![]).is_err());
        assert!(ArithmeticSequence::periodic(vec![0, 0]).unwrap().is_zero());
    }

    #[test]
    fn parse_names_and_tables() {
        assert_eq!(ArithmeticSequence::parse("CharMinus4").unwrap(), ArithmeticSequence::char_minus4());
        assert_eq!(ArithmeticSequence::parse("odd-indicator").unwrap(), ArithmeticSequence::odd_indicator());
        assert_eq!(ArithmeticSequence::parse("[1, 0, -1]").unwrap().period(), 3);
        assert!(ArithmeticSequence::parse("fibonacci").is_err());
    }
}
