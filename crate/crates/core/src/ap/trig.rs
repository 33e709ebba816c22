use std::collections::HashMap;
use std::fmt::Write as _;

use crate::ap::Evaluate;
use crate::error::{Error, Result};

/// One `a cos(λ·y) + b sin(λ·y)` term.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub frequency: Vec<f64>,
    pub cos: f64,
    pub sin: f64,
}

impl TrigTerm {
    pub fn new(frequency: Vec<f64>, cos: f64, sin: f64) -> Self {
        Self {
            frequency,
            cos,
            sin,
        }
    }
}

/// Hashable exact key for a frequency vector (`-0.0` folded into `0.0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct FreqKey(Vec<u64>);

impl FreqKey {
    pub(crate) fn of(freq: &[f64]) -> Self {
        FreqKey(
            freq.iter()
                .map(|&x| if x == 0.0 { 0u64 } else { x.to_bits() })
                .collect(),
        )
    }
}

/// Flips `freq` so that its first nonzero component is positive.
/// Returns `true` when a flip happened (the sine coefficient must change sign).
fn canonicalize(freq: &mut [f64]) -> bool {
    let flip = freq.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0);
    if flip {
        for x in freq.iter_mut() {
            *x = -*x;
        }
    }
    for x in freq.iter_mut() {
        if *x == 0.0 {
            *x = 0.0;
        }
    }
    flip
}

/// Finite real trigonometric sum on `R^d`:
/// `constant + Σ_j (a_j cos(λ_j·y) + b_j sin(λ_j·y))`.
///
/// Frequencies are stored with their first nonzero component positive and are
/// compared exactly; the zero frequency lives in `constant`.
#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    dim: usize,
    constant: f64,
    terms: Vec<TrigTerm>,
    index: HashMap<FreqKey, usize>,
}

impl PartialEq for TrigPolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.constant == other.constant && self.terms == other.terms
    }
}

impl TrigPolynomial {
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self {
            dim,
            constant: value,
            terms: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Strict constructor: rejects zero frequencies and repeated frequencies
    /// (after sign canonicalization).
    pub fn new(dim: usize, constant: f64, terms: Vec<TrigTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut p = Self::constant(dim, constant);
        for t in terms {
            if t.frequency.len() != dim {
                return Err(Error::invalid(format!(
                    "frequency {:?} does not have dimension {dim}",
                    t.frequency
                )));
            }
            if t.frequency.iter().any(|x| !x.is_finite()) || !t.cos.is_finite() || !t.sin.is_finite() {
                return Err(Error::invalid("non-finite trigonometric term"));
            }
            if t.frequency.iter().all(|&x| x == 0.0) {
                return Err(Error::invalid(
                    "zero frequency must be stored in the constant coefficient",
                ));
            }
            let mut freq = t.frequency;
            let flip = canonicalize(&mut freq);
            let key = FreqKey::of(&freq);
            if p.index.contains_key(&key) {
                return Err(Error::invalid(format!("duplicate frequency {freq:?}")));
            }
            let sin = if flip { -t.sin } else { t.sin };
            p.index.insert(key, p.terms.len());
            p.terms.push(TrigTerm::new(freq, t.cos, sin));
        }
        Ok(p)
    }

    /// Adds `cos·cos(λ·y) + sin·sin(λ·y)`, merging with an existing term of the
    /// same frequency. A zero frequency adds `cos` to the constant.
    pub fn add_term(&mut self, frequency: &[f64], cos: f64, sin: f64) {
        assert_eq!(frequency.len(), self.dim, "frequency dimension mismatch");
        if frequency.iter().all(|&x| x == 0.0) {
            self.constant += cos;
            return;
        }
        let mut freq = frequency.to_vec();
        let flip = canonicalize(&mut freq);
        let sin = if flip { -sin } else { sin };
        let key = FreqKey::of(&freq);
        match self.index.get(&key) {
            Some(&i) => {
                self.terms[i].cos += cos;
                self.terms[i].sin += sin;
            }
            None => {
                self.index.insert(key, self.terms.len());
                self.terms.push(TrigTerm::new(freq, cos, sin));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: f64) {
        self.constant = c;
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(cos, sin)` coefficients at `frequency`, in canonical orientation.
    pub fn coefficient(&self, frequency: &[f64]) -> Option<(f64, f64)> {
        let mut freq = frequency.to_vec();
        let flip = canonicalize(&mut freq);
        self.index.get(&FreqKey::of(&freq)).map(|&i| {
            let t = &self.terms[i];
            (t.cos, if flip { -t.sin } else { t.sin })
        })
    }

    /// The mean value: every nonzero frequency averages to zero.
    pub fn mean_value(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        self.constant
            + self
                .terms
                .iter()
                .map(|t| {
                    let phase: f64 = t.frequency.iter().zip(y).map(|(l, x)| l * x).sum();
                    let (s, c) = phase.sin_cos();
                    t.cos * c + t.sin * s
                })
                .sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.constant *= factor;
        for t in &mut out.terms {
            t.cos *= factor;
            t.sin *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        out.constant += other.constant;
        for t in &other.terms {
            out.add_term(&t.frequency, t.cos, t.sin);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Product via product-to-sum identities.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::constant(self.dim, self.constant * other.constant);
        if self.constant != 0.0 {
            for t in &other.terms {
                out.add_term(&t.frequency, self.constant * t.cos, self.constant * t.sin);
            }
        }
        if other.constant != 0.0 {
            for t in &self.terms {
                out.add_term(&t.frequency, other.constant * t.cos, other.constant * t.sin);
            }
        }
        for p in &self.terms {
            for q in &other.terms {
                let plus: Vec<f64> = p.frequency.iter().zip(&q.frequency).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = p.frequency.iter().zip(&q.frequency).map(|(a, b)| a - b).collect();
                out.add_term(
                    &plus,
                    0.5 * (p.cos * q.cos - p.sin * q.sin),
                    0.5 * (p.cos * q.sin + p.sin * q.cos),
                );
                out.add_term(
                    &minus,
                    0.5 * (p.cos * q.cos + p.sin * q.sin),
                    0.5 * (p.sin * q.cos - p.cos * q.sin),
                );
            }
        }
        out
    }

    /// Drops terms whose coefficients are both at most `tol` in magnitude.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = Self::constant(self.dim, self.constant);
        for t in &self.terms {
            if t.cos.abs() > tol || t.sin.abs() > tol {
                out.add_term(&t.frequency, t.cos, t.sin);
            }
        }
        out
    }

    /// `max |self(y)|` over the given points.
    pub fn sup_on(&self, points: &[Vec<f64>]) -> f64 {
        points.iter().map(|p| self.eval(p).abs()).fold(0.0, f64::max)
    }

    /// Plain-text record: a `d; constant` header line, then one
    /// `λ_1, …, λ_d, a, b` line per term. Floats use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}; {}", self.dim, self.constant).unwrap();
        for t in &self.terms {
            for f in &t.frequency {
                write!(s, "{f}, ").unwrap();
            }
            writeln!(s, "{}, {}", t.cos, t.sin).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty trigonometric polynomial record"))?;
        let (d, c) = header
            .split_once(';')
            .ok_or_else(|| Error::invalid(format!("bad header line `{header}`")))?;
        let dim: usize = d
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad dimension `{d}`")))?;
        let constant = parse_f64(c)?;
        let mut terms = Vec::new();
        for line in lines {
            let fields: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
            if fields.len() != dim + 2 {
                return Err(Error::invalid(format!(
                    "term line `{line}` has {} fields, expected {}",
                    fields.len(),
                    dim + 2
                )));
            }
            terms.push(TrigTerm::new(
                fields[..dim].to_vec(),
                fields[dim],
                fields[dim + 1],
            ));
        }
        Self::new(dim, constant, terms)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad number `{}`", s.trim())))
}

impl Evaluate for TrigPolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.eval(y)
    }
}
