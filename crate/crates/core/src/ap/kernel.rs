//! Bochner–Fejér approximate identities and the mean-value convolution.

use std::collections::HashMap;

use crate::ap::quad::{Region, Rule};
use crate::ap::trig::FreqKey;
use crate::ap::{Evaluate, TrigPolynomial, WStarAPFunction};
use crate::error::{Error, Result};
use crate::exec;

/// `Σ_j k_j g_j`, accumulated in generator order. Every routine that matches
/// frequencies against the module goes through this function, so equal
/// integer vectors always give bit-identical frequencies.
pub fn module_frequency(generators: &[Vec<f64>], k: &[i64]) -> Vec<f64> {
    let dim = generators.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (g, &kj) in generators.iter().zip(k) {
        if kj == 0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(g) {
            *o += kj as f64 * x;
        }
    }
    out
}

/// `Π_j (1 - |k_j|/(n+1))`, clamped at zero.
pub fn fejer_weight(k: &[i64], order: usize) -> f64 {
    let n1 = order as f64 + 1.0;
    k.iter()
        .map(|&kj| (1.0 - kj.unsigned_abs() as f64 / n1).max(0.0))
        .product()
}

fn check_generators(generators: &[Vec<f64>]) -> Result<usize> {
    let dim = generators
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("at least one base frequency is required"))?;
    if dim == 0 {
        return Err(Error::invalid("base frequencies must have positive dimension"));
    }
    for g in generators {
        if g.len() != dim {
            return Err(Error::invalid("base frequencies must share one dimension"));
        }
        if g.iter().all(|&x| x == 0.0) || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("base frequencies must be finite and nonzero"));
        }
    }
    Ok(dim)
}

/// Calls `visit` for every `k ∈ [-bound, bound]^r`.
fn for_each_multi_index(r: usize, bound: i64, mut visit: impl FnMut(&[i64])) {
    let mut k = vec![-bound; r];
    loop {
        visit(&k);
        let mut j = 0;
        loop {
            if j == r {
                return;
            }
            if k[j] < bound {
                k[j] += 1;
                break;
            }
            k[j] = -bound;
            j += 1;
        }
    }
}

/// Product of one-dimensional Fejér kernels over the generated module:
/// `φ_n(y) = Σ_{|k|_∞ ≤ n} Π_j (1 - |k_j|/(n+1)) e^{i (Σ k_j g_j)·y}`.
pub fn bochner_fejer_kernel(generators: &[Vec<f64>], order: usize) -> Result<TrigPolynomial> {
    let dim = check_generators(generators)?;
    if order == 0 {
        return Err(Error::invalid("kernel order must be at least 1"));
    }
    let mut phi = TrigPolynomial::zero(dim);
    for_each_multi_index(generators.len(), order as i64, |k| {
        phi.add_term(&module_frequency(generators, k), fejer_weight(k, order), 0.0);
    });
    Ok(phi)
}

/// Mean-value convolution `y ↦ M_z(φ(z) f(y - z))`.
///
/// Only frequencies present in both factors survive. For a term pair
/// `(a, b)` in `φ` and `(c, d)` in `f` the result carries
/// `((ac - bd)/2, (ad + bc)/2)`.
pub fn ap_convolve(phi: &TrigPolynomial, f: &TrigPolynomial) -> Result<TrigPolynomial> {
    if phi.dim() != f.dim() {
        return Err(Error::invalid("convolution factors differ in dimension"));
    }
    let mut out = TrigPolynomial::constant(f.dim(), phi.constant_term() * f.constant_term());
    for t in f.terms() {
        if let Some((a, b)) = phi.coefficient(&t.frequency) {
            out.add_term(
                &t.frequency,
                0.5 * (a * t.cos - b * t.sin),
                0.5 * (a * t.sin + b * t.cos),
            );
        }
    }
    Ok(out)
}

impl WStarAPFunction {
    /// Mean-value convolution with `phi`; the null part contributes nothing.
    pub fn convolved(&self, phi: &TrigPolynomial) -> Result<TrigPolynomial> {
        ap_convolve(phi, &self.ap_part)
    }
}

/// Input to [`extract_ap_component`].
pub enum ExtractSource<'a> {
    /// Known decomposition; the null part is annihilated exactly.
    Structured(&'a WStarAPFunction),
    Trig(&'a TrigPolynomial),
    /// Black-box samples; Bohr coefficients are estimated numerically.
    Sampled(&'a dyn Evaluate),
}

#[derive(Clone, Debug)]
pub struct ExtractOptions {
    /// Increasing kernel orders.
    pub order_schedule: Vec<usize>,
    /// Points on which successive outputs are compared.
    pub sup_grid: Vec<Vec<f64>>,
    /// Stop once the sup-grid deviation between successive orders is below this.
    pub tol: f64,
    /// Largest `|k|_∞` searched when locating a known frequency in the module.
    pub module_search: usize,
    /// Largest `|k|_∞` whose Bohr coefficient is estimated on the sampled path.
    pub coefficient_cap: usize,
    /// Half-length of the averaging cube on the sampled path.
    pub averaging_length: f64,
    /// Cells per axis (or points for d > 2) of the sampled-path quadrature.
    pub samples: usize,
}

impl ExtractOptions {
    /// Doubling schedule `1, 2, 4, …, max_order`.
    pub fn doubling(max_order: usize, sup_grid: Vec<Vec<f64>>, tol: f64) -> Self {
        let mut order_schedule = Vec::new();
        let mut n = 1;
        while n <= max_order {
            order_schedule.push(n);
            n *= 2;
        }
        Self {
            order_schedule,
            sup_grid,
            tol,
            module_search: 32,
            coefficient_cap: 6,
            averaging_length: 1000.0,
            samples: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub component: TrigPolynomial,
    pub order: usize,
    /// Sup-grid deviation between each order and the previous one.
    pub deviations: Vec<f64>,
}

/// `(k, cos, sin)` triples with the zero index carrying the constant.
struct Spectrum {
    dim: usize,
    constant: f64,
    terms: Vec<(Vec<i64>, Vec<f64>, f64, f64)>,
}

impl Spectrum {
    fn filtered(&self, order: usize) -> TrigPolynomial {
        let mut out = TrigPolynomial::constant(self.dim, self.constant);
        for (k, freq, a, b) in &self.terms {
            let w = fejer_weight(k, order);
            if w > 0.0 {
                out.add_term(freq, w * a, w * b);
            }
        }
        out
    }
}

fn locate(generators: &[Vec<f64>], target: &[f64], bound: usize) -> Option<Vec<i64>> {
    let key = FreqKey::of(target);
    let mut found = None;
    for_each_multi_index(generators.len(), bound as i64, |k| {
        if found.is_none() && FreqKey::of(&module_frequency(generators, k)) == key {
            found = Some(k.to_vec());
        }
    });
    found
}

fn known_spectrum(
    f: &TrigPolynomial,
    generators: &[Vec<f64>],
    opts: &ExtractOptions,
) -> Result<Spectrum> {
    let mut terms = Vec::with_capacity(f.len());
    for t in f.terms() {
        let k = locate(generators, &t.frequency, opts.module_search).ok_or_else(|| {
            Error::NoConvergence(format!(
                "frequency {:?} is not in the module generated by {generators:?} (|k| ≤ {})",
                t.frequency, opts.module_search
            ))
        })?;
        terms.push((k, t.frequency.clone(), t.cos, t.sin));
    }
    Ok(Spectrum {
        dim: f.dim(),
        constant: f.constant_term(),
        terms,
    })
}

fn sampled_spectrum(
    f: &dyn Evaluate,
    generators: &[Vec<f64>],
    opts: &ExtractOptions,
) -> Result<Spectrum> {
    let dim = f.dim();
    if !(opts.averaging_length > 0.0) {
        return Err(Error::invalid("averaging length must be positive"));
    }
    // Tapered shell: the taper suppresses leakage between nearby frequencies
    // and the hole keeps localized null mass out of the averages.
    let rule = Rule::new(
        dim,
        Region::TaperedShell {
            inner: 0.25 * opts.averaging_length,
            outer: opts.averaging_length,
        },
        opts.samples,
    );
    let nodes: Vec<(Vec<f64>, f64, f64)> = exec::map_range(rule.len(), |i| {
        let mut y = [0.0; 8];
        let w = rule.node(i, &mut y);
        let y = y[..dim].to_vec();
        let v = if w == 0.0 { 0.0 } else { f.value(&y) };
        (y, w, v)
    })
    .into_iter()
    .filter(|n| n.1 != 0.0)
    .collect();
    let wsum: f64 = nodes.iter().map(|n| n.1).sum();
    if wsum == 0.0 {
        return Err(Error::invalid("averaging rule has no support"));
    }
    let constant = nodes.iter().map(|n| n.1 * n.2).sum::<f64>() / wsum;

    let mut seen: HashMap<FreqKey, ()> = HashMap::new();
    let mut indices = Vec::new();
    for_each_multi_index(generators.len(), opts.coefficient_cap as i64, |k| {
        // one representative of each ±k pair
        if k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0) {
            let freq = module_frequency(generators, k);
            if freq.iter().any(|&x| x != 0.0) && seen.insert(FreqKey::of(&freq), ()).is_none() {
                indices.push((k.to_vec(), freq));
            }
        }
    });
    let terms = exec::map_range(indices.len(), |j| {
        let (k, freq) = &indices[j];
        let (mut c, mut s) = (0.0, 0.0);
        for (y, w, v) in &nodes {
            let phase: f64 = freq.iter().zip(y).map(|(l, x)| l * x).sum();
            let (sn, cs) = phase.sin_cos();
            c += w * v * cs;
            s += w * v * sn;
        }
        (k.clone(), freq.clone(), 2.0 * c / wsum, 2.0 * s / wsum)
    });
    Ok(Spectrum {
        dim,
        constant,
        terms,
    })
}

/// Almost periodic component `φ_n *_M f` at the first order in the schedule
/// whose sup-grid deviation from the previous order drops below `opts.tol`.
///
/// Fails with `NoConvergence` when the schedule runs out first, or when a
/// known frequency of `f` does not lie in the module.
pub fn extract_ap_component(
    source: ExtractSource<'_>,
    generators: &[Vec<f64>],
    opts: &ExtractOptions,
) -> Result<Extraction> {
    let dim = check_generators(generators)?;
    if opts.order_schedule.len() < 2 {
        return Err(Error::invalid("order schedule needs at least two orders"));
    }
    if opts.order_schedule[0] == 0 || opts.order_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("order schedule must be positive and strictly increasing"));
    }
    if opts.sup_grid.is_empty() || opts.sup_grid.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("sup grid must be nonempty and match the dimension"));
    }
    let spectrum = match source {
        ExtractSource::Structured(f) => {
            if f.ap_part.dim() != dim {
                return Err(Error::invalid("function and base frequencies differ in dimension"));
            }
            known_spectrum(&f.ap_part, generators, opts)?
        }
        ExtractSource::Trig(f) => {
            if f.dim() != dim {
                return Err(Error::invalid("function and base frequencies differ in dimension"));
            }
            known_spectrum(f, generators, opts)?
        }
        ExtractSource::Sampled(f) => {
            if f.dim() != dim {
                return Err(Error::invalid("function and base frequencies differ in dimension"));
            }
            sampled_spectrum(f, generators, opts)?
        }
    };

    let mut prev = spectrum.filtered(opts.order_schedule[0]);
    let mut deviations = Vec::new();
    for &n in &opts.order_schedule[1..] {
        let cur = spectrum.filtered(n);
        let dev = cur.sub(&prev).sup_on(&opts.sup_grid);
        deviations.push(dev);
        log::debug!("extraction order {n}: deviation {dev:.3e}");
        if dev < opts.tol {
            return Ok(Extraction {
                component: cur,
                order: n,
                deviations,
            });
        }
        prev = cur;
    }
    Err(Error::NoConvergence(format!(
        "sup-grid deviations {deviations:?} never dropped below {:.1e}",
        opts.tol
    )))
}
