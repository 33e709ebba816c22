use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ap::{Evaluate, NullFunction, TrigPolynomial};
use crate::error::{Error, Result};

/// Default `|m|_∞` bound for the resonance certificate.
pub const DEFAULT_M_MAX: i64 = 8;

/// A point of the torus `[0, 2π)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    angles: Vec<f64>,
}

impl Phase {
    /// Reduces every angle into `[0, 2π)`.
    pub fn new(angles: Vec<f64>) -> Self {
        Self {
            angles: angles.into_iter().map(wrap).collect(),
        }
    }

    pub fn zero(k: usize) -> Self {
        Self {
            angles: vec![0.0; k],
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Torus-phase model of a stationary ergodic medium: `Ω = T^k` with Haar
/// measure and the flow `T(y)ω = ω + Λ_f y (mod 2π)`.
///
/// Each channel is a trigonometric polynomial in the `k` angles with integer
/// frequencies. A realization evaluates a channel along the orbit, plus an
/// optional null perturbation that is attached to the realization and does not
/// move with `ω`.
#[derive(Clone, Debug)]
pub struct QuasiPeriodicEnsemble {
    freq_matrix: Vec<Vec<f64>>,
    dim: usize,
    channels: Vec<TrigPolynomial>,
    null_profiles: Vec<Option<NullFunction>>,
}

impl QuasiPeriodicEnsemble {
    /// Builds an ensemble and checks the ergodicity certificate with
    /// `m_max = 8`.
    pub fn new(freq_matrix: Vec<Vec<f64>>, channels: Vec<TrigPolynomial>) -> Result<Self> {
        Self::with_certificate(freq_matrix, channels, DEFAULT_M_MAX)
    }

    pub fn with_certificate(
        freq_matrix: Vec<Vec<f64>>,
        channels: Vec<TrigPolynomial>,
        m_max: i64,
    ) -> Result<Self> {
        let ens = Self::unchecked(freq_matrix, channels)?;
        if let Some(m) = ens.find_resonance(m_max) {
            return Err(Error::Resonant { m });
        }
        Ok(ens)
    }

    /// Skips the resonance certificate. Only for diagnostics on
    /// deliberately non-ergodic flows.
    pub fn unchecked(freq_matrix: Vec<Vec<f64>>, channels: Vec<TrigPolynomial>) -> Result<Self> {
        let k = freq_matrix.len();
        if k == 0 {
            return Err(Error::invalid("frequency matrix needs at least one row"));
        }
        let dim = freq_matrix[0].len();
        if dim == 0 || freq_matrix.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("frequency matrix rows must share a positive length"));
        }
        if freq_matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("frequency matrix entries must be finite"));
        }
        if channels.is_empty() {
            return Err(Error::invalid("ensemble needs at least one profile channel"));
        }
        for (c, p) in channels.iter().enumerate() {
            if p.dim() != k {
                return Err(Error::invalid(format!(
                    "profile channel {c} has {} angles, torus has {k}",
                    p.dim()
                )));
            }
            for t in p.terms() {
                if t.frequency.iter().any(|x| x.fract() != 0.0) {
                    return Err(Error::invalid(format!(
                        "profile channel {c} has non-integer torus frequency {:?}",
                        t.frequency
                    )));
                }
            }
        }
        let n = channels.len();
        Ok(Self {
            freq_matrix,
            dim,
            channels,
            null_profiles: vec![None; n],
        })
    }

    /// Attaches a null perturbation to every realization of `channel`.
    pub fn with_null_profile(mut self, channel: usize, null: NullFunction) -> Result<Self> {
        if channel >= self.channels.len() {
            return Err(Error::invalid(format!("no channel {channel}")));
        }
        if null.dim() != self.dim {
            return Err(Error::invalid("null profile dimension does not match the ensemble"));
        }
        self.null_profiles[channel] = Some(null);
        Ok(self)
    }

    /// First nonzero `m` with `|m|_∞ ≤ m_max` and `mᵀΛ_f = 0`, if any.
    pub fn find_resonance(&self, m_max: i64) -> Option<Vec<i64>> {
        let k = self.torus_dim();
        let mut m = vec![-m_max; k];
        loop {
            if m.iter().any(|&x| x != 0) {
                let mut norm = 0.0f64;
                let mut scale = 0.0f64;
                for j in 0..self.dim {
                    let mut s = 0.0;
                    for (i, &mi) in m.iter().enumerate() {
                        s += mi as f64 * self.freq_matrix[i][j];
                        scale += (mi as f64 * self.freq_matrix[i][j]).abs();
                    }
                    norm = norm.max(s.abs());
                }
                if norm <= 1e-12 * scale.max(1.0) {
                    return Some(m);
                }
            }
            let mut i = 0;
            loop {
                if i == k {
                    return None;
                }
                if m[i] < m_max {
                    m[i] += 1;
                    break;
                }
                m[i] = -m_max;
                i += 1;
            }
        }
    }

    pub fn torus_dim(&self) -> usize {
        self.freq_matrix.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn freq_matrix(&self) -> &[Vec<f64>] {
        &self.freq_matrix
    }

    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn profile(&self, channel: usize) -> &TrigPolynomial {
        &self.channels[channel]
    }

    pub fn null_profile(&self, channel: usize) -> Option<&NullFunction> {
        self.null_profiles[channel].as_ref()
    }

    /// Haar sample; the same `seed` gives the same phase.
    pub fn sample_phase(&self, seed: u64) -> Phase {
        self.sample_phases(seed, 1).pop().unwrap()
    }

    /// `n` phases; phase `i` comes from stream `i` of the generator keyed by
    /// `seed`, so the result does not depend on scheduling.
    pub fn sample_phases(&self, seed: u64, n: usize) -> Vec<Phase> {
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                Phase::new(
                    (0..self.torus_dim())
                        .map(|_| rng.random_range(0.0..TAU))
                        .collect(),
                )
            })
            .collect()
    }

    /// `T(y)ω`.
    pub fn shift(&self, omega: &Phase, y: &[f64]) -> Phase {
        Phase::new(self.orbit_angles(omega, y))
    }

    /// `ω + Λ_f y` without reduction.
    fn orbit_angles(&self, omega: &Phase, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.dim);
        self.freq_matrix
            .iter()
            .zip(omega.angles())
            .map(|(row, a)| a + row.iter().zip(y).map(|(l, x)| l * x).sum::<f64>())
            .collect()
    }

    /// `profile_c(T(y)ω)`, the stationary part of a realization.
    pub fn stationary_value(&self, channel: usize, omega: &Phase, y: &[f64]) -> f64 {
        self.channels[channel].eval(&self.shift(omega, y).angles)
    }

    /// `profile_c(T(y)ω) + null_c(y)`.
    pub fn value(&self, channel: usize, omega: &Phase, y: &[f64]) -> f64 {
        let base = self.stationary_value(channel, omega, y);
        match &self.null_profiles[channel] {
            Some(n) => base + n.eval(y),
            None => base,
        }
    }

    pub fn realization<'a>(&'a self, channel: usize, omega: &Phase) -> Realization<'a> {
        Realization {
            ensemble: self,
            channel,
            omega: omega.clone(),
        }
    }

    /// Haar mean of a channel by an `n^k` torus grid (exact for trigonometric
    /// profiles with `|m|_∞ < n`).
    pub fn ensemble_mean(&self, channel: usize, n: usize) -> f64 {
        torus_grid_mean(&self.channels[channel], n)
    }
}

/// Midpoint-grid Haar mean of a torus function.
pub fn torus_grid_mean(f: &TrigPolynomial, n: usize) -> f64 {
    let k = f.dim();
    let total = n.pow(k as u32);
    let step = TAU / n as f64;
    crate::exec::sum_range(total, |i| {
        let mut rest = i;
        let theta: Vec<f64> = (0..k)
            .map(|_| {
                let j = rest % n;
                rest /= n;
                (j as f64 + 0.5) * step
            })
            .collect();
        f.eval(&theta)
    }) / total as f64
}

/// `y ↦ profile_c(T(y)ω) + null_c(y)` for a fixed `ω`.
pub struct Realization<'a> {
    ensemble: &'a QuasiPeriodicEnsemble,
    channel: usize,
    omega: Phase,
}

impl Evaluate for Realization<'_> {
    fn dim(&self) -> usize {
        self.ensemble.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.ensemble.value(self.channel, &self.omega, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::TrigTerm;
    use std::f64::consts::{PI, SQRT_2};

    fn one_phase(profile: TrigPolynomial) -> QuasiPeriodicEnsemble {
        QuasiPeriodicEnsemble::new(vec![vec![1.0]], vec![profile]).unwrap()
    }

    fn two_plus_sin() -> TrigPolynomial {
        TrigPolynomial::new(1, 2.0, vec![TrigTerm::new(vec![1.0], 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let e = one_phase(two_plus_sin());
        assert_eq!(e.sample_phase(0), e.sample_phase(0));
        assert_ne!(e.sample_phase(0), e.sample_phase(1));
        let p = e.sample_phase(7);
        assert_eq!(p.angles().len(), 1);
        assert!((0.0..TAU).contains(&p.angles()[0]));
    }

    #[test]
    fn samples_are_uniform() {
        // χ² goodness of fit with 20 bins; the 1% critical value for 19
        // degrees of freedom is 36.19.
        let e = QuasiPeriodicEnsemble::new(
            vec![vec![1.0], vec![SQRT_2]],
            vec![TrigPolynomial::zero(2)],
        )
        .unwrap();
        let phases = e.sample_phases(11, 10_000);
        for axis in 0..2 {
            let mut bins = [0usize; 20];
            for p in &phases {
                bins[(p.angles()[axis] / TAU * 20.0) as usize] += 1;
            }
            let expected = 500.0;
            let chi2: f64 = bins
                .iter()
                .map(|&b| (b as f64 - expected).powi(2) / expected)
                .sum();
            assert!(chi2 < 36.19, "axis {axis}: χ² = {chi2}");
        }
    }

    #[test]
    fn shift_group_law() {
        let e = QuasiPeriodicEnsemble::new(
            vec![vec![1.0, 0.5], vec![SQRT_2, -0.3]],
            vec![TrigPolynomial::zero(2)],
        )
        .unwrap();
        let w = Phase::new(vec![1.0, 2.0]);
        assert_eq!(e.shift(&w, &[0.0, 0.0]), w);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w = Phase::new(vec![rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]);
            let y = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let z = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let a = e.shift(&e.shift(&w, &y), &z);
            let b = e.shift(&w, &[y[0] + z[0], y[1] + z[1]]);
            for (p, q) in a.angles().iter().zip(b.angles()) {
                let d = (p - q).abs();
                assert!(d.min(TAU - d) < 1e-12);
            }
        }
        let e1 = one_phase(two_plus_sin());
        assert!((e1.shift(&Phase::zero(1), &[PI]).angles()[0] - PI).abs() < 1e-15);
    }

    #[test]
    fn realization_of_the_shifted_sine() {
        let e = one_phase(two_plus_sin());
        let r = e.realization(0, &Phase::zero(1));
        for y in [0.0, 1.0, -4.0, 100.0] {
            assert!((r.value(&[y]) - (2.0 + y.sin())).abs() < 1e-13);
        }
    }

    #[test]
    fn stationarity_identity() {
        let e = QuasiPeriodicEnsemble::new(
            vec![vec![1.0], vec![SQRT_2]],
            vec![TrigPolynomial::new(2, 1.0, vec![TrigTerm::new(vec![1.0, 1.0], 0.3, 0.4)]).unwrap()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let w = e.sample_phase(rng.random());
            let y0 = rng.random_range(-20.0..20.0);
            let y = rng.random_range(-20.0..20.0);
            let lhs = e.value(0, &e.shift(&w, &[y0]), &[y]);
            let rhs = e.value(0, &w, &[y + y0]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn resonant_rows_are_rejected() {
        let err = QuasiPeriodicEnsemble::new(
            vec![vec![1.0], vec![1.0]],
            vec![TrigPolynomial::zero(2)],
        )
        .unwrap_err();
        match err {
            Error::Resonant { m } => assert_eq!(m[0] + m[1], 0),
            e => panic!("unexpected {e}"),
        }
        assert!(QuasiPeriodicEnsemble::new(
            vec![vec![1.0], vec![2.0]],
            vec![TrigPolynomial::zero(2)]
        )
        .is_err());
    }

    #[test]
    fn non_integer_torus_frequencies_are_rejected() {
        let p = TrigPolynomial::new(1, 0.0, vec![TrigTerm::new(vec![0.5], 1.0, 0.0)]).unwrap();
        assert!(QuasiPeriodicEnsemble::new(vec![vec![1.0]], vec![p]).is_err());
    }

    #[test]
    fn grid_mean_is_invariant_under_aligned_shifts() {
        let p = TrigPolynomial::new(
            2,
            0.7,
            vec![
                TrigTerm::new(vec![1.0, 0.0], 1.0, 0.5),
                TrigTerm::new(vec![2.0, -1.0], 0.2, 0.0),
            ],
        )
        .unwrap();
        let n = 16;
        let base = torus_grid_mean(&p, n);
        assert!((base - 0.7).abs() < 1e-12);
        // shift by a whole grid cell in each angle
        let step = TAU / n as f64;
        let mut shifted = TrigPolynomial::constant(2, p.constant_term());
        for t in p.terms() {
            let phase = t.frequency[0] * 3.0 * step + t.frequency[1] * 5.0 * step;
            let (s, c) = phase.sin_cos();
            shifted.add_term(&t.frequency, t.cos * c + t.sin * s, t.sin * c - t.cos * s);
        }
        assert!((torus_grid_mean(&shifted, n) - base).abs() < 1e-10);
    }
}
