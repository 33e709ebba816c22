//! Functions of vanishing absolute mean, `lim_R |B_R|^{-1} ∫_{B_R} |f| = 0`.

use std::f64::consts::PI;

use crate::ap::Evaluate;
use crate::error::{Error, Result};

/// `amplitude · exp(-|y - center|² / width²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

/// Transform of a compactly supported density, sampled on a uniform grid and
/// interpolated piecewise linearly. The transform of the interpolant is exact:
/// `f(x) = Δ · sinc²(xΔ/2) · Σ_i ρ_i cos(x ξ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTransform {
    pub start: f64,
    pub spacing: f64,
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NullKind {
    GaussianBumpSum(Vec<GaussianBump>),
    /// `amplitude · exp(-|y - center| / scale) · cos(wave·(y - center))`.
    ExponentialEnvelope {
        amplitude: f64,
        center: Vec<f64>,
        scale: f64,
        wave: Vec<f64>,
    },
    FsDensityPart(DensityTransform),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullFunction {
    dim: usize,
    kind: NullKind,
}

impl NullFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            kind: NullKind::GaussianBumpSum(Vec::new()),
        }
    }

    pub fn gaussian_bump(amplitude: f64, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::gaussian_bumps(vec![GaussianBump {
            amplitude,
            center,
            width,
        }])
    }

    pub fn gaussian_bumps(bumps: Vec<GaussianBump>) -> Result<Self> {
        let dim = bumps
            .first()
            .map(|b| b.center.len())
            .ok_or_else(|| Error::invalid("at least one bump is required"))?;
        for b in &bumps {
            if b.center.len() != dim || dim == 0 {
                return Err(Error::invalid("bump centers must share a positive dimension"));
            }
            if !(b.width > 0.0) || !b.amplitude.is_finite() {
                return Err(Error::invalid("bump width must be positive and amplitude finite"));
            }
        }
        Ok(Self {
            dim,
            kind: NullKind::GaussianBumpSum(bumps),
        })
    }

    pub fn exponential_envelope(
        amplitude: f64,
        center: Vec<f64>,
        scale: f64,
        wave: Vec<f64>,
    ) -> Result<Self> {
        let dim = center.len();
        if dim == 0 || wave.len() != dim {
            return Err(Error::invalid("center and wave vector must share a positive dimension"));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid("envelope scale must be positive"));
        }
        Ok(Self {
            dim,
            kind: NullKind::ExponentialEnvelope {
                amplitude,
                center,
                scale,
                wave,
            },
        })
    }

    pub(crate) fn density_transform(t: DensityTransform) -> Self {
        Self {
            dim: 1,
            kind: NullKind::FsDensityPart(t),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NullKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, NullKind::GaussianBumpSum(b) if b.is_empty())
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match &self.kind {
            NullKind::GaussianBumpSum(bumps) => bumps
                .iter()
                .map(|b| {
                    let r2: f64 = y.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum();
                    b.amplitude * (-r2 / (b.width * b.width)).exp()
                })
                .sum(),
            NullKind::ExponentialEnvelope {
                amplitude,
                center,
                scale,
                wave,
            } => {
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for ((x, c), k) in y.iter().zip(center).zip(wave) {
                    r2 += (x - c) * (x - c);
                    phase += k * (x - c);
                }
                amplitude * (-r2.sqrt() / scale).exp() * phase.cos()
            }
            NullKind::FsDensityPart(t) => t.eval(y[0]),
        }
    }

    /// Upper bound on `|B(0;R)|^{-1} ∫_{B(0;R)} |f|`.
    pub fn decay_bound(&self, radius: f64) -> f64 {
        let vol = ball_volume(self.dim, radius);
        match &self.kind {
            NullKind::GaussianBumpSum(bumps) => {
                let mass: f64 = bumps
                    .iter()
                    .map(|b| b.amplitude.abs() * (PI.sqrt() * b.width).powi(self.dim as i32))
                    .sum();
                (mass / vol).min(self.sup_bound())
            }
            NullKind::ExponentialEnvelope {
                amplitude, scale, ..
            } => {
                // ∫ e^{-r/s} dy = s^d Γ(d) |S^{d-1}|
                let d = self.dim as i32;
                let sphere = 2.0 * PI.powf(self.dim as f64 / 2.0) / gamma_half(self.dim);
                let fact: f64 = (1..self.dim).map(|k| k as f64).product();
                let mass = amplitude.abs() * scale.powi(d) * fact * sphere;
                (mass / vol).min(amplitude.abs())
            }
            NullKind::FsDensityPart(t) => t.decay_bound(radius),
        }
    }

    /// Radius beyond which [`decay_bound`](Self::decay_bound) is nonincreasing.
    pub fn decay_onset(&self) -> f64 {
        match &self.kind {
            NullKind::FsDensityPart(t) => t.crossover(),
            _ => 0.0,
        }
    }

    fn sup_bound(&self) -> f64 {
        match &self.kind {
            NullKind::GaussianBumpSum(bumps) => bumps.iter().map(|b| b.amplitude.abs()).sum(),
            NullKind::ExponentialEnvelope { amplitude, .. } => amplitude.abs(),
            NullKind::FsDensityPart(t) => t.l1_mass(),
        }
    }
}

impl DensityTransform {
    pub fn eval(&self, x: f64) -> f64 {
        let half = 0.5 * x * self.spacing;
        let sinc = if half.abs() < 1e-8 {
            1.0 - half * half / 6.0
        } else {
            half.sin() / half
        };
        let sum: f64 = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, r)| r * (x * (self.start + i as f64 * self.spacing)).cos())
            .sum();
        self.spacing * sinc * sinc * sum
    }

    /// `∫ |ρ_PL|` bound, also a sup bound for the transform.
    pub(crate) fn l1_mass(&self) -> f64 {
        self.spacing * self.samples.iter().map(|r| r.abs()).sum::<f64>()
    }

    /// Total variation of the interpolant (it vanishes one cell beyond each end).
    pub(crate) fn total_variation(&self) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        self.samples[0].abs()
            + self.samples[n - 1].abs()
            + self.samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    }

    fn crossover(&self) -> f64 {
        let b0 = self.l1_mass();
        if b0 == 0.0 {
            0.0
        } else {
            self.total_variation() / b0
        }
    }

    /// From `|f(x)| ≤ min(B0, TV/|x|)` integrated over `[-R, R]`.
    fn decay_bound(&self, radius: f64) -> f64 {
        let b0 = self.l1_mass();
        let b1 = self.total_variation();
        if b0 == 0.0 {
            return 0.0;
        }
        let xs = b1 / b0;
        if radius <= xs {
            b0
        } else {
            b1 * (1.0 + (radius / xs).ln()) / radius
        }
    }
}

/// `Γ(d/2)`.
pub(crate) fn gamma_half(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x + 0.5 < d as f64 / 2.0 + 1e-12 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

pub(crate) fn ball_volume(dim: usize, radius: f64) -> f64 {
    PI.powf(dim as f64 / 2.0) / gamma_half(dim + 2) * radius.powi(dim as i32)
}

impl Evaluate for NullFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.eval(y)
    }
}
