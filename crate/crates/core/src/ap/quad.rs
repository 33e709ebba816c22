//! Deterministic averaging rules over balls, cubes and cube shells.
//!
//! For `d ≤ 2` the rules are midpoint grids on the bounding cube with `n`
//! cells per axis; for `d > 2` they use `n` points of the Kronecker sequence
//! with generalized golden-ratio increments.

use std::f64::consts::PI;

use crate::exec;

#[derive(Clone, Copy, Debug)]
pub(crate) enum Region {
    Ball(f64),
    Cube(f64),
    /// `[-outer, outer]^d` minus `[-inner, inner]^d`.
    Shell { inner: f64, outer: f64 },
    /// Same support as `Shell` with a `sin²` taper in the sup-norm radius.
    TaperedShell { inner: f64, outer: f64 },
}

impl Region {
    fn half_width(&self) -> f64 {
        match *self {
            Region::Ball(r) | Region::Cube(r) => r,
            Region::Shell { outer, .. } | Region::TaperedShell { outer, .. } => outer,
        }
    }

    fn weight(&self, y: &[f64]) -> f64 {
        match *self {
            Region::Ball(r) => {
                let r2: f64 = y.iter().map(|x| x * x).sum();
                if r2 <= r * r {
                    1.0
                } else {
                    0.0
                }
            }
            Region::Cube(_) => 1.0,
            Region::Shell { inner, .. } => {
                let s = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if s > inner {
                    1.0
                } else {
                    0.0
                }
            }
            Region::TaperedShell { inner, outer } => {
                let s = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if s <= inner {
                    0.0
                } else {
                    let t = (s - inner) / (outer - inner);
                    (PI * t).sin().powi(2)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Rule {
    dim: usize,
    region: Region,
    n: usize,
    alpha: [f64; 8],
}

impl Rule {
    pub(crate) fn new(dim: usize, region: Region, n: usize) -> Self {
        let mut alpha = [0.0; 8];
        if dim > 2 {
            assert!(dim <= alpha.len(), "quasi-random rule supports d ≤ 8");
            // root of x^{d+1} = x + 1
            let mut phi = 2.0f64;
            for _ in 0..64 {
                phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
            }
            for (i, a) in alpha.iter_mut().take(dim).enumerate() {
                *a = phi.powi(-(i as i32 + 1)).fract();
            }
        }
        Self {
            dim,
            region,
            n: n.max(1),
            alpha,
        }
    }

    pub(crate) fn len(&self) -> usize {
        if self.dim <= 2 {
            self.n.pow(self.dim as u32)
        } else {
            self.n
        }
    }

    /// Writes node `i` into `y` and returns its weight.
    pub(crate) fn node(&self, i: usize, y: &mut [f64]) -> f64 {
        let r = self.region.half_width();
        if self.dim <= 2 {
            let h = 2.0 * r / self.n as f64;
            let mut rest = i;
            for x in y.iter_mut().take(self.dim) {
                let k = rest % self.n;
                rest /= self.n;
                *x = -r + (k as f64 + 0.5) * h;
            }
        } else {
            for (j, x) in y.iter_mut().take(self.dim).enumerate() {
                let u = (0.5 + (i as f64 + 1.0) * self.alpha[j]).fract();
                *x = r * (2.0 * u - 1.0);
            }
        }
        self.region.weight(&y[..self.dim])
    }

    /// Weighted average of `g` over the rule.
    pub(crate) fn average<G>(&self, g: G) -> f64
    where
        G: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let (num, den) = exec::sum_pair_range(self.len(), |i| {
            let mut y = [0.0; 8];
            let w = self.node(i, &mut y);
            if w == 0.0 {
                (0.0, 0.0)
            } else {
                (w * g(&y[..self.dim]), w)
            }
        });
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}
