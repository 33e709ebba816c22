use crate::error::{Error, Result};

/// Symmetric `d × d` matrix for `d ∈ {1, 2}`, stored as its upper triangle
/// `[m11]` or `[m11, m12, m22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: [f64; 3],
}

impl SymMatrix {
    pub fn new(dim: usize, upper: &[f64]) -> Result<Self> {
        let need = dim * (dim + 1) / 2;
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} is not supported (1 or 2)")));
        }
        if upper.len() != need {
            return Err(Error::invalid(format!(
                "a {dim}×{dim} symmetric matrix has {need} upper-triangle entries, got {}",
                upper.len()
            )));
        }
        if upper.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let mut u = [0.0; 3];
        u[..need].copy_from_slice(upper);
        Ok(Self { dim, upper: u })
    }

    pub fn scalar(m: f64) -> Self {
        Self {
            dim: 1,
            upper: [m, 0.0, 0.0],
        }
    }

    pub fn two(m11: f64, m12: f64, m22: f64) -> Self {
        Self {
            dim: 2,
            upper: [m11, m12, m22],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::identity(dim).scale(0.0)
    }

    pub fn identity(dim: usize) -> Self {
        match dim {
            1 => Self::scalar(1.0),
            2 => Self::two(1.0, 0.0, 1.0),
            _ => panic!("dimension {dim} is not supported"),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        match values {
            [a] => Self::scalar(*a),
            [a, b] => Self::two(*a, 0.0, *b),
            _ => panic!("dimension {} is not supported", values.len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper-triangle entries, row by row.
    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim * (self.dim + 1) / 2]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (self.dim, i, j) {
            (1, 0, 0) => self.upper[0],
            (2, 0, 0) => self.upper[0],
            (2, 0, 1) => self.upper[1],
            (2, 1, 1) => self.upper[2],
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut u = self.upper;
        for (a, b) in u.iter_mut().zip(other.upper) {
            *a += b;
        }
        Self { dim: self.dim, upper: u }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut u = self.upper;
        for a in &mut u {
            *a *= t;
        }
        Self { dim: self.dim, upper: u }
    }

    pub fn trace(&self) -> f64 {
        match self.dim {
            1 => self.upper[0],
            _ => self.upper[0] + self.upper[2],
        }
    }

    /// `tr(self · other)`.
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        match self.dim {
            1 => self.upper[0] * other.upper[0],
            _ => {
                self.upper[0] * other.upper[0]
                    + 2.0 * self.upper[1] * other.upper[1]
                    + self.upper[2] * other.upper[2]
            }
        }
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.upper[0]],
            _ => {
                let [a, b, c] = self.upper;
                let mean = 0.5 * (a + c);
                let r = (0.5 * (a - c)).hypot(b);
                vec![mean - r, mean + r]
            }
        }
    }

    /// Unit eigenvectors matching [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> Vec<Vec<f64>> {
        match self.dim {
            1 => vec![vec![1.0]],
            _ => {
                let [a, b, c] = self.upper;
                // angle of the eigenvector of the larger eigenvalue
                let theta = 0.5 * (2.0 * b).atan2(a - c);
                let (s, co) = theta.sin_cos();
                vec![vec![-s, co], vec![co, s]]
            }
        }
    }

    /// `Σ_i e_i v_i v_iᵀ`.
    pub fn from_spectrum(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        match values.len() {
            1 => Self::scalar(values[0]),
            _ => {
                let mut u = [0.0; 3];
                for (e, v) in values.iter().zip(vectors) {
                    u[0] += e * v[0] * v[0];
                    u[1] += e * v[0] * v[1];
                    u[2] += e * v[1] * v[1];
                }
                Self::two(u[0], u[1], u[2])
            }
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// Sum of absolute eigenvalues; equals the trace on the PSD cone.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|e| e.abs()).sum()
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }

    /// `BᵀB` for a `d × d` matrix `b` given row-major.
    pub fn gram(dim: usize, b: &[f64]) -> Self {
        match dim {
            1 => Self::scalar(b[0] * b[0]),
            _ => Self::two(
                b[0] * b[0] + b[2] * b[2],
                b[0] * b[1] + b[2] * b[3],
                b[1] * b[1] + b[3] * b[3],
            ),
        }
    }
}
