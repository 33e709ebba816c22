use crate::error::{Error, Result};

/// Uniform grid on a box `origin + [lower, upper]` with spacing `h`.
///
/// Nodes sit at `origin + lower + i·h`. The origin is kept apart from the
/// box so that translated copies of a grid share node offsets exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: Vec<f64>,
    lower: Vec<f64>,
    cells: Vec<usize>,
    h: f64,
}

/// Stencil directions: the axes, plus the two diagonals in two dimensions.
const STENCIL_2D: [[i64; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim {
            return Err(Error::invalid("grid corners must both have dimension 1 or 2"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let mut cells = Vec::with_capacity(dim);
        for (a, b) in lower.iter().zip(upper) {
            let len = b - a;
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::invalid("grid box is degenerate"));
            }
            let n = (len / h).round();
            if n < 2.0 || (n * h - len).abs() > 1e-9 * len.max(1.0) {
                return Err(Error::invalid(format!(
                    "side length {len} is not a multiple (≥ 2) of the spacing {h}"
                )));
            }
            cells.push(n as usize);
        }
        Ok(Self {
            dim,
            origin: vec![0.0; dim],
            lower: lower.to_vec(),
            cells,
            h,
        })
    }

    /// `[-L, L]^d` with `L` rounded up to a whole number of cells.
    pub fn centered(dim: usize, half_length: f64, h: f64) -> Result<Self> {
        if !(half_length > 0.0) {
            return Err(Error::invalid("half length must be positive"));
        }
        let k = (half_length / h - 1e-9).ceil().max(1.0);
        let l = k * h;
        Self::new(&vec![-l; dim], &vec![l; dim], h)
    }

    /// Same node offsets around a new origin.
    pub fn translated(&self, origin: &[f64]) -> Self {
        assert_eq!(origin.len(), self.dim);
        let mut g = self.clone();
        g.origin = origin.to_vec();
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn lower(&self) -> Vec<f64> {
        self.origin.iter().zip(&self.lower).map(|(o, l)| o + l).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| self.origin[k] + (self.lower[k] + self.cells[k] as f64 * self.h))
            .collect()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stencil(&self) -> &'static [[i64; 2]] {
        match self.dim {
            1 => &STENCIL_2D[..1],
            _ => &STENCIL_2D,
        }
    }

    /// `|v|²` of stencil direction `k`.
    pub fn stencil_norm2(&self, k: usize) -> f64 {
        if k < 2 {
            1.0
        } else {
            2.0
        }
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        match self.dim {
            1 => [node, 0],
            _ => {
                let nx = self.cells[0] + 1;
                [node % nx, node / nx]
            }
        }
    }

    pub fn node_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] + (self.cells[0] + 1) * idx[1],
        }
    }

    /// Node offset from the origin.
    pub fn offset(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        (0..self.dim)
            .map(|k| self.lower[k] + idx[k] as f64 * self.h)
            .collect()
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.offset(node)
            .iter()
            .zip(&self.origin)
            .map(|(x, o)| o + x)
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim).any(|k| idx[k] == 0 || idx[k] == self.cells[k])
    }

    /// Neighbor `node + s·v_k` (`s = ±1`); the node must be interior.
    pub fn neighbor(&self, node: usize, k: usize, sign: i64) -> usize {
        let idx = self.multi_index(node);
        let v = self.stencil()[k];
        let mut out = [0usize; 2];
        for a in 0..self.dim {
            out[a] = (idx[a] as i64 + sign * v[a]) as usize;
        }
        self.node_index(out)
    }

    /// Node closest to the origin (the center of a centered grid).
    pub fn center_node(&self) -> usize {
        let mut idx = [0usize; 2];
        for (k, slot) in idx.iter_mut().enumerate().take(self.dim) {
            *slot = (-self.lower[k] / self.h).round().clamp(0.0, self.cells[k] as f64) as usize;
        }
        self.node_index(idx)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.is_boundary(n)).collect()
    }

    /// Directional second differences `Δ²_v u` at an interior node.
    pub fn second_differences(&self, values: &[f64], node: usize, out: &mut [f64]) {
        let h2 = self.h * self.h;
        let u = values[node];
        for (k, slot) in out.iter_mut().enumerate().take(self.stencil().len()) {
            let p = values[self.neighbor(node, k, 1)];
            let m = values[self.neighbor(node, k, -1)];
            *slot = (p - 2.0 * u + m) / (h2 * self.stencil_norm2(k));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_round_trip() {
        let g = Grid::new(&[0.0, -1.0], &[1.0, 1.0], 0.25).unwrap();
        assert_eq!(g.cells(), &[4, 8]);
        assert_eq!(g.len(), 45);
        for n in 0..g.len() {
            assert_eq!(g.node_index(g.multi_index(n)), n);
        }
        assert_eq!(g.interior_nodes().len(), 3 * 7);
        let c = Grid::centered(2, 1.0, 0.25).unwrap();
        assert_eq!(c.point(c.center_node()), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_misaligned_boxes() {
        assert!(Grid::new(&[0.0], &[1.0], 0.3).is_err());
        assert!(Grid::new(&[0.0], &[0.0], 0.1).is_err());
        assert!(Grid::new(&[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn translated_grid_keeps_offsets() {
        let g = Grid::centered(1, 2.0, 0.5).unwrap();
        let t = g.translated(&[10.0]);
        for n in 0..g.len() {
            assert_eq!(g.offset(n), t.offset(n));
            assert_eq!(t.point(n)[0], 10.0 + g.offset(n)[0]);
        }
    }
}
