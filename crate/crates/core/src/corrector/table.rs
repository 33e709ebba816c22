use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::exec;
use crate::fields::Phase;
use crate::operators::{EllipticOperator, SymMatrix};

use super::{estimate_effective, CorrectorOptions};

/// Anything that can produce `(F̄(M), extrapolation residual)`.
pub trait EffectiveOperator: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, m: &SymMatrix) -> Result<(f64, f64)>;
}

/// Runs the corrector estimate for every query.
pub struct OnDemand<'a> {
    pub op: &'a EllipticOperator,
    pub omega: Phase,
    pub deltas: Vec<f64>,
    pub opts: CorrectorOptions,
}

impl EffectiveOperator for OnDemand<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn evaluate(&self, m: &SymMatrix) -> Result<(f64, f64)> {
        let e = estimate_effective(self.op, &self.omega, m, &self.deltas, &self.opts)?;
        Ok((e.value, e.residual))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub m: SymMatrix,
    pub value: f64,
    pub deltas: Vec<f64>,
    pub residual: f64,
}

impl TableEntry {
    pub fn delta_min(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn key(m: &SymMatrix) -> Vec<u64> {
    m.upper()[..m.dim() * (m.dim() + 1) / 2]
        .iter()
        .map(|&x| if x == 0.0 { 0 } else { x.to_bits() })
        .collect()
}

/// Tabulated `F̄` for one operator, keyed by the upper triangle of `M`.
#[derive(Clone, Debug)]
pub struct EffectiveTable {
    pub dim: usize,
    pub operator: String,
    /// Phase the entries were computed at; `None` marks an ω-independent table.
    pub omega: Option<Phase>,
    entries: Vec<TableEntry>,
    index: HashMap<Vec<u64>, usize>,
}

impl PartialEq for EffectiveTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.operator == other.operator
            && self.omega == other.omega
            && self.entries == other.entries
    }
}

impl EffectiveTable {
    pub fn new(dim: usize, operator: impl Into<String>, omega: Option<Phase>) -> Self {
        Self {
            dim,
            operator: operator.into(),
            omega,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Inserts or replaces the entry for `entry.m`.
    pub fn insert(&mut self, entry: TableEntry) {
        assert_eq!(entry.m.dim(), self.dim, "table entry has the wrong dimension");
        match self.index.get(&key(&entry.m)) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.index.insert(key(&entry.m), self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn get(&self, m: &SymMatrix) -> Option<&TableEntry> {
        self.index.get(&key(m)).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    /// Estimates every `M` in `ms` (in parallel) and collects the results.
    pub fn compute(
        op: &EllipticOperator,
        omega: Option<&Phase>,
        ms: &[SymMatrix],
        deltas: &[f64],
        opts: &CorrectorOptions,
        label: impl Into<String>,
    ) -> Result<Self> {
        let w = omega.cloned().unwrap_or_else(|| Phase::zero(1));
        let est = exec::try_map_range(ms.len(), |i| estimate_effective(op, &w, &ms[i], deltas, opts))?;
        let mut t = Self::new(op.dim(), label, omega.cloned());
        for (m, e) in ms.iter().zip(est) {
            t.insert(TableEntry {
                m: *m,
                value: e.value,
                deltas: e.deltas,
                residual: e.residual,
            });
        }
        Ok(t)
    }

    fn entry_names(&self) -> &'static [&'static str] {
        match self.dim {
            1 => &["m11"],
            _ => &["m11", "m12", "m22"],
        }
    }

    /// CSV with `# operator:` and `# omega:` header lines, then
    /// `m-entries..., fbar, delta_min, residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# operator: {}", self.operator)?;
        match &self.omega {
            None => writeln!(w, "# omega: independent")?,
            Some(p) => {
                let a: Vec<String> = p.angles().iter().map(|x| x.to_string()).collect();
                writeln!(w, "# omega: {}", a.join(" "))?
            }
        }
        writeln!(w, "{},fbar,delta_min,residual", self.entry_names().join(","))?;
        for e in &self.entries {
            for x in &e.m.upper()[..self.entry_names().len()] {
                write!(w, "{x},")?;
            }
            writeln!(w, "{},{},{:e}", e.value, e.delta_min(), e.residual)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("effective table: {msg}"));
        let mut operator = String::new();
        let mut omega = None;
        let mut dim = None;
        let mut table: Option<Self> = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# operator:") {
                operator = rest.trim().to_string();
                continue;
            }
            if let Some(rest) = line.strip_prefix("# omega:") {
                let rest = rest.trim();
                if rest != "independent" {
                    let a = rest
                        .split_whitespace()
                        .map(|s| s.parse::<f64>().map_err(|_| bad("unreadable phase")))
                        .collect::<Result<Vec<_>>>()?;
                    omega = Some(Phase::new(a));
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let Some(d) = dim else {
                dim = Some(match line.split(',').count() {
                    4 => 1,
                    6 => 2,
                    _ => return Err(bad("header must list 1 or 3 matrix entries")),
                });
                table = Some(Self::new(dim.unwrap(), operator.clone(), omega.clone()));
                continue;
            };
            let v = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("non-numeric field")))
                .collect::<Result<Vec<_>>>()?;
            let k = d * (d + 1) / 2;
            if v.len() != k + 3 {
                return Err(bad("row has the wrong number of fields"));
            }
            table.as_mut().unwrap().insert(TableEntry {
                m: SymMatrix::new(d, &v[..k])?,
                value: v[k],
                deltas: vec![v[k + 1]],
                residual: v[k + 2],
            });
        }
        table.ok_or_else(|| bad("missing header"))
    }
}

/// Tensor lattice of axis-aligned Hessians: `m11` in one dimension,
/// `diag(m11, m22)` in two.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    axes: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid("lattice needs one or two axes"));
        }
        for a in &axes {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid("lattice axes need at least two increasing nodes"));
            }
        }
        Ok(Self { axes })
    }

    /// `n` equally spaced nodes on `[lo, hi]` per axis.
    pub fn uniform(spec: &[(f64, f64, usize)]) -> Result<Self> {
        let axes = spec
            .iter()
            .map(|&(lo, hi, n)| {
                if n < 2 {
                    return Err(Error::invalid("lattice axes need at least two nodes"));
                }
                Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node_index(&self, idx: &[usize]) -> usize {
        match idx.len() {
            1 => idx[0],
            _ => idx[0] + self.axes[0].len() * idx[1],
        }
    }

    /// The matrix at lattice node `i`.
    pub fn node(&self, i: usize) -> SymMatrix {
        match self.dim() {
            1 => SymMatrix::scalar(self.axes[0][i]),
            _ => {
                let n0 = self.axes[0].len();
                SymMatrix::diag(&[self.axes[0][i % n0], self.axes[1][i / n0]])
            }
        }
    }

    pub fn nodes(&self) -> Vec<SymMatrix> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

/// Multilinear interpolant of `F̄` on a [`Lattice`]; nodes missing from the
/// backing table are filled on first use by the attached estimator.
pub struct TableInterpolant<'a> {
    lattice: Lattice,
    values: Vec<OnceLock<(f64, f64)>>,
    estimator: Option<Box<dyn EffectiveOperator + 'a>>,
}

/// Value, gradient with respect to the lattice coordinates, and the largest
/// residual among the cell corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    pub gradient: [f64; 2],
    pub residual: f64,
}

impl<'a> TableInterpolant<'a> {
    pub fn from_table(table: &EffectiveTable, lattice: Lattice) -> Result<Self> {
        if table.dim != lattice.dim() {
            return Err(Error::invalid("table and lattice dimensions differ"));
        }
        let values: Vec<OnceLock<(f64, f64)>> = (0..lattice.len()).map(|_| OnceLock::new()).collect();
        for (i, slot) in values.iter().enumerate() {
            if let Some(e) = table.get(&lattice.node(i)) {
                let _ = slot.set((e.value, e.residual));
            }
        }
        Ok(Self {
            lattice,
            values,
            estimator: None,
        })
    }

    /// An initially empty interpolant backed entirely by `estimator`.
    pub fn on_demand(lattice: Lattice, estimator: Box<dyn EffectiveOperator + 'a>) -> Result<Self> {
        if estimator.dim() != lattice.dim() {
            return Err(Error::invalid("estimator and lattice dimensions differ"));
        }
        Ok(Self {
            values: (0..lattice.len()).map(|_| OnceLock::new()).collect(),
            lattice,
            estimator: Some(estimator),
        })
    }

    pub fn with_estimator(mut self, estimator: Box<dyn EffectiveOperator + 'a>) -> Self {
        self.estimator = Some(estimator);
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Fills every missing node in parallel.
    pub fn fill(&self) -> Result<()> {
        exec::try_map_range(self.lattice.len(), |i| self.node_value(i, None).map(|_| ()))?;
        Ok(())
    }

    fn node_value(&self, i: usize, query: Option<&SymMatrix>) -> Result<(f64, f64)> {
        if let Some(v) = self.values[i].get() {
            return Ok(*v);
        }
        let Some(est) = &self.estimator else {
            let q = query.copied().unwrap_or_else(|| self.lattice.node(i));
            return Err(Error::TableRangeExceeded {
                query: q.upper()[..q.dim() * (q.dim() + 1) / 2].to_vec(),
            });
        };
        let v = est.evaluate(&self.lattice.node(i))?;
        Ok(*self.values[i].get_or_init(|| v))
    }

    /// Filled nodes as a table.
    pub fn to_table(&self, operator: impl Into<String>, omega: Option<Phase>, deltas: &[f64]) -> EffectiveTable {
        let mut t = EffectiveTable::new(self.lattice.dim(), operator, omega);
        for (i, slot) in self.values.iter().enumerate() {
            if let Some(&(value, residual)) = slot.get() {
                t.insert(TableEntry {
                    m: self.lattice.node(i),
                    value,
                    deltas: deltas.to_vec(),
                    residual,
                });
            }
        }
        t
    }

    /// Interpolates at lattice coordinates `x` (one per axis).
    pub fn interpolate(&self, x: &[f64]) -> Result<Interpolated> {
        let d = self.lattice.dim();
        let out_of_range = || Error::TableRangeExceeded { query: x.to_vec() };
        if x.len() != d {
            return Err(Error::invalid("query has the wrong number of coordinates"));
        }
        let mut cell = [0usize; 2];
        let mut t = [0.0; 2];
        let mut width = [1.0; 2];
        for k in 0..d {
            let a = &self.lattice.axes[k];
            if !(x[k] >= a[0] && x[k] <= a[a.len() - 1]) {
                return Err(out_of_range());
            }
            let j = a.partition_point(|&v| v <= x[k]).clamp(1, a.len() - 1) - 1;
            cell[k] = j;
            width[k] = a[j + 1] - a[j];
            t[k] = (x[k] - a[j]) / width[k];
        }
        let corner = |c: [usize; 2]| {
            let idx: Vec<usize> = (0..d).map(|k| cell[k] + c[k]).collect();
            let i = self.lattice.node_index(&idx);
            self.node_value(i, None)
        };
        let mut res = Interpolated {
            value: 0.0,
            gradient: [0.0; 2],
            residual: 0.0,
        };
        if d == 1 {
            let (a, ra) = corner([0, 0])?;
            let (b, rb) = corner([1, 0])?;
            res.value = a + t[0] * (b - a);
            res.gradient[0] = (b - a) / width[0];
            res.residual = ra.max(rb);
        } else {
            let (v00, r00) = corner([0, 0])?;
            let (v10, r10) = corner([1, 0])?;
            let (v01, r01) = corner([0, 1])?;
            let (v11, r11) = corner([1, 1])?;
            let (tx, ty) = (t[0], t[1]);
            res.value = (1.0 - tx) * (1.0 - ty) * v00 + tx * (1.0 - ty) * v10 + (1.0 - tx) * ty * v01 + tx * ty * v11;
            res.gradient[0] = ((1.0 - ty) * (v10 - v00) + ty * (v11 - v01)) / width[0];
            res.gradient[1] = ((1.0 - tx) * (v01 - v00) + tx * (v11 - v10)) / width[1];
            res.residual = r00.max(r10).max(r01).max(r11);
        }
        Ok(res)
    }
}

impl EffectiveOperator for TableInterpolant<'_> {
    fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// Only axis-aligned queries are covered in two dimensions.
    fn evaluate(&self, m: &SymMatrix) -> Result<(f64, f64)> {
        let x: Vec<f64> = match m.dim() {
            1 => vec![m.get(0, 0)],
            _ => {
                if m.get(0, 1) != 0.0 {
                    return Err(Error::TableRangeExceeded {
                        query: m.upper().to_vec(),
                    });
                }
                vec![m.get(0, 0), m.get(1, 1)]
            }
        };
        let r = self.interpolate(&x)?;
        Ok((r.value, r.residual))
    }
}
