use crate::ap::null::DensityTransform;
use crate::ap::{Evaluate, NullFunction, TrigPolynomial};
use crate::error::{Error, Result};

/// `f = ap_part + null_part`.
#[derive(Clone, Debug, PartialEq)]
pub struct WStarAPFunction {
    pub ap_part: TrigPolynomial,
    pub null_part: NullFunction,
}

impl WStarAPFunction {
    pub fn new(ap_part: TrigPolynomial, null_part: NullFunction) -> Result<Self> {
        if ap_part.dim() != null_part.dim() {
            return Err(Error::invalid(format!(
                "almost periodic part has dimension {} but null part has {}",
                ap_part.dim(),
                null_part.dim()
            )));
        }
        Ok(Self { ap_part, null_part })
    }

    pub fn from_ap(ap_part: TrigPolynomial) -> Self {
        let dim = ap_part.dim();
        Self {
            ap_part,
            null_part: NullFunction::zero(dim),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.ap_part.eval(y) + self.null_part.eval(y)
    }

    pub fn mean_value(&self) -> f64 {
        self.ap_part.mean_value()
    }
}

impl Evaluate for WStarAPFunction {
    fn dim(&self) -> usize {
        self.ap_part.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.eval(y)
    }
}

/// Point mass `weight` at `frequency` in a one-dimensional spectral measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsAtom {
    pub frequency: f64,
    pub weight: f64,
}

/// Continuous density on `[start, end]`, vanishing at both ends, sampled on
/// `cells` uniform cells.
pub struct FsDensity<'a> {
    pub start: f64,
    pub end: f64,
    pub cells: usize,
    pub density: &'a (dyn Fn(f64) -> f64 + Sync),
}

const RESOLUTION_TOL: f64 = 1e-3;

/// Builds `f(x) = Σ w cos(ξ x) + ∫ cos(x ξ) ρ(ξ) dξ`.
///
/// The atoms form the almost periodic part. The density is replaced by its
/// piecewise-linear interpolant, whose transform is evaluated in closed form
/// and forms the null part. Fails with a quadrature error when the grid does
/// not resolve the density (midpoint interpolation error above 10⁻³ of its
/// maximum) or when the density does not vanish at the ends of its support.
pub fn fs_synthesize(atoms: &[FsAtom], density: Option<&FsDensity<'_>>) -> Result<WStarAPFunction> {
    let mut ap = TrigPolynomial::zero(1);
    for a in atoms {
        if !a.frequency.is_finite() || !a.weight.is_finite() {
            return Err(Error::invalid("non-finite atom"));
        }
        ap.add_term(&[a.frequency], a.weight, 0.0);
    }
    let null = match density {
        None => NullFunction::zero(1),
        Some(d) => NullFunction::density_transform(sample_density(d)?),
    };
    WStarAPFunction::new(ap, null)
}

fn sample_density(d: &FsDensity<'_>) -> Result<DensityTransform> {
    if !(d.end > d.start) || !d.start.is_finite() || !d.end.is_finite() {
        return Err(Error::invalid("density support must be a bounded nondegenerate interval"));
    }
    if d.cells < 2 {
        return Err(Error::Quadrature("density grid needs at least two cells".into()));
    }
    let h = (d.end - d.start) / d.cells as f64;
    let nodes: Vec<f64> = (0..=d.cells).map(|i| (d.density)(d.start + i as f64 * h)).collect();
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("density is not finite on the grid".into()));
    }
    let scale = nodes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(DensityTransform {
            start: d.start,
            spacing: h,
            samples: Vec::new(),
        });
    }
    let ends = nodes[0].abs().max(nodes[d.cells].abs());
    if ends > RESOLUTION_TOL * scale {
        return Err(Error::Quadrature(format!(
            "density does not vanish at the ends of its support (|ρ| = {ends:.3e})"
        )));
    }
    let worst = (0..d.cells)
        .map(|i| {
            let mid = (d.density)(d.start + (i as f64 + 0.5) * h);
            (mid - 0.5 * (nodes[i] + nodes[i + 1])).abs()
        })
        .fold(0.0f64, f64::max);
    if worst > RESOLUTION_TOL * scale {
        return Err(Error::Quadrature(format!(
            "density grid too coarse: midpoint interpolation error {worst:.3e}"
        )));
    }
    // The end nodes are (numerically) zero; the interpolant's hat functions
    // sit on the interior nodes.
    Ok(DensityTransform {
        start: d.start + h,
        spacing: h,
        samples: nodes[1..d.cells].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoothed_indicator(x: f64) -> f64 {
        // C¹ bump equal to 1 on [-0.5, 0.5], 0 outside [-1, 1]
        let a = x.abs();
        if a <= 0.5 {
            1.0
        } else if a >= 1.0 {
            0.0
        } else {
            let t = (a - 0.5) / 0.5;
            0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
    }

    fn simpson_transform(x: f64) -> f64 {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let g = |s: f64| (x * s).cos() * smoothed_indicator(s);
        let mut acc = g(-1.0) + g(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(-1.0 + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn single_atom_is_a_cosine() {
        let f = fs_synthesize(&[FsAtom { frequency: 1.0, weight: 1.0 }], None).unwrap();
        for x in [0.0, 0.4, -3.0, 17.0] {
            assert!((f.eval(&[x]) - x.cos()).abs() < 1e-15);
        }
        assert!(f.null_part.is_zero());
    }

    #[test]
    fn density_part_matches_direct_quadrature() {
        let dens = FsDensity {
            start: -1.0,
            end: 1.0,
            cells: 4000,
            density: &smoothed_indicator,
        };
        let f = fs_synthesize(&[], Some(&dens)).unwrap();
        assert!(f.ap_part.is_empty() && f.ap_part.constant_term() == 0.0);
        for x in [0.0, 5.0, 50.0] {
            let direct = simpson_transform(x);
            assert!((f.eval(&[x]) - direct).abs() < 1e-6, "x={x}: {} vs {direct}", f.eval(&[x]));
        }
    }

    #[test]
    fn mixed_synthesis_is_linear() {
        let dens = FsDensity {
            start: -1.0,
            end: 1.0,
            cells: 2000,
            density: &smoothed_indicator,
        };
        let atoms = [FsAtom { frequency: 2.0, weight: 0.5 }];
        let both = fs_synthesize(&atoms, Some(&dens)).unwrap();
        let a = fs_synthesize(&atoms, None).unwrap();
        let b = fs_synthesize(&[], Some(&dens)).unwrap();
        for x in [0.1, 2.5, 30.0] {
            assert!((both.eval(&[x]) - a.eval(&[x]) - b.eval(&[x])).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let dens = FsDensity {
            start: -1.0,
            end: 1.0,
            cells: 3,
            density: &smoothed_indicator,
        };
        assert!(matches!(fs_synthesize(&[], Some(&dens)), Err(Error::Quadrature(_))));
        let open = FsDensity {
            start: -1.0,
            end: 1.0,
            cells: 100,
            density: &|_| 1.0,
        };
        assert!(matches!(fs_synthesize(&[], Some(&open)), Err(Error::Quadrature(_))));
    }

    #[test]
    fn density_part_decays() {
        let dens = FsDensity {
            start: -1.0,
            end: 1.0,
            cells: 1000,
            density: &smoothed_indicator,
        };
        let f = fs_synthesize(&[], Some(&dens)).unwrap();
        let r0 = f.null_part.decay_onset();
        let mut prev = f64::INFINITY;
        for r in [r0 + 1.0, 10.0 * (r0 + 1.0), 1e3 * (r0 + 1.0), 1e6] {
            let b = f.null_part.decay_bound(r);
            assert!(b <= prev);
            prev = b;
        }
        assert!(prev < 1e-4);
    }
}
