use crate::ap::quad::{Region, Rule};
use crate::ap::{Evaluate, TrigPolynomial};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MeanValueEstimate {
    /// Average over the largest ball.
    pub value: f64,
    pub radii_used: Vec<f64>,
    pub averages: Vec<f64>,
    /// Max pairwise deviation among the last three averages.
    pub tail_spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeminormEstimate {
    pub value: f64,
    pub lengths: Vec<f64>,
    /// `p`-th root of the shell averages of `|f|^p`, one per length.
    pub values: Vec<f64>,
    pub tail_spread: f64,
}

/// Exact mean value of a trigonometric polynomial.
pub fn mean_value_exact(f: &TrigPolynomial) -> f64 {
    f.mean_value()
}

fn tail_spread(values: &[f64]) -> f64 {
    let tail = &values[values.len().saturating_sub(3)..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn check_schedule(xs: &[f64], min_len: usize, what: &str) -> Result<()> {
    if xs.len() < min_len {
        return Err(Error::invalid(format!(
            "{what} schedule needs at least {min_len} entries"
        )));
    }
    if xs.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid(format!("{what} must be positive and finite")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Averages `f` over `B(0;R)` for each radius.
///
/// `samples` is the number of midpoint cells per axis for `d ≤ 2` and the
/// number of quasi-random points for `d > 2`. Fails with `NonConvergent` when
/// the spread of the last three averages exceeds `tol`.
pub fn mean_value_numeric(
    f: &dyn Evaluate,
    radii: &[f64],
    samples: usize,
    tol: f64,
) -> Result<MeanValueEstimate> {
    check_schedule(radii, 3, "radii")?;
    let averages: Vec<f64> = radii
        .iter()
        .map(|&r| Rule::new(f.dim(), Region::Ball(r), samples).average(|y| f.value(y)))
        .collect();
    let spread = tail_spread(&averages);
    let value = *averages.last().unwrap();
    if spread > tol {
        return Err(Error::NonConvergent {
            estimate: value,
            spread,
            tolerance: tol,
        });
    }
    Ok(MeanValueEstimate {
        value,
        radii_used: radii.to_vec(),
        averages,
        tail_spread: spread,
    })
}

/// Besicovitch `p`-seminorm `lim ((2L)^{-d} ∫_{[-L,L]^d} |f|^p)^{1/p}`.
///
/// Each entry averages over the shell between the previous and the current
/// cube (the first entry uses the full cube). Shell averages have the same
/// limit as cube averages for any function with a mean value, and they stop
/// seeing mass that stays near the origin.
pub fn besicovitch_seminorm(
    f: &dyn Evaluate,
    p: f64,
    lengths: &[f64],
    samples: usize,
    tol: f64,
) -> Result<SeminormEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid("seminorm exponent must lie in [1, ∞)"));
    }
    check_schedule(lengths, 2, "lengths")?;
    let values: Vec<f64> = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let region = if i == 0 {
                Region::Cube(l)
            } else {
                Region::Shell {
                    inner: lengths[i - 1],
                    outer: l,
                }
            };
            Rule::new(f.dim(), region, samples)
                .average(|y| f.value(y).abs().powf(p))
                .powf(1.0 / p)
        })
        .collect();
    let spread = tail_spread(&values[1..]);
    let value = *values.last().unwrap();
    if spread > tol {
        return Err(Error::NonConvergent {
            estimate: value,
            spread,
            tolerance: tol,
        });
    }
    Ok(SeminormEstimate {
        value,
        lengths: lengths.to_vec(),
        values,
        tail_spread: spread,
    })
}
