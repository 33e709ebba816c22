//! Almost periodic function algebra: trigonometric polynomials, null
//! functions, mean values, Besicovitch seminorms and Bochner–Fejér extraction.

mod kernel;
mod mean;
mod null;
pub(crate) mod quad;
mod trig;
mod wstar;

pub use kernel::{
    ap_convolve, bochner_fejer_kernel, extract_ap_component, fejer_weight, module_frequency,
    ExtractOptions, ExtractSource, Extraction,
};
pub use mean::{
    besicovitch_seminorm, mean_value_exact, mean_value_numeric, MeanValueEstimate,
    SeminormEstimate,
};
pub use null::{DensityTransform, GaussianBump, NullFunction, NullKind};
pub use trig::{TrigPolynomial, TrigTerm};
pub use wstar::{fs_synthesize, FsAtom, FsDensity, WStarAPFunction};

/// A real function on `R^d` that can be sampled from several threads.
pub trait Evaluate: Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
}

/// Adapter turning a closure into an [`Evaluate`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

pub fn from_fn<F>(dim: usize, f: F) -> FnField<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    FnField { dim, f }
}

impl<F> Evaluate for FnField<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }
}
