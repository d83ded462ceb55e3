use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradient, ParameterStore};
use crate::error::Result;

/// Anything with a parameter store and a scalar loss on some sample.
pub trait Differentiable {
    type Sample: ?Sized;

    fn parameters(&self) -> &ParameterStore;
    fn parameters_mut(&mut self) -> &mut ParameterStore;
    fn loss(&self, sample: &Self::Sample) -> Result<f64>;
    fn loss_and_gradient(&self, sample: &Self::Sample) -> Result<(f64, Gradient)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub worst_slot: String,
    /// Analytic and finite-difference values at the worst coordinate.
    pub worst_pair: (f64, f64),
    pub tolerance: f64,
    pub passed: bool,
}

/// Denominator floor of the relative error. Central differences at
/// `eps = 1e-4` carry absolute roundoff of order `1e-12` on unit-scale
/// losses, so a gradient of `1e-9` cannot be resolved to `1e-4` relative;
/// below the floor the comparison becomes absolute (`|a - n| < tol·1e-7`).
pub const REL_ERROR_FLOOR: f64 = 1e-7;

/// Minimum number of coordinates inspected when the model has that many.
pub const MIN_CHECKED: usize = 200;

/// Compares the analytic gradient with central finite differences on a
/// seeded random subset of `n_coords` coordinates (all of them for small
/// models).
pub fn gradient_check<M: Differentiable>(
    model: &mut M,
    sample: &M::Sample,
    eps: f64,
    tolerance: f64,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradient(sample)?;
    let total = model.parameters().len();
    let n = n_coords.max(MIN_CHECKED).min(total);
    let mut coords = sample_indices(&mut ChaCha8Rng::seed_from_u64(seed), total, n).into_vec();
    coords.sort_unstable();
    check_coordinates(model, sample, &analytic, &coords, eps, tolerance)
}

/// Finite-difference comparison on explicit coordinates against a given
/// analytic gradient.
pub fn check_coordinates<M: Differentiable>(
    model: &mut M,
    sample: &M::Sample,
    analytic: &Gradient,
    coords: &[usize],
    eps: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut worst = (0.0f64, 0usize, (0.0, 0.0));
    for &i in coords {
        let original = model.parameters().values()[i];
        model.parameters_mut().values_mut()[i] = original + eps;
        let plus = model.loss(sample);
        model.parameters_mut().values_mut()[i] = original - eps;
        let minus = model.loss(sample);
        model.parameters_mut().values_mut()[i] = original;
        let numeric = (plus? - minus?) / (2.0 * eps);
        let exact = analytic.values()[i];
        let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        if rel > worst.0 || !rel.is_finite() {
            worst = (rel, i, (exact, numeric));
        }
    }
    let worst_slot = slot_name(model.parameters(), worst.1);
    Ok(GradCheckReport {
        checked: coords.len(),
        max_rel_error: worst.0,
        worst_coordinate: worst.1,
        worst_slot,
        worst_pair: worst.2,
        tolerance,
        passed: worst.0 < tolerance,
    })
}

fn slot_name(store: &ParameterStore, coordinate: usize) -> String {
    store
        .slots()
        .iter()
        .find(|s| (s.offset..s.offset + s.len()).contains(&coordinate))
        .map(|s| s.name.clone())
        .unwrap_or_default()
}
