use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::nn::ParamSet;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Tensor name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central finite differences of `loss` on at
/// least `samples` randomly chosen scalars.
///
/// Samples are stratified: every tensor contributes its share before the
/// remainder is drawn uniformly, so small bias vectors are never skipped.
pub fn gradient_check<F>(
    params: &mut ParamSet,
    analytic: &ParamSet,
    samples: usize,
    seed: u64,
    mut loss: F,
) -> GradientCheckReport
where
    F: FnMut(&ParamSet) -> f64,
{
    assert!(params.same_layout(analytic), "gradient layout mismatch");
    let mut rng = Pcg64::seed_from_u64(seed);
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let share = samples.div_ceil(sizes.len().max(1));
    let mut picks: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (t, &n) in sizes.iter().enumerate() {
        let want = share.min(n);
        while picks.range((t, 0)..(t + 1, 0)).count() < want {
            picks.insert((t, rng.random_range(0..n)));
        }
    }
    while picks.len() < samples.min(total) {
        let mut flat = rng.random_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        picks.insert((t, flat));
    }

    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (t, k) in picks {
        let orig = params.tensors()[t].data()[k];
        params.tensors_mut()[t].data_mut()[k] = orig + FD_STEP;
        let plus = loss(params);
        params.tensors_mut()[t].data_mut()[k] = orig - FD_STEP;
        let minus = loss(params);
        params.tensors_mut()[t].data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = relative_error(analytic.tensors()[t].data()[k], numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            let name = params.iter().nth(t).map(|(n, _)| n.to_string()).unwrap_or_default();
            report.worst = Some((name, k));
        }
    }
    report
}
