//! Nominal Krippendorff's alpha.

use std::collections::BTreeMap;

use super::{Choice, DatasetError};

/// Nominal α over the items rated by at least two raters, computed from the
/// coincidence matrix: `α = 1 − (n − 1)·Σ_{c≠k} o_ck / Σ_{c≠k} n_c·n_k`.
/// With no expected disagreement (every value identical) α is 1.
pub fn krippendorff_alpha(
    ratings: &BTreeMap<String, BTreeMap<String, Choice>>,
) -> Result<f64, DatasetError> {
    if ratings.len() < 2 {
        return Err(DatasetError::InsufficientRaters);
    }
    let mut items: BTreeMap<&str, Vec<Choice>> = BTreeMap::new();
    for per_rater in ratings.values() {
        for (item, choice) in per_rater {
            items.entry(item.as_str()).or_default().push(*choice);
        }
    }
    let mut coincidence: BTreeMap<(Choice, Choice), f64> = BTreeMap::new();
    let mut paired = 0;
    for values in items.values().filter(|v| v.len() >= 2) {
        paired += 1;
        let weight = 1.0 / (values.len() - 1) as f64;
        for (i, c) in values.iter().enumerate() {
            for (j, k) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry((*c, *k)).or_default() += weight;
                }
            }
        }
    }
    if paired == 0 {
        return Err(DatasetError::InsufficientRaters);
    }
    let mut marginals: BTreeMap<Choice, f64> = BTreeMap::new();
    for ((c, _), o) in &coincidence {
        *marginals.entry(*c).or_default() += o;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, o)| o)
        .sum();
    let mut expected = 0.0;
    for (c, nc) in &marginals {
        for (k, nk) in &marginals {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}
