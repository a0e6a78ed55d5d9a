//! Analytic gradients against central finite differences on the tiny model.

use jitterlab_model::gradcheck::{check, TOLERANCE};
use jitterlab_model::Objective;

fn run(objective: Objective) {
    let r = check(objective);
    println!(
        "{objective:?}: {} parameters, overall relative error {:e}, worst tensor {} at {:e}",
        r.checked, r.overall, r.worst_tensor.1, r.worst_tensor.0
    );
    assert!(
        r.overall < TOLERANCE,
        "overall relative error {:e}",
        r.overall
    );
    assert!(
        r.worst_tensor.0 < TOLERANCE,
        "tensor {} relative error {:e}",
        r.worst_tensor.1,
        r.worst_tensor.0
    );
}

#[test]
fn contrastive_gradients_match_finite_differences() {
    run(Objective::BatchContrastive);
}

#[test]
fn pairwise_gradients_match_finite_differences() {
    run(Objective::Pairwise);
}
