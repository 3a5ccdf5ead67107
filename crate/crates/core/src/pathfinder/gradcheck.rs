use super::{Policy, Query, Step};

/// Floor on the relative-error denominator, so near-zero gradients are
/// compared absolutely.
const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// One episode of a check batch: query, decisions and advantage.
pub type Episode = (Query, Vec<Step>, f64);

fn batch_loss(policy: &Policy, batch: &[Episode], entropy_weight: f64) -> f64 {
    let scale = 1.0 / batch.len().max(1) as f64;
    batch
        .iter()
        .map(|(q, steps, adv)| policy.episode_loss(q, steps, *adv, entropy_weight, scale, None))
        .sum()
}

/// Compares the analytic batch-loss gradient with central differences at
/// step `epsilon` on the parameter indices in `coords` (all when empty).
pub fn gradient_check(
    policy: &Policy,
    batch: &[Episode],
    entropy_weight: f64,
    epsilon: f64,
    coords: &[usize],
) -> GradCheckReport {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut grad = vec![0.0; policy.num_params()];
    for (q, steps, adv) in batch {
        policy.episode_loss(q, steps, *adv, entropy_weight, scale, Some(&mut grad));
    }
    let all: Vec<usize>;
    let coords = if coords.is_empty() {
        all = (0..policy.num_params()).collect();
        &all[..]
    } else {
        coords
    };
    let mut probe = policy.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    for &i in coords {
        let x = probe.params()[i];
        probe.params_mut()[i] = x + epsilon;
        let up = batch_loss(&probe, batch, entropy_weight);
        probe.params_mut()[i] = x - epsilon;
        let down = batch_loss(&probe, batch, entropy_weight);
        probe.params_mut()[i] = x;
        let numeric = (up - down) / (2.0 * epsilon);
        let abs = (numeric - grad[i]).abs();
        let rel = abs / numeric.abs().max(grad[i].abs()).max(REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    report
}
