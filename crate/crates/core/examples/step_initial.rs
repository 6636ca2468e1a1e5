//! Step initial condition: the single symmetrized integral against the
//! general permutation sum.

use qtazrp::{step_init_prob, transition_probability, ContourOptions, QParams, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = RateProfile::new(QParams::new(0.3)?, 0.9, [(0, 1.4), (1, 0.7), (2, 1.8)])?;
    let opts = ContourOptions::default();
    let t = 1.2;
    for x in [vec![1, 0, 0], vec![1, 1, 0], vec![2, 1, 0], vec![2, 2, 1]] {
        let x = StateVector::new(x)?;
        let step = step_init_prob(&x, t, &profile, &opts)?;
        let general = transition_probability(&TransitionRequest::new(StateVector::step(3), x.clone(), t, profile.clone()))?;
        println!(
            "{x}: step {:.12} (M = {})  general {:.12}  |delta| {:.1e}",
            step.p,
            step.nodes_used,
            general.p,
            (step.p - general.p).abs()
        );
    }
    Ok(())
}
