//! Seeded Gillespie estimates against the exact formula.

use qtazrp::montecarlo::{estimate_prob, SimConfig};
use qtazrp::{transition_probability, QParams, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = RateProfile::new(QParams::new(0.5)?, 1.0, [(0, 1.4), (1, 0.7)])?;
    let config = SimConfig {
        initial: StateVector::new(vec![0, 0])?,
        t: 1.0,
        trials: 200_000,
        seed: 2024,
        profile: profile.clone(),
    };
    let targets: Vec<StateVector> = [[0, 0], [1, 0], [1, 1], [2, 0], [2, 1], [3, 0]]
        .into_iter()
        .map(|x| StateVector::new(x.to_vec()))
        .collect::<Result<_, _>>()?;

    for e in estimate_prob(&config, &targets)? {
        let x = StateVector::new(e.target.clone())?;
        let exact = transition_probability(&TransitionRequest::new(config.initial.clone(), x.clone(), config.t, profile.clone()))?.p;
        println!(
            "{x}: p_hat {:.5} +- {:.5}  exact {exact:.5}  z = {:+.2}",
            e.p_hat,
            e.stderr,
            (e.p_hat - exact) / e.stderr
        );
    }
    Ok(())
}
