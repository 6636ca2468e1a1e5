//! A single particle on an inhomogeneous lattice: closed form, contour
//! integral and master equation side by side.

use qtazrp::oracle::oracle_prob;
use qtazrp::{one_particle_prob, transition_probability, QParams, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = QParams::new(0.5)?;
    let profile = RateProfile::new(q, 1.0, [(0, 1.6), (1, 0.6), (2, 1.1), (3, 1.6)])?;
    let t = 1.5;
    let y = StateVector::new(vec![0])?;

    println!("{:>4} {:>16} {:>16} {:>16}", "x", "closed form", "contour", "oracle");
    for x in 0..=5 {
        let target = StateVector::new(vec![x])?;
        let closed = one_particle_prob(0, x, t, &profile);
        let contour = transition_probability(&TransitionRequest::new(y.clone(), target.clone(), t, profile.clone()))?;
        let oracle = oracle_prob(&y, &target, t, &profile, 1e-12)?;
        println!("{x:>4} {closed:>16.12} {:>16.12} {oracle:>16.12}", contour.p);
    }
    // sites 0 and 3 share a rate: the closed form takes its confluent branch at x = 3
    Ok(())
}
