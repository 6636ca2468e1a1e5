//! Two particles from a shared site: the permutation sum, its individual
//! terms and the master-equation value.

use qtazrp::oracle::oracle_prob;
use qtazrp::{transition_probability, QParams, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = RateProfile::new(QParams::new(0.5)?, 1.0, [(0, 1.0), (1, 2.0)])?;
    let y = StateVector::new(vec![0, 0])?;
    let t = 0.7;

    for x in [vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1], vec![3, 2]] {
        let x = StateVector::new(x)?;
        let r = transition_probability(&TransitionRequest::new(y.clone(), x.clone(), t, profile.clone()))?;
        let o = oracle_prob(&y, &x, t, &profile, 1e-12)?;
        println!("P_{y}({x}; {t}) = {:.12}  oracle {o:.12}  |delta| {:.1e}", r.p, (r.p - o).abs());
        for term in &r.terms {
            println!(
                "    sigma {:?}: {:+.6e} {:+.6e}i  (M = {})",
                term.sigma, term.value.re, term.value.im, term.quadrature.nodes_used
            );
        }
    }
    Ok(())
}
