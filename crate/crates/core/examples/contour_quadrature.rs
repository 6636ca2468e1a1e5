//! The trapezoid rule on a torus of circles, used directly, and the
//! radius insensitivity of a transition probability.

use num_complex::Complex64;
use qtazrp::quadrature::{contour_integral_fn, ContourSpec};
use qtazrp::{transition_probability, ContourOptions, QParams, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // (2 pi i)^{-2} \oint\oint e^{w1 + w2} / (w1^2 w2) dw = 1
    let spec = ContourSpec::new(1.5);
    let r = contour_integral_fn(|w: &[Complex64]| Ok((w[0] + w[1]).exp() / (w[0] * w[0] * w[1])), 2, &spec)?;
    println!("torus integral {:.14} (M = {}, delta {:.1e})", r.value, r.nodes_used, r.estimated_error);

    let profile = RateProfile::homogeneous(QParams::new(0.7)?, 1.0)?;
    let base = TransitionRequest::new(StateVector::new(vec![1, 0])?, StateVector::new(vec![2, 2])?, 1.0, profile);
    for scale in [1.0, 1.25, 1.5, 2.0] {
        let req = base.clone().with_contour(ContourOptions { radius_scale: scale, ..ContourOptions::default() });
        let p = transition_probability(&req)?;
        println!("R = {:.3}: P = {:.15} with M = {}", p.radius, p.p, p.nodes_used);
    }
    Ok(())
}
