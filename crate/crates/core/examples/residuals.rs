//! The unnormalized sum u0 extended off the Weyl chamber: it solves the
//! free evolution equation everywhere and the boundary condition on
//! adjacent coordinates.

use qtazrp::transition::{boundary_residual, free_evolution_residual, u0_sum};
use qtazrp::{ContourOptions, QParams, RateProfile, StateVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = RateProfile::new(QParams::new(0.7)?, 1.0, [(-1, 0.6), (0, 1.3), (1, 1.9), (2, 0.8)])?;
    let opts = ContourOptions::default();
    let y = StateVector::new(vec![1, 0, 0])?;
    let t = 0.9;

    // X outside the chamber: x_1 < x_2
    let x = StateVector::relaxed(vec![0, 2, 1]);
    println!("u0({x}) = {:.6e}", u0_sum(&x, &y, t, &profile, &opts)?);
    for x in [vec![0, 2, 1], vec![3, 1, 0], vec![-1, -1, 2]] {
        let x = StateVector::relaxed(x);
        let r = free_evolution_residual(&x, &y, t, &profile, &opts)?;
        println!("free evolution at {x}: |residual| {:.2e} (scale {:.2})", r.abs(), r.scale);
    }
    for (k, site) in [(0, 1), (1, 0), (1, 3)] {
        let r = boundary_residual(k, site, &[2, 1, 0], &y, t, &profile, &opts)?;
        println!("boundary k={} x={site}: |residual| {:.2e}", k + 1, r.abs());
    }
    Ok(())
}
