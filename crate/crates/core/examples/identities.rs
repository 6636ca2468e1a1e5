//! The permutation-sum and C-function identities at random points.

use num_complex::Complex64;
use qtazrp::bethe::{a_sigma, b_factor, c_function, perm_sum_identity_residual, Permutation};
use qtazrp::qcore::q_factorial;
use qtazrp::verify::{identities_suite, random_separated_point, rng};
use qtazrp::QParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = QParams::new(0.4)?;
    let w = random_separated_point(&mut rng(1), 3, q);

    let mut lhs = Complex64::new(0.0, 0.0);
    for sigma in Permutation::all(3) {
        let permuted: Vec<Complex64> = (0..3).map(|i| w[sigma.inverse_of(i)]).collect();
        let a = a_sigma(&sigma, &permuted, q)?;
        println!("sigma {:?} ({} inversions): A = {a:.6}", sigma.images(), sigma.inversions().len());
        lhs += a;
    }
    println!("sum        = {lhs:.12}");
    println!("[3]_q! B   = {:.12}", q_factorial(3, q) * b_factor(&w, q)?);
    println!("residual   = {:.2e}", perm_sum_identity_residual(&w, q)?.norm());
    println!("C(w)       = {:.12} vs (1-q^3)/(1-q) = {:.12}", c_function(&w, q)?, (1.0 - 0.4f64.powi(3)) / 0.6);

    let report = identities_suite(6, 50, 7);
    for c in &report.checks {
        println!("{:<28} {:.2e}  {}", c.name, c.value, if c.passed { "ok" } else { "FAIL" });
    }
    Ok(())
}
