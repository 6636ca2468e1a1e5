//! Rate profiles round-trip through the JSON file format read by the CLI;
//! the probabilities over an oracle window then sum to one.

use qtazrp::oracle::oracle_distribution;
use qtazrp::{transition_probability, RateProfile, StateVector, TransitionRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = r#"{"q": 0.3, "default_a": 1.0, "overrides": {"-1": 2.0, "0": 0.5, "2": 1.5}}"#;
    let profile = RateProfile::from_json_str(text)?;
    let path = std::env::temp_dir().join("qtazrp-example-rates.json");
    std::fs::write(&path, profile.to_json_string())?;
    let reread = RateProfile::from_path(&path)?;
    assert_eq!(reread, profile);
    println!("{}", reread.to_json_string());
    for site in -2..=3 {
        println!("  a_{site} = {}  b_{site} = {:.3}", reread.a(site), reread.b(site));
    }

    let y = StateVector::new(vec![1, 0])?;
    let t = 0.8;
    let run = oracle_distribution(&y, t, &profile, 1e-10, None)?;
    let mut total = 0.0;
    for (x, _) in run.iter() {
        let x = StateVector::new(x.to_vec())?;
        total += transition_probability(&TransitionRequest::new(y.clone(), x, t, profile.clone()))?.p;
    }
    println!(
        "sum over {} window states = {total:.12} (leak {:.1e})",
        run.window.len(),
        run.distribution.leak
    );
    std::fs::remove_file(path)?;
    Ok(())
}
