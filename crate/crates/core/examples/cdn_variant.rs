//! Charge the ISP for CDN delivery of the extra traffic and see how the
//! settlement moves.

use peerbargain::scenario::{sweep, ScenarioSpec};

fn load(name: &str) -> Result<ScenarioSpec, Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    Ok(ScenarioSpec::from_json(&std::fs::read_to_string(format!("{dir}/{name}.json"))?)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plain = sweep(&load("general-case")?)?;
    let cdn = sweep(&load("general-case-cdn")?)?;
    println!("{:>6} {:>6} {:>14} {:>14}", "beta", "theta", "no CDN (M$)", "CDN (M$)");
    for (a, b) in plain.rows.iter().zip(&cdn.rows) {
        println!(
            "{:>6.2} {:>6.2} {:>14.4} {:>14.4}",
            a.beta,
            a.theta,
            a.payment_usd_per_month / 1e6,
            b.payment_usd_per_month / 1e6
        );
    }
    Ok(())
}
