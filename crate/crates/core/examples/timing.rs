//! Does it pay to peer first? Move the Comcast and Google event through a
//! sequence of rival peerings and compare the outcomes.

use peerbargain::scenario::{timing_experiment, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/timing-comcast-google.json");
    let spec = ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?;
    let t = timing_experiment(&spec)?;
    println!("{:<14} {:>4} {:>18} {:>14} {:>16}", "ordering", "pos", "ISP profit (M$)", "payment (M$)", "final customers");
    for r in &t.rows {
        println!(
            "{:<14} {:>4} {:>18.3} {:>14.4} {:>16.0}",
            r.label,
            r.focal_position + 1,
            r.isp_profit_after_usd_per_month / 1e6,
            r.payment_usd_per_month / 1e6,
            r.isp_final_customers
        );
    }
    Ok(())
}
