//! Per-service bandwidth prices for a Comcast and Google peering, one row per
//! CSP loyalty value.

use peerbargain::scenario::{price_table, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/comcast-google-all.json");
    let spec = ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?;
    let table = price_table(&spec)?;
    let services: Vec<&String> = table.rows[0].prices.keys().collect();
    print!("{:>6}", "theta");
    for s in &services {
        print!(" {s:>14}");
    }
    println!("   (K$/Gbps/month)");
    for row in &table.rows {
        print!("{:>6.2}", row.theta);
        for s in &services {
            match row.prices[*s].bandwidth_price_usd_per_gbps_per_month {
                Some(p) if row.prices[*s].deal => print!(" {:>14.2}", p / 1e3),
                _ => print!(" {:>14}", "no deal"),
            }
        }
        println!();
    }
    Ok(())
}
