//! Same deal, different ISP: Google's search payment to Comcast versus the
//! much smaller Cablevision as ISP loyalty varies.

use peerbargain::scenario::{pair_comparison, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/cablevision-vs-comcast.json");
    let spec = ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?;
    let c = pair_comparison(&spec)?;
    print!("{:>6}", "beta");
    for isp in &c.isps {
        print!(" {isp:>14}");
    }
    println!("   (M$/month)");
    for r in &c.rows {
        print!("{:>6.2}", r.beta);
        for isp in &c.isps {
            print!(" {:>14.4}", r.payments_usd_per_month[isp] / 1e6);
        }
        println!();
    }
    Ok(())
}
