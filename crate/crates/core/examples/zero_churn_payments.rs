//! Comcast and Google with loyal customers on both sides: the payment comes
//! from the traffic and revenue uplift alone.

use peerbargain::scenario::{run, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    for name in [
        "comcast-google-video",
        "comcast-google-search",
        "comcast-google-video-conservative",
        "comcast-google-search-conservative",
    ] {
        let spec = ScenarioSpec::from_json(&std::fs::read_to_string(format!("{dir}/{name}.json"))?)?;
        let r = run(&spec)?;
        let price = r
            .bandwidth_price_usd_per_gbps_per_month
            .map_or("n/a".to_string(), |p| format!("{p:.2}"));
        println!(
            "{name:<36} payment {:>14.2} USD/month  price {price:>10} USD/Gbps/month",
            r.outcome.payment_usd_per_month
        );
    }
    Ok(())
}
