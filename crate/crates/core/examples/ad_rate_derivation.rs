//! Rebuild the per-minute ad profit rates from quarterly provider profits and
//! compare them with the rates embedded in the US dataset.

use peerbargain::dataset::{builtin_us_dataset, derive_ad_rates, us2013_ad_rate_inputs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let derived = derive_ad_rates(&us2013_ad_rate_inputs())?;
    let ds = builtin_us_dataset();
    println!("{:<12} {:>14} {:>14} {:>8}", "service", "derived", "embedded", "ratio");
    for (service, rate) in &derived {
        let embedded = ds
            .services
            .iter()
            .find(|s| &s.id == service)
            .map(|s| s.ad_rate_usd_per_min)
            .unwrap_or(f64::NAN);
        println!("{service:<12} {rate:>14.6} {embedded:>14.6} {:>8.3}", rate / embedded);
    }
    Ok(())
}
