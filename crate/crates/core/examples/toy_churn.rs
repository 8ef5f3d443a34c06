//! Two ISPs, two CSPs, 300 customers: print every customer type before and
//! after ISP1 and CSP1 start peering, plus the individual churn flows.

use peerbargain::churn::{establish_peering, PeeringEvent};
use peerbargain::dataset::toy_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = toy_dataset().market()?;
    let before = market.initialize();
    let (after, report) = establish_peering(&market, &before, &PeeringEvent::new("ISP1", "CSP1"))?;

    println!("{:<5} {:<7} {:<22} {:>6} {:>6}", "isp", "prefers", "providers", "before", "after");
    let (b, a) = (before.snapshot(&market), after.snapshot(&market));
    for (x, y) in b.counts.iter().zip(&a.counts) {
        let providers: Vec<String> = x.providers.iter().map(|(s, c)| format!("{s}={c}")).collect();
        println!("{:<5} {:<7} {:<22} {:>6} {:>6}", x.isp, x.preferred, providers.join(","), x.n, y.n);
    }
    let view = report.view(&market);
    println!("\nphase 1 (ISP switches):");
    for f in &view.phase1_flows {
        println!("  {} -> {}: {}", f.from_isp, f.to_isp, f.amount);
    }
    println!("phase 2 (CSP switches):");
    for f in &view.phase2_flows {
        println!("  {} {}: {} -> {}: {}", f.isp, f.service, f.from_provider, f.to_provider, f.amount);
    }
    Ok(())
}
