//! The bargaining rule on its own: split the joint gain evenly and report the
//! transfer that gets both parties there.

use peerbargain::economics::nash_settlement;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // (ISP before, ISP after, CSP before, CSP after), USD/month.
    let cases = [
        ("CSP gains most", 100.0, 110.0, 50.0, 90.0),
        ("ISP gains most", 100.0, 160.0, 50.0, 55.0),
        ("ISP loses, CSP gains more", 100.0, 80.0, 50.0, 100.0),
        ("joint loss", 100.0, 80.0, 50.0, 55.0),
    ];
    for (label, vi, vi2, vx, vx2) in cases {
        let o = nash_settlement(vi, vi2, vx, vx2)?;
        println!(
            "{label:<26} surplus {:>7.1}  deal {:<5}  CSP pays ISP {:>7.1}  fair profits ({:.1}, {:.1})",
            o.surplus_usd_per_month,
            o.deal,
            o.payment_usd_per_month,
            o.fair_isp_profit_usd_per_month,
            o.fair_csp_profit_usd_per_month,
        );
    }
    Ok(())
}
