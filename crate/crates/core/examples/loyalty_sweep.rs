//! Sweep CSP loyalty at fixed ISP loyalty and watch the search payment fall as
//! Google's customers become harder to poach.

use peerbargain::report::{emit_report, Format};
use peerbargain::scenario::{sweep, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/loyalty-sweep-search.json");
    let spec = ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?;
    print!("{}", emit_report(&sweep(&spec)?, Format::Markdown)?);
    Ok(())
}
