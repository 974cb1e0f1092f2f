// Geometric survival and exit laws of the chain killed on leaving a side.
//
// ```bash
// cargo run --example quasi_stationarity
// ```

use labyrinth::maxent::{complete_constrained_chain, ConstrainedOptions};
use labyrinth::model::PartialChainSpec;
use labyrinth::qsd::qsd_reports;

pub fn run_example() -> labyrinth::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cycle.json"))?;
    let spec = PartialChainSpec::from_json_str(&text)?;
    let (chain, _) = complete_constrained_chain(&spec, &ConstrainedOptions::default())?;

    for r in qsd_reports(&chain)? {
        println!("{:?} side, rho = {}", r.side, r.rho);
        println!("  P(tau > n), n = 0..5: {:.6?}", &r.survival[..6]);
        println!("  exit law {:.6}", r.exit_law);
        println!("  worst residual {:.1e}", r.max_residual());
    }
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
