// Rebuilding the full chain from its visible skeleton and hidden
// excursions, then checking the result against the completed matrix.
//
// ```bash
// cargo run --release --example splice_reconstruction
// ```

use labyrinth::maxent::complete_bernoulli;
use labyrinth::model::PartialChainSpec;
use labyrinth::sim::{build_skeleton, compare_laws, simulate_splice};

pub fn run_example() -> labyrinth::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/desk.json"))?;
    let spec = PartialChainSpec::from_json_str(&text)?;
    let chain = complete_bernoulli(&spec)?;

    let skeleton = build_skeleton(&chain)?;
    println!("Q =\n{:.4}\ntheta =\n{:.4}", skeleton.q, skeleton.theta);

    let trace = simulate_splice(&chain, 200_000, 42)?;
    println!("{} steps, {} renewals", trace.len(), trace.renewal_times.len());
    let cmp = compare_laws(&trace, &chain)?;
    for c in &cmp.criteria {
        println!("  {:<20} {:<5} {:.4} (threshold {})", c.name, c.passed, c.statistic, c.threshold);
    }
    println!("verdict: {}", cmp.verdict);

    let mut csv = Vec::new();
    trace.write_csv(spec.states(), &mut csv)?;
    let head: Vec<&str> = std::str::from_utf8(&csv).unwrap_or_default().lines().take(6).collect();
    println!("{}", head.join("\n"));
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
