// Hidden states split into separate labyrinths, each completed on its own.
//
// ```bash
// cargo run --example multi_labyrinth
// ```

use labyrinth::labyrinths::{complete_multi, decompose};
use labyrinth::maxent::ConstrainedOptions;
use labyrinth::model::PartialChainSpec;

pub fn run_example() -> labyrinth::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/two_labyrinths_constrained.json");
    let spec = PartialChainSpec::from_json_str(&std::fs::read_to_string(path)?)?;

    for block in decompose(&spec)? {
        println!("block {} {:?}: normalized law {:.4}", block.index, block.labels, block.pihat);
    }

    let multi = complete_multi(&spec, &ConstrainedOptions::default())?;
    for (index, b) in &multi.blocks {
        println!("block {index} ({}): h(Z) = {:.6}, H' = {:.6}", b.mode, b.h_z, b.h_prime);
    }
    println!("P_EE =\n{:.4}", multi.chain.p_ee());
    println!(
        "sum of block H' = {:.9}, additivity residual {:.1e}",
        multi.block_h_prime_sum(),
        multi.additivity_residual()
    );
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
