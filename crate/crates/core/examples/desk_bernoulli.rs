// Bernoulli completion of a two-visible, two-hidden chain.
//
// ```bash
// cargo run --example desk_bernoulli
// ```

use labyrinth::entropy::entropy_full;
use labyrinth::maxent::complete_bernoulli;
use labyrinth::model::{derive_quantities, validate_hypotheses, PartialChainSpec};

pub fn run_example() -> labyrinth::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/desk.json"))?;
    let spec = PartialChainSpec::from_json_str(&text)?;

    let checks = validate_hypotheses(&spec, 1e-9);
    for c in &checks.checks {
        println!("{:<28} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }

    let d = derive_quantities(&spec)?;
    println!("pi_E = {}, normalized {}", d.pi_e, d.pihat_e);

    let chain = complete_bernoulli(&spec)?;
    println!("P_EE =\n{}", chain.p_ee());
    println!("stationary law {}", chain.pi());

    let e = entropy_full(&chain);
    println!("h(X) = {:.6}  h(Z) = {:.6}  H' = {:.6}", e.h_x, e.h_z, e.h_prime);
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
