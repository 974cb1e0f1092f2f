// Deciding whether support constraints admit any completion, with a
// witness or a Farkas certificate either way.
//
// ```bash
// cargo run --example feasibility_certificate
// ```

use labyrinth::feasibility::{build_system, solve_feasibility};
use ndarray::{array, Array2};

pub fn run_example() -> labyrinth::Result<()> {
    // One heavy state and no self loops: its mass has nowhere to go.
    let pihat = array![0.6, 0.25, 0.15];
    let no_loops = Array2::from_shape_fn((3, 3), |(a, b)| if a == b { 0.0 } else { 1.0 });
    let outcome = solve_feasibility(&build_system(&pihat, &no_loops)?)?;
    let cert = outcome.certificate.expect("infeasible");
    println!("no self loops: {}", outcome.verdict);
    println!("  u = {:.4}\n  v = {:.4}\n  w = {:.4}", cert.u, cert.v, cert.w);
    println!("  objective {:.4} < 0, valid: {}", cert.objective(&pihat), cert.is_valid(&pihat, &no_loops));

    // Allowing self loops fixes it; the identity is always a witness.
    let with_loops = Array2::ones((3, 3));
    let outcome = solve_feasibility(&build_system(&pihat, &with_loops)?)?;
    println!("all edges: {}\n{:.4}", outcome.verdict, outcome.witness.expect("feasible"));
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
