// Entropy-maximizing walks on a graph, with no visible states at all.
//
// ```bash
// cargo run --example parry
// ```

use labyrinth::maxent::complete_parry;
use ndarray::array;

pub fn run_example() -> labyrinth::Result<()> {
    // Binary sequences without two consecutive ones.
    let golden = array![[1.0, 1.0], [1.0, 0.0]];
    let p = complete_parry(&golden)?;
    println!("lambda = {:.9} (golden ratio {:.9})", p.lambda, (1.0 + 5f64.sqrt()) / 2.0);
    println!("entropy = {:.9}", p.entropy);
    println!("P =\n{:.6}\nstationary {:.6}", p.p_hat, p.stationary);

    let ring = array![[0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0]];
    let p = complete_parry(&ring)?;
    println!("4-ring: lambda {:.6}, entropy {:.6}", p.lambda, p.entropy);
    Ok(())
}

fn main() -> labyrinth::Result<()> {
    run_example()
}
