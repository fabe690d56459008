//! Bit-exact save and load of the reference architecture.

use timewarp::io::{load_weights, save_weights};
use timewarp::training::{init_network, Architecture};

fn main() -> timewarp::Result<()> {
    let net = init_network(&Architecture::fmc_reference(), 42)?;
    let dir = std::env::temp_dir().join("timewarp-weights-example");
    std::fs::create_dir_all(&dir)?;
    let first = dir.join("a.json");
    let second = dir.join("b.json");
    save_weights(&net, &first)?;
    let back = load_weights(&first)?;
    save_weights(&back, &second)?;
    println!("parameters       {}", back.param_count());
    println!("bit-identical    {}", back.params_flat().iter().zip(net.params_flat()).all(|(a, b)| a.to_bits() == b.to_bits()));
    println!("identical files  {}", std::fs::read(&first)? == std::fs::read(&second)?);
    println!("file size        {} bytes", std::fs::metadata(&first)?.len());
    Ok(())
}
