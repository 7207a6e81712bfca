//! Loading a JSON config from disk and running it end to end.

use std::path::Path;

use grand_charges::experiments::{self, ExperimentConfig};

pub fn run_example() -> grand_charges::Result<()> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let out = std::env::temp_dir().join("grand-charges-configs");
    for file in ["ring-tanh.json", "keyquery-sigmoid.json"] {
        let cfg = ExperimentConfig::load(&configs.join(file))?;
        let art = experiments::run(&cfg, Some(&out))?;
        println!("{}\n  -> {}", art.summary, art.csv_path.display());
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
