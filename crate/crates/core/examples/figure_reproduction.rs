//! The four presets as shipped. Frozen-softmax attention on this data
//! grows without bound, so some runs stop early; the prefix is still
//! written and the error is reported.

use grand_charges::experiments::{self, preset, PRESET_NAMES};

pub fn run_example() -> grand_charges::Result<()> {
    let dir = std::env::temp_dir().join("grand-charges-figures");
    for name in PRESET_NAMES {
        match experiments::run(&preset(name)?, Some(&dir)) {
            Ok(art) => println!("{}\n", art.summary),
            Err(e) => println!("{name}: stopped early ({}: {e}); partial trace in {}\n", e.kind(), dir.display()),
        }
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
