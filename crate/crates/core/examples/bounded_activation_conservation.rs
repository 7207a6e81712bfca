//! The same three-node data with a bounded activation: stays finite over
//! the whole interval, and the midpoint rule keeps every commuting charge.

use grand_charges::experiments::{self, preset};

pub fn run_example() -> grand_charges::Result<()> {
    let dir = std::env::temp_dir().join("grand-charges-bounded");
    for (base, activation) in [("fig1-im", "tanh"), ("fig1-fe", "tanh"), ("fig2-im", "sigmoid")] {
        let mut cfg = preset(base)?;
        cfg.attention.activation = activation.into();
        cfg.name = Some(format!("{base}-{activation}"));
        cfg.initial.p = Some(vec![vec![0.1, -0.2, 0.0, 0.3], vec![0.0, 0.1, 0.2, 0.0], vec![-0.1, 0.0, 0.1, 0.1]]);
        let art = experiments::run(&cfg, Some(&dir))?;
        let conserved = art.summary.charges.iter().filter(|c| c.commutes).map(|c| c.drift).fold(0.0f64, f64::max);
        println!("{}: max drift of commuting charges {conserved:.2e}", art.summary.name);
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
