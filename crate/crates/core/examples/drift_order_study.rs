//! Per-step charge drift of forward and backward Euler against h and ε.

use grand_charges::experiments::{drift_study, preset};

pub fn run_example() -> grand_charges::Result<()> {
    let hs = [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];
    for method in ["fe", "be", "im"] {
        let mut cfg = preset("fig1-fe")?;
        cfg.method = method.into();
        let study = drift_study(&cfg, &hs, &[0.2, 0.1, 0.05], 0.01, 0)?;
        println!("{}\n", study.report());
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
