//! Runs a built-in scenario end to end and prints its summary.
//!
//! `cargo run --release --example scenario -- max-principle-kappa`

use roughflow::scenario::{builtin_names, run, RunOptions, Scenario};

fn main() -> roughflow::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "flat-smoke".into());
    if !builtin_names().contains(&name.as_str()) {
        eprintln!("unknown scenario {name}; choose one of {:?}", builtin_names());
        std::process::exit(1);
    }
    let scn = Scenario::builtin(&name)?;
    let out = std::env::temp_dir().join("roughflow").join(&name);
    let outcome = run(&scn, &RunOptions { out: Some(out), plots: true, ..RunOptions::default() })?;
    print!("{}", std::fs::read_to_string(outcome.dir.join("summary.txt"))?);
    println!("artifacts in {}", outcome.dir.display());
    std::process::exit(outcome.exit_code());
}
