//! Running an experiment from code rather than the command line.

use gmclab::expcli::{execute, Experiment, ExperimentConfig};

fn main() -> gmclab::Result<()> {
    let c = ExperimentConfig::default_for(Experiment::MaxLaw);
    print!("{}", c.to_toml_string()?);
    let rec = execute(&c)?;
    println!("\nconfig hash {}", rec.config_hash);
    for a in &rec.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    Ok(())
}
