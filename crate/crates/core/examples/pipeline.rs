//! The full command sequence driven from the library, as the CLI does it.
//!
//! cargo run --release --example pipeline -- [out_dir]

use eventqa::pipeline::{run, Command, RunConfig};

fn main() -> eventqa::Result<()> {
    let mut config = RunConfig::default();
    config.out_dir = std::env::args().nth(1).unwrap_or_else(|| "runs/example".into()).into();
    config.synth.n_train = 120;
    config.synth.n_dev = 40;
    config.synth.n_test = 60;
    config.train.max_epochs = 10;
    config.analyze.n_saliency = 2;

    for cmd in Command::ALL {
        let summary = run(cmd, &config)?;
        println!("{:<10} {}", summary.command, summary.message);
    }
    let report = std::fs::read_to_string(config.out_dir.join("report.txt"))
        .map_err(|e| eventqa::Error::Io { path: config.out_dir.join("report.txt"), source: e })?;
    println!("\n{report}");
    Ok(())
}
