use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eventqa::markers::MarkerMode;
use eventqa::ontology::QuestionStyle;
use eventqa::pipeline::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "eventqa", version, about = "Event trigger detection as multi-answer extractive QA")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run config; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// none | entity_position | entity_type | argument_role
    #[arg(long, global = true)]
    marker_mode: Option<MarkerMode>,

    /// with_article | bare
    #[arg(long, global = true)]
    question_style: Option<QuestionStyle>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate seeded synthetic train/dev/test corpora.
    Synth,
    /// Augment, tokenize and pack every question into instances.
    Prepare,
    /// Fine-tune the encoder, keeping the best-dev epoch.
    Train,
    /// Select the decoding threshold on the development set.
    Calibrate,
    /// Decode test predictions at the calibrated threshold.
    Predict,
    /// Score predictions against the test corpus.
    Evaluate,
    /// Export connectivity maps and the [CLS] projection.
    Analyze,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Prepare => Command::Prepare,
            Cmd::Train => Command::Train,
            Cmd::Calibrate => Command::Calibrate,
            Cmd::Predict => Command::Predict,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Analyze => Command::Analyze,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<_> {
        let mut config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = cli.marker_mode {
            config.marker_mode = m;
        }
        if let Some(q) = cli.question_style {
            config.question_style = q;
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(o) = &cli.out {
            config.out_dir = o.clone();
        }
        Ok(run(cli.command.into(), &config)?)
    })();
    match result {
        Ok(summary) => {
            println!("{}: {}", summary.command, summary.message);
            for a in &summary.artifacts {
                println!("  {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
