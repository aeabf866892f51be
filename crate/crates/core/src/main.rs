use clap::{Parser, Subcommand, ValueEnum};
use regsentry::pipeline::{self, config::PipelineConfig, ReportFormat};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "regsentry",
    version,
    about = "Detect regression faults between two program versions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the four-phase analysis pipeline.
    Run {
        /// Path to the pipeline configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Start at this phase, loading earlier phases' persisted artifacts
        /// from the output directory.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
        resume_from: u8,
        /// Dump each solver query in DIMACS CNF format under the output
        /// directory.
        #[arg(long)]
        emit_cnf: bool,
        /// Report format(s) to write.
        #[arg(long, value_enum, default_value_t = FormatArg::Both)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        resume_from,
        emit_cnf,
        format,
    } = cli.command;

    let run = || -> Result<u8, pipeline::PipelineError> {
        let cfg = PipelineConfig::load(&config)?;
        let (rep, versions) = pipeline::run(&cfg, resume_from, emit_cnf)?;
        let written = pipeline::write_reports(&cfg, &rep, &versions, format.into())?;
        for path in written {
            eprintln!("wrote {}", path.display());
        }
        println!("{}", pipeline::report::to_text(&rep, &versions));
        Ok(rep.exit_status as u8)
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
