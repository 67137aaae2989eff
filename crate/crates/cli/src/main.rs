use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use valuebandit_core::experiment::{
    read_log, run_bandit_to_log, run_replication_to_log, summarize_preferences, BackendKind,
    ConfigFile, RunConfig, WriteMode,
};
use valuebandit_core::export::export_plots;
use valuebandit_core::rng::{stream, Seeds};
use valuebandit_core::stats::{comparison_report, ReferenceData};
use valuebandit_core::{Demographics, Error, Policy, Result};

const DEFAULT_STEPS: u64 = 1000;
const DEFAULT_PARTICIPANTS: u64 = 4000;

#[derive(Parser)]
#[command(name = "valuebandit", version, about = "Contextual UCB value targeting for BEV interventions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample virtual participants and write one JSON profile per line.
    SampleDemographics {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Custom distribution file (`[Attribute]` sections of `label<TAB>weight`).
        #[arg(long)]
        distributions: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run the bandit learning loop.
    RunBandit {
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        steps: Option<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Replicate the fixed-intervention survey.
    RunReplication {
        /// Number of participants.
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summarize a log and compare it with a reference distribution.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        /// `domain,bin_lo,count` reference file.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Setting name for the report rows; defaults to the log's policy.
        #[arg(long)]
        setting: Option<String>,
        /// Write the comparison table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the long-format (`panel,setting,measure,value`) report.
        #[arg(long)]
        long: Option<PathBuf>,
        /// Write this log's own distributions as a reference file.
        #[arg(long)]
        emit_reference: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Write plot-ready CSV files for a log.
    ExportPlots {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    backend: Option<BackendKind>,
    /// TOML file with persona, endpoint, and data-file settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing log.
    #[arg(long, conflicts_with = "resume")]
    force: bool,
    /// Continue an interrupted run in an existing log.
    #[arg(long)]
    resume: bool,
}

impl RunArgs {
    fn mode(&self) -> WriteMode {
        if self.resume {
            WriteMode::Resume
        } else if self.force {
            WriteMode::Overwrite
        } else {
            WriteMode::Create
        }
    }

    fn build(&self, policy: Option<Policy>, steps: Option<u64>, default_steps: u64) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::from_file(p)?,
            None => ConfigFile::default(),
        };
        let config = RunConfig {
            policy: policy.or(file.policy),
            steps: steps.or(file.steps).unwrap_or(default_steps),
            backend: self.backend.or(file.backend).unwrap_or(BackendKind::Synthetic),
            seeds: Seeds::from_master(self.seed),
            persona: file.persona.unwrap_or_default(),
            remote: file.remote,
            wizard: file.wizard,
            demographics_file: file.demographics_file,
            catalog_file: file.catalog_file,
        };
        config.validate()?;
        Ok(config)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Config(_) => 3,
        Error::Transport { .. } => 5,
        Error::InsufficientData(_) | Error::Undefined(_) => 6,
        _ => 4,
    }
}

fn create_output(path: &Path, force: bool) -> Result<std::fs::File> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    opts.open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::AlreadyExists => {
            Error::Usage(format!("{} exists; pass --force to overwrite", path.display()))
        }
        _ => e.into(),
    })
}

fn write_output(path: &Path, contents: &str, force: bool) -> Result<()> {
    create_output(path, force)?.write_all(contents.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SampleDemographics {
            n,
            seed,
            out,
            distributions,
            force,
        } => {
            let demographics = match distributions {
                Some(p) => Demographics::from_distribution_file(&p)?,
                None => Demographics::standard(),
            };
            let mut text = String::new();
            for i in 1..=n {
                let profile = demographics.sample_profile(&mut stream(seed, i));
                text.push_str(&serde_json::to_string(&profile)?);
                text.push('\n');
            }
            write_output(&out, &text, force)?;
            println!("wrote {n} profiles to {}", out.display());
        }
        Command::RunBandit { policy, steps, run } => {
            let config = run.build(policy, steps, DEFAULT_STEPS)?;
            if config.policy.is_none() {
                return Err(Error::Usage("--policy is required (ucb, random, or pure-llm)".into()));
            }
            let result = run_bandit_to_log(&config, &run.out, run.mode())?;
            let valid = result.records.iter().filter(|r| r.valid).count();
            println!("wrote {} trials ({valid} valid) to {}", result.records.len(), run.out.display());
        }
        Command::RunReplication { n, run } => {
            let config = run.build(None, n, DEFAULT_PARTICIPANTS)?;
            let records = run_replication_to_log(&config, &run.out, run.mode())?;
            let valid = records.iter().filter(|r| r.valid).count();
            println!("wrote {} trials ({valid} valid) to {}", records.len(), run.out.display());
        }
        Command::Analyze {
            log,
            reference,
            setting,
            out,
            long,
            emit_reference,
            force,
        } => {
            let parsed = read_log(&log)?;
            let setting = setting.unwrap_or_else(|| {
                parsed
                    .header
                    .config
                    .policy
                    .map_or_else(|| "replication".to_string(), |p| p.to_string())
            });
            let reference = reference.as_deref().map(ReferenceData::from_file).transpose()?;
            let report = comparison_report(&setting, &parsed.records, reference.as_ref())?;

            match summarize_preferences(&parsed.records) {
                Ok(s) => eprintln!("post preference {}  shift {}  (n = {})", s.post, s.shift, s.post.n),
                Err(e) => eprintln!("summary unavailable: {e}"),
            }
            match &out {
                Some(p) => write_output(p, &report.to_table(), force)?,
                None => print!("{}", report.to_table()),
            }
            if let Some(p) = &long {
                write_output(p, &report.to_long(), force)?;
            }
            if let Some(p) = &emit_reference {
                let own = ReferenceData::from_records(&parsed.records)?;
                write_output(p, &own.to_csv(), force)?;
            }
            if !report.missing_reference.is_empty() {
                return Err(Error::Data(format!(
                    "reference required for KL^S, p-value, c^P, c^S (missing: {})",
                    report.missing_reference.join(", ")
                )));
            }
        }
        Command::ExportPlots { log, out_dir } => {
            for path in export_plots(&log, &out_dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
