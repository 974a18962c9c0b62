use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pairjensen_core::suite::{self, PhiFamily};
use pairjensen_core::{CheckKind, GenSpec, PhiSpec, Subject, SuiteConfig, Tolerance};

/// Verify Jensen-type inequalities on pairs of atomic measure spaces.
#[derive(Parser)]
#[command(name = "pairjensen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the check suite on one instance.
    Verify {
        #[command(flatten)]
        source: SourceArgs,
        /// Comma-separated e-atom indices to erase (default: seeded random mask).
        #[arg(long, value_delimiter = ',')]
        erase: Option<Vec<usize>>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write a generated instance as JSON.
    Generate {
        #[arg(long = "gen", value_name = "SPEC")]
        generator: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check random instances and shrink any violation.
    Fuzz {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one check per member of a parameterized phi family.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// e.g. pow:0.25..4:0.25
        #[arg(long)]
        family: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// Instance, hypergraph or sequence JSON.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// matrix:p=..,q=..,c=.. | hypergraph:p=..,q=..,k=.. | sequence:n=.. | interval:nodes=..
    #[arg(long = "gen", value_name = "SPEC")]
    generator: Option<String>,
}

#[derive(Args)]
struct CommonArgs {
    /// phi specification (log, id, pow:<r>); repeatable.
    #[arg(long)]
    phi: Vec<String>,
    /// Checks to run, comma-separated; `all` selects every asserted check.
    #[arg(long)]
    checks: Vec<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    eq_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random profiles per variational scan.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV report path (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also emit the JSON mirror (next to --report, or on stdout).
    #[arg(long)]
    json: bool,
}

impl CommonArgs {
    fn config(&self, default_phi: &[&str], default_trials: usize) -> anyhow::Result<SuiteConfig> {
        let phi_src: Vec<&str> = if self.phi.is_empty() {
            default_phi.to_vec()
        } else {
            self.phi.iter().map(String::as_str).collect()
        };
        let phi_list = phi_src
            .iter()
            .map(|s| s.parse::<PhiSpec>())
            .collect::<Result<Vec<_>, _>>()?;
        let checks = if self.checks.is_empty() {
            CheckKind::asserted()
        } else {
            CheckKind::parse_list(&self.checks.join(","))?
        };
        let cfg = SuiteConfig {
            checks,
            phi_list,
            tol: Tolerance {
                abs: self.tol,
                rel: self.tol,
                eq: self.eq_tol,
                ..Tolerance::default()
            },
            seed: self.seed,
            trials: self.trials.unwrap_or(default_trials),
            ..SuiteConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, csv: &str, json: impl FnOnce() -> anyhow::Result<String>) -> anyhow::Result<()> {
        match &self.report {
            Some(path) => {
                std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
                if self.json {
                    let mirror = path.with_extension("json");
                    std::fs::write(&mirror, json()?).with_context(|| format!("writing {}", mirror.display()))?;
                }
            }
            None if self.json => println!("{}", json()?),
            None => print!("{csv}"),
        }
        Ok(())
    }
}

impl SourceArgs {
    fn subject(&self, seed: u64) -> anyhow::Result<Subject> {
        match (&self.instance, &self.generator) {
            (Some(path), _) => Ok(Subject::load(Path::new(path))
                .with_context(|| format!("loading {}", path.display()))?
                .with_seed(seed)),
            (None, Some(spec)) => Ok(spec.parse::<GenSpec>()?.build(seed)?),
            (None, None) => bail!("one of --instance or --gen is required"),
        }
    }
}

/// Exit status: 0 clean, 1 asserted violation, 2 invalid input.
enum Outcome {
    Clean,
    Violated,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Verify { source, erase, common } => {
            let cfg = common.config(&["id", "log"], 100)?;
            let mut subject = source.subject(cfg.seed)?;
            if let Some(indices) = erase {
                let q = subject.instance.e_count();
                let mut mask = vec![false; q];
                for i in indices {
                    if i >= q {
                        bail!("--erase index {i} out of range for {q} e-atoms");
                    }
                    mask[i] = true;
                }
                subject = subject.with_erased(mask);
            }
            let report = suite::run_subject(&subject, &cfg)?;
            common.emit(&report.to_csv()?, || Ok(report.to_json()?))?;
            eprintln!(
                "{}: {} rows, {} violated, {} informational",
                subject.id,
                report.rows.len(),
                report.failure_count(),
                report.informational_violations()
            );
            Ok(if report.failure_count() == 0 { Outcome::Clean } else { Outcome::Violated })
        }
        Command::Generate { generator, seed, out } => {
            let subject = generator.parse::<GenSpec>()?.build(seed)?;
            let text = match &subject.hypergraph {
                Some(h) => h.to_json()?,
                None => subject.instance.to_json()?,
            };
            match out {
                Some(path) => std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(Outcome::Clean)
        }
        Command::Fuzz { count, common } => {
            let cfg = common.config(&["log", "id", "pow:2", "pow:-0.5"], 16)?;
            let report = suite::fuzz(&cfg, count)?;
            common.emit(&report.to_csv()?, || Ok(report.to_json()?))?;
            eprintln!(
                "fuzz seed {}: {} instances, {} violated, {} informational",
                report.seed,
                report.instances_tried,
                report.failure_count(),
                report.informational_count()
            );
            Ok(if report.failure_count() == 0 { Outcome::Clean } else { Outcome::Violated })
        }
        Command::Sweep { source, family, common } => {
            let cfg = common.config(&["id"], 100)?;
            let family: PhiFamily = family.parse()?;
            let subject = source.subject(cfg.seed)?;
            let report = suite::sweep(&subject, &family, &cfg)?;
            common.emit(&report.to_csv()?, || Ok(report.to_json()?))?;
            Ok(if report.failure_count() == 0 { Outcome::Clean } else { Outcome::Violated })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
