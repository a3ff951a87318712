use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridprice::formats::format_comparison_table;
use gridprice::pipeline::{parse_stages, run_pipeline, PipelineOutcome, Stage};
use gridprice::{parse_config, Error};

/// Microgrid power-market workbench: fuzzy identification, H∞ pricing gain
/// synthesis, verification and ACE-vs-fuzzy simulation.
#[derive(Parser)]
#[command(name = "gridprice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the fuzzy rule matrices and write model.txt.
    Identify(Common),
    /// Solve the synthesis LMIs and write gains.txt.
    Synthesize(Common),
    /// Re-check gains.txt in P-form and sample the dissipation inequality.
    Verify(Common),
    /// Simulate every configured policy and seed.
    Simulate(Common),
    /// Summarise recorded trajectories into comparison.csv / comparison.txt.
    Compare(Common),
    /// Run several stages in dependency order (all by default).
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated stages, e.g. `identify,synthesize` (pipeline only).
    #[arg(long)]
    stage: Option<String>,
    /// Replace every seed in the scenario with this one.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn run(cli: Cli) -> Result<PipelineOutcome, Error> {
    let (common, fixed) = match cli.command {
        Command::Identify(c) => (c, Some(Stage::Identify)),
        Command::Synthesize(c) => (c, Some(Stage::Synthesize)),
        Command::Verify(c) => (c, Some(Stage::Verify)),
        Command::Simulate(c) => (c, Some(Stage::Simulate)),
        Command::Compare(c) => (c, Some(Stage::Compare)),
        Command::Pipeline(c) => (c, None),
    };
    let stages = match (fixed, &common.stage) {
        (Some(_), Some(_)) => return Err(Error::Config("--stage is only accepted by `pipeline`".into())),
        (Some(s), None) => vec![s],
        (None, Some(list)) => parse_stages(list)?,
        (None, None) => Stage::ALL.to_vec(),
    };
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed_override {
        cfg = cfg.with_seed_override(seed);
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
    run_pipeline(&cfg, &stages, &out)
}

fn report(outcome: &PipelineOutcome) {
    if let Some(m) = &outcome.model {
        println!(
            "identify: {} rules, sup error {:.4} (training), {:.4} (fresh)",
            m.model.rule_count(),
            m.model.sup_error,
            m.fresh_sup_error
        );
    }
    if let (Some(g), Some(feasible)) = (&outcome.gains, outcome.synthesis_feasible) {
        println!(
            "synthesize: gamma {:.4}, {}, worst block eigenvalue {:.4e}",
            g.gamma,
            if feasible { "certified" } else { "UNCERTIFIED" },
            g.provenance.worst_block_margin
        );
    }
    if let Some(v) = &outcome.verification {
        let worst = v.lmi25_margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "verify: {} (worst P-form eigenvalue {worst:.4e}, sampled dissipation max {:.4e} over {} samples)",
            if v.passed() { "passed" } else { "FAILED" },
            v.phi_sample_max,
            v.samples_used
        );
    }
    if outcome.stages_run.contains(&Stage::Simulate) {
        println!("simulate: trajectories written");
    }
    if let Some(rows) = &outcome.comparison {
        print!("{}", format_comparison_table(rows));
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            report(&outcome);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
