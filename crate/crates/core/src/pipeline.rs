//! Stage orchestration: identify → synthesize → verify → simulate → compare.
//!
//! Stages talk only through files in the output directory, so each one can be
//! rerun on its own against artifacts from an earlier run.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::config::ScenarioConfig;
use crate::control::{PolicyKind, PricingPolicy};
use crate::error::{Error, Result};
use crate::formats::{self, ComparisonRow, ModelFile};
use crate::fuzzy::{approximation_error_sup, generate_training_data, identify_rule_matrices};
use crate::lmi::{
    lyapunov_matrix, minimize_gamma, recover_gains, solve_feasibility_with, verify_solution, Feasibility, GainSet,
    LmiProblem, VerificationReport,
};
use crate::sim::{compute_metrics, dissipation_check_along, simulate_closed_loop, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Identify,
    Synthesize,
    Verify,
    Simulate,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Identify, Stage::Synthesize, Stage::Verify, Stage::Simulate, Stage::Compare];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Identify => "identify",
            Stage::Synthesize => "synthesize",
            Stage::Verify => "verify",
            Stage::Simulate => "simulate",
            Stage::Compare => "compare",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}` (expected one of identify, synthesize, verify, simulate, compare)")))
    }
}

/// Comma-separated stage list, returned in dependency order without repeats.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    let mut stages = list.split(',').filter(|s| !s.trim().is_empty()).map(Stage::from_str).collect::<Result<Vec<_>>>()?;
    if stages.is_empty() {
        return Err(Error::Config("empty stage list".into()));
    }
    stages.sort();
    stages.dedup();
    Ok(stages)
}

/// File layout of one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.txt")
    }

    pub fn gains(&self) -> PathBuf {
        self.root.join("gains.txt")
    }

    pub fn synthesis_report(&self) -> PathBuf {
        self.root.join("synthesis.txt")
    }

    pub fn verification_report(&self) -> PathBuf {
        self.root.join("verification.txt")
    }

    pub fn trajectory(&self, policy: PolicyKind, seed: u64) -> PathBuf {
        self.root.join("trajectories").join(format!("{}_seed{seed}.csv", policy.slug()))
    }

    pub fn plot_dir(&self, policy: PolicyKind, seed: u64) -> PathBuf {
        self.root.join("plots").join(format!("{}_seed{seed}", policy.slug()))
    }

    pub fn comparison_csv(&self) -> PathBuf {
        self.root.join("comparison.csv")
    }

    pub fn comparison_table(&self) -> PathBuf {
        self.root.join("comparison.txt")
    }
}

/// What a pipeline run produced.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub stages_run: Vec<Stage>,
    pub model: Option<ModelFile>,
    pub gains: Option<GainSet<f64>>,
    pub synthesis_feasible: Option<bool>,
    pub verification: Option<VerificationReport<f64>>,
    pub comparison: Option<Vec<ComparisonRow>>,
}

fn read(stage: Stage, path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::Dependency {
            stage: stage.name().into(),
            path: path.display().to_string(),
        });
    }
    Ok(fs::read_to_string(path)?)
}

fn load_model(stage: Stage, layout: &Layout) -> Result<ModelFile> {
    let path = layout.model();
    formats::parse_model(&read(stage, &path)?, &path.display().to_string())
}

fn load_gains(stage: Stage, layout: &Layout) -> Result<GainSet<f64>> {
    let path = layout.gains();
    formats::parse_gains(&read(stage, &path)?, &path.display().to_string())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Runs `stages` in dependency order; the first failure stops the run.
pub fn run_pipeline(cfg: &ScenarioConfig, stages: &[Stage], out: &Path) -> Result<PipelineOutcome> {
    let layout = Layout::new(out);
    fs::create_dir_all(out)?;
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut outcome = PipelineOutcome::default();
    for stage in ordered {
        log::info!("stage {stage}");
        let wrap = |e: Error| match e {
            dep @ Error::Dependency { .. } => dep,
            other => Error::Stage {
                stage: stage.name().into(),
                source: Box::new(other),
            },
        };
        match stage {
            Stage::Identify => outcome.model = Some(identify_stage(cfg, &layout).map_err(wrap)?),
            Stage::Synthesize => {
                let (gains, feasible) = synthesize_stage(cfg, &layout).map_err(wrap)?;
                outcome.gains = Some(gains);
                outcome.synthesis_feasible = Some(feasible);
            }
            Stage::Verify => outcome.verification = Some(verify_stage(cfg, &layout).map_err(wrap)?),
            Stage::Simulate => simulate_stage(cfg, &layout).map_err(wrap)?,
            Stage::Compare => outcome.comparison = Some(compare_stage(cfg, &layout).map_err(wrap)?),
        }
        outcome.stages_run.push(stage);
    }
    Ok(outcome)
}

pub fn identify_stage(cfg: &ScenarioConfig, layout: &Layout) -> Result<ModelFile> {
    let fbox = cfg.fuzzy_box()?;
    let seed = cfg.identify.seed;
    let samples = generate_training_data(&cfg.market, &fbox, cfg.identify.samples, seed)?;
    let model = identify_rule_matrices(&samples, &fbox, &cfg.identify_options())?;
    let fresh = generate_training_data(&cfg.market, &fbox, cfg.identify.samples, seed.wrapping_add(1))?;
    let file = ModelFile {
        fresh_sup_error: approximation_error_sup(&model, &fresh),
        model,
        seed,
    };
    log::info!(
        "identified {} rules: sup error {:.4} (training), {:.4} (fresh)",
        file.model.rule_count(),
        file.model.sup_error,
        file.fresh_sup_error
    );
    write(&layout.model(), &formats::format_model(&file))?;
    Ok(file)
}

/// Returns the written gains and whether they carry a certificate.
pub fn synthesize_stage(cfg: &ScenarioConfig, layout: &Layout) -> Result<(GainSet<f64>, bool)> {
    let model = load_model(Stage::Synthesize, layout)?;
    let s = &cfg.synthesize;
    let options = cfg.solver_options();
    let problem = LmiProblem::from_model(&model.model, &cfg.market, s.gamma_sq)?;
    let outcome = if s.minimize {
        let [lo, hi] = s.gamma_bracket;
        match minimize_gamma(&problem, lo, hi, s.bisect_tol, &options) {
            Ok((_, solution)) => Feasibility::Feasible(solution),
            Err(Error::Bracket(reason)) if s.allow_uncertified => {
                log::warn!("{reason}");
                solve_feasibility_with(&problem.with_gamma(hi), &options)?
            }
            Err(e) => return Err(e),
        }
    } else {
        solve_feasibility_with(&problem, &options)?
    };
    let feasible = outcome.is_feasible();
    let reason = match &outcome {
        Feasibility::Infeasible { reason, .. } => Some(reason.clone()),
        Feasibility::Feasible(_) => None,
    };
    let solution = outcome.into_solution();
    write(
        &layout.synthesis_report(),
        &formats::format_synthesis_report(&solution, feasible, reason.as_deref()),
    )?;
    if !feasible && !s.allow_uncertified {
        return Err(Error::Infeasible(format!(
            "{}; set synthesize.allow_uncertified = true to keep the best-effort gains",
            reason.unwrap_or_default()
        )));
    }
    if !feasible {
        log::warn!("writing uncertified gains: {}", reason.unwrap_or_default());
    }
    let mut gains = recover_gains(&solution)?;
    gains.provenance.epsilon = cfg.market.epsilon;
    gains.provenance.seed = model.seed;
    write(&layout.gains(), &formats::format_gains(&gains))?;
    Ok((gains, feasible))
}

pub fn verify_stage(cfg: &ScenarioConfig, layout: &Layout) -> Result<VerificationReport<f64>> {
    let model = load_model(Stage::Verify, layout)?;
    let gains = load_gains(Stage::Verify, layout)?;
    let problem = LmiProblem::from_model(&model.model, &cfg.market, gains.gamma * gains.gamma)?;
    let options = cfg.verify_options();
    let report = verify_solution(&problem, &gains, &gains.q, &model.model.fuzzy_box, &options)?;
    write(
        &layout.verification_report(),
        &formats::format_verification_report(&report, &gains, options.seed),
    )?;
    if !report.passed() {
        let worst = report.lmi25_margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let msg = format!("worst P-form eigenvalue {worst:e}, sampled dissipation max {:e}", report.phi_sample_max);
        if cfg.synthesize.allow_uncertified && !gains.provenance.certified {
            log::warn!("uncertified gains fail verification: {msg}");
        } else {
            return Err(Error::Infeasible(msg));
        }
    }
    Ok(report)
}

fn build_policy(cfg: &ScenarioConfig, kind: PolicyKind, layout: &Layout) -> Result<PricingPolicy<f64>> {
    let policy = match kind {
        PolicyKind::Ace => PricingPolicy::ace(cfg.sim.initial_lambda, cfg.market.tau_lambda)?,
        PolicyKind::Fuzzy => {
            let model = load_model(Stage::Simulate, layout)?;
            let gains = load_gains(Stage::Simulate, layout)?;
            PricingPolicy::fuzzy(Arc::new(gains), Arc::new(model.model.fuzzy_box))?
        }
    };
    let policy = policy.with_storage_target(cfg.controller.storage_target);
    match cfg.controller.clamp {
        Some([lo, hi]) => policy.with_clamp(lo, hi),
        None => Ok(policy),
    }
}

/// One trajectory file per (seed, policy); seeds run concurrently.
pub fn simulate_stage(cfg: &ScenarioConfig, layout: &Layout) -> Result<()> {
    let policies = cfg
        .controller
        .policies
        .iter()
        .map(|&k| build_policy(cfg, k, layout).map(|p| (k, p)))
        .collect::<Result<Vec<_>>>()?;
    let sim = cfg.sim_config();
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .disturbance
            .seeds
            .iter()
            .map(|&seed| {
                let policies = &policies;
                scope.spawn(move || -> Result<()> {
                    let dist = cfg.disturbance_spec(seed);
                    for (kind, policy) in policies {
                        let path = layout.trajectory(*kind, seed);
                        let traj = match simulate_closed_loop(&cfg.market, policy, &dist, &sim) {
                            Ok(t) => t,
                            Err(failure) => {
                                // keep what was recorded for diagnosis
                                let partial = path.with_extension("partial.csv");
                                write(&partial, &formats::format_trajectory_csv(&failure.prefix))?;
                                return Err(failure.error);
                            }
                        };
                        write(&path, &formats::format_trajectory_csv(&traj))?;
                        if cfg.outputs.plot_data {
                            let metrics = compute_metrics(&traj, cfg.metrics.band, cfg.metrics_window())?;
                            formats::emit_plot_data(&traj, &metrics, &layout.plot_dir(*kind, seed))?;
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    results.into_iter().collect()
}

/// Metrics for every recorded run, written as CSV and as a table.
pub fn compare_stage(cfg: &ScenarioConfig, layout: &Layout) -> Result<Vec<ComparisonRow>> {
    let mut fuzzy_check = None;
    if cfg.controller.policies.contains(&PolicyKind::Fuzzy) {
        let model = load_model(Stage::Compare, layout)?;
        let gains = load_gains(Stage::Compare, layout)?;
        let problem = LmiProblem::from_model(&model.model, &cfg.market, gains.gamma * gains.gamma)?;
        let p = lyapunov_matrix(&gains.q)?;
        fuzzy_check = Some((model, gains, problem, p));
    }
    let mut rows = Vec::new();
    for &seed in &cfg.disturbance.seeds {
        for &kind in &cfg.controller.policies {
            let path = layout.trajectory(kind, seed);
            let traj: Trajectory<f64> = formats::parse_trajectory_csv(&read(Stage::Compare, &path)?, &path.display().to_string())?;
            let metrics = compute_metrics(&traj, cfg.metrics.band, cfg.metrics_window())?;
            let dissipation = match (&fuzzy_check, kind) {
                (Some((model, gains, problem, p)), PolicyKind::Fuzzy) => {
                    Some(dissipation_check_along(&traj, problem, gains, p, &model.model.fuzzy_box, true))
                }
                _ => None,
            };
            rows.push(ComparisonRow {
                seed,
                policy: kind,
                metrics,
                dissipation,
            });
        }
    }
    write(&layout.comparison_csv(), &formats::format_comparison(&rows))?;
    write(&layout.comparison_table(), &formats::format_comparison_table(&rows))?;
    Ok(rows)
}
