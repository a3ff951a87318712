//! Scenario configuration: a sectioned TOML file.
//!
//! Every section except `[synthesize]`, `[metrics]` and `[outputs]` must be
//! present. Seeds have no defaults. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::PolicyKind;
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyBox, IdentifyOptions, Weighting};
use crate::lmi::{SolverOptions, VerifyOptions};
use crate::market::{MarketParams, MarketState};
use crate::sim::{DisturbanceSpec, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketParams<f64>,
    #[serde(rename = "box")]
    pub fuzzy_box: BoxSection,
    pub identify: IdentifySection,
    #[serde(default)]
    pub synthesize: SynthesizeSection,
    pub verify: VerifySection,
    pub controller: ControllerSection,
    pub disturbance: DisturbanceSection,
    pub sim: SimSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub p_g: [f64; 2],
    pub p_d: [f64; 2],
    pub e: [f64; 2],
    /// Membership functions per axis.
    #[serde(default = "default_counts")]
    pub counts: [usize; 3],
}

fn default_counts() -> [usize; 3] {
    [4, 4, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifySection {
    #[serde(default = "default_training_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub weighting: Weighting,
}

fn default_training_samples() -> usize {
    1500
}

fn default_ridge() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesizeSection {
    pub gamma_sq: f64,
    /// Bisect on γ over `gamma_bracket` instead of using `gamma_sq`.
    pub minimize: bool,
    pub gamma_bracket: [f64; 2],
    pub bisect_tol: f64,
    pub margin: f64,
    pub tol: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// `inf` removes the bound.
    pub y_max: f64,
    pub stop_margin: f64,
    /// Write best-effort gains (flagged uncertified) when no certificate is found.
    pub allow_uncertified: bool,
}

impl Default for SynthesizeSection {
    fn default() -> Self {
        let s = SolverOptions::<f64>::default();
        Self {
            gamma_sq: 2.0,
            minimize: false,
            gamma_bracket: [0.1, std::f64::consts::SQRT_2],
            bisect_tol: 1e-3,
            margin: s.margin,
            tol: s.tol,
            q_min: s.q_min,
            q_max: s.q_max,
            y_max: s.y_max.unwrap_or(f64::INFINITY),
            stop_margin: s.stop_margin,
            allow_uncertified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_verify_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_w_bounds")]
    pub w_bounds: [[f64; 2]; 3],
}

fn default_verify_samples() -> usize {
    10_000
}

fn default_w_bounds() -> [[f64; 2]; 3] {
    [[-1.0, 1.0]; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub storage_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp: Option<[f64; 2]>,
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Ace, PolicyKind::Fuzzy]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_ranges")]
    pub ranges: [[f64; 2]; 3],
    #[serde(default = "default_hold")]
    pub hold_interval: f64,
    /// One run per seed; each seed drives both policies.
    pub seeds: Vec<u64>,
}

fn default_ranges() -> [[f64; 2]; 3] {
    [[-0.5, 0.5], [-0.4, 0.6], [0.0, 2.0]]
}

fn default_hold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_initial_state")]
    pub initial_state: [f64; 3],
    #[serde(default = "default_initial_lambda")]
    pub initial_lambda: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default = "default_guard")]
    pub divergence_guard: f64,
}

fn default_dt() -> f64 {
    0.01
}

fn default_initial_state() -> [f64; 3] {
    [10.4, 13.0, 0.0]
}

fn default_initial_lambda() -> f64 {
    4.66
}

fn default_stride() -> usize {
    1
}

fn default_guard() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub band: f64,
    /// Averaging window for the supply–demand gap; defaults to the final
    /// two thirds of the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { band: 0.1, window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    pub dir: String,
    /// Per-variable series and a metrics summary for every run.
    pub plot_data: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            plot_data: true,
        }
    }
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, file: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
        file: file.into(),
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;
    cfg.validate().map_err(|(section, key, message)| Error::Parse {
        file: file.into(),
        line: locate(text, section, key),
        message: format!("`{section}.{key}`: {message}"),
    })?;
    Ok(cfg)
}

/// Serialises back to the file format.
pub fn emit_config(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key` inside `[section]`, else of the section header, else 0.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header
}

type Invalid = (&'static str, &'static str, String);

fn positive(section: &'static str, key: &'static str, v: f64) -> std::result::Result<(), Invalid> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err((section, key, format!("must be finite and strictly positive, got {v}")))
    }
}

fn range(section: &'static str, key: &'static str, r: [f64; 2]) -> std::result::Result<(), Invalid> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err((section, key, format!("invalid range [{}, {}]", r[0], r[1])))
    }
}

impl ScenarioConfig {
    fn validate(&self) -> std::result::Result<(), Invalid> {
        if let Err(e) = self.market.validate() {
            let key = match &e {
                Error::Parameter { name, .. } => *name,
                _ => "tau_g",
            };
            return Err(("market", key, e.to_string()));
        }
        let b = &self.fuzzy_box;
        for (key, r) in [("p_g", b.p_g), ("p_d", b.p_d), ("e", b.e)] {
            range("box", key, r)?;
            if r[0] == r[1] {
                return Err(("box", key, "empty interval".into()));
            }
        }
        if b.counts.iter().any(|&c| c < 2) {
            return Err(("box", "counts", "need at least 2 membership functions per axis".into()));
        }
        let rules: usize = b.counts.iter().product();
        if self.identify.samples < rules {
            return Err(("identify", "samples", format!("{} samples for {rules} rules", self.identify.samples)));
        }
        if !(self.identify.ridge >= 0.0) {
            return Err(("identify", "ridge", "must be non-negative".into()));
        }
        let s = &self.synthesize;
        positive("synthesize", "gamma_sq", s.gamma_sq)?;
        positive("synthesize", "bisect_tol", s.bisect_tol)?;
        positive("synthesize", "margin", s.margin)?;
        positive("synthesize", "tol", s.tol)?;
        positive("synthesize", "q_min", s.q_min)?;
        positive("synthesize", "q_max", s.q_max)?;
        positive("synthesize", "stop_margin", s.stop_margin)?;
        if !(s.y_max > 0.0) {
            return Err(("synthesize", "y_max", "must be positive (inf for no bound)".into()));
        }
        if s.q_max <= s.q_min {
            return Err(("synthesize", "q_max", "must exceed q_min".into()));
        }
        if !(s.gamma_bracket[0] > 0.0 && s.gamma_bracket[0] < s.gamma_bracket[1]) {
            return Err(("synthesize", "gamma_bracket", "need 0 < lo < hi".into()));
        }
        if self.verify.samples == 0 {
            return Err(("verify", "samples", "must be at least 1".into()));
        }
        for r in self.verify.w_bounds {
            range("verify", "w_bounds", r)?;
        }
        let c = &self.controller;
        if c.policies.is_empty() {
            return Err(("controller", "policies", "no policy selected".into()));
        }
        let mut sorted = c.policies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != c.policies.len() {
            return Err(("controller", "policies", "duplicate policy".into()));
        }
        if !c.storage_target.is_finite() {
            return Err(("controller", "storage_target", "must be finite".into()));
        }
        if let Some(r) = c.clamp {
            range("controller", "clamp", r)?;
        }
        let d = &self.disturbance;
        if d.seeds.is_empty() {
            return Err(("disturbance", "seeds", "at least one seed is required".into()));
        }
        for r in d.ranges {
            range("disturbance", "ranges", r)?;
        }
        positive("disturbance", "hold_interval", d.hold_interval)?;
        let sim = &self.sim;
        positive("sim", "t_end", sim.t_end)?;
        positive("sim", "dt", sim.dt)?;
        positive("sim", "divergence_guard", sim.divergence_guard)?;
        if sim.record_stride == 0 {
            return Err(("sim", "record_stride", "must be at least 1".into()));
        }
        if sim.initial_state.iter().chain([&sim.initial_lambda]).any(|v| !v.is_finite()) {
            return Err(("sim", "initial_state", "must be finite".into()));
        }
        let sc = self.sim_config();
        if let Err(e) = sc.validate() {
            return Err(("sim", "t_end", e.to_string()));
        }
        if d.enabled {
            let ratio = d.hold_interval / sim.dt;
            if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.round() {
                return Err(("disturbance", "hold_interval", format!("not a multiple of sim.dt = {}", sim.dt)));
            }
        }
        positive("metrics", "band", self.metrics.band)?;
        if let Some(w) = self.metrics.window {
            range("metrics", "window", w)?;
        }
        if self.outputs.dir.is_empty() {
            return Err(("outputs", "dir", "empty path".into()));
        }
        Ok(())
    }

    /// Replaces every seed with `seed`; the disturbance runs collapse to one.
    pub fn with_seed_override(mut self, seed: u64) -> Self {
        self.identify.seed = seed;
        self.verify.seed = seed;
        self.disturbance.seeds = vec![seed];
        self
    }

    pub fn fuzzy_box(&self) -> Result<FuzzyBox<f64>> {
        let b = &self.fuzzy_box;
        FuzzyBox::uniform([(b.p_g[0], b.p_g[1]), (b.p_d[0], b.p_d[1]), (b.e[0], b.e[1])], b.counts)
    }

    pub fn identify_options(&self) -> IdentifyOptions<f64> {
        IdentifyOptions {
            ridge: self.identify.ridge,
            weighting: self.identify.weighting,
        }
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        let s = &self.synthesize;
        SolverOptions {
            margin: s.margin,
            tol: s.tol,
            q_min: s.q_min,
            q_max: s.q_max,
            y_max: s.y_max.is_finite().then_some(s.y_max),
            stop_margin: s.stop_margin,
            ..SolverOptions::default()
        }
    }

    pub fn verify_options(&self) -> VerifyOptions<f64> {
        let w = self.verify.w_bounds;
        VerifyOptions {
            samples: self.verify.samples,
            seed: self.verify.seed,
            w_bounds: [(w[0][0], w[0][1]), (w[1][0], w[1][1]), (w[2][0], w[2][1])],
        }
    }

    pub fn disturbance_spec(&self, seed: u64) -> DisturbanceSpec<f64> {
        let r = self.disturbance.ranges;
        DisturbanceSpec {
            ranges: [(r[0][0], r[0][1]), (r[1][0], r[1][1]), (r[2][0], r[2][1])],
            hold_interval: self.disturbance.hold_interval,
            seed,
            enabled: self.disturbance.enabled,
        }
    }

    pub fn sim_config(&self) -> SimConfig<f64> {
        let s = &self.sim;
        SimConfig {
            t_end: s.t_end,
            dt: s.dt,
            initial_state: MarketState::new(s.initial_state[0], s.initial_state[1], s.initial_state[2]),
            initial_lambda: s.initial_lambda,
            record_stride: s.record_stride,
            divergence_guard: s.divergence_guard,
        }
    }

    pub fn metrics_window(&self) -> (f64, f64) {
        match self.metrics.window {
            Some([a, b]) => (a, b),
            None => (self.sim.t_end / 3.0, self.sim.t_end),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[market]
c_g = 0.4
c_d = 0.5
tau_g = 0.2
tau_d = 0.25
b_g_hat = 2.0
b_d_hat = 10.0
k = 0.1
tau_lambda = 100.0
epsilon = 0.1

[box]
p_g = [5.0, 25.0]
p_d = [5.0, 25.0]
e = [-10.0, 10.0]

[identify]
seed = 3

[verify]
seed = 4

[controller]

[disturbance]
seeds = [0]

[sim]
t_end = 50.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, "m.cfg").unwrap();
        assert_eq!(c.market, MarketParams::table_one());
        assert_eq!(c.fuzzy_box().unwrap(), FuzzyBox::reference());
        assert_eq!(c.identify.samples, 1500);
        assert_eq!(c.synthesize.gamma_sq, 2.0);
        assert_eq!(c.controller.policies, vec![PolicyKind::Ace, PolicyKind::Fuzzy]);
        assert_eq!(c.metrics_window(), (50.0 / 3.0, 50.0));
    }

    #[test]
    fn round_trip() {
        let c = parse_config_str(MINIMAL, "m.cfg").unwrap();
        let text = emit_config(&c).unwrap();
        assert_eq!(parse_config_str(&text, "again").unwrap(), c);
    }

    #[test]
    fn positivity_error_names_key_and_line() {
        let text = MINIMAL.replace("tau_g = 0.2", "tau_g = 0.0");
        match parse_config_str(&text, "bad.cfg") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("tau_g") && message.contains("positive"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_seed_rejected() {
        let text = MINIMAL.replace("seed = 3", "");
        match parse_config_str(&text, "bad.cfg") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("seed"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("[sim]\n", "[sim]\nt_start = 1.0\n");
        match parse_config_str(&text, "bad.cfg") {
            Err(Error::Parse { line, message, .. }) => {
                assert!(message.contains("t_start"), "{message}");
                assert!(line > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hold_must_align_with_step() {
        let text = MINIMAL.replace("seeds = [0]", "seeds = [0]\nenabled = true\nhold_interval = 0.015");
        assert!(parse_config_str(&text, "bad.cfg").is_err());
    }

    #[test]
    fn seed_override_replaces_all_seeds() {
        let c = parse_config_str(MINIMAL, "m.cfg").unwrap().with_seed_override(9);
        assert_eq!((c.identify.seed, c.verify.seed, c.disturbance.seeds.clone()), (9, 9, vec![9]));
    }
}
