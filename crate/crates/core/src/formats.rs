//! Plain-text artifact formats.
//!
//! Model and gain files are line oriented: a keyword followed by
//! whitespace-separated values, `#` starts a comment. Reals are written with
//! 17 significant digits so every value survives a write/read cycle exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, RowVector3, Vector2};

use crate::control::PolicyKind;
use crate::error::{Error, Result};
use crate::fuzzy::{AxisPartition, FuzzyBox, IdentifiedModel};
use crate::lmi::{GainSet, LmiSolution, Provenance, VerificationReport};
use crate::market::{Disturbance, MarketState};
use crate::sim::{Metrics, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,p_g,p_d,e,lambda,w_dg,w_dd,w_in,z1,z2";

const AXIS_NAMES: [&str; 3] = ["p_g", "p_d", "e"];

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(real).collect::<Vec<_>>().join(" ")
}

fn matrix_row_major(m: &Matrix3<f64>) -> impl Iterator<Item = f64> + '_ {
    (0..3).flat_map(move |r| (0..3).map(move |c| m[(r, c)]))
}

/// Tokenised view of a keyword file.
struct Lines<'a> {
    file: &'a str,
    lines: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, file: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("").trim();
                (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
            })
            .collect();
        Self { file, lines }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.into(),
            line,
            message: message.into(),
        }
    }

    fn find(&self, key: &str) -> Result<(usize, &[&'a str])> {
        self.lines
            .iter()
            .find(|(_, t)| t[0] == key)
            .map(|(n, t)| (*n, &t[1..]))
            .ok_or_else(|| self.err(0, format!("missing `{key}` line")))
    }

    fn all(&self, key: &str) -> impl Iterator<Item = (usize, &[&'a str])> + '_ {
        let key = key.to_string();
        self.lines.iter().filter(move |(_, t)| t[0] == key).map(|(n, t)| (*n, &t[1..]))
    }

    fn number<N: std::str::FromStr>(&self, line: usize, token: &str) -> Result<N> {
        token.parse().map_err(|_| self.err(line, format!("cannot parse `{token}` as a number")))
    }

    fn numbers(&self, line: usize, tokens: &[&str], expected: usize) -> Result<Vec<f64>> {
        if tokens.len() != expected {
            return Err(self.err(line, format!("expected {expected} values, found {}", tokens.len())));
        }
        tokens.iter().map(|t| self.number(line, t)).collect()
    }

    fn scalar<N: std::str::FromStr>(&self, key: &str) -> Result<N> {
        let (n, t) = self.find(key)?;
        if t.len() != 1 {
            return Err(self.err(n, format!("`{key}` takes one value")));
        }
        self.number(n, t[0])
    }
}

/// A fitted model with the seed it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: IdentifiedModel<f64>,
    pub seed: u64,
    /// Sup error on an independent sample set.
    pub fresh_sup_error: f64,
}

pub fn format_model(m: &ModelFile) -> String {
    let mut s = String::from("# gridprice fuzzy model\n");
    writeln!(s, "rules {}", m.model.rule_count()).unwrap();
    for (name, axis) in AXIS_NAMES.iter().zip(&m.model.fuzzy_box.axes) {
        writeln!(s, "axis {name} {}", reals(axis.peaks.iter().copied())).unwrap();
    }
    writeln!(s, "samples {}", m.model.sample_count).unwrap();
    writeln!(s, "seed {}", m.seed).unwrap();
    writeln!(s, "sup_error {}", real(m.model.sup_error)).unwrap();
    writeln!(s, "fresh_sup_error {}", real(m.fresh_sup_error)).unwrap();
    s.push_str("# rule m: A_m row-major\n");
    for (i, a) in m.model.rules.iter().enumerate() {
        writeln!(s, "rule {i} {}", reals(matrix_row_major(a))).unwrap();
    }
    s
}

pub fn parse_model(text: &str, file: &str) -> Result<ModelFile> {
    let l = Lines::new(text, file);
    let rules: usize = l.scalar("rules")?;
    let mut axes = Vec::with_capacity(3);
    for name in AXIS_NAMES {
        let (n, t) = l
            .all("axis")
            .find(|(_, t)| t.first() == Some(&name))
            .ok_or_else(|| l.err(0, format!("missing axis `{name}`")))?;
        let peaks = t[1..].iter().map(|v| l.number(n, v)).collect::<Result<Vec<f64>>>()?;
        axes.push(AxisPartition::from_peaks(peaks).map_err(|e| l.err(n, e.to_string()))?);
    }
    let fuzzy_box = FuzzyBox {
        axes: [axes[0].clone(), axes[1].clone(), axes[2].clone()],
    };
    if fuzzy_box.rule_count() != rules {
        return Err(l.err(l.find("rules")?.0, format!("{rules} rules but the axes define {}", fuzzy_box.rule_count())));
    }
    let mut mats = vec![None; rules];
    for (n, t) in l.all("rule") {
        let Some((idx, vals)) = t.split_first() else {
            return Err(l.err(n, "empty rule line"));
        };
        let i: usize = l.number(n, idx)?;
        if i >= rules {
            return Err(l.err(n, format!("rule index {i} out of range")));
        }
        let v = l.numbers(n, vals, 9)?;
        mats[i] = Some(Matrix3::from_row_slice(&v));
    }
    let rules_vec = mats
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| l.err(0, format!("rule {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelFile {
        model: IdentifiedModel {
            fuzzy_box,
            rules: rules_vec,
            sup_error: l.scalar("sup_error")?,
            sample_count: l.scalar("samples")?,
        },
        seed: l.scalar("seed")?,
        fresh_sup_error: l.scalar("fresh_sup_error")?,
    })
}

pub fn format_gains(g: &GainSet<f64>) -> String {
    let p = &g.provenance;
    let mut s = String::from("# gridprice gain set\n");
    writeln!(s, "rules {}", g.rule_count()).unwrap();
    writeln!(s, "gamma {}", real(g.gamma)).unwrap();
    writeln!(s, "epsilon {}", real(p.epsilon)).unwrap();
    writeln!(s, "margin {}", real(p.margin)).unwrap();
    writeln!(s, "tol {}", real(p.tol)).unwrap();
    writeln!(s, "seed {}", p.seed).unwrap();
    writeln!(s, "certified {}", u8::from(p.certified)).unwrap();
    writeln!(s, "worst_block_margin {}", real(p.worst_block_margin)).unwrap();
    writeln!(s, "newton_steps {}", p.newton_steps).unwrap();
    writeln!(s, "solver {}", p.solver).unwrap();
    s.push_str("# Q row-major\n");
    writeln!(s, "q {}", reals(matrix_row_major(&g.q))).unwrap();
    s.push_str("# gain m: K_m\n");
    for (i, k) in g.gains.iter().enumerate() {
        writeln!(s, "gain {i} {}", reals(k.iter().copied())).unwrap();
    }
    s
}

pub fn parse_gains(text: &str, file: &str) -> Result<GainSet<f64>> {
    let l = Lines::new(text, file);
    let rules: usize = l.scalar("rules")?;
    let mut gains = vec![None; rules];
    for (n, t) in l.all("gain") {
        let Some((idx, vals)) = t.split_first() else {
            return Err(l.err(n, "empty gain line"));
        };
        let i: usize = l.number(n, idx)?;
        if i >= rules {
            return Err(l.err(n, format!("gain index {i} out of range")));
        }
        let v = l.numbers(n, vals, 3)?;
        gains[i] = Some(RowVector3::new(v[0], v[1], v[2]));
    }
    let gains = gains
        .into_iter()
        .enumerate()
        .map(|(i, k)| k.ok_or_else(|| l.err(0, format!("gain {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let (qn, qt) = l.find("q")?;
    let q = Matrix3::from_row_slice(&l.numbers(qn, qt, 9)?);
    let (_, solver) = l.find("solver")?;
    let certified: u8 = l.scalar("certified")?;
    let g = GainSet {
        gains,
        gamma: l.scalar("gamma")?,
        q,
        provenance: Provenance {
            solver: solver.join(" "),
            newton_steps: l.scalar("newton_steps")?,
            tol: l.scalar("tol")?,
            margin: l.scalar("margin")?,
            worst_block_margin: l.scalar("worst_block_margin")?,
            certified: certified != 0,
            epsilon: l.scalar("epsilon")?,
            seed: l.scalar("seed")?,
        },
    };
    g.validate().map_err(|e| l.err(0, e.to_string()))?;
    Ok(g)
}

pub fn format_synthesis_report(solution: &LmiSolution<f64>, feasible: bool, reason: Option<&str>) -> String {
    let mut s = String::from("# gridprice synthesis report\n");
    writeln!(s, "status {}", if feasible { "feasible" } else { "infeasible" }).unwrap();
    if let Some(r) = reason {
        writeln!(s, "reason {r}").unwrap();
    }
    writeln!(s, "gamma {}", real(solution.gamma)).unwrap();
    writeln!(s, "margin {}", real(solution.margin)).unwrap();
    writeln!(s, "newton_steps {}", solution.newton_steps).unwrap();
    writeln!(s, "q_margin {}", real(solution.q_margin)).unwrap();
    writeln!(s, "worst_block_margin {}", real(solution.worst_block_margin())).unwrap();
    s.push_str("# block m: largest eigenvalue of the synthesis LMI\n");
    for (i, v) in solution.block_margins.iter().enumerate() {
        writeln!(s, "block {i} {}", real(*v)).unwrap();
    }
    s
}

pub fn format_verification_report(r: &VerificationReport<f64>, gains: &GainSet<f64>, seed: u64) -> String {
    let mut s = String::from("# gridprice verification report\n");
    writeln!(s, "rules {}", r.lmi25_margins.len()).unwrap();
    writeln!(s, "gamma {}", real(gains.gamma)).unwrap();
    writeln!(s, "gains_certified {}", u8::from(gains.provenance.certified)).unwrap();
    writeln!(s, "passed {}", u8::from(r.passed())).unwrap();
    writeln!(s, "seed {seed}").unwrap();
    writeln!(s, "samples_used {}", r.samples_used).unwrap();
    writeln!(s, "phi_sample_max {}", real(r.phi_sample_max)).unwrap();
    let worst = r.lmi25_margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    writeln!(s, "worst_margin {}", real(worst)).unwrap();
    s.push_str("# P = Q^-1 row-major\n");
    writeln!(s, "p {}", reals(matrix_row_major(&r.p_matrix))).unwrap();
    s.push_str("# margin m: largest eigenvalue of the P-form block\n");
    for (i, v) in r.lmi25_margins.iter().enumerate() {
        writeln!(s, "margin {i} {}", real(*v)).unwrap();
    }
    s
}

/// Margins and `phi_sample_max` of a verification report.
pub fn parse_verification_report(text: &str, file: &str) -> Result<(Vec<f64>, f64)> {
    let l = Lines::new(text, file);
    let margins = l
        .all("margin")
        .map(|(n, t)| l.numbers(n, t, 2).map(|v| v[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok((margins, l.scalar("phi_sample_max")?))
}

pub fn format_trajectory_csv(traj: &Trajectory<f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(traj.len() * 160));
    w.write_record(TRAJECTORY_HEADER.split(',')).expect("in-memory write");
    for i in 0..traj.len() {
        let (x, d, z) = (&traj.states[i], &traj.disturbances[i], &traj.outputs[i]);
        w.serialize([traj.times[i], x.p_g, x.p_d, x.e, traj.prices[i], d.delta_g, d.delta_d, d.in_dev, z[0], z[1]])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn parse_trajectory_csv(text: &str, file: &str) -> Result<Trajectory<f64>> {
    let err = |line: usize, message: String| Error::Parse {
        file: file.into(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != TRAJECTORY_HEADER {
        return Err(err(1, format!("expected header `{TRAJECTORY_HEADER}`")));
    }
    let mut traj = Trajectory {
        times: vec![],
        states: vec![],
        prices: vec![],
        disturbances: vec![],
        outputs: vec![],
    };
    for row in reader.deserialize::<[f64; 10]>() {
        let v = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            err(line, e.to_string())
        })?;
        traj.times.push(v[0]);
        traj.states.push(MarketState::new(v[1], v[2], v[3]));
        traj.prices.push(v[4]);
        traj.disturbances.push(Disturbance::new(v[5], v[6], v[7]));
        traj.outputs.push(Vector2::new(v[8], v[9]));
    }
    Ok(traj)
}

fn opt(v: Option<f64>) -> String {
    v.map(real).unwrap_or_else(|| "none".into())
}

pub fn format_metrics(m: &Metrics<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "settling_time {}", opt(m.settling_time)).unwrap();
    writeln!(s, "rms_imbalance {}", real(m.rms_imbalance)).unwrap();
    writeln!(s, "max_abs_imbalance {}", real(m.max_abs_imbalance)).unwrap();
    writeln!(s, "mean_supply_demand_gap {}", real(m.mean_supply_demand_gap)).unwrap();
    writeln!(s, "empirical_ratio {}", opt(m.empirical_ratio)).unwrap();
    s
}

/// Per-variable series `p_g.csv`, `p_d.csv`, `e.csv`, `lambda.csv` and `metrics.txt`.
pub fn emit_plot_data(traj: &Trajectory<f64>, metrics: &Metrics<f64>, dir: &Path) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::Config("cannot emit plot data for an empty trajectory".into()));
    }
    fs::create_dir_all(dir)?;
    let series: [(&str, Box<dyn Fn(usize) -> f64>); 4] = [
        ("p_g", Box::new(|i| traj.states[i].p_g)),
        ("p_d", Box::new(|i| traj.states[i].p_d)),
        ("e", Box::new(|i| traj.states[i].e)),
        ("lambda", Box::new(|i| traj.prices[i])),
    ];
    for (name, value) in series {
        let mut s = format!("t,{name}\n");
        for i in 0..traj.len() {
            writeln!(s, "{},{}", traj.times[i], value(i)).unwrap();
        }
        fs::write(dir.join(format!("{name}.csv")), s)?;
    }
    fs::write(dir.join("metrics.txt"), format_metrics(metrics))?;
    Ok(())
}

/// One row of the controller comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub seed: u64,
    pub policy: PolicyKind,
    pub metrics: Metrics<f64>,
    /// `(max, fraction negative)` of the dissipation form along the run.
    pub dissipation: Option<(f64, f64)>,
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "policy",
        "settling_time",
        "rms_imbalance",
        "max_abs_imbalance",
        "mean_supply_demand_gap",
        "empirical_ratio",
        "dissipation_max",
        "dissipation_fraction_negative",
    ])
    .expect("in-memory write");
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.seed.to_string(),
            r.policy.slug().to_string(),
            opt(m.settling_time),
            real(m.rms_imbalance),
            real(m.max_abs_imbalance),
            real(m.mean_supply_demand_gap),
            opt(m.empirical_ratio),
            opt(r.dissipation.map(|d| d.0)),
            opt(r.dissipation.map(|d| d.1)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Human-readable table of the same rows.
pub fn format_comparison_table(rows: &[ComparisonRow]) -> String {
    let short = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    let mut s = format!(
        "{:>6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "seed", "policy", "settle", "rms(e)", "max|e|", "gap", "ratio"
    );
    for r in rows {
        let m = &r.metrics;
        writeln!(
            s,
            "{:>6} {:>6} {:>10} {:>10.4} {:>10.4} {:>10.4} {:>10}",
            r.seed,
            r.policy.to_string(),
            short(m.settling_time),
            m.rms_imbalance,
            m.max_abs_imbalance,
            m.mean_supply_demand_gap,
            short(m.empirical_ratio)
        )
        .unwrap();
    }
    s
}
