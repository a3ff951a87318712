//! H∞ state-feedback synthesis for the fuzzy market model.
//!
//! For every rule `m` the closed loop `ẋ = (A_m + τK_m)x + Bw`,
//! `z = (C + DK_m)x` must satisfy a common quadratic dissipation inequality.
//! With `Q = P⁻¹` and `Y_m = K_m Q` this becomes the 8×8 block LMI
//!
//! ```text
//! ⎡ A_mQ + τY_m + (·)ᵀ   B      QCᵀ + Y_mᵀDᵀ ⎤
//! ⎢ Bᵀ                  −γ²I₃   0           ⎥ ≺ 0,   Q ≻ 0.
//! ⎣ (·)ᵀ                 0      −I₂          ⎦
//! ```

pub mod barrier;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, RowVector3, SMatrix, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fuzzy::{sample_box, FuzzyBox, IdentifiedModel};
use crate::market::{assemble_system_matrices, Disturbance, MarketParams, MarketState, SystemMatrices};
use crate::scalar::Real;

use barrier::{AffineBlock, BarrierOptions};

pub type Block8<T> = SMatrix<T, 8, 8>;

/// Condition number beyond which `Q` is not inverted.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem<T: Real> {
    pub a_list: Vec<Matrix3<T>>,
    pub tau: Vector3<T>,
    pub b: Matrix3<T>,
    pub c: Matrix2x3<T>,
    pub d: Vector2<T>,
    pub gamma_sq: T,
}

impl<T: Real> LmiProblem<T> {
    pub fn new(a_list: Vec<Matrix3<T>>, sys: &SystemMatrices<T>, gamma_sq: T) -> Result<Self> {
        let p = Self {
            a_list,
            tau: sys.tau,
            b: sys.b_w,
            c: sys.c,
            d: sys.d,
            gamma_sq,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_model(model: &IdentifiedModel<T>, params: &MarketParams<T>, gamma_sq: T) -> Result<Self> {
        Self::new(model.rules.clone(), &assemble_system_matrices(params)?, gamma_sq)
    }

    pub fn with_gamma(&self, gamma: T) -> Self {
        Self {
            gamma_sq: gamma * gamma,
            ..self.clone()
        }
    }

    pub fn gamma(&self) -> T {
        self.gamma_sq.sqrt()
    }

    pub fn rule_count(&self) -> usize {
        self.a_list.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_list.is_empty() {
            return Err(Error::Dimension("LMI problem has no rules".into()));
        }
        if !(self.gamma_sq > T::zero()) || !self.gamma_sq.finite() {
            return Err(Error::Parameter {
                name: "gamma_sq",
                reason: format!("must be finite and positive, got {}", self.gamma_sq),
            });
        }
        let finite = self.a_list.iter().flat_map(|a| a.iter()).chain(self.tau.iter()).chain(self.b.iter()).chain(self.c.iter()).chain(self.d.iter()).all(|v| v.finite());
        if !finite {
            return Err(Error::Domain("LMI problem data"));
        }
        Ok(())
    }
}

/// The rule-`m` synthesis block, exactly symmetric.
pub fn assemble_rule_lmi<T: Real>(problem: &LmiProblem<T>, m: usize, q: &Matrix3<T>, y: &RowVector3<T>) -> Result<Block8<T>> {
    let a = problem.a_list.get(m).ok_or(Error::Index {
        index: m,
        count: problem.rule_count(),
    })?;
    let aq = a * q + problem.tau * y;
    let out = q * problem.c.transpose() + y.transpose() * problem.d.transpose();
    Ok(fill_block(&(aq + aq.transpose()), &problem.b, &out, problem.gamma_sq))
}

fn fill_block<T: Real>(top: &Matrix3<T>, b: &Matrix3<T>, out: &SMatrix<T, 3, 2>, gamma_sq: T) -> Block8<T> {
    let mut f = Block8::<T>::zeros();
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(top);
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    f.fixed_view_mut::<3, 3>(3, 0).copy_from(&b.transpose());
    f.fixed_view_mut::<3, 2>(0, 6).copy_from(out);
    f.fixed_view_mut::<2, 3>(6, 0).copy_from(&out.transpose());
    for i in 3..6 {
        f[(i, i)] = -gamma_sq;
    }
    for i in 6..8 {
        f[(i, i)] = -T::one();
    }
    f
}

fn largest_eigenvalue<T: Real>(m: &Block8<T>) -> T {
    m.symmetric_eigenvalues().max()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Required eigenvalue margin for every strict inequality.
    pub margin: T,
    /// Barrier duality-gap tolerance.
    pub tol: T,
    /// Search region `q_min I ≼ Q ≼ q_max I`. Shrinking `Q` only makes the
    /// constant `BBᵀ/γ²` term harder to dominate, so the lower bound costs
    /// little; it keeps best-effort iterates of infeasible problems away from
    /// singular `Q` and unbounded gains.
    pub q_min: T,
    pub q_max: T,
    /// Optional bound `‖Y_m‖ ≤ y_max` on every rule, limiting gain size.
    pub y_max: Option<T>,
    /// The solver stops once every block is below `−stop_margin`.
    pub stop_margin: T,
    pub max_newton: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            margin: T::lit(1e-6),
            tol: T::lit(1e-7),
            q_min: T::one(),
            q_max: T::lit(100.0),
            y_max: Some(T::lit(10.0)),
            stop_margin: T::lit(1e-3),
            max_newton: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiSolution<T: Real> {
    pub q: Matrix3<T>,
    pub y_list: Vec<RowVector3<T>>,
    pub gamma: T,
    /// Largest eigenvalue of each assembled rule block.
    pub block_margins: Vec<T>,
    /// Smallest eigenvalue of `Q`.
    pub q_margin: T,
    pub margin: T,
    pub tol: T,
    pub newton_steps: usize,
}

impl<T: Real> LmiSolution<T> {
    pub fn worst_block_margin(&self) -> T {
        self.block_margins.iter().fold(T::min_value().unwrap_or(-T::one() / T::default_epsilon()), |a, &b| a.max(b))
    }

    /// Eigenvalue certificate at the recorded margin.
    pub fn is_certified(&self) -> bool {
        self.q_margin >= self.margin && self.block_margins.iter().all(|&v| v <= -self.margin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T: Real> {
    Feasible(LmiSolution<T>),
    /// No certified point found; `best` is the last barrier iterate.
    Infeasible { best: LmiSolution<T>, reason: String },
}

impl<T: Real> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn solution(&self) -> &LmiSolution<T> {
        match self {
            Feasibility::Feasible(s) | Feasibility::Infeasible { best: s, .. } => s,
        }
    }

    pub fn into_solution(self) -> LmiSolution<T> {
        match self {
            Feasibility::Feasible(s) | Feasibility::Infeasible { best: s, .. } => s,
        }
    }
}

const Q_BASIS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn q_basis<T: Real>(k: usize) -> Matrix3<T> {
    let (i, j) = Q_BASIS[k];
    let mut e = Matrix3::zeros();
    e[(i, j)] = T::one();
    e[(j, i)] = T::one();
    e
}

fn q_from_vars<T: Real>(v: &DVector<T>) -> Matrix3<T> {
    let mut q = Matrix3::zeros();
    for (k, &(i, j)) in Q_BASIS.iter().enumerate() {
        q[(i, j)] = v[k];
        q[(j, i)] = v[k];
    }
    q
}

fn to_dmatrix<T: Real, const N: usize>(m: &SMatrix<T, N, N>) -> DMatrix<T> {
    DMatrix::from_iterator(N, N, m.iter().copied())
}

/// Eigenvalue certificate computed from freshly assembled blocks.
pub fn certify<T: Real>(problem: &LmiProblem<T>, q: &Matrix3<T>, y_list: &[RowVector3<T>]) -> Result<(Vec<T>, T)> {
    if y_list.len() != problem.rule_count() {
        return Err(Error::Dimension(format!("{} gain rows for {} rules", y_list.len(), problem.rule_count())));
    }
    let margins = y_list
        .iter()
        .enumerate()
        .map(|(m, y)| assemble_rule_lmi(problem, m, q, y).map(|f| largest_eigenvalue(&f)))
        .collect::<Result<Vec<_>>>()?;
    let q_margin = q.symmetric_eigenvalues().min();
    Ok((margins, q_margin))
}

/// Searches for `(Q, Y_m)` with every block `≼ −margin·I` and `Q ≽ margin·I`.
pub fn solve_feasibility<T: Real>(problem: &LmiProblem<T>, margin: T, tol: T) -> Result<Feasibility<T>> {
    solve_feasibility_with(
        problem,
        &SolverOptions {
            margin,
            tol,
            ..SolverOptions::default()
        },
    )
}

/// Minimises `t` subject to `F_m(Q, Y_m) ≼ tI` for all rules and
/// `margin·I ≼ Q ≼ q_max·I`, then certifies the iterate independently.
pub fn solve_feasibility_with<T: Real>(problem: &LmiProblem<T>, options: &SolverOptions<T>) -> Result<Feasibility<T>> {
    problem.validate()?;
    if !(options.margin > T::zero()) || !(options.tol > T::zero()) {
        return Err(Error::Parameter {
            name: "margin/tol",
            reason: "must be positive".into(),
        });
    }
    let q_lo = options.q_min.max(options.margin);
    if !(options.q_max > q_lo) || !options.q_max.finite() {
        return Err(Error::Parameter {
            name: "q_max",
            reason: "must be finite and exceed q_min and the margin".into(),
        });
    }
    let rules = problem.rule_count();
    let n = 6 + 3 * rules + 1;
    let t_var = n - 1;
    let zero_y = RowVector3::zeros();

    let mut blocks = Vec::with_capacity(rules + 2);
    for m in 0..rules {
        let f0 = assemble_rule_lmi(problem, m, &Matrix3::zeros(), &zero_y)?;
        let mut terms = Vec::with_capacity(10);
        for k in 0..6 {
            let fk = assemble_rule_lmi(problem, m, &q_basis(k), &zero_y)? - f0;
            terms.push((k, -to_dmatrix(&fk)));
        }
        for j in 0..3 {
            let mut y = RowVector3::zeros();
            y[j] = T::one();
            let fj = assemble_rule_lmi(problem, m, &Matrix3::zeros(), &y)? - f0;
            terms.push((6 + 3 * m + j, -to_dmatrix(&fj)));
        }
        terms.push((t_var, DMatrix::identity(8, 8)));
        blocks.push(AffineBlock {
            constant: -to_dmatrix(&f0),
            terms,
        });
    }
    let lower = AffineBlock {
        constant: DMatrix::identity(3, 3) * -q_lo,
        terms: (0..6).map(|k| (k, to_dmatrix(&q_basis::<T>(k)))).collect(),
    };
    let upper = AffineBlock {
        constant: DMatrix::identity(3, 3) * options.q_max,
        terms: (0..6).map(|k| (k, -to_dmatrix(&q_basis::<T>(k)))).collect(),
    };
    blocks.push(lower);
    blocks.push(upper);
    if let Some(y_max) = options.y_max {
        if !(y_max > T::zero()) {
            return Err(Error::Parameter {
                name: "y_max",
                reason: "must be positive".into(),
            });
        }
        // [[y_max I₃, Y_mᵀ], [Y_m, y_max]] ≻ 0  ⇔  ‖Y_m‖ < y_max
        for m in 0..rules {
            let terms = (0..3)
                .map(|j| {
                    let mut e = DMatrix::zeros(4, 4);
                    e[(3, j)] = T::one();
                    e[(j, 3)] = T::one();
                    (6 + 3 * m + j, e)
                })
                .collect();
            blocks.push(AffineBlock {
                constant: DMatrix::identity(4, 4) * y_max,
                terms,
            });
        }
    }

    // start at a scaled identity with zero gains
    let q0 = (q_lo + options.q_max) * T::lit(0.5);
    let mut x0 = DVector::zeros(n);
    x0[0] = q0;
    x0[3] = q0;
    x0[5] = q0;
    let q_start = q_from_vars(&x0);
    let mut worst = T::zero();
    for m in 0..rules {
        worst = worst.max(largest_eigenvalue(&assemble_rule_lmi(problem, m, &q_start, &zero_y)?));
    }
    x0[t_var] = worst.max(T::zero()) + T::one();

    let mut c = DVector::zeros(n);
    c[t_var] = T::one();
    let target = -options.stop_margin.max(options.margin * T::lit(2.0));
    let out = barrier::solve(
        &blocks,
        &c,
        x0,
        &BarrierOptions {
            gap_tol: options.tol,
            target: Some(target),
            max_newton: options.max_newton,
            ..BarrierOptions::default()
        },
    )?;

    let q = q_from_vars(&out.x);
    let y_list: Vec<RowVector3<T>> = (0..rules)
        .map(|m| RowVector3::new(out.x[6 + 3 * m], out.x[7 + 3 * m], out.x[8 + 3 * m]))
        .collect();
    let (block_margins, q_margin) = certify(problem, &q, &y_list)?;
    let solution = LmiSolution {
        q,
        y_list,
        gamma: problem.gamma(),
        block_margins,
        q_margin,
        margin: options.margin,
        tol: options.tol,
        newton_steps: out.newton_steps,
    };
    log::debug!(
        "LMI solve: gamma {} objective {:e} after {} Newton steps",
        solution.gamma,
        out.objective,
        out.newton_steps
    );
    if solution.is_certified() {
        Ok(Feasibility::Feasible(solution))
    } else {
        let reason = format!(
            "best attained worst-block eigenvalue {:e} (needs <= {:e}), min eig(Q) {:e}{}",
            solution.worst_block_margin(),
            -options.margin,
            solution.q_margin,
            if out.converged {
                String::new()
            } else {
                format!("; barrier stopped at gap bound {:e}", out.gap_bound)
            }
        );
        Ok(Feasibility::Infeasible { best: solution, reason })
    }
}

/// Bisection on γ for the smallest certified attenuation level.
pub fn minimize_gamma<T: Real>(
    problem: &LmiProblem<T>,
    gamma_lo: T,
    gamma_hi: T,
    bisect_tol: T,
    options: &SolverOptions<T>,
) -> Result<(T, LmiSolution<T>)> {
    if !(gamma_lo > T::zero() && gamma_lo < gamma_hi) || !(bisect_tol > T::zero()) {
        return Err(Error::Bracket(format!("need 0 < gamma_lo < gamma_hi and a positive tolerance, got [{gamma_lo}, {gamma_hi}]")));
    }
    let mut best = match solve_feasibility_with(&problem.with_gamma(gamma_hi), options)? {
        Feasibility::Feasible(s) => s,
        Feasibility::Infeasible { reason, .. } => {
            return Err(Error::Bracket(format!("infeasible at gamma_hi = {gamma_hi}: {reason}")));
        }
    };
    if let Feasibility::Feasible(s) = solve_feasibility_with(&problem.with_gamma(gamma_lo), options)? {
        return Ok((gamma_lo, s));
    }
    let (mut lo, mut hi) = (gamma_lo, gamma_hi);
    while hi - lo > bisect_tol {
        let mid = (lo + hi) * T::lit(0.5);
        match solve_feasibility_with(&problem.with_gamma(mid), options)? {
            Feasibility::Feasible(s) => {
                hi = mid;
                best = s;
            }
            Feasibility::Infeasible { .. } => lo = mid,
        }
    }
    Ok((hi, best))
}

/// Solver metadata carried with a gain set.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub solver: String,
    pub newton_steps: usize,
    pub tol: f64,
    pub margin: f64,
    pub worst_block_margin: f64,
    pub certified: bool,
    pub epsilon: f64,
    pub seed: u64,
}

/// Per-rule state-feedback gains `K_m`, with the `Q` they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet<T: Real> {
    pub gains: Vec<RowVector3<T>>,
    pub gamma: T,
    pub q: Matrix3<T>,
    pub provenance: Provenance,
}

impl<T: Real> GainSet<T> {
    pub fn rule_count(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::Dimension("gain set is empty".into()));
        }
        if !self.gains.iter().flat_map(|k| k.iter()).chain(self.q.iter()).all(|v| v.finite()) || !self.gamma.finite() {
            return Err(Error::Domain("gain set"));
        }
        Ok(())
    }

    /// Every gain scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            gains: self.gains.iter().map(|k| k * factor).collect(),
            ..self.clone()
        }
    }
}

fn condition_number<T: Real>(q: &Matrix3<T>) -> f64 {
    let eig = q.symmetric_eigenvalues();
    let (lo, hi) = (eig.min().to_f64_lossy(), eig.max().to_f64_lossy());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `K_m = Y_m Q⁻¹`.
pub fn recover_gains<T: Real>(solution: &LmiSolution<T>) -> Result<GainSet<T>> {
    let cond = condition_number(&solution.q);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Conditioning(cond));
    }
    let chol = solution.q.cholesky().ok_or(Error::Conditioning(cond))?;
    let gains = solution.y_list.iter().map(|y| chol.solve(&y.transpose()).transpose()).collect();
    Ok(GainSet {
        gains,
        gamma: solution.gamma,
        q: solution.q,
        provenance: Provenance {
            solver: "log-det barrier".into(),
            newton_steps: solution.newton_steps,
            tol: solution.tol.to_f64_lossy(),
            margin: solution.margin.to_f64_lossy(),
            worst_block_margin: solution.worst_block_margin().to_f64_lossy(),
            certified: solution.is_certified(),
            epsilon: f64::NAN,
            seed: 0,
        },
    })
}

fn closed_loop<T: Real>(problem: &LmiProblem<T>, m: usize, k: &RowVector3<T>) -> (Matrix3<T>, Matrix2x3<T>) {
    (problem.a_list[m] + problem.tau * k, problem.c + problem.d * k)
}

/// The rule-`m` analysis block in `P`-form.
pub fn assemble_p_form<T: Real>(problem: &LmiProblem<T>, m: usize, k: &RowVector3<T>, p: &Matrix3<T>) -> Result<Block8<T>> {
    if m >= problem.rule_count() {
        return Err(Error::Index {
            index: m,
            count: problem.rule_count(),
        });
    }
    let (at, ct) = closed_loop(problem, m, k);
    let pa = p * at;
    Ok(fill_block(&(pa + pa.transpose()), &(p * problem.b), &ct.transpose(), problem.gamma_sq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions<T> {
    pub samples: usize,
    pub seed: u64,
    /// Sampling range of each disturbance channel.
    pub w_bounds: [(T, T); 3],
}

impl<T: Real> VerifyOptions<T> {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            w_bounds: [(-T::one(), T::one()); 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T: Real> {
    pub p_matrix: Matrix3<T>,
    pub lmi25_margins: Vec<T>,
    pub phi_sample_max: T,
    pub samples_used: usize,
}

impl<T: Real> VerificationReport<T> {
    pub fn passed(&self) -> bool {
        self.lmi25_margins.iter().all(|&v| v < T::zero()) && self.phi_sample_max < T::zero()
    }
}

fn check_gains<T: Real>(problem: &LmiProblem<T>, gains: &GainSet<T>, fbox: Option<&FuzzyBox<T>>) -> Result<()> {
    if gains.rule_count() != problem.rule_count() || fbox.is_some_and(|b| b.rule_count() != problem.rule_count()) {
        return Err(Error::Dimension(format!(
            "{} gains, {} rule matrices{}",
            gains.rule_count(),
            problem.rule_count(),
            fbox.map(|b| format!(", {} box rules", b.rule_count())).unwrap_or_default()
        )));
    }
    Ok(())
}

/// `P = Q⁻¹`, symmetrised.
pub fn lyapunov_matrix<T: Real>(q: &Matrix3<T>) -> Result<Matrix3<T>> {
    let cond = condition_number(q);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Conditioning(cond));
    }
    let p = q.cholesky().ok_or(Error::Conditioning(cond))?.inverse();
    Ok((p + p.transpose()) * T::lit(0.5))
}

/// Re-checks a gain set in `P`-form and samples the blended dissipation form.
pub fn verify_solution<T: Real>(
    problem: &LmiProblem<T>,
    gains: &GainSet<T>,
    q: &Matrix3<T>,
    fbox: &FuzzyBox<T>,
    options: &VerifyOptions<T>,
) -> Result<VerificationReport<T>> {
    problem.validate()?;
    check_gains(problem, gains, Some(fbox))?;
    let p = lyapunov_matrix(q)?;
    let lmi25_margins = gains
        .gains
        .iter()
        .enumerate()
        .map(|(m, k)| assemble_p_form(problem, m, k, &p).map(|f| largest_eigenvalue(&f)))
        .collect::<Result<Vec<_>>>()?;

    let xs = sample_box(fbox, options.samples, options.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(1);
    let mut phi_max = T::min_value().unwrap_or(-T::one() / T::default_epsilon());
    for x in &xs {
        let mut w = Vector3::zeros();
        for (i, &(lo, hi)) in options.w_bounds.iter().enumerate() {
            let u: f64 = rng.random();
            w[i] = lo + T::lit(u) * (hi - lo);
        }
        let v = phi_quadratic_form(problem, gains, &p, &MarketState::from_vector(x), &Disturbance::from_vector(&w), fbox);
        phi_max = phi_max.max(v);
    }
    Ok(VerificationReport {
        p_matrix: p,
        lmi25_margins,
        phi_sample_max: phi_max,
        samples_used: xs.len(),
    })
}

/// `Σ_m h_m(x) [x; w]ᵀ Φ_m [x; w]`, i.e. `V̇ + zᵀz − γ²wᵀw` along the fuzzy
/// closed loop with `V = xᵀPx`.
///
/// # Panics
/// If the gain set has fewer entries than the box has rules.
pub fn phi_quadratic_form<T: Real>(
    problem: &LmiProblem<T>,
    gains: &GainSet<T>,
    p: &Matrix3<T>,
    x: &MarketState<T>,
    w: &Disturbance<T>,
    fbox: &FuzzyBox<T>,
) -> T {
    let xv = x.to_vector();
    let wv = w.to_vector();
    let two = T::lit(2.0);
    let px = p * xv;
    let mut value = T::zero();
    for (m, h) in fbox.activations(&xv) {
        let (at, ct) = closed_loop(problem, m, &gains.gains[m]);
        let z = ct * xv;
        value += h * (two * px.dot(&(at * xv)) + z.norm_squared());
    }
    value + two * px.dot(&(problem.b * wv)) - problem.gamma_sq * wv.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(a: Matrix3<f64>) -> LmiProblem<f64> {
        let sys = assemble_system_matrices(&MarketParams::table_one()).unwrap();
        LmiProblem::new(vec![a], &sys, 2.0).unwrap()
    }

    #[test]
    fn block_is_symmetric() {
        let p = single(Matrix3::new(1.0, 2.0, 3.0, -4.0, 5.0, 6.0, 0.5, -1.0, 2.0));
        let q = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 3.0);
        let f = assemble_rule_lmi(&p, 0, &q, &RowVector3::new(0.3, -1.0, 2.5)).unwrap();
        assert_eq!(f, f.transpose());
    }

    #[test]
    fn stable_rule_identity_q_is_negative_definite() {
        let p = single(Matrix3::identity() * -10.0);
        let f = assemble_rule_lmi(&p, 0, &Matrix3::identity(), &RowVector3::zeros()).unwrap();
        assert!(largest_eigenvalue(&f) < 0.0);
    }

    #[test]
    fn unstable_rule_has_positive_diagonal() {
        let p = single(Matrix3::identity());
        let f = assemble_rule_lmi(&p, 0, &Matrix3::identity(), &RowVector3::zeros()).unwrap();
        assert_eq!(f.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity() * 2.0);
        assert!(largest_eigenvalue(&f) > 0.0);
    }

    #[test]
    fn rule_index_out_of_range() {
        let p = single(Matrix3::identity());
        assert!(matches!(
            assemble_rule_lmi(&p, 3, &Matrix3::identity(), &RowVector3::zeros()),
            Err(Error::Index { index: 3, count: 1 })
        ));
    }

    #[test]
    fn single_stable_rule_feasible() {
        let p = single(Matrix3::identity() * -10.0);
        let out = solve_feasibility(&p, 1e-6, 1e-7).unwrap();
        assert!(out.is_feasible());
        let s = out.solution();
        assert!(s.q_margin >= 1e-6);
        assert!(s.block_margins[0] <= -1e-6);
    }

    #[test]
    fn recover_scaled_identity() {
        let s = LmiSolution {
            q: Matrix3::identity() * 2.0,
            y_list: vec![RowVector3::new(2.0, 4.0, 6.0)],
            gamma: 1.0,
            block_margins: vec![-1.0],
            q_margin: 2.0,
            margin: 1e-6,
            tol: 1e-7,
            newton_steps: 0,
        };
        let g = recover_gains(&s).unwrap();
        assert_abs_diff_eq!(g.gains[0], RowVector3::new(1.0, 2.0, 3.0), epsilon = 1e-15);
        let singular = LmiSolution {
            q: Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 1e-12)),
            ..s
        };
        assert!(matches!(recover_gains(&singular), Err(Error::Conditioning(_))));
    }

    #[test]
    fn congruent_forms_agree_in_sign() {
        let a = Matrix3::new(-3.0, 0.2, -0.5, 0.1, -2.0, 0.0, 1.0, -1.0, -0.1);
        let p = single(a);
        let out = solve_feasibility(&p, 1e-6, 1e-7).unwrap();
        let s = out.solution();
        let g = recover_gains(s).unwrap();
        let pm = lyapunov_matrix(&s.q).unwrap();
        let f25 = assemble_p_form(&p, 0, &g.gains[0], &pm).unwrap();
        let f29 = assemble_rule_lmi(&p, 0, &s.q, &s.y_list[0]).unwrap();
        // diag(P, I, I) F29 diag(P, I, I) = F25
        let mut t = Block8::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&pm);
        assert_abs_diff_eq!(t * f29 * t, f25, epsilon = 1e-8);
        assert_eq!(largest_eigenvalue(&f25) < 0.0, largest_eigenvalue(&f29) < 0.0);
    }

    #[test]
    fn phi_is_homogeneous_and_zero_at_origin() {
        let fbox = FuzzyBox::uniform([(5.0, 25.0), (5.0, 25.0), (-10.0, 10.0)], [2, 2, 2]).unwrap();
        let sys = assemble_system_matrices(&MarketParams::table_one()).unwrap();
        let a: Vec<_> = (0..8).map(|m| sys.a * (1.0 + 0.1 * m as f64)).collect();
        let problem = LmiProblem::new(a, &sys, 2.0).unwrap();
        let gains = GainSet {
            gains: (0..8).map(|m| RowVector3::new(0.1, -0.2, m as f64)).collect(),
            gamma: 2f64.sqrt(),
            q: Matrix3::identity(),
            provenance: Provenance {
                solver: String::new(),
                newton_steps: 0,
                tol: 0.0,
                margin: 0.0,
                worst_block_margin: 0.0,
                certified: false,
                epsilon: 0.1,
                seed: 0,
            },
        };
        let p = Matrix3::new(2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 4.0);
        let zero = phi_quadratic_form(&problem, &gains, &p, &MarketState::zero(), &Disturbance::zero(), &fbox);
        assert_eq!(zero, 0.0);
        // beyond the (25, 25, 10) corner the premises clamp to a single vertex
        let x = MarketState::new(30.0, 27.0, 12.0);
        let w = Disturbance::new(0.2, -0.4, 1.0);
        let v = phi_quadratic_form(&problem, &gains, &p, &x, &w, &fbox);
        let c = 3.0;
        let xc = MarketState::from_vector(&(x.to_vector() * c));
        let wc = Disturbance::from_vector(&(w.to_vector() * c));
        let vc = phi_quadratic_form(&problem, &gains, &p, &xc, &wc, &fbox);
        assert_abs_diff_eq!(vc, c * c * v, epsilon = 1e-9 * vc.abs());
    }
}
