//! Closed-loop simulation, seeded disturbances and trajectory metrics.

use nalgebra::{Matrix3, SVector, Vector2, Vector3};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{price, PolicyKind, PricingPolicy};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyBox;
use crate::lmi::{phi_quadratic_form, GainSet, LmiProblem};
use crate::market::{assemble_system_matrices, Disturbance, MarketParams, MarketState};
use crate::scalar::Real;

/// Sample-and-hold uniform disturbance on the three channels (Δ_g, Δ_d, in).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec<T> {
    pub ranges: [(T, T); 3],
    pub hold_interval: T,
    pub seed: u64,
    pub enabled: bool,
}

impl<T: Real> DisturbanceSpec<T> {
    pub fn disabled() -> Self {
        Self {
            ranges: [(T::zero(), T::zero()); 3],
            hold_interval: T::lit(0.1),
            seed: 0,
            enabled: false,
        }
    }

    /// Cost/benefit uncertainty in [−0.5, 0.5] and [−0.4, 0.6], renewable input in [0, 2].
    pub fn example_two(seed: u64) -> Self {
        Self {
            ranges: [
                (T::lit(-0.5), T::lit(0.5)),
                (T::lit(-0.4), T::lit(0.6)),
                (T::zero(), T::lit(2.0)),
            ],
            hold_interval: T::lit(0.1),
            seed,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hold_interval > T::zero()) || !self.hold_interval.finite() {
            return Err(Error::Parameter {
                name: "hold_interval",
                reason: "must be finite and positive".into(),
            });
        }
        for &(lo, hi) in &self.ranges {
            if !(lo <= hi) || !lo.finite() || !hi.finite() {
                return Err(Error::Parameter {
                    name: "ranges",
                    reason: format!("invalid range [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }

    /// Value held on `[j·hold, (j+1)·hold)`.
    pub fn at_interval(&self, j: u64) -> Disturbance<T> {
        if !self.enabled {
            return Disturbance::zero();
        }
        let mut w = Vector3::zeros();
        for (ch, &(lo, hi)) in self.ranges.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(ch as u64);
            rng.set_word_pos(2 * u128::from(j));
            // 53 random bits → [0, 1)
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            w[ch] = lo + T::lit(u) * (hi - lo);
        }
        Disturbance::from_vector(&w)
    }
}

/// Disturbance at time `t`; pure in `(spec, t)`.
pub fn generate_disturbance<T: Real>(spec: &DisturbanceSpec<T>, t: T) -> Disturbance<T> {
    if !spec.enabled {
        return Disturbance::zero();
    }
    let j = (t / spec.hold_interval).to_f64_lossy();
    // tolerate t = j·hold landing a rounding error below the boundary
    let j = (j + 1e-9).floor().max(0.0) as u64;
    spec.at_interval(j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T: Real> {
    pub t_end: T,
    pub dt: T,
    pub initial_state: MarketState<T>,
    /// Initial ACE price; ignored by static policies.
    pub initial_lambda: T,
    pub record_stride: usize,
    /// Any state component beyond this magnitude aborts the run.
    pub divergence_guard: T,
}

impl<T: Real> SimConfig<T> {
    /// Reference initial conditions (10.4, 13, 0), λ(0) = 4.66, dt = 0.01.
    pub fn table_one(t_end: T) -> Self {
        Self {
            t_end,
            dt: T::lit(0.01),
            initial_state: MarketState::new(T::lit(10.4), T::lit(13.0), T::zero()),
            initial_lambda: T::lit(4.66),
            record_stride: 1,
            divergence_guard: T::lit(1e6),
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).to_f64_lossy().round() as usize
    }

    fn hold_steps(&self, hold: T) -> Result<u64> {
        let ratio = (hold / self.dt).to_f64_lossy();
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * r {
            return Err(Error::Config(format!(
                "time step {} does not divide the disturbance hold interval {}",
                self.dt, hold
            )));
        }
        Ok(r as u64)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_end", self.t_end), ("dt", self.dt), ("divergence_guard", self.divergence_guard)] {
            if !(v > T::zero()) || !v.finite() {
                return Err(Error::Parameter {
                    name,
                    reason: format!("must be finite and positive, got {v}"),
                });
            }
        }
        if self.record_stride == 0 {
            return Err(Error::Parameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        let ratio = (self.t_end / self.dt).to_f64_lossy();
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!("t_end {} is not a multiple of dt {}", self.t_end, self.dt)));
        }
        if !self.initial_state.is_finite() || !self.initial_lambda.finite() {
            return Err(Error::Domain("initial conditions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<MarketState<T>>,
    pub prices: Vec<T>,
    pub disturbances: Vec<Disturbance<T>>,
    /// `z = (e − q, ε λ)`.
    pub outputs: Vec<Vector2<T>>,
}

impl<T: Real> Trajectory<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            prices: Vec::with_capacity(n),
            disturbances: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug)]
pub struct SimFailure<T: Real> {
    pub error: Error,
    pub prefix: Trajectory<T>,
}

impl<T: Real> std::fmt::Display for SimFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} samples recorded)", self.error, self.prefix.len())
    }
}

impl<T: Real> std::error::Error for SimFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl<T: Real> From<SimFailure<T>> for Error {
    fn from(f: SimFailure<T>) -> Self {
        f.error
    }
}

/// One classical Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<T: Real, const N: usize>(
    mut f: impl FnMut(T, &SVector<T, N>) -> SVector<T, N>,
    x: &SVector<T, N>,
    t: T,
    dt: T,
) -> Result<SVector<T, N>> {
    let half = dt * T::lit(0.5);
    let check = |k: SVector<T, N>, at: T| {
        if k.iter().all(|v| v.finite()) {
            Ok(k)
        } else {
            Err(Error::Integration { time: at.to_f64_lossy() })
        }
    };
    let k1 = check(f(t, x), t)?;
    let k2 = check(f(t + half, &(x + k1 * half)), t + half)?;
    let k3 = check(f(t + half, &(x + k2 * half)), t + half)?;
    let k4 = check(f(t + dt, &(x + k3 * dt)), t + dt)?;
    Ok(x + (k1 + (k2 + k3) * T::lit(2.0) + k4) * (dt / T::lit(6.0)))
}

/// Integrates the true affine market dynamics under `policy`.
///
/// ACE runs augment the state with the price; fuzzy runs evaluate the static
/// law at every stage of every step. The disturbance is held over each step.
pub fn simulate_closed_loop<T: Real>(
    params: &MarketParams<T>,
    policy: &PricingPolicy<T>,
    dist: &DisturbanceSpec<T>,
    config: &SimConfig<T>,
) -> std::result::Result<Trajectory<T>, SimFailure<T>> {
    let empty = || Trajectory::with_capacity(0);
    let setup = (|| {
        params.validate()?;
        config.validate()?;
        dist.validate()?;
        let hold = if dist.enabled { config.hold_steps(dist.hold_interval)? } else { 1 };
        Ok::<_, Error>((assemble_system_matrices(params)?, hold))
    })();
    let (sys, hold_steps) = setup.map_err(|error| SimFailure { error, prefix: empty() })?;

    let q = policy.storage_target;
    let eps = params.epsilon;
    let steps = config.steps();
    let stride = config.record_stride;
    let mut traj = Trajectory::with_capacity(steps / stride + 1);

    let mut x = SVector::<T, 4>::new(
        config.initial_state.p_g,
        config.initial_state.p_d,
        config.initial_state.e,
        if policy.kind == PolicyKind::Ace { config.initial_lambda } else { T::zero() },
    );
    let lambda_of = |x: &SVector<T, 4>| -> Result<T> {
        let s = MarketState::new(x[0], x[1], x[2]);
        price(policy, &s, x[3])
    };
    // shifted plant: the excess-energy feedback acts on e − q
    let rate = |x: &SVector<T, 4>, w: &Vector3<T>| -> Result<SVector<T, 4>> {
        let lambda = lambda_of(x)?;
        let xt = Vector3::new(x[0], x[1], x[2] - q);
        let d = sys.drift(&xt, lambda, w);
        let dl = match policy.kind {
            PolicyKind::Ace => policy.ace_rate(x[2]),
            PolicyKind::Fuzzy => T::zero(),
        };
        Ok(SVector::<T, 4>::new(d[0], d[1], d[2], dl))
    };
    let record = |traj: &mut Trajectory<T>, n: usize, x: &SVector<T, 4>, w: &Disturbance<T>| -> Result<()> {
        let lambda = lambda_of(x)?;
        traj.times.push(config.dt * T::from_usize_exact(n));
        traj.states.push(MarketState::new(x[0], x[1], x[2]));
        traj.prices.push(lambda);
        traj.disturbances.push(*w);
        traj.outputs.push(Vector2::new(x[2] - q, eps * lambda));
        Ok(())
    };

    let fail = |error: Error, traj: Trajectory<T>| SimFailure { error, prefix: traj };
    for n in 0..=steps {
        let w = dist.at_interval(n as u64 / hold_steps);
        if n % stride == 0 {
            if let Err(e) = record(&mut traj, n, &x, &w) {
                return Err(fail(e, traj));
            }
        }
        if n == steps {
            break;
        }
        let t = config.dt * T::from_usize_exact(n);
        let wv = w.to_vector();
        let mut inner_err = None;
        let next = rk4_step(
            |_, s| match rate(s, &wv) {
                Ok(v) => v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    SVector::repeat(T::zero())
                }
            },
            &x,
            t,
            config.dt,
        );
        if let Some(e) = inner_err {
            return Err(fail(e, traj));
        }
        x = match next {
            Ok(v) => v,
            Err(e) => return Err(fail(e, traj)),
        };
        let t_next = config.dt * T::from_usize_exact(n + 1);
        if !x.iter().all(|v| v.finite()) {
            return Err(fail(Error::Integration { time: t_next.to_f64_lossy() }, traj));
        }
        if x.iter().any(|v| v.abs() > config.divergence_guard) {
            return Err(fail(
                Error::Divergence {
                    time: t_next.to_f64_lossy(),
                    guard: config.divergence_guard.to_f64_lossy(),
                },
                traj,
            ));
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    /// First recorded time after which `|e − q| < band` holds to the end.
    pub settling_time: Option<T>,
    pub rms_imbalance: T,
    pub max_abs_imbalance: T,
    /// Time average of `p_d − p_g` over the window.
    pub mean_supply_demand_gap: T,
    /// `√∫zᵀz / √∫wᵀw`, absent when the disturbance is identically zero.
    pub empirical_ratio: Option<T>,
}

fn trapezoid<T: Real>(times: &[T], values: impl Iterator<Item = T>) -> T {
    let mut acc = T::zero();
    let mut prev: Option<(T, T)> = None;
    for (&t, v) in times.iter().zip(values) {
        if let Some((t0, v0)) = prev {
            acc += (t - t0) * (v0 + v) * T::lit(0.5);
        }
        prev = Some((t, v));
    }
    acc
}

pub fn compute_metrics<T: Real>(traj: &Trajectory<T>, band: T, window: (T, T)) -> Result<Metrics<T>> {
    if traj.is_empty() {
        return Err(Error::Config("empty trajectory".into()));
    }
    let imb: Vec<T> = traj.outputs.iter().map(|z| z[0]).collect();
    let settling_time = match imb.iter().rposition(|v| v.abs() >= band) {
        None => Some(traj.times[0]),
        Some(i) if i + 1 < imb.len() => Some(traj.times[i + 1]),
        Some(_) => None,
    };
    let span = *traj.times.last().unwrap() - traj.times[0];
    let rms_imbalance = if span > T::zero() {
        (trapezoid(&traj.times, imb.iter().map(|v| *v * *v)) / span).sqrt()
    } else {
        imb[0].abs()
    };
    let max_abs_imbalance = imb.iter().fold(T::zero(), |a, v| a.max(v.abs()));

    let (lo, hi) = window;
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= lo && traj.times[i] <= hi).collect();
    let mean_supply_demand_gap = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) if b > a => {
            let gap = trapezoid(&traj.times[a..=b], traj.states[a..=b].iter().map(|s| s.p_d - s.p_g));
            gap / (traj.times[b] - traj.times[a])
        }
        (Some(&a), _) => traj.states[a].p_d - traj.states[a].p_g,
        _ => T::lit(f64::NAN),
    };

    let zz = trapezoid(&traj.times, traj.outputs.iter().map(|z| z.norm_squared()));
    let ww = trapezoid(&traj.times, traj.disturbances.iter().map(|w| w.to_vector().norm_squared()));
    let empirical_ratio = (ww > T::zero()).then(|| zz.sqrt() / ww.sqrt());
    Ok(Metrics {
        settling_time,
        rms_imbalance,
        max_abs_imbalance,
        mean_supply_demand_gap,
        empirical_ratio,
    })
}

/// Dissipation form along a recorded fuzzy trajectory: `(max, fraction < 0)`.
///
/// Samples with `x = 0` and `w = 0` give exactly zero and are left out of the
/// fraction; with `in_box_only` states outside the box are skipped as well.
pub fn dissipation_check_along<T: Real>(
    traj: &Trajectory<T>,
    problem: &LmiProblem<T>,
    gains: &GainSet<T>,
    p: &Matrix3<T>,
    fbox: &FuzzyBox<T>,
    in_box_only: bool,
) -> (T, T) {
    let mut max = T::min_value().unwrap_or(-T::one() / T::default_epsilon());
    let (mut counted, mut negative) = (0usize, 0usize);
    for (x, w) in traj.states.iter().zip(&traj.disturbances) {
        let xv = x.to_vector();
        if in_box_only && !fbox.contains(&xv) {
            continue;
        }
        if xv == Vector3::zeros() && w.to_vector() == Vector3::zeros() {
            continue;
        }
        let v = phi_quadratic_form(problem, gains, p, x, w, fbox);
        max = max.max(v);
        counted += 1;
        if v < T::zero() {
            negative += 1;
        }
    }
    let frac = if counted == 0 {
        T::zero()
    } else {
        T::from_usize_exact(negative) / T::from_usize_exact(counted)
    };
    (max, frac)
}
