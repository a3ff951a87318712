//! Continuous-time power-market dynamics: supply, demand and stored energy.
//!
//! Units are abstract and only need to be consistent (power, energy, price, time).
//! The demand elasticity `c_d` is stored as a positive magnitude and enters the
//! demand drift with a negative sign, so marginal benefit is `b_d - c_d * p_d`.

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar market constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct MarketParams<T> {
    /// Supply elasticity magnitude.
    pub c_g: T,
    /// Demand elasticity magnitude (applied with a negative sign).
    pub c_d: T,
    pub tau_g: T,
    pub tau_d: T,
    /// Nominal initial supplier cost.
    pub b_g_hat: T,
    /// Nominal initial consumer benefit.
    pub b_d_hat: T,
    /// Excess-energy cost feedback gain.
    pub k: T,
    /// ACE price speed constant.
    pub tau_lambda: T,
    /// Price weight in the performance output.
    pub epsilon: T,
    /// Predicted mean renewable input; when nonzero the third disturbance
    /// channel is the deviation from this mean.
    #[serde(default = "zero_default")]
    pub in_mean: T,
}

fn zero_default<T: Real>() -> T {
    T::zero()
}

impl<T: Real> MarketParams<T> {
    /// The reference parameter set (elasticities 0.4/0.5, scale factors 0.2/0.25,
    /// nominal cost 2, nominal benefit 10, k = 0.1, τ_λ = 100, ε = 0.1).
    pub fn table_one() -> Self {
        Self {
            c_g: T::lit(0.4),
            c_d: T::lit(0.5),
            tau_g: T::lit(0.2),
            tau_d: T::lit(0.25),
            b_g_hat: T::lit(2.0),
            b_d_hat: T::lit(10.0),
            k: T::lit(0.1),
            tau_lambda: T::lit(100.0),
            epsilon: T::lit(0.1),
            in_mean: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_g", self.c_g),
            ("c_d", self.c_d),
            ("tau_g", self.tau_g),
            ("tau_d", self.tau_d),
            ("k", self.k),
            ("tau_lambda", self.tau_lambda),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if !value.finite() || value <= T::zero() {
                return Err(Error::Parameter {
                    name,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        for (name, value) in [
            ("b_g_hat", self.b_g_hat),
            ("b_d_hat", self.b_d_hat),
            ("in_mean", self.in_mean),
        ] {
            if !value.finite() {
                return Err(Error::Parameter {
                    name,
                    reason: "must be finite".into(),
                });
            }
        }
        if self.in_mean < T::zero() {
            return Err(Error::Parameter {
                name: "in_mean",
                reason: "predicted renewable input cannot be negative".into(),
            });
        }
        Ok(())
    }
}

/// Power supply, power demand and stored (imbalanced) energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState<T> {
    pub p_g: T,
    pub p_d: T,
    pub e: T,
}

impl<T: Real> MarketState<T> {
    pub fn new(p_g: T, p_d: T, e: T) -> Self {
        Self { p_g, p_d, e }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_vector(&self) -> Vector3<T> {
        Vector3::new(self.p_g, self.p_d, self.e)
    }

    pub fn from_vector(v: &Vector3<T>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.p_g.finite() && self.p_d.finite() && self.e.finite()
    }

    /// The state seen through a storage target `q`: `(p_g, p_d, e - q)`.
    pub fn shifted(&self, q: T) -> Self {
        Self::new(self.p_g, self.p_d, self.e - q)
    }
}

/// Cost uncertainty, benefit uncertainty and renewable input (or its deviation
/// from the predicted mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance<T> {
    pub delta_g: T,
    pub delta_d: T,
    pub in_dev: T,
}

impl<T: Real> Disturbance<T> {
    pub fn new(delta_g: T, delta_d: T, in_dev: T) -> Self {
        Self {
            delta_g,
            delta_d,
            in_dev,
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_vector(&self) -> Vector3<T> {
        Vector3::new(self.delta_g, self.delta_d, self.in_dev)
    }

    pub fn from_vector(v: &Vector3<T>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.delta_g.finite() && self.delta_d.finite() && self.in_dev.finite()
    }
}

/// Compact state-space form `ẋ = A x + b + τ λ + B w`, `z = C x + D λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices<T: Real> {
    pub a: Matrix3<T>,
    pub b_w: Matrix3<T>,
    pub offset: Vector3<T>,
    pub tau: Vector3<T>,
    pub c: Matrix2x3<T>,
    pub d: Vector2<T>,
}

impl<T: Real> SystemMatrices<T> {
    pub fn drift(&self, x: &Vector3<T>, lambda: T, w: &Vector3<T>) -> Vector3<T> {
        self.a * x + self.offset + self.tau * lambda + self.b_w * w
    }

    /// Performance output `z = (e, ε λ)`.
    pub fn output(&self, x: &Vector3<T>, lambda: T) -> Vector2<T> {
        self.c * x + self.d * lambda
    }
}

fn check_finite<T: Real>(what: &'static str, values: &[T]) -> Result<()> {
    if values.iter().all(|v| v.finite()) {
        Ok(())
    } else {
        Err(Error::Domain(what))
    }
}

/// Rate of change of power supply.
pub fn supply_rate<T: Real>(params: &MarketParams<T>, p_g: T, e: T, lambda: T, delta_g: T) -> Result<T> {
    check_finite("supply_rate", &[p_g, e, lambda, delta_g])?;
    Ok((-params.c_g * p_g - params.k * e - params.b_g_hat + lambda - delta_g) / params.tau_g)
}

/// Rate of change of power demand.
pub fn demand_rate<T: Real>(params: &MarketParams<T>, p_d: T, lambda: T, delta_d: T) -> Result<T> {
    check_finite("demand_rate", &[p_d, lambda, delta_d])?;
    Ok((-params.c_d * p_d + params.b_d_hat - lambda + delta_d) / params.tau_d)
}

/// Rate of change of stored energy: supply plus renewable input minus demand.
pub fn storage_rate<T: Real>(p_g: T, p_d: T, input: T) -> Result<T> {
    check_finite("storage_rate", &[p_g, p_d, input])?;
    Ok(p_g + input - p_d)
}

pub fn assemble_system_matrices<T: Real>(params: &MarketParams<T>) -> Result<SystemMatrices<T>> {
    params.validate()?;
    let z = T::zero();
    let one = T::one();
    let a = Matrix3::new(
        -params.c_g / params.tau_g,
        z,
        -params.k / params.tau_g,
        z,
        -params.c_d / params.tau_d,
        z,
        one,
        -one,
        z,
    );
    let b_w = Matrix3::from_diagonal(&Vector3::new(-one / params.tau_g, one / params.tau_d, one));
    let offset = Vector3::new(
        -params.b_g_hat / params.tau_g,
        params.b_d_hat / params.tau_d,
        params.in_mean,
    );
    let tau = Vector3::new(one / params.tau_g, -one / params.tau_d, z);
    let c = Matrix2x3::new(z, z, one, z, z, z);
    let d = Vector2::new(z, params.epsilon);
    Ok(SystemMatrices {
        a,
        b_w,
        offset,
        tau,
        c,
        d,
    })
}

/// Full state derivative `A x + b + τ λ + B w`.
pub fn market_drift<T: Real>(
    params: &MarketParams<T>,
    state: &MarketState<T>,
    lambda: T,
    w: &Disturbance<T>,
) -> Result<Vector3<T>> {
    if !state.is_finite() || !w.is_finite() || !lambda.finite() {
        return Err(Error::Domain("market_drift"));
    }
    let sys = assemble_system_matrices(params)?;
    Ok(sys.drift(&state.to_vector(), lambda, &w.to_vector()))
}

/// Market-clearing power and price where marginal cost meets marginal benefit.
pub fn compute_equilibrium<T: Real>(params: &MarketParams<T>) -> Result<(T, T)> {
    let slope = params.c_g + params.c_d;
    if slope == T::zero() {
        return Err(Error::DegenerateMarket);
    }
    let p_star = (params.b_d_hat - params.b_g_hat) / slope;
    Ok((p_star, params.b_g_hat + params.c_g * p_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table() -> MarketParams<f64> {
        MarketParams::table_one()
    }

    #[test]
    fn supply_rate_examples() {
        let p = table();
        let (p_star, l_star) = compute_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(supply_rate(&p, p_star, 0.0, l_star, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(supply_rate(&p, 0.0, 0.0, 2.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(supply_rate(&p, 10.0, 1.0, 6.0, 0.5).unwrap(), -3.0, epsilon = 1e-12);
        assert!(supply_rate(&p, f64::NAN, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn demand_rate_examples() {
        let p = table();
        let (p_star, l_star) = compute_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(demand_rate(&p, p_star, l_star, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(demand_rate(&p, 0.0, 10.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(demand_rate(&p, 13.0, 4.66, 0.0).unwrap(), -4.64, epsilon = 1e-12);
        assert!(demand_rate(&p, 1.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn storage_rate_examples() {
        assert_eq!(storage_rate(10.0, 8.0, 1.0).unwrap(), 3.0);
        assert_eq!(storage_rate(8.8889, 8.8889, 0.0).unwrap(), 0.0);
        assert_eq!(storage_rate(5.0, 25.0, 2.0).unwrap(), -18.0);
    }

    #[test]
    fn drift_from_initial_conditions() {
        let d = market_drift(
            &table(),
            &MarketState::new(10.4, 13.0, 0.0),
            4.66,
            &Disturbance::zero(),
        )
        .unwrap();
        // (-0.4*10.4 - 2 + 4.66) / 0.2
        assert_abs_diff_eq!(d[0], -7.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], -4.64, epsilon = 1e-12);
        assert_abs_diff_eq!(d[2], -2.6, epsilon = 1e-12);
    }

    #[test]
    fn system_matrices_entries() {
        let s = assemble_system_matrices(&table()).unwrap();
        assert_abs_diff_eq!(s.a[(0, 0)], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a[(1, 1)], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a[(0, 2)], -0.5, epsilon = 1e-15);
        assert_eq!((s.a[(2, 0)], s.a[(2, 1)], s.a[(2, 2)]), (1.0, -1.0, 0.0));
        assert_abs_diff_eq!(s.b_w[(0, 0)], -5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.b_w[(1, 1)], 4.0, epsilon = 1e-15);
        assert_eq!(s.b_w[(2, 2)], 1.0);
        assert_abs_diff_eq!(s.tau, Vector3::new(5.0, -4.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(s.offset, Vector3::new(-10.0, 40.0, 0.0), epsilon = 1e-15);
        assert_eq!(s.d, Vector2::new(0.0, 0.1));
        assert_eq!(s.c, Matrix2x3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn forecast_mean_shifts_offset() {
        let mut p = table();
        p.in_mean = 1.0;
        let s = assemble_system_matrices(&p).unwrap();
        assert_eq!(s.offset[2], 1.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = table();
        p.tau_g = 0.0;
        assert!(matches!(assemble_system_matrices(&p), Err(Error::Parameter { name: "tau_g", .. })));
        let mut p = table();
        p.k = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn equilibrium_examples() {
        let (p, l) = compute_equilibrium(&table()).unwrap();
        assert_abs_diff_eq!(p, 80.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l, 2.0 + 0.4 * 80.0 / 9.0, epsilon = 1e-12);

        let mut sym = table();
        sym.b_d_hat = sym.b_g_hat;
        assert_eq!(compute_equilibrium(&sym).unwrap(), (0.0, sym.b_g_hat));

        let mut q = table();
        q.b_g_hat = 0.0;
        q.b_d_hat = 9.0;
        q.c_g = 1.0;
        q.c_d = 2.0;
        assert_eq!(compute_equilibrium(&q).unwrap(), (3.0, 3.0));

        let mut deg = table();
        deg.c_g = 0.5;
        deg.c_d = -0.5;
        assert!(matches!(compute_equilibrium(&deg), Err(Error::DegenerateMarket)));
    }

    #[test]
    fn f32_market_agrees() {
        let p = MarketParams::<f32>::table_one();
        let (ps, ls) = compute_equilibrium(&p).unwrap();
        assert!((ps - 8.8889).abs() < 1e-3 && (ls - 5.5556).abs() < 1e-3);
    }
}
