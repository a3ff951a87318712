//! Primal log-det barrier method for block-diagonal LMIs.
//!
//! Minimises `cᵀv` subject to `G_k(v) = G_k0 + Σ_i v_i G_ki ≻ 0` for every
//! block `k`. Each centering step is a damped Newton iteration on
//! `s·cᵀv − Σ_k log det G_k(v)`; the weight `s` grows geometrically until the
//! duality-gap bound `Σ dim G_k / s` falls below the tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One affine symmetric block `G0 + Σ v_i G_i`.
#[derive(Debug, Clone)]
pub struct AffineBlock<T: Real> {
    pub constant: DMatrix<T>,
    /// `(variable index, coefficient matrix)`; absent variables have zero coefficient.
    pub terms: Vec<(usize, DMatrix<T>)>,
}

impl<T: Real> AffineBlock<T> {
    pub fn eval(&self, v: &DVector<T>) -> DMatrix<T> {
        let mut g = self.constant.clone();
        for (i, gi) in &self.terms {
            g += gi * v[*i];
        }
        g
    }

    fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

const MAX_CENTERING: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions<T> {
    /// Stop once the duality-gap bound is below this.
    pub gap_tol: T,
    /// Stop as soon as the objective reaches this value.
    pub target: Option<T>,
    pub initial_weight: T,
    pub growth: T,
    pub max_newton: usize,
}

impl<T: Real> Default for BarrierOptions<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::lit(1e-7),
            target: None,
            initial_weight: T::one(),
            growth: T::lit(8.0),
            max_newton: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome<T: Real> {
    pub x: DVector<T>,
    pub objective: T,
    pub newton_steps: usize,
    pub outer_steps: usize,
    /// Gap bound reached (the objective is optimal to within `gap_tol`).
    pub converged: bool,
    pub reached_target: bool,
    /// Duality-gap bound `Σ dim G_k / s` at the final weight.
    pub gap_bound: T,
}

fn log_det_pd<T: Real>(g: DMatrix<T>) -> Option<(T, Cholesky<T, Dyn>)> {
    let chol = g.cholesky()?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > T::zero()) || !d.finite() {
            return None;
        }
        acc += d.ln();
    }
    Some((acc + acc, chol))
}

fn barrier_value<T: Real>(blocks: &[AffineBlock<T>], c: &DVector<T>, weight: T, v: &DVector<T>) -> Option<T> {
    let mut f = weight * c.dot(v);
    for b in blocks {
        let (ld, _) = log_det_pd(b.eval(v))?;
        f -= ld;
    }
    Some(f)
}

/// Runs the barrier method from a strictly feasible `x0`.
pub fn solve<T: Real>(
    blocks: &[AffineBlock<T>],
    c: &DVector<T>,
    x0: DVector<T>,
    options: &BarrierOptions<T>,
) -> Result<BarrierOutcome<T>> {
    let n = c.len();
    if x0.len() != n {
        return Err(Error::Dimension(format!("start point has {} entries, objective {}", x0.len(), n)));
    }
    for b in blocks {
        if b.constant.nrows() != b.constant.ncols() || b.terms.iter().any(|(i, g)| *i >= n || g.shape() != b.constant.shape()) {
            return Err(Error::Dimension("inconsistent LMI block".into()));
        }
    }
    if barrier_value(blocks, c, T::zero(), &x0).is_none() {
        return Err(Error::Parameter {
            name: "x0",
            reason: "start point is not strictly feasible".into(),
        });
    }

    let total_dim = T::from_usize_exact(blocks.iter().map(AffineBlock::dim).sum());
    let half = T::lit(0.5);
    let mut x = x0;
    let mut weight = options.initial_weight;
    let mut newton_steps = 0;
    let mut outer_steps = 0;
    let hit = |x: &DVector<T>| options.target.is_some_and(|t| c.dot(x) <= t);

    let mut stalled = 0;
    loop {
        outer_steps += 1;
        let mut centered = false;
        for _ in 0..MAX_CENTERING {
            let mut grad = c * weight;
            let mut hess = DMatrix::<T>::zeros(n, n);
            for b in blocks {
                let Some((_, chol)) = log_det_pd(b.eval(&x)) else {
                    return Err(Error::Domain("barrier iterate left the feasible set"));
                };
                let ginv = chol.inverse();
                let w: Vec<(usize, DMatrix<T>)> = b.terms.iter().map(|(i, gi)| (*i, &ginv * gi)).collect();
                let wt: Vec<DMatrix<T>> = w.iter().map(|(_, m)| m.transpose()).collect();
                for (a, (i, wi)) in w.iter().enumerate() {
                    grad[*i] -= wi.trace();
                    for (bidx, (j, _)) in w.iter().enumerate().skip(a) {
                        let h = wi.dot(&wt[bidx]);
                        hess[(*i, *j)] += h;
                        if a != bidx {
                            hess[(*j, *i)] += h;
                        }
                    }
                }
            }
            let step = newton_direction(hess, &grad)?;
            let decrement = -grad.dot(&step);
            if !(decrement > T::lit(1e-10)) {
                centered = true;
                break;
            }
            let f0 = barrier_value(blocks, c, weight, &x).ok_or(Error::Domain("barrier value"))?;
            let mut alpha = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial = &x + &step * alpha;
                if let Some(f) = barrier_value(blocks, c, weight, &trial) {
                    if f <= f0 - T::lit(0.25) * alpha * decrement {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= half;
            }
            newton_steps += 1;
            if hit(&x) {
                return Ok(outcome(x, c, newton_steps, outer_steps, false, true, total_dim / weight));
            }
            if decrement * half < T::lit(1e-9) {
                centered = true;
                break;
            }
            if !moved || newton_steps >= options.max_newton {
                break;
            }
        }
        // roundoff at large weights can keep the decrement from vanishing
        stalled = if centered { 0 } else { stalled + 1 };
        if newton_steps >= options.max_newton || stalled >= 2 {
            return Ok(outcome(x, c, newton_steps, outer_steps, false, false, total_dim / weight));
        }
        if total_dim / weight < options.gap_tol {
            return Ok(outcome(x, c, newton_steps, outer_steps, true, false, total_dim / weight));
        }
        weight *= options.growth;
    }
}

fn outcome<T: Real>(
    x: DVector<T>,
    c: &DVector<T>,
    newton: usize,
    outer: usize,
    converged: bool,
    reached: bool,
    gap_bound: T,
) -> BarrierOutcome<T> {
    BarrierOutcome {
        gap_bound,
        objective: c.dot(&x),
        x,
        newton_steps: newton,
        outer_steps: outer,
        converged,
        reached_target: reached,
    }
}

fn newton_direction<T: Real>(hess: DMatrix<T>, grad: &DVector<T>) -> Result<DVector<T>> {
    let n = hess.nrows();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(T::zero(), |a, b| a.max(b));
    let mut shift = T::zero();
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += shift;
        }
        if let Some(ch) = h.cholesky() {
            return Ok(-ch.solve(grad));
        }
        shift = if shift == T::zero() {
            (scale * T::lit(1e-14)).max(T::lit(1e-30))
        } else {
            shift * T::lit(100.0)
        };
    }
    Err(Error::Domain("Newton system"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_lp() {
        // minimise v subject to v - 1 > 0 and 3 - v > 0
        let blocks = vec![
            AffineBlock {
                constant: DMatrix::from_element(1, 1, -1.0),
                terms: vec![(0, DMatrix::from_element(1, 1, 1.0))],
            },
            AffineBlock {
                constant: DMatrix::from_element(1, 1, 3.0),
                terms: vec![(0, DMatrix::from_element(1, 1, -1.0))],
            },
        ];
        let c = DVector::from_vec(vec![1.0]);
        let out = solve(&blocks, &c, DVector::from_vec(vec![2.0]), &BarrierOptions::default()).unwrap();
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn minimum_eigenvalue_of_symmetric_matrix() {
        // minimise t subject to t I - M ≻ 0 gives λ_max(M)
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let blocks = vec![AffineBlock {
            constant: -m,
            terms: vec![(0, DMatrix::identity(2, 2))],
        }];
        let c = DVector::from_vec(vec![1.0]);
        let out = solve(&blocks, &c, DVector::from_vec(vec![10.0]), &BarrierOptions::default()).unwrap();
        assert_abs_diff_eq!(out.objective, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_start_rejected() {
        let blocks = vec![AffineBlock {
            constant: DMatrix::from_element(1, 1, -1.0),
            terms: vec![(0, DMatrix::from_element(1, 1, 1.0))],
        }];
        let c = DVector::from_vec(vec![1.0]);
        assert!(solve(&blocks, &c, DVector::from_vec(vec![0.5]), &BarrierOptions::default()).is_err());
    }

    #[test]
    fn target_stops_early() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -1.0]);
        let blocks = vec![AffineBlock {
            constant: -m,
            terms: vec![(0, DMatrix::identity(2, 2))],
        }];
        let c = DVector::from_vec(vec![1.0]);
        let opts = BarrierOptions {
            target: Some(-0.5),
            ..BarrierOptions::default()
        };
        let out = solve(&blocks, &c, DVector::from_vec(vec![5.0]), &opts).unwrap();
        assert!(out.reached_target);
        assert!(out.objective <= -0.5 && out.objective > -1.0);
    }
}
