//! Fuzzy interpolation of the market drift.
//!
//! Each premise axis (p_g, p_d, e) is covered by piecewise-linear hat functions
//! whose outermost members saturate at 1 beyond the boundary peaks. Rule `m`
//! picks one function per axis; its activation is the normalised product of
//! the three memberships. The affine drift `A x + b` is approximated by the
//! blend `Σ h_m(x) A_m x`, with the `A_m` fitted by regularised least squares.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{assemble_system_matrices, MarketParams, MarketState};
use crate::scalar::Real;

/// Membership breakpoints on one premise axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPartition<T> {
    pub lower: T,
    pub upper: T,
    pub peaks: Vec<T>,
}

impl<T: Real> AxisPartition<T> {
    /// `count` uniformly spaced peaks from `lower` to `upper` inclusive.
    pub fn uniform(lower: T, upper: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Parameter {
                name: "membership count",
                reason: format!("need at least 2 membership functions per axis, got {count}"),
            });
        }
        let span = upper - lower;
        let last = T::from_usize_exact(count - 1);
        let mut peaks: Vec<T> = (0..count)
            .map(|i| lower + span * T::from_usize_exact(i) / last)
            .collect();
        // pin the ends exactly
        peaks[0] = lower;
        peaks[count - 1] = upper;
        let axis = Self { lower, upper, peaks };
        axis.validate()?;
        Ok(axis)
    }

    pub fn from_peaks(peaks: Vec<T>) -> Result<Self> {
        let (lower, upper) = match (peaks.first(), peaks.last()) {
            (Some(&l), Some(&u)) => (l, u),
            _ => {
                return Err(Error::Parameter {
                    name: "peaks",
                    reason: "empty".into(),
                })
            }
        };
        let axis = Self { lower, upper, peaks };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::Parameter {
            name: "axis partition",
            reason: reason.to_string(),
        };
        if !(self.lower.finite() && self.upper.finite()) || self.lower >= self.upper {
            return Err(bad("lower must be strictly below upper"));
        }
        if self.peaks.len() < 2 {
            return Err(bad("need at least 2 peaks"));
        }
        if self.peaks[0] != self.lower || self.peaks[self.peaks.len() - 1] != self.upper {
            return Err(bad("first and last peaks must equal the bounds"));
        }
        if self.peaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad("peaks must be strictly increasing"));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.peaks.len()
    }

    pub fn clamp(&self, value: T) -> T {
        if value < self.lower {
            self.lower
        } else if value > self.upper {
            self.upper
        } else {
            value
        }
    }

    /// The (at most two) nonzero memberships at `value`, as `(index, degree)`.
    pub fn active(&self, value: T) -> [(usize, T); 2] {
        let v = self.clamp(value);
        let n = self.peaks.len();
        // segment j such that peaks[j] <= v <= peaks[j+1]
        let mut j = match self.peaks.iter().position(|&p| p > v) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        if j > n - 2 {
            j = n - 2;
        }
        let right = (v - self.peaks[j]) / (self.peaks[j + 1] - self.peaks[j]);
        let right = right.max(T::zero()).min(T::one());
        [(j, T::one() - right), (j + 1, right)]
    }
}

/// Membership degree of `value` in function `mf_index` on `axis`.
pub fn membership_value<T: Real>(axis: &AxisPartition<T>, mf_index: usize, value: T) -> Result<T> {
    let n = axis.count();
    if mf_index >= n {
        return Err(Error::Index {
            index: mf_index,
            count: n,
        });
    }
    let v = axis.clamp(value);
    let p = &axis.peaks;
    let i = mf_index;
    let degree = if i > 0 && v < p[i] {
        (v - p[i - 1]) / (p[i] - p[i - 1])
    } else if i + 1 < n && v > p[i] {
        (p[i + 1] - v) / (p[i + 1] - p[i])
    } else {
        T::one()
    };
    Ok(degree.max(T::zero()))
}

/// The premise box: partitions for p_g, p_d and e.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyBox<T> {
    pub axes: [AxisPartition<T>; 3],
}

impl<T: Real> FuzzyBox<T> {
    pub fn uniform(bounds: [(T, T); 3], counts: [usize; 3]) -> Result<Self> {
        Ok(Self {
            axes: [
                AxisPartition::uniform(bounds[0].0, bounds[0].1, counts[0])?,
                AxisPartition::uniform(bounds[1].0, bounds[1].1, counts[1])?,
                AxisPartition::uniform(bounds[2].0, bounds[2].1, counts[2])?,
            ],
        })
    }

    /// `[5,25] × [5,25] × [-10,10]`, four functions per axis (64 rules).
    pub fn reference() -> Self {
        Self::uniform(
            [
                (T::lit(5.0), T::lit(25.0)),
                (T::lit(5.0), T::lit(25.0)),
                (T::lit(-10.0), T::lit(10.0)),
            ],
            [4, 4, 4],
        )
        .expect("reference box is valid")
    }

    pub fn rule_count(&self) -> usize {
        self.axes.iter().map(AxisPartition::count).product()
    }

    /// Per-axis membership indices of rule `m` (the e axis varies fastest).
    pub fn rule_indices(&self, m: usize) -> [usize; 3] {
        let n1 = self.axes[1].count();
        let n2 = self.axes[2].count();
        [m / (n1 * n2), (m / n2) % n1, m % n2]
    }

    pub fn rule_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.axes[1].count() + idx[1]) * self.axes[2].count() + idx[2]
    }

    /// Grid vertex (peak triple) of rule `m`.
    pub fn vertex(&self, m: usize) -> Vector3<T> {
        let idx = self.rule_indices(m);
        Vector3::new(
            self.axes[0].peaks[idx[0]],
            self.axes[1].peaks[idx[1]],
            self.axes[2].peaks[idx[2]],
        )
    }

    pub fn contains(&self, x: &Vector3<T>) -> bool {
        (0..3).all(|i| x[i] >= self.axes[i].lower && x[i] <= self.axes[i].upper)
    }

    /// Nonzero normalised activations at `x` as `(rule, h)` pairs (at most 8).
    pub fn activations(&self, x: &Vector3<T>) -> Vec<(usize, T)> {
        let a0 = self.axes[0].active(x[0]);
        let a1 = self.axes[1].active(x[1]);
        let a2 = self.axes[2].active(x[2]);
        let mut out = Vec::with_capacity(8);
        let mut total = T::zero();
        for &(i, hi) in &a0 {
            for &(j, hj) in &a1 {
                for &(k, hk) in &a2 {
                    let h = hi * hj * hk;
                    if h > T::zero() {
                        out.push((self.rule_index([i, j, k]), h));
                        total += h;
                    }
                }
            }
        }
        for (_, h) in out.iter_mut() {
            *h /= total;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.axes.iter().try_for_each(AxisPartition::validate)
    }
}

/// Dense vector of normalised rule activations at `x`.
pub fn rule_activation<T: Real>(fbox: &FuzzyBox<T>, x: &MarketState<T>) -> Vec<T> {
    let mut h = vec![T::zero(); fbox.rule_count()];
    for (m, hm) in fbox.activations(&x.to_vector()) {
        h[m] = hm;
    }
    h
}

/// One regression sample: premise/state `x` and drift `y = A x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample<T: Real> {
    pub x: Vector3<T>,
    pub y: Vector3<T>,
}

/// Uniform samples over the box with exact drift targets.
pub fn generate_training_data<T: Real>(
    params: &MarketParams<T>,
    fbox: &FuzzyBox<T>,
    count: usize,
    seed: u64,
) -> Result<Vec<TrainingSample<T>>> {
    let rules = fbox.rule_count();
    if count < rules {
        return Err(Error::UnderDetermined { got: count, rules });
    }
    let sys = assemble_system_matrices(params)?;
    let xs = sample_box(fbox, count, seed);
    Ok(xs
        .into_iter()
        .map(|x| TrainingSample {
            x,
            y: sys.a * x + sys.offset,
        })
        .collect())
}

/// `count` points drawn independently and uniformly from the box.
pub fn sample_box<T: Real>(fbox: &FuzzyBox<T>, count: usize, seed: u64) -> Vec<Vector3<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds: Vec<(f64, f64)> = fbox
        .axes
        .iter()
        .map(|a| (a.lower.to_f64_lossy(), a.upper.to_f64_lossy()))
        .collect();
    (0..count)
        .map(|_| {
            let mut v = Vector3::zeros();
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                let u: f64 = rng.random();
                v[i] = T::lit(lo + u * (hi - lo));
            }
            v
        })
        .collect()
}

/// Residual weighting in the rule regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each residual divided by `‖x‖`, matching the relative error metric.
    #[default]
    Relative,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions<T> {
    /// Shrinkage of every `A_m` toward the single-rule global fit.
    pub ridge: T,
    pub weighting: Weighting,
}

impl<T: Real> Default for IdentifyOptions<T> {
    fn default() -> Self {
        Self {
            ridge: T::lit(1e-8),
            weighting: Weighting::Relative,
        }
    }
}

/// Fitted rule consequents.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel<T: Real> {
    pub fuzzy_box: FuzzyBox<T>,
    pub rules: Vec<Matrix3<T>>,
    /// Worst relative squared error `‖Δ‖² / ‖x‖²` over the training samples.
    pub sup_error: T,
    pub sample_count: usize,
}

impl<T: Real> IdentifiedModel<T> {
    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }
}

fn sample_weight<T: Real>(x: &Vector3<T>, weighting: Weighting) -> T {
    match weighting {
        Weighting::Uniform => T::one(),
        Weighting::Relative => {
            let n2 = x.norm_squared();
            if n2 > T::zero() {
                T::one() / n2
            } else {
                T::zero()
            }
        }
    }
}

/// Least-squares fit of the rule matrices.
///
/// Minimises `Σ_l w_l ‖y_l − Σ_m h_m(x_l) A_m x_l‖² + ridge Σ_m ‖A_m − Ā‖²_F`
/// where `Ā` is the weighted one-rule fit `y ≈ Ā x`. The three output rows
/// share one normal matrix and are solved together.
pub fn identify_rule_matrices<T: Real>(
    samples: &[TrainingSample<T>],
    fbox: &FuzzyBox<T>,
    options: &IdentifyOptions<T>,
) -> Result<IdentifiedModel<T>> {
    if samples.is_empty() {
        return Err(Error::UnderDetermined {
            got: 0,
            rules: fbox.rule_count(),
        });
    }
    if !(options.ridge >= T::zero()) {
        return Err(Error::Parameter {
            name: "ridge",
            reason: "must be non-negative".into(),
        });
    }
    fbox.validate()?;
    let rules = fbox.rule_count();
    let n = 3 * rules;

    // global one-rule fit, used as the shrinkage target
    let mut gxx = Matrix3::<T>::zeros();
    let mut gxy = Matrix3::<T>::zeros();
    for s in samples {
        let w = sample_weight(&s.x, options.weighting);
        gxx += s.x * s.x.transpose() * w;
        gxy += s.x * s.y.transpose() * w;
    }
    let anchor_t = gxx
        .cholesky()
        .map(|c| c.solve(&gxy))
        .unwrap_or_else(Matrix3::zeros);
    // anchor_t is Ā^T: column i holds row i of Ā

    let mut normal = DMatrix::<T>::zeros(n, n);
    let mut rhs = DMatrix::<T>::zeros(n, 3);
    let mut cols: Vec<(usize, T)> = Vec::with_capacity(24);
    for s in samples {
        let w = sample_weight(&s.x, options.weighting);
        cols.clear();
        for (m, h) in fbox.activations(&s.x) {
            for j in 0..3 {
                cols.push((3 * m + j, h * s.x[j]));
            }
        }
        for &(ci, vi) in &cols {
            for &(cj, vj) in &cols {
                normal[(ci, cj)] += w * vi * vj;
            }
            for r in 0..3 {
                rhs[(ci, r)] += w * vi * s.y[r];
            }
        }
    }
    for m in 0..rules {
        for j in 0..3 {
            let c = 3 * m + j;
            normal[(c, c)] += options.ridge;
            for r in 0..3 {
                rhs[(c, r)] += options.ridge * anchor_t[(j, r)];
            }
        }
    }

    let max_diag = (0..n).map(|i| normal[(i, i)]).fold(T::zero(), |a, b| a.max(b));
    let chol = normal.clone().cholesky().ok_or(Error::RankDeficient)?;
    let min_pivot = (0..n)
        .map(|i| chol.l_dirty()[(i, i)] * chol.l_dirty()[(i, i)])
        .fold(max_diag, |a, b| a.min(b));
    if min_pivot <= max_diag * T::lit(1e-11) {
        return Err(Error::RankDeficient);
    }
    let theta = chol.solve(&rhs);

    let rule_mats: Vec<Matrix3<T>> = (0..rules)
        .map(|m| {
            Matrix3::from_fn(|row, col| theta[(3 * m + col, row)])
        })
        .collect();
    let mut model = IdentifiedModel {
        fuzzy_box: fbox.clone(),
        rules: rule_mats,
        sup_error: T::zero(),
        sample_count: samples.len(),
    };
    model.sup_error = approximation_error_sup(&model, samples);
    Ok(model)
}

/// `Σ_m h_m(x) A_m x`.
pub fn blend_dynamics<T: Real>(model: &IdentifiedModel<T>, x: &MarketState<T>) -> Vector3<T> {
    blend_vector(model, &x.to_vector())
}

pub(crate) fn blend_vector<T: Real>(model: &IdentifiedModel<T>, x: &Vector3<T>) -> Vector3<T> {
    model
        .fuzzy_box
        .activations(x)
        .into_iter()
        .fold(Vector3::zeros(), |acc, (m, h)| acc + model.rules[m] * x * h)
}

/// Largest `‖y − blend(x)‖² / ‖x‖²` over the samples; zero vectors are skipped.
pub fn approximation_error_sup<T: Real>(model: &IdentifiedModel<T>, samples: &[TrainingSample<T>]) -> T {
    let mut worst = T::zero();
    for s in samples {
        let n2 = s.x.norm_squared();
        if n2 == T::zero() {
            log::warn!("skipping zero sample in approximation error supremum");
            continue;
        }
        let delta = s.y - blend_vector(model, &s.x);
        let r = delta.norm_squared() / n2;
        if r > worst {
            worst = r;
        }
    }
    worst
}

/// Flattens the rule matrices of `model` row-major, for hashing and comparisons.
pub fn flatten_rules<T: Real>(model: &IdentifiedModel<T>) -> DVector<T> {
    let mut v = DVector::zeros(9 * model.rules.len());
    for (m, a) in model.rules.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                v[9 * m + 3 * r + c] = a[(r, c)];
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn boxed() -> FuzzyBox<f64> {
        FuzzyBox::reference()
    }

    #[test]
    fn uniform_peaks() {
        let b = boxed();
        assert_abs_diff_eq!(b.axes[0].peaks[1], 35.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.axes[0].peaks[2], 55.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.axes[2].peaks[1], -10.0 / 3.0, epsilon = 1e-12);
        assert_eq!(b.axes[2].peaks[3], 10.0);
        assert_eq!(b.rule_count(), 64);
    }

    #[test]
    fn worked_membership_example() {
        let b = boxed();
        // reference values use peaks rounded to 11.67 / 3.33
        assert_abs_diff_eq!(membership_value(&b.axes[0], 1, 11.67).unwrap(), 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(membership_value(&b.axes[1], 0, 8.335).unwrap(), 0.5, epsilon = 1e-3);
        assert_eq!(membership_value(&b.axes[2], 3, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn shoulders_saturate_and_clamp() {
        let b = boxed();
        assert_eq!(membership_value(&b.axes[0], 0, 5.0).unwrap(), 1.0);
        assert_eq!(membership_value(&b.axes[0], 0, -100.0).unwrap(), 1.0);
        assert_eq!(membership_value(&b.axes[0], 3, 100.0).unwrap(), 1.0);
        assert_eq!(membership_value(&b.axes[0], 1, 100.0).unwrap(), 0.0);
        assert!(matches!(
            membership_value(&b.axes[0], 4, 10.0),
            Err(Error::Index { index: 4, count: 4 })
        ));
    }

    #[test]
    fn sparse_matches_membership_formula() {
        let b = boxed();
        for &v in &[-3.0, 5.0, 7.7, 11.0, 18.4, 24.99, 25.0, 40.0] {
            let act = b.axes[0].active(v);
            for i in 0..4 {
                let dense = membership_value(&b.axes[0], i, v).unwrap();
                let sparse: f64 = act.iter().filter(|(j, _)| *j == i).map(|(_, h)| *h).sum();
                assert_abs_diff_eq!(dense, sparse, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn vertex_activation_is_indicator() {
        let b = boxed();
        let h = rule_activation(&b, &MarketState::new(5.0, 5.0, -10.0));
        assert_eq!(h[0], 1.0);
        assert_eq!(h.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn worked_example_activation_support() {
        // brute-force product over all 64 rules against the sparse path
        let b = boxed();
        let x = MarketState::new(11.67, 8.335, -1.0);
        let h = rule_activation(&b, &x);
        let mut brute = vec![0.0; 64];
        let mut total = 0.0;
        for m in 0..64 {
            let idx = b.rule_indices(m);
            let p = membership_value(&b.axes[0], idx[0], x.p_g).unwrap()
                * membership_value(&b.axes[1], idx[1], x.p_d).unwrap()
                * membership_value(&b.axes[2], idx[2], x.e).unwrap();
            brute[m] = p;
            total += p;
        }
        for m in 0..64 {
            assert_abs_diff_eq!(h[m], brute[m] / total, epsilon = 1e-14);
            if h[m] > 0.0 {
                let idx = b.rule_indices(m);
                assert!(idx[0] == 1 || idx[0] == 2);
                assert!(idx[1] <= 1);
                assert!(idx[2] == 1 || idx[2] == 2);
            }
        }
        assert!(h.iter().filter(|&&v| v > 0.0).count() <= 8);
    }

    #[test]
    fn training_data_contract() {
        let p = MarketParams::table_one();
        let b = boxed();
        let s1 = generate_training_data(&p, &b, 1500, 7).unwrap();
        let s2 = generate_training_data(&p, &b, 1500, 7).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 1500);
        for s in &s1 {
            assert!(b.contains(&s.x));
            let d = crate::market::market_drift(
                &p,
                &MarketState::from_vector(&s.x),
                0.0,
                &crate::market::Disturbance::zero(),
            )
            .unwrap();
            assert_abs_diff_eq!(d, s.y, epsilon = 1e-12);
        }
        assert!(matches!(
            generate_training_data(&p, &b, 63, 1),
            Err(Error::UnderDetermined { got: 63, rules: 64 })
        ));
    }

    #[test]
    fn single_rule_recovers_linear_map() {
        let one = FuzzyBox::uniform([(5.0, 25.0), (5.0, 25.0), (-10.0, 10.0)], [2, 2, 2]).unwrap();
        // a 2x2x2 grid is 8 rules; use a linear target so every rule equals A
        let a = Matrix3::new(-2.0, 0.0, -0.5, 0.0, -2.0, 0.0, 1.0, -1.0, 0.0);
        let xs = sample_box(&one, 400, 3);
        let samples: Vec<_> = xs.iter().map(|&x| TrainingSample { x, y: a * x }).collect();
        let model = identify_rule_matrices(&samples, &one, &IdentifyOptions::default()).unwrap();
        for r in &model.rules {
            assert_abs_diff_eq!(*r, a, epsilon = 1e-5);
        }
        assert!(model.sup_error < 1e-9);
    }

    #[test]
    fn doubling_targets_doubles_rules() {
        let p = MarketParams::table_one();
        let b = FuzzyBox::uniform([(5.0, 25.0), (5.0, 25.0), (-10.0, 10.0)], [3, 3, 3]).unwrap();
        let s = generate_training_data(&p, &b, 600, 11).unwrap();
        let s2: Vec<_> = s.iter().map(|t| TrainingSample { x: t.x, y: t.y * 2.0 }).collect();
        let opts = IdentifyOptions::default();
        let m1 = identify_rule_matrices(&s, &b, &opts).unwrap();
        let m2 = identify_rule_matrices(&s2, &b, &opts).unwrap();
        for (a1, a2) in m1.rules.iter().zip(&m2.rules) {
            assert_abs_diff_eq!(*a1 * 2.0, *a2, epsilon = 1e-7);
        }
    }

    #[test]
    fn zero_ridge_on_redundant_rules_is_rank_deficient() {
        let p = MarketParams::table_one();
        let b = boxed();
        let s = generate_training_data(&p, &b, 1500, 2).unwrap();
        let opts = IdentifyOptions {
            ridge: 0.0,
            weighting: Weighting::Uniform,
        };
        assert!(matches!(identify_rule_matrices(&s, &b, &opts), Err(Error::RankDeficient)));
    }

    #[test]
    fn energy_row_is_exact() {
        let p = MarketParams::table_one();
        let b = boxed();
        let s = generate_training_data(&p, &b, 1500, 0).unwrap();
        let model = identify_rule_matrices(&s, &b, &IdentifyOptions::default()).unwrap();
        for a in &model.rules {
            assert_abs_diff_eq!(a[(2, 0)], 1.0, epsilon = 1e-5);
            assert_abs_diff_eq!(a[(2, 1)], -1.0, epsilon = 1e-5);
            assert_abs_diff_eq!(a[(2, 2)], 0.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn blend_with_equal_rules_is_linear() {
        let b = boxed();
        let a = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5);
        let model = IdentifiedModel {
            fuzzy_box: b,
            rules: vec![a; 64],
            sup_error: 0.0,
            sample_count: 0,
        };
        let x = MarketState::new(9.0, 17.0, 2.5);
        assert_abs_diff_eq!(blend_dynamics(&model, &x), a * x.to_vector(), epsilon = 1e-12);
        let samples = vec![TrainingSample {
            x: x.to_vector(),
            y: a * x.to_vector(),
        }];
        assert!(approximation_error_sup(&model, &samples) < 1e-24);
        let shifted = vec![TrainingSample {
            x: x.to_vector(),
            y: a * x.to_vector() + Vector3::repeat(1.0),
        }];
        assert!(approximation_error_sup(&model, &shifted) > 0.0);
    }

    #[test]
    fn zero_sample_is_skipped() {
        let model = IdentifiedModel {
            fuzzy_box: boxed(),
            rules: vec![Matrix3::identity(); 64],
            sup_error: 0.0,
            sample_count: 0,
        };
        let s = vec![TrainingSample {
            x: Vector3::zeros(),
            y: Vector3::repeat(5.0),
        }];
        assert_eq!(approximation_error_sup(&model, &s), 0.0);
    }
}
