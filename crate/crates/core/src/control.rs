//! Pricing policies: ACE dynamic pricing and fuzzy static state feedback.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyBox;
use crate::lmi::GainSet;
use crate::market::MarketState;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ace,
    Fuzzy,
}

impl PolicyKind {
    /// Lower-case name used in file names.
    pub fn slug(self) -> &'static str {
        match self {
            PolicyKind::Ace => "ace",
            PolicyKind::Fuzzy => "fuzzy",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyKind::Ace => "ACE",
            PolicyKind::Fuzzy => "FUZZY",
        })
    }
}

/// Immutable pricing policy. The ACE price state is carried by the simulator.
#[derive(Debug, Clone)]
pub struct PricingPolicy<T: Real> {
    pub kind: PolicyKind,
    pub ace_lambda0: T,
    pub ace_tau_lambda: T,
    pub fuzzy_gains: Option<Arc<GainSet<T>>>,
    pub fuzzy_box: Option<Arc<FuzzyBox<T>>>,
    /// Stored-energy target `q`; the policy regulates `e − q`.
    pub storage_target: T,
    /// Optional price saturation `[lo, hi]`; off by default.
    pub clamp: Option<(T, T)>,
}

impl<T: Real> PricingPolicy<T> {
    pub fn ace(lambda0: T, tau_lambda: T) -> Result<Self> {
        if !(tau_lambda > T::zero()) || !tau_lambda.finite() {
            return Err(Error::Parameter {
                name: "tau_lambda",
                reason: format!("must be finite and positive, got {tau_lambda}"),
            });
        }
        if !lambda0.finite() {
            return Err(Error::Domain("initial price"));
        }
        Ok(Self {
            kind: PolicyKind::Ace,
            ace_lambda0: lambda0,
            ace_tau_lambda: tau_lambda,
            fuzzy_gains: None,
            fuzzy_box: None,
            storage_target: T::zero(),
            clamp: None,
        })
    }

    pub fn fuzzy(gains: Arc<GainSet<T>>, fbox: Arc<FuzzyBox<T>>) -> Result<Self> {
        gains.validate()?;
        fbox.validate()?;
        if gains.rule_count() != fbox.rule_count() {
            return Err(Error::Config(format!(
                "gain set has {} rules but the fuzzy box has {}",
                gains.rule_count(),
                fbox.rule_count()
            )));
        }
        Ok(Self {
            kind: PolicyKind::Fuzzy,
            ace_lambda0: T::zero(),
            ace_tau_lambda: T::one(),
            fuzzy_gains: Some(gains),
            fuzzy_box: Some(fbox),
            storage_target: T::zero(),
            clamp: None,
        })
    }

    pub fn with_storage_target(mut self, q: T) -> Self {
        self.storage_target = q;
        self
    }

    pub fn with_clamp(mut self, lo: T, hi: T) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Parameter {
                name: "clamp",
                reason: format!("empty price range [{lo}, {hi}]"),
            });
        }
        self.clamp = Some((lo, hi));
        Ok(self)
    }

    /// `λ̇` for the ACE law at energy `e`, relative to the storage target.
    pub fn ace_rate(&self, e: T) -> T {
        ace_price_rate(e - self.storage_target, self.ace_tau_lambda)
    }

    fn saturate(&self, lambda: T) -> T {
        match self.clamp {
            Some((lo, hi)) => lambda.max(lo).min(hi),
            None => lambda,
        }
    }
}

/// ACE price dynamics `λ̇ = −e / τ_λ`.
pub fn ace_price_rate<T: Real>(e: T, tau_lambda: T) -> T {
    -e / tau_lambda
}

/// `Σ_m h_m(x̃) K_m x̃` with `x̃ = (p_g, p_d, e − q)`.
pub fn fuzzy_price<T: Real>(policy: &PricingPolicy<T>, x: &MarketState<T>) -> Result<T> {
    let (Some(gains), Some(fbox)) = (&policy.fuzzy_gains, &policy.fuzzy_box) else {
        return Err(Error::Config("fuzzy policy has no gain set".into()));
    };
    let xt: Vector3<T> = x.shifted(policy.storage_target).to_vector();
    let mut lambda = T::zero();
    for (m, h) in fbox.activations(&xt) {
        lambda += h * gains.gains[m].dot(&xt.transpose());
    }
    Ok(policy.saturate(lambda))
}

/// Price applied to the market: the fuzzy law, or the integrated ACE price.
pub fn price<T: Real>(policy: &PricingPolicy<T>, x: &MarketState<T>, internal_lambda: T) -> Result<T> {
    match policy.kind {
        PolicyKind::Fuzzy => fuzzy_price(policy, x),
        PolicyKind::Ace => Ok(policy.saturate(internal_lambda)),
    }
}
