//! Binomial opinions built from Beta evidence, and the four novelty scores.
//!
//! Every score in [`NoveltyScores`] is oriented so that a higher value means
//! the actor is more likely novel. The belief-based score is therefore stored
//! as `1 − b` where `b` is the co-multiplied belief over all classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::stable_logistic;

/// Prior weight and base rate used when mapping evidence to opinions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpinionParams {
    pub prior_weight: f64,
    pub base_rate: f64,
}

impl Default for OpinionParams {
    fn default() -> Self {
        Self {
            prior_weight: 2.0,
            base_rate: 1.0,
        }
    }
}

impl OpinionParams {
    /// `W = 2`, `a = 1/2`: the setting under which `b + d + u = 1`.
    pub fn additive() -> Self {
        Self {
            prior_weight: 2.0,
            base_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_weight.is_finite() && self.prior_weight > 0.0) {
            return Err(Error::domain(
                "opinion",
                format!("prior weight must be > 0, got {}", self.prior_weight),
            ));
        }
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(Error::domain(
                "opinion",
                format!("base rate must lie in [0, 1], got {}", self.base_rate),
            ));
        }
        Ok(())
    }
}

/// A binomial subjective opinion `(b, d, u, a)` with its prior weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub belief: f64,
    pub disbelief: f64,
    pub uncertainty: f64,
    pub base_rate: f64,
    pub prior_weight: f64,
}

impl Opinion {
    /// Maps one `(α, β)` evidence pair to an opinion.
    ///
    /// `b = (α − aW)/(α+β)`, `d = (β − aW)/(α+β)`, `u = W/(α+β)`. With the
    /// default `a = 1`, `b` may be negative; the masses only sum to one
    /// when `a = 1/2`.
    pub fn from_evidence(alpha: f64, beta: f64, params: OpinionParams) -> Result<Self> {
        params.validate()?;
        if !(alpha >= 1.0 && beta >= 1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::domain(
                "opinion_from_evidence",
                format!("evidence must be finite and >= 1, got alpha={alpha}, beta={beta}"),
            ));
        }
        Ok(Self::from_evidence_unchecked(alpha, beta, params))
    }

    pub(crate) fn from_evidence_unchecked(alpha: f64, beta: f64, params: OpinionParams) -> Self {
        let OpinionParams {
            prior_weight: w,
            base_rate: a,
        } = params;
        let strength = alpha + beta;
        Self {
            belief: (alpha - a * w) / strength,
            disbelief: (beta - a * w) / strength,
            uncertainty: w / strength,
            base_rate: a,
            prior_weight: w,
        }
    }

    /// `p = b + a·u`.
    pub fn expected_probability(&self) -> f64 {
        self.belief + self.base_rate * self.uncertainty
    }
}

/// Binomial co-multiplication `b1 + b2 − b1·b2`.
pub fn comultiply(b1: f64, b2: f64) -> Result<f64> {
    for b in [b1, b2] {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::domain(
                "comultiply",
                format!("beliefs must lie in [0, 1], got {b}"),
            ));
        }
    }
    Ok(b1 + b2 - b1 * b2)
}

/// Per-class positive and negative evidence of one actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePair {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl EvidencePair {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::shape(
                "evidence_pair",
                format!("alpha has {} classes, beta has {}", alpha.len(), beta.len()),
            ));
        }
        if let Some(v) = alpha
            .iter()
            .chain(&beta)
            .find(|v| !(v.is_finite() && **v >= 1.0))
        {
            return Err(Error::domain(
                "evidence_pair",
                format!("evidence must be finite and >= 1, found {v}"),
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn opinions(&self, params: OpinionParams) -> Vec<Opinion> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| Opinion::from_evidence_unchecked(a, b, params))
            .collect()
    }
}

/// The novelty scoring mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "NE")]
    Ne,
    #[serde(rename = "PNE")]
    Pne,
    #[serde(rename = "Belief")]
    Belief,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Pe,
        Mechanism::Ne,
        Mechanism::Pne,
        Mechanism::Belief,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Pe => "PE",
            Mechanism::Ne => "NE",
            Mechanism::Pne => "PNE",
            Mechanism::Belief => "Belief",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown novelty mechanism '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoveltyScores {
    pub pe: f64,
    pub ne: f64,
    pub pne: f64,
    /// `1 − b₁ ∗ ⋯ ∗ b_K`.
    pub belief: f64,
}

impl NoveltyScores {
    pub fn get(&self, mechanism: Mechanism) -> f64 {
        match mechanism {
            Mechanism::Pe => self.pe,
            Mechanism::Ne => self.ne,
            Mechanism::Pne => self.pne,
            Mechanism::Belief => self.belief,
        }
    }
}

/// Computes all four novelty scores of one actor.
pub fn novelty_scores(ev: &EvidencePair, params: OpinionParams) -> NoveltyScores {
    novelty_scores_raw(&ev.alpha, &ev.beta, params)
}

/// Same as [`novelty_scores`] on borrowed rows that already satisfy the
/// evidence invariants.
pub(crate) fn novelty_scores_raw(
    alpha: &[f64],
    beta: &[f64],
    params: OpinionParams,
) -> NoveltyScores {
    let k = alpha.len() as f64;
    let sum_alpha: f64 = alpha.iter().sum();
    let sum_beta: f64 = beta.iter().sum();

    let pe = 2.0 * stable_logistic(sum_alpha - k);
    let ne = 2.0 * stable_logistic(k - sum_beta) - 1.0;
    let pne = 2.0 * k / (sum_alpha + sum_beta);

    let combined = alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| {
            Opinion::from_evidence_unchecked(a, b, params)
                .belief
                .clamp(0.0, 1.0)
        })
        .fold(0.0, |acc, b| acc + b - acc * b);

    NoveltyScores {
        pe,
        ne,
        pne,
        belief: 1.0 - combined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn opinion_examples() {
        let o = Opinion::from_evidence(4.0, 2.0, OpinionParams::default()).unwrap();
        assert_abs_diff_eq!(o.belief, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o.disbelief, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o.uncertainty, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o.expected_probability(), 2.0 / 3.0, epsilon = 1e-15);

        let vacuous = Opinion::from_evidence(1.0, 1.0, OpinionParams::additive()).unwrap();
        assert_eq!(
            (vacuous.belief, vacuous.disbelief, vacuous.uncertainty),
            (0.0, 0.0, 1.0)
        );
        assert_eq!(vacuous.expected_probability(), 0.5);

        let o = Opinion::from_evidence(9.0, 1.0, OpinionParams::additive()).unwrap();
        assert_abs_diff_eq!(o.belief, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(o.disbelief, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o.uncertainty, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(o.expected_probability(), 0.9, epsilon = 1e-15);
    }

    #[test]
    fn default_base_rate_allows_negative_belief() {
        let o = Opinion::from_evidence(1.0, 1.0, OpinionParams::default()).unwrap();
        assert_eq!(o.belief, -0.5);
        assert!(o.belief + o.disbelief + o.uncertainty != 1.0);
    }

    #[test]
    fn opinion_rejects_bad_inputs() {
        assert!(Opinion::from_evidence(0.5, 1.0, OpinionParams::default()).is_err());
        assert!(Opinion::from_evidence(1.0, f64::NAN, OpinionParams::default()).is_err());
        let bad = OpinionParams {
            prior_weight: 0.0,
            base_rate: 0.5,
        };
        assert!(Opinion::from_evidence(2.0, 2.0, bad).is_err());
        let bad = OpinionParams {
            prior_weight: 2.0,
            base_rate: 1.5,
        };
        assert!(Opinion::from_evidence(2.0, 2.0, bad).is_err());
    }

    #[test]
    fn comultiply_examples() {
        assert_eq!(comultiply(0.5, 0.5).unwrap(), 0.75);
        for x in [0.0, 0.1, 0.37, 1.0] {
            assert_eq!(comultiply(0.0, x).unwrap(), x);
            assert_eq!(comultiply(1.0, x).unwrap(), 1.0);
        }
        assert!(comultiply(-0.1, 0.5).is_err());
        assert!(comultiply(0.5, 1.1).is_err());
    }

    #[test]
    fn novelty_examples() {
        let p = OpinionParams::default();
        let ev = EvidencePair::new(vec![1.0; 3], vec![2.0, 5.0, 1.5]).unwrap();
        assert_eq!(novelty_scores(&ev, p).pe, 1.0);

        let ev = EvidencePair::new(vec![3.0, 7.0], vec![1.0; 2]).unwrap();
        assert_eq!(novelty_scores(&ev, p).ne, 0.0);

        let ev = EvidencePair::new(vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(novelty_scores(&ev, p).pne, 1.0);

        let ev = EvidencePair::new(vec![1.0 + 3f64.ln()], vec![4.2]).unwrap();
        assert_abs_diff_eq!(novelty_scores(&ev, p).pe, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn belief_score_is_product_of_disbeliefs() {
        let ev = EvidencePair::new(vec![9.0, 3.0, 1.0], vec![1.0, 3.0, 8.0]).unwrap();
        let params = OpinionParams::additive();
        let s = novelty_scores(&ev, params);
        let expected: f64 = ev
            .opinions(params)
            .iter()
            .map(|o| 1.0 - o.belief.clamp(0.0, 1.0))
            .product();
        assert_abs_diff_eq!(s.belief, expected, epsilon = 1e-15);
    }

    #[test]
    fn evidence_pair_validation() {
        assert!(EvidencePair::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(EvidencePair::new(vec![], vec![]).is_err());
        assert!(EvidencePair::new(vec![0.99], vec![1.0]).is_err());
    }

    #[test]
    fn mechanism_names_round_trip() {
        for m in Mechanism::ALL {
            assert_eq!(m.name().parse::<Mechanism>().unwrap(), m);
        }
        assert!("XE".parse::<Mechanism>().is_err());
    }
}
