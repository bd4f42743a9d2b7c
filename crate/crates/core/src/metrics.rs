//! Classification and group-fairness metrics.
//!
//! Biased is the positive class throughout. Undefined ratios are reported as
//! errors rather than silently turned into zero.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;

/// Disparate impact below this favors the privileged group.
pub const DI_LOWER: f64 = 0.8;
/// Disparate impact above this favors the unprivileged group.
pub const DI_UPPER: f64 = 1.25;
pub const DEFAULT_GAUC_POWER: f64 = -5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> Result<f64, MetricError> {
        ratio(self.tp, self.tp + self.fp, "precision")
    }

    pub fn recall(&self) -> Result<f64, MetricError> {
        ratio(self.tp, self.tp + self.fn_, "recall")
    }

    /// `2TP / (2TP + FN + FP)`.
    pub fn f1(&self) -> Result<f64, MetricError> {
        ratio(2 * self.tp, 2 * self.tp + self.fn_ + self.fp, "f1")
    }

    pub fn accuracy(&self) -> Result<f64, MetricError> {
        ratio(self.tp + self.tn, self.total(), "accuracy")
    }
}

fn ratio(num: u64, den: u64, name: &'static str) -> Result<f64, MetricError> {
    if den == 0 {
        Err(MetricError::Undefined(name))
    } else {
        Ok(num as f64 / den as f64)
    }
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix, MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Each metric is computed independently; one undefined metric does not hide
/// the others.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfAcc {
    pub precision: Result<f64, MetricError>,
    pub recall: Result<f64, MetricError>,
    pub f1: Result<f64, MetricError>,
    pub accuracy: Result<f64, MetricError>,
}

pub fn prf_acc(cm: &ConfusionMatrix) -> PrfAcc {
    PrfAcc {
        precision: cm.precision(),
        recall: cm.recall(),
        f1: cm.f1(),
        accuracy: cm.accuracy(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub group_id: String,
    pub privileged: bool,
    pub num_positives: u64,
    pub num_instances: u64,
}

impl GroupOutcome {
    pub fn new(
        group_id: impl Into<String>,
        privileged: bool,
        num_positives: u64,
        num_instances: u64,
    ) -> Self {
        Self {
            group_id: group_id.into(),
            privileged,
            num_positives,
            num_instances,
        }
    }

    pub fn positive_rate(&self) -> Result<f64, MetricError> {
        if self.num_instances == 0 {
            return Err(MetricError::InvalidGroup(format!(
                "{} has no instances",
                self.group_id
            )));
        }
        if self.num_positives > self.num_instances {
            return Err(MetricError::InvalidGroup(format!(
                "{} has more positives than instances",
                self.group_id
            )));
        }
        Ok(self.num_positives as f64 / self.num_instances as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FavorsPrivileged,
    Acceptable,
    FavorsUnprivileged,
}

impl Verdict {
    /// Four-fifths band, inclusive at both ends.
    pub fn of(di: f64) -> Self {
        if di < DI_LOWER {
            Verdict::FavorsPrivileged
        } else if di > DI_UPPER {
            Verdict::FavorsUnprivileged
        } else {
            Verdict::Acceptable
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::FavorsPrivileged => "favors_privileged",
            Verdict::Acceptable => "acceptable",
            Verdict::FavorsUnprivileged => "favors_unprivileged",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparateImpact {
    pub di: f64,
    pub verdict: Verdict,
}

/// Unprivileged positive rate over privileged positive rate.
pub fn disparate_impact(
    unprivileged: &GroupOutcome,
    privileged: &GroupOutcome,
) -> Result<DisparateImpact, MetricError> {
    let unpriv_rate = unprivileged.positive_rate()?;
    let priv_rate = privileged.positive_rate()?;
    if priv_rate == 0.0 {
        return Err(MetricError::UndefinedDisparateImpact);
    }
    let di = unpriv_rate / priv_rate;
    Ok(DisparateImpact {
        di,
        verdict: Verdict::of(di),
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            j += 1;
        }
        // ranks i+1..=j share their average
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let positives_in_tie = order[i..j].iter().filter(|&&k| labels[k]).count();
        positive_rank_sum += avg_rank * positives_in_tie as f64;
        i = j;
    }
    let n_pos_f = n_pos as f64;
    let u = positive_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Power mean `(mean(x_i^p))^(1/p)`.
pub fn power_mean(values: &[f64], power: f64) -> Result<f64, MetricError> {
    if power == 0.0 || !power.is_finite() {
        return Err(MetricError::InvalidConfig(
            "power must be finite and non-zero".into(),
        ));
    }
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    if power < 0.0 && values.contains(&0.0) {
        return Ok(0.0);
    }
    let mean = values.iter().map(|v| v.powf(power)).sum::<f64>() / values.len() as f64;
    Ok(mean.powf(1.0 / power))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BiasAuc {
    /// AUC restricted to subgroup members.
    Subgroup,
    /// Subgroup positives against background negatives.
    Bpsn,
    /// Background positives against subgroup negatives.
    Bnsp,
}

impl BiasAuc {
    pub const ALL: [BiasAuc; 3] = [BiasAuc::Subgroup, BiasAuc::Bpsn, BiasAuc::Bnsp];

    fn includes(self, member: bool, label: bool) -> bool {
        match self {
            BiasAuc::Subgroup => member,
            BiasAuc::Bpsn => member == label,
            BiasAuc::Bnsp => member != label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaucConfig {
    pub power: f64,
    pub weights: Vec<(BiasAuc, f64)>,
    /// Weight of the overall AUC as an extra term; zero leaves it out.
    pub overall_weight: f64,
}

impl Default for GaucConfig {
    fn default() -> Self {
        Self {
            power: DEFAULT_GAUC_POWER,
            weights: BiasAuc::ALL.iter().map(|&k| (k, 1.0 / 3.0)).collect(),
            overall_weight: 0.0,
        }
    }
}

impl GaucConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.power == 0.0 || !self.power.is_finite() {
            return Err(MetricError::InvalidConfig(
                "power must be finite and non-zero".into(),
            ));
        }
        let all = self
            .weights
            .iter()
            .map(|w| w.1)
            .chain([self.overall_weight]);
        if all.clone().any(|w| !(w >= 0.0 && w.is_finite())) {
            return Err(MetricError::InvalidConfig(
                "weights must be non-negative".into(),
            ));
        }
        let total: f64 = all.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MetricError::InvalidConfig(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        let mut kinds: Vec<BiasAuc> = self.weights.iter().map(|w| w.0).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.weights.len() || kinds.is_empty() {
            return Err(MetricError::InvalidConfig(
                "submetrics must be a non-empty set without repeats".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub name: String,
    /// One flag per instance.
    pub members: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmetricSummary {
    pub kind: BiasAuc,
    pub power_mean: f64,
    pub aucs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaucReport {
    pub value: f64,
    pub submetrics: Vec<SubmetricSummary>,
    pub overall_auc: Option<f64>,
    /// (subgroup, submetric) pairs skipped because a class was missing.
    pub excluded: Vec<(String, BiasAuc)>,
}

/// Generalized mean of bias AUCs: per submetric, the power mean of the
/// per-subgroup AUCs, combined with the configured weights.
pub fn generalized_bias_auc(
    scores: &[f64],
    labels: &[bool],
    subgroups: &[Subgroup],
    config: &GaucConfig,
) -> Result<GaucReport, MetricError> {
    config.validate()?;
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(bad) = subgroups.iter().find(|g| g.members.len() != scores.len()) {
        return Err(MetricError::InvalidConfig(format!(
            "subgroup {} has {} membership flags for {} instances",
            bad.name,
            bad.members.len(),
            scores.len()
        )));
    }

    let mut excluded = Vec::new();
    let mut submetrics = Vec::new();
    let mut value = 0.0;
    for &(kind, weight) in &config.weights {
        let mut aucs = Vec::new();
        for group in subgroups {
            let (s, l): (Vec<f64>, Vec<bool>) = scores
                .iter()
                .zip(labels)
                .zip(&group.members)
                .filter(|((_, &label), &member)| kind.includes(member, label))
                .map(|((&score, &label), _)| (score, label))
                .unzip();
            match roc_auc(&s, &l) {
                Ok(auc) => aucs.push((group.name.clone(), auc)),
                Err(MetricError::SingleClass) => {
                    log::warn!(
                        "subgroup {} excluded from {kind:?}: missing a class",
                        group.name
                    );
                    excluded.push((group.name.clone(), kind));
                }
                Err(e) => return Err(e),
            }
        }
        if aucs.is_empty() {
            return Err(MetricError::AllSubgroupsExcluded);
        }
        let values: Vec<f64> = aucs.iter().map(|a| a.1).collect();
        let mean = power_mean(&values, config.power)?;
        value += weight * mean;
        submetrics.push(SubmetricSummary {
            kind,
            power_mean: mean,
            aucs,
        });
    }
    let overall_auc = if config.overall_weight > 0.0 {
        let auc = roc_auc(scores, labels)?;
        value += config.overall_weight * auc;
        Some(auc)
    } else {
        None
    };
    Ok(GaucReport {
        value,
        submetrics,
        overall_auc,
        excluded,
    })
}
