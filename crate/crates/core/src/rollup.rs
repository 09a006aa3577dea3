//! Roll-up of claim assessments through the claim tree and into family
//! spokes.
//!
//! Each dimension is aggregated independently. A node's combine set holds its
//! own direct score (when scored) and the effective value of every child that
//! has one; N/A and unassessed entries contribute nothing. `conservative_min`
//! takes the minimum of the set, `weighted_mean` the weighted arithmetic mean
//! with weights renormalized over the members actually present. Values stay
//! exact rationals.
//!
//! Overrides replace a node's effective value (and so what its parent sees)
//! but never touch its children or the low-score register, which is built
//! from direct assessments alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::assessment::{ClaimAssessment, Dimension, DimensionValue};
use crate::model::{traverse, ClaimId, PersonRef, SafetyCase, TraversalError, TraversalOrder};
use crate::score::Score;

pub const DEFAULT_THRESHOLD: u8 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    ConservativeMin,
    WeightedMean,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::ConservativeMin => "conservative_min",
            Strategy::WeightedMean => "weighted_mean",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = RollupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conservative_min" => Ok(Strategy::ConservativeMin),
            "weighted_mean" => Ok(Strategy::WeightedMean),
            other => Err(RollupError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Relative weights of a parent's children under `weighted_mean`.
///
/// Every child must be listed. The parent's own direct score may be weighted
/// by listing the parent id; otherwise it gets the mean weight of the children
/// that contribute a value in the dimension being combined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weighting {
    pub parent: ClaimId,
    pub weights: BTreeMap<ClaimId, Score>,
    #[serde(default)]
    pub rationale: String,
}

impl Weighting {
    fn is_uniform(&self) -> bool {
        let mut it = self.weights.values();
        match it.next() {
            Some(first) => it.all(|w| w == first),
            None => true,
        }
    }
}

/// A documented replacement of one node's effective value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub claim_id: ClaimId,
    pub dimension: Dimension,
    pub value: u8,
    pub rationale: String,
    pub author: PersonRef,
    pub date: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollupOptions {
    pub strategy: Strategy,
    pub threshold: u8,
    #[serde(default)]
    pub weights: Vec<Weighting>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

impl Default for RollupOptions {
    fn default() -> Self {
        RollupOptions { strategy: Strategy::default(), threshold: DEFAULT_THRESHOLD, weights: vec![], overrides: vec![] }
    }
}

impl RollupOptions {
    pub fn new(strategy: Strategy, threshold: u8) -> Self {
        RollupOptions { strategy, threshold, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollupSource {
    Direct,
    Children,
    Override,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollupNode {
    pub claim_id: ClaimId,
    pub procedural_eff: Option<Score>,
    pub implementation_eff: Option<Score>,
    /// `None` when neither dimension has a value.
    pub source: Option<RollupSource>,
    /// Children that contributed to at least one dimension, in child order.
    pub contributing_children: Vec<ClaimId>,
    /// Index into [`RollupResult::overrides`].
    pub override_ref: Vec<usize>,
}

impl RollupNode {
    pub fn effective(&self, dim: Dimension) -> Option<&Score> {
        match dim {
            Dimension::Procedural => self.procedural_eff.as_ref(),
            Dimension::Implementation => self.implementation_eff.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LowScore {
    pub claim_id: ClaimId,
    pub dimension: Dimension,
    pub score: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoValueReason {
    /// Leaf without an assessment.
    Unassessed,
    /// Marked N/A and no child contributes.
    NotApplicable,
    /// Has children, none of which has a value, and no direct score.
    NoContributingChildren,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RollupWarning {
    StaleExcluded { claim_id: ClaimId },
    FutureVersionExcluded { claim_id: ClaimId, case_version: u64 },
    InvalidExcluded { claim_id: ClaimId, reason: String },
    UnknownClaimExcluded { claim_id: ClaimId },
    NoValue { claim_id: ClaimId, dimension: Dimension, reason: NoValueReason },
    ZeroTotalWeight { claim_id: ClaimId, dimension: Dimension },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollupResult {
    pub case_version: u64,
    pub strategy: Strategy,
    pub threshold: u8,
    pub nodes: BTreeMap<ClaimId, RollupNode>,
    /// Every direct score below the threshold, ordered by claim id then dimension.
    pub low_score_register: Vec<LowScore>,
    pub overrides: Vec<Override>,
    pub warnings: Vec<RollupWarning>,
}

impl RollupResult {
    pub fn effective(&self, claim: &str, dim: Dimension) -> Option<&Score> {
        self.nodes.get(claim).and_then(|n| n.effective(dim))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RollupError {
    #[error("unknown strategy `{0}` (expected conservative_min or weighted_mean)")]
    UnknownStrategy(String),
    #[error("threshold {0} is outside 0..=3")]
    InvalidThreshold(u8),
    #[error("weighting names unknown parent `{0}`")]
    UnknownWeightParent(ClaimId),
    #[error("more than one weighting for parent `{0}`")]
    DuplicateWeighting(ClaimId),
    #[error("weighting for `{parent}` references `{member}`, which is not one of its children")]
    WeightForNonChild { parent: ClaimId, member: ClaimId },
    #[error("weighting for `{parent}` omits child `{child}`")]
    MissingChildWeight { parent: ClaimId, child: ClaimId },
    #[error("weighting for `{parent}` has a negative weight for `{member}`")]
    NegativeWeight { parent: ClaimId, member: ClaimId },
    #[error("non-uniform weighting for `{0}` requires a rationale")]
    MissingWeightRationale(ClaimId),
    #[error("override on `{0}` requires a rationale")]
    OverrideWithoutRationale(ClaimId),
    #[error("override on unknown claim `{0}`")]
    OverrideUnknownClaim(ClaimId),
    #[error("override value {value} on `{claim}` is outside 0..=3")]
    OverrideOutOfRange { claim: ClaimId, value: u8 },
    #[error("override on `{claim}` authored by its point of contact `{author}`")]
    OverrideBySelf { claim: ClaimId, author: String },
    #[error("more than one override for `{claim}` {dimension}")]
    DuplicateOverride { claim: ClaimId, dimension: Dimension },
    #[error("no claim carries a family tag")]
    NoFamilies,
    #[error(transparent)]
    Traversal(#[from] TraversalError),
}

fn check_options(case: &SafetyCase, opts: &RollupOptions) -> Result<(), RollupError> {
    if opts.threshold > 3 {
        return Err(RollupError::InvalidThreshold(opts.threshold));
    }
    let mut seen = BTreeSet::new();
    for w in &opts.weights {
        let parent = case.claim(w.parent.as_str()).ok_or_else(|| RollupError::UnknownWeightParent(w.parent.clone()))?;
        if !seen.insert(&w.parent) {
            return Err(RollupError::DuplicateWeighting(w.parent.clone()));
        }
        for (member, weight) in &w.weights {
            if member != &parent.id && !parent.children.contains(member) {
                return Err(RollupError::WeightForNonChild { parent: w.parent.clone(), member: member.clone() });
            }
            if weight.is_negative() {
                return Err(RollupError::NegativeWeight { parent: w.parent.clone(), member: member.clone() });
            }
        }
        if let Some(child) = parent.children.iter().find(|c| !w.weights.contains_key(*c)) {
            return Err(RollupError::MissingChildWeight { parent: w.parent.clone(), child: child.clone() });
        }
        if !w.is_uniform() && w.rationale.trim().is_empty() {
            return Err(RollupError::MissingWeightRationale(w.parent.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for o in &opts.overrides {
        let claim = case.claim(o.claim_id.as_str()).ok_or_else(|| RollupError::OverrideUnknownClaim(o.claim_id.clone()))?;
        if o.rationale.trim().is_empty() {
            return Err(RollupError::OverrideWithoutRationale(o.claim_id.clone()));
        }
        if o.value > 3 {
            return Err(RollupError::OverrideOutOfRange { claim: o.claim_id.clone(), value: o.value });
        }
        if claim.poc.as_ref().is_some_and(|poc| poc.same_person(&o.author)) {
            return Err(RollupError::OverrideBySelf { claim: o.claim_id.clone(), author: o.author.name.clone() });
        }
        if !seen.insert((&o.claim_id, o.dimension)) {
            return Err(RollupError::DuplicateOverride { claim: o.claim_id.clone(), dimension: o.dimension });
        }
    }
    Ok(())
}

/// Keeps the assessments that may feed a roll-up, reporting the rest.
fn usable_assessments<'a>(
    case: &SafetyCase,
    assessments: &'a [ClaimAssessment],
    warnings: &mut Vec<RollupWarning>,
) -> BTreeMap<ClaimId, &'a ClaimAssessment> {
    let mut latest: BTreeMap<ClaimId, &ClaimAssessment> = BTreeMap::new();
    for a in assessments {
        latest.insert(a.claim_id.clone(), a);
    }
    latest
        .into_iter()
        .filter(|(id, a)| {
            let warning = if !case.claims.contains_key(id) {
                Some(RollupWarning::UnknownClaimExcluded { claim_id: id.clone() })
            } else if a.stale {
                Some(RollupWarning::StaleExcluded { claim_id: id.clone() })
            } else if a.case_version > case.version {
                Some(RollupWarning::FutureVersionExcluded { claim_id: id.clone(), case_version: a.case_version })
            } else if let Err(e) = a.check_invariants() {
                Some(RollupWarning::InvalidExcluded { claim_id: id.clone(), reason: e.to_string() })
            } else {
                None
            };
            match warning {
                Some(w) => {
                    warnings.push(w);
                    false
                }
                None => true,
            }
        })
        .collect()
}

fn combine(strategy: Strategy, members: &[(Score, Score)]) -> Option<(Score, bool)> {
    if members.is_empty() {
        return None;
    }
    match strategy {
        Strategy::ConservativeMin => members.iter().map(|(v, _)| v.clone()).min().map(|m| (m, false)),
        Strategy::WeightedMean => {
            let total: Score = members.iter().map(|(_, w)| w.clone()).sum();
            if total.is_zero() {
                let n = Score::from_int(members.len() as i64);
                let sum: Score = members.iter().map(|(v, _)| v.clone()).sum();
                Some((&sum / &n, true))
            } else {
                let weighted: Score = members.iter().map(|(v, w)| v * w).sum();
                Some((&weighted / &total, false))
            }
        }
    }
}

/// Aggregates assessments up the claim tree.
pub fn rollup(case: &SafetyCase, assessments: &[ClaimAssessment], opts: &RollupOptions) -> Result<RollupResult, RollupError> {
    check_options(case, opts)?;
    let order = traverse(case, TraversalOrder::Post)?;
    let mut warnings = Vec::new();
    let direct = usable_assessments(case, assessments, &mut warnings);
    let weightings: BTreeMap<&ClaimId, &Weighting> = opts.weights.iter().map(|w| (&w.parent, w)).collect();
    let overrides: BTreeMap<(&ClaimId, Dimension), usize> =
        opts.overrides.iter().enumerate().map(|(i, o)| ((&o.claim_id, o.dimension), i)).collect();

    let mut nodes: BTreeMap<ClaimId, RollupNode> = BTreeMap::new();
    for id in &order {
        let claim = &case.claims[id];
        let weighting = weightings.get(id).copied();
        let weight_of = |member: &ClaimId| -> Option<Score> {
            weighting.map(|w| w.weights.get(member).cloned()).unwrap_or(Some(Score::one()))
        };

        let mut node = RollupNode {
            claim_id: id.clone(),
            procedural_eff: None,
            implementation_eff: None,
            source: None,
            contributing_children: Vec::new(),
            override_ref: Vec::new(),
        };
        let mut contributing = BTreeSet::new();
        let mut dim_sources = Vec::new();
        for dim in Dimension::ALL {
            let mut members: Vec<(Score, Score)> = Vec::new();
            for child in &claim.children {
                if let Some(v) = nodes.get(child).and_then(|n| n.effective(dim)) {
                    members.push((v.clone(), weight_of(child).expect("every child is weighted")));
                    contributing.insert(child.clone());
                }
            }
            let from_children = !members.is_empty();
            let direct_value = direct.get(id).and_then(|a| a.value(dim));
            let has_direct = matches!(direct_value, Some(DimensionValue::Score(_)));
            if let Some(DimensionValue::Score(s)) = direct_value {
                // Without an explicit weight the direct score gets the mean
                // weight of the children that contribute in this dimension.
                let w = weight_of(id).unwrap_or_else(|| {
                    if members.is_empty() {
                        Score::one()
                    } else {
                        let sum: Score = members.iter().map(|(_, w)| w.clone()).sum();
                        &sum / &Score::from_int(members.len() as i64)
                    }
                });
                members.insert(0, (Score::from(s), w));
            }
            let mut value = match combine(opts.strategy, &members) {
                Some((v, fell_back)) => {
                    if fell_back {
                        warnings.push(RollupWarning::ZeroTotalWeight { claim_id: id.clone(), dimension: dim });
                    }
                    Some(v)
                }
                None => {
                    let reason = match direct_value {
                        Some(DimensionValue::NotApplicable) => NoValueReason::NotApplicable,
                        _ if !claim.children.is_empty() => NoValueReason::NoContributingChildren,
                        _ => NoValueReason::Unassessed,
                    };
                    warnings.push(RollupWarning::NoValue { claim_id: id.clone(), dimension: dim, reason });
                    None
                }
            };
            let mut source = match (has_direct, from_children) {
                (true, true) => Some(RollupSource::Mixed),
                (true, false) => Some(RollupSource::Direct),
                (false, true) => Some(RollupSource::Children),
                (false, false) => None,
            };
            if let Some(&idx) = overrides.get(&(id, dim)) {
                value = Some(Score::from(opts.overrides[idx].value));
                source = Some(RollupSource::Override);
                node.override_ref.push(idx);
            }
            dim_sources.push(source);
            match dim {
                Dimension::Procedural => node.procedural_eff = value,
                Dimension::Implementation => node.implementation_eff = value,
            }
        }
        node.contributing_children = claim.children.iter().filter(|c| contributing.contains(*c)).cloned().collect();
        node.source = if dim_sources.contains(&Some(RollupSource::Override)) {
            Some(RollupSource::Override)
        } else {
            let present: BTreeSet<_> = dim_sources.iter().flatten().map(|s| *s as u8).collect();
            match present.len() {
                0 => None,
                1 => dim_sources.iter().flatten().next().copied(),
                _ => Some(RollupSource::Mixed),
            }
        };
        nodes.insert(id.clone(), node);
    }

    Ok(RollupResult {
        case_version: case.version,
        strategy: opts.strategy,
        threshold: opts.threshold,
        nodes,
        low_score_register: low_score_register(direct.values().copied(), opts.threshold),
        overrides: opts.overrides.clone(),
        warnings,
    })
}

/// Direct scores strictly below `threshold`, ordered by claim then dimension.
pub fn low_score_register<'a>(assessments: impl IntoIterator<Item = &'a ClaimAssessment>, threshold: u8) -> Vec<LowScore> {
    let mut out: Vec<LowScore> = assessments
        .into_iter()
        .flat_map(|a| {
            Dimension::ALL.into_iter().filter_map(move |dim| match a.value(dim) {
                Some(DimensionValue::Score(s)) if s < threshold => {
                    Some(LowScore { claim_id: a.claim_id.clone(), dimension: dim, score: s })
                }
                _ => None,
            })
        })
        .collect();
    out.sort();
    out
}

/// One radar spoke: a claim family and its aggregated values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spoke {
    pub family: String,
    pub procedural: Option<Score>,
    pub implementation: Option<Score>,
}

impl Spoke {
    pub fn value(&self, dim: Dimension) -> Option<&Score> {
        match dim {
            Dimension::Procedural => self.procedural.as_ref(),
            Dimension::Implementation => self.implementation.as_ref(),
        }
    }
}

/// Spokes in order of each family's first appearance in a pre-order walk.
/// The ring scale is fixed at 0..=3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadarData {
    pub case_version: u64,
    pub strategy: Strategy,
    pub spokes: Vec<Spoke>,
}

/// Aggregates each family's effective values with the roll-up's strategy
/// (uniform weights under `weighted_mean`).
pub fn spoke_values(case: &SafetyCase, result: &RollupResult) -> Result<RadarData, RollupError> {
    let order = traverse(case, TraversalOrder::Pre)?;
    let mut families: Vec<(String, Vec<&ClaimId>)> = Vec::new();
    for id in &order {
        if let Some(family) = case.claims[id].family.as_deref().filter(|f| !f.trim().is_empty()) {
            match families.iter_mut().find(|(f, _)| f == family) {
                Some((_, members)) => members.push(id),
                None => families.push((family.to_string(), vec![id])),
            }
        }
    }
    if families.is_empty() {
        return Err(RollupError::NoFamilies);
    }
    let spokes = families
        .into_iter()
        .map(|(family, members)| {
            let value = |dim: Dimension| {
                let vals: Vec<(Score, Score)> = members
                    .iter()
                    .filter_map(|id| result.effective(id.as_str(), dim))
                    .map(|v| (v.clone(), Score::one()))
                    .collect();
                combine(result.strategy, &vals).map(|(v, _)| v)
            };
            Spoke { procedural: value(Dimension::Procedural), implementation: value(Dimension::Implementation), family }
        })
        .collect();
    Ok(RadarData { case_version: result.case_version, strategy: result.strategy, spokes })
}
