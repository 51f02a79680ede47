//! Vote aggregation. Every function here depends only on the multiset of
//! ballots, never on annotator order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RoleMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub annotator: String,
    pub decision: Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteOutcome {
    Valid,
    Invalid,
    Tie,
}

/// Strict majority over the verdicts; anything else is a tie.
pub fn majority_vote(verdicts: &[Verdict]) -> VoteOutcome {
    let m = verdicts.len();
    let valid = verdicts.iter().filter(|v| v.decision == Decision::Valid).count();
    if 2 * valid > m {
        VoteOutcome::Valid
    } else if 2 * (m - valid) > m {
        VoteOutcome::Invalid
    } else {
        VoteOutcome::Tie
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Type(String),
    NoneOfThem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementBallot {
    pub annotator: String,
    pub choice: Choice,
}

/// The choice with strictly more votes than every other, if there is one.
pub fn plurality(ballots: &[RefinementBallot]) -> Option<Choice> {
    let mut counts: BTreeMap<&Choice, usize> = BTreeMap::new();
    for b in ballots {
        *counts.entry(&b.choice).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    let mut leaders = counts.into_iter().filter(|(_, n)| *n == best);
    let (winner, _) = leaders.next()?;
    leaders.next().is_none().then(|| winner.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// More than half: `floor(M/2) + 1`.
    #[default]
    StrictMajority,
    /// Half or more: `ceil(M/2)`.
    AtLeastHalf,
}

impl ThresholdMode {
    pub fn threshold(self, m: usize) -> usize {
        match self {
            ThresholdMode::StrictMajority => m / 2 + 1,
            ThresholdMode::AtLeastHalf => m.div_ceil(2),
        }
    }
}

/// A role on which the annotators proposed fillers with nothing in common.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisputeRecord {
    pub role: String,
    /// Aligned fillers, one list per annotator, in annotator order.
    pub fillers: Vec<Vec<String>>,
}

/// Accepts each `(role, filler)` proposed by at least the mode's threshold
/// of annotators; an annotator listing a filler twice still counts once. A
/// role with no accepted filler whose proposals are all non-empty and
/// pairwise disjoint becomes a dispute.
///
/// The role inventory is taken from the first map; accepted fillers are
/// listed in lexicographic order.
pub fn vote_arguments(aligned: &[RoleMap], mode: ThresholdMode) -> (RoleMap, Vec<DisputeRecord>) {
    let Some(first) = aligned.first() else {
        return (RoleMap::default(), Vec::new());
    };
    let threshold = mode.threshold(aligned.len());
    let mut accepted = first.clone();
    let mut disputes = Vec::new();
    for role in first.roles() {
        let proposals: Vec<&[String]> = aligned.iter().map(|m| m.get(role).unwrap_or(&[])).collect();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &proposals {
            let distinct: BTreeSet<&str> = p.iter().map(String::as_str).collect();
            for f in distinct {
                *counts.entry(f).or_default() += 1;
            }
        }
        let winners: Vec<String> =
            counts.iter().filter(|(_, n)| **n >= threshold).map(|(f, _)| f.to_string()).collect();
        let disjoint = counts.values().all(|n| *n == 1);
        if winners.is_empty() && disjoint && proposals.iter().all(|p| !p.is_empty()) {
            disputes.push(DisputeRecord {
                role: role.to_string(),
                fillers: proposals.iter().map(|p| p.to_vec()).collect(),
            });
        }
        accepted.set(role, winners);
    }
    (accepted, disputes)
}
