//! Splitting recalled types into `N` prompt-sized parts.
//!
//! Every strategy yields parts whose sizes differ by at most one. `Level`
//! keeps confidence bands together, `Average` balances confidence sums with a
//! serpentine deal, and `Random` deals a seeded shuffle round-robin.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::recall::RecallCandidate;

pub const DEFAULT_PARTITIONS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("N exceeds candidate count ({parts} parts for {candidates} candidates)")]
    TooManyParts { parts: usize, candidates: usize },
    #[error("at least one part is required")]
    ZeroParts,
    #[error("no candidates to partition")]
    Empty,
    #[error("seed required for the random strategy")]
    SeedRequired,
    #[error("unknown partition strategy {0:?} (expected random, average or level)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Average,
    #[default]
    Level,
}

impl FromStr for Strategy {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "average" => Ok(Strategy::Average),
            "level" => Ok(Strategy::Level),
            _ => Err(PartitionError::UnknownStrategy(s.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Average => "average",
            Strategy::Level => "level",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionPlan {
    pub strategy: Strategy,
    pub parts: Vec<Vec<RecallCandidate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PartitionPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }

    pub fn confidence_sums(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.iter().map(|c| c.confidence).sum()).collect()
    }
}

fn check(cands: &[RecallCandidate], n: usize) -> Result<(), PartitionError> {
    if n == 0 {
        return Err(PartitionError::ZeroParts);
    }
    if cands.is_empty() {
        return Err(PartitionError::Empty);
    }
    if n > cands.len() {
        return Err(PartitionError::TooManyParts { parts: n, candidates: cands.len() });
    }
    Ok(())
}

/// Descending confidence, ties by ascending type id.
fn by_confidence(cands: &[RecallCandidate]) -> Vec<RecallCandidate> {
    let mut sorted = cands.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.type_id.cmp(&b.type_id)));
    sorted
}

fn deal<I>(cands: Vec<RecallCandidate>, n: usize, order: I) -> Vec<Vec<RecallCandidate>>
where
    I: Iterator<Item = usize>,
{
    let mut parts = vec![Vec::new(); n];
    for (c, slot) in cands.into_iter().zip(order) {
        parts[slot].push(c);
    }
    parts
}

/// Seeded shuffle, then round-robin.
pub fn partition_random(cands: &[RecallCandidate], n: usize, seed: u64) -> Result<PartitionPlan, PartitionError> {
    check(cands, n)?;
    let mut shuffled = cands.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(PartitionPlan { strategy: Strategy::Random, parts: deal(shuffled, n, (0..n).cycle()), seed: Some(seed) })
}

/// Sort by confidence and cut into contiguous chunks; earlier chunks take
/// the extra element.
pub fn partition_level(cands: &[RecallCandidate], n: usize) -> Result<PartitionPlan, PartitionError> {
    check(cands, n)?;
    let sorted = by_confidence(cands);
    let (base, extra) = (sorted.len() / n, sorted.len() % n);
    let mut parts = Vec::with_capacity(n);
    let mut rest = sorted.as_slice();
    for i in 0..n {
        let take = base + usize::from(i < extra);
        let (head, tail) = rest.split_at(take);
        parts.push(head.to_vec());
        rest = tail;
    }
    Ok(PartitionPlan { strategy: Strategy::Level, parts, seed: None })
}

/// Sort by confidence and deal in serpentine order `0..N, N..0, ...`.
pub fn partition_average(cands: &[RecallCandidate], n: usize) -> Result<PartitionPlan, PartitionError> {
    check(cands, n)?;
    let serpentine = (0..).map(move |i: usize| {
        let lap = i / n;
        let pos = i % n;
        if lap.is_multiple_of(2) {
            pos
        } else {
            n - 1 - pos
        }
    });
    Ok(PartitionPlan { strategy: Strategy::Average, parts: deal(by_confidence(cands), n, serpentine), seed: None })
}

/// Dispatches on strategy. The seed is required for `Random` and ignored
/// otherwise.
pub fn make_plan(
    strategy: Strategy,
    cands: &[RecallCandidate],
    n: usize,
    seed: Option<u64>,
) -> Result<PartitionPlan, PartitionError> {
    match strategy {
        Strategy::Random => partition_random(cands, n, seed.ok_or(PartitionError::SeedRequired)?),
        Strategy::Average => partition_average(cands, n),
        Strategy::Level => partition_level(cands, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_assume, proptest};

    fn cands(confs: &[f64]) -> Vec<RecallCandidate> {
        confs
            .iter()
            .enumerate()
            .map(|(i, &c)| RecallCandidate { type_id: format!("t{i:02}"), raw_score: c, confidence: c })
            .collect()
    }

    fn confs(part: &[RecallCandidate]) -> Vec<f64> {
        part.iter().map(|c| c.confidence).collect()
    }

    #[test]
    fn random_is_seed_stable() {
        let c = cands(&[0.9, 0.5, 0.3, 0.1]);
        let a = partition_random(&c, 2, 7).unwrap();
        assert_eq!(a, partition_random(&c, 2, 7).unwrap());
        assert_eq!(a.seed, Some(7));
        assert_eq!(partition_random(&cands(&[1.0, 0.8, 0.6, 0.4, 0.2]), 2, 7).unwrap().sizes(), [3, 2]);
        let one = partition_random(&c, 1, 3).unwrap();
        assert_eq!(one.parts.len(), 1);
        assert_eq!(one.parts[0].len(), 4);
    }

    #[test]
    fn level_examples() {
        let plan = partition_level(&cands(&[0.1, 0.9, 0.4, 0.8, 0.7]), 2).unwrap();
        assert_eq!(confs(&plan.parts[0]), [0.9, 0.8, 0.7]);
        assert_eq!(confs(&plan.parts[1]), [0.4, 0.1]);

        let flat = partition_level(&cands(&[0.5; 4]), 2).unwrap();
        let ids: Vec<_> = flat.parts.iter().flatten().map(|c| c.type_id.as_str()).collect();
        assert_eq!(ids, ["t00", "t01", "t02", "t03"]);

        let fifteen: Vec<f64> = (0..15).map(|i| i as f64 / 15.0).collect();
        assert_eq!(partition_level(&cands(&fifteen), 2).unwrap().sizes(), [8, 7]);
    }

    #[test]
    fn average_examples() {
        let plan = partition_average(&cands(&[0.9, 0.5, 0.5, 0.1]), 2).unwrap();
        assert_eq!(confs(&plan.parts[0]), [0.9, 0.1]);
        assert_eq!(confs(&plan.parts[1]), [0.5, 0.5]);
        let sums = plan.confidence_sums();
        assert!((sums[0] - sums[1]).abs() < 1e-12);

        let plan = partition_average(&cands(&[4.0, 3.0, 2.0, 1.0]), 2).unwrap();
        assert_eq!(confs(&plan.parts[0]), [4.0, 1.0]);
        assert_eq!(confs(&plan.parts[1]), [3.0, 2.0]);
        let level = partition_level(&cands(&[4.0, 3.0, 2.0, 1.0]), 2).unwrap().confidence_sums();
        assert_eq!(level[0] - level[1], 4.0);

        let eq = partition_average(&cands(&[0.3; 6]), 3).unwrap().confidence_sums();
        assert!(eq.iter().all(|s| (s - eq[0]).abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let c = cands(&[0.5, 0.4]);
        assert_eq!(partition_level(&c, 3), Err(PartitionError::TooManyParts { parts: 3, candidates: 2 }));
        assert_eq!(partition_average(&c, 0), Err(PartitionError::ZeroParts));
        assert_eq!(partition_random(&[], 1, 0), Err(PartitionError::Empty));
        assert_eq!(make_plan(Strategy::Random, &c, 1, None), Err(PartitionError::SeedRequired));
        assert!(matches!("patition".parse::<Strategy>(), Err(PartitionError::UnknownStrategy(_))));
    }

    #[test]
    fn dispatch_records_strategy() {
        let c = cands(&(0..15).map(|i| 1.0 - i as f64 / 20.0).collect::<Vec<_>>());
        assert_eq!(make_plan("level".parse().unwrap(), &c, 2, None).unwrap().strategy, Strategy::Level);
        let avg = make_plan(Strategy::Average, &c, 2, Some(9)).unwrap();
        assert_eq!((avg.strategy, avg.seed), (Strategy::Average, None));
        assert_eq!(make_plan(Strategy::Random, &c, 2, Some(9)).unwrap().seed, Some(9));
    }

    proptest! {
        #[test]
        fn plans_are_balanced_covers(confs in proptest::collection::vec(0.0f64..1.0, 1..40), n in 1usize..8, seed in any::<u64>()) {
            prop_assume!(n <= confs.len());
            let c = cands(&confs);
            for strategy in [Strategy::Random, Strategy::Average, Strategy::Level] {
                let plan = make_plan(strategy, &c, n, Some(seed)).unwrap();
                let sizes = plan.sizes();
                prop_assert_eq!(sizes.len(), n);
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                let mut ids: Vec<_> = plan.parts.iter().flatten().map(|c| c.type_id.clone()).collect();
                ids.sort();
                let mut expected: Vec<_> = c.iter().map(|c| c.type_id.clone()).collect();
                expected.sort();
                prop_assert_eq!(ids, expected);
            }
        }
    }
}
