//! Hinge ranking loss over recall scores and a finite-difference check of
//! its subgradient.
//!
//! For pairs `(s, C⁺, E⁻)`:
//!
//! ```text
//! L = (1/N) Σₛ Σ_{e⁻ ∈ E⁻} max(0, τ − max_{e ∈ C⁺} score(s, e) + score(s, e⁻))
//! ```

use std::collections::{HashMap, HashSet};

use super::store::{EmbeddingKind, EmbeddingStore};
use super::{best_matches, latesim_score, RecallError, TokenEmbeddings};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub sentence_id: String,
    /// Gold candidate set; the best-scoring member is the positive.
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl TrainingPair {
    fn validate(&self) -> Result<(), RecallError> {
        if self.positives.is_empty() {
            return Err(RecallError::InvalidArgument(format!("pair for {:?} has no positive types", self.sentence_id)));
        }
        if let Some(shared) = self.negatives.iter().find(|n| self.positives.contains(n)) {
            return Err(RecallError::InvalidArgument(format!(
                "type {shared:?} is both positive and negative for {:?}",
                self.sentence_id
            )));
        }
        Ok(())
    }
}

struct PairTerms<'a> {
    sentence: &'a TokenEmbeddings,
    /// (type id, score) of the best positive.
    best: (&'a str, f64),
    runner_up_gap: Option<f64>,
    /// (type id, hinge value before clamping).
    hinges: Vec<(&'a str, f64)>,
}

fn pair_terms<'a>(pair: &'a TrainingPair, store: &'a EmbeddingStore, tau: f64) -> Result<PairTerms<'a>, RecallError> {
    pair.validate()?;
    let sentence = store.sentence(&pair.sentence_id)?;
    let mut pos_scores = Vec::with_capacity(pair.positives.len());
    for id in &pair.positives {
        pos_scores.push((id.as_str(), latesim_score(sentence, store.event_type(id)?)?));
    }
    let mut best = pos_scores[0];
    for &p in &pos_scores[1..] {
        if p.1 > best.1 {
            best = p;
        }
    }
    let runner_up_gap = pos_scores.iter().filter(|p| p.0 != best.0).map(|p| best.1 - p.1).reduce(f64::min);
    let mut hinges = Vec::with_capacity(pair.negatives.len());
    for id in &pair.negatives {
        let neg = latesim_score(sentence, store.event_type(id)?)?;
        hinges.push((id.as_str(), tau - best.1 + neg));
    }
    Ok(PairTerms { sentence, best, runner_up_gap, hinges })
}

/// Mean hinge loss over `pairs` with margin `tau`.
pub fn margin_loss(pairs: &[TrainingPair], store: &EmbeddingStore, tau: f64) -> Result<f64, RecallError> {
    if pairs.is_empty() {
        return Err(RecallError::InvalidArgument("margin loss needs at least one pair".into()));
    }
    let mut total = 0.0;
    for pair in pairs {
        for (_, h) in pair_terms(pair, store, tau)?.hinges {
            total += h.max(0.0);
        }
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_deviation: f64,
    pub parameters: usize,
    pub active_hinges: usize,
}

type Grad = HashMap<(EmbeddingKind, String), Vec<Vec<f64>>>;

fn grad_slot<'g>(grad: &'g mut Grad, kind: EmbeddingKind, emb: &TokenEmbeddings) -> &'g mut Vec<Vec<f64>> {
    grad.entry((kind, emb.owner().to_string())).or_insert_with(|| vec![vec![0.0; emb.dim()]; emb.rows().len()])
}

/// Adds `weight · ∂score(s, e)` into `grad`.
fn accumulate_score_grad(grad: &mut Grad, s: &TokenEmbeddings, e: &TokenEmbeddings, weight: f64) {
    let matches = best_matches(s, e);
    for (i, &(j, _)) in matches.iter().enumerate() {
        let s_row = &s.rows()[i];
        let e_row = &e.rows()[j];
        let gs = grad_slot(grad, EmbeddingKind::Sentence, s);
        for k in 0..s.dim() {
            gs[i][k] += weight * e_row[k];
        }
        let ge = grad_slot(grad, EmbeddingKind::Type, e);
        for k in 0..s.dim() {
            ge[j][k] += weight * s_row[k];
        }
    }
}

/// Smallest gap between the best and second-best event row, over sentence
/// rows. `None` for single-row events.
fn row_max_gap(s: &TokenEmbeddings, e: &TokenEmbeddings) -> Option<f64> {
    if e.rows().len() < 2 {
        return None;
    }
    s.rows()
        .iter()
        .map(|srow| {
            let mut dots: Vec<f64> = e.rows().iter().map(|erow| super::dot(srow, erow)).collect();
            dots.sort_by(|a, b| b.total_cmp(a));
            dots[0] - dots[1]
        })
        .reduce(f64::min)
}

/// Compares the analytic subgradient of [`margin_loss`] against central
/// differences `(L(x+ε) − L(x−ε)) / 2ε` over every embedding entry the
/// pairs touch, returning the worst relative deviation.
///
/// Fails with [`RecallError::Degenerate`] when an evaluation point sits
/// within reach of ε of a hinge kink or a max tie.
pub fn margin_loss_grad_check(
    pairs: &[TrainingPair],
    store: &EmbeddingStore,
    tau: f64,
    eps: f64,
) -> Result<GradCheck, RecallError> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(RecallError::InvalidArgument("eps must be positive".into()));
    }
    if pairs.is_empty() {
        return Err(RecallError::InvalidArgument("margin loss needs at least one pair".into()));
    }
    let scale = pairs
        .iter()
        .flat_map(|p| {
            std::iter::once(store.sentence(&p.sentence_id).ok())
                .chain(p.positives.iter().chain(&p.negatives).map(|t| store.event_type(t).ok()))
        })
        .flatten()
        .flat_map(|e| e.rows().iter().flatten().copied())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let guard = 100.0 * eps * scale;

    let n = pairs.len() as f64;
    let mut grad: Grad = HashMap::new();
    let mut active_hinges = 0;
    let mut params: HashSet<(EmbeddingKind, String)> = HashSet::new();
    for pair in pairs {
        params.insert((EmbeddingKind::Sentence, pair.sentence_id.clone()));
        for t in pair.positives.iter().chain(&pair.negatives) {
            params.insert((EmbeddingKind::Type, t.clone()));
        }
        let terms = pair_terms(pair, store, tau)?;
        let best_emb = store.event_type(terms.best.0)?;
        let mut pair_active = false;
        for &(neg_id, h) in &terms.hinges {
            if h.abs() < guard {
                return Err(RecallError::Degenerate(format!(
                    "hinge for {:?} vs {neg_id:?} is within {guard:e} of its kink",
                    pair.sentence_id
                )));
            }
            if h <= 0.0 {
                continue;
            }
            pair_active = true;
            active_hinges += 1;
            let neg_emb = store.event_type(neg_id)?;
            if row_max_gap(terms.sentence, neg_emb).is_some_and(|g| g < guard) {
                return Err(RecallError::Degenerate(format!(
                    "max tie inside score({:?}, {neg_id:?})",
                    pair.sentence_id
                )));
            }
            accumulate_score_grad(&mut grad, terms.sentence, neg_emb, 1.0 / n);
            accumulate_score_grad(&mut grad, terms.sentence, best_emb, -1.0 / n);
        }
        if pair_active {
            if terms.runner_up_gap.is_some_and(|g| g < guard) {
                return Err(RecallError::Degenerate(format!("tie among positives for {:?}", pair.sentence_id)));
            }
            if row_max_gap(terms.sentence, best_emb).is_some_and(|g| g < guard) {
                return Err(RecallError::Degenerate(format!(
                    "max tie inside score({:?}, {:?})",
                    pair.sentence_id, terms.best.0
                )));
            }
        }
    }

    let mut params: Vec<_> = params.into_iter().collect();
    params.sort();
    let mut work = store.clone();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (kind, id) in &params {
        let shape: Vec<usize> =
            work.get_mut(*kind, id).map(|e| e.rows().iter().map(Vec::len).collect()).unwrap_or_default();
        for (r, &width) in shape.iter().enumerate() {
            for k in 0..width {
                let original = work.get_mut(*kind, id).expect("param exists").rows_mut()[r][k];
                let set =
                    |w: &mut EmbeddingStore, v: f64| w.get_mut(*kind, id).expect("param exists").rows_mut()[r][k] = v;
                set(&mut work, original + eps);
                let plus = margin_loss(pairs, &work, tau)?;
                set(&mut work, original - eps);
                let minus = margin_loss(pairs, &work, tau)?;
                set(&mut work, original);
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = grad.get(&(*kind, id.clone())).map_or(0.0, |g| g[r][k]);
                let denom = analytic.abs().max(numeric.abs());
                let deviation = if denom == 0.0 { 0.0 } else { (analytic - numeric).abs() / denom.max(1e-8) };
                worst = worst.max(deviation);
                count += 1;
            }
        }
    }
    Ok(GradCheck { max_relative_deviation: worst, parameters: count, active_hinges })
}
