//! Per-record worker pool and the quarantine sidecar shared by the
//! annotation and extraction runs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;

/// A record that failed and was left out of the main output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub id: String,
    pub error: String,
}

/// Applies `f` to every record on a pool of `width` threads. Results keep
/// input order regardless of width.
pub(crate) fn map_records<T, F>(records: &[SentenceRecord], width: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&SentenceRecord) -> T + Sync + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(width.max(1)).build() {
        Ok(pool) => pool.install(|| records.par_iter().map(&f).collect()),
        Err(e) => {
            tracing::warn!(error = %e, "worker pool unavailable; running sequentially");
            records.iter().map(f).collect()
        }
    }
}

pub fn write_quarantine<W: Write>(entries: &[QuarantineEntry], mut sink: W) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut sink, e).map_err(std::io::Error::other)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
