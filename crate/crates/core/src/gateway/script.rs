use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, GatewayError, PromptRequest};

/// SHA-256 over the length-prefixed system text, user text, tag and decimal
/// attempt number, hex encoded. Decoding parameters are not part of the key.
pub fn request_digest(req: &PromptRequest, attempt: u32) -> String {
    let mut hasher = Sha256::new();
    let attempt = attempt.to_string();
    for field in [req.system_text.as_str(), req.user_text.as_str(), req.tag.as_str(), attempt.as_str()] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Serialize, Deserialize)]
struct ScriptLine {
    digest: String,
    response: String,
}

/// Digest-keyed canned responses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptStore {
    entries: HashMap<String, String>,
}

impl ScriptStore {
    pub fn insert(&mut self, digest: String, response: String) -> Result<(), GatewayError> {
        if self.entries.contains_key(&digest) {
            return Err(GatewayError::DuplicateDigest { digest, first_line: 0, second_line: 0 });
        }
        self.entries.insert(digest, response);
        Ok(())
    }

    pub fn get(&self, digest: &str) -> Option<&str> {
        self.entries.get(digest).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes entries sorted by digest, one JSON object per line.
    pub fn write<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        for (digest, response) in sorted {
            let line = ScriptLine { digest: digest.clone(), response: response.clone() };
            serde_json::to_writer(&mut sink, &line).map_err(std::io::Error::other)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()
    }
}

/// Reads `{digest, response}` lines into a store.
pub fn load_script<R: BufRead>(source: R) -> Result<ScriptStore, GatewayError> {
    let mut store = ScriptStore::default();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ScriptLine = serde_json::from_str(&line)
            .map_err(|e| GatewayError::ScriptFormat { line: line_no, message: e.to_string() })?;
        if entry.digest.is_empty() || !entry.digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(GatewayError::ScriptFormat {
                line: line_no,
                message: format!("digest {:?} is not hex", entry.digest),
            });
        }
        if let Some(&first_line) = lines.get(&entry.digest) {
            return Err(GatewayError::DuplicateDigest { digest: entry.digest, first_line, second_line: line_no });
        }
        lines.insert(entry.digest.clone(), line_no);
        store.entries.insert(entry.digest, entry.response);
    }
    Ok(store)
}

/// Replays responses from a [`ScriptStore`]. Keyed on content, so call order
/// and concurrency do not matter.
#[derive(Debug)]
pub struct ScriptedBackend {
    store: ScriptStore,
}

impl ScriptedBackend {
    pub fn new(store: ScriptStore) -> Self {
        ScriptedBackend { store }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, backend_name: &str, req: &PromptRequest, attempt: u32) -> Result<String, GatewayError> {
        let digest = request_digest(req, attempt);
        self.store.get(&digest).map(str::to_string).ok_or_else(|| GatewayError::MissingScript {
            backend: backend_name.to_string(),
            digest,
            tag: req.tag.clone(),
            attempt,
        })
    }
}

/// Backend driven by a closure, for simulations and examples.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&PromptRequest, u32) -> String + Send + Sync,
{
    fn complete(&self, _: &str, req: &PromptRequest, attempt: u32) -> Result<String, GatewayError> {
        Ok((self.0)(req, attempt))
    }
}

/// Wraps a backend and records every response under its digest, so a live or
/// simulated run can be frozen into a script file.
pub struct Recorder<B> {
    inner: B,
    recorded: Mutex<ScriptStore>,
}

impl<B: Backend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Recorder { inner, recorded: Mutex::new(ScriptStore::default()) }
    }

    pub fn store(&self) -> ScriptStore {
        self.recorded.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl<B: Backend> Backend for Recorder<B> {
    fn complete(&self, backend_name: &str, req: &PromptRequest, attempt: u32) -> Result<String, GatewayError> {
        let text = self.inner.complete(backend_name, req, attempt)?;
        let mut store = self.recorded.lock().unwrap_or_else(|e| e.into_inner());
        store.entries.entry(request_digest(req, attempt)).or_insert_with(|| text.clone());
        Ok(text)
    }
}
