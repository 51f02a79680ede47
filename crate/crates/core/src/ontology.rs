//! Event-type schema: loading, validation, and the bijection between type ids
//! and the class-style identifiers used in extraction prompts.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("line {line}: malformed type record: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate type id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId { id: String, first_line: usize, second_line: usize },
    #[error("type name {0:?} contains no alphanumeric character")]
    NoAlphanumeric(String),
    #[error("identifier {identifier:?} is already bound to type {existing:?}")]
    IdentifierTaken { identifier: String, existing: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleDef {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventTypeDef {
    pub id: String,
    pub name: String,
    pub description: String,
    pub roles: Vec<RoleDef>,
    /// Parent link; carried through but not used by any algorithm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl EventTypeDef {
    pub fn role(&self, name: &str) -> Option<&RoleDef> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn role_names(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(|r| r.name.as_str())
    }

    /// Snake-case field names for each role, in role order.
    ///
    /// `trigger` is reserved for the trigger field of class-style prompts, so
    /// a role that normalizes to it gets a numeric suffix like any other
    /// collision.
    pub fn role_fields(&self) -> Vec<String> {
        let mut taken: HashSet<String> = HashSet::from(["trigger".to_string()]);
        self.roles
            .iter()
            .map(|role| {
                let base = snake_field(&role.name);
                let mut candidate = base.clone();
                let mut n = 2;
                while taken.contains(&candidate) {
                    candidate = format!("{base}_{n}");
                    n += 1;
                }
                taken.insert(candidate.clone());
                candidate
            })
            .collect()
    }
}

fn snake_field(name: &str) -> String {
    let mut out = String::new();
    let mut pending_sep = false;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    if out.is_empty() {
        out.push_str("role");
    } else if out.as_bytes()[0].is_ascii_digit() {
        out.insert_str(0, "role_");
    }
    out
}

/// Upper-camel-case base identifier for a type name.
///
/// Segments are split on any non-alphanumeric ASCII character (whitespace,
/// underscore and hyphen included); non-ASCII characters are dropped. A
/// leading digit gets an `Event` prefix so the result stays a valid
/// identifier.
pub fn camel_identifier(name: &str) -> Result<String, OntologyError> {
    let mut out = String::new();
    let mut at_boundary = true;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            if at_boundary {
                out.push(ch.to_ascii_uppercase());
            } else {
                out.push(ch);
            }
            at_boundary = false;
        } else if ch.is_ascii() {
            at_boundary = true;
        }
    }
    if out.is_empty() {
        return Err(OntologyError::NoAlphanumeric(name.to_string()));
    }
    if out.as_bytes()[0].is_ascii_digit() {
        out.insert_str(0, "Event");
    }
    Ok(out)
}

/// Bijection between type ids and prompt identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentifierMap {
    by_id: HashMap<String, String>,
    by_identifier: HashMap<String, String>,
}

impl IdentifierMap {
    /// Assigns an identifier to `id` derived from `name`, resolving collisions
    /// with `_2`, `_3`, ... in first-seen order. Re-sanitizing an id that is
    /// already mapped returns its existing identifier.
    pub fn sanitize_type_identifier(&mut self, id: &str, name: &str) -> Result<String, OntologyError> {
        if let Some(existing) = self.by_id.get(id) {
            return Ok(existing.clone());
        }
        let base = camel_identifier(name)?;
        let mut candidate = base.clone();
        let mut n = 2;
        while self.by_identifier.contains_key(&candidate) {
            candidate = format!("{base}_{n}");
            n += 1;
        }
        self.bind(id, &candidate)?;
        Ok(candidate)
    }

    fn bind(&mut self, id: &str, identifier: &str) -> Result<(), OntologyError> {
        if let Some(existing) = self.by_identifier.get(identifier) {
            return Err(OntologyError::IdentifierTaken {
                identifier: identifier.to_string(),
                existing: existing.clone(),
            });
        }
        self.by_id.insert(id.to_string(), identifier.to_string());
        self.by_identifier.insert(identifier.to_string(), id.to_string());
        Ok(())
    }

    pub fn identifier(&self, id: &str) -> Option<&str> {
        self.by_id.get(id).map(String::as_str)
    }

    pub fn type_id(&self, identifier: &str) -> Option<&str> {
        self.by_identifier.get(identifier).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    fn is_bijective(&self) -> bool {
        self.by_id.len() == self.by_identifier.len()
            && self.by_id.iter().all(|(id, ident)| self.by_identifier.get(ident) == Some(id))
    }
}

/// Immutable after load; share freely across workers.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    types: Vec<EventTypeDef>,
    index: HashMap<String, usize>,
    identifiers: IdentifierMap,
}

#[derive(Deserialize)]
struct TypeRecord {
    id: String,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    roles: Vec<RoleRecord>,
    #[serde(default)]
    parent: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RoleRecord {
    Full {
        name: String,
        #[serde(default)]
        description: String,
    },
    Bare(String),
}

impl From<RoleRecord> for RoleDef {
    fn from(r: RoleRecord) -> Self {
        match r {
            RoleRecord::Full { name, description } => RoleDef { name, description },
            RoleRecord::Bare(name) => RoleDef { name, description: String::new() },
        }
    }
}

impl Ontology {
    /// Builds an ontology from already-parsed definitions, preserving order.
    pub fn from_types(types: Vec<EventTypeDef>) -> Result<Self, OntologyError> {
        let mut ontology = Ontology::default();
        let mut lines = HashMap::new();
        for (i, t) in types.into_iter().enumerate() {
            ontology.push(t, i + 1, &mut lines)?;
        }
        Ok(ontology)
    }

    fn push(&mut self, t: EventTypeDef, line: usize, lines: &mut HashMap<String, usize>) -> Result<(), OntologyError> {
        if let Some(&first_line) = lines.get(&t.id) {
            return Err(OntologyError::DuplicateId { id: t.id, first_line, second_line: line });
        }
        self.identifiers.sanitize_type_identifier(&t.id, &t.name)?;
        lines.insert(t.id.clone(), line);
        self.index.insert(t.id.clone(), self.types.len());
        self.types.push(t);
        Ok(())
    }

    pub fn types(&self) -> &[EventTypeDef] {
        &self.types
    }

    pub fn get(&self, id: &str) -> Option<&EventTypeDef> {
        self.index.get(id).map(|&i| &self.types[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn identifiers(&self) -> &IdentifierMap {
        &self.identifiers
    }

    /// Prompt identifier for a type id. Every loaded type has one.
    pub fn identifier(&self, id: &str) -> Option<&str> {
        self.identifiers.identifier(id)
    }

    pub fn by_identifier(&self, identifier: &str) -> Option<&EventTypeDef> {
        self.identifiers.type_id(identifier).and_then(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Number of distinct role names across all types.
    pub fn distinct_role_count(&self) -> usize {
        self.types.iter().flat_map(|t| t.roles.iter().map(|r| r.name.as_str())).collect::<HashSet<_>>().len()
    }
}

/// Reads one JSON type record per line. Blank lines are skipped but still
/// counted for error line numbers.
pub fn load_ontology<R: BufRead>(source: R) -> Result<Ontology, OntologyError> {
    let mut ontology = Ontology::default();
    let mut lines = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TypeRecord = serde_json::from_str(&line)
            .map_err(|e| OntologyError::Malformed { line: line_no, message: e.to_string() })?;
        let def = EventTypeDef {
            id: record.id,
            name: record.name,
            description: record.description,
            roles: record.roles.into_iter().map(RoleDef::from).collect(),
            parent: record.parent,
        };
        ontology.push(def, line_no, &mut lines).map_err(|e| match e {
            OntologyError::NoAlphanumeric(_) | OntologyError::IdentifierTaken { .. } => {
                OntologyError::Malformed { line: line_no, message: e.to_string() }
            }
            other => other,
        })?;
    }
    Ok(ontology)
}

/// Lists every invariant violation; empty when the ontology is well formed.
pub fn validate_ontology(ontology: &Ontology) -> Vec<String> {
    let mut violations = Vec::new();
    for t in &ontology.types {
        if t.id.trim().is_empty() {
            violations.push(format!("empty id: {:?}", t.id));
        }
        if t.description.trim().is_empty() {
            violations.push(format!("empty description: {}", t.id));
        }
        let mut seen = HashSet::new();
        for role in &t.roles {
            if role.name.trim().is_empty() {
                violations.push(format!("empty role name: {}", t.id));
            } else if !seen.insert(role.name.as_str()) {
                violations.push(format!("duplicate role name {:?}: {}", role.name, t.id));
            }
        }
        if ontology.identifiers.identifier(&t.id).is_none() {
            violations.push(format!("missing identifier: {}", t.id));
        }
    }
    if !ontology.identifiers.is_bijective() || ontology.identifiers.len() != ontology.types.len() {
        violations.push("identifier map is not a bijection".to_string());
    }
    violations
}
