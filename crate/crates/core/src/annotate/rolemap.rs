use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::corpus::{ground_surface, ArgumentMention, Span};
use crate::ontology::EventTypeDef;

/// Role name to filler strings, held in the event type's role order.
///
/// Every role of the type is present (possibly with an empty list); filler
/// strings are trimmed and non-empty. A filler may repeat within a role when
/// the sentence mentions it more than once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoleMap {
    entries: Vec<(String, Vec<String>)>,
}

fn loose_key(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl RoleMap {
    /// Every role of `def`, each with no fillers.
    pub fn empty_for(def: &EventTypeDef) -> Self {
        RoleMap { entries: def.roles.iter().map(|r| (r.name.clone(), Vec::new())).collect() }
    }

    /// Maps raw `(key, fillers)` pairs onto the roles of `def`.
    ///
    /// Keys match role names exactly first, then ignoring case and
    /// punctuation. Keys that match no role are returned separately.
    pub fn from_raw(def: &EventTypeDef, raw: Vec<(String, Vec<String>)>) -> (Self, Vec<String>) {
        let mut map = Self::empty_for(def);
        let mut unknown = Vec::new();
        for (key, fillers) in raw {
            let idx = map.entries.iter().position(|(r, _)| *r == key).or_else(|| {
                let k = loose_key(&key);
                map.entries.iter().position(|(r, _)| loose_key(r) == k)
            });
            match idx {
                Some(i) => {
                    for f in fillers {
                        map.push_filler(i, f);
                    }
                }
                None => unknown.push(key),
            }
        }
        (map, unknown)
    }

    fn push_filler(&mut self, idx: usize, filler: String) {
        let f = filler.trim();
        let list = &mut self.entries[idx].1;
        if !f.is_empty() {
            list.push(f.to_string());
        }
    }

    pub fn get(&self, role: &str) -> Option<&[String]> {
        self.entries.iter().find(|(r, _)| r == role).map(|(_, f)| f.as_slice())
    }

    /// Replaces the fillers of an existing role. Returns false if the role is
    /// not in the map.
    pub fn set(&mut self, role: &str, fillers: Vec<String>) -> bool {
        let Some(i) = self.entries.iter().position(|(r, _)| r == role) else {
            return false;
        };
        self.entries[i].1.clear();
        for f in fillers {
            self.push_filler(i, f);
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(r, f)| (r.as_str(), f.as_slice()))
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(r, _)| r.as_str())
    }

    pub fn filler_count(&self) -> usize {
        self.entries.iter().map(|(_, f)| f.len()).sum()
    }

    /// Keeps only the fillers accepted by `keep`.
    pub fn retain_fillers<F: FnMut(&str, &str) -> bool>(&mut self, mut keep: F) {
        for (role, fillers) in &mut self.entries {
            fillers.retain(|f| keep(role, f));
        }
    }

    /// Grounds each filler to its leftmost occurrence not already used by the
    /// same role. Returns the non-empty roles, sorted by role name, and the
    /// number of fillers that could not be placed.
    pub fn ground(&self, text: &str) -> (Vec<ArgumentMention>, usize) {
        let mut dropped = 0;
        let mut out = Vec::new();
        for (role, fillers) in &self.entries {
            let mut spans: Vec<Span> = Vec::new();
            for f in fillers {
                match ground_surface(text, f, &spans) {
                    Some(s) => spans.push(s),
                    None => {
                        dropped += 1;
                        tracing::info!(role = %role, filler = %f, "no unused occurrence left for filler");
                    }
                }
            }
            if !spans.is_empty() {
                spans.sort();
                out.push(ArgumentMention { role: role.clone(), fillers: spans });
            }
        }
        out.sort_by(|a, b| a.role.cmp(&b.role));
        (out, dropped)
    }

    /// Pretty JSON object in role order, one role per line, as embedded in
    /// alignment prompts.
    pub fn to_prompt_json(&self) -> String {
        if self.entries.is_empty() {
            return "{}".to_string();
        }
        let quote = |s: &str| serde_json::to_string(s).unwrap_or_default();
        let lines: Vec<String> = self
            .entries
            .iter()
            .map(|(r, f)| {
                let items: Vec<String> = f.iter().map(|x| quote(x)).collect();
                format!("  {}: [{}]", quote(r), items.join(", "))
            })
            .collect();
        format!("{{\n{}\n}}", lines.join(",\n"))
    }
}

impl Serialize for RoleMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(self.entries.len()))?;
        for (r, f) in &self.entries {
            m.serialize_entry(r, f)?;
        }
        m.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::RoleDef;

    pub(crate) fn attack() -> EventTypeDef {
        EventTypeDef {
            id: "attack".into(),
            name: "Attack".into(),
            description: "action to injure another organism".into(),
            roles: ["Agent", "Location", "Time", "Target"]
                .iter()
                .map(|r| RoleDef { name: r.to_string(), description: String::new() })
                .collect(),
            parent: None,
        }
    }

    fn raw(pairs: &[(&str, &[&str])]) -> Vec<(String, Vec<String>)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect())).collect()
    }

    #[test]
    fn unknown_roles_dropped_missing_roles_empty() {
        let (map, unknown) = RoleMap::from_raw(&attack(), raw(&[("agent", &["John"]), ("Purpose", &["revenge"])]));
        assert_eq!(unknown, ["Purpose"]);
        assert_eq!(map.get("Agent").unwrap(), ["John"]);
        assert_eq!(map.get("Target").unwrap(), [] as [String; 0]);
        assert_eq!(map.roles().collect::<Vec<_>>(), ["Agent", "Location", "Time", "Target"]);
    }

    #[test]
    fn fillers_trimmed_empty_dropped() {
        let (map, _) = RoleMap::from_raw(&attack(), raw(&[("Agent", &[" John ", "John", "", "Sarah"])]));
        assert_eq!(map.get("Agent").unwrap(), ["John", "John", "Sarah"]);
    }

    #[test]
    fn grounding_uses_leftmost_unused() {
        let text = "John met John and Sarah.";
        let (map, _) =
            RoleMap::from_raw(&attack(), raw(&[("Agent", &["John", "John", "Bob"]), ("Target", &["Sarah"])]));
        let (args, dropped) = map.ground(text);
        assert_eq!(dropped, 1);
        let spans: Vec<(usize, usize)> = args[0].fillers.iter().map(Span::key).collect();
        assert_eq!(spans, [(0, 4), (9, 13)]);
        assert_eq!(args[1].role, "Target");
    }

    #[test]
    fn prompt_json_is_role_ordered() {
        let (map, _) = RoleMap::from_raw(&attack(), raw(&[("Time", &["night"]), ("Agent", &["John", "Sarah"])]));
        assert_eq!(
            map.to_prompt_json(),
            "{\n  \"Agent\": [\"John\", \"Sarah\"],\n  \"Location\": [],\n  \"Time\": [\"night\"],\n  \"Target\": []\n}"
        );
        assert_eq!(
            serde_json::to_string(&map).unwrap(),
            r#"{"Agent":["John","Sarah"],"Location":[],"Time":["night"],"Target":[]}"#
        );
    }
}
