/// Substitutes `{name}` placeholders in a single left-to-right pass.
///
/// Only names listed in `vars` are replaced, so literal braces in worked
/// examples (JSON, Python) pass through untouched, and substituted values are
/// never rescanned.
pub(crate) fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let value = after
            .find('}')
            .map(|close| (&after[..close], close))
            .and_then(|(name, close)| vars.iter().find(|(k, _)| *k == name).map(|(_, v)| (*v, close)));
        match value {
            Some((v, close)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Lowercase hex SHA-256 of a template, for pinning shipped assets.
pub fn template_digest(template: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(template.as_bytes()))
}
