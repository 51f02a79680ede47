//! Parsers for annotator responses. Each returns `Err(reason)` for output
//! that should be re-requested.

use serde_json::Value;

fn strip_marker(line: &str) -> &str {
    line.trim().trim_start_matches(['*', ' ', ':']).trim()
}

/// Text after `marker` on the first line that contains it, ignoring case and
/// surrounding bold markers.
fn field<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let marker = marker.to_lowercase();
    text.lines().find_map(|line| {
        let lower = line.to_lowercase();
        let at = lower.find(&marker)?;
        Some(strip_marker(&line[at + marker.len()..]))
    })
}

fn trigger_of(item: &str) -> &str {
    let item = item.trim();
    match (item.rfind('('), item.ends_with(')')) {
        (Some(open), true) => item[..open].trim(),
        _ => item,
    }
}

/// Reads the "Reasonable Annotations" line of a filtering response and
/// reports whether an annotation for `surface` was kept.
pub fn parse_filter_response(text: &str, surface: &str) -> Result<bool, String> {
    let value = field(text, "reasonable annotations").ok_or("no \"Reasonable Annotations\" line")?;
    let ticked: Vec<&str> = value.split('`').skip(1).step_by(2).collect();
    let items: Vec<&str> = if ticked.is_empty() {
        if value.to_lowercase().starts_with("none") {
            return Ok(false);
        }
        value.split(',').filter(|s| !s.trim().is_empty()).collect()
    } else {
        ticked
    };
    if items.is_empty() {
        return Err("empty \"Reasonable Annotations\" line".into());
    }
    Ok(items.iter().any(|i| trigger_of(i) == surface))
}

/// Reads the option letter of a refinement response. Returns its zero-based
/// index, which must be below `option_count`.
pub fn parse_refinement_response(text: &str, option_count: usize) -> Result<usize, String> {
    let value = field(text, "event type").ok_or("no \"Event Type\" line")?;
    let letter: String = value.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let mut chars = letter.chars();
    let (Some(c), None) = (chars.next(), chars.next()) else {
        return Err(format!("expected a single option letter, got {value:?}"));
    };
    let idx = (c.to_ascii_uppercase() as u8 - b'A') as usize;
    if idx >= option_count {
        return Err(format!("option {c} is outside A..{}", (b'A' + option_count as u8 - 1) as char));
    }
    Ok(idx)
}

/// First balanced `{...}` in `text`, skipping braces inside strings.
fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn drop_trailing_commas(json: &str) -> String {
    let chars: Vec<char> = json.chars().collect();
    let mut out = String::with_capacity(json.len());
    let (mut in_str, mut escaped) = (false, false);
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn scalar(v: &Value) -> Result<Option<String>, String> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Bool(b) => Ok(Some(b.to_string())),
        Value::Null => Ok(None),
        other => Err(format!("unexpected nested value {other}")),
    }
}

/// Parses the role-keyed JSON object of an argument or alignment response.
///
/// Tolerates prose and code fences around the object and trailing commas. A
/// bare string becomes a one-element list and `null` an empty one.
pub fn parse_role_json(text: &str) -> Result<Vec<(String, Vec<String>)>, String> {
    let obj = json_object(text).ok_or("no JSON object in response")?;
    let value: Value = serde_json::from_str(&drop_trailing_commas(obj)).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(map) = value else {
        return Err("expected a JSON object".into());
    };
    map.into_iter()
        .map(|(role, v)| {
            let fillers = match v {
                Value::Array(items) => {
                    items.iter().map(scalar).filter_map(Result::transpose).collect::<Result<Vec<_>, _>>()?
                }
                other => scalar(&other)?.into_iter().collect(),
            };
            Ok((role, fillers))
        })
        .collect()
}
