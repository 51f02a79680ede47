//! Strict reader for constructor-style model output:
//!
//! ```text
//! output := [ name "=" ] ( "[" [ term { "," term } [","] ] "]" | term )
//! term   := name "(" [ arg { "," arg } [","] ] ")"
//! arg    := name "=" ( string | "[" [ string { "," string } [","] ] "]" | "None" )
//! ```
//!
//! Strings take single or double quotes with backslash escapes. One
//! surrounding code fence is allowed; anything else after the output is an
//! error.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Str(String),
    List(Vec<String>),
    None,
}

impl Value {
    pub fn into_list(self) -> Vec<String> {
        match self {
            Value::Str(s) => vec![s],
            Value::List(l) => l,
            Value::None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub ident: String,
    pub args: Vec<(String, Value)>,
}

impl Term {
    pub fn arg(&self, name: &str) -> Option<&Value> {
        self.args.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(open) = t.find("```") else {
        return t;
    };
    let after = &t[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0 }
    }

    fn ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {c:?}")))
        }
    }

    fn error(&self, what: &str) -> String {
        let found: String = self.chars[self.pos.min(self.chars.len())..].iter().take(12).collect();
        if found.is_empty() {
            format!("{what} at end of output")
        } else {
            format!("{what} at offset {}, found {found:?}", self.pos)
        }
    }

    fn name(&mut self) -> Result<String, String> {
        self.ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        if start == self.pos || self.chars[start].is_ascii_digit() {
            self.pos = start;
            return Err(self.error("expected an identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn string(&mut self) -> Result<String, String> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.error("expected a string")),
        };
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(&c) = self.chars.get(self.pos) else {
                return Err(self.error("unterminated string"));
            };
            self.pos += 1;
            match c {
                '\\' => {
                    let Some(&e) = self.chars.get(self.pos) else {
                        return Err(self.error("unterminated escape"));
                    };
                    self.pos += 1;
                    out.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                }
                c if c == quote => return Ok(out),
                '\n' => return Err(self.error("newline inside string")),
                c => out.push(c),
            }
        }
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                while !self.eat(']') {
                    items.push(self.string()?);
                    if !self.eat(',') {
                        self.expect(']')?;
                        break;
                    }
                }
                Ok(Value::List(items))
            }
            Some('N') => {
                let at = self.pos;
                match self.name()?.as_str() {
                    "None" => Ok(Value::None),
                    _ => {
                        self.pos = at;
                        Err(self.error("expected a string, list or None"))
                    }
                }
            }
            _ => self.string().map(Value::Str),
        }
    }

    fn term(&mut self) -> Result<Term, String> {
        let ident = self.name()?;
        self.expect('(')?;
        let mut args = Vec::new();
        while !self.eat(')') {
            let key = self.name()?;
            self.expect('=')?;
            args.push((key, self.value()?));
            if !self.eat(',') {
                self.expect(')')?;
                break;
            }
        }
        Ok(Term { ident, args })
    }

    /// Skips a leading `name =` if present.
    fn assignment(&mut self) {
        let at = self.pos;
        if self.name().is_ok() && self.eat('=') && self.peek() != Some('=') {
            return;
        }
        self.pos = at;
    }
}

/// Parses a list of terms, or a single bare term as a one-element list.
pub fn parse_terms(text: &str) -> Result<Vec<Term>, String> {
    let body = unfence(text);
    let mut cur = Cursor::new(body);
    cur.assignment();
    let terms = if cur.eat('[') {
        let mut terms = Vec::new();
        while !cur.eat(']') {
            terms.push(cur.term()?);
            if !cur.eat(',') {
                cur.expect(']')?;
                break;
            }
        }
        terms
    } else {
        vec![cur.term()?]
    };
    if cur.peek().is_some() {
        return Err(cur.error("unexpected trailing text"));
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> Value {
        Value::Str(v.into())
    }

    #[test]
    fn list_forms() {
        let t = parse_terms("results = [Parley(trigger=\"negotiating\")]").unwrap();
        assert_eq!(t, [Term { ident: "Parley".into(), args: vec![("trigger".into(), s("negotiating"))] }]);
        assert!(parse_terms("results = []").unwrap().is_empty());
        assert!(parse_terms("[]").unwrap().is_empty());
        let t =
            parse_terms("```python\nresults = [\n  A(trigger='x'),\n  B(trigger=\"y \\\"z\\\"\"),\n]\n```").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].arg("trigger"), Some(&s("y \"z\"")));
    }

    #[test]
    fn single_term_with_roles() {
        let t = parse_terms(
            "result = Parley(trigger=\"negotiating\", negotiator=[\"they\"], other_party=['Milosevic',], location=None)",
        )
        .unwrap();
        assert_eq!(t[0].arg("negotiator"), Some(&Value::List(vec!["they".into()])));
        assert_eq!(t[0].arg("other_party"), Some(&Value::List(vec!["Milosevic".into()])));
        assert_eq!(t[0].arg("location"), Some(&Value::None));
    }

    #[test]
    fn rejects_loose_text() {
        for bad in [
            "The events are Parley(trigger=\"x\")",
            "results = [Parley(trigger=\"x\")] and more",
            "results = [Parley(trigger=x)]",
            "results = [Parley(trigger=\"x\")",
            "results = [Parley trigger=\"x\"]",
            "results = [Parley(trigger=\"x)]",
            "",
            "results == []",
        ] {
            assert!(parse_terms(bad).is_err(), "{bad:?}");
        }
    }
}
