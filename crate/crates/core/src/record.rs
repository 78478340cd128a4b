//! Line-delimited text records: `kind key=value key=value ...`.
//!
//! Values containing whitespace, quotes or backslashes, and empty values,
//! are written in double quotes with backslash escapes. Floats go through
//! [`format_f64`], which keeps 17 significant digits so that every value
//! survives a parse and re-serialization unchanged.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    kind: String,
    fields: Vec<(String, String)>,
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn valid_word(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn needs_quotes(v: &str) -> bool {
    v.is_empty()
        || v.chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '\\')
}

impl Record {
    pub fn new(kind: &str) -> Self {
        assert!(valid_word(kind), "invalid record kind {kind:?}");
        Record {
            kind: kind.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    pub fn push(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        assert!(valid_word(key), "invalid record key {key:?}");
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, format_f64(value))
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.push(key, value);
        self
    }

    pub fn with_f64(mut self, key: &str, value: f64) -> Self {
        self.push_f64(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Values of a repeated key, in order.
    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Record(format!("{} record lacks field {key:?}", self.kind)))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Record(format!("{} record: cannot parse {key}={raw:?}", self.kind)))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    /// Fails unless the record has kind `kind`.
    pub fn expect_kind(&self, kind: &str) -> Result<&Self> {
        if self.kind == kind {
            Ok(self)
        } else {
            Err(Error::Record(format!(
                "expected a {kind} record, found {}",
                self.kind
            )))
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.kind)?;
        for (k, v) in &self.fields {
            if needs_quotes(v) {
                write!(f, " {k}=\"")?;
                for c in v.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
            } else {
                write!(f, " {k}={v}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Record(format!("{msg} in {line:?}"));
        let mut chars = line.trim_end_matches(['\n', '\r']).chars().peekable();
        let mut kind = String::new();
        while let Some(&c) = chars.peek() {
            if c == ' ' {
                break;
            }
            kind.push(c);
            chars.next();
        }
        if !valid_word(&kind) {
            return Err(bad("invalid record kind"));
        }
        let mut fields = Vec::new();
        while chars.next().is_some() {
            let mut key = String::new();
            loop {
                match chars.next() {
                    Some('=') => break,
                    Some(c) => key.push(c),
                    None => return Err(bad("field without '='")),
                }
            }
            if !valid_word(&key) {
                return Err(bad("invalid field name"));
            }
            let mut value = String::new();
            if chars.peek() == Some(&'"') {
                chars.next();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('"') => value.push('"'),
                            Some('\\') => value.push('\\'),
                            Some('n') => value.push('\n'),
                            _ => return Err(bad("bad escape")),
                        },
                        Some(c) => value.push(c),
                        None => return Err(bad("unterminated quote")),
                    }
                }
                if !matches!(chars.peek(), None | Some(' ')) {
                    return Err(bad("garbage after quoted value"));
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c == ' ' {
                        break;
                    }
                    value.push(c);
                    chars.next();
                }
                if needs_quotes(&value) {
                    return Err(bad("unquoted value needs quotes"));
                }
            }
            fields.push((key, value));
        }
        Ok(Record { kind, fields })
    }
}

/// Parses every non-blank line of `text`.
pub fn parse_records(text: &str) -> Result<Vec<Record>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}
