//! Schemas, data values, tuples and their text encoding.

mod predicate;
mod stream;
mod valuation;

pub use predicate::{EqualityPredicate, Key, KeyGuard, KeySide, UnaryPredicate};
pub use stream::{parse_stream, LineSource};
pub use valuation::Valuation;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A data value: a 64-bit integer or a string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Str(Arc<str>),
}

impl Value {
    /// Integers parse as `Int`, anything else becomes `Str`.
    pub fn from_token(token: &str) -> Value {
        match token.parse::<i64>() {
            Ok(n) => Value::Int(n),
            Err(_) => Value::Str(Arc::from(token)),
        }
    }
}

/// Strings that would not read back as themselves from a bare token.
fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.trim() != s
        || s.parse::<i64>().is_ok()
        || s.contains([',', '(', ')', '"', '\\', '\n', '\r'])
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) if needs_quotes(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if matches!(c, '"' | '\\') {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => serializer.serialize_i64(*n),
            Value::Str(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl Visitor<'_> for ValueVisitor {
            type Value = Value;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
                Ok(Value::Int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
                i64::try_from(v)
                    .map(Value::Int)
                    .map_err(|_| E::custom("integer out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
                Ok(Value::from(v))
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

/// Relation names with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    arities: BTreeMap<String, usize>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Result<Self> {
        let mut schema = Schema::new();
        for (name, arity) in pairs {
            schema.add(name, arity)?;
        }
        Ok(schema)
    }

    pub fn add(&mut self, name: &str, arity: usize) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::Schema(format!("invalid relation name {name:?}")));
        }
        if arity == 0 {
            return Err(Error::Schema(format!("relation {name} must have arity at least 1")));
        }
        if self.arities.insert(name.to_string(), arity).is_some() {
            return Err(Error::Schema(format!("relation {name} declared twice")));
        }
        Ok(())
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    /// Parses one `Rel/arity` declaration per line; `#` comments and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let column = raw.len() - raw.trim_start().len() + 1;
            let (name, arity) = line
                .split_once('/')
                .ok_or_else(|| Error::parse(line_no, column, "expected `Rel/arity`"))?;
            let arity: usize = arity.trim().parse().map_err(|_| {
                Error::parse(line_no, column + name.len() + 1, "arity is not a number")
            })?;
            schema.add(name.trim(), arity).map_err(|e| match e {
                Error::Schema(m) => Error::parse(line_no, column, m),
                other => other,
            })?;
        }
        Ok(schema)
    }

    pub fn check(&self, tuple: &Tuple) -> Result<()> {
        match self.arity(&tuple.relation) {
            None => Err(Error::Schema(format!("unknown relation {}", tuple.relation))),
            Some(a) if a != tuple.values.len() => Err(Error::Schema(format!(
                "relation {} has arity {a}, got {} values",
                tuple.relation,
                tuple.values.len()
            ))),
            Some(_) => Ok(()),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, arity) in &self.arities {
            writeln!(f, "{name}/{arity}")?;
        }
        Ok(())
    }
}

/// A relation name applied to a sequence of values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    pub relation: Arc<str>,
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(relation: &str, values: impl IntoIterator<Item = Value>) -> Self {
        Tuple {
            relation: Arc::from(relation),
            values: values.into_iter().collect(),
        }
    }

    /// Convenience constructor for all-integer tuples.
    pub fn ints(relation: &str, values: &[i64]) -> Self {
        Tuple::new(relation, values.iter().map(|&v| Value::Int(v)))
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

/// Parses `Rel(v1,...,vk)`. Values are integers, bare tokens, or
/// double-quoted strings with `\\"` and `\\\\` escapes. `line` is only used
/// for error positions.
pub fn parse_tuple(text: &str, line: usize) -> Result<Tuple> {
    let offset = text.len() - text.trim_start().len();
    let body = text.trim();
    let col = |i: usize| offset + i + 1;
    let open = body
        .find('(')
        .ok_or_else(|| Error::parse(line, col(body.len()), "expected `(`"))?;
    let name = body[..open].trim_end();
    if !is_identifier(name) {
        return Err(Error::parse(line, col(0), format!("invalid relation name {name:?}")));
    }
    if !body.ends_with(')') {
        return Err(Error::parse(line, col(body.len()), "expected `)` at end of tuple"));
    }
    let end = body.len() - 1;
    let mut values = Vec::new();
    let mut chars = body[..end].char_indices().skip_while(|&(i, _)| i <= open).peekable();
    let skip_ws = |chars: &mut std::iter::Peekable<_>| {
        while chars.next_if(|&(_, c): &(usize, char)| c.is_whitespace()).is_some() {}
    };
    loop {
        skip_ws(&mut chars);
        let start = chars.peek().map_or(end, |&(i, _)| i);
        if chars.next_if(|&(_, c)| c == '"').is_some() {
            let mut s = String::new();
            loop {
                match chars.next() {
                    None => return Err(Error::parse(line, col(start), "unterminated string")),
                    Some((_, '"')) => break,
                    Some((i, '\\')) => match chars.next() {
                        Some((_, c @ ('"' | '\\'))) => s.push(c),
                        _ => return Err(Error::parse(line, col(i), "invalid escape")),
                    },
                    Some((_, c)) => s.push(c),
                }
            }
            values.push(Value::Str(Arc::from(s)));
        } else {
            let mut token_end = start;
            while let Some(&(i, c)) = chars.peek() {
                if c == ',' {
                    break;
                }
                if matches!(c, '(' | ')' | '"') {
                    return Err(Error::parse(line, col(i), format!("unexpected `{c}`")));
                }
                chars.next();
                token_end = i + c.len_utf8();
            }
            let token = body[start..token_end].trim_end();
            if token.is_empty() {
                return Err(Error::parse(line, col(start), "empty value"));
            }
            values.push(Value::from_token(token));
        }
        skip_ws(&mut chars);
        match chars.next() {
            None => return Ok(Tuple::new(name, values)),
            Some((_, ',')) => {}
            Some((i, c)) => return Err(Error::parse(line, col(i), format!("expected `,`, found `{c}`"))),
        }
    }
}

/// Parses a tuple and checks it against `schema`.
pub fn parse_tuple_checked(text: &str, line: usize, schema: &Schema) -> Result<Tuple> {
    let tuple = parse_tuple(text, line)?;
    schema.check(&tuple)?;
    Ok(tuple)
}

pub fn render_tuple(tuple: &Tuple) -> String {
    tuple.to_string()
}
