use std::collections::BTreeMap;

use super::{Atom, Cq, Term};
use crate::error::{Error, Result};
use crate::model::{Schema, Value};

/// Parses a query. With a schema, relation names and arities are checked;
/// without one, atoms over the same relation must still agree on arity.
pub fn parse_cq(text: &str, schema: Option<&Schema>) -> Result<Cq> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let cq = p.query()?;
    p.skip_ws();
    if p.peek().is_some() {
        return Err(p.error("unexpected input after the query"));
    }
    check_arities(&cq, schema)?;
    Ok(cq)
}

fn check_arities(cq: &Cq, schema: Option<&Schema>) -> Result<()> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for atom in &cq.body {
        if let Some(schema) = schema {
            match schema.arity(&atom.relation) {
                None => return Err(Error::Schema(format!("unknown relation {}", atom.relation))),
                Some(a) if a != atom.arity() => {
                    return Err(Error::Schema(format!(
                        "atom {atom} has {} arguments, relation {} has arity {a}",
                        atom.arity(),
                        atom.relation
                    )))
                }
                Some(_) => {}
            }
        }
        match seen.insert(&atom.relation, atom.arity()) {
            Some(a) if a != atom.arity() => {
                return Err(Error::Schema(format!(
                    "relation {} used with arities {a} and {}",
                    atom.relation,
                    atom.arity()
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Parser {
    fn error(&self, message: &str) -> Error {
        Error::parse(self.line, self.column, message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        self.skip_ws();
        let matches = token.chars().enumerate().all(|(k, c)| self.chars.get(self.pos + k) == Some(&c));
        if !matches {
            return Err(self.error(&format!("expected `{token}`")));
        }
        for _ in token.chars() {
            self.bump();
        }
        Ok(())
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(self.error(&format!("expected {what}"))),
        }
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|&c| c.is_ascii_alphanumeric() || c == '_' || c == '\'') {
            s.push(c);
            self.bump();
        }
        Ok(s)
    }

    fn query(&mut self) -> Result<Cq> {
        let name = self.ident("query name")?;
        self.expect("(")?;
        let mut head = Vec::new();
        if !self.eat(')') {
            loop {
                head.push(self.ident("head variable")?);
                if self.eat(')') {
                    break;
                }
                self.expect(",")?;
            }
        }
        self.skip_ws();
        if self.peek() == Some(':') {
            self.expect(":-")?;
        } else {
            self.expect("<-")?;
        }
        let mut body = vec![self.atom()?];
        while self.eat(',') {
            body.push(self.atom()?);
        }
        self.eat('.');
        Ok(Cq { name, head, body })
    }

    fn atom(&mut self) -> Result<Atom> {
        let relation = self.ident("relation name")?;
        self.expect("(")?;
        let mut args = vec![self.term()?];
        loop {
            if self.eat(')') {
                break;
            }
            self.expect(",")?;
            args.push(self.term()?);
        }
        Ok(Atom { relation, args })
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let (line, column) = (self.line, self.column);
                let mut s = String::new();
                s.push(c);
                self.bump();
                while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                    s.push(d);
                    self.bump();
                }
                s.parse::<i64>()
                    .map(|n| Term::Const(Value::Int(n)))
                    .map_err(|_| Error::parse(line, column, "invalid integer constant"))
            }
            Some(q @ ('"' | '\'')) => {
                let (line, column) = (self.line, self.column);
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some(c) if c == q => break,
                        Some('(' | ')' | ',' | '\n') => {
                            return Err(self.error("string constants cannot contain `(`, `)`, `,` or newlines"))
                        }
                        Some(c) => s.push(c),
                        None => return Err(Error::parse(line, column, "unterminated string constant")),
                    }
                }
                if s.is_empty() || s.trim() != s || s.parse::<i64>().is_ok() {
                    return Err(Error::parse(line, column, "string constant must be non-empty, untrimmed and non-numeric"));
                }
                Ok(Term::Const(Value::from(s.as_str())))
            }
            _ => Ok(Term::Var(self.ident("variable or constant")?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn parses_running_queries() {
        let q0 = parse_cq(samples::Q0, Some(&samples::schema0())).unwrap();
        assert_eq!(q0.name, "Q0");
        assert_eq!(q0.head, vec!["x", "y"]);
        assert_eq!(q0.body.len(), 3);
        assert_eq!(q0.body[1].to_string(), "S(x,y)");

        let q1 = parse_cq(samples::Q1, None).unwrap();
        assert_eq!(q1.body.len(), 4);
        assert_eq!(q1.body[0], q1.body[3]);
        assert_eq!(q1.body[2].args[0], Term::Const(Value::Int(2)));
    }

    #[test]
    fn display_round_trips() {
        for text in [samples::Q0, samples::Q1, "Q(x) <- T(x), R(x, \"ab\"), S(-3, x)", "B() <- T(1)"] {
            let q = parse_cq(text, None).unwrap();
            assert_eq!(parse_cq(&q.to_string(), None).unwrap(), q);
        }
    }

    #[test]
    fn syntax_errors() {
        match parse_cq("Q( <- ", None).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (1, 4)),
            e => panic!("{e:?}"),
        }
        assert!(parse_cq("Q(x) <- ", None).is_err());
        assert!(parse_cq("Q(x) <- T(x) T(x)", None).is_err());
        assert!(parse_cq("Q(x) <- T()", None).is_err());
        assert!(parse_cq("Q(x) <- T(\"a)", None).is_err());
        assert!(parse_cq("Q(x) -> T(x)", None).is_err());
        let multi = parse_cq("Q(x) <-\n  T(x),\n  S(x,", None).unwrap_err();
        assert!(matches!(multi, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn arity_checks() {
        let schema = samples::schema0();
        assert!(matches!(parse_cq("Q(x) <- T(x,x)", Some(&schema)), Err(Error::Schema(_))));
        assert!(matches!(parse_cq("Q(x) <- W(x)", Some(&schema)), Err(Error::Schema(_))));
        assert!(matches!(parse_cq("Q(x) <- T(x), T(x,x)", None), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_head_variables_are_reported() {
        let q = parse_cq("Q(x,z) <- T(x)", None).unwrap();
        assert_eq!(q.head_vars_missing_from_body(), vec!["z"]);
    }

    #[test]
    fn comments_and_alt_arrow() {
        let q = parse_cq("# c\nQ(x) :- T(x), # note\n S(x, 1).", None).unwrap();
        assert_eq!(q.body.len(), 2);
    }
}
