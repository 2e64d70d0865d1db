use std::io::BufRead;

use super::{parse_tuple_checked, Schema, Tuple};
use crate::error::{Error, Result};

/// A pull source over a line-oriented stream file.
///
/// Each non-blank line not starting with `#` is one tuple; positions count
/// those lines from 0. Errors carry the line and, for schema violations,
/// the stream position.
pub struct LineSource<R> {
    reader: R,
    schema: Schema,
    line_no: usize,
    position: usize,
    buf: String,
    failed: bool,
}

impl<R: BufRead> LineSource<R> {
    pub fn new(reader: R, schema: Schema) -> Self {
        LineSource {
            reader,
            schema,
            line_no: 0,
            position: 0,
            buf: String::new(),
            failed: false,
        }
    }

    /// The position the next yielded tuple will have.
    pub fn position(&self) -> usize {
        self.position
    }
}

impl<R: BufRead> Iterator for LineSource<R> {
    type Item = Result<Tuple>;

    fn next(&mut self) -> Option<Result<Tuple>> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::Input(e.to_string())));
                }
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let result = parse_tuple_checked(line, self.line_no, &self.schema)
                .map_err(|e| e.at_position(self.position));
            if result.is_err() {
                self.failed = true;
            }
            self.position += 1;
            return Some(result);
        }
    }
}

/// Parses a whole stream file held in memory.
pub fn parse_stream(text: &str, schema: &Schema) -> Result<Vec<Tuple>> {
    LineSource::new(text.as_bytes(), schema.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_counts_positions() {
        let schema = Schema::from_pairs([("T", 1), ("S", 2)]).unwrap();
        let text = "# header\nS(2,11)\n\n  T(2)\n# c\nT(1)\n";
        let tuples = parse_stream(text, &schema).unwrap();
        assert_eq!(tuples.len(), 3);
        assert_eq!(tuples[1], Tuple::ints("T", &[2]));
    }

    #[test]
    fn errors_carry_position() {
        let schema = Schema::from_pairs([("T", 1)]).unwrap();
        let err = parse_stream("T(1)\n#x\nT(1,2)\n", &schema).unwrap_err();
        match err {
            Error::AtPosition { position, source } => {
                assert_eq!(position, 1);
                assert!(matches!(*source, Error::Schema(_)));
            }
            e => panic!("unexpected {e:?}"),
        }
        let err = parse_stream("T(1\n", &schema).unwrap_err();
        assert!(matches!(err.root(), Error::Parse { line: 1, .. }));
    }
}
