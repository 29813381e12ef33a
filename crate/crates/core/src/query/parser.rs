//! Text syntax for segment queries.
//!
//! ```text
//! query   := expr (NEWLINE+ expr)*          newline-separated clauses are ANDed
//! expr    := term (OR term)*
//! term    := factor (AND factor)*
//! factor  := NOT factor | '(' query ')' | clause
//! clause  := field ('=' | '>=' | '<=') value | field IN '[' int ',' int ']'
//! ```
//!
//! Keywords and field names are case-insensitive; values are lowercased.
//! `≥`/`≤` are accepted for `>=`/`<=`, and integers may carry a leading `$`
//! and thousands separators (`$100,000`).

use crate::fields::{Field, Kind};

use super::{QueryError, SegmentQuery};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Eq,
    Ge,
    Le,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Newline,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    pos: usize,
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !"()[],\"=<>≥≤".contains(c)
}

fn lex(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let mut in_brackets = false;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            '[' => in_brackets = true,
            ']' => in_brackets = false,
            _ => {}
        }
        let single = match c {
            '\n' => Some(Tok::Newline),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '≥' => Some(Tok::Ge),
            '≤' => Some(Tok::Le),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, pos });
            i += 1;
            continue;
        }
        match c {
            c if c.is_whitespace() => i += 1,
            '=' => {
                out.push(Spanned { tok: Tok::Eq, pos });
                i += if chars.get(i + 1).map(|x| x.1) == Some('=') { 2 } else { 1 };
            }
            '>' | '<' => {
                if chars.get(i + 1).map(|x| x.1) != Some('=') {
                    return Err(QueryError::syntax(text, pos, format!("expected `{c}=`")));
                }
                let tok = if c == '>' { Tok::Ge } else { Tok::Le };
                out.push(Spanned { tok, pos });
                i += 2;
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err(QueryError::syntax(text, pos, "unterminated string")),
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.get(j + 1) {
                            Some((_, e)) => {
                                s.push(*e);
                                j += 2;
                            }
                            None => return Err(QueryError::syntax(text, pos, "unterminated string")),
                        },
                        Some((_, ch)) => {
                            s.push(*ch);
                            j += 1;
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Quoted(s), pos });
                i = j + 1;
            }
            _ => {
                let mut j = i;
                let mut word = String::new();
                while j < chars.len() && is_word_char(chars[j].1) {
                    word.push(chars[j].1);
                    j += 1;
                    // thousands separators inside a number: `100,000`, but not in `[lo,hi]`
                    if !in_brackets && chars[j - 1].1.is_ascii_digit() && is_number_like(&word) {
                        while chars.get(j).map(|x| x.1) == Some(',')
                            && (1..=3).all(|k| chars.get(j + k).is_some_and(|x| x.1.is_ascii_digit()))
                            && !chars.get(j + 4).is_some_and(|x| x.1.is_ascii_digit())
                        {
                            for k in 0..4 {
                                word.push(chars[j + k].1);
                            }
                            j += 4;
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Word(word), pos });
                i = j;
            }
        }
    }
    Ok(out)
}

fn is_number_like(word: &str) -> bool {
    let w = word.strip_prefix('$').unwrap_or(word);
    let w = w.strip_prefix('-').unwrap_or(w);
    !w.is_empty() && w.chars().all(|c| c.is_ascii_digit() || c == ',')
}

fn parse_int(raw: &str) -> Option<i64> {
    let cleaned: String = raw.chars().filter(|&c| c != ',' && c != '$').collect();
    cleaned.parse().ok()
}

fn is_keyword(word: &str, kw: &str) -> bool {
    word.eq_ignore_ascii_case(kw)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Spanned>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|s| &s.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|s| s.pos).unwrap_or(self.text.len())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::syntax(self.text, self.pos(), msg))
    }

    fn skip_newlines(&mut self) {
        while self.peek() == Some(&Tok::Newline) {
            self.at += 1;
        }
    }

    /// Index of the next non-newline token.
    fn next_significant(&self) -> Option<&Tok> {
        self.toks[self.at..].iter().map(|s| &s.tok).find(|t| **t != Tok::Newline)
    }

    fn next_is_keyword(&self, kw: &str) -> bool {
        matches!(self.next_significant(), Some(Tok::Word(w)) if is_keyword(w, kw))
    }

    fn query(&mut self) -> Result<SegmentQuery, QueryError> {
        self.skip_newlines();
        let mut parts = vec![self.expr()?];
        loop {
            let had_newline = self.peek() == Some(&Tok::Newline);
            self.skip_newlines();
            match self.peek() {
                None | Some(Tok::RParen) => break,
                _ if had_newline => parts.push(self.expr()?),
                _ => return self.err("expected AND, OR, or a new line"),
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            SegmentQuery::And(parts)
        })
    }

    fn expr(&mut self) -> Result<SegmentQuery, QueryError> {
        let mut parts = vec![self.term()?];
        while self.next_is_keyword("or") {
            self.skip_newlines();
            self.at += 1;
            self.skip_newlines();
            parts.push(self.term()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            SegmentQuery::Or(parts)
        })
    }

    fn term(&mut self) -> Result<SegmentQuery, QueryError> {
        let mut parts = vec![self.factor()?];
        while self.next_is_keyword("and") {
            self.skip_newlines();
            self.at += 1;
            self.skip_newlines();
            parts.push(self.factor()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            SegmentQuery::And(parts)
        })
    }

    fn factor(&mut self) -> Result<SegmentQuery, QueryError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if is_keyword(&w, "not") => {
                self.at += 1;
                self.skip_newlines();
                Ok(SegmentQuery::Not(Box::new(self.factor()?)))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.query()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Word(_)) => self.clause(),
            Some(_) => self.err("expected a clause"),
            None => self.err("unexpected end of query"),
        }
    }

    fn clause(&mut self) -> Result<SegmentQuery, QueryError> {
        let field_pos = self.pos();
        let Some(Tok::Word(name)) = self.peek().cloned() else {
            return self.err("expected a field name");
        };
        self.at += 1;
        if is_keyword(&name, "visit") && self.peek() == Some(&Tok::LParen) {
            return Err(QueryError::syntax(
                self.text,
                field_pos,
                "visit(...) same-visit grouping is reserved and not supported",
            ));
        }
        let field: Field = name.parse().map_err(|_| QueryError::UnknownField {
            name: name.clone(),
            position: QueryError::locate(self.text, field_pos),
        })?;
        match self.peek().cloned() {
            Some(Tok::Eq) => {
                self.at += 1;
                let value = self.value()?;
                match field.kind() {
                    Kind::Categorical => Ok(SegmentQuery::Eq(field, value.to_lowercase())),
                    Kind::Numeric => {
                        let v = self.int_value(&value)?;
                        Ok(SegmentQuery::Range(field, v, v))
                    }
                }
            }
            Some(op @ (Tok::Ge | Tok::Le)) => {
                if field.kind() != Kind::Numeric {
                    return Err(QueryError::TypeMismatch {
                        field,
                        op: if op == Tok::Ge { ">=" } else { "<=" },
                    });
                }
                self.at += 1;
                let value = self.value()?;
                let v = self.int_value(&value)?;
                Ok(if op == Tok::Ge {
                    SegmentQuery::Ge(field, v)
                } else {
                    SegmentQuery::Le(field, v)
                })
            }
            Some(Tok::Word(w)) if is_keyword(&w, "in") => {
                if field.kind() != Kind::Numeric {
                    return Err(QueryError::TypeMismatch { field, op: "in" });
                }
                self.at += 1;
                self.expect(Tok::LBracket, "`[`")?;
                let lo_raw = self.value()?;
                let lo = self.int_value(&lo_raw)?;
                self.expect(Tok::Comma, "`,`")?;
                let hi_raw = self.value()?;
                let hi = self.int_value(&hi_raw)?;
                self.expect(Tok::RBracket, "`]`")?;
                if lo > hi {
                    return self.err(format!("empty range [{lo},{hi}]"));
                }
                Ok(SegmentQuery::Range(field, lo, hi))
            }
            _ => self.err("expected `=`, `>=`, `<=` or `in`"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn value(&mut self) -> Result<String, QueryError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) | Some(Tok::Quoted(w)) => {
                self.at += 1;
                Ok(w)
            }
            _ => self.err("expected a value"),
        }
    }

    fn int_value(&self, raw: &str) -> Result<i64, QueryError> {
        match parse_int(raw) {
            Some(v) => Ok(v),
            None => {
                let pos = self.toks[self.at - 1].pos;
                Err(QueryError::syntax(self.text, pos, format!("expected an integer, found {raw:?}")))
            }
        }
    }
}

pub fn parse_query(text: &str) -> Result<SegmentQuery, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, at: 0 };
    if p.next_significant().is_none() {
        return p.err("empty query");
    }
    let q = p.query()?;
    p.skip_newlines();
    if p.peek().is_some() {
        return p.err("unexpected `)`");
    }
    Ok(q)
}
