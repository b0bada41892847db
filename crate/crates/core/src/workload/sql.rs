//! SQL rendering and grammar checking for workload queries.
//!
//! [`render_sql`] turns a [`QueryBody`] into deterministic multi-line SQL.
//! [`check_grammar`] is the inverse gate: it parses arbitrary text against
//! the workload query grammar and rejects anything outside it, with a byte
//! position for every rejection. Rendering then parsing then rendering again
//! reproduces the text exactly, which keeps the two sides honest.
//!
//! The accepted language, as EBNF (keywords are case-insensitive,
//! identifiers are case-sensitive):
//!
//! ```text
//! query         = "SELECT" select-list "FROM" table-list
//!                 [ "WHERE" condition { "AND" condition } ]
//!                 [ group-clause ] [ having-clause ] [ ";" ] ;
//! select-list   = attribute { "," attribute } { "," aggregate }
//!               | aggregate { "," aggregate } ;
//! aggregate     = "SUM" "(" attribute ")" [ "AS" identifier ] ;
//! table-list    = identifier { "," identifier } ;
//! condition     = attribute "=" attribute            (* join *)
//!               | attribute "=" string-literal       (* restriction *) ;
//! group-clause  = "GROUP" "BY" ( "CUBE" | "ROLLUP" )
//!                 "(" attribute { "," attribute } ")"
//!               | "GROUP" "BY" attribute { "," attribute } ;
//! having-clause = "HAVING" ( identifier | "SUM" "(" attribute ")" )
//!                 ">=" number ;
//! attribute     = identifier [ "." identifier ] ;
//! ```
//!
//! Side conditions enforced beyond the productions: a group clause requires
//! at least one aggregate in the select list, `HAVING` requires a group
//! clause, and a `HAVING` reference must resolve to one of the select
//! list's aggregates (by alias or by repeating its `SUM` expression).
//! `SELECT *` and subqueries are not in the language.

use std::fmt;

use super::{
    AggregateSelect, GroupBy, GroupOperator, Having, JoinCondition, QualifiedAttr, QueryBody,
    Restriction,
};
use crate::emit::format_measure;

/// Renders a query as deterministic SQL: one clause per line, explicit
/// `TABLE.COLUMN` qualification, aggregates after plain attributes.
pub fn render_sql(body: &QueryBody) -> String {
    let mut items: Vec<String> = body
        .select_attributes
        .iter()
        .map(|a| a.to_string())
        .collect();
    items.extend(
        body.select_aggregates
            .iter()
            .map(|a| format!("SUM({}) AS {}", a.measure, a.alias)),
    );
    let mut lines = vec![format!("SELECT {}", items.join(", "))];
    lines.push(format!("FROM {}", body.from_tables.join(", ")));

    if !body.join_conditions.is_empty() || !body.restrictions.is_empty() {
        let mut conds: Vec<String> = body
            .join_conditions
            .iter()
            .map(|j| format!("{} = {}", j.left, j.right))
            .collect();
        conds.extend(
            body.restrictions
                .iter()
                .map(|r| format!("{} = '{}'", r.attribute, r.literal)),
        );
        lines.push(format!("WHERE {}", conds.join(" AND ")));
    }

    if let Some(group) = &body.group_by {
        let attrs = group
            .attributes
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        lines.push(match group.operator {
            GroupOperator::Plain => format!("GROUP BY {attrs}"),
            GroupOperator::Cube => format!("GROUP BY CUBE({attrs})"),
            GroupOperator::Rollup => format!("GROUP BY ROLLUP({attrs})"),
        });
    }

    if let Some(having) = &body.having {
        lines.push(format!(
            "HAVING {} >= {}",
            having.aggregate_alias,
            format_measure(having.threshold)
        ));
    }

    lines.join("\n")
}

/// A grammar rejection with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Checks `text` against the workload query grammar.
///
/// On success returns the parsed structure, which [`render_sql`] maps back
/// to the canonical text form. See the module docs for the accepted
/// language.
pub fn check_grammar(text: &str) -> Result<QueryBody, ParseError> {
    Parser::new(lex(text)?, text.len()).parse_query()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Eq,
    Ge,
    Semi,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    pos: usize,
}

fn err(position: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let pos = i;
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b',' => {
                toks.push(Lexed {
                    tok: Tok::Comma,
                    pos,
                });
                i += 1;
            }
            b'.' => {
                toks.push(Lexed { tok: Tok::Dot, pos });
                i += 1;
            }
            b'(' => {
                toks.push(Lexed {
                    tok: Tok::LParen,
                    pos,
                });
                i += 1;
            }
            b')' => {
                toks.push(Lexed {
                    tok: Tok::RParen,
                    pos,
                });
                i += 1;
            }
            b'=' => {
                toks.push(Lexed { tok: Tok::Eq, pos });
                i += 1;
            }
            b';' => {
                toks.push(Lexed {
                    tok: Tok::Semi,
                    pos,
                });
                i += 1;
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push(Lexed { tok: Tok::Ge, pos });
                    i += 2;
                } else {
                    return Err(err(pos, "only >= comparisons are in the grammar"));
                }
            }
            b'*' => {
                return Err(err(
                    pos,
                    "SELECT * is not in the grammar; list attributes explicitly",
                ))
            }
            b'\'' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'\'' {
                    if bytes[j] == b'\n' {
                        return Err(err(pos, "unterminated string literal"));
                    }
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(err(pos, "unterminated string literal"));
                }
                toks.push(Lexed {
                    tok: Tok::Str(text[start..j].to_string()),
                    pos,
                });
                i = j + 1;
            }
            b'0'..=b'9' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if bytes.get(j) == Some(&b'.') && bytes.get(j + 1).is_some_and(u8::is_ascii_digit) {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let raw = &text[i..j];
                let value: f64 = raw
                    .parse()
                    .map_err(|_| err(pos, format!("malformed number {raw}")))?;
                toks.push(Lexed {
                    tok: Tok::Number(value),
                    pos,
                });
                i = j;
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                toks.push(Lexed {
                    tok: Tok::Ident(text[i..j].to_string()),
                    pos,
                });
                i = j;
            }
            other => {
                return Err(err(
                    pos,
                    format!("unexpected character {:?}", other as char),
                ));
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Lexed>,
    i: usize,
    end: usize,
}

impl Parser {
    fn new(toks: Vec<Lexed>, end: usize) -> Self {
        Self { toks, i: 0, end }
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.i + offset).map(|t| &t.tok)
    }

    fn advance(&mut self) -> Option<Tok> {
        let tok = self.toks.get(self.i).map(|t| t.tok.clone());
        if tok.is_some() {
            self.i += 1;
        }
        tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.i += 1;
            Ok(())
        } else {
            Err(err(self.pos(), format!("expected {kw}")))
        }
    }

    fn expect_tok(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.i += 1;
            Ok(())
        } else {
            Err(err(self.pos(), format!("expected {what}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        let pos = self.pos();
        match self.advance() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(Tok::LParen) => Err(err(pos, "subqueries are not in the grammar")),
            _ => Err(err(pos, format!("expected {what}"))),
        }
    }

    fn parse_attribute(&mut self) -> Result<QualifiedAttr, ParseError> {
        let first = self.expect_ident("attribute name")?;
        if self.peek() == Some(&Tok::Dot) {
            self.i += 1;
            let column = self.expect_ident("column name after '.'")?;
            Ok(QualifiedAttr {
                table: first,
                column,
            })
        } else {
            Ok(QualifiedAttr {
                table: String::new(),
                column: first,
            })
        }
    }

    /// `SUM ( attribute ) [AS identifier]`; the caller has checked that the
    /// next tokens are `SUM (`.
    fn parse_aggregate(&mut self) -> Result<AggregateSelect, ParseError> {
        let pos = self.pos();
        let fn_name = self.expect_ident("aggregate function")?;
        if !fn_name.eq_ignore_ascii_case("SUM") {
            return Err(err(
                pos,
                format!("unsupported aggregate function {fn_name}; the grammar has SUM only"),
            ));
        }
        self.expect_tok(&Tok::LParen, "( after SUM")?;
        let measure = self.parse_attribute()?;
        self.expect_tok(&Tok::RParen, ") after aggregate operand")?;
        let alias = if self.at_keyword("AS") {
            self.i += 1;
            self.expect_ident("alias after AS")?
        } else {
            format!("{}_SUM", measure.column)
        };
        Ok(AggregateSelect { measure, alias })
    }

    /// True when the upcoming tokens start an aggregate rather than an
    /// attribute that merely happens to be named SUM.
    fn at_aggregate(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("SUM"))
            && self.peek_at(1) == Some(&Tok::LParen)
    }

    fn parse_query(mut self) -> Result<QueryBody, ParseError> {
        let mut body = QueryBody::default();
        self.expect_keyword("SELECT")?;

        loop {
            if self.at_aggregate() {
                let agg = self.parse_aggregate()?;
                body.select_aggregates.push(agg);
            } else {
                let pos = self.pos();
                if !body.select_aggregates.is_empty() {
                    return Err(err(
                        pos,
                        "attributes must precede aggregates in the select list",
                    ));
                }
                // An identifier followed by '(' is a call to some other
                // aggregate; name it rather than failing later at FROM.
                if let (Some(Tok::Ident(name)), Some(Tok::LParen)) = (self.peek(), self.peek_at(1))
                {
                    return Err(err(
                        pos,
                        format!("unsupported aggregate function {name}; the grammar has SUM only"),
                    ));
                }
                body.select_attributes.push(self.parse_attribute()?);
            }
            if self.peek() == Some(&Tok::Comma) {
                self.i += 1;
            } else {
                break;
            }
        }

        self.expect_keyword("FROM")?;
        loop {
            body.from_tables.push(self.expect_ident("table name")?);
            if self.peek() == Some(&Tok::Comma) {
                self.i += 1;
            } else {
                break;
            }
        }

        if self.at_keyword("WHERE") {
            self.i += 1;
            loop {
                let left = self.parse_attribute()?;
                self.expect_tok(&Tok::Eq, "= in condition")?;
                match self.peek() {
                    Some(Tok::Str(_)) => {
                        let Some(Tok::Str(literal)) = self.advance() else {
                            unreachable!()
                        };
                        body.restrictions.push(Restriction {
                            attribute: left,
                            literal,
                        });
                    }
                    _ => {
                        let right = self.parse_attribute()?;
                        body.join_conditions.push(JoinCondition { left, right });
                    }
                }
                if self.at_keyword("AND") {
                    self.i += 1;
                } else {
                    break;
                }
            }
        }

        if self.at_keyword("GROUP") {
            let group_pos = self.pos();
            self.i += 1;
            self.expect_keyword("BY")?;
            let operator = if self.at_keyword("CUBE") {
                self.i += 1;
                GroupOperator::Cube
            } else if self.at_keyword("ROLLUP") {
                self.i += 1;
                GroupOperator::Rollup
            } else {
                GroupOperator::Plain
            };
            let mut attributes = Vec::new();
            let parenthesized = operator != GroupOperator::Plain;
            if parenthesized {
                self.expect_tok(&Tok::LParen, "( after CUBE or ROLLUP")?;
            }
            loop {
                attributes.push(self.parse_attribute()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.i += 1;
                } else {
                    break;
                }
            }
            if parenthesized {
                self.expect_tok(&Tok::RParen, ") closing the group list")?;
            }
            if body.select_aggregates.is_empty() {
                return Err(err(
                    group_pos,
                    "a group clause requires at least one aggregate in the select list",
                ));
            }
            body.group_by = Some(GroupBy {
                operator,
                attributes,
            });
        }

        if self.at_keyword("HAVING") {
            let having_pos = self.pos();
            self.i += 1;
            if body.group_by.is_none() {
                return Err(err(having_pos, "HAVING requires a group clause"));
            }
            let ref_pos = self.pos();
            let aggregate_alias = if self.at_aggregate() {
                let agg = self.parse_aggregate()?;
                body.select_aggregates
                    .iter()
                    .find(|a| a.measure == agg.measure)
                    .map(|a| a.alias.clone())
                    .ok_or_else(|| {
                        err(
                            ref_pos,
                            format!(
                                "HAVING aggregates {} which the select list does not",
                                agg.measure
                            ),
                        )
                    })?
            } else {
                let name = self.expect_ident("aggregate alias")?;
                if !body.select_aggregates.iter().any(|a| a.alias == name) {
                    return Err(err(
                        ref_pos,
                        format!("HAVING references {name}, which is not an aggregate alias of the select list"),
                    ));
                }
                name
            };
            self.expect_tok(&Tok::Ge, ">= in HAVING")?;
            let threshold = match self.advance() {
                Some(Tok::Number(n)) => n,
                _ => return Err(err(self.pos(), "expected numeric threshold after >=")),
            };
            body.having = Some(Having {
                aggregate_alias,
                threshold,
            });
        }

        if self.peek() == Some(&Tok::Semi) {
            self.i += 1;
        }
        if let Some(tok) = self.peek() {
            return Err(err(
                self.pos(),
                format!("unexpected trailing input: {tok:?}"),
            ));
        }
        Ok(body)
    }
}
