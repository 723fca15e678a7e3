//! Recursive-descent parser for the concrete formula syntax.
//!
//! ```text
//! phi   := cat
//! cat   := or ("." or)*
//! or    := and ("|" and)*
//! and   := unary ("&" unary)*
//! unary := "!" unary | "H^" INT ["!"] IDENT | "[" phi "]^[" INT "," INT "]" | "(" phi ")"
//! ```
//!
//! Whitespace is insignificant and `#` starts a comment that runs to the end
//! of the line.

use thiserror::Error;

use super::{AtomRef, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unknown operator `{op}`")]
    UnknownOperator {
        line: usize,
        column: usize,
        op: String,
    },
    #[error("{line}:{column}: malformed time bound: {message}")]
    MalformedBound {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ParseError {
    /// 1-based (line, column) of the offending input.
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::UnknownOperator { line, column, .. }
            | ParseError::MalformedBound { line, column, .. } => (*line, *column),
        }
    }
}

/// Operator names from neighbouring logics that do not exist here.
const FOREIGN_OPERATORS: &[&str] = &[
    "G",
    "F",
    "X",
    "U",
    "R",
    "W",
    "always",
    "eventually",
    "next",
    "until",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Caret,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Bang,
    Amp,
    Pipe,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Caret => "`^`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tok_line, tok_col) = (line, column);
        let single = |tok: Tok| Spanned {
            tok,
            line: tok_line,
            column: tok_col,
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                column += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '^' | '[' | ']' | '(' | ')' | ',' | '!' | '&' | '|' | '.' => {
                out.push(single(match c {
                    '^' => Tok::Caret,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '!' => Tok::Bang,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    _ => Tok::Dot,
                }));
                i += 1;
                column += 1;
            }
            '-' if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                return Err(ParseError::MalformedBound {
                    line,
                    column,
                    message: "time bounds must be non-negative integers".into(),
                });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.')
                    && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
                {
                    return Err(ParseError::MalformedBound {
                        line,
                        column,
                        message: "time bounds must be integers".into(),
                    });
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits
                    .parse::<u64>()
                    .map_err(|_| ParseError::MalformedBound {
                        line,
                        column,
                        message: format!("`{digits}` is out of range"),
                    })?;
                column += i - start;
                out.push(single(Tok::Int(value)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                column += i - start;
                out.push(single(Tok::Ident(chars[start..i].iter().collect())));
            }
            _ => {
                // Collect a run of operator-like symbols so `->` is reported whole.
                let start = i;
                while i < chars.len() && is_symbol(chars[i]) {
                    i += 1;
                }
                if i == start {
                    i += 1;
                }
                return Err(ParseError::UnknownOperator {
                    line,
                    column,
                    op: chars[start..i].iter().collect(),
                });
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

fn is_symbol(c: char) -> bool {
    !(c.is_alphanumeric() || c.is_whitespace() || "^[](),!&|.#_".contains(c))
}

/// Parses formula text into its abstract syntax tree.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    if parser.peek() == &Tok::Eof {
        return Err(parser.error("empty formula".into()));
    }
    let formula = parser.cat()?;
    match parser.peek() {
        Tok::Eof => Ok(formula),
        other => {
            let message = format!("unexpected {} after end of formula", other.describe());
            Err(parser.error(message))
        }
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn error(&self, message: String) -> ParseError {
        let (line, column) = self.here();
        ParseError::Syntax {
            line,
            column,
            message,
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            let message = format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            );
            Err(self.error(message))
        }
    }

    fn bound(&mut self) -> Result<u64, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            other => {
                let (line, column) = self.here();
                Err(ParseError::MalformedBound {
                    line,
                    column,
                    message: format!("expected integer, found {}", other.describe()),
                })
            }
        }
    }

    fn cat(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.or()?;
        while *self.peek() == Tok::Dot {
            self.bump();
            let rhs = self.or()?;
            lhs = Formula::concat(lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.cat()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::LBracket => {
                self.bump();
                let inner = self.cat()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Caret)?;
                self.expect(Tok::LBracket)?;
                let (line, column) = self.here();
                let start = self.bound()?;
                self.expect(Tok::Comma)?;
                let end = self.bound()?;
                self.expect(Tok::RBracket)?;
                if end < start {
                    return Err(ParseError::MalformedBound {
                        line,
                        column,
                        message: format!("window [{start},{end}] ends before it starts"),
                    });
                }
                Ok(Formula::within(inner, start, end))
            }
            Tok::Ident(name) if name == "H" && *self.peek_at(1) == Tok::Caret => {
                self.bump();
                self.bump();
                let duration = self.bound()?;
                let negated = if *self.peek() == Tok::Bang {
                    self.bump();
                    true
                } else {
                    false
                };
                match self.peek().clone() {
                    Tok::Ident(atom) => {
                        self.bump();
                        Ok(Formula::Hold {
                            duration,
                            atom: AtomRef::new(atom),
                            negated,
                        })
                    }
                    other => {
                        let message = format!("expected atom name, found {}", other.describe());
                        Err(self.error(message))
                    }
                }
            }
            Tok::Ident(name) => {
                let (line, column) = self.here();
                if FOREIGN_OPERATORS.contains(&name.as_str()) || name == "H" {
                    Err(ParseError::UnknownOperator {
                        line,
                        column,
                        op: name,
                    })
                } else {
                    Err(self.error(format!(
                        "bare atom `{name}`; atoms appear under a hold, e.g. `H^0 {name}`"
                    )))
                }
            }
            other => {
                let message = format!("expected formula, found {}", other.describe());
                Err(self.error(message))
            }
        }
    }
}
