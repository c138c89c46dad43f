//! Tokenizer for PDDL text. Comments run from `;` to end of line.

use crate::diag::Diagnostic;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    LParen,
    RParen,
    /// A name or the `=` symbol, case preserved.
    Sym(String),
    /// A variable, including the leading `?`.
    Var(String),
    Num(f64),
    /// A `:keyword`, lowercased, without the colon.
    Kw(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

struct Lexer<'a> {
    rest: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            rest: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, first: char, pred: fn(char) -> bool) -> String {
        let mut s = String::new();
        s.push(first);
        while let Some(&c) = self.rest.peek() {
            if pred(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn error(&self, line: u32, column: u32, message: String) -> Diagnostic {
        Diagnostic::error("pddl.lex", message).at_position(line, column)
    }
}

pub fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut lx = Lexer::new(text);
    let mut out = Vec::new();
    loop {
        let (line, column) = (lx.line, lx.column);
        let c = match lx.bump() {
            Some(c) => c,
            None => return Ok(out),
        };
        let tok = match c {
            c if c.is_whitespace() => continue,
            ';' => {
                while let Some(&c) = lx.rest.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '=' => Tok::Sym("=".into()),
            '?' => {
                let body = match lx.rest.peek() {
                    Some(&c) if c.is_ascii_alphabetic() => {
                        let first = lx.bump().unwrap();
                        lx.take_while(first, is_name_char)
                    }
                    _ => {
                        return Err(lx.error(
                            line,
                            column,
                            "`?` must be followed by a name".into(),
                        ))
                    }
                };
                Tok::Var(format!("?{body}"))
            }
            ':' => {
                let body = match lx.rest.peek() {
                    Some(&c) if c.is_ascii_alphabetic() => {
                        let first = lx.bump().unwrap();
                        lx.take_while(first, is_name_char)
                    }
                    _ => {
                        return Err(lx.error(
                            line,
                            column,
                            "`:` must be followed by a keyword name".into(),
                        ))
                    }
                };
                Tok::Kw(body.to_ascii_lowercase())
            }
            c if c.is_ascii_alphabetic() => Tok::Sym(lx.take_while(c, is_name_char)),
            '-' if !matches!(lx.rest.peek(), Some(d) if d.is_ascii_digit()) => {
                Tok::Sym("-".into())
            }
            c if c.is_ascii_digit() || c == '-' => {
                let text = lx.take_while(c, |c| {
                    c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-'
                });
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => {
                        return Err(lx.error(
                            line,
                            column,
                            format!("`{text}` is not a valid number"),
                        ))
                    }
                }
            }
            other => {
                return Err(lx.error(
                    line,
                    column,
                    format!("unexpected character `{other}`"),
                ))
            }
        };
        out.push(Token { tok, line, column });
    }
}
