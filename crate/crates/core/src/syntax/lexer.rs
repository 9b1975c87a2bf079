use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Colon,
    Semi,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Plus,
    Minus,
    Star,
    Percent,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Arrow => f.write_str("`<-`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Percent => f.write_str("`%`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: l,
                column: col,
            })
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            c if c.is_whitespace() => {
                bump!();
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Ident(s));
            }
            c if c.is_ascii_digit() => {
                let mut n: u64 = 0;
                while let Some(&c) = chars.peek() {
                    if let Some(d) = c.to_digit(10) {
                        n = n.checked_mul(10).and_then(|n| n.checked_add(d as u64)).ok_or_else(
                            || ParseError::new(l, col, "integer literal too large", vec![], ""),
                        )?;
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Int(n));
            }
            _ => {
                bump!();
                let tok = match c {
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '=' => Tok::Eq,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' | '×' => Tok::Star,
                    '%' => Tok::Percent,
                    '←' => Tok::Arrow,
                    '≠' => Tok::Ne,
                    '≤' => Tok::Le,
                    '<' => match chars.peek() {
                        Some('-') => {
                            bump!();
                            Tok::Arrow
                        }
                        Some('=') => {
                            bump!();
                            Tok::Le
                        }
                        _ => Tok::Lt,
                    },
                    '!' => match chars.peek() {
                        Some('=') => {
                            bump!();
                            Tok::Ne
                        }
                        _ => Tok::Bang,
                    },
                    other => {
                        return Err(ParseError::new(
                            l,
                            col,
                            format!("unexpected character `{other}`"),
                            vec![],
                            other.to_string(),
                        ))
                    }
                };
                push(&mut out, tok);
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
