use super::{CmpOp, ParseError};
use crate::dataset::parse_decimal;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    /// Backtick-quoted column name.
    Quoted(String),
    Str(String),
    Number(f64),
    Op(CmpOp),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    And,
    Or,
    Not,
    Contains,
    StartsWith,
    In,
    Is,
    Missing,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Quoted(s) => format!("column `{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Number(n) => format!("number {n:?}"),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::And => "`and`".into(),
            Tok::Or => "`or`".into(),
            Tok::Not => "`not`".into(),
            Tok::Contains => "`contains`".into(),
            Tok::StartsWith => "`startswith`".into(),
            Tok::In => "`in`".into(),
            Tok::Is => "`is`".into(),
            Tok::Missing => "`missing`".into(),
        }
    }
}

pub(super) const KEYWORDS: [&str; 8] = ["and", "or", "not", "contains", "startswith", "in", "is", "missing"];

fn keyword(word: &str) -> Option<Tok> {
    Some(match word.to_ascii_lowercase().as_str() {
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        "contains" => Tok::Contains,
        "startswith" => Tok::StartsWith,
        "in" => Tok::In,
        "is" => Tok::Is,
        "missing" => Tok::Missing,
        _ => return None,
    })
}

pub(super) fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub(super) fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokens paired with their byte offsets.
pub(super) fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();

    let err = |out: &Vec<(Tok, usize)>, offset: usize, expected: &str, found: String| ParseError {
        token: out.len() + 1,
        offset,
        expected: expected.to_string(),
        found,
    };

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let tok = match c {
            '(' | ')' | '[' | ']' | ',' => {
                chars.next();
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    _ => Tok::Comma,
                }
            }
            '=' | '!' | '<' | '>' => {
                chars.next();
                let eq_follows = matches!(chars.peek(), Some(&(_, '=')));
                if eq_follows {
                    chars.next();
                }
                match (c, eq_follows) {
                    ('=', true) => Tok::Op(CmpOp::Eq),
                    ('!', true) => Tok::Op(CmpOp::Ne),
                    ('<', false) => Tok::Op(CmpOp::Lt),
                    ('<', true) => Tok::Op(CmpOp::Le),
                    ('>', false) => Tok::Op(CmpOp::Gt),
                    ('>', true) => Tok::Op(CmpOp::Ge),
                    _ => return Err(err(&out, start, "comparison operator", format!("`{c}`"))),
                }
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, 't')) => s.push('\t'),
                            Some((_, other)) => s.push(other),
                            None => return Err(err(&out, start, "closing `\"`", "end of input".into())),
                        },
                        Some((_, ch)) => s.push(ch),
                        None => return Err(err(&out, start, "closing `\"`", "end of input".into())),
                    }
                }
                Tok::Str(s)
            }
            '`' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '`')) => {
                            if matches!(chars.peek(), Some(&(_, '`'))) {
                                chars.next();
                                s.push('`');
                            } else {
                                break;
                            }
                        }
                        Some((_, ch)) => s.push(ch),
                        None => return Err(err(&out, start, "closing backtick", "end of input".into())),
                    }
                }
                if s.is_empty() {
                    return Err(err(&out, start, "column name", "empty backticks".into()));
                }
                Tok::Quoted(s)
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let mut end = start;
                let mut prev = '\0';
                while let Some(&(i, ch)) = chars.peek() {
                    let sign_ok = (ch == '-' || ch == '+') && (i == start || prev == 'e' || prev == 'E');
                    if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' || sign_ok {
                        end = i + ch.len_utf8();
                        prev = ch;
                        chars.next();
                    } else {
                        break;
                    }
                }
                let text = &src[start..end];
                match parse_decimal(text) {
                    Some(n) => Tok::Number(n),
                    None => return Err(err(&out, start, "number", format!("`{text}`"))),
                }
            }
            c if is_ident_start(c) => {
                let mut end = start;
                while let Some(&(i, ch)) = chars.peek() {
                    if is_ident_continue(ch) {
                        end = i + ch.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let word = &src[start..end];
                keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()))
            }
            other => return Err(err(&out, start, "token", format!("`{other}`"))),
        };
        out.push((tok, start));
    }
    Ok(out)
}
