use super::lexer::{tokenize, Tok};
use super::{FilterExpr, Literal, ParseError};

/// Parses filter source text. Precedence is `not` > `and` > `or`; binary
/// operators associate to the left.
pub fn parse_filter(src: &str) -> Result<FilterExpr, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        end: src.len(),
    };
    let expr = parser.or()?;
    if parser.pos < tokens.len() {
        return Err(parser.error("`and`, `or` or end of input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    tokens: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let tok = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        let (offset, found) = match self.tokens.get(self.pos) {
            Some((tok, offset)) => (*offset, tok.describe()),
            None => (self.end, "end of input".to_string()),
        };
        ParseError {
            token: self.pos + 1,
            offset,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn or(&mut self) -> Result<FilterExpr, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<FilterExpr, ParseError> {
        let mut lhs = self.not()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.not()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<FilterExpr, ParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            Ok(self.atom()?.not())
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<FilterExpr, ParseError> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let inner = self.or()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<FilterExpr, ParseError> {
        let column = match self.peek() {
            Some(Tok::Ident(name)) | Some(Tok::Quoted(name)) => name.clone(),
            _ => return Err(self.error("column name or `(`")),
        };
        self.pos += 1;

        match self.peek().cloned() {
            Some(Tok::Op(op)) => {
                self.pos += 1;
                let value = self.literal()?;
                Ok(FilterExpr::Cmp { column, op, value })
            }
            Some(Tok::Contains) => {
                self.pos += 1;
                let needle = self.string()?;
                Ok(FilterExpr::Contains { column, needle })
            }
            Some(Tok::StartsWith) => {
                self.pos += 1;
                let prefix = self.string()?;
                Ok(FilterExpr::StartsWith { column, prefix })
            }
            Some(Tok::In) => {
                self.pos += 1;
                self.expect(Tok::LBracket, "`[`")?;
                let mut values = vec![self.literal()?];
                loop {
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.pos += 1;
                            values.push(self.literal()?);
                        }
                        Some(Tok::RBracket) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.error("`,` or `]`")),
                    }
                }
                Ok(FilterExpr::InSet { column, values })
            }
            Some(Tok::Is) => {
                self.pos += 1;
                self.expect(Tok::Missing, "`missing`")?;
                Ok(FilterExpr::IsMissing { column })
            }
            _ => Err(self.error("comparison operator, `contains`, `startswith`, `in` or `is`")),
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let n = *n;
                self.bump();
                Ok(Literal::Number(n))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.bump();
                Ok(Literal::Text(s))
            }
            _ => Err(self.error("number or string literal")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("string literal")),
        }
    }
}
