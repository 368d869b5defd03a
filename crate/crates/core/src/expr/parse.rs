use thiserror::Error;

use super::{Expression, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("variable R{index} at byte {pos} is out of range 1..={n}")]
    Index { index: usize, n: usize, pos: usize },
}

/// How identifiers map to variables.
#[derive(Debug, Clone)]
pub enum VarScheme {
    /// `R1..Rn`, mapped to indices `0..n`.
    Riemann { n: usize },
    /// Plain names, mapped to their position in the list.
    Named(Vec<String>),
}

/// Parses `text` with variables `R1..Rn`.
pub fn parse(text: &str, n: usize) -> Result<Expression, ParseError> {
    parse_with(text, &VarScheme::Riemann { n })
}

pub fn parse_with(text: &str, scheme: &VarScheme) -> Result<Expression, ParseError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        scheme,
    };
    let e = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    scheme: &'a VarScheme,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs.add(&self.term()?);
            } else if self.eat(b'-') {
                lhs = lhs.sub(&self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs.mul(&self.factor()?);
            } else if self.eat(b'/') {
                lhs = lhs.div(&self.factor()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.eat(b'-') {
            return Ok(self.factor()?.neg());
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits();
            if digits.is_empty() {
                return Err(self.error("expected unsigned integer exponent after '^'"));
            }
            let k: u32 = digits.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                message: "exponent too large".into(),
            })?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        self.digits();
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            self.digits();
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.digits().is_empty() {
                // Not an exponent after all.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Expression::constant)
            .map_err(|_| ParseError::Syntax {
                pos: start,
                message: format!("malformed number '{text}'"),
            })
    }

    fn identifier(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(&format!("expected '(' after {name}")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Expression::call(func, &arg));
        }
        match self.scheme {
            VarScheme::Riemann { n } => {
                let digits = name
                    .strip_prefix('R')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
                let Some(digits) = digits else {
                    return Err(ParseError::Syntax {
                        pos: start,
                        message: format!("unknown identifier '{name}'"),
                    });
                };
                let index: usize = digits.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    message: "variable index too large".into(),
                })?;
                if index == 0 || index > *n {
                    return Err(ParseError::Index {
                        index,
                        n: *n,
                        pos: start,
                    });
                }
                Ok(Expression::var(index - 1))
            }
            VarScheme::Named(names) => names
                .iter()
                .position(|v| v == name)
                .map(Expression::var)
                .ok_or_else(|| ParseError::Syntax {
                    pos: start,
                    message: format!("unknown identifier '{name}'"),
                }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_node() {
        let e = parse("R1", 3).unwrap();
        assert_eq!(e, Expression::var(0));
        assert_eq!(e.evaluate(&[5.0, 0.0, 0.0]).unwrap(), 5.0);
    }

    #[test]
    fn precedence_and_power() {
        let e = parse("R1*R1 + 2^3", 2).unwrap();
        assert_eq!(e.evaluate(&[3.0, 0.0]).unwrap(), 17.0);
        assert_eq!(parse("-R1^2", 1).unwrap().evaluate(&[3.0]).unwrap(), -9.0);
        assert_eq!(parse("8/4/2", 1).unwrap().evaluate(&[0.0]).unwrap(), 1.0);
        assert_eq!(parse("8-4-2", 1).unwrap().evaluate(&[0.0]).unwrap(), 2.0);
        assert_eq!(parse("2*-3", 1).unwrap().evaluate(&[0.0]).unwrap(), -6.0);
        assert_eq!(
            parse("1.5e2 + .5", 1).unwrap().evaluate(&[0.0]).unwrap(),
            150.5
        );
    }

    #[test]
    fn index_out_of_range() {
        assert_eq!(
            parse("R5", 4),
            Err(ParseError::Index {
                index: 5,
                n: 4,
                pos: 0
            })
        );
        assert!(matches!(
            parse("R0", 4),
            Err(ParseError::Index { index: 0, .. })
        ));
    }

    #[test]
    fn syntax_errors_report_position() {
        assert!(matches!(
            parse("R1 +", 1),
            Err(ParseError::Syntax { pos: 4, .. })
        ));
        assert!(matches!(
            parse("2R1", 1),
            Err(ParseError::Syntax { pos: 1, .. })
        ));
        assert!(matches!(parse("sin R1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(R1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("R1^-2", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("x", 1),
            Err(ParseError::Syntax { pos: 0, .. })
        ));
    }

    #[test]
    fn named_variables() {
        let scheme = VarScheme::Named(vec!["t".into(), "x".into()]);
        let e = parse_with("t*x + sin(x)", &scheme).unwrap();
        assert_eq!(e.variables(), vec![0, 1]);
    }
}
