//! Text form of polynomials.
//!
//! ```text
//! poly   ::= term (('+' | '-') term)*
//! term   ::= [sign] [coeff '*'] factor ('*' factor)*  |  [sign] coeff
//! factor ::= 'x' INT ['^' INT]
//! ```
//!
//! Whitespace is ignored. Coefficients accept the usual decimal and
//! exponent forms, so formatted output parses back bit-exactly.

use super::{Monomial, Polynomial};
use crate::error::PolyError;

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, msg: impl Into<String>) -> PolyError {
        PolyError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn integer(&mut self) -> Result<u32, PolyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        self.src[start..self.pos].parse().map_err(|_| PolyError::Syntax {
            pos: start,
            msg: "integer out of range".into(),
        })
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        self.skip_ws();
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'+' || b[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| PolyError::Syntax {
                pos: start,
                msg: "malformed coefficient".into(),
            })
    }

    fn factor(&mut self, n: usize, exps: &mut [u32]) -> Result<(), PolyError> {
        self.skip_ws();
        let at = self.pos;
        if self.bytes.get(self.pos) != Some(&b'x') {
            return Err(self.err("expected variable 'x<index>'"));
        }
        self.pos += 1;
        let idx = self.integer()? as usize;
        if idx == 0 {
            return Err(PolyError::Syntax {
                pos: at,
                msg: "variable indices start at 1".into(),
            });
        }
        if idx > n {
            return Err(PolyError::VariableOutOfRange { index: idx, n });
        }
        let mut power = 1;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            power = self.integer()?;
        }
        exps[idx - 1] += power;
        Ok(())
    }
}

/// Parses the text form into a polynomial in `n` variables.
pub fn parse(text: &str, n: usize) -> Result<Polynomial, PolyError> {
    if n == 0 {
        return Err(PolyError::Syntax {
            pos: 0,
            msg: "dimension must be positive".into(),
        });
    }
    let mut cur = Cursor {
        src: text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut poly = Polynomial::zero(n);
    let mut first = true;
    loop {
        let mut sign = 1.0;
        match cur.peek() {
            None if first => return Err(cur.err("empty polynomial")),
            None => return Err(cur.err("dangling operator")),
            Some(b'+') => cur.pos += 1,
            Some(b'-') => {
                sign = -1.0;
                cur.pos += 1;
            }
            Some(_) if !first => return Err(cur.err("expected '+' or '-'")),
            Some(_) => {}
        }
        first = false;

        let mut coeff = 1.0;
        let mut exps = vec![0u32; n];
        match cur.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                coeff = cur.number()?;
                if cur.peek() == Some(b'*') {
                    cur.pos += 1;
                    cur.factor(n, &mut exps)?;
                    while cur.peek() == Some(b'*') {
                        cur.pos += 1;
                        cur.factor(n, &mut exps)?;
                    }
                }
            }
            Some(b'x') => {
                cur.factor(n, &mut exps)?;
                while cur.peek() == Some(b'*') {
                    cur.pos += 1;
                    cur.factor(n, &mut exps)?;
                }
            }
            _ => return Err(cur.err("expected coefficient or variable")),
        }
        poly.add_term(Monomial::new(exps), sign * coeff);

        if cur.peek().is_none() {
            break;
        }
    }
    Ok(poly)
}

fn format_coeff(c: f64) -> String {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

/// Formats a polynomial in the grammar accepted by [`parse`], terms in
/// basis order. Coefficients use shortest round-trip representations.
pub fn format_poly(p: &Polynomial) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.terms().enumerate() {
        let neg = c.is_sign_negative();
        let a = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let factors: Vec<String> = m
            .exponents()
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(j, &e)| {
                if e == 1 {
                    format!("x{}", j + 1)
                } else {
                    format!("x{}^{}", j + 1, e)
                }
            })
            .collect();
        if factors.is_empty() {
            out.push_str(&format_coeff(a));
        } else {
            if a != 1.0 {
                out.push_str(&format_coeff(a));
                out.push('*');
            }
            out.push_str(&factors.join("*"));
        }
    }
    out
}
