//! Recursive-descent parser for the expression and set mini-languages.
//!
//! ```text
//! node  := name [ ':' args ] [ '(' node { ';' node } ')' ]
//! args  := token { ',' token }
//! token := characters other than , ; ( ) and whitespace
//! ```
//!
//! `realization:` is the one exception: what follows the colon is a string
//! expression, so `realization:gencantor:2,0.25` parses as intended.

use num_complex::Complex64;
use parazeta::cantor_atoms::CantorParams;
use parazeta::distance_zeta::{construct_set, GeometricSet, SetOptions};
use parazeta::string_core::{lift, scale, CoefficientFamily, StringExpr};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    name: String,
    args: Vec<String>,
    children: Vec<Node>,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), CliError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(invalid(format!("expected '{c}' at offset {} in {:?}", self.pos, self.src)))
        }
    }

    fn word(&mut self, stop: impl Fn(char) -> bool) -> String {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if stop(c) || c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
        self.src[start..self.pos].to_string()
    }

    fn node(&mut self) -> Result<Node, CliError> {
        let name = self.word(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')).to_ascii_lowercase();
        if name.is_empty() {
            return Err(invalid(format!("expected a name at offset {} in {:?}", self.pos, self.src)));
        }
        let mut node = Node { name, args: Vec::new(), children: Vec::new() };
        if self.eat(':') {
            if node.name == "realization" {
                node.children.push(self.node()?);
                return Ok(node);
            }
            loop {
                let token = self.word(|c| matches!(c, ',' | ';' | '(' | ')'));
                if token.is_empty() {
                    return Err(invalid(format!("empty argument at offset {} in {:?}", self.pos, self.src)));
                }
                node.args.push(token);
                if !self.eat(',') {
                    break;
                }
            }
        }
        if self.eat('(') {
            loop {
                node.children.push(self.node()?);
                if !self.eat(';') {
                    break;
                }
            }
            self.expect(')')?;
        }
        Ok(node)
    }

    fn finish(mut self) -> Result<Node, CliError> {
        let node = self.node()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(invalid(format!("unexpected {:?} after the expression", &self.src[self.pos..])));
        }
        Ok(node)
    }
}

/// A real number, also accepting `p/q`.
pub fn number(token: &str) -> Result<f64, CliError> {
    let bad = || invalid(format!("{token:?} is not a number"));
    let value = match token.split_once('/') {
        Some((p, q)) => p.trim().parse::<f64>().map_err(|_| bad())? / q.trim().parse::<f64>().map_err(|_| bad())?,
        None => token.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn integer(token: &str) -> Result<u32, CliError> {
    token.trim().parse().map_err(|_| invalid(format!("{token:?} is not a nonnegative integer")))
}

fn arity(node: &Node, args: usize, children: usize) -> Result<(), CliError> {
    if node.args.len() != args || node.children.len() != children {
        return Err(invalid(format!(
            "{} takes {args} argument(s) and {children} operand(s), got {} and {}",
            node.name,
            node.args.len(),
            node.children.len()
        )));
    }
    Ok(())
}

fn family(name: &str) -> Result<CoefficientFamily, CliError> {
    Ok(match name {
        "exp" => CoefficientFamily::Exp,
        "expm1" | "exp-1" => CoefficientFamily::ExpMinusOne,
        "cosh" => CoefficientFamily::Cosh,
        "sinh" => CoefficientFamily::Sinh,
        "geometric" => CoefficientFamily::Geometric,
        "log" => CoefficientFamily::Log,
        other => return Err(invalid(format!("unknown series family {other:?}"))),
    })
}

fn build_expr(node: &Node) -> Result<StringExpr, CliError> {
    let kids = || node.children.iter().map(build_expr).collect::<Result<Vec<_>, _>>();
    let e = match node.name.as_str() {
        "cantor" => {
            arity(node, 0, 0)?;
            StringExpr::cantor_string()
        }
        "gencantor" => {
            arity(node, 2, 0)?;
            StringExpr::gen_cantor(integer(&node.args[0])?, number(&node.args[1])?)?
        }
        "inforder" => {
            arity(node, 2, 0)?;
            StringExpr::infinite_order(integer(&node.args[0])?, number(&node.args[1])?)?
        }
        "selfsim" => {
            arity(node, node.args.len().max(1), 0)?;
            StringExpr::self_similar(node.args.iter().map(|t| number(t)).collect::<Result<_, _>>()?)?
        }
        "explicit" => {
            arity(node, node.args.len().max(1), 0)?;
            let mut terms = Vec::new();
            for t in &node.args {
                // `l*k` repeats a length k times
                let (l, k) = match t.split_once('*') {
                    Some((l, k)) => (number(l)?, integer(k)? as u64),
                    None => (number(t)?, 1),
                };
                terms.push((l, k));
            }
            StringExpr::explicit(&terms)?
        }
        "scale" => {
            arity(node, 1, 1)?;
            scale(number(&node.args[0])?, build_expr(&node.children[0])?)?
        }
        "power" => {
            arity(node, 1, 1)?;
            StringExpr::power(build_expr(&node.children[0])?, integer(&node.args[0])?)?
        }
        "lift" => {
            arity(node, 1, 1)?;
            lift(family(&node.args[0])?, build_expr(&node.children[0])?)?
        }
        "union" => {
            arity(node, 0, node.children.len().max(1))?;
            StringExpr::union(kids()?)?
        }
        "tensor" => {
            arity(node, 0, node.children.len().max(1))?;
            StringExpr::tensor(kids()?)?
        }
        other => return Err(invalid(format!("unknown string constructor {other:?}"))),
    };
    Ok(e)
}

fn build_set(node: &Node) -> Result<GeometricSet, CliError> {
    let set = match node.name.as_str() {
        "realization" => {
            arity(node, 0, 1)?;
            GeometricSet::realization(build_expr(&node.children[0])?)
        }
        "cantorset" => {
            arity(node, 2, 0)?;
            GeometricSet::GenCantorSet(CantorParams::new(integer(&node.args[0])?, number(&node.args[1])?)?)
        }
        "grill" => {
            arity(node, 1, 1)?;
            GeometricSet::grill(build_set(&node.children[0])?, integer(&node.args[0])?)?
        }
        "flat" => {
            arity(node, 1, 1)?;
            GeometricSet::flat(build_set(&node.children[0])?, integer(&node.args[0])?)?
        }
        "translate" => {
            arity(node, node.args.len().max(1), 1)?;
            let offset = node.args.iter().map(|t| number(t)).collect::<Result<_, _>>()?;
            GeometricSet::translated(build_set(&node.children[0])?, offset)?
        }
        "union" => {
            arity(node, 0, node.children.len().max(1))?;
            GeometricSet::union(node.children.iter().map(build_set).collect::<Result<_, _>>()?)?
        }
        "construct" => {
            arity(node, 4, 0)?;
            let t: Vec<f64> = node.args[..3].iter().map(|t| number(t)).collect::<Result<_, _>>()?;
            construct_set(t[0], t[1], t[2], integer(&node.args[3])?, SetOptions::default())?.set
        }
        other => return Err(invalid(format!("unknown set constructor {other:?}"))),
    };
    Ok(set)
}

/// Parses a string expression, or its JSON form when the text starts with `{`.
pub fn expr(text: &str) -> Result<StringExpr, CliError> {
    if text.trim_start().starts_with('{') {
        return Ok(StringExpr::from_json(text)?);
    }
    build_expr(&Parser::new(text).finish()?)
}

/// Parses a geometric set, or its JSON form when the text starts with `{`.
pub fn set(text: &str) -> Result<GeometricSet, CliError> {
    if text.trim_start().starts_with('{') {
        return Ok(GeometricSet::from_json(text)?);
    }
    build_set(&Parser::new(text).finish()?)
}

/// Complex numbers such as `2`, `-1.5e-3`, `3i`, `0.5-2i` or `1+0i`.
pub fn complex(text: &str) -> Result<Complex64, CliError> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || invalid(format!("{text:?} is not a complex number"));
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(Complex64::new(number(&t).map_err(|_| bad())?, 0.0));
    };
    // the sign that separates the parts is not the leading one and not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        s => number(s).map_err(|_| bad()),
    };
    match split {
        Some(k) => Ok(Complex64::new(number(&body[..k]).map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(complex("1+0i").unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(complex("0.5-2i").unwrap(), Complex64::new(0.5, -2.0));
        assert_eq!(complex("-3").unwrap(), Complex64::new(-3.0, 0.0));
        assert_eq!(complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(complex("1e-3+2e+1i").unwrap(), Complex64::new(1e-3, 20.0));
        assert!(complex("1+").is_err());
        assert!(complex("x").is_err());
    }

    #[test]
    fn expressions() {
        assert_eq!(expr("gencantor:2,1/3").unwrap(), StringExpr::gen_cantor(2, 1.0 / 3.0).unwrap());
        assert_eq!(expr(" cantor ").unwrap(), StringExpr::cantor_string());
        let nested = expr("union(scale:0.5(power:2(gencantor:3,0.2)); explicit:0.5,0.25*3)").unwrap();
        let expected = StringExpr::union(vec![
            scale(0.5, StringExpr::power(StringExpr::gen_cantor(3, 0.2).unwrap(), 2).unwrap()).unwrap(),
            StringExpr::explicit(&[(0.5, 1), (0.25, 3)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(nested, expected);
        assert!(matches!(expr("lift:exp(inforder:2,0.3)").unwrap(), StringExpr::SeriesLift { .. }));
        for bad in ["", "gencantor:2", "gencantor:2,0.6", "union(cantor", "scale:2", "cantor extra", "nope"] {
            assert!(expr(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sets() {
        let s = set("realization:gencantor:2,0.25").unwrap();
        assert_eq!(s, GeometricSet::realization(StringExpr::gen_cantor(2, 0.25).unwrap()));
        let g = set("grill:1(realization:cantor)").unwrap();
        assert_eq!(g.ambient(), 2);
        let u = set("union(cantorset:2,1/3; translate:3(cantorset:3,0.2))").unwrap();
        assert_eq!(u.ambient(), 1);
        assert_eq!(set("construct:0.3,1.4,2.6,3").unwrap().ambient(), 3);
        assert_eq!(set(&g.to_json()).unwrap(), g);
        assert!(set("grill:0(realization:cantor)").is_err());
    }
}
