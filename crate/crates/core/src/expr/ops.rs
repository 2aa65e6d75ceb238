use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Unary operators. Each acts elementwise and is wrapped in a learnable affine map
/// `alpha * op(beta * z + gamma)` by the tree node that holds it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnaryOp {
    #[serde(rename = "sin")]
    Sin,
    #[serde(rename = "cos")]
    Cos,
    #[serde(rename = "exp")]
    Exp,
    #[serde(rename = "zero", alias = "0")]
    Zero,
    #[serde(rename = "Id", alias = "id")]
    Id,
    #[serde(rename = "square")]
    Square,
    #[serde(rename = "cube")]
    Cube,
    #[serde(rename = "pow4")]
    Pow4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryOp {
    #[serde(rename = "add")]
    Add,
    #[serde(rename = "sub")]
    Sub,
    #[serde(rename = "mul")]
    Mul,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 8] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Exp,
        UnaryOp::Zero,
        UnaryOp::Id,
        UnaryOp::Square,
        UnaryOp::Cube,
        UnaryOp::Pow4,
    ];

    #[inline]
    pub fn apply(self, s: f64) -> f64 {
        match self {
            UnaryOp::Sin => s.sin(),
            UnaryOp::Cos => s.cos(),
            UnaryOp::Exp => s.exp(),
            UnaryOp::Zero => 0.0,
            UnaryOp::Id => s,
            UnaryOp::Square => s * s,
            UnaryOp::Cube => s * s * s,
            UnaryOp::Pow4 => {
                let s2 = s * s;
                s2 * s2
            }
        }
    }

    /// Value and derivative at `s`.
    #[inline]
    pub fn apply_with_derivative(self, s: f64) -> (f64, f64) {
        match self {
            UnaryOp::Sin => {
                let (sn, cs) = s.sin_cos();
                (sn, cs)
            }
            UnaryOp::Cos => {
                let (sn, cs) = s.sin_cos();
                (cs, -sn)
            }
            UnaryOp::Exp => {
                let e = s.exp();
                (e, e)
            }
            UnaryOp::Zero => (0.0, 0.0),
            UnaryOp::Id => (s, 1.0),
            UnaryOp::Square => (s * s, 2.0 * s),
            UnaryOp::Cube => (s * s * s, 3.0 * s * s),
            UnaryOp::Pow4 => {
                let s2 = s * s;
                (s2 * s2, 4.0 * s2 * s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Zero => "zero",
            UnaryOp::Id => "Id",
            UnaryOp::Square => "square",
            UnaryOp::Cube => "cube",
            UnaryOp::Pow4 => "pow4",
        }
    }

    /// Integer power for the polynomial operators, `None` for the rest.
    pub fn power(self) -> Option<u32> {
        match self {
            UnaryOp::Id => Some(1),
            UnaryOp::Square => Some(2),
            UnaryOp::Cube => Some(3),
            UnaryOp::Pow4 => Some(4),
            _ => None,
        }
    }
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 3] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul];

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
        }
    }
}

/// An operator assigned to one template slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Unary(u) => u.name(),
            Operator::Binary(b) => b.name(),
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, Operator::Unary(_))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let op = match s {
            "sin" => Operator::Unary(UnaryOp::Sin),
            "cos" => Operator::Unary(UnaryOp::Cos),
            "exp" => Operator::Unary(UnaryOp::Exp),
            "zero" | "0" => Operator::Unary(UnaryOp::Zero),
            "Id" | "id" => Operator::Unary(UnaryOp::Id),
            "square" => Operator::Unary(UnaryOp::Square),
            "cube" => Operator::Unary(UnaryOp::Cube),
            "pow4" => Operator::Unary(UnaryOp::Pow4),
            "add" | "+" => Operator::Binary(BinaryOp::Add),
            "sub" | "-" => Operator::Binary(BinaryOp::Sub),
            "mul" | "*" => Operator::Binary(BinaryOp::Mul),
            other => return Err(Error::Parse(format!("unknown operator `{other}`"))),
        };
        Ok(op)
    }
}

/// The unary and binary operator alphabets the search draws from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSet {
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
}

impl Default for OperatorSet {
    fn default() -> Self {
        OperatorSet {
            unary: UnaryOp::ALL.to_vec(),
            binary: BinaryOp::ALL.to_vec(),
        }
    }
}

impl OperatorSet {
    pub fn validate(&self) -> crate::Result<()> {
        if self.unary.is_empty() || self.binary.is_empty() {
            return Err(Error::config("operator sets must be non-empty"));
        }
        let mut u = self.unary.clone();
        u.sort();
        u.dedup();
        let mut b = self.binary.clone();
        b.sort();
        b.dedup();
        if u.len() != self.unary.len() || b.len() != self.binary.len() {
            return Err(Error::config("operator sets contain duplicates"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        for op in UnaryOp::ALL {
            for &s in &[-1.3, -0.2, 0.0, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (op.apply(s + h) - op.apply(s - h)) / (2.0 * h);
                let (v, d) = op.apply_with_derivative(s);
                assert_eq!(v, op.apply(s));
                assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "{op:?} at {s}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for u in UnaryOp::ALL {
            assert_eq!(u.name().parse::<Operator>().unwrap(), Operator::Unary(u));
        }
        for b in BinaryOp::ALL {
            assert_eq!(b.name().parse::<Operator>().unwrap(), Operator::Binary(b));
        }
        assert!("div".parse::<Operator>().is_err());
    }
}
