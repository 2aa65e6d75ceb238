//! Symbolic expansion of expression instances for printing and coefficient
//! extraction.
//!
//! Polynomial parts are expanded and constant-folded; transcendental pieces stay as
//! opaque atoms carrying a linear coefficient.

use std::collections::BTreeMap;

use super::instance::ExpressionInstance;
use super::ops::{BinaryOp, UnaryOp};
use super::template::NodeShape;

/// Sparse multivariate polynomial keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, k: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[k] = 1;
        let mut p = Polynomial::zero(nvars);
        p.add_term(exps, 1.0);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        use std::collections::btree_map::Entry;
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let before = *o.get();
                *o.get_mut() += c;
                // Cancellation down to rounding noise counts as an exact zero.
                if o.get().abs() <= 1e-12 * before.abs().max(c.abs()) {
                    o.remove();
                }
            }
        }
    }

    /// Coefficient of the monomial with the given exponents (0 when absent).
    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&vec![0; self.nvars]).copied(),
            _ => None,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut p = Polynomial::zero(self.nvars);
        for (k, v) in &self.terms {
            p.add_term(k.clone(), v * c);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let mut p = self.clone();
        for (k, v) in &other.terms {
            p.add_term(k.clone(), *v);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        let mut p = Polynomial::zero(self.nvars);
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let exps = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                p.add_term(exps, va * vb);
            }
        }
        p
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut p = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..n {
            p = p.mul(self);
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(exps, c)| {
                c * exps
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

/// A non-polynomial factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Apply(UnaryOp, Box<Symbolic>),
    Power(Box<Symbolic>, u32),
    Product(Box<Symbolic>, Box<Symbolic>),
}

/// `poly + sum_i c_i * atom_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbolic {
    poly: Polynomial,
    atoms: Vec<(f64, Atom)>,
}

impl Symbolic {
    pub fn constant(nvars: usize, c: f64) -> Self {
        Symbolic {
            poly: Polynomial::constant(nvars, c),
            atoms: Vec::new(),
        }
    }

    pub fn variable(nvars: usize, k: usize) -> Self {
        Symbolic {
            poly: Polynomial::variable(nvars, k),
            atoms: Vec::new(),
        }
    }

    pub fn from_polynomial(poly: Polynomial) -> Self {
        Symbolic {
            poly,
            atoms: Vec::new(),
        }
    }

    pub fn polynomial_part(&self) -> &Polynomial {
        &self.poly
    }

    pub fn atoms(&self) -> &[(f64, Atom)] {
        &self.atoms
    }

    /// Number of free coefficients in the simplified form: one per polynomial term,
    /// and for each atom one for its factor plus the count of its arguments.
    pub fn coefficient_count(&self) -> usize {
        let atoms: usize = self
            .atoms
            .iter()
            .map(|(_, a)| {
                1 + match a {
                    Atom::Apply(_, inner) | Atom::Power(inner, _) => inner.coefficient_count(),
                    Atom::Product(l, r) => l.coefficient_count() + r.coefficient_count(),
                }
            })
            .sum();
        self.poly.terms().count() + atoms
    }

    /// The expansion as a polynomial, if it has no transcendental atoms.
    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        self.atoms.is_empty().then_some(&self.poly)
    }

    pub fn as_constant(&self) -> Option<f64> {
        if self.atoms.is_empty() {
            self.poly.as_constant()
        } else {
            None
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Symbolic::constant(self.poly.nvars, 0.0);
        }
        Symbolic {
            poly: self.poly.scale(c),
            atoms: self.atoms.iter().map(|(k, a)| (k * c, a.clone())).collect(),
        }
    }

    pub fn add(&self, other: &Symbolic) -> Self {
        let mut out = Symbolic {
            poly: self.poly.add(&other.poly),
            atoms: self.atoms.clone(),
        };
        for (c, atom) in &other.atoms {
            out.push_atom(*c, atom.clone());
        }
        out
    }

    fn push_atom(&mut self, c: f64, atom: Atom) {
        if c == 0.0 {
            return;
        }
        if let Some(slot) = self.atoms.iter_mut().find(|(_, a)| *a == atom) {
            slot.0 += c;
        } else {
            self.atoms.push((c, atom));
        }
        self.atoms.retain(|(k, _)| *k != 0.0);
    }

    fn atom(nvars: usize, atom: Atom) -> Self {
        Symbolic {
            poly: Polynomial::zero(nvars),
            atoms: vec![(1.0, atom)],
        }
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        self.scale(scale)
            .add(&Symbolic::constant(self.poly.nvars, shift))
    }

    pub fn apply(&self, op: UnaryOp) -> Self {
        let n = self.poly.nvars;
        if op == UnaryOp::Zero {
            return Symbolic::constant(n, 0.0);
        }
        if let Some(c) = self.as_constant() {
            return Symbolic::constant(n, op.apply(c));
        }
        match op.power() {
            Some(1) => self.clone(),
            Some(p) => match self.as_polynomial() {
                Some(poly) => Symbolic::from_polynomial(poly.pow(p)),
                None => Symbolic::atom(n, Atom::Power(Box::new(self.clone()), p)),
            },
            None => Symbolic::atom(n, Atom::Apply(op, Box::new(self.clone()))),
        }
    }

    pub fn combine(&self, op: BinaryOp, other: &Symbolic) -> Self {
        match op {
            BinaryOp::Add => self.add(other),
            BinaryOp::Sub => self.add(&other.scale(-1.0)),
            BinaryOp::Mul => {
                if let Some(c) = self.as_constant() {
                    other.scale(c)
                } else if let Some(c) = other.as_constant() {
                    self.scale(c)
                } else if let (Some(a), Some(b)) = (self.as_polynomial(), other.as_polynomial()) {
                    Symbolic::from_polynomial(a.mul(b))
                } else {
                    Symbolic::atom(
                        self.poly.nvars,
                        Atom::Product(Box::new(self.clone()), Box::new(other.clone())),
                    )
                }
            }
        }
    }

    /// Canonical infix rendering with coefficients rounded to `precision` decimals.
    ///
    /// Transcendental terms come first, then polynomial terms by descending degree
    /// (ties: x1 before x2). A univariate affine expression is written constant
    /// first, e.g. `1.2 - x1`. Terms whose coefficients round to zero are dropped.
    pub fn render(&self, precision: usize) -> String {
        self.render_inner(precision, true)
    }

    fn render_inner(&self, precision: usize, top_level: bool) -> String {
        let mut terms: Vec<(f64, String)> = Vec::new();
        for (c, atom) in &self.atoms {
            terms.push((*c, render_atom(atom, precision)));
        }
        let mut mono: Vec<(&[u32], f64)> = self.poly.terms().collect();
        mono.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        let univariate_affine = top_level
            && self.atoms.is_empty()
            && self.poly.degree() <= 1
            && mono
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == 1)
                .count()
                == 1;
        if univariate_affine {
            mono.sort_by_key(|(e, _)| e.iter().sum::<u32>());
        }
        for (exps, c) in mono {
            terms.push((c, render_monomial(exps)));
        }
        join_terms(&terms, precision)
    }
}

fn format_magnitude(c: f64, precision: usize) -> Option<String> {
    let s = format!("{:.*}", precision, c.abs());
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    (s != "0").then_some(s)
}

fn render_monomial(exps: &[u32]) -> String {
    exps.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(k, &e)| {
            if e == 1 {
                format!("x{}", k + 1)
            } else {
                format!("x{}^{}", k + 1, e)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

fn render_atom(atom: &Atom, precision: usize) -> String {
    match atom {
        Atom::Apply(op, inner) => {
            format!("{}({})", op.name(), inner.render_inner(precision, false))
        }
        Atom::Power(inner, p) => format!("({})^{}", inner.render_inner(precision, false), p),
        Atom::Product(a, b) => format!(
            "({})*({})",
            a.render_inner(precision, false),
            b.render_inner(precision, false)
        ),
    }
}

fn join_terms(terms: &[(f64, String)], precision: usize) -> String {
    let mut out = String::new();
    for (c, body) in terms {
        let Some(mag) = format_magnitude(*c, precision) else {
            continue;
        };
        let term = if body.is_empty() {
            mag
        } else if mag == "1" {
            body.clone()
        } else {
            format!("{mag}*{body}")
        };
        let negative = *c < 0.0;
        if out.is_empty() {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        out.push_str(&term);
    }
    if out.is_empty() {
        format!("{:.*}", precision, 0.0)
    } else {
        out
    }
}

impl ExpressionInstance {
    /// Expands the expression into polynomial and transcendental parts.
    pub fn symbolic(&self) -> Symbolic {
        let d = self.dim();
        let nodes = self.template().nodes();
        let (w, bias) = self.readout();
        let mut total = Symbolic::constant(d, bias);
        for k in 0..d {
            let leaf = Symbolic::variable(d, k);
            let mut vals: Vec<Symbolic> = Vec::with_capacity(nodes.len());
            for node in nodes {
                let v = match node.shape {
                    NodeShape::Unary { child } => {
                        let (a, b, g) = self.unary_params(node.unary_index);
                        let z = child.map_or(&leaf, |c| &vals[c]);
                        z.affine(b, g).apply(self.unary_op(node.slot)).scale(a)
                    }
                    NodeShape::Binary { left, right } => {
                        vals[left].combine(self.binary_op(node.slot), &vals[right])
                    }
                };
                vals.push(v);
            }
            let root = vals.pop().expect("templates have at least one node");
            total = total.add(&root.scale(w[k]));
        }
        total
    }

    /// Canonical infix form, e.g. `1.1989 - 0.9953*x1`.
    pub fn pretty_print(&self, precision: usize) -> String {
        self.symbolic().render(precision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ops::Operator;
    use crate::expr::template::{OperatorSequence, TreeTemplate};

    fn depth3(ops: [Operator; 4], params: Vec<f64>, dim: usize) -> ExpressionInstance {
        let t = TreeTemplate::new(3).unwrap();
        let seq = OperatorSequence::new(&t, ops.to_vec()).unwrap();
        ExpressionInstance::new(t, seq, params, dim).unwrap()
    }

    use Operator::{Binary as B, Unary as U};

    #[test]
    fn affine_fit_prints_constant_first() {
        let e = depth3(
            [
                U(UnaryOp::Id),
                U(UnaryOp::Zero),
                U(UnaryOp::Id),
                B(BinaryOp::Add),
            ],
            vec![1., 1., 0., 1., 1., 0., 1., 1., 0., -0.9953, 1.1989],
            1,
        );
        assert_eq!(e.pretty_print(4), "1.1989 - 0.9953*x1");
    }

    #[test]
    fn coefficient_counts() {
        let affine = depth3(
            [
                U(UnaryOp::Id),
                U(UnaryOp::Zero),
                U(UnaryOp::Id),
                B(BinaryOp::Add),
            ],
            vec![1., 1., 0., 1., 1., 0., 1., 1., 0., -0.9953, 1.1989],
            1,
        );
        assert_eq!(affine.symbolic().coefficient_count(), 2);
        let wave = depth3(
            [
                U(UnaryOp::Id),
                U(UnaryOp::Zero),
                U(UnaryOp::Cos),
                B(BinaryOp::Add),
            ],
            vec![
                1., 1., 0., 1., 1., 0., 1., 6.2476, -4.6837, -1.1989, -0.0104,
            ],
            1,
        );
        // constant, cosine factor, and the argument's slope and offset
        assert_eq!(wave.symbolic().coefficient_count(), 4);
    }

    #[test]
    fn all_zero_operators_print_as_zero() {
        let e = depth3(
            [
                U(UnaryOp::Zero),
                U(UnaryOp::Zero),
                U(UnaryOp::Zero),
                B(BinaryOp::Mul),
            ],
            vec![1., 1., 0., 1., 1., 0., 1., 1., 0., 1.0, 0.0],
            1,
        );
        assert_eq!(e.pretty_print(4), "0.0000");
    }

    #[test]
    fn bivariate_polynomial_orders_by_descending_degree() {
        let x1 = Polynomial::variable(2, 0);
        let x2 = Polynomial::variable(2, 1);
        let p = x1
            .pow(3)
            .scale(-9.9178)
            .add(&x2.pow(3).scale(0.1625))
            .add(&x1.scale(9.8165))
            .add(&x2.scale(0.1204))
            .add(&Polynomial::constant(2, 0.03));
        assert_eq!(
            Symbolic::from_polynomial(p).render(4),
            "-9.9178*x1^3 + 0.1625*x2^3 + 9.8165*x1 + 0.1204*x2 + 0.03"
        );
    }

    #[test]
    fn cubic_instance_expands_to_monomials() {
        // Id(cube(x) + Id(x)) with an inner shift on the cube: (x + 0.5)^3 + x
        let e = depth3(
            [
                U(UnaryOp::Cube),
                U(UnaryOp::Id),
                U(UnaryOp::Id),
                B(BinaryOp::Add),
            ],
            vec![1., 1., 0.5, 1., 1., 0., 1., 1., 0., 1.0, 0.0],
            1,
        );
        let s = e.symbolic();
        let p = s.as_polynomial().unwrap();
        assert_eq!(p.coefficient(&[3]), 1.0);
        assert_eq!(p.coefficient(&[2]), 1.5);
        assert_eq!(p.coefficient(&[1]), 1.75);
        assert_eq!(p.coefficient(&[0]), 0.125);
        assert_eq!(e.pretty_print(4), "x1^3 + 1.5*x1^2 + 1.75*x1 + 0.125");
    }

    #[test]
    fn phase_shifted_cosine_keeps_affine_argument() {
        // cos(6.2476 * (x + 0) - 4.6837) scaled by -1.1989, shifted by -0.0104
        let e = depth3(
            [
                U(UnaryOp::Id),
                U(UnaryOp::Zero),
                U(UnaryOp::Cos),
                B(BinaryOp::Add),
            ],
            vec![
                1., 1., 0., 1., 1., 0., -1.1989, 6.2476, -4.6837, 1.0, -0.0104,
            ],
            1,
        );
        assert_eq!(
            e.pretty_print(4),
            "-1.1989*cos(6.2476*x1 - 4.6837) - 0.0104"
        );
        let s = e.symbolic();
        assert_eq!(s.atoms().len(), 1);
        assert!(s.as_polynomial().is_none());
    }

    #[test]
    fn symbolic_expansion_agrees_with_numeric_evaluation() {
        let e = depth3(
            [
                U(UnaryOp::Square),
                U(UnaryOp::Cube),
                U(UnaryOp::Id),
                B(BinaryOp::Mul),
            ],
            vec![
                0.7, 1.3, -0.2, -1.1, 0.6, 0.4, 1.5, 0.9, 0.3, 0.8, -0.6, 0.25,
            ],
            2,
        );
        let p = e.symbolic();
        let poly = p.as_polynomial().unwrap();
        for x in [[0.3, -1.2], [1.5, 0.4], [-0.8, 2.0]] {
            assert!((poly.eval(&x) - e.value(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_inputs_to_transcendentals_fold() {
        // sin applied to a zero-operator subtree folds to sin(gamma)
        let e = depth3(
            [
                U(UnaryOp::Zero),
                U(UnaryOp::Zero),
                U(UnaryOp::Sin),
                B(BinaryOp::Add),
            ],
            vec![1., 1., 0., 1., 1., 0., 2.0, 1.0, 0.5, 1.0, 0.0],
            1,
        );
        assert_eq!(e.pretty_print(4), format!("{:.4}", 2.0 * 0.5f64.sin()));
    }
}
