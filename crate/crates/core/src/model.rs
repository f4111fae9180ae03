//! Basis functions of a linear field model and their derivatives.
//!
//! Built-in kinds have closed-form derivatives (inverse-distance up to total
//! order 2). Everything else goes through [`finite_difference`], a tensor
//! product of second-order central stencils.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{factorial, MultiIndex};

/// Distance below which an inverse-distance source is singular.
pub const SINGULARITY_RADIUS: f64 = 1e-12;

/// Highest per-axis derivative order the finite-difference fallback supports.
pub const MAX_FD_ORDER: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Sin,
    Cos,
}

/// One basis function `f_j` of the model `F(x) = Σ β_j f_j(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFunction {
    Monomial {
        exponents: MultiIndex,
    },
    /// `‖x − source‖^(−power)`.
    InverseDistance {
        source: Vec<f64>,
        power: f64,
    },
    Constant,
    /// `sin(k·x + φ)` or `cos(k·x + φ)`.
    Sinusoid {
        frequency: Vec<f64>,
        #[serde(default)]
        phase: f64,
        flavor: Flavor,
    },
    Custom {
        expr: Expr,
    },
}

/// Expression tree for custom model functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Const { value: f64 },
    Coord { axis: usize },
    Add { terms: Vec<Expr> },
    Mul { factors: Vec<Expr> },
    Pow { base: Box<Expr>, exponent: u32 },
    Function { function: Box<ModelFunction> },
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const { value } => *value,
            Expr::Coord { axis } => *x.get(*axis).ok_or(Error::DimensionMismatch {
                expected: axis + 1,
                found: x.len(),
            })?,
            Expr::Add { terms } => {
                let mut s = 0.0;
                for t in terms {
                    s += t.eval(x)?;
                }
                s
            }
            Expr::Mul { factors } => {
                let mut s = 1.0;
                for t in factors {
                    s *= t.eval(x)?;
                }
                s
            }
            Expr::Pow { base, exponent } => base.eval(x)?.powi(*exponent as i32),
            Expr::Function { function } => function.eval(x)?,
        })
    }

    fn max_axis(&self) -> Option<usize> {
        match self {
            Expr::Const { .. } => None,
            Expr::Coord { axis } => Some(*axis),
            Expr::Add { terms: v } | Expr::Mul { factors: v } => {
                v.iter().filter_map(Expr::max_axis).max()
            }
            Expr::Pow { base, .. } => base.max_axis(),
            Expr::Function { function } => function.required_dim().map(|d| d.saturating_sub(1)),
        }
    }
}

impl ModelFunction {
    pub fn monomial(exponents: impl Into<MultiIndex>) -> Self {
        ModelFunction::Monomial {
            exponents: exponents.into(),
        }
    }

    pub fn inverse_distance(source: Vec<f64>, power: f64) -> Self {
        ModelFunction::InverseDistance { source, power }
    }

    /// Dimension this function pins down, if any.
    fn required_dim(&self) -> Option<usize> {
        match self {
            ModelFunction::Monomial { exponents } => Some(exponents.dim()),
            ModelFunction::InverseDistance { source, .. } => Some(source.len()),
            ModelFunction::Constant => None,
            ModelFunction::Sinusoid { frequency, .. } => Some(frequency.len()),
            ModelFunction::Custom { expr } => expr.max_axis().map(|a| a + 1),
        }
    }

    fn check_dim(&self, m: usize) -> Result<()> {
        match (self, self.required_dim()) {
            (ModelFunction::Custom { .. }, Some(d)) if d <= m => Ok(()),
            (ModelFunction::Custom { .. }, Some(d)) => Err(Error::DimensionMismatch {
                expected: m,
                found: d,
            }),
            (_, Some(d)) if d != m => Err(Error::DimensionMismatch {
                expected: m,
                found: d,
            }),
            _ => Ok(()),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x.len())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match self {
            ModelFunction::Monomial { exponents } => exponents.monomial(x),
            ModelFunction::InverseDistance { source, power } => {
                let r = distance_sq(x, source, *power)?.sqrt();
                r.powf(-power)
            }
            ModelFunction::Constant => 1.0,
            ModelFunction::Sinusoid {
                frequency,
                phase,
                flavor,
            } => {
                let u = dot(frequency, x) + phase;
                match flavor {
                    Flavor::Sin => u.sin(),
                    Flavor::Cos => u.cos(),
                }
            }
            ModelFunction::Custom { expr } => expr.eval(x)?,
        })
    }

    /// `D^ζ f(x)`.
    pub fn eval_derivative(&self, zeta: &MultiIndex, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if zeta.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: zeta.dim(),
            });
        }
        if zeta.is_zero() {
            return self.eval(x);
        }
        match self {
            ModelFunction::Monomial { exponents } => Ok(monomial_derivative(exponents, zeta, x)),
            ModelFunction::Constant => Ok(0.0),
            ModelFunction::Sinusoid {
                frequency,
                phase,
                flavor,
            } => {
                let u = dot(frequency, x) + phase;
                let n = zeta.degree();
                let scale: f64 = frequency
                    .iter()
                    .zip(zeta.exponents())
                    .map(|(k, &z)| k.powi(z as i32))
                    .product();
                let shift = match flavor {
                    Flavor::Sin => 0,
                    Flavor::Cos => 1,
                };
                // sin^(n)(u) = sin(u + nπ/2), cos(u) = sin(u + π/2)
                let v = match (n + shift) % 4 {
                    0 => u.sin(),
                    1 => u.cos(),
                    2 => -u.sin(),
                    _ => -u.cos(),
                };
                Ok(scale * v)
            }
            ModelFunction::InverseDistance { source, power } if zeta.degree() <= 2 => {
                inverse_distance_derivative(source, *power, zeta, x)
            }
            _ => finite_difference(|y| self.eval(y), zeta, x),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn distance_sq(x: &[f64], source: &[f64], power: f64) -> Result<f64> {
    if power <= 0.0 || !power.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "inverse-distance power must be positive, got {power}"
        )));
    }
    let s: f64 = x.iter().zip(source).map(|(a, b)| (a - b) * (a - b)).sum();
    if s.sqrt() <= SINGULARITY_RADIUS {
        return Err(Error::Singular(format!(
            "point {x:?} coincides with source {source:?}"
        )));
    }
    Ok(s)
}

pub(crate) fn monomial_derivative(alpha: &MultiIndex, zeta: &MultiIndex, x: &[f64]) -> f64 {
    match alpha.checked_sub(zeta) {
        None => 0.0,
        Some(rest) => {
            let coeff: f64 = alpha
                .exponents()
                .iter()
                .zip(rest.exponents())
                .map(|(&a, &r)| factorial(a) / factorial(r))
                .product();
            coeff * rest.monomial(x)
        }
    }
}

fn inverse_distance_derivative(
    source: &[f64],
    power: f64,
    zeta: &MultiIndex,
    x: &[f64],
) -> Result<f64> {
    let s = distance_sq(x, source, power)?;
    let d: Vec<f64> = x.iter().zip(source).map(|(a, b)| a - b).collect();
    let q = power;
    // f = s^(-q/2);  ∂_i f = -q s^(-q/2-1) d_i
    // ∂_i∂_j f = q(q+2) s^(-q/2-2) d_i d_j - q s^(-q/2-1) δ_ij
    let axes: Vec<usize> = zeta
        .exponents()
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat_n(j, n as usize))
        .collect();
    Ok(match axes.as_slice() {
        [i] => -q * s.powf(-q / 2.0 - 1.0) * d[*i],
        [i, j] => {
            let mut v = q * (q + 2.0) * s.powf(-q / 2.0 - 2.0) * d[*i] * d[*j];
            if i == j {
                v -= q * s.powf(-q / 2.0 - 1.0);
            }
            v
        }
        _ => unreachable!("called with 1 ≤ |ζ| ≤ 2"),
    })
}

/// Second-order central stencil `(offsets, weights)` for a derivative of
/// the given order at unit spacing.
fn central_stencil(order: u32) -> (&'static [i32], &'static [f64]) {
    match order {
        0 => (&[0], &[1.0]),
        1 => (&[-1, 0, 1], &[-0.5, 0.0, 0.5]),
        2 => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        3 => (&[-2, -1, 0, 1, 2], &[-0.5, 1.0, 0.0, -1.0, 0.5]),
        4 => (&[-2, -1, 0, 1, 2], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => unreachable!("order checked by caller"),
    }
}

/// Approximates `D^ζ g(x)` by a tensor product of central differences.
///
/// The step on axis `i` is `ε^(1/(|ζ|+2))·max(1, |x_i|)`, which balances
/// the O(h²) truncation against rounding amplified by `h^(-|ζ|)`.
pub fn finite_difference<G>(g: G, zeta: &MultiIndex, x: &[f64]) -> Result<f64>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    if let Some(&bad) = zeta.exponents().iter().find(|&&k| k > MAX_FD_ORDER) {
        return Err(Error::UnsupportedDerivative(format!(
            "per-axis order {bad} exceeds the finite-difference limit {MAX_FD_ORDER}"
        )));
    }
    let total = zeta.degree();
    let base = f64::EPSILON.powf(1.0 / (total as f64 + 2.0));
    let steps: Vec<f64> = x.iter().map(|xi| base * xi.abs().max(1.0)).collect();
    let stencils: Vec<_> = zeta
        .exponents()
        .iter()
        .map(|&k| central_stencil(k))
        .collect();

    let mut counter = vec![0usize; x.len()];
    let mut acc = 0.0;
    let mut y = x.to_vec();
    loop {
        let mut w = 1.0;
        for (j, (offs, ws)) in stencils.iter().enumerate() {
            w *= ws[counter[j]];
            y[j] = x[j] + offs[counter[j]] as f64 * steps[j];
        }
        if w != 0.0 {
            acc += w * g(&y)?;
        }
        let mut j = 0;
        loop {
            if j == x.len() {
                let denom: f64 = steps
                    .iter()
                    .zip(zeta.exponents())
                    .map(|(h, &k)| h.powi(k as i32))
                    .product();
                return Ok(acc / denom);
            }
            counter[j] += 1;
            if counter[j] < stencils[j].0.len() {
                break;
            }
            counter[j] = 0;
            j += 1;
        }
    }
}

/// Ordered family of basis functions over ℝ^m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecRepr", into = "ModelSpecRepr")]
pub struct ModelSpec {
    dimension: usize,
    functions: Vec<ModelFunction>,
}

#[derive(Serialize, Deserialize)]
struct ModelSpecRepr {
    dimension: usize,
    functions: Vec<ModelFunction>,
}

impl TryFrom<ModelSpecRepr> for ModelSpec {
    type Error = Error;
    fn try_from(r: ModelSpecRepr) -> Result<Self> {
        ModelSpec::new(r.dimension, r.functions)
    }
}

impl From<ModelSpec> for ModelSpecRepr {
    fn from(s: ModelSpec) -> Self {
        ModelSpecRepr {
            dimension: s.dimension,
            functions: s.functions,
        }
    }
}

impl ModelSpec {
    pub fn new(dimension: usize, functions: Vec<ModelFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidArgument(
                "model must contain at least one function".into(),
            ));
        }
        if dimension == 0 {
            return Err(Error::InvalidArgument("model dimension must be ≥ 1".into()));
        }
        for f in &functions {
            f.check_dim(dimension)?;
        }
        Ok(ModelSpec {
            dimension,
            functions,
        })
    }

    /// Monomials over the given exponents, in order.
    pub fn monomials<'a>(
        dimension: usize,
        exponents: impl IntoIterator<Item = &'a MultiIndex>,
    ) -> Result<Self> {
        Self::new(
            dimension,
            exponents
                .into_iter()
                .cloned()
                .map(ModelFunction::monomial)
                .collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[ModelFunction] {
        &self.functions
    }

    /// `(f_1(x), …, f_k(x))`.
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.functions.iter().map(|f| f.eval(x)).collect()
    }

    /// `(D^ζ f_1(x), …, D^ζ f_k(x))`.
    pub fn derivative_all(&self, zeta: &MultiIndex, x: &[f64]) -> Result<Vec<f64>> {
        self.functions
            .iter()
            .map(|f| f.eval_derivative(zeta, x))
            .collect()
    }
}

/// A field with known values and derivatives, used as ground truth.
pub trait Field: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    fn derivative(&self, zeta: &MultiIndex, x: &[f64]) -> Result<f64>;

    /// `b·β` for fields defined by model coefficients.
    fn coefficient_functional(&self, _b: &[f64]) -> Result<f64> {
        Err(Error::InvalidArgument(
            "field does not define model coefficients".into(),
        ))
    }

    /// `β_t`.
    fn coefficient(&self, _index: usize) -> Result<f64> {
        Err(Error::InvalidArgument(
            "field does not define model coefficients".into(),
        ))
    }
}

impl Field for ModelFunction {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }

    fn derivative(&self, zeta: &MultiIndex, x: &[f64]) -> Result<f64> {
        self.eval_derivative(zeta, x)
    }
}

/// `F(x) = Σ β_j f_j(x)` for a concrete coefficient vector.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub model: ModelSpec,
    pub beta: Vec<f64>,
}

impl LinearField {
    pub fn new(model: ModelSpec, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != model.len() {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients for {} functions",
                beta.len(),
                model.len()
            )));
        }
        Ok(LinearField { model, beta })
    }
}

impl Field for LinearField {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.model.eval_all(x)?, &self.beta))
    }

    fn derivative(&self, zeta: &MultiIndex, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.model.derivative_all(zeta, x)?, &self.beta))
    }

    fn coefficient_functional(&self, b: &[f64]) -> Result<f64> {
        if b.len() != self.beta.len() {
            return Err(Error::SizeMismatch(format!(
                "functional of length {} for {} coefficients",
                b.len(),
                self.beta.len()
            )));
        }
        Ok(dot(b, &self.beta))
    }

    fn coefficient(&self, index: usize) -> Result<f64> {
        self.beta.get(index).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "coefficient index {index} out of range for {} functions",
                self.beta.len()
            ))
        })
    }
}

/// Sparse real polynomial in m variables with exact derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(MultiIndex::zeros(dim), c);
        p
    }

    pub fn variable(dim: usize, axis: usize) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(MultiIndex::axis(dim, axis, 1), 1.0);
        p
    }

    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (a, c) in terms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim(),
                });
            }
            p.add_term(a, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    fn add_term(&mut self, a: MultiIndex, c: f64) {
        let e = self.terms.entry(a.clone()).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&a);
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (a, &c) in &other.terms {
            p.add_term(a.clone(), c);
        }
        p
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = Self::zero(self.dim);
        for (a, &c) in &self.terms {
            p.add_term(a.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Self::zero(self.dim);
        for (a, &c) in &self.terms {
            for (b, &d) in &other.terms {
                let e: Vec<u32> = a
                    .exponents()
                    .iter()
                    .zip(b.exponents())
                    .map(|(x, y)| x + y)
                    .collect();
                p.add_term(MultiIndex::new(e), c * d);
            }
        }
        p
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        (0..n).fold(Self::constant(self.dim, 1.0), |acc, _| acc.mul(self))
    }

    /// Parses expressions such as `(x-1)^3 + (y-1)^3` or `2*x1*x2 - 0.5`.
    ///
    /// Variables are `x`, `y`, `z` (for m ≤ 3) or `x1 … xm`; powers take
    /// non-negative integer exponents.
    pub fn parse(src: &str, dim: usize) -> Result<Polynomial> {
        let tokens = tokenize(src)?;
        let mut parser = PolyParser {
            tokens,
            pos: 0,
            dim,
        };
        let p = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input at token {}",
                parser.pos
            )));
        }
        Ok(p)
    }
}

impl Field for Polynomial {
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.terms.iter().map(|(a, c)| c * a.monomial(x)).sum())
    }

    fn derivative(&self, zeta: &MultiIndex, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim || zeta.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len().max(zeta.dim()),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(a, c)| c * monomial_derivative(a, zeta, x))
            .sum())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Var(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token::Num(
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad number '{s}'")))?,
            ));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Var(chars[start..i].iter().collect()));
        } else if "+-*^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct PolyParser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl PolyParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.add(&self.term()?.scale(-1.0));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        while self.eat('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial> {
        if self.eat('-') {
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.eat('^') {
            match self.tokens.get(self.pos).cloned() {
                Some(Token::Num(n)) if n >= 0.0 && n.fract() == 0.0 && n <= 64.0 => {
                    self.pos += 1;
                    Ok(base.pow(n as u32))
                }
                other => Err(Error::Parse(format!(
                    "exponent must be a non-negative integer, found {other:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(n)) => {
                self.pos += 1;
                Ok(Polynomial::constant(self.dim, n))
            }
            Some(Token::Var(name)) => {
                self.pos += 1;
                let axis = variable_axis(&name, self.dim)?;
                Ok(Polynomial::variable(self.dim, axis))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let p = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(p)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

fn variable_axis(name: &str, dim: usize) -> Result<usize> {
    let axis = match name {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => name
            .strip_prefix('x')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| n - 1)
            .ok_or_else(|| Error::Parse(format!("unknown variable '{name}'")))?,
    };
    if axis >= dim {
        return Err(Error::Parse(format!(
            "variable '{name}' needs dimension {}, field has {dim}",
            axis + 1
        )));
    }
    Ok(axis)
}
