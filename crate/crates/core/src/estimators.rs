//! Synthesis of sensor weight vectors `c` such that `c·F` estimates a
//! target property of the field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    build_alternant, build_design, solve_dense, vandermonde_entries, weighted_pseudo_inverse_dense,
    GlsSolution, Weights, CONDITION_WARNING,
};
use crate::model::{Field, ModelSpec};
use crate::multiindex::{LowerSet, MultiIndex};
use crate::placement::PointSet;

/// What an estimator is meant to estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Interpolate { point: Vec<f64> },
    Derivative { point: Vec<f64>, order: MultiIndex },
    Isolate { index: usize },
    LinearFunctional { b: Vec<f64> },
    Combination { terms: Vec<WeightedTarget> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTarget {
    pub weight: f64,
    pub target: TargetSpec,
}

impl TargetSpec {
    /// Structural checks against the field dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_point = |p: &[f64]| -> Result<()> {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("target point must be finite".into()));
            }
            Ok(())
        };
        match self {
            TargetSpec::Interpolate { point } => check_point(point),
            TargetSpec::Derivative { point, order } => {
                check_point(point)?;
                if order.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: order.dim(),
                    });
                }
                Ok(())
            }
            TargetSpec::Isolate { .. } => Ok(()),
            TargetSpec::LinearFunctional { b } => {
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("functional must be finite".into()));
                }
                Ok(())
            }
            TargetSpec::Combination { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidArgument("empty combination".into()));
                }
                for t in terms {
                    if !t.weight.is_finite() {
                        return Err(Error::InvalidArgument(
                            "combination weight must be finite".into(),
                        ));
                    }
                    t.target.validate(dim)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMethod {
    /// Expand about the target point.
    #[default]
    Direct,
    /// Expand about the sensor closest to the target in the ∞-norm.
    NearestSensor,
}

/// Construction route recorded on an estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    NearestSensor,
    Isolation,
    ModelEval,
    Gls,
    Combination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub c: Vec<f64>,
    pub target: TargetSpec,
    pub condition_number: f64,
    pub error_free: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_direction: Option<Vec<f64>>,
    pub method: Method,
    /// Per-axis factors the coordinates were divided by before solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Estimator {
    /// `c·F`.
    pub fn apply(&self, field_values: &[f64]) -> Result<f64> {
        if field_values.len() != self.c.len() {
            return Err(Error::SizeMismatch(format!(
                "{} field values for {} sensors",
                field_values.len(),
                self.c.len()
            )));
        }
        Ok(self.c.iter().zip(field_values).map(|(a, b)| a * b).sum())
    }

    fn condition_warning(mut self) -> Self {
        if self.condition_number > CONDITION_WARNING
            && !self
                .warnings
                .iter()
                .any(|w| w.starts_with("condition number"))
        {
            self.warnings.push(format!(
                "condition number {:.3e} exceeds {CONDITION_WARNING:e}",
                self.condition_number
            ));
        }
        self
    }

    fn from_gls(sol: GlsSolution, target: TargetSpec) -> Self {
        Estimator {
            c: sol.c,
            target,
            condition_number: sol.condition_number,
            error_free: sol.error_free,
            bias_direction: (!sol.error_free).then_some(sol.bias_direction),
            method: Method::Gls,
            scaling: None,
            warnings: sol.warnings,
        }
    }
}

/// Interpolation of `F(x_t)` from a Vandermonde system over `l`.
pub fn interpolation_estimator(
    x: &PointSet,
    l: &LowerSet,
    x_t: &[f64],
    method: InterpolationMethod,
) -> Result<Estimator> {
    let zeta = MultiIndex::zeros(x_t.len());
    let mut e = derivative_estimator(x, l, x_t, &zeta, method)?;
    e.target = TargetSpec::Interpolate {
        point: x_t.to_vec(),
    };
    Ok(e)
}

/// Estimator of `D^ζ F(x_t)` from a Vandermonde system over `l`.
///
/// Coordinates are shifted to the expansion point and divided per axis by
/// the largest offset before solving; the right-hand side absorbs the
/// chain-rule factor so `c` refers to the original coordinates.
pub fn derivative_estimator(
    x: &PointSet,
    l: &LowerSet,
    x_t: &[f64],
    zeta: &MultiIndex,
    method: InterpolationMethod,
) -> Result<Estimator> {
    if x.len() != l.len() {
        return Err(Error::SizeMismatch(format!(
            "{} sensors for a lower set of {} elements",
            x.len(),
            l.len()
        )));
    }
    let m = l.dim();
    for d in [x.dim(), x_t.len(), zeta.dim()] {
        if d != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: d,
            });
        }
    }
    let target = TargetSpec::Derivative {
        point: x_t.to_vec(),
        order: zeta.clone(),
    };

    let (center, offset): (Vec<f64>, Vec<f64>) = match method {
        InterpolationMethod::Direct => {
            if !l.contains(zeta) {
                return Err(Error::UnsupportedDerivative(format!(
                    "derivative order {zeta} is not in the lower set"
                )));
            }
            (x_t.to_vec(), vec![0.0; m])
        }
        InterpolationMethod::NearestSensor => {
            let j = nearest_sensor(x, x_t);
            let xm = x.point(j).to_vec();
            let d = x_t.iter().zip(&xm).map(|(a, b)| a - b).collect();
            (xm, d)
        }
    };

    let shifted = x.shifted(&center)?;
    let scale: Vec<f64> = (0..m)
        .map(|j| {
            let s = shifted.iter().map(|p| p[j].abs()).fold(0.0, f64::max);
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let unit = PointSet::new(
        shifted
            .iter()
            .map(|p| p.iter().zip(&scale).map(|(v, s)| v / s).collect())
            .collect(),
    )?;

    let rhs: Vec<f64> = l
        .iter()
        .map(|alpha| match alpha.checked_sub(zeta) {
            None => 0.0,
            Some(rest) => {
                let ratio: f64 = alpha
                    .exponents()
                    .iter()
                    .zip(rest.exponents())
                    .map(|(&a, &r)| {
                        crate::multiindex::factorial(a) / crate::multiindex::factorial(r)
                    })
                    .product();
                ratio * rest.monomial(&offset) / alpha.monomial(&scale)
            }
        })
        .collect();
    if rhs.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "no element of the lower set dominates {zeta}; the estimator would be identically zero"
        )));
    }

    let v = vandermonde_entries(&unit, l);
    let (c, report) = solve_dense(&v, true, &rhs)?;
    Ok(Estimator {
        c,
        target,
        condition_number: report.condition_number,
        error_free: true,
        bias_direction: None,
        method: match method {
            InterpolationMethod::Direct => Method::Direct,
            InterpolationMethod::NearestSensor => Method::NearestSensor,
        },
        scaling: Some(scale),
        warnings: Vec::new(),
    }
    .condition_warning())
}

/// Index of the sensor closest to `x_t` in the ∞-norm, lowest index on ties.
pub fn nearest_sensor(x: &PointSet, x_t: &[f64]) -> usize {
    let dist = |p: &[f64]| {
        p.iter()
            .zip(x_t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let mut best = 0;
    let mut best_d = dist(x.point(0));
    for (i, p) in x.iter().enumerate().skip(1) {
        let d = dist(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Solves `Aᵀc = b` on the square alternant, falling back to the
/// pseudo-inverse with a bias report when `A` is singular.
fn square_functional(
    x: &PointSet,
    f: &ModelSpec,
    b: &[f64],
    target: TargetSpec,
    method: Method,
) -> Result<Estimator> {
    let a = build_alternant(x, f)?;
    match solve_dense(a.entries(), true, b) {
        Ok((c, report)) => Ok(Estimator {
            c,
            target,
            condition_number: report.condition_number,
            error_free: true,
            bias_direction: None,
            method,
            scaling: None,
            warnings: Vec::new(),
        }
        .condition_warning()),
        Err(Error::RankDeficient { rank, expected }) => {
            let sol = weighted_pseudo_inverse_dense(a.entries(), &Weights::Identity, b)?;
            let mut e = Estimator::from_gls(sol, target);
            e.warnings.insert(
                0,
                format!(
                    "alternant has rank {rank} of {expected}; using the least-squares estimator"
                ),
            );
            Ok(e)
        }
        Err(e) => Err(e),
    }
}

fn unit_vector(k: usize, t: usize) -> Result<Vec<f64>> {
    if t >= k {
        return Err(Error::InvalidArgument(format!(
            "signal index {t} out of range for {k} model functions"
        )));
    }
    let mut e = vec![0.0; k];
    e[t] = 1.0;
    Ok(e)
}

/// Estimator of the single coefficient `β_t`.
pub fn isolation_estimator(x: &PointSet, f: &ModelSpec, t: usize) -> Result<Estimator> {
    let b = unit_vector(f.len(), t)?;
    square_functional(
        x,
        f,
        &b,
        TargetSpec::Isolate { index: t },
        Method::Isolation,
    )
}

/// Estimator of the in-model value `D^ζ F(x_t)`.
pub fn model_eval_estimator(
    x: &PointSet,
    f: &ModelSpec,
    x_t: &[f64],
    zeta: &MultiIndex,
) -> Result<Estimator> {
    let b = f.derivative_all(zeta, x_t)?;
    let target = if zeta.is_zero() {
        TargetSpec::Interpolate {
            point: x_t.to_vec(),
        }
    } else {
        TargetSpec::Derivative {
            point: x_t.to_vec(),
            order: zeta.clone(),
        }
    };
    square_functional(x, f, &b, target, Method::ModelEval)
}

/// Generalized least-squares estimator of `b·β`.
pub fn gls_estimator(
    x: &PointSet,
    f: &ModelSpec,
    weights: &Weights,
    b: &[f64],
) -> Result<Estimator> {
    let d = build_design(x, f)?;
    let sol = weighted_pseudo_inverse_dense(d.entries(), weights, b)?;
    Ok(Estimator::from_gls(
        sol,
        TargetSpec::LinearFunctional { b: b.to_vec() },
    ))
}

/// `c = Σ w_i c_i`.
pub fn combine(terms: &[(f64, &Estimator)]) -> Result<Estimator> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to combine".into()))?;
    let p = first.c.len();
    let mut c = vec![0.0; p];
    let mut bias: Option<Vec<f64>> = None;
    let mut warnings = Vec::new();
    for (w, e) in terms {
        if e.c.len() != p {
            return Err(Error::SizeMismatch(format!(
                "combining estimators over {} and {} sensors",
                p,
                e.c.len()
            )));
        }
        for (ci, ei) in c.iter_mut().zip(&e.c) {
            *ci += w * ei;
        }
        if let Some(bd) = &e.bias_direction {
            let acc = bias.get_or_insert_with(|| vec![0.0; bd.len()]);
            if acc.len() == bd.len() {
                for (a, b) in acc.iter_mut().zip(bd) {
                    *a += w * b;
                }
            }
        }
        for msg in &e.warnings {
            if !warnings.contains(msg) {
                warnings.push(msg.clone());
            }
        }
    }
    Ok(Estimator {
        c,
        target: TargetSpec::Combination {
            terms: terms
                .iter()
                .map(|(w, e)| WeightedTarget {
                    weight: *w,
                    target: e.target.clone(),
                })
                .collect(),
        },
        condition_number: terms
            .iter()
            .map(|(_, e)| e.condition_number)
            .fold(0.0, f64::max),
        error_free: terms.iter().all(|(_, e)| e.error_free),
        bias_direction: bias,
        method: Method::Combination,
        scaling: None,
        warnings,
    })
}

/// Exact value of a target under a known field.
pub fn target_value(target: &TargetSpec, field: &dyn Field) -> Result<f64> {
    match target {
        TargetSpec::Interpolate { point } => field.value(point),
        TargetSpec::Derivative { point, order } => field.derivative(order, point),
        TargetSpec::Isolate { index } => field.coefficient(*index),
        TargetSpec::LinearFunctional { b } => field.coefficient_functional(b),
        TargetSpec::Combination { terms } => {
            let mut s = 0.0;
            for t in terms {
                s += t.weight * target_value(&t.target, field)?;
            }
            Ok(s)
        }
    }
}

/// `|c·F_true − target_true|`.
pub fn residual(e: &Estimator, x: &PointSet, field: &dyn Field) -> Result<f64> {
    let values = x
        .iter()
        .map(|p| field.value(p))
        .collect::<Result<Vec<f64>>>()?;
    Ok((e.apply(&values)? - target_value(&e.target, field)?).abs())
}

/// Basis the estimators are built over.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Monomials(LowerSet),
    Functions(ModelSpec),
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Monomials(l) => l.len(),
            Basis::Functions(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        match self {
            Basis::Monomials(l) => ModelSpec::monomials(l.dim(), l.iter()),
            Basis::Functions(f) => Ok(f.clone()),
        }
    }
}

/// Everything needed to route a [`TargetSpec`] to the right construction.
#[derive(Clone, Debug)]
pub struct EstimationContext {
    pub points: PointSet,
    pub basis: Basis,
    pub weights: Weights,
    pub method: InterpolationMethod,
}

impl EstimationContext {
    pub fn new(points: PointSet, basis: Basis) -> Self {
        EstimationContext {
            points,
            basis,
            weights: Weights::Identity,
            method: InterpolationMethod::Direct,
        }
    }

    pub fn estimate(&self, target: &TargetSpec) -> Result<Estimator> {
        target.validate(self.points.dim())?;
        let p = self.points.len();
        let k = self.basis.len();
        if p < k {
            return Err(Error::SizeMismatch(format!(
                "{p} sensors cannot determine {k} model coefficients"
            )));
        }
        let square = p == k;
        match target {
            TargetSpec::Combination { terms } => {
                let parts = terms
                    .iter()
                    .map(|t| self.estimate(&t.target))
                    .collect::<Result<Vec<_>>>()?;
                let pairs: Vec<(f64, &Estimator)> =
                    terms.iter().map(|t| t.weight).zip(parts.iter()).collect();
                let mut e = combine(&pairs)?;
                e.target = target.clone();
                Ok(e)
            }
            TargetSpec::Interpolate { point } | TargetSpec::Derivative { point, .. } => {
                let zeta = match target {
                    TargetSpec::Derivative { order, .. } => order.clone(),
                    _ => MultiIndex::zeros(point.len()),
                };
                if let (Basis::Monomials(l), true) = (&self.basis, square) {
                    match derivative_estimator(&self.points, l, point, &zeta, self.method) {
                        Err(Error::RankDeficient { .. }) => {}
                        other => {
                            return other.map(|mut e| {
                                e.target = target.clone();
                                e
                            })
                        }
                    }
                }
                let f = self.basis.model_spec()?;
                let mut e = if square {
                    model_eval_estimator(&self.points, &f, point, &zeta)?
                } else {
                    let b = f.derivative_all(&zeta, point)?;
                    gls_estimator(&self.points, &f, &self.weights, &b)?
                };
                e.target = target.clone();
                Ok(e)
            }
            TargetSpec::Isolate { index } => {
                let f = self.basis.model_spec()?;
                if square {
                    isolation_estimator(&self.points, &f, *index)
                } else {
                    let b = unit_vector(k, *index)?;
                    let mut e = gls_estimator(&self.points, &f, &self.weights, &b)?;
                    e.target = target.clone();
                    Ok(e)
                }
            }
            TargetSpec::LinearFunctional { b } => {
                let f = self.basis.model_spec()?;
                if b.len() != k {
                    return Err(Error::SizeMismatch(format!(
                        "functional of length {} for {k} model functions",
                        b.len()
                    )));
                }
                if square {
                    square_functional(&self.points, &f, b, target.clone(), Method::ModelEval)
                } else {
                    gls_estimator(&self.points, &f, &self.weights, b)
                }
            }
        }
    }
}
