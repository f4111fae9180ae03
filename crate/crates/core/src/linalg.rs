//! Evaluation matrices (Vandermonde, alternant, design) and the dense
//! factorizations behind every estimator.
//!
//! Rows always index sensor points and columns index basis functions.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::multiindex::LowerSet;
use crate::placement::PointSet;

/// Relative residual a square solve must meet.
pub const SOLVE_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Relative size of `P_𝒩 b` below which a functional counts as error-free.
pub const ERROR_FREE_TOLERANCE: f64 = 1e-8;

/// Condition number above which results carry a warning.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Vandermonde,
    Alternant,
    Design,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnSet {
    Monomials(LowerSet),
    Functions(ModelSpec),
}

/// A p×k evaluation matrix together with what produced it.
#[derive(Clone, Debug)]
pub struct SystemMatrix {
    entries: DMatrix<f64>,
    points: PointSet,
    columns: ColumnSet,
    kind: MatrixKind,
}

impl SystemMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn columns(&self) -> &ColumnSet {
        &self.columns
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn rank_report(&self) -> RankReport {
        rank_report(&self.entries, None)
    }

    /// Row-major CSV with 17 significant digits and no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn check_dims(x: &PointSet, m: usize) -> Result<()> {
    if x.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: x.dim(),
        });
    }
    Ok(())
}

/// `V_{ik} = (x_i − shift)^{α_k}`.
pub fn build_vandermonde(
    x: &PointSet,
    l: &LowerSet,
    shift: Option<&[f64]>,
) -> Result<SystemMatrix> {
    if x.len() != l.len() {
        return Err(Error::SizeMismatch(format!(
            "{} points for a lower set of {} elements",
            x.len(),
            l.len()
        )));
    }
    check_dims(x, l.dim())?;
    let points = match shift {
        Some(s) => x.shifted(s)?,
        None => x.clone(),
    };
    let entries = vandermonde_entries(&points, l);
    Ok(SystemMatrix {
        entries,
        points: x.clone(),
        columns: ColumnSet::Monomials(l.clone()),
        kind: MatrixKind::Vandermonde,
    })
}

pub(crate) fn vandermonde_entries(points: &PointSet, l: &LowerSet) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), l.len(), |i, k| {
        l.elements()[k].monomial(points.point(i))
    })
}

fn evaluation_entries(x: &PointSet, f: &ModelSpec) -> Result<DMatrix<f64>> {
    check_dims(x, f.dimension())?;
    let mut entries = DMatrix::zeros(x.len(), f.len());
    for (i, p) in x.iter().enumerate() {
        for (j, func) in f.functions().iter().enumerate() {
            entries[(i, j)] = func.eval(p)?;
        }
    }
    Ok(entries)
}

/// Square matrix `A_{ij} = f_j(x_i)`.
pub fn build_alternant(x: &PointSet, f: &ModelSpec) -> Result<SystemMatrix> {
    if x.len() != f.len() {
        return Err(Error::SizeMismatch(format!(
            "{} points for {} model functions",
            x.len(),
            f.len()
        )));
    }
    Ok(SystemMatrix {
        entries: evaluation_entries(x, f)?,
        points: x.clone(),
        columns: ColumnSet::Functions(f.clone()),
        kind: MatrixKind::Alternant,
    })
}

/// Rectangular design matrix with `p ≥ k`.
pub fn build_design(x: &PointSet, f: &ModelSpec) -> Result<SystemMatrix> {
    if x.len() < f.len() {
        return Err(Error::SizeMismatch(format!(
            "design matrix needs at least as many points as functions ({} < {})",
            x.len(),
            f.len()
        )));
    }
    Ok(SystemMatrix {
        entries: evaluation_entries(x, f)?,
        points: x.clone(),
        columns: ColumnSet::Functions(f.clone()),
        kind: MatrixKind::Design,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub numerical_rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `σ_max / σ_rank`, infinite when the rank is zero.
    pub condition_number: f64,
    pub tolerance_used: f64,
}

impl RankReport {
    pub fn is_full_rank(&self, expected: usize) -> bool {
        self.numerical_rank == expected
    }
}

fn default_tolerance(p: usize, k: usize, sigma_max: f64) -> f64 {
    p.max(k) as f64 * f64::EPSILON * sigma_max
}

/// Singular values, numerical rank and condition number of `a`.
///
/// The tolerance defaults to `max(p,k)·ε·σ_max`.
pub fn rank_report(a: &DMatrix<f64>, tolerance: Option<f64>) -> RankReport {
    let sv = a.singular_values();
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tol = tolerance.unwrap_or_else(|| default_tolerance(a.nrows(), a.ncols(), sigma_max));
    let rank = singular_values.iter().filter(|&&s| s > tol).count();
    let condition_number = if rank == 0 {
        f64::INFINITY
    } else {
        sigma_max / singular_values[rank - 1]
    };
    RankReport {
        numerical_rank: rank,
        singular_values,
        condition_number,
        tolerance_used: tol,
    }
}

/// Solves `M c = rhs` (or `Mᵀ c = rhs`) for square, numerically
/// nonsingular `M` by column-pivoted QR with one refinement step.
pub fn solve(m: &SystemMatrix, transpose: bool, rhs: &[f64]) -> Result<Vec<f64>> {
    solve_dense(m.entries(), transpose, rhs).map(|(c, _)| c)
}

/// Like [`solve`] on a raw matrix, also returning the rank report.
pub(crate) fn solve_dense(
    a: &DMatrix<f64>,
    transpose: bool,
    rhs: &[f64],
) -> Result<(Vec<f64>, RankReport)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::SizeMismatch(format!(
            "solve needs a square matrix, got {}×{}",
            n,
            a.ncols()
        )));
    }
    if rhs.len() != n {
        return Err(Error::SizeMismatch(format!(
            "right-hand side of length {} for a {n}×{n} system",
            rhs.len()
        )));
    }
    let report = rank_report(a, None);
    if report.numerical_rank < n {
        return Err(Error::RankDeficient {
            rank: report.numerical_rank,
            expected: n,
        });
    }
    let m = if transpose { a.transpose() } else { a.clone() };
    let b = DVector::from_column_slice(rhs);
    let qr = m.clone().col_piv_qr();
    let mut c = qr.solve(&b).ok_or_else(|| Error::RankDeficient {
        rank: n - 1,
        expected: n,
    })?;
    let r = &b - &m * &c;
    if let Some(dc) = qr.solve(&r) {
        c += dc;
    }
    let residual = (&m * &c - &b).norm();
    let tolerance = SOLVE_RESIDUAL_TOLERANCE * b.norm();
    if residual > tolerance {
        return Err(Error::ExcessiveResidual {
            residual,
            tolerance,
        });
    }
    Ok((c.iter().copied().collect(), report))
}

/// Noise covariance Ω of the sensor readings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    #[default]
    Identity,
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

/// Lower-triangular `L` with `Ω = L Lᵀ`.
#[derive(Clone, Debug)]
enum WeightFactor {
    Identity,
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl Weights {
    /// Checks Ω is p×p and symmetric positive definite.
    pub fn validate(&self, p: usize) -> Result<()> {
        self.factor(p).map(|_| ())
    }

    fn factor(&self, p: usize) -> Result<WeightFactor> {
        match self {
            Weights::Identity => Ok(WeightFactor::Identity),
            Weights::Diagonal(d) => {
                if d.len() != p {
                    return Err(Error::SizeMismatch(format!(
                        "{} diagonal weights for {p} sensors",
                        d.len()
                    )));
                }
                if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::NotPositiveDefinite(format!(
                        "diagonal entry {v} is not positive"
                    )));
                }
                Ok(WeightFactor::Diagonal(d.iter().map(|v| v.sqrt()).collect()))
            }
            Weights::Full(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::SizeMismatch(format!(
                        "weight matrix must be {p}×{p}"
                    )));
                }
                let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NotPositiveDefinite("non-finite entry".into()));
                }
                let scale = m.amax().max(f64::MIN_POSITIVE);
                for i in 0..p {
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                            return Err(Error::NotPositiveDefinite(format!(
                                "entries ({i},{j}) and ({j},{i}) differ"
                            )));
                        }
                    }
                }
                let chol = m.cholesky().ok_or_else(|| {
                    Error::NotPositiveDefinite("Cholesky factorization failed".into())
                })?;
                Ok(WeightFactor::Full(chol.unpack()))
            }
        }
    }
}

impl WeightFactor {
    /// `L⁻¹ X`.
    fn whiten(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            WeightFactor::Identity => x.clone(),
            WeightFactor::Diagonal(s) => {
                let mut y = x.clone();
                for (i, si) in s.iter().enumerate() {
                    y.row_mut(i).scale_mut(1.0 / si);
                }
                y
            }
            WeightFactor::Full(l) => l
                .solve_lower_triangular(x)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }

    /// `L⁻ᵀ v`.
    fn unwhiten_transpose(&self, v: DVector<f64>) -> DVector<f64> {
        match self {
            WeightFactor::Identity => v,
            WeightFactor::Diagonal(s) => {
                DVector::from_iterator(v.len(), v.iter().zip(s).map(|(a, b)| a / b))
            }
            WeightFactor::Full(l) => l
                .tr_solve_lower_triangular(&v)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }
}

/// Full SVD pieces of a whitened design matrix.
struct Decomposition {
    /// p×r left singular vectors.
    u: DMatrix<f64>,
    /// Descending, all k of them (zeros padded when p < k).
    sigma: Vec<f64>,
    /// k×k, rows are right singular vectors.
    v_t: DMatrix<f64>,
    rank: usize,
    tolerance: f64,
}

fn decompose(x: &DMatrix<f64>) -> Decomposition {
    let (p, k) = x.shape();
    // Padding with zero rows keeps the kernel and singular values while
    // making nalgebra return a complete k×k right factor.
    let padded = if p < k {
        let mut m = DMatrix::zeros(k, k);
        m.rows_mut(0, p).copy_from(x);
        m
    } else {
        x.clone()
    };
    let svd = padded.svd(true, true);
    let u_full = svd.u.expect("requested U");
    let v_t_full = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let tolerance = default_tolerance(p, k, sigma_max);
    let rank = sigma.iter().filter(|&&s| s > tolerance).count();
    let u = DMatrix::from_fn(p, rank, |i, j| u_full[(i, order[j])]);
    let v_t = DMatrix::from_fn(k, k, |i, j| v_t_full[(order[i], j)]);
    Decomposition {
        u,
        sigma,
        v_t,
        rank,
        tolerance,
    }
}

/// Orthonormal bases for the kernel 𝒩 of a design matrix and for 𝒩^⊥.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorSubspaceReport {
    pub null_basis: Vec<Vec<f64>>,
    pub error_free_basis: Vec<Vec<f64>>,
    pub rank: RankReport,
}

impl ErrorSubspaceReport {
    /// `P_𝒩 b`.
    pub fn project_onto_null(&self, b: &[f64]) -> Vec<f64> {
        project(&self.null_basis, b)
    }
}

fn project(basis: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; b.len()];
    for v in basis {
        let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
        for (o, vi) in out.iter_mut().zip(v) {
            *o += d * vi;
        }
    }
    out
}

fn subspace_report(d: &Decomposition, k: usize) -> ErrorSubspaceReport {
    let row = |i: usize| d.v_t.row(i).iter().copied().collect::<Vec<f64>>();
    let sigma_max = d.sigma.first().copied().unwrap_or(0.0);
    ErrorSubspaceReport {
        null_basis: (d.rank..k).map(row).collect(),
        error_free_basis: (0..d.rank).map(row).collect(),
        rank: RankReport {
            numerical_rank: d.rank,
            singular_values: d.sigma.clone(),
            condition_number: if d.rank == 0 {
                f64::INFINITY
            } else {
                sigma_max / d.sigma[d.rank - 1]
            },
            tolerance_used: d.tolerance,
        },
    }
}

/// Kernel and error-free subspace of `m` after whitening by Ω.
pub fn error_subspace(m: &SystemMatrix, weights: &Weights) -> Result<ErrorSubspaceReport> {
    error_subspace_dense(m.entries(), weights)
}

pub(crate) fn error_subspace_dense(
    x: &DMatrix<f64>,
    weights: &Weights,
) -> Result<ErrorSubspaceReport> {
    let factor = weights.factor(x.nrows())?;
    let d = decompose(&factor.whiten(x));
    Ok(subspace_report(&d, x.ncols()))
}

/// Result of applying the weighted pseudo-inverse to a target functional.
#[derive(Clone, Debug, Serialize)]
pub struct GlsSolution {
    /// Sensor weights with `c·F = b·β̂`.
    pub c: Vec<f64>,
    pub error_free: bool,
    /// `P_𝒩 b`; zero when `error_free`.
    pub bias_direction: Vec<f64>,
    pub condition_number: f64,
    pub rank: usize,
    pub warnings: Vec<String>,
}

/// `c = Ω⁻¹X(XᵀΩ⁻¹X)⁺b`, computed through the SVD of the whitened matrix.
pub fn weighted_pseudo_inverse_apply(
    m: &SystemMatrix,
    weights: &Weights,
    b: &[f64],
) -> Result<GlsSolution> {
    weighted_pseudo_inverse_dense(m.entries(), weights, b)
}

pub(crate) fn weighted_pseudo_inverse_dense(
    x: &DMatrix<f64>,
    weights: &Weights,
    b: &[f64],
) -> Result<GlsSolution> {
    let (p, k) = x.shape();
    if b.len() != k {
        return Err(Error::SizeMismatch(format!(
            "functional of length {} for {k} model functions",
            b.len()
        )));
    }
    let factor = weights.factor(p)?;
    let d = decompose(&factor.whiten(x));
    let bv = DVector::from_column_slice(b);

    let r = d.rank;
    let vb = d.v_t.rows(0, r) * &bv;
    let scaled = DVector::from_iterator(r, vb.iter().zip(&d.sigma).map(|(v, s)| v / s));
    let c = factor.unwhiten_transpose(&d.u * scaled);

    let report = subspace_report(&d, k);
    let bias = report.project_onto_null(b);
    let bias_norm = bias.iter().map(|v| v * v).sum::<f64>().sqrt();
    let error_free = bias_norm <= ERROR_FREE_TOLERANCE * bv.norm();

    let mut warnings = Vec::new();
    if !error_free {
        warnings.push(format!(
            "target has a component of norm {bias_norm:.3e} in the model kernel; the estimate is biased by the corresponding coefficients"
        ));
    }
    let condition_number = report.rank.condition_number;
    if condition_number > CONDITION_WARNING {
        warnings.push(format!(
            "condition number {condition_number:.3e} exceeds {CONDITION_WARNING:e}"
        ));
    }
    Ok(GlsSolution {
        c: c.iter().copied().collect(),
        error_free,
        bias_direction: if error_free { vec![0.0; k] } else { bias },
        condition_number,
        rank: r,
        warnings,
    })
}
