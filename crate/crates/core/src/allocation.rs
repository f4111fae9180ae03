//! Splitting a resource budget `N` across sensors to minimize the variance
//! of `c·F`, and a seeded Monte Carlo check of the variance model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest trial count [`monte_carlo_variance`] accepts.
pub const MIN_TRIALS: u64 = 10_000;

const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Entangled across sensors: variance `‖c‖₁²/(mN²)`.
    NonlocalQuantum,
    /// Entangled within each sensor: variance `‖c‖_{2/3}²/(mN²)`.
    LocalQuantum,
    /// Independent probes: variance `‖c‖₁²/(mN)`.
    LocalClassical,
    /// Minimizes `Σ|a_j|^q / n_j^p`.
    General { p: f64, q: f64 },
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::NonlocalQuantum => "nonlocal_quantum".into(),
            Strategy::LocalQuantum => "local_quantum".into(),
            Strategy::LocalClassical => "local_classical".into(),
            Strategy::General { p, q } => format!("general(p={p},q={q})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub strategy: Strategy,
    pub n: Vec<f64>,
    pub variance: f64,
    pub repetitions: u32,
}

/// `(Σ|v_i|^p)^{1/p}`; a quasi-norm when `p < 1`.
pub fn pnorm(v: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "p-norm needs p > 0, got {p}"
        )));
    }
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    // Factor out the largest entry to keep |v_i/max|^p in range.
    let s: f64 = v.iter().map(|x| (x.abs() / max).powf(p)).sum();
    Ok(max * s.powf(1.0 / p))
}

fn check_inputs(a: &[f64], total: f64) -> Result<()> {
    if a.is_empty() || a.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("coefficient vector is zero".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "total resources must be positive, got {total}"
        )));
    }
    Ok(())
}

/// Minimizer of `Σ|a_j|^q / b_j^p` subject to `Σ b_j = N`:
/// `b_j = N|a_j|^s / Σ|a_i|^s` with `s = q/(p+1)`, attaining
/// `(Σ|a_i|^s)^{p+1} / N^p`.
pub fn allocate_general(a: &[f64], total: f64, p: f64, q: f64) -> Result<AllocationResult> {
    check_inputs(a, total)?;
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponents must be positive, got p={p}, q={q}"
        )));
    }
    let s = q / (p + 1.0);
    let max = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let w: Vec<f64> = a.iter().map(|x| (x.abs() / max).powf(s)).collect();
    let sum: f64 = w.iter().sum();
    let n = w
        .iter()
        .zip(a)
        .map(|(wi, ai)| if *ai == 0.0 { 0.0 } else { total * wi / sum })
        .collect();
    // Σ|a|^s = max^s·sum, raised to p+1 gives max^q·sum^{p+1}
    let variance = max.powf(q) * sum.powf(p + 1.0) / total.powf(p);
    Ok(AllocationResult {
        strategy: Strategy::General { p, q },
        n,
        variance,
        repetitions: 1,
    })
}

fn check_repetitions(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "repetitions must be at least 1".into(),
        ));
    }
    Ok(())
}

pub fn nonlocal_allocation(c: &[f64], total: f64, m: u32) -> Result<AllocationResult> {
    check_inputs(c, total)?;
    check_repetitions(m)?;
    let l1 = pnorm(c, 1.0)?;
    Ok(AllocationResult {
        strategy: Strategy::NonlocalQuantum,
        n: c.iter().map(|x| total * x.abs() / l1).collect(),
        variance: l1 * l1 / (m as f64 * total * total),
        repetitions: m,
    })
}

pub fn local_allocation(c: &[f64], total: f64, m: u32) -> Result<AllocationResult> {
    check_repetitions(m)?;
    let mut r = allocate_general(c, total, 2.0, 2.0)?;
    r.strategy = Strategy::LocalQuantum;
    r.variance /= m as f64;
    r.repetitions = m;
    Ok(r)
}

pub fn local_classical_allocation(c: &[f64], total: f64, m: u32) -> Result<AllocationResult> {
    check_repetitions(m)?;
    let mut r = allocate_general(c, total, 1.0, 2.0)?;
    r.strategy = Strategy::LocalClassical;
    r.variance /= m as f64;
    r.repetitions = m;
    Ok(r)
}

pub fn allocate(strategy: Strategy, c: &[f64], total: f64, m: u32) -> Result<AllocationResult> {
    match strategy {
        Strategy::NonlocalQuantum => nonlocal_allocation(c, total, m),
        Strategy::LocalQuantum => local_allocation(c, total, m),
        Strategy::LocalClassical => local_classical_allocation(c, total, m),
        Strategy::General { p, q } => {
            check_repetitions(m)?;
            let mut r = allocate_general(c, total, p, q)?;
            r.variance /= m as f64;
            r.repetitions = m;
            Ok(r)
        }
    }
}

/// `Var_L / Var_NL = ‖c‖_{2/3}² / ‖c‖₁²`, between 1 and the support size.
pub fn precision_gain(c: &[f64]) -> Result<f64> {
    check_inputs(c, 1.0)?;
    let r = pnorm(c, 2.0 / 3.0)? / pnorm(c, 1.0)?;
    Ok(r * r)
}

/// Variance of `c·F` for a given (not necessarily optimal) allocation.
pub fn allocation_variance(strategy: Strategy, c: &[f64], n: &[f64], m: u32) -> Result<f64> {
    if c.len() != n.len() {
        return Err(Error::SizeMismatch(format!(
            "{} coefficients for {} allocations",
            c.len(),
            n.len()
        )));
    }
    check_repetitions(m)?;
    let mf = m as f64;
    let supported = c.iter().zip(n).filter(|(ci, _)| **ci != 0.0);
    Ok(match strategy {
        // Only n'_j = λ|c_j| with λ = min_j n_j/|c_j| probes can stay in
        // proportion; any excess is wasted.
        Strategy::NonlocalQuantum => {
            let worst = supported
                .map(|(ci, ni)| ci.abs() / ni)
                .fold(0.0f64, f64::max);
            worst * worst / mf
        }
        Strategy::LocalQuantum => supported.map(|(ci, ni)| ci * ci / (ni * ni)).sum::<f64>() / mf,
        Strategy::LocalClassical => supported.map(|(ci, ni)| ci * ci / ni).sum::<f64>() / mf,
        Strategy::General { p, q } => {
            supported
                .map(|(ci, ni)| ci.abs().powf(q) / ni.powf(p))
                .sum::<f64>()
                / mf
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundedAllocation {
    pub n: Vec<u64>,
    pub variance: f64,
    /// Rounded variance minus the continuous optimum.
    pub penalty: f64,
}

/// Largest-remainder rounding of a continuous allocation to integers
/// summing to `⌊N⌋`.
pub fn round_allocation(result: &AllocationResult, c: &[f64]) -> Result<RoundedAllocation> {
    let total: f64 = result.n.iter().sum();
    let target = (total + 1e-9 * total.max(1.0)).floor() as u64;
    let mut n: Vec<u64> = result.n.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = n.iter().sum();
    let mut order: Vec<usize> = (0..n.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = result.n[a] - result.n[a].floor();
        let rb = result.n[b] - result.n[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(target.saturating_sub(assigned) as usize) {
        n[i] += 1;
    }
    let nf: Vec<f64> = n.iter().map(|&x| x as f64).collect();
    let variance = if c.iter().zip(&nf).any(|(ci, ni)| *ci != 0.0 && *ni == 0.0) {
        f64::INFINITY
    } else {
        allocation_variance(result.strategy, c, &nf, result.repetitions)?
    };
    Ok(RoundedAllocation {
        n,
        variance,
        penalty: variance - result.variance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Per-sensor standard deviation `1/n_j`.
    Quantum,
    /// Per-sensor standard deviation `1/√n_j`.
    Classical,
}

/// `Σ c_j²/n_j²` (quantum) or `Σ c_j²/n_j` (classical).
pub fn analytic_noise_variance(c: &[f64], n: &[f64], scaling: NoiseScaling) -> Result<f64> {
    Ok(noise_sigmas(c, n, scaling)?
        .iter()
        .zip(c)
        .map(|(s, ci)| ci * ci * s * s)
        .sum())
}

fn noise_sigmas(c: &[f64], n: &[f64], scaling: NoiseScaling) -> Result<Vec<f64>> {
    if c.len() != n.len() {
        return Err(Error::SizeMismatch(format!(
            "{} coefficients for {} allocations",
            c.len(),
            n.len()
        )));
    }
    c.iter()
        .zip(n)
        .enumerate()
        .map(|(j, (&ci, &ni))| {
            if ci == 0.0 {
                Ok(0.0)
            } else if !(ni > 0.0 && ni.is_finite()) {
                Err(Error::InvalidArgument(format!(
                    "sensor {j} has coefficient {ci} but allocation {ni}"
                )))
            } else {
                Ok(match scaling {
                    NoiseScaling::Quantum => 1.0 / ni,
                    NoiseScaling::Classical => 1.0 / ni.sqrt(),
                })
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub variance: f64,
    pub analytic: f64,
    /// Standard error of `variance` under Gaussian sampling.
    pub standard_error: f64,
    pub trials: u64,
}

impl MonteCarloResult {
    pub fn relative_deviation(&self) -> f64 {
        (self.variance - self.analytic).abs() / self.analytic
    }

    pub fn deviation_in_standard_errors(&self) -> f64 {
        (self.variance - self.analytic).abs() / self.standard_error
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * other.count as f64 / count as f64,
            m2: self.m2
                + other.m2
                + d * d * (self.count as f64 * other.count as f64) / count as f64,
        }
    }
}

/// Empirical variance of `Σ c_j ε_j` with independent Gaussian `ε_j`.
///
/// Trials are split into fixed-size chunks, each drawing from its own
/// ChaCha stream of `seed`, so the result does not depend on the thread
/// count.
pub fn monte_carlo_variance(
    c: &[f64],
    n: &[f64],
    trials: u64,
    seed: u64,
    scaling: NoiseScaling,
) -> Result<MonteCarloResult> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let sigmas = noise_sigmas(c, n, scaling)?;
    let weights: Vec<f64> = c.iter().zip(&sigmas).map(|(ci, s)| ci * s).collect();
    let analytic: f64 = weights.iter().map(|w| w * w).sum();
    if analytic == 0.0 {
        return Err(Error::InvalidArgument("coefficient vector is zero".into()));
    }
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let len = CHUNK.min(trials - k * CHUNK);
            let mut acc = Moments::default();
            for _ in 0..len {
                let sample: f64 = weights
                    .iter()
                    .map(|w| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        w * z
                    })
                    .sum();
                acc.push(sample);
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let variance = total.m2 / (total.count - 1) as f64;
    Ok(MonteCarloResult {
        variance,
        analytic,
        standard_error: variance * (2.0 / (total.count - 1) as f64).sqrt(),
        trials,
    })
}
