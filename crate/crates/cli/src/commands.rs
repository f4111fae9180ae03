use std::path::Path;

use serde::Serialize;

use sensorfield::allocation::{
    allocate as allocate_strategy, monte_carlo_variance, precision_gain, round_allocation,
    AllocationResult, MonteCarloResult, NoiseScaling, RoundedAllocation, Strategy,
};
use sensorfield::linalg::{
    build_alternant, build_design, build_vandermonde, error_subspace, MatrixKind, SystemMatrix,
};
use sensorfield::maps::{self, Grid, DEFAULT_RESOLUTION};
use sensorfield::placement::{find_lower_set_relabeling, is_equivalent, Relabeling};
use sensorfield::scenario::{emit_grid_csv, LowerSetChoice, ModelChoice, ResultRecord};
use sensorfield::{
    load_scenario, Error, InterpolationMethod, LowerSet, ModelSpec, Polynomial, Result, Scenario,
};

use crate::{
    AllocateArgs, EstimateArgs, MapArgs, MethodArg, Outcome, ScalingArg, StrategyArg, ValidateArgs,
};

fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn describe_lower_set(l: &LowerSet) -> String {
    l.shape_name().unwrap_or_else(|| {
        let parts: Vec<String> = l.iter().map(|a| a.to_string()).collect();
        format!("{{{}}}", parts.join(", "))
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct PlacementReport {
    sensors: usize,
    dimension: usize,
    lower_set_equivalent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_set: Option<LowerSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_set_shape: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relabeling: Option<Relabeling>,
    matrix: MatrixKind,
    columns: usize,
    rank: usize,
    full_rank: bool,
    condition_number: f64,
    singular_values: Vec<f64>,
    null_basis: Vec<Vec<f64>>,
    error_free_basis: Vec<Vec<f64>>,
}

fn placement_matrix(s: &Scenario, lower_set: Option<&LowerSet>) -> Result<SystemMatrix> {
    match (&s.model, lower_set) {
        (ModelChoice::Monomials { .. }, Some(l)) if l.len() == s.sensors.len() => {
            build_vandermonde(&s.sensors, l, None)
        }
        (ModelChoice::Monomials { .. }, Some(l)) => {
            build_design(&s.sensors, &ModelSpec::monomials(l.dim(), l.iter())?)
        }
        (ModelChoice::Functions { functions }, _) => {
            let f = ModelSpec::new(s.dimension, functions.clone())?;
            if f.len() == s.sensors.len() {
                build_alternant(&s.sensors, &f)
            } else {
                build_design(&s.sensors, &f)
            }
        }
        (ModelChoice::Monomials { .. }, None) => unreachable!("lower set resolved by caller"),
    }
}

pub fn check_placement(path: &Path, json: bool) -> Result<Outcome> {
    let s = load_scenario(path)?;
    let found = find_lower_set_relabeling(&s.sensors)?;
    let (lower_set, relabeling, equivalent) = match &s.model {
        ModelChoice::Monomials {
            lower_set: LowerSetChoice::Auto,
        } => match found {
            Some((l, r)) => (Some(l), Some(r), true),
            None => {
                if json {
                    print_json(&serde_json::json!({
                        "sensors": s.sensors.len(),
                        "dimension": s.dimension,
                        "lower_set_equivalent": false,
                        "full_rank": false,
                    }))?;
                } else {
                    println!("placement is not equivalent to any lower set; give the lower set explicitly");
                }
                return Ok(Outcome::Failed);
            }
        },
        ModelChoice::Monomials {
            lower_set: LowerSetChoice::Explicit(l),
        } => {
            let eq = l.len() == s.sensors.len() && is_equivalent(&s.sensors, l)?;
            (Some(l.clone()), None, eq)
        }
        ModelChoice::Functions { .. } => (
            None,
            found.as_ref().map(|(_, r)| r.clone()),
            found.is_some(),
        ),
    };

    let matrix = placement_matrix(&s, lower_set.as_ref())?;
    let sub = error_subspace(&matrix, &s.weights.clone().unwrap_or_default())?;
    let k = matrix.ncols();
    let rank = sub.rank.numerical_rank;
    let report = PlacementReport {
        sensors: s.sensors.len(),
        dimension: s.dimension,
        lower_set_equivalent: equivalent,
        lower_set_shape: lower_set.as_ref().map(describe_lower_set),
        lower_set,
        relabeling,
        matrix: matrix.kind(),
        columns: k,
        rank,
        full_rank: rank == k,
        condition_number: sub.rank.condition_number,
        singular_values: sub.rank.singular_values.clone(),
        null_basis: sub.null_basis.clone(),
        error_free_basis: sub.error_free_basis.clone(),
    };

    if json {
        print_json(&report)?;
    } else {
        println!(
            "sensors: {} in dimension {}",
            report.sensors, report.dimension
        );
        println!(
            "lower-set equivalent placement: {}",
            if report.lower_set_equivalent {
                "yes"
            } else {
                "no"
            }
        );
        println!(
            "matrix: {} {}x{}",
            serde_json::to_value(report.matrix)?
                .as_str()
                .unwrap_or_default(),
            report.sensors,
            k
        );
        if report.full_rank {
            match &report.lower_set_shape {
                Some(shape) => println!("full rank, lower set = {shape}"),
                None => println!("full rank, rank {rank}/{k}"),
            }
        } else {
            println!(
                "rank {rank}/{k}, kernel dim {}, error-free dim {}",
                report.null_basis.len(),
                report.error_free_basis.len()
            );
        }
        println!("condition number: {:.6e}", report.condition_number);
        if !report.null_basis.is_empty() {
            println!("kernel basis:");
            for v in &report.null_basis {
                println!("  {}", fmt_vec(v));
            }
        }
        println!("error-free basis:");
        for v in &report.error_free_basis {
            println!("  {}", fmt_vec(v));
        }
    }
    Ok(if report.full_rank {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}

fn strategy_for(arg: StrategyArg) -> Result<Strategy> {
    match arg {
        StrategyArg::Nonlocal => Ok(Strategy::NonlocalQuantum),
        StrategyArg::Local => Ok(Strategy::LocalQuantum),
        StrategyArg::Classical => Ok(Strategy::LocalClassical),
        StrategyArg::General => Err(Error::InvalidArgument(
            "the general strategy is only available through `allocate`".into(),
        )),
    }
}

fn method_for(arg: MethodArg) -> InterpolationMethod {
    match arg {
        MethodArg::Direct => InterpolationMethod::Direct,
        MethodArg::Nearest => InterpolationMethod::NearestSensor,
    }
}

pub fn estimate(args: EstimateArgs) -> Result<Outcome> {
    let s = load_scenario(&args.scenario)?;
    if s.targets.is_empty() {
        return Err(Error::InvalidArgument("scenario lists no targets".into()));
    }
    let indices: Vec<usize> = match args.target {
        Some(i) if i < s.targets.len() => vec![i],
        Some(i) => {
            return Err(Error::InvalidArgument(format!(
                "target {i} out of range; scenario has {} targets",
                s.targets.len()
            )))
        }
        None => (0..s.targets.len()).collect(),
    };
    let strategies = if args.strategy.is_empty() {
        vec![
            Strategy::NonlocalQuantum,
            Strategy::LocalQuantum,
            Strategy::LocalClassical,
        ]
    } else {
        args.strategy
            .iter()
            .map(|&a| strategy_for(a))
            .collect::<Result<Vec<_>>>()?
    };
    let ctx = s.context(method_for(args.method))?;
    let mut records = Vec::new();
    for i in indices {
        let e = ctx.estimate(&s.targets[i])?;
        records.push(ResultRecord::new(
            i,
            &e,
            s.field_values.as_deref(),
            s.resources.as_ref(),
            &strategies,
        )?);
    }

    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&records)? + "\n")?;
    }
    if args.json {
        print_json(&records)?;
    } else {
        for r in &records {
            println!(
                "target {} ({}) via {}",
                r.target_id,
                serde_json::to_string(&r.target)?,
                serde_json::to_value(r.method)?.as_str().unwrap_or_default()
            );
            println!("  c = {}", fmt_vec(&r.c));
            if let Some(v) = r.predicted_value {
                println!("  predicted value = {v}");
            }
            for (name, v) in &r.variances {
                println!("  variance {name} = {v}");
            }
            println!(
                "  error-free: {}; condition number {:.6e}",
                if r.error_free { "yes" } else { "no" },
                r.condition_number
            );
            if let Some(b) = &r.bias_direction {
                println!("  bias direction = {}", fmt_vec(b));
            }
            for w in &r.warnings {
                println!("  warning: {w}");
            }
        }
    }
    Ok(Outcome::Success)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad {what} value '{t}'")))
        })
        .collect()
}

fn build_grid(args: &MapArgs, s: &Scenario) -> Result<Grid> {
    let m = s.dimension;
    let counts: Vec<usize> = match &args.grid {
        None => vec![DEFAULT_RESOLUTION; m],
        Some(text) => {
            let c = text
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad grid count '{t}'")))
                })
                .collect::<Result<Vec<usize>>>()?;
            match c.len() {
                1 => vec![c[0]; m],
                n if n == m => c,
                n => {
                    return Err(Error::Parse(format!(
                        "--grid gives {n} counts for dimension {m}"
                    )))
                }
            }
        }
    };
    let bounds: Vec<(f64, f64)> = match &args.bounds {
        None => s.sensors.bounding_box(),
        Some(text) => {
            let axes = text
                .split(';')
                .map(|a| {
                    let v = parse_list(a, "bounds")?;
                    match v.as_slice() {
                        [lo, hi] => Ok((*lo, *hi)),
                        _ => Err(Error::Parse(format!("bounds '{a}' must be 'lo,hi'"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            match axes.len() {
                1 => vec![axes[0]; m],
                n if n == m => axes,
                n => {
                    return Err(Error::Parse(format!(
                        "--bounds gives {n} axes for dimension {m}"
                    )))
                }
            }
        }
    };
    Grid::new(bounds, counts)
}

fn value_range(rows: &[(Vec<f64>, f64)]) -> (f64, f64) {
    rows.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(*v), hi.max(*v))
        })
}

pub fn gain_map(args: MapArgs) -> Result<Outcome> {
    let s = load_scenario(&args.scenario)?;
    let grid = build_grid(&args, &s)?;
    let ctx = s.context(InterpolationMethod::Direct)?;
    let rows = maps::gain_map(&ctx, &grid)?;
    emit_grid_csv(&rows, s.dimension, &args.out)?;
    let (lo, hi) = value_range(&rows);
    println!(
        "wrote {} rows to {}; gain in [{lo}, {hi}]",
        rows.len(),
        args.out.display()
    );
    Ok(Outcome::Success)
}

pub fn error_map(args: MapArgs, field: &str) -> Result<Outcome> {
    let s = load_scenario(&args.scenario)?;
    let poly = Polynomial::parse(field, s.dimension)?;
    let grid = build_grid(&args, &s)?;
    let ctx = s.context(InterpolationMethod::Direct)?;
    let rows = maps::error_map(&ctx, &poly, &grid)?;
    emit_grid_csv(&rows, s.dimension, &args.out)?;
    let (_, hi) = value_range(&rows);
    println!(
        "wrote {} rows to {}; max |error| = {hi:e}",
        rows.len(),
        args.out.display()
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct AllocationReport {
    allocation: AllocationResult,
    precision_gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounded: Option<RoundedAllocation>,
}

pub fn allocate(args: AllocateArgs) -> Result<Outcome> {
    let strategy = match args.strategy {
        StrategyArg::General => match (args.p, args.q) {
            (Some(p), Some(q)) => Strategy::General { p, q },
            _ => {
                return Err(Error::InvalidArgument(
                    "--strategy general needs both --p and --q".into(),
                ))
            }
        },
        other => {
            if args.p.is_some() || args.q.is_some() {
                return Err(Error::InvalidArgument(
                    "--p and --q only apply to --strategy general".into(),
                ));
            }
            strategy_for(other)?
        }
    };
    let allocation = allocate_strategy(strategy, &args.coeffs, args.resources, args.repetitions)?;
    let rounded = if args.round {
        Some(round_allocation(&allocation, &args.coeffs)?)
    } else {
        None
    };
    let report = AllocationReport {
        precision_gain: precision_gain(&args.coeffs)?,
        allocation,
        rounded,
    };
    if args.json {
        print_json(&report)?;
    } else {
        println!("strategy: {}", report.allocation.strategy.name());
        println!("n = {}", fmt_vec(&report.allocation.n));
        println!("variance = {}", report.allocation.variance);
        println!(
            "precision gain (local/nonlocal) = {}",
            report.precision_gain
        );
        if let Some(r) = &report.rounded {
            let n: Vec<String> = r.n.iter().map(|v| v.to_string()).collect();
            println!("rounded n = [{}]", n.join(", "));
            println!("rounded variance = {} (penalty {})", r.variance, r.penalty);
        }
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ValidationReport {
    #[serde(flatten)]
    result: MonteCarloResult,
    relative_deviation: f64,
    deviation_in_standard_errors: f64,
    passed: bool,
}

pub fn validate_mc(args: ValidateArgs) -> Result<Outcome> {
    let scaling = match args.scaling {
        ScalingArg::Quantum => NoiseScaling::Quantum,
        ScalingArg::Classical => NoiseScaling::Classical,
    };
    let result = monte_carlo_variance(&args.coeffs, &args.alloc, args.trials, args.seed, scaling)?;
    let sigmas = result.deviation_in_standard_errors();
    let report = ValidationReport {
        relative_deviation: result.relative_deviation(),
        deviation_in_standard_errors: sigmas,
        passed: sigmas <= 3.0,
        result,
    };
    if args.json {
        print_json(&report)?;
    } else {
        println!("empirical variance = {}", report.result.variance);
        println!("analytic variance  = {}", report.result.analytic);
        println!("standard error     = {}", report.result.standard_error);
        println!(
            "deviation = {:.3}% ({:.2} standard errors): {}",
            100.0 * report.relative_deviation,
            sigmas,
            if report.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(if report.passed {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}
