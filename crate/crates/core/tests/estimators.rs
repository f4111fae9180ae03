use proptest::prelude::*;

use sensorfield::estimators::{
    combine, derivative_estimator, gls_estimator, interpolation_estimator, isolation_estimator,
    nearest_sensor, residual, InterpolationMethod,
};
use sensorfield::linalg::{build_design, error_subspace};
use sensorfield::model::Flavor;
use sensorfield::{
    Basis, EstimationContext, LinearField, LowerSet, ModelFunction, ModelSpec, MultiIndex,
    PointSet, Polynomial, TargetSpec, Weights,
};

fn grow(m: usize, picks: &[usize]) -> LowerSet {
    let mut l = LowerSet::new(vec![MultiIndex::zeros(m)]).unwrap();
    for &p in picks {
        let cover = l.cover();
        let mut e = l.elements().to_vec();
        e.push(cover[p % cover.len()].clone());
        l = LowerSet::new(e).unwrap();
    }
    l
}

/// Places `l` on a tensor of shifted, stretched Chebyshev values.
fn chebyshev_placement(l: &LowerSet, centre: &[f64], scale: f64) -> PointSet {
    let m = l.dim();
    let k = l.max_exponent() as usize + 1;
    let node = |i: usize| (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * k) as f64).cos();
    PointSet::new(
        l.iter()
            .map(|a| {
                (0..m)
                    .map(|j| centre[j] + scale * node(a.exponents()[j] as usize))
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

/// `D^ζ` of `Σ coef_α x^α`, by falling factorials.
fn derivative_oracle(terms: &[(MultiIndex, f64)], zeta: &MultiIndex, x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(a, coef)| {
            let mut v = *coef;
            for ((&aj, &zj), xj) in a.exponents().iter().zip(zeta.exponents()).zip(x) {
                if zj > aj {
                    return 0.0;
                }
                v *= ((aj - zj + 1)..=aj).map(f64::from).product::<f64>();
                v *= xj.powi((aj - zj) as i32);
            }
            v
        })
        .sum()
}

fn case() -> impl Strategy<Value = (LowerSet, Vec<f64>, f64, Vec<f64>, Vec<f64>, usize)> {
    (1usize..=2, prop::collection::vec(0usize..32, 0..9)).prop_flat_map(|(m, picks)| {
        let l = grow(m, &picks);
        let n = l.len();
        (
            Just(l),
            prop::collection::vec(-3.0f64..3.0, m),
            0.5f64..2.0,
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, m),
            0..n,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reproduces_polynomials_in_the_model((l, centre, scale, coefs, u, zi) in case()) {
        let x = chebyshev_placement(&l, &centre, scale);
        let terms: Vec<(MultiIndex, f64)> = l.iter().cloned().zip(coefs).collect();
        let poly = Polynomial::from_terms(l.dim(), terms.clone()).unwrap();
        let values: Vec<f64> = x.iter().map(|p| derivative_oracle(&terms, &MultiIndex::zeros(l.dim()), p)).collect();
        let x_t: Vec<f64> = centre.iter().zip(&u).map(|(c, ui)| c + scale * ui).collect();
        let magnitude: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);

        let zeta = l.elements()[zi].clone();
        for method in [InterpolationMethod::Direct, InterpolationMethod::NearestSensor] {
            let e = derivative_estimator(&x, &l, &x_t, &zeta, method).unwrap();
            let want = derivative_oracle(&terms, &zeta, &x_t);
            let got = e.apply(&values).unwrap();
            let size: f64 = e.c.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
            prop_assert!((got - want).abs() <= 1e-8 * size * magnitude,
                "{:?}: D^{:?} got {} want {}", method, zeta, got, want);
            prop_assert!(residual(&e, &x, &poly).unwrap() <= 1e-8 * size * magnitude);
        }
    }

    #[test]
    fn routes_agree((l, centre, scale, _coefs, u, zi) in case()) {
        let x = chebyshev_placement(&l, &centre, scale);
        let x_t: Vec<f64> = centre.iter().zip(&u).map(|(c, ui)| c + scale * ui).collect();
        let zeta = l.elements()[zi].clone();
        let a = derivative_estimator(&x, &l, &x_t, &zeta, InterpolationMethod::Direct).unwrap();
        let b = derivative_estimator(&x, &l, &x_t, &zeta, InterpolationMethod::NearestSensor).unwrap();
        let size: f64 = a.c.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        for (ca, cb) in a.c.iter().zip(&b.c) {
            prop_assert!((ca - cb).abs() <= 1e-8 * size, "{:?} vs {:?}", a.c, b.c);
        }
    }

    #[test]
    fn interpolation_at_a_sensor_is_a_unit_vector((l, centre, scale, _coefs, _u, zi) in case()) {
        let x = chebyshev_placement(&l, &centre, scale);
        let e = interpolation_estimator(&x, &l, x.point(zi), InterpolationMethod::Direct).unwrap();
        for (j, c) in e.c.iter().enumerate() {
            let want = if j == zi { 1.0 } else { 0.0 };
            prop_assert!((c - want).abs() <= 1e-10, "c = {:?}", e.c);
        }
        prop_assert_eq!(nearest_sensor(&x, x.point(zi)), zi);
    }
}

fn grid3() -> PointSet {
    PointSet::new(
        (0..9)
            .map(|k| vec![0.5 * (k / 3) as f64, 0.5 * (k % 3) as f64])
            .collect(),
    )
    .unwrap()
}

#[test]
fn laplacian_combination_matches_five_point_stencil() {
    let ctx = EstimationContext::new(
        grid3(),
        Basis::Monomials(sensorfield::multiindex::box_lower_set(2, 2).unwrap()),
    );
    let point = vec![0.5, 0.5];
    let target = TargetSpec::Combination {
        terms: [[2, 0], [0, 2]]
            .iter()
            .map(|o| sensorfield::estimators::WeightedTarget {
                weight: 1.0,
                target: TargetSpec::Derivative {
                    point: point.clone(),
                    order: MultiIndex::new(o.to_vec()),
                },
            })
            .collect(),
    };
    let e = ctx.estimate(&target).unwrap();
    let want = [0.0, 4.0, 0.0, 4.0, -16.0, 4.0, 0.0, 4.0, 0.0];
    for (c, w) in e.c.iter().zip(want) {
        assert!((c - w).abs() <= 1e-10, "{:?}", e.c);
    }
    let dxx = ctx
        .estimate(&TargetSpec::Derivative {
            point: point.clone(),
            order: MultiIndex::new(vec![2, 0]),
        })
        .unwrap();
    let dyy = ctx
        .estimate(&TargetSpec::Derivative {
            point,
            order: MultiIndex::new(vec![0, 2]),
        })
        .unwrap();
    let sum = combine(&[(1.0, &dxx), (1.0, &dyy)]).unwrap();
    for (a, b) in sum.c.iter().zip(&e.c) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn derivative_outside_the_model_is_rejected() {
    let l = sensorfield::multiindex::box_lower_set(1, 2).unwrap();
    let x = PointSet::new(vec![vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
    let r = derivative_estimator(
        &x,
        &l,
        &[0.0],
        &MultiIndex::new(vec![3]),
        InterpolationMethod::Direct,
    );
    assert!(r.is_err());
}

fn trig_model() -> ModelSpec {
    ModelSpec::new(
        1,
        vec![
            ModelFunction::Constant,
            ModelFunction::Sinusoid {
                frequency: vec![1.0],
                phase: 0.0,
                flavor: Flavor::Sin,
            },
            ModelFunction::Sinusoid {
                frequency: vec![1.0],
                phase: 0.0,
                flavor: Flavor::Cos,
            },
        ],
    )
    .unwrap()
}

#[test]
fn isolation_inverts_the_alternant() {
    let f = trig_model();
    let x = PointSet::new(vec![vec![0.1], vec![1.3], vec![2.9]]).unwrap();
    let design = build_design(&x, &f).unwrap();
    for t in 0..3 {
        let e = isolation_estimator(&x, &f, t).unwrap();
        assert!(e.error_free);
        // cᵀX = e_t
        for k in 0..3 {
            let v: f64 = (0..3).map(|i| e.c[i] * design.entries()[(i, k)]).sum();
            let want = if k == t { 1.0 } else { 0.0 };
            assert!((v - want).abs() <= 1e-10);
        }
    }
}

#[test]
fn gls_recovers_coefficients_from_redundant_sensors() {
    let f = trig_model();
    let x = PointSet::new((0..7).map(|i| vec![0.4 * i as f64]).collect()).unwrap();
    let beta = vec![0.3, -1.1, 2.5];
    let field = LinearField::new(f.clone(), beta.clone()).unwrap();
    let values: Vec<f64> = x
        .iter()
        .map(|p| sensorfield::Field::value(&field, p).unwrap())
        .collect();
    for weights in [
        Weights::Identity,
        Weights::Diagonal(vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 0.25]),
    ] {
        for (t, want) in beta.iter().enumerate() {
            let mut b = vec![0.0; 3];
            b[t] = 1.0;
            let e = gls_estimator(&x, &f, &weights, &b).unwrap();
            assert!(e.error_free);
            assert!((e.apply(&values).unwrap() - want).abs() <= 1e-10);
        }
    }
}

#[test]
fn gls_weights_are_scale_invariant() {
    let f = trig_model();
    let x = PointSet::new((0..5).map(|i| vec![0.7 * i as f64]).collect()).unwrap();
    let b = [0.0, 1.0, 1.0];
    let d = vec![1.0, 2.0, 0.5, 1.5, 3.0];
    let a = gls_estimator(&x, &f, &Weights::Diagonal(d.clone()), &b).unwrap();
    let scaled = gls_estimator(
        &x,
        &f,
        &Weights::Diagonal(d.iter().map(|v| 40.0 * v).collect()),
        &b,
    )
    .unwrap();
    for (p, q) in a.c.iter().zip(&scaled.c) {
        assert!((p - q).abs() <= 1e-12);
    }
}

#[test]
fn kernel_certificate_for_a_repeated_function() {
    // Two identical columns leave (1,-1,0)/√2 in the kernel.
    let f = ModelSpec::new(
        1,
        vec![
            ModelFunction::Constant,
            ModelFunction::Constant,
            ModelFunction::monomial(vec![1]),
        ],
    )
    .unwrap();
    let x = PointSet::new(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let design = build_design(&x, &f).unwrap();
    let sub = error_subspace(&design, &Weights::Identity).unwrap();
    assert_eq!(sub.null_basis.len(), 1);
    let v = &sub.null_basis[0];
    let xv = design.entries() * dvector(v);
    assert!(xv.iter().all(|r| r.abs() <= 1e-12));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((v[0].abs() - s).abs() <= 1e-12 && (v[0] + v[1]).abs() <= 1e-12 && v[2].abs() <= 1e-12);

    // b orthogonal to the kernel is error free, e_0 is not.
    let ok = gls_estimator(&x, &f, &Weights::Identity, &[1.0, 1.0, 0.0]).unwrap();
    assert!(ok.error_free);
    let biased = gls_estimator(&x, &f, &Weights::Identity, &[1.0, 0.0, 0.0]).unwrap();
    assert!(!biased.error_free);
    let bias = biased.bias_direction.unwrap();
    assert!((bias[0] - 0.5).abs() <= 1e-12 && (bias[1] + 0.5).abs() <= 1e-12);
}

fn dvector(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v)
}
