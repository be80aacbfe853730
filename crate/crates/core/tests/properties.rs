use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_tq::channel::{complex_gaussian_vector, sample_channels, ScenarioConfig};
use ris_tq::estimators::{adc_input_power, design_task_quantizer, LinearTask};
use ris_tq::harness::{bits_per_adc, fmt_sig9, run_sweep_with_threads, SweepSpec};
use ris_tq::linalg::{
    c64, equalizing_unitary, hermitian_inv_sqrt, hermitian_sqrt, identity, khatri_rao, kronecker,
    vec, water_fill,
};
use ris_tq::pilot::{build_sbar, make_pilot_plan, Mode};
use ris_tq::quantizer::{levels_from_bits, q_scalar, BitBudget, QuantizerSpec};
use ris_tq::ComplexMatrix;

fn gaussian(seed: u64, r: usize, c: usize) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = complex_gaussian_vector(&mut rng, r * c, 1.0);
    DMatrix::from_column_slice(r, c, v.as_slice())
}

fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_of_diagonal_sandwich(seed in any::<u64>(), r in 1usize..5, k in 1usize..5, c in 1usize..5) {
        let m1 = gaussian(seed, r, k);
        let m2 = gaussian(seed ^ 1, k, c);
        let m = gaussian(seed ^ 2, k, 1);
        let lhs = vec(&(&m1 * DMatrix::from_diagonal(&m.column(0).into_owned()) * &m2));
        let rhs = khatri_rao(&m2.transpose(), &m1).unwrap() * m.column(0);
        prop_assert!((lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn khatri_rao_gram(seed in any::<u64>(), r1 in 1usize..5, r2 in 1usize..5, c in 1usize..5) {
        let a = gaussian(seed, r1, c);
        let b = gaussian(seed ^ 3, r2, c);
        let kr = khatri_rao(&a, &b).unwrap();
        let lhs = kr.adjoint() * &kr;
        let rhs = (a.adjoint() * &a).component_mul(&(b.adjoint() * &b));
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn mixed_product_rule(seed in any::<u64>(), n in 1usize..4) {
        let (a, b) = (gaussian(seed, n, n), gaussian(seed ^ 4, n + 1, n + 1));
        let (c, d) = (gaussian(seed ^ 5, n, n), gaussian(seed ^ 6, n + 1, n + 1));
        let lhs = kronecker(&a, &b) * kronecker(&c, &d);
        let rhs = kronecker(&(&a * &c), &(&b * &d));
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn inverse_square_root(seed in any::<u64>(), n in 1usize..7) {
        let m = gaussian(seed, n, n);
        let a = &m * m.adjoint() + identity(n);
        let s = hermitian_sqrt(&a).unwrap();
        let is = hermitian_inv_sqrt(&a).unwrap();
        prop_assert!(rel(&(&s * &s), &a) < 1e-9);
        prop_assert!(rel(&(&is * &s), &identity(n)) < 1e-9);
    }

    #[test]
    fn water_fill_normalized_and_monotone(
        mut lam in prop::collection::vec(0.0f64..10.0, 1..10),
        coef in 1e-4f64..10.0,
    ) {
        lam.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(lam[0] > 0.0);
        let wf = water_fill(&lam, coef).unwrap();
        prop_assert!((wf.squared.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(wf.squared.iter().all(|&s| s >= 0.0));
        prop_assert!(wf.squared.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn equalizing_unitary_post_conditions(seed in any::<u64>(), g in 1usize..9) {
        let m = gaussian(seed, g, g);
        let h = &m * m.adjoint();
        let u = equalizing_unitary(&h);
        prop_assert!(rel(&(u.adjoint() * &u), &identity(g)) < 1e-10);
        let e = &u * &h * u.adjoint();
        let target = h.trace().re / g as f64;
        for k in 0..g {
            prop_assert!((e[(k, k)].re - target).abs() <= 1e-8 * target);
        }
    }

    #[test]
    fn quantizer_output_on_grid(levels in 1u64..64, support in 0.01f64..10.0, x in -100.0f64..100.0) {
        let spec = QuantizerSpec::new(levels, support, 1.0, false).unwrap();
        let step = spec.step();
        let q = q_scalar(x, &spec).unwrap();
        prop_assert!(q >= -support + 0.5 * step - 1e-12 && q <= support - 0.5 * step + 1e-12);
        let bin = (q + support) / step - 0.5;
        prop_assert!((bin - bin.round()).abs() < 1e-9);
        if x.abs() < support {
            prop_assert!((q - x).abs() <= 0.5 * step + 1e-12);
        }
    }

    #[test]
    fn bit_budget_never_exceeds_total(total in 0.0f64..5000.0, g in 1usize..64) {
        let b = BitBudget::new(total, g);
        prop_assert!(b.bits_consumed() <= total + 1e-9);
        let levels = levels_from_bits(total, g);
        prop_assert!(2.0 * g as f64 * (levels as f64).log2() <= total + 1e-9);
    }

    #[test]
    fn row_bits_per_adc_is_floor(total in 0.0f64..4096.0, g in 1usize..64) {
        prop_assert_eq!(bits_per_adc(total, g), (total / (2.0 * g as f64)).floor() as u64);
    }

    #[test]
    fn sig9_round_trips(x in -1e12f64..1e12) {
        let back: f64 = fmt_sig9(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cascaded_vector_factorization(seed in any::<u64>()) {
        let cfg = ScenarioConfig::desk();
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ur: Vec<_> = (0..cfg.n_ues).flat_map(|k| ch.gains.scaled_ur_k(&cfg, k).iter().copied().collect::<Vec<_>>()).collect();
        let rb = ch.gains.scaled_rb(&cfg);
        let alpha = kronecker(
            &DMatrix::from_column_slice(ur.len(), 1, &ur),
            &DMatrix::from_column_slice(rb.len(), 1, rb.as_slice()),
        );
        let rhs = &ch.w_c * alpha.column(0);
        prop_assert!((&ch.c - &rhs).norm() <= 1e-9 * ch.c.norm());
    }

    #[test]
    fn predicted_mse_monotone_in_bits(seed in any::<u64>()) {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = sample_channels(&cfg, &mut rng).unwrap();
        let plan = make_pilot_plan(&cfg, Mode::Cascaded, 4, 2, 0, &mut rng).unwrap();
        let sbar = build_sbar(&plan, &cfg).unwrap();
        let task = LinearTask::factored(&ch.w_c, &ch.sigma_alpha_c, &sbar, ch.budget.noise_bs).unwrap();
        let mut prev = f64::INFINITY;
        for bits in [16.0, 32.0, 48.0, 64.0, 96.0, 128.0] {
            let d = design_task_quantizer(&task.gamma, &task.sigma_y, 8, bits, 2.0, true).unwrap();
            prop_assert!(d.predicted_mse <= prev * (1.0 + 1e-12));
            prop_assert!((d.lambda_sq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let p = adc_input_power(&d, &task.sigma_y);
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            prop_assert!(p.iter().all(|&v| (v - mean).abs() <= 1e-6 * mean));
            prev = d.predicted_mse;
        }
    }
}

#[test]
fn sigma_f_off_block_entries_are_zero() {
    let cfg = ScenarioConfig::desk();
    let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let s = ch.sigma_f(&cfg);
    let l = cfg.n_ris();
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            if i / l != j / l {
                assert_eq!(s[(i, j)], c64(0.0, 0.0));
            }
        }
    }
}

#[test]
fn realization_is_reproducible() {
    let cfg = ScenarioConfig::desk();
    let a = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a.c, b.c);
    assert_eq!(a.f, b.f);
    assert_eq!(a.g, b.g);
    assert_eq!(a.geometry, b.geometry);
}

#[test]
fn estimator_ordering_at_shared_budgets() {
    let spec = SweepSpec::from_json(
        r#"{"scenario_id":"order","mode":"cascaded","sweep_axis":"total_bits","axis_values":[128,192,256],
        "estimators":["task_based","no_quant","digital_only"],"n_trials":500,"base_seed":31}"#,
        "test",
    )
    .unwrap();
    let rows = run_sweep_with_threads(&spec, 1).unwrap();
    for x in [128.0, 192.0, 256.0] {
        let get = |e: &str| {
            rows.iter()
                .find(|r| r.estimator == e && r.axis_value == x)
                .unwrap()
                .nmse_linear_mean
        };
        assert!(get("no_quant") <= get("task_based"), "{x}");
        assert!(get("task_based") <= get("digital_only"), "{x}");
    }
}

#[test]
fn ris_noise_free_observation_matches_stacking() {
    let cfg = ScenarioConfig::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ch = sample_channels(&cfg, &mut rng).unwrap();
    let plan = make_pilot_plan(&cfg, Mode::Cascaded, 3, 2, 0, &mut rng).unwrap();
    let sbar = build_sbar(&plan, &cfg).unwrap();
    let y = &sbar * &ch.c;
    let cascaded = ch.cascaded();
    let s = plan.reflection();
    let n = cfg.n_bs_antennas;
    for t in 0..plan.n_subblocks {
        // slot-by-slot: Y[t] = sum_k G diag(s_t) f_k x_k^T
        let refl = DVector::from_iterator(s.nrows(), s.column(t).iter().copied());
        let mut yt = DMatrix::zeros(n, plan.pilots.ncols());
        for k in 0..cfg.n_ues {
            let hk = cascaded.rows(k * n, n) * &refl;
            yt += hk * plan.pilots.row(k);
        }
        let block = y.rows(t * yt.len(), yt.len());
        assert!((block - vec(&yt)).norm() <= 1e-10 * y.norm());
    }
}
