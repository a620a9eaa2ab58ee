//! Randomized checks of the library's cross-module contracts. Each test
//! states an invariant that must hold for arbitrary inputs, not just the
//! fixtures in the unit tests.

use clusterlasso::data::{parse_dataset, select_rows, standardize, Dataset, DEFAULT_LEVELS};
use clusterlasso::gmm::{fit_em, map_assign, EmConfig, GmmError};
use clusterlasso::lasso::{
    fit_cd, grid_path, kkt_check, lambda_max, lars_path, CdConfig, LambdaGrid, LassoProblem,
};
use clusterlasso::modelsel::{bic, bic_display_transform, count_params, BicRow, BicTable};
use clusterlasso::oracles::lasso_objective_by_enumeration;
use clusterlasso::pca::{fit_pca, project};
use clusterlasso::pipeline::{generate_synth, rank_features, Link, SynthSpec};
use clusterlasso::rng::substream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix(seed: u64, name: &str, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = substream(seed, name);
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(seed: u64, name: &str, n: usize) -> DVector<f64> {
    let mut rng = substream(seed, name);
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_problem(seed: u64, n: usize, p: usize) -> LassoProblem {
    let x = gaussian_matrix(seed, "prop:x", n, p);
    let y = gaussian_vector(seed, "prop:y", n);
    let (prob, _, _) = LassoProblem::from_raw(&x, &y).unwrap();
    prob
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn standardize_round_trips(seed in any::<u64>(), n in 3usize..40, p in 1usize..10) {
        let x = gaussian_matrix(seed, "prop:std", n, p);
        let (z, record) = standardize(&x).unwrap();
        let back = record.unstandardize(&z);
        for i in 0..n {
            for j in 0..p {
                let scale = x[(i, j)].abs().max(1.0);
                prop_assert!((back[(i, j)] - x[(i, j)]).abs() <= 1e-10 * scale);
            }
        }
        prop_assert!(record.scales.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn row_selection_composes(seed in any::<u64>(), n in 4usize..30, p in 1usize..6) {
        let x = gaussian_matrix(seed, "prop:sel", n, p);
        let mut rng = substream(seed, "prop:sel-idx");
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
        let d = Dataset::new(
            labels,
            DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect(),
            x,
            (1..=p).map(|j| format!("f{j}")).collect(),
        )
        .unwrap();

        let a: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if a.is_empty() {
            return Ok(());
        }
        let inner = select_rows(&d, &a).unwrap();
        let b: Vec<usize> = (0..a.len()).filter(|_| rng.random::<bool>()).collect();
        if b.is_empty() {
            return Ok(());
        }
        let nested = select_rows(&inner, &b).unwrap();
        let composed: Vec<usize> = b.iter().map(|&i| a[i]).collect();
        let direct = select_rows(&d, &composed).unwrap();
        prop_assert_eq!(nested, direct);
    }

    #[test]
    fn dataset_csv_round_trips(seed in any::<u64>(), n in 1usize..20, p in 1usize..6) {
        let x = gaussian_matrix(seed, "prop:csv", n, p);
        let mut rng = substream(seed, "prop:csv-labels");
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
        let d = Dataset::new(
            labels,
            DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect(),
            x,
            (1..=p).map(|j| format!("f{j}")).collect(),
        )
        .unwrap();
        let text = d.to_csv("state");
        let back = parse_dataset(&text, "state").unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn pca_model_invariants(seed in any::<u64>(), n in 6usize..40, p in 2usize..8) {
        let x = gaussian_matrix(seed, "prop:pca", n, p);
        let k = p.min(3);
        let model = fit_pca(&x, k).unwrap();

        for a in 0..k {
            for b in 0..k {
                let dot = model.components.row(a).dot(&model.components.row(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - expect).abs() < 1e-8, "axes {a},{b}: {dot}");
            }
        }
        prop_assert!(model
            .eigenvalues
            .iter()
            .zip(model.eigenvalues.iter().skip(1))
            .all(|(hi, lo)| hi + 1e-12 >= *lo));
        prop_assert!(model.eigenvalues.iter().all(|&v| v >= -1e-12));

        // score variances reproduce the eigenvalues
        let scores = project(&model, &x).unwrap();
        for j in 0..k {
            let col = scores.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let ev = model.eigenvalues[j];
            prop_assert!((var - ev).abs() <= 1e-8 * ev.max(1e-12), "{var} vs {ev}");
        }
    }

    #[test]
    fn pca_ignores_row_order(seed in any::<u64>(), n in 6usize..30, p in 2usize..6) {
        let x = gaussian_matrix(seed, "prop:pca-perm", n, p);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, "prop:pca-shuffle"));
        let permuted = DMatrix::from_fn(n, p, |i, j| x[(order[i], j)]);

        let k = p.min(3);
        let direct = fit_pca(&x, k).unwrap();
        let shuffled = fit_pca(&permuted, k).unwrap();
        for j in 0..k {
            let ev = direct.eigenvalues[j];
            prop_assert!((shuffled.eigenvalues[j] - ev).abs() <= 1e-8 * ev.max(1e-12));
        }
        // axes may only differ by sign, and the fixed sign convention
        // removes even that freedom
        for a in 0..k {
            for b in 0..p {
                let lhs = shuffled.components[(a, b)];
                let rhs = direct.components[(a, b)];
                prop_assert!((lhs - rhs).abs() < 1e-8, "axis {a} loading {b}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn em_ascends_and_stays_normalized(
        seed in any::<u64>(),
        n in 24usize..48,
        k in 1usize..=4,
    ) {
        let x = gaussian_matrix(seed, "prop:em", n, 2);
        let cfg = EmConfig {
            restarts: 2,
            max_iter: 120,
            tol: 1e-7,
            reg: None,
            seed,
        };
        let (params, resp, report) = match fit_em(&x, k, &cfg) {
            Ok(out) => out,
            // a component may legitimately empty out on unclustered data
            Err(GmmError::DegenerateComponent(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };

        for w in report.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "loglik fell: {} -> {}", w[0], w[1]);
        }
        params.validate().unwrap();
        for i in 0..resp.n() {
            let row_sum: f64 = resp.matrix().row(i).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
        }
        let assign = map_assign(&resp);
        prop_assert!(assign.iter().all(|&c| (1..=k).contains(&c)));
    }

    #[test]
    fn em_is_reproducible_per_seed(seed in any::<u64>(), n in 20usize..36) {
        let x = gaussian_matrix(seed, "prop:em-repro", n, 2);
        let cfg = EmConfig {
            restarts: 2,
            max_iter: 60,
            tol: 1e-6,
            reg: None,
            seed,
        };
        let a = fit_em(&x, 2, &cfg);
        let b = fit_em(&x, 2, &cfg);
        match (a, b) {
            (Ok((pa, ra, ta)), Ok((pb, rb, tb))) => {
                prop_assert_eq!(pa.weights, pb.weights);
                prop_assert_eq!(pa.means, pb.means);
                prop_assert_eq!(pa.covariances, pb.covariances);
                prop_assert_eq!(ra.matrix(), rb.matrix());
                prop_assert_eq!(ta.loglik_trace, tb.loglik_trace);
            }
            (Err(ea), Err(eb)) => prop_assert_eq!(ea.to_string(), eb.to_string()),
            _ => return Err(TestCaseError::fail("one run failed, the other did not")),
        }
    }

    #[test]
    fn cd_satisfies_kkt_and_beats_zero(
        seed in any::<u64>(),
        n in 20usize..50,
        p in 1usize..8,
        frac in 0.05f64..0.95,
    ) {
        let prob = random_problem(seed, n, p);
        let lambda = frac * lambda_max(&prob);
        let b = fit_cd(&prob, lambda, &CdConfig::default()).unwrap();
        let report = kkt_check(&prob, &b, lambda, 1e-6);
        prop_assert!(report.ok, "violations {:?}", report.violations());
        prop_assert!(
            prob.objective(&b, lambda) <= prob.objective(&DVector::zeros(p), lambda) + 1e-12
        );
    }

    #[test]
    fn cd_objective_matches_enumeration(
        seed in any::<u64>(),
        n in 15usize..40,
        p in 1usize..=6,
        frac in 0.05f64..0.9,
    ) {
        let prob = random_problem(seed, n, p);
        let lambda = frac * lambda_max(&prob);
        let b = fit_cd(&prob, lambda, &CdConfig::default()).unwrap();
        let best = lasso_objective_by_enumeration(&prob, lambda);
        let got = prob.objective(&b, lambda);
        prop_assert!((got - best).abs() <= 1e-8, "{got} vs enumerated {best}");
    }

    #[test]
    fn path_l1_norm_grows_as_lambda_falls(seed in any::<u64>(), n in 20usize..40, p in 2usize..7) {
        let prob = random_problem(seed, n, p);
        let lmax = lambda_max(&prob);
        let grid = LambdaGrid::new(0.9 * lmax, 0.1 * lmax, 0.08 * lmax).unwrap();
        let path = grid_path(&prob, grid).unwrap();
        for i in 1..path.lambdas().len() {
            let prev: f64 = path.coefs().row(i - 1).iter().map(|v| v.abs()).sum();
            let next: f64 = path.coefs().row(i).iter().map(|v| v.abs()).sum();
            prop_assert!(prev <= next + 1e-8, "l1 fell from {prev} to {next}");
        }
    }

    #[test]
    fn lars_agrees_with_cd(seed in any::<u64>(), p in 2usize..7, extra in 0usize..30) {
        let n = 2 * p + 4 + extra;
        let prob = random_problem(seed, n, p);
        let path = lars_path(&prob).unwrap();
        for (i, &lambda) in path.lambdas().iter().enumerate() {
            let b = path.coefs().row(i).transpose();
            prop_assert!(kkt_check(&prob, &b, lambda, 1e-8).ok, "breakpoint {i}");
        }
        let lmax = lambda_max(&prob);
        for i in 0..10 {
            let lambda = lmax * (i as f64 + 0.5) / 10.0;
            let interp = path.interpolate(lambda);
            let direct = fit_cd(&prob, lambda, &CdConfig::default()).unwrap();
            prop_assert!(
                (interp - direct).amax() < 1e-5,
                "lambda {lambda} differs beyond 1e-5"
            );
        }
    }

    #[test]
    fn scaling_y_scales_the_path_but_not_the_order(
        seed in any::<u64>(),
        n in 25usize..45,
        p in 2usize..7,
        c in 0.1f64..10.0,
    ) {
        let x = gaussian_matrix(seed, "prop:scale-x", n, p);
        let y = gaussian_vector(seed, "prop:scale-y", n);
        let (prob, _, _) = LassoProblem::from_raw(&x, &y).unwrap();
        let (scaled, _, _) = LassoProblem::from_raw(&x, &(&y * c)).unwrap();

        let lmax = lambda_max(&prob);
        prop_assert!((lambda_max(&scaled) - c * lmax).abs() <= 1e-9 * c * lmax);

        let grid = LambdaGrid::new(0.9 * lmax, 0.1 * lmax, 0.1 * lmax).unwrap();
        let grid_c = LambdaGrid::new(0.9 * lmax * c, 0.1 * lmax * c, 0.1 * lmax * c).unwrap();
        let path = grid_path(&prob, grid).unwrap();
        let path_c = grid_path(&scaled, grid_c).unwrap();
        let scale_tol = 1e-6 * path_c.coefs().amax().max(1.0);
        for i in 0..path.lambdas().len() {
            for j in 0..p {
                let lhs = path_c.coefs()[(i, j)];
                let rhs = c * path.coefs()[(i, j)];
                prop_assert!((lhs - rhs).abs() <= scale_tol, "({i},{j}): {lhs} vs {rhs}");
            }
        }

        let names: Vec<String> = (1..=p).map(|j| format!("f{j}")).collect();
        let order: Vec<String> = rank_features(&path, &names)
            .entries
            .into_iter()
            .map(|e| e.feature)
            .collect();
        let order_c: Vec<String> = rank_features(&path_c, &names)
            .entries
            .into_iter()
            .map(|e| e.feature)
            .collect();
        prop_assert_eq!(order, order_c);
    }

    #[test]
    fn bic_table_ignores_row_order(
        seed in any::<u64>(),
        n in 10usize..1000,
        d in 1usize..4,
        ks in prop::collection::btree_set(1usize..=8, 1..6),
    ) {
        let mut rng = substream(seed, "prop:bic");
        let n = n as f64;
        let mut rows: Vec<BicRow> = ks
            .iter()
            .map(|&k| {
                let loglik = -500.0 * rng.random::<f64>();
                let n_params = count_params(k, d);
                BicRow {
                    k,
                    loglik,
                    n_params,
                    bic: bic(loglik, n_params, n),
                }
            })
            .collect();
        let direct = BicTable::from_rows(rows.clone());
        rows.shuffle(&mut rng);
        let shuffled = BicTable::from_rows(rows);
        prop_assert_eq!(direct.best_k, shuffled.best_k);
        prop_assert_eq!(&direct.rows, &shuffled.rows);

        let display = bic_display_transform(&direct);
        let min = direct
            .rows
            .iter()
            .map(|r| r.bic)
            .fold(f64::INFINITY, f64::min);
        for (row, &v) in direct.rows.iter().zip(&display) {
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, row.bic == min);
        }
    }
}

#[test]
fn em_loglik_ignores_row_order() {
    // two well-separated blobs: every restart lands in the same optimum, so
    // the fitted likelihood cannot depend on row order
    for seed in [11u64, 12, 13] {
        let mut rng = substream(seed, "perm:data");
        let n = 40;
        let x = DMatrix::from_fn(n, 2, |i, _| {
            let center = if i % 2 == 0 { -5.0 } else { 5.0 };
            center + rng.sample::<f64, _>(StandardNormal)
        });
        let cfg = EmConfig {
            restarts: 4,
            max_iter: 300,
            tol: 1e-10,
            reg: None,
            seed,
        };
        let (_, _, direct) = fit_em(&x, 2, &cfg).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, "perm:order"));
        let permuted = DMatrix::from_fn(n, 2, |i, j| x[(order[i], j)]);
        let (_, _, shuffled) = fit_em(&permuted, 2, &cfg).unwrap();

        let a = *direct.loglik_trace.last().unwrap();
        let b = *shuffled.loglik_trace.last().unwrap();
        assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");

        // K = 1 has a closed-form fit, so any data works
        let (_, _, one) = fit_em(&x, 1, &cfg).unwrap();
        let (_, _, one_perm) = fit_em(&permuted, 1, &cfg).unwrap();
        let a1 = *one.loglik_trace.last().unwrap();
        let b1 = *one_perm.loglik_trace.last().unwrap();
        assert!((a1 - b1).abs() < 1e-8, "seed {seed} K=1: {a1} vs {b1}");
    }
}

#[test]
fn synth_supports_from_disjoint_seeds_barely_overlap() {
    // two independent size-6 draws from 40 features share 6*6/40 = 0.9
    // positions on average with variance ~0.666; the mean over 40 pairs has
    // standard error ~0.129, so 1.29 is a +3 sigma bar
    let (p, s, pairs) = (40, 6, 40u64);
    let mut total = 0usize;
    for i in 0..pairs {
        let a = generate_synth(&SynthSpec::new(4, p, s, Link::Linear, i)).unwrap();
        let b = generate_synth(&SynthSpec::new(4, p, s, Link::Linear, 1000 + i)).unwrap();
        total += a.support.iter().filter(|j| b.support.contains(j)).count();

        let again = generate_synth(&SynthSpec::new(4, p, s, Link::Linear, i)).unwrap();
        assert_eq!(a.dataset, again.dataset);
        assert_eq!(a.support, again.support);
    }
    let mean = total as f64 / pairs as f64;
    assert!(mean <= 1.29, "mean overlap {mean} too high for independence");
}

#[test]
fn ordinal_levels_get_their_gaussian_mass() {
    // latent t ~ N(0, 1 + 0.5^2), cuts at -1, 0, 1: standardized cuts at
    // z = +-0.8944 and 0 give masses 0.1856, 0.3144, 0.3144, 0.1856
    let spec = SynthSpec {
        noise_sd: 0.5,
        ..SynthSpec::new(20000, 10, 4, Link::Ordinal4, 2024)
    };
    let data = generate_synth(&spec).unwrap();
    let mut counts = [0usize; 4];
    for &l in &data.dataset.labels {
        counts[l - 1] += 1;
    }
    let expected = [0.1856, 0.3144, 0.3144, 0.1856];
    for (level, (&count, &want)) in counts.iter().zip(&expected).enumerate() {
        let got = count as f64 / spec.n as f64;
        assert!(
            (got - want).abs() < 0.012,
            "level {}: mass {got} vs {want}",
            level + 1
        );
    }
}
