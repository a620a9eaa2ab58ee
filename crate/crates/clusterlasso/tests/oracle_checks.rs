//! Cross-checks against the independent oracle implementations: the
//! hand-rolled Jacobi eigensolver for PCA and a known mixture for EM.

use clusterlasso::gmm::{fit_em, map_assign, EmConfig};
use clusterlasso::oracles::jacobi_eigen;
use clusterlasso::pca::{fit_pca, project};
use clusterlasso::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn pca_matches_jacobi_on_fifty_matrices() {
    for seed in 0..50u64 {
        let mut rng = substream(seed, "oracle:pca");
        let (n, p, k) = (20, 5, 5);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let model = fit_pca(&x, k).unwrap();

        let means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let (evals, evecs) = jacobi_eigen(&cov);

        for j in 0..k {
            assert!(
                (model.eigenvalues[j] - evals[j]).abs() <= 1e-8 * evals[j].max(1e-12),
                "seed {seed} eigenvalue {j}: {} vs {}",
                model.eigenvalues[j],
                evals[j]
            );
            // axes agree up to sign
            let axis = model.components.row(j);
            let oracle = evecs.column(j);
            let dot: f64 = (0..p).map(|c| axis[c] * oracle[c]).sum();
            for c in 0..p {
                let want = dot.signum() * oracle[c];
                assert!(
                    (axis[c] - want).abs() < 1e-8,
                    "seed {seed} axis {j} loading {c}: {} vs {want}",
                    axis[c]
                );
            }
        }

        // score variances equal the eigenvalues
        let scores = project(&model, &x).unwrap();
        for j in 0..k {
            let col = scores.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!(
                (var - model.eigenvalues[j]).abs() <= 1e-8 * model.eigenvalues[j].max(1e-12),
                "seed {seed} score variance {j}"
            );
        }
    }
}

#[test]
fn em_recovers_a_separated_mixture() {
    // three blobs at the corners of a wide triangle: EM must place one
    // component per blob and assign membership accordingly
    let centers = [(-8.0, 0.0), (8.0, 0.0), (0.0, 12.0)];
    let per = 60;
    let mut rng = substream(99, "oracle:mix");
    let x = DMatrix::from_fn(3 * per, 2, |i, j| {
        let (cx, cy) = centers[i / per];
        let c = if j == 0 { cx } else { cy };
        c + rng.sample::<f64, _>(StandardNormal)
    });
    let cfg = EmConfig {
        restarts: 5,
        max_iter: 300,
        tol: 1e-9,
        reg: None,
        seed: 99,
    };
    let (params, resp, report) = fit_em(&x, 3, &cfg).unwrap();
    assert!(report.converged);

    // match each true center to its nearest fitted mean; all three must be
    // claimed by distinct components within a unit of error
    let mut used = [false; 3];
    for (cx, cy) in centers {
        let (best, dist) = (0..3)
            .map(|k| {
                let m = &params.means[k];
                (k, ((m[0] - cx).powi(2) + (m[1] - cy).powi(2)).sqrt())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(dist < 1.0, "center ({cx},{cy}) unmatched: nearest {dist}");
        assert!(!used[best], "component {best} claimed twice");
        used[best] = true;
        let w = params.weights[best];
        assert!((w - 1.0 / 3.0).abs() < 0.05, "weight {w} far from 1/3");
    }

    // each blob's rows share one label
    let assign = map_assign(&resp);
    for blob in 0..3 {
        let first = assign[blob * per];
        assert!(
            assign[blob * per..(blob + 1) * per].iter().all(|&c| c == first),
            "blob {blob} split across components"
        );
    }
}
