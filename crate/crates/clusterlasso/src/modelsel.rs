//! BIC model selection over the number of mixture components.
//!
//! Each candidate K gets a full multi-restart EM fit; the score is
//! `-2*loglik + n_params*ln(n)` and the smallest score wins. The display
//! transform reproduces the shifted-log curve used for plotting.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::gmm::{fit_em, EmConfig, GmmError};

#[derive(Debug, Error)]
pub enum ModelselError {
    #[error("EM failed at K={k}: {source}")]
    Em { k: usize, source: GmmError },
}

/// One scanned candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct BicRow {
    pub k: usize,
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
}

/// Scan results sorted by K, with the winning K.
#[derive(Debug, Clone)]
pub struct BicTable {
    pub rows: Vec<BicRow>,
    pub best_k: usize,
}

impl BicTable {
    /// Sort rows by K, validate that the parameter count grows with K, and
    /// pick `best_k` as the smallest K attaining the minimal bic.
    pub fn from_rows(mut rows: Vec<BicRow>) -> Self {
        assert!(!rows.is_empty(), "table must have at least one row");
        rows.sort_by_key(|r| r.k);
        for w in rows.windows(2) {
            assert!(w[0].k < w[1].k, "duplicate K {}", w[1].k);
            assert!(
                w[0].n_params < w[1].n_params,
                "parameter count must grow with K"
            );
        }
        let mut best = &rows[0];
        for r in &rows[1..] {
            if r.bic < best.bic {
                best = r;
            }
        }
        let best_k = best.k;
        Self { rows, best_k }
    }

    /// CSV with header `K,loglik,n_params,bic,display`.
    pub fn to_csv(&self) -> String {
        let display = bic_display_transform(self);
        let mut out = String::from("K,loglik,n_params,bic,display\n");
        for (row, disp) in self.rows.iter().zip(display) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.k, row.loglik, row.n_params, row.bic, disp
            ));
        }
        out
    }
}

/// Free parameters of a K-component full-covariance mixture in dimension d:
/// K−1 weights, K·d mean entries, K·d(d+1)/2 covariance entries.
pub fn count_params(k: usize, d: usize) -> usize {
    assert!(k >= 1 && d >= 1);
    (k - 1) + k * d + k * d * (d + 1) / 2
}

/// `-2*loglik + n_params*ln(n)`; smaller is better.
pub fn bic(loglik: f64, n_params: usize, n: f64) -> f64 {
    assert!(n >= 2.0, "need at least two observations");
    -2.0 * loglik + n_params as f64 * n.ln()
}

/// Fit a mixture for every K in `k_min..=k_max` and score each fit.
///
/// All fits derive their randomness from `cfg.seed` through per-K substreams,
/// so the whole table is reproducible from the one seed.
pub fn scan_k(
    x: &DMatrix<f64>,
    k_min: usize,
    k_max: usize,
    cfg: &EmConfig,
) -> Result<BicTable, ModelselError> {
    assert!(1 <= k_min && k_min <= k_max, "bad K range");
    assert!(x.nrows() > k_max, "need more observations than components");
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut rows = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let (_, _, report) = fit_em(x, k, cfg).map_err(|source| ModelselError::Em { k, source })?;
        let loglik = *report
            .loglik_trace
            .last()
            .expect("fit reports a nonempty trace");
        let n_params = count_params(k, d);
        rows.push(BicRow {
            k,
            loglik,
            n_params,
            bic: bic(loglik, n_params, n),
        });
    }
    for w in rows.windows(2) {
        if w[1].loglik < w[0].loglik {
            log::warn!(
                "log-likelihood dropped from K={} ({}) to K={} ({}); restarts may be too few",
                w[0].k,
                w[0].loglik,
                w[1].k,
                w[1].loglik
            );
        }
    }
    Ok(BicTable::from_rows(rows))
}

/// Shifted-log curve for plotting: `ln(bic - min_bic + 1)` per row, zero
/// exactly at rows attaining the minimum.
pub fn bic_display_transform(table: &BicTable) -> Vec<f64> {
    let min_bic = table
        .rows
        .iter()
        .map(|r| r.bic)
        .fold(f64::INFINITY, f64::min);
    table
        .rows
        .iter()
        .map(|r| (r.bic - min_bic + 1.0).ln())
        .collect()
}
