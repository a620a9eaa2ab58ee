//! Full-covariance Gaussian mixture models fit by EM.
//!
//! The mixture density is `sum_k w_k N(y; mu_k, sigma_k)` with free weights on
//! the simplex and unconstrained symmetric positive definite covariances. The
//! fitter runs several independently seeded restarts of EM and keeps the best
//! final log-likelihood; a small ridge is added to every covariance update to
//! keep the factorizations well posed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::rng::substream;
use rand::Rng;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("component {0} lost its responsibility mass")]
    DegenerateComponent(usize),
    #[error("invalid mixture parameters: {0}")]
    Invalid(String),
}

/// Mixture parameters: weights on the simplex, one mean and one symmetric
/// positive definite covariance per component.
#[derive(Debug, Clone)]
pub struct GmmParams {
    pub weights: DVector<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl GmmParams {
    pub fn new(
        weights: DVector<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self, GmmError> {
        let params = Self {
            weights,
            means,
            covariances,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn validate(&self) -> Result<(), GmmError> {
        let k = self.k();
        if k == 0 {
            return Err(GmmError::Invalid("no components".into()));
        }
        if self.means.len() != k || self.covariances.len() != k {
            return Err(GmmError::Invalid(format!(
                "{} weights, {} means, {} covariances",
                k,
                self.means.len(),
                self.covariances.len()
            )));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(GmmError::Invalid("negative weight".into()));
        }
        if (self.weights.sum() - 1.0).abs() > 1e-12 {
            return Err(GmmError::Invalid(format!(
                "weights sum to {}",
                self.weights.sum()
            )));
        }
        let d = self.dim();
        for (idx, (mu, sigma)) in self.means.iter().zip(&self.covariances).enumerate() {
            if mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
                return Err(GmmError::Invalid(format!(
                    "component {idx} has inconsistent dimensions"
                )));
            }
            for i in 0..d {
                for j in 0..i {
                    if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                        return Err(GmmError::Invalid(format!(
                            "covariance {idx} is not symmetric"
                        )));
                    }
                }
            }
            if Cholesky::new(sigma.clone()).is_none() {
                return Err(GmmError::NotPositiveDefinite);
            }
        }
        Ok(())
    }
}

/// Posterior membership probabilities, one row per observation.
#[derive(Debug, Clone)]
pub struct Responsibilities {
    r: DMatrix<f64>,
}

impl Responsibilities {
    /// Validate entries in `[0, 1]` and unit row sums (within `1e-12`).
    pub fn new(r: DMatrix<f64>) -> Result<Self, GmmError> {
        for i in 0..r.nrows() {
            let mut sum = 0.0;
            for j in 0..r.ncols() {
                let v = r[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(GmmError::Invalid(format!(
                        "responsibility ({i},{j}) = {v} outside [0,1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(GmmError::Invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { r })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    pub fn k(&self) -> usize {
        self.r.ncols()
    }
}

/// Diagnostics from one [`fit_em`] call (the winning restart).
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Log-likelihood after each E-step of the winning restart.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub seed: u64,
}

/// EM fitting configuration.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change below which a restart is converged.
    pub tol: f64,
    /// Covariance ridge; `None` picks `1e-6 * trace(global cov) / d`.
    pub reg: Option<f64>,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 500,
            tol: 1e-8,
            reg: None,
            seed: 0,
        }
    }
}

/// Log of the multivariate normal density, via a Cholesky factorization.
pub fn gaussian_logpdf(
    y: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64, GmmError> {
    let chol = Cholesky::new(sigma.clone()).ok_or(GmmError::NotPositiveDefinite)?;
    Ok(prepared_logpdf(
        &PreparedComponent::from_parts(mu.clone(), chol),
        y,
    ))
}

struct PreparedComponent {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    half_log_det: f64,
}

impl PreparedComponent {
    fn from_parts(mean: DVector<f64>, chol: Cholesky<f64, Dyn>) -> Self {
        let half_log_det: f64 = (0..mean.len()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
        Self {
            mean,
            chol,
            half_log_det,
        }
    }
}

const LN_2PI: f64 = 1.8378770664093453;

fn prepared_logpdf(c: &PreparedComponent, y: &DVector<f64>) -> f64 {
    let diff = y - &c.mean;
    let z = c
        .chol
        .l_dirty()
        .solve_lower_triangular(&diff)
        .expect("cholesky factor has positive diagonal");
    -0.5 * (y.len() as f64) * LN_2PI - c.half_log_det - 0.5 * z.norm_squared()
}

fn prepare_components(params: &GmmParams) -> Result<Vec<PreparedComponent>, GmmError> {
    params
        .means
        .iter()
        .zip(&params.covariances)
        .map(|(mu, sigma)| {
            Cholesky::new(sigma.clone())
                .map(|chol| PreparedComponent::from_parts(mu.clone(), chol))
                .ok_or(GmmError::NotPositiveDefinite)
        })
        .collect()
}

fn log_weighted_terms(
    components: &[PreparedComponent],
    weights: &DVector<f64>,
    y: &DVector<f64>,
    terms: &mut [f64],
) {
    for (k, c) in components.iter().enumerate() {
        terms[k] = if weights[k] > 0.0 {
            weights[k].ln() + prepared_logpdf(c, y)
        } else {
            f64::NEG_INFINITY
        };
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Log of the mixture density at `y`, stabilized by log-sum-exp.
pub fn mixture_logpdf(y: &DVector<f64>, params: &GmmParams) -> Result<f64, GmmError> {
    let components = prepare_components(params)?;
    let mut terms = vec![0.0; params.k()];
    log_weighted_terms(&components, &params.weights, y, &mut terms);
    Ok(log_sum_exp(&terms))
}

/// Posterior responsibilities and the total log-likelihood of `x` under
/// `params`.
pub fn e_step(
    x: &DMatrix<f64>,
    params: &GmmParams,
) -> Result<(Responsibilities, f64), GmmError> {
    let n = x.nrows();
    let k = params.k();
    let components = prepare_components(params)?;
    let mut r = DMatrix::zeros(n, k);
    let mut terms = vec![0.0; k];
    let mut loglik = 0.0;
    for i in 0..n {
        let y = DVector::from_iterator(x.ncols(), x.row(i).iter().copied());
        log_weighted_terms(&components, &params.weights, &y, &mut terms);
        let lse = log_sum_exp(&terms);
        loglik += lse;
        let mut row_sum = 0.0;
        for j in 0..k {
            let v = (terms[j] - lse).exp();
            r[(i, j)] = v;
            row_sum += v;
        }
        for j in 0..k {
            r[(i, j)] /= row_sum;
        }
    }
    Ok((Responsibilities::new(r)?, loglik))
}

/// Weighted-moment parameter update with ridge `reg` added to every
/// covariance diagonal.
pub fn m_step(
    x: &DMatrix<f64>,
    r: &Responsibilities,
    reg: f64,
) -> Result<GmmParams, GmmError> {
    assert!(reg >= 0.0, "ridge must be nonnegative");
    let n = x.nrows();
    let d = x.ncols();
    let k = r.k();
    assert_eq!(r.n(), n, "responsibility rows must match data rows");

    let rm = r.matrix();
    let mut weights = DVector::zeros(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = rm.column(j).sum();
        if nk < 1e-8 * n as f64 {
            return Err(GmmError::DegenerateComponent(j));
        }
        let mut mu = DVector::zeros(d);
        for i in 0..n {
            for c in 0..d {
                mu[c] += rm[(i, j)] * x[(i, c)];
            }
        }
        mu /= nk;

        let mut sigma = DMatrix::zeros(d, d);
        for i in 0..n {
            let w = rm[(i, j)];
            for a in 0..d {
                let da = x[(i, a)] - mu[a];
                for b in 0..=a {
                    sigma[(a, b)] += w * da * (x[(i, b)] - mu[b]);
                }
            }
        }
        sigma /= nk;
        for a in 0..d {
            for b in 0..a {
                sigma[(b, a)] = sigma[(a, b)];
            }
            sigma[(a, a)] += reg;
        }

        weights[j] = nk / n as f64;
        means.push(mu);
        covariances.push(sigma);
    }
    let total = weights.sum();
    weights /= total;
    GmmParams::new(weights, means, covariances)
}

/// Hard assignment: 1-based index of the largest responsibility per row, ties
/// resolved toward the smallest index.
pub fn map_assign(r: &Responsibilities) -> Vec<usize> {
    let rm = r.matrix();
    (0..rm.nrows())
        .map(|i| {
            let mut best = 0;
            for j in 1..rm.ncols() {
                if rm[(i, j)] > rm[(i, best)] {
                    best = j;
                }
            }
            best + 1
        })
        .collect()
}

/// Responsibility of the MAP component for each row.
pub fn map_prob(r: &Responsibilities) -> Vec<f64> {
    let rm = r.matrix();
    map_assign(r)
        .into_iter()
        .enumerate()
        .map(|(i, k)| rm[(i, k - 1)])
        .collect()
}

fn global_moments(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let d = x.ncols();
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            let da = x[(i, a)] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (x[(i, b)] - mean[b]);
            }
        }
    }
    cov /= n as f64;
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    (mean, cov)
}

/// k-means++ style seeding: the first mean is a uniform data row, later means
/// are rows drawn with probability proportional to the squared distance to the
/// closest mean chosen so far.
fn seed_means(x: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> Vec<DVector<f64>> {
    let n = x.nrows();
    let row = |i: usize| DVector::from_iterator(x.ncols(), x.row(i).iter().copied());
    let mut means: Vec<DVector<f64>> = vec![row(rng.random_range(0..n))];
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| (row(i) - &means[0]).norm_squared())
        .collect();
    while means.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let m = row(pick);
        for i in 0..n {
            dist2[i] = dist2[i].min((row(i) - &m).norm_squared());
        }
        means.push(m);
    }
    means
}

struct SingleRun {
    params: GmmParams,
    resp: Responsibilities,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_restart(
    x: &DMatrix<f64>,
    k: usize,
    reg: f64,
    cfg: &EmConfig,
    stream: &str,
) -> Result<SingleRun, GmmError> {
    let n = x.nrows();
    let d = x.ncols();
    let mut rng = substream(cfg.seed, stream);
    let (_, global_cov) = global_moments(x);
    let base_cov = {
        let mut c = global_cov;
        for a in 0..d {
            c[(a, a)] += reg;
        }
        c
    };

    let mut params = GmmParams::new(
        DVector::from_element(k, 1.0 / k as f64),
        seed_means(x, k, &mut rng),
        vec![base_cov.clone(); k],
    )?;

    let mut trace: Vec<f64> = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut reinit_used = vec![false; k];
    let mut last: Option<(Responsibilities, f64)> = None;

    while iterations < cfg.max_iter {
        let (resp, ll) = e_step(x, &params)?;
        iterations += 1;
        trace.push(ll);
        let done = prev_ll.is_finite() && (ll - prev_ll).abs() <= cfg.tol * ll.abs().max(1.0);
        prev_ll = ll;
        last = Some((resp, ll));
        if done {
            converged = true;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        match m_step(x, &last.as_ref().unwrap().0, reg) {
            Ok(next) => params = next,
            Err(GmmError::DegenerateComponent(bad)) => {
                if reinit_used[bad] {
                    return Err(GmmError::DegenerateComponent(bad));
                }
                reinit_used[bad] = true;
                // restart the dead component on the worst-fit observation and
                // begin a fresh ascent (the trace restarts so it stays monotone)
                let mut worst = 0;
                let mut worst_ll = f64::INFINITY;
                for i in 0..n {
                    let y = DVector::from_iterator(d, x.row(i).iter().copied());
                    let ll_i = mixture_logpdf(&y, &params)?;
                    if ll_i < worst_ll {
                        worst_ll = ll_i;
                        worst = i;
                    }
                }
                params.means[bad] = DVector::from_iterator(d, x.row(worst).iter().copied());
                params.covariances[bad] = base_cov.clone();
                params.weights[bad] = 1.0 / k as f64;
                let total = params.weights.sum();
                params.weights /= total;
                trace.clear();
                prev_ll = f64::NEG_INFINITY;
            }
            Err(other) => return Err(other),
        }
    }

    let (resp, _) = last.expect("at least one E-step ran");
    Ok(SingleRun {
        params,
        resp,
        trace,
        iterations,
        converged,
    })
}

/// Maximize the mixture log-likelihood by EM over `cfg.restarts` independent
/// initializations, keeping the best final log-likelihood (lowest restart
/// index wins exact ties). Deterministic for a fixed `cfg.seed`.
pub fn fit_em(
    x: &DMatrix<f64>,
    k: usize,
    cfg: &EmConfig,
) -> Result<(GmmParams, Responsibilities, FitReport), GmmError> {
    assert!(k >= 1, "need at least one component");
    assert!(x.nrows() > k, "need more observations than components");
    assert!(cfg.tol > 0.0, "tolerance must be positive");
    assert!(cfg.restarts >= 1, "need at least one restart");

    let reg = cfg.reg.unwrap_or_else(|| {
        let (_, cov) = global_moments(x);
        1e-6 * cov.trace() / x.ncols() as f64
    });

    let mut best: Option<(f64, SingleRun)> = None;
    for restart in 0..cfg.restarts {
        let run = run_restart(x, k, reg, cfg, &format!("em:k={k}:restart:{restart}"))?;
        let ll = *run.trace.last().expect("nonempty trace");
        let better = match &best {
            None => true,
            Some((best_ll, _)) => ll > *best_ll,
        };
        if better {
            best = Some((ll, run));
        }
    }
    let (_, run) = best.expect("at least one restart");
    let report = FitReport {
        loglik_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        restarts_used: cfg.restarts,
        seed: cfg.seed,
    };
    Ok((run.params, run.resp, report))
}
