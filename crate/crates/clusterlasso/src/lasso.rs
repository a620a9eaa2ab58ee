//! The penalized least-squares problem `(1/2)||y - Xb||^2 + lambda*||b||_1`,
//! solved two independent ways: cyclic coordinate descent at a fixed penalty,
//! and a LARS homotopy with the zero-crossing modification that traces the
//! whole piecewise-linear solution path. Subgradient (KKT) checks certify any
//! claimed solution.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::data::{standardize, DataError};

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("coordinate descent did not converge at lambda={lambda} within {iterations} sweeps")]
    NoConvergence {
        lambda: f64,
        iterations: usize,
        /// Last iterate, not certified optimal.
        last: DVector<f64>,
    },
    #[error("equiangular system is degenerate near lambda={lambda}")]
    DegenerateStep { lambda: f64 },
}

impl From<DataError> for LassoError {
    fn from(e: DataError) -> Self {
        LassoError::Invalid(e.to_string())
    }
}

/// A centered, column-standardized design with a centered response.
///
/// Centering removes the intercept from the objective; unit sample standard
/// deviation puts every penalty on the same scale, so `lambda` lives in the
/// units of `|x_j' y|`.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    col_norm_sq: Vec<f64>,
}

impl LassoProblem {
    /// Wrap an already centered and standardized design.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self, LassoError> {
        let n = x.nrows();
        let p = x.ncols();
        if n < 2 {
            return Err(LassoError::Invalid("need at least two rows".into()));
        }
        if p == 0 {
            return Err(LassoError::Invalid("need at least one column".into()));
        }
        if y.len() != n {
            return Err(LassoError::Invalid(format!(
                "response length {} does not match {} rows",
                y.len(),
                n
            )));
        }
        for j in 0..p {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            if mean.abs() >= 1e-10 {
                return Err(LassoError::Invalid(format!(
                    "column {j} has mean {mean}, expected centered"
                )));
            }
            let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n as f64 - 1.0))
                .sqrt();
            if (sd - 1.0).abs() >= 1e-8 {
                return Err(LassoError::Invalid(format!(
                    "column {j} has sample sd {sd}, expected 1"
                )));
            }
        }
        let y_mean = y.sum() / n as f64;
        if y_mean.abs() >= 1e-10 {
            return Err(LassoError::Invalid(format!(
                "response has mean {y_mean}, expected centered"
            )));
        }
        let col_norm_sq = (0..p).map(|j| x.column(j).norm_squared()).collect();
        Ok(Self { x, y, col_norm_sq })
    }

    /// Center and standardize raw data, then wrap it. Returns the column
    /// means/scales and the response mean so predictions can be mapped back.
    pub fn from_raw(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<(Self, crate::data::StandardizationRecord, f64), LassoError> {
        let (xs, record) = standardize(x)?;
        let y_mean = y.sum() / y.len() as f64;
        let yc = y.map(|v| v - y_mean);
        Ok((Self::new(xs, yc)?, record, y_mean))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `(1/2)||y - Xb||^2 + lambda*||b||_1`.
    pub fn objective(&self, b: &DVector<f64>, lambda: f64) -> f64 {
        let r = &self.y - &self.x * b;
        0.5 * r.norm_squared() + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Smallest penalty whose solution is the zero vector: `max_j |x_j' y|`.
pub fn lambda_max(prob: &LassoProblem) -> f64 {
    (0..prob.p())
        .map(|j| prob.x.column(j).dot(&prob.y).abs())
        .fold(0.0, f64::max)
}

/// Coordinate descent configuration. Convergence is declared when the largest
/// single-coordinate update in a sweep falls below `tol * max(1, ||b||_inf)`.
#[derive(Debug, Clone)]
pub struct CdConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
            warm_start: None,
        }
    }
}

/// Minimize the penalized objective at one `lambda` by cyclic coordinate
/// descent with soft-thresholding updates.
pub fn fit_cd(prob: &LassoProblem, lambda: f64, cfg: &CdConfig) -> Result<DVector<f64>, LassoError> {
    assert!(lambda >= 0.0, "penalty must be nonnegative");
    assert!(cfg.tol > 0.0 && cfg.max_iter > 0);
    let n = prob.n();
    let p = prob.p();
    let mut b = match &cfg.warm_start {
        Some(w) => {
            assert_eq!(w.len(), p, "warm start length must match column count");
            w.clone()
        }
        None => DVector::zeros(p),
    };
    let mut r = &prob.y - &prob.x * &b;
    for sweep in 0..cfg.max_iter {
        let mut max_update = 0.0f64;
        for j in 0..p {
            let xj = prob.x.column(j);
            let old = b[j];
            let rho = xj.dot(&r) + prob.col_norm_sq[j] * old;
            let new = soft_threshold(rho, lambda) / prob.col_norm_sq[j];
            if new != old {
                let delta = old - new;
                for i in 0..n {
                    r[i] += xj[i] * delta;
                }
                b[j] = new;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < cfg.tol * b.amax().max(1.0) {
            return Ok(b);
        }
        // rebuild the residual occasionally so incremental drift cannot
        // masquerade as convergence
        if sweep % 64 == 63 {
            r = &prob.y - &prob.x * &b;
        }
    }
    Err(LassoError::NoConvergence {
        lambda,
        iterations: cfg.max_iter,
        last: b,
    })
}

/// Subgradient optimality report. `excess[j]` measures how far coordinate `j`
/// is from satisfying its condition; nonpositive values satisfy it exactly.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub ok: bool,
    pub tol: f64,
    pub excess: Vec<f64>,
}

impl KktReport {
    /// Coordinates whose condition fails at the report's tolerance.
    pub fn violations(&self) -> Vec<usize> {
        self.excess
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > self.tol)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Check the subgradient conditions: active coordinates need gradient
/// `x_j'(y - Xb) = lambda * sign(b_j)` within `tol`; inactive ones need
/// `|x_j'(y - Xb)| <= lambda + tol`.
pub fn kkt_check(prob: &LassoProblem, b: &DVector<f64>, lambda: f64, tol: f64) -> KktReport {
    assert!(tol > 0.0);
    let r = &prob.y - &prob.x * b;
    let mut excess = Vec::with_capacity(prob.p());
    for j in 0..prob.p() {
        let g = prob.x.column(j).dot(&r);
        let e = if b[j] != 0.0 {
            (g - lambda * b[j].signum()).abs()
        } else {
            g.abs() - lambda
        };
        excess.push(e);
    }
    let ok = excess.iter().all(|&e| e <= tol);
    KktReport { ok, tol, excess }
}

/// Coefficient trajectories over a strictly descending penalty grid.
#[derive(Debug, Clone)]
pub struct LassoPath {
    lambdas: Vec<f64>,
    coefs: DMatrix<f64>,
    entry_lambda: Vec<Option<f64>>,
}

impl LassoPath {
    /// `coefs` holds one row per grid point. `entry_lambda[j]` becomes the
    /// first (largest) stored penalty at which feature `j` is nonzero.
    pub fn new(lambdas: Vec<f64>, coefs: DMatrix<f64>) -> Result<Self, LassoError> {
        if lambdas.is_empty() {
            return Err(LassoError::Invalid("empty grid".into()));
        }
        if coefs.nrows() != lambdas.len() {
            return Err(LassoError::Invalid(format!(
                "{} coefficient rows for {} grid points",
                coefs.nrows(),
                lambdas.len()
            )));
        }
        for w in lambdas.windows(2) {
            if !(w[1] < w[0]) {
                return Err(LassoError::Invalid(format!(
                    "grid not strictly descending: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(LassoError::Invalid("grid values must be finite and nonnegative".into()));
        }
        let entry_lambda = (0..coefs.ncols())
            .map(|j| {
                (0..lambdas.len())
                    .find(|&i| coefs[(i, j)] != 0.0)
                    .map(|i| lambdas[i])
            })
            .collect();
        Ok(Self {
            lambdas,
            coefs,
            entry_lambda,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Grid-length x p matrix of coefficients.
    pub fn coefs(&self) -> &DMatrix<f64> {
        &self.coefs
    }

    pub fn entry_lambda(&self) -> &[Option<f64>] {
        &self.entry_lambda
    }

    pub fn n_features(&self) -> usize {
        self.coefs.ncols()
    }

    /// Linear interpolation between stored grid points; clamps outside the
    /// grid range. Exact for the piecewise-linear homotopy path.
    pub fn interpolate(&self, lambda: f64) -> DVector<f64> {
        let m = self.lambdas.len();
        if lambda >= self.lambdas[0] {
            return self.coefs.row(0).transpose();
        }
        if lambda <= self.lambdas[m - 1] {
            return self.coefs.row(m - 1).transpose();
        }
        let hi = self
            .lambdas
            .partition_point(|&l| l > lambda)
            .min(m - 1);
        let lo = hi - 1;
        let (l_lo, l_hi) = (self.lambdas[lo], self.lambdas[hi]);
        let w = (l_lo - lambda) / (l_lo - l_hi);
        self.coefs.row(lo).transpose() * (1.0 - w) + self.coefs.row(hi).transpose() * w
    }

    /// Long-format CSV with header `lambda,feature,coefficient`.
    pub fn to_csv(&self, feature_names: &[String]) -> String {
        assert_eq!(
            feature_names.len(),
            self.n_features(),
            "one name per feature"
        );
        let mut out = String::from("lambda,feature,coefficient\n");
        for (i, &l) in self.lambdas.iter().enumerate() {
            for (j, name) in feature_names.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", l, name, self.coefs[(i, j)]));
            }
        }
        out
    }
}

/// Descending penalty grid `start, start-step, ..., >= end`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl LambdaGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self, LassoError> {
        if !(start > end && end > 0.0 && step > 0.0) {
            return Err(LassoError::Invalid(format!(
                "grid needs start > end > 0 and step > 0, got start={start} end={end} step={step}"
            )));
        }
        Ok(Self { start, end, step })
    }

    /// Grid points `start - k*step`, keeping a point when it is at least
    /// `end - step*1e-6` so the endpoint survives rounding.
    pub fn points(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        let cutoff = self.end - self.step * 1e-6;
        let mut k = 0u64;
        loop {
            let v = self.start - k as f64 * self.step;
            if v < cutoff {
                break;
            }
            pts.push(v);
            k += 1;
        }
        pts
    }
}

/// Solve the problem at every grid point by coordinate descent, warm-starting
/// each solve from the previous (larger) penalty's solution.
pub fn grid_path(prob: &LassoProblem, grid: LambdaGrid) -> Result<LassoPath, LassoError> {
    grid_path_with(prob, grid, &CdConfig::default())
}

/// [`grid_path`] with explicit solver settings; `cd.warm_start` seeds only the
/// first grid point.
pub fn grid_path_with(
    prob: &LassoProblem,
    grid: LambdaGrid,
    cd: &CdConfig,
) -> Result<LassoPath, LassoError> {
    let points = grid.points();
    let p = prob.p();
    let mut coefs = DMatrix::zeros(points.len(), p);
    let mut warm = cd.warm_start.clone();
    for (i, &lambda) in points.iter().enumerate() {
        let cfg = CdConfig {
            max_iter: cd.max_iter,
            tol: cd.tol,
            warm_start: warm.take(),
        };
        let b = fit_cd(prob, lambda, &cfg)?;
        for j in 0..p {
            coefs[(i, j)] = b[j];
        }
        warm = Some(b);
    }
    LassoPath::new(points, coefs)
}

/// Trace the full piecewise-linear solution path from `lambda_max` down to
/// zero by the homotopy method: the active set keeps equal absolute
/// correlation, variables enter at correlation ties, and a variable whose
/// coefficient crosses zero leaves the active set.
pub fn lars_path(prob: &LassoProblem) -> Result<LassoPath, LassoError> {
    let p = prob.p();
    let x = &prob.x;
    let y = &prob.y;

    let c0: Vec<f64> = (0..p).map(|j| x.column(j).dot(y)).collect();
    let mut lambda = c0.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let mut breakpoints: Vec<(f64, DVector<f64>)> = vec![(lambda, DVector::zeros(p))];
    if lambda <= 0.0 {
        return path_from_breakpoints(breakpoints, p);
    }

    // every feature tied at the maximum absolute correlation starts active;
    // a tie batch with duplicated columns makes the equiangular system
    // singular, which the conditioning check below turns into DegenerateStep
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    for (j, &c) in c0.iter().enumerate() {
        if c.abs() >= lambda * (1.0 - 1e-12) {
            active.push(j);
            signs.push(c.signum());
        }
    }
    let mut b = DVector::zeros(p);
    let event_cap = 30 * p + 50;

    for _ in 0..event_cap {
        // solve for the current segment: coefficients on the active set are
        // b_A(l) = G^{-1}(X_A'y - l*s_A) with G = X_A'X_A, so as lambda drops
        // by t they move by t*d with d = G^{-1} s_A
        let a = active.len();
        let xa = x.select_columns(active.iter());
        let g = xa.transpose() * &xa;
        let chol = match Cholesky::new(g) {
            Some(c) => c,
            None => return Err(LassoError::DegenerateStep { lambda }),
        };
        // squared pivot ratio tracks the Gram condition number; duplicated
        // columns drive it to zero
        let ld = chol.l_dirty();
        let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
        for i in 0..a {
            pmin = pmin.min(ld[(i, i)]);
            pmax = pmax.max(ld[(i, i)]);
        }
        if !(pmin > 0.0) || (pmin / pmax).powi(2) <= 1e-12 {
            return Err(LassoError::DegenerateStep { lambda });
        }
        let s = DVector::from_iterator(a, signs.iter().copied());
        let cy = xa.transpose() * y;
        let ba = chol.solve(&(&cy - &s * lambda));
        for (idx, &j) in active.iter().enumerate() {
            b[j] = ba[idx];
        }
        let d = chol.solve(&s);
        let u = &xa * &d;

        let residual = y - x * &b;

        // candidate step sizes t (lambda decreases by t); the segment ends at
        // lambda = 0 if nothing intervenes
        let window = 1e-12 * lambda.max(1.0);
        let mut entries: Vec<(usize, f64, f64)> = Vec::new();
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            let cj = x.column(j).dot(&residual);
            let aj = x.column(j).dot(&u);
            // correlation model along the segment: c_j(t) = cj - t*aj must
            // stay inside [-(lambda-t), lambda-t]
            let mut best: Option<(f64, f64)> = None;
            for (t, sign) in [
                ((lambda - cj) / (1.0 - aj), 1.0),
                ((lambda + cj) / (1.0 + aj), -1.0),
            ] {
                if t.is_finite()
                    && t > window
                    && t < lambda
                    && best.map_or(true, |(tb, _)| t < tb)
                {
                    best = Some((t, sign));
                }
            }
            if let Some((t, sign)) = best {
                entries.push((j, t, sign));
            }
        }

        let mut t_best = lambda;
        #[derive(Clone, Copy, PartialEq)]
        enum Event {
            End,
            Enter,
            Leave(usize),
        }
        let mut event = Event::End;
        for &(_, t, _) in &entries {
            if t < t_best {
                t_best = t;
                event = Event::Enter;
            }
        }
        for (idx, &j) in active.iter().enumerate() {
            let t = -b[j] / d[idx];
            if t.is_finite() && t > window && t < t_best {
                t_best = t;
                event = Event::Leave(j);
            }
        }

        lambda -= t_best;
        if lambda < 0.0 {
            lambda = 0.0;
        }
        for (idx, &j) in active.iter().enumerate() {
            b[j] += t_best * d[idx];
        }

        match event {
            Event::End => {
                push_breakpoint(&mut breakpoints, lambda, &b);
                break;
            }
            Event::Enter => {
                push_breakpoint(&mut breakpoints, lambda, &b);
                // features whose boundary hit ties the step enter together,
                // so exactly collinear ties surface as a singular solve
                // instead of silently staying out
                for &(j, t, sign) in &entries {
                    if t <= t_best * (1.0 + 1e-12) {
                        active.push(j);
                        signs.push(sign);
                    }
                }
            }
            Event::Leave(j) => {
                let idx = active.iter().position(|&k| k == j).unwrap();
                active.remove(idx);
                signs.remove(idx);
                b[j] = 0.0;
                push_breakpoint(&mut breakpoints, lambda, &b);
            }
        }
        if lambda <= 0.0 {
            break;
        }
    }
    if lambda > 0.0 {
        return Err(LassoError::DegenerateStep { lambda });
    }
    path_from_breakpoints(breakpoints, p)
}

fn push_breakpoint(breakpoints: &mut Vec<(f64, DVector<f64>)>, lambda: f64, b: &DVector<f64>) {
    match breakpoints.last_mut() {
        Some(last) if !(lambda < last.0) => last.1 = b.clone(),
        _ => breakpoints.push((lambda, b.clone())),
    }
}

fn path_from_breakpoints(
    breakpoints: Vec<(f64, DVector<f64>)>,
    p: usize,
) -> Result<LassoPath, LassoError> {
    let lambdas: Vec<f64> = breakpoints.iter().map(|(l, _)| *l).collect();
    let mut coefs = DMatrix::zeros(lambdas.len(), p);
    for (i, (_, b)) in breakpoints.iter().enumerate() {
        for j in 0..p {
            coefs[(i, j)] = b[j];
        }
    }
    LassoPath::new(lambdas, coefs)
}
