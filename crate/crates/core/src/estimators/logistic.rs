//! Damped Newton-Raphson for weighted logistic regression.
//!
//! Everything is on the mean scale: the objective is the weighted
//! log-likelihood divided by the total weight, so the convergence tolerance
//! does not depend on the number of records.

use super::EstimateError;

/// Coefficients beyond this magnitude are treated as separation.
pub const DIVERGENCE_LIMIT: f64 = 30.0;

/// Largest number of step halvings per iteration.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    /// Inverse of the total (not mean) information matrix.
    pub covariance: Vec<Vec<f64>>,
    /// Mean log-likelihood after each accepted step, starting at zero.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the mean-scale gradient at the returned coefficients.
    pub gradient_norm: f64,
}

impl LogisticFit {
    pub fn log_likelihood(&self) -> f64 {
        *self.trace.last().expect("trace starts non-empty")
    }

    pub fn se(&self, j: usize) -> f64 {
        self.covariance[j][j].sqrt()
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean weighted log-likelihood `sum w (y eta - ln(1 + e^eta)) / sum w`.
pub fn logistic_log_likelihood(x: &[Vec<f64>], y: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let sum: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((xi, yi), wi)| {
            let eta = dot(xi, beta);
            wi * (yi * eta - softplus(eta))
        })
        .sum();
    sum / total
}

fn derivatives(x: &[Vec<f64>], y: &[f64], w: &[f64], beta: &[f64], total: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let mut grad = vec![0.0; p];
    let mut info = vec![vec![0.0; p]; p];
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        let mu = sigmoid(dot(xi, beta));
        let r = wi * (yi - mu);
        let v = wi * mu * (1.0 - mu);
        for j in 0..p {
            grad[j] += r * xi[j];
            for k in 0..=j {
                info[j][k] += v * xi[j] * xi[k];
            }
        }
    }
    for j in 0..p {
        grad[j] /= total;
        for k in 0..=j {
            info[j][k] /= total;
            info[k][j] = info[j][k];
        }
    }
    (grad, info)
}

/// Lower-triangular Cholesky factor, or `None` if `a` is not numerically
/// positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i][j] - dot(&l[i][..j], &l[j][..j]);
            if i == j {
                if !(s > 1e-12 * scale) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (b[i] - dot(&l[i][..i], &z[..i])) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    x
}

fn inverse(l: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[i][j] = col[i] / scale;
        }
    }
    inv
}

fn validate(x: &[Vec<f64>], y: &[f64], w: &[f64], tolerance: f64) -> Result<usize, EstimateError> {
    let shape = |m: String| Err(EstimateError::Shape(m));
    let p = x.first().map_or(0, Vec::len);
    if p == 0 {
        return shape("no predictors".into());
    }
    if x.len() < p {
        return shape(format!("{} records for {p} coefficients", x.len()));
    }
    if x.iter().any(|r| r.len() != p) {
        return shape("ragged predictor rows".into());
    }
    if y.len() != x.len() || w.len() != x.len() {
        return shape("outcome, weight and predictor lengths differ".into());
    }
    if !(tolerance > 0.0) {
        return shape("tolerance must be positive".into());
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return shape("outcomes must lie in [0, 1]".into());
    }
    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !(w.iter().sum::<f64>() > 0.0) {
        return shape("weights must be non-negative with a positive total".into());
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return shape("non-finite predictor".into());
    }
    Ok(p)
}

/// Weighted fit. Outcomes may be fractional (event share of an aggregated
/// record, with the record count as weight). With `divergence` set, any
/// coefficient leaving `[-limit, limit]` aborts with a separation error.
pub fn newton_raphson_weighted(
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    tolerance: f64,
    max_iter: usize,
    divergence: Option<f64>,
) -> Result<LogisticFit, EstimateError> {
    let p = validate(x, y, w, tolerance)?;
    let total: f64 = w.iter().sum();
    let mut beta = vec![0.0; p];
    let mut ll = logistic_log_likelihood(x, y, w, &beta);
    let mut trace = vec![ll];
    for iteration in 0..=max_iter {
        let (grad, info) = derivatives(x, y, w, &beta, total);
        let gradient_norm = grad.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
        let l = cholesky(&info).ok_or(EstimateError::Singular)?;
        if gradient_norm < tolerance {
            return Ok(LogisticFit {
                covariance: inverse(&l, total),
                coefficients: beta,
                trace,
                iterations: iteration,
                gradient_norm,
            });
        }
        if iteration == max_iter {
            break;
        }
        let step = cholesky_solve(&l, &grad);
        // Rounding can make an exact-ascent step look like a tiny decrease
        // once the fit is at machine precision; allow for that slack.
        let slack = 4.0 * f64::EPSILON * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let ll_new = logistic_log_likelihood(x, y, w, &candidate);
            if ll_new >= ll - slack {
                accepted = Some((candidate, ll_new));
                break;
            }
            t *= 0.5;
        }
        let Some((candidate, ll_new)) = accepted else {
            return Err(EstimateError::NonConvergence(iteration + 1));
        };
        beta = candidate;
        ll = ll_new;
        trace.push(ll);
        if let Some(limit) = divergence {
            if let Some(b) = beta.iter().find(|b| b.abs() > limit) {
                return Err(EstimateError::Separation(format!(
                    "coefficient {b:.3} exceeds {limit} in magnitude"
                )));
            }
        }
    }
    Err(EstimateError::NonConvergence(max_iter))
}

/// Unweighted fit of 0/1 outcomes from the zero vector until the gradient
/// max-norm (mean scale) drops below `tolerance`.
pub fn newton_raphson_logistic(
    predictors: &[Vec<f64>],
    outcomes: &[u8],
    tolerance: f64,
    max_iter: usize,
) -> Result<LogisticFit, EstimateError> {
    if outcomes.iter().any(|&o| o > 1) {
        return Err(EstimateError::Shape("outcomes must be 0 or 1".into()));
    }
    let y: Vec<f64> = outcomes.iter().map(|&o| f64::from(o)).collect();
    let w = vec![1.0; y.len()];
    newton_raphson_weighted(predictors, &y, &w, tolerance, max_iter, None)
}
