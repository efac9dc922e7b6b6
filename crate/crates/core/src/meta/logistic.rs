//! Multinomial logistic regression with an L2 penalty, fit by damped Newton.
//!
//! Objective: summed cross-entropy plus `l2 / 2 · ‖W‖²` over the weights;
//! intercepts are not penalized. Parameters are laid out one block of
//! `1 + d` per class (intercept first).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub l2: f64,
    /// Converged once the gradient's Euclidean norm is at or below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            tolerance: 1e-6,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub classes: usize,
    pub features: usize,
    /// `classes × (1 + features)`, intercept in column 0.
    pub coefficients: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticModel {
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                self.coefficients[(k, 0)]
                    + row
                        .iter()
                        .enumerate()
                        .map(|(j, x)| self.coefficients[(k, j + 1)] * x)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Highest-scoring class; ties go to the lower index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let s = self.scores(row);
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        best
    }

    pub fn accuracy(&self, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = rows.iter().zip(labels).filter(|(r, &y)| self.predict(r) == y).count();
        hits as f64 / rows.len() as f64
    }
}

/// Z-scores each column in place (population s.d.); constant columns become
/// all zeros.
pub fn standardize_columns(rows: &mut [Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let n = rows.len() as f64;
    for j in 0..rows[0].len() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
}

struct Problem<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    k: usize,
    p: usize,
    l2: f64,
}

impl Problem<'_> {
    fn probs(&self, theta: &DVector<f64>, row: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.k)
            .map(|c| {
                let b = c * self.p;
                theta[b] + row.iter().enumerate().map(|(j, x)| theta[b + 1 + j] * x).sum::<f64>()
            })
            .collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in z.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        z.iter_mut().for_each(|v| *v /= s);
        z
    }

    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let mut f = 0.0;
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let z: Vec<f64> = (0..self.k)
                .map(|c| {
                    let b = c * self.p;
                    theta[b] + row.iter().enumerate().map(|(j, x)| theta[b + 1 + j] * x).sum::<f64>()
                })
                .collect();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            f += lse - z[y];
        }
        f + 0.5 * self.l2 * self.penalized_sq(theta)
    }

    fn penalized_sq(&self, theta: &DVector<f64>) -> f64 {
        (0..self.k)
            .flat_map(|c| (1..self.p).map(move |j| c * self.p + j))
            .map(|i| theta[i] * theta[i])
            .sum()
    }

    fn gradient_hessian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dim = self.k * self.p;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        let mut xt = vec![1.0; self.p];
        for (row, &y) in self.rows.iter().zip(self.labels) {
            xt[1..].copy_from_slice(row);
            let pr = self.probs(theta, row);
            for c in 0..self.k {
                let resid = pr[c] - if c == y { 1.0 } else { 0.0 };
                for a in 0..self.p {
                    g[c * self.p + a] += resid * xt[a];
                }
                for d in 0..self.k {
                    let w = if c == d { pr[c] * (1.0 - pr[c]) } else { -pr[c] * pr[d] };
                    for a in 0..self.p {
                        let wa = w * xt[a];
                        for b in 0..self.p {
                            h[(c * self.p + a, d * self.p + b)] += wa * xt[b];
                        }
                    }
                }
            }
        }
        for c in 0..self.k {
            for j in 1..self.p {
                let i = c * self.p + j;
                g[i] += self.l2 * theta[i];
                h[(i, i)] += self.l2;
            }
        }
        (g, h)
    }
}

/// Fits `classes`-way softmax regression on `rows` (n × d) with labels in
/// `0..classes`.
///
/// Newton directions are solved against `H + εI` (the intercepts have a
/// flat direction) and followed by Armijo backtracking.
pub fn fit_multinomial(
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &LogisticConfig,
) -> Result<LogisticModel, String> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err("rows and labels must be non-empty and the same length".into());
    }
    if labels.iter().any(|&y| y >= classes) {
        return Err("label out of range".into());
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err("ragged or non-finite feature rows".into());
    }
    let prob = Problem {
        rows,
        labels,
        k: classes,
        p: d + 1,
        l2: config.l2,
    };
    let dim = classes * (d + 1);
    let mut theta = DVector::zeros(dim);
    let mut f = prob.objective(&theta);
    for iter in 0..config.max_iter {
        let (g, h) = prob.gradient_hessian(&theta);
        let gnorm = g.norm();
        if gnorm <= config.tolerance {
            return Ok(finish(theta, classes, d, iter, gnorm));
        }
        let mut damping = 1e-8;
        let step = loop {
            let mut hd = h.clone();
            for i in 0..dim {
                hd[(i, i)] += damping;
            }
            if let Some(ch) = hd.cholesky() {
                break ch.solve(&(-&g));
            }
            damping *= 10.0;
            if damping > 1e6 {
                return Err(format!("Hessian not positive definite at iteration {iter}"));
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let fc = prob.objective(&cand);
            if fc <= f + 1e-4 * t * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // At rounding level the objective no longer resolves progress;
            // take the full step if it shrinks the gradient.
            let cand = &theta + &step;
            let (gc, _) = prob.gradient_hessian(&cand);
            if gc.norm() < gnorm {
                f = prob.objective(&cand);
                theta = cand;
            } else {
                return Err(format!(
                    "line search failed at iteration {iter} with gradient norm {gnorm:.3e}"
                ));
            }
        }
    }
    let (g, _) = prob.gradient_hessian(&theta);
    Err(format!(
        "no convergence after {} iterations (gradient norm {:.3e})",
        config.max_iter,
        g.norm()
    ))
}

fn finish(theta: DVector<f64>, classes: usize, d: usize, iterations: usize, gradient_norm: f64) -> LogisticModel {
    let coefficients = DMatrix::from_fn(classes, d + 1, |c, j| theta[c * (d + 1) + j]);
    LogisticModel {
        classes,
        features: d,
        coefficients,
        iterations,
        gradient_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_gradient(prob: &Problem, theta: &DVector<f64>) -> DVector<f64> {
        let h = 1e-6;
        DVector::from_fn(theta.len(), |i, _| {
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[i] += h;
            b[i] -= h;
            (prob.objective(&a) - prob.objective(&b)) / (2.0 * h)
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rows = vec![vec![0.5, -1.0], vec![1.5, 0.2], vec![-0.3, 0.8], vec![0.1, 0.1]];
        let labels = vec![0, 1, 2, 1];
        let prob = Problem {
            rows: &rows,
            labels: &labels,
            k: 3,
            p: 3,
            l2: 1.0,
        };
        let theta = DVector::from_fn(9, |i, _| (i as f64 * 0.37).sin());
        let (g, h) = prob.gradient_hessian(&theta);
        let ng = numeric_gradient(&prob, &theta);
        assert!((g - ng).amax() < 1e-6);
        assert!((h.clone() - h.transpose()).amax() < 1e-12);
    }

    #[test]
    fn converges_and_separates() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0 - 1.5]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let mut z = rows.clone();
        standardize_columns(&mut z);
        let m = fit_multinomial(&z, &labels, 3, &LogisticConfig::default()).unwrap();
        assert!(m.gradient_norm <= 1e-6);
        assert!(m.accuracy(&z, &labels) >= 0.9);
    }

    #[test]
    fn constant_features_predict_majority() {
        let rows = vec![vec![0.0]; 5];
        let labels = vec![0, 1, 1, 1, 0];
        let m = fit_multinomial(&rows, &labels, 2, &LogisticConfig::default()).unwrap();
        assert_eq!(m.accuracy(&rows, &labels), 0.6);
    }

    #[test]
    fn standardize_handles_constant_column() {
        let mut rows = vec![vec![1.0, 3.0], vec![3.0, 3.0]];
        standardize_columns(&mut rows);
        assert_eq!(rows, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }
}
