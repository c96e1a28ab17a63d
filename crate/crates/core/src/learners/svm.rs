//! RBF-kernel support vector machines trained by sequential minimal
//! optimization.
//!
//! Both problems are instances of the same dual
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = const,  0 ≤ α ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! solved by [`Smo`] with maximal-violating-pair / second-order working set
//! selection. Classification trains one binary C-SVC per style against the
//! rest; regression is ε-SVR over 2n variables.

use serde::{Deserialize, Serialize};

use super::{constant_value, AlgorithmSpec, ConstantModel, LearnError, Target, TrainingSet};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: 1.0 / 16.0, epsilon: 0.05, tol: 1e-3, max_iter: 10_000 }
    }
}

impl SvmParams {
    pub const NAMES: &'static [&'static str] = &["c", "gamma", "epsilon", "tol", "max_iter"];

    pub fn from_spec(spec: &AlgorithmSpec) -> Result<Self, LearnError> {
        let d = SvmParams::default();
        Ok(SvmParams {
            c: spec.real("c", d.c, |v| v > 0.0)?,
            gamma: spec.real("gamma", d.gamma, |v| v > 0.0)?,
            epsilon: spec.real("epsilon", d.epsilon, |v| v >= 0.0)?,
            tol: spec.real("tol", d.tol, |v| v > 0.0)?,
            max_iter: spec.count("max_iter", d.max_iter, 1)?,
        })
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Gram matrix of `rows` under the RBF kernel.
pub fn kernel_matrix<R: AsRef<[f64]>>(rows: &[R], gamma: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(rows[i].as_ref(), rows[j].as_ref(), gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Solution of one dual problem.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is Σ y_i α_i K(x_i, x) − rho.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO over a precomputed Gram matrix. Variable `t` uses kernel row
/// `index[t]`, so ε-SVR can duplicate points without duplicating the matrix.
pub struct Smo<'a> {
    pub kernel: &'a [Vec<f64>],
    pub index: Vec<usize>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Smo<'_> {
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel[self.index[i]][self.index[j]]
    }

    fn is_upper(&self, a: f64) -> bool {
        a >= self.c
    }

    fn is_lower(a: f64) -> bool {
        a <= 0.0
    }

    /// Returns (i, j) or None when the maximal KKT violation is below tol.
    fn select(&self, alpha: &[f64], g: &[f64]) -> Option<(usize, usize)> {
        let n = self.y.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i_best = None;
        for t in 0..n {
            let v = if self.y[t] > 0.0 {
                (!self.is_upper(alpha[t])).then(|| -g[t])
            } else {
                (!Self::is_lower(alpha[t])).then_some(g[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_best = Some(t);
                }
            }
        }
        let i = i_best?;
        let qd_i = self.q(i, i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j_best = None;
        for t in 0..n {
            let (in_low, yg) = if self.y[t] > 0.0 {
                (!Self::is_lower(alpha[t]), g[t])
            } else {
                (!self.is_upper(alpha[t]), -g[t])
            };
            if !in_low {
                continue;
            }
            gmax2 = gmax2.max(yg);
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                // K_ii + K_tt − 2 K_it
                let quad = qd_i + self.q(t, t) - 2.0 * self.y[i] * self.y[t] * self.q(i, t);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j_best = Some(t);
                }
            }
        }
        if gmax + gmax2 < self.tol {
            return None;
        }
        j_best.map(|j| (i, j))
    }

    pub fn solve(&self) -> SmoSolution {
        let n = self.y.len();
        let c = self.c;
        let mut alpha = vec![0.0; n];
        let mut g = self.p.clone();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            let Some((i, j)) = self.select(&alpha, &g) else {
                converged = true;
                break;
            };
            iterations += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let q_ij = self.q(i, j);
            let (qd_i, qd_j) = (self.q(i, i), self.q(j, j));
            if self.y[i] != self.y[j] {
                let quad = (qd_i + qd_j + 2.0 * q_ij).max(TAU);
                let delta = (-g[i] - g[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qd_i + qd_j - 2.0 * q_ij).max(TAU);
                let delta = (g[i] - g[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (t, gt) in g.iter_mut().enumerate() {
                *gt += self.q(i, t) * di + self.q(j, t) * dj;
            }
        }
        let rho = self.rho(&alpha, &g);
        SmoSolution { alpha, rho, iterations, converged }
    }

    fn rho(&self, alpha: &[f64], g: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.y.len() {
            let yg = self.y[t] * g[t];
            if self.is_upper(alpha[t]) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if Self::is_lower(alpha[t]) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

/// f(x) = Σ coef_i K(sv_i, x) − rho, or a fixed value when the training
/// labels were all on one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpansion {
    pub support_vectors: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub constant: Option<f64>,
}

impl KernelExpansion {
    pub fn decision(&self, row: &[f64], gamma: f64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, row, gamma))
            .sum::<f64>()
            - self.rho
    }

    fn from_solution<R: AsRef<[f64]>>(rows: &[R], coef: Vec<f64>, rho: f64) -> Self {
        let (support_vectors, coef) = rows
            .iter()
            .zip(coef)
            .filter(|(_, c)| *c != 0.0)
            .map(|(r, c)| (r.as_ref().to_vec(), c))
            .unzip();
        KernelExpansion { support_vectors, coef, rho, constant: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    /// One expansion for regression; one per style (⟨A, V, K, R⟩) for
    /// classification.
    pub machines: Vec<KernelExpansion>,
}

/// Trains a binary C-SVC on ±1 labels.
pub fn train_binary<R: AsRef<[f64]>>(
    rows: &[R],
    kernel: &[Vec<f64>],
    positive: &[bool],
    params: &SvmParams,
) -> (KernelExpansion, SmoSolution) {
    let n = rows.len();
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let smo = Smo {
        kernel,
        index: (0..n).collect(),
        y: y.clone(),
        p: vec![-1.0; n],
        c: params.c,
        tol: params.tol,
        max_iter: params.max_iter,
    };
    let sol = smo.solve();
    let coef = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
    (KernelExpansion::from_solution(rows, coef, sol.rho), sol)
}

/// Trains ε-SVR.
pub fn train_regression<R: AsRef<[f64]>>(
    rows: &[R],
    kernel: &[Vec<f64>],
    targets: &[f64],
    params: &SvmParams,
) -> (KernelExpansion, SmoSolution) {
    let n = rows.len();
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat_n(-1.0, n));
    let mut p: Vec<f64> = targets.iter().map(|z| params.epsilon - z).collect();
    p.extend(targets.iter().map(|z| params.epsilon + z));
    let smo = Smo {
        kernel,
        index: (0..n).chain(0..n).collect(),
        y,
        p,
        c: params.c,
        tol: params.tol,
        max_iter: params.max_iter,
    };
    let sol = smo.solve();
    let coef = (0..n).map(|i| sol.alpha[i] - sol.alpha[i + n]).collect();
    (KernelExpansion::from_solution(rows, coef, sol.rho), sol)
}

impl SvmModel {
    /// Returns the model (or a constant predictor for constant regression
    /// targets) and whether every solver converged.
    pub fn fit(spec: &AlgorithmSpec, data: &TrainingSet) -> Result<(Result<SvmModel, ConstantModel>, bool), LearnError> {
        let params = SvmParams::from_spec(spec)?;
        let rows: Vec<&[f64]> = data.features.rows().collect();
        match &data.target {
            Target::Regression(t) => {
                if let Some(v) = constant_value(t) {
                    return Ok((Err(ConstantModel::Value(v)), true));
                }
                let kernel = kernel_matrix(&rows, params.gamma);
                let (m, sol) = train_regression(&rows, &kernel, t, &params);
                Ok((Ok(SvmModel { gamma: params.gamma, machines: vec![m] }), sol.converged))
            }
            Target::Classification(labels) => {
                let kernel = kernel_matrix(&rows, params.gamma);
                let mut converged = true;
                let machines = crate::dataset::Style::ALL
                    .iter()
                    .map(|&class| {
                        let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();
                        if positive.iter().all(|&p| p) {
                            KernelExpansion { support_vectors: vec![], coef: vec![], rho: 0.0, constant: Some(1.0) }
                        } else if positive.iter().all(|&p| !p) {
                            KernelExpansion { support_vectors: vec![], coef: vec![], rho: 0.0, constant: Some(-1.0) }
                        } else {
                            let (m, sol) = train_binary(&rows, &kernel, &positive, &params);
                            converged &= sol.converged;
                            m
                        }
                    })
                    .collect();
                Ok((Ok(SvmModel { gamma: params.gamma, machines }), converged))
            }
        }
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.machines[0].decision(row, self.gamma)
    }

    /// Per-class decision values.
    pub fn predict_scores(&self, row: &[f64]) -> [f64; 4] {
        let mut s = [f64::NEG_INFINITY; 4];
        for (k, m) in self.machines.iter().enumerate().take(4) {
            s[k] = m.decision(row, self.gamma);
        }
        s
    }
}
