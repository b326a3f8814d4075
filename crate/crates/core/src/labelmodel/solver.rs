use alloc::vec;
use alloc::vec::Vec;

use super::rank::logistic;
use super::{
    covariance, spd_inverse, Diagnostic, LabelModelError, LabelModelFit, LambdaMatrix, OmegaMask, SolverParams,
    FIT_FORMAT_VERSION,
};

/// Step halvings tried before an iteration gives up on finding descent.
const MAX_HALVINGS: usize = 60;

/// `‖(A + z zᵀ) ⊙ Ω‖²_F` for a row-major `m x m` matrix `a` (normally Σ⁻¹).
pub fn masked_objective(a: &[f64], omega: &OmegaMask, z: &[f64]) -> f64 {
    let m = z.len();
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            if omega.get(i, j) {
                let r = a[i * m + j] + z[i] * z[j];
                sum += r * r;
            }
        }
    }
    sum
}

struct Penalty<'a> {
    alpha: f64,
    rows: Vec<(&'a [i8], f64)>,
}

impl Penalty<'_> {
    fn probability(row: &[i8], z: &[f64]) -> f64 {
        let s: f64 = row.iter().zip(z).map(|(&l, &zk)| zk.max(0.0) * f64::from(l)).sum();
        logistic(s)
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(row, y)| {
                let d = Self::probability(row, z) - y;
                d * d
            })
            .sum()
    }

    fn add_gradient(&self, z: &[f64], grad: &mut [f64]) {
        for (row, y) in &self.rows {
            let f = Self::probability(row, z);
            let coef = 2.0 * self.alpha * (f - y) * f * (1.0 - f);
            for k in 0..z.len() {
                if z[k] > 0.0 {
                    grad[k] += coef * f64::from(row[k]);
                }
            }
        }
    }
}

struct Problem<'a> {
    a: Vec<f64>,
    omega: &'a OmegaMask,
    frozen: Vec<bool>,
    penalty: Option<Penalty<'a>>,
}

impl Problem<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        let base = masked_objective(&self.a, self.omega, z);
        match &self.penalty {
            Some(p) => base + p.alpha * p.value(z),
            None => base,
        }
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let m = z.len();
        let mut grad = vec![0.0; m];
        for k in 0..m {
            if self.frozen[k] {
                continue;
            }
            let mut g = 0.0;
            for j in 0..m {
                let w = f64::from(u8::from(self.omega.get(k, j))) * (self.a[k * m + j] + z[k] * z[j])
                    + f64::from(u8::from(self.omega.get(j, k))) * (self.a[j * m + k] + z[j] * z[k]);
                g += 2.0 * w * z[j];
            }
            grad[k] = g;
        }
        if let Some(p) = &self.penalty {
            p.add_gradient(z, &mut grad);
            for (g, &f) in grad.iter_mut().zip(&self.frozen) {
                if f {
                    *g = 0.0;
                }
            }
        }
        grad
    }

    /// Gradient descent with a fixed step; a step that would increase the
    /// objective is halved until it does not.
    fn descend(&self, mut z: Vec<f64>, params: &SolverParams) -> (Vec<f64>, f64, usize, bool) {
        let mut value = self.value(&z);
        let mut trial = vec![0.0; z.len()];
        for iteration in 0..params.max_iter {
            let grad = self.gradient(&z);
            let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if norm < params.tol {
                return (z, value, iteration, true);
            }
            let mut step = params.step;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                for k in 0..z.len() {
                    trial[k] = z[k] - step * grad[k];
                }
                let v = self.value(&trial);
                if v <= value {
                    core::mem::swap(&mut z, &mut trial);
                    value = v;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return (z, value, iteration + 1, false);
            }
        }
        (z, value, params.max_iter, false)
    }
}

fn prepare<'a>(
    lambda: &LambdaMatrix,
    omega: &'a OmegaMask,
    params: &SolverParams,
) -> Result<(Problem<'a>, Vec<Diagnostic>), LabelModelError> {
    params.validate().map_err(LabelModelError::InvalidParams)?;
    let (e, m) = (lambda.rows(), lambda.cols());
    if e < 2 || m < 2 {
        return Err(LabelModelError::InsufficientData { rows: e, cols: m });
    }
    if omega.m != m {
        return Err(LabelModelError::DimensionMismatch { expected: m, got: omega.m });
    }
    let mut sigma = covariance(&lambda.as_f64(), e, m);
    let mut diagnostics = Vec::new();
    let frozen: Vec<bool> = (0..m).map(|k| sigma[k * m + k] == 0.0).collect();
    for (k, &f) in frozen.iter().enumerate() {
        if f {
            diagnostics.push(Diagnostic::ConstantColumn { lf_id: lambda.lf_ids[k].clone() });
        }
    }
    for k in 0..m {
        sigma[k * m + k] += params.ridge;
    }
    let a = spd_inverse(&sigma, m).ok_or(LabelModelError::Singular)?;
    Ok((Problem { a, omega, frozen, penalty: None }, diagnostics))
}

fn finish(
    lambda: &LambdaMatrix,
    problem: &Problem<'_>,
    params: &SolverParams,
    mut diagnostics: Vec<Diagnostic>,
    (mut z, mut value, iterations, converged): (Vec<f64>, f64, usize, bool),
    fixed_sign: Option<i8>,
    alpha: f64,
    validated_count: usize,
) -> LabelModelFit {
    let m = z.len();
    let zero = vec![0.0; m];
    let trivial = problem.value(&zero);
    if trivial <= value {
        z = zero;
        value = trivial;
        diagnostics.push(Diagnostic::TrivialOptimum);
    }
    let sign: i8 = fixed_sign.unwrap_or(if z.iter().sum::<f64>() >= 0.0 { 1 } else { -1 });
    let weights: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let oriented = f64::from(sign) * zk;
            if oriented < 0.0 {
                diagnostics.push(Diagnostic::NegativeWeightClipped { lf_id: lambda.lf_ids[k].clone(), value: oriented });
            }
            oriented.max(0.0)
        })
        .collect();
    let penalty_value = problem.penalty.as_ref().map_or(0.0, |p| p.value(&z));
    LabelModelFit {
        format_version: FIT_FORMAT_VERSION,
        variable_id: lambda.variable_id.clone(),
        lf_ids: lambda.lf_ids.clone(),
        z_hat: z,
        sign,
        weights,
        objective_value: value,
        trivial_objective: trivial,
        penalty_value,
        iterations,
        converged,
        alpha,
        validated_count,
        sigma_ridge: params.ridge,
        omega: problem.omega.clone(),
        params: *params,
        diagnostics,
    }
}

/// Fits LF weights by gradient descent on the masked matrix-completion
/// objective.
///
/// Starts from `z = init · 𝟙` (constant columns are pinned at 0), takes fixed
/// steps until the gradient's ∞-norm drops below `tol`, and never returns a
/// point worse than `z = 0`. The `z ↔ −z` ambiguity is resolved by picking
/// the sign with the larger coordinate sum; negative weights are clipped.
pub fn fit(lambda: &LambdaMatrix, omega: &OmegaMask, params: &SolverParams) -> Result<LabelModelFit, LabelModelError> {
    let (problem, diagnostics) = prepare(lambda, omega, params)?;
    let z0: Vec<f64> = problem.frozen.iter().map(|&f| if f { 0.0 } else { params.init }).collect();
    let run = problem.descend(z0, params);
    Ok(finish(lambda, &problem, params, diagnostics, run, None, 0.0, 0))
}

/// Refits with the annotator-disagreement penalty
/// `alpha · Σ_{(i, y) ∈ validated} (f(z, λ_i) − y)²`, where `y = 1` when the
/// annotator confirmed row `i`'s value.
///
/// With `alpha = 0` (or no validations) this is exactly [`fit`]. Otherwise
/// the unpenalized fit fixes the sign convention and seeds the descent.
pub fn fit_with_penalty(
    lambda: &LambdaMatrix,
    omega: &OmegaMask,
    validated: &[(usize, bool)],
    alpha: f64,
    params: &SolverParams,
) -> Result<LabelModelFit, LabelModelError> {
    if let Some(&(row, _)) = validated.iter().find(|(r, _)| *r >= lambda.rows()) {
        return Err(LabelModelError::InvalidRow(row));
    }
    if alpha == 0.0 || validated.is_empty() {
        let mut base = fit(lambda, omega, params)?;
        base.alpha = alpha;
        return Ok(base);
    }
    let base = fit(lambda, omega, params)?;
    let (mut problem, diagnostics) = prepare(lambda, omega, params)?;
    problem.penalty = Some(Penalty {
        alpha,
        rows: validated
            .iter()
            .map(|&(r, y)| (lambda.row(r), if y { 1.0 } else { 0.0 }))
            .collect(),
    });
    let z0: Vec<f64> = base.z_hat.iter().map(|&z| f64::from(base.sign) * z).collect();
    let run = problem.descend(z0, params);
    Ok(finish(lambda, &problem, params, diagnostics, run, Some(1), alpha, validated.len()))
}

/// `Σ (predict_proba(row) − y)²` over validated rows for a finished fit.
pub fn disagreement(fit: &LabelModelFit, lambda: &LambdaMatrix, validated: &[(usize, bool)]) -> f64 {
    validated
        .iter()
        .map(|&(r, y)| {
            let s: f64 = lambda.row(r).iter().zip(&fit.weights).map(|(&l, w)| w * f64::from(l)).sum();
            let d = logistic(s) - if y { 1.0 } else { 0.0 };
            d * d
        })
        .sum()
}
