//! Iterative alternating sequential (IAS) minimization of the Gibbs energy
//!
//! ```text
//! E(ξ, λ) = ½‖b̂ - Â D_ϑ^{1/2} ξ‖² + ½ Σ ξ_j²/λ_j + Σ λ_j^r - (rβ - 3/2) Σ log λ_j
//! ```
//!
//! alternating an exact least-squares ξ-step with the component-wise
//! λ-step from [`crate::hypermodel`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{apply_scaled_forward, InverseProblem};
use crate::hypermodel::{lambda_update, Hypermodel};

pub const DEFAULT_TOL: f64 = 0.005;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IasOptions {
    /// Stop once ‖θ^{t-1} - θ^t‖ / ‖θ^{t-1}‖ drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IasOptions {
    fn default() -> Self {
        IasOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// One full IAS iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IasState {
    pub iteration: usize,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// E(ξ^t, λ^t).
    pub energy: f64,
    /// E(ξ^t, λ^{t-1}), after the ξ-step only.
    pub energy_after_xi: f64,
    /// Relative change of θ = ϑ λ in this iteration.
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IasResult {
    pub hypermodel: Hypermodel,
    pub lambda0: Vec<f64>,
    pub trace: Vec<IasState>,
    pub converged: bool,
}

impl IasResult {
    pub fn last(&self) -> &IasState {
        self.trace.last().expect("IAS trace is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Physical unknown x = D_ϑ^{1/2} ξ of the final iterate.
    pub fn x(&self) -> Vec<f64> {
        let s = self.last();
        s.xi.iter()
            .enumerate()
            .map(|(j, xi)| xi * self.hypermodel.vartheta(j).sqrt())
            .collect()
    }

    /// Physical variances θ = ϑ λ of the final iterate.
    pub fn theta(&self) -> Vec<f64> {
        let s = self.last();
        s.lambda
            .iter()
            .enumerate()
            .map(|(j, l)| l * self.hypermodel.vartheta(j))
            .collect()
    }
}

fn check_lambda(lambda: &[f64], n: usize) -> Result<()> {
    if lambda.len() != n {
        return Err(Error::Dimension {
            context: "lambda",
            expected: n,
            got: lambda.len(),
        });
    }
    if let Some(&bad) = lambda.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Domain {
            what: "lambda",
            value: bad,
        });
    }
    Ok(())
}

pub fn gibbs_energy(
    xi: &[f64],
    lambda: &[f64],
    prob: &InverseProblem,
    hm: &Hypermodel,
) -> Result<f64> {
    let n = prob.n();
    check_lambda(lambda, n)?;
    let scales = hm.scales_for(n)?;
    let residual = prob.b_hat() - apply_scaled_forward(xi, prob, &scales)?;
    let r = hm.r();
    let c = hm.log_coefficient();
    let prior: f64 = xi
        .iter()
        .zip(lambda)
        .map(|(&x, &l)| 0.5 * x * x / l + l.powf(r) - c * l.ln())
        .sum();
    Ok(0.5 * residual.norm_squared() + prior)
}

/// Minimizer of `½‖b̂ - Â D_ϑ^{1/2} ξ‖² + ½ Σ ξ_j²/λ_j`.
///
/// With `B = Â D_ϑ^{1/2}` this is the least-squares solution of the stacked
/// system `[B; D_λ^{-1/2}] ξ ≈ [b̂; 0]`, solved by Householder QR. When there
/// are fewer data than unknowns the equivalent dual form
/// `ξ = D_λ^{1/2} Cᵀ (C Cᵀ + I)⁻¹ b̂`, `C = B D_λ^{1/2}`, is used instead; its
/// normal matrix is factored through the QR of the `(n + m) × m` stack
/// `[Cᵀ; I]`, whose singular values are all at least one.
pub fn xi_update(lambda: &[f64], prob: &InverseProblem, vartheta: &[f64]) -> Result<Vec<f64>> {
    let n = prob.n();
    check_lambda(lambda, n)?;
    if vartheta.len() != n {
        return Err(Error::Dimension {
            context: "vartheta",
            expected: n,
            got: vartheta.len(),
        });
    }
    if prob.m() < n {
        xi_update_dual(lambda, prob, vartheta)
    } else {
        xi_update_primal(lambda, prob, vartheta)
    }
}

fn xi_update_primal(lambda: &[f64], prob: &InverseProblem, vartheta: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (prob.m(), prob.n());
    let a = prob.a_hat();
    let mut stacked = DMatrix::zeros(m + n, n);
    for k in 0..n {
        let s = vartheta[k].sqrt();
        for j in 0..m {
            stacked[(j, k)] = a[(j, k)] * s;
        }
        stacked[(m + k, k)] = lambda[k].sqrt().recip();
    }
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(prob.b_hat());

    let qr = stacked.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let mut xi = rhs.rows(0, n).into_owned();
    if !r.solve_upper_triangular_mut(&mut xi) {
        return Err(Error::Invalid(
            "singular triangular factor in xi update".into(),
        ));
    }
    Ok(xi.iter().copied().collect())
}

fn xi_update_dual(lambda: &[f64], prob: &InverseProblem, vartheta: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (prob.m(), prob.n());
    let a = prob.a_hat();
    let w: Vec<f64> = vartheta
        .iter()
        .zip(lambda)
        .map(|(t, l)| (t * l).sqrt())
        .collect();
    let mut stacked = DMatrix::zeros(n + m, m);
    for k in 0..n {
        for j in 0..m {
            stacked[(k, j)] = a[(j, k)] * w[k];
        }
    }
    for j in 0..m {
        stacked[(n + j, j)] = 1.0;
    }
    let r = stacked.qr().r();
    let mut y = prob.b_hat().clone();
    let singular = || Error::Invalid("singular triangular factor in xi update".into());
    if !r.tr_solve_upper_triangular_mut(&mut y) || !r.solve_upper_triangular_mut(&mut y) {
        return Err(singular());
    }
    Ok((0..n)
        .map(|k| {
            let dot: f64 = (0..m).map(|j| a[(j, k)] * y[j]).sum();
            dot * w[k] * lambda[k].sqrt()
        })
        .collect())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Run IAS from `lambda0` until the relative θ-change falls below
/// `opts.tol` or `opts.max_iter` iterations have been done. Reaching the
/// iteration cap is reported through `converged = false`.
pub fn ias_run(
    prob: &InverseProblem,
    hm: &Hypermodel,
    lambda0: &[f64],
    opts: IasOptions,
) -> Result<IasResult> {
    let n = prob.n();
    check_lambda(lambda0, n)?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Invalid("IAS needs tol > 0 and max_iter >= 1".into()));
    }
    let scales = hm.scales_for(n)?;
    let mut lambda = lambda0.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=opts.max_iter {
        let xi = xi_update(&lambda, prob, &scales)?;
        let energy_after_xi = gibbs_energy(&xi, &lambda, prob, hm)?;
        let next = lambda_update(&xi, hm)?;
        let energy = gibbs_energy(&xi, &next, prob, hm)?;

        let prev_norm = norm(lambda.iter().zip(&scales).map(|(l, s)| l * s));
        let diff_norm = norm(
            lambda
                .iter()
                .zip(&next)
                .zip(&scales)
                .map(|((a, b), s)| (a - b) * s),
        );
        let rel_change = diff_norm / prev_norm;
        lambda = next;
        trace.push(IasState {
            iteration,
            xi,
            lambda: lambda.clone(),
            energy,
            energy_after_xi,
            rel_change,
        });
        if rel_change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(IasResult {
        hypermodel: hm.clone(),
        lambda0: lambda0.to_vec(),
        trace,
        converged,
    })
}

/// Two-phase hybrid IAS: a gamma (r = 1) run followed, optionally, by a run
/// with a greedier matched hypermodel started from the final θ of the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSchedule {
    pub phase1: Hypermodel,
    pub phase2: Option<Hypermodel>,
    pub tol: f64,
    pub max_iter: usize,
}

impl HybridSchedule {
    pub fn new(phase1: Hypermodel, phase2: Option<Hypermodel>) -> Result<Self> {
        let s = HybridSchedule {
            phase1,
            phase2,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase1.r() != 1.0 {
            return Err(Error::Invalid(format!(
                "hybrid phase I must use r = 1, got {}",
                self.phase1.r()
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid("hybrid tol must be positive".into()));
        }
        Ok(())
    }

    fn options(&self) -> IasOptions {
        IasOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub phase1: IasResult,
    pub phase2: Option<IasResult>,
}

impl HybridResult {
    /// The result of the last phase that ran.
    pub fn final_result(&self) -> &IasResult {
        self.phase2.as_ref().unwrap_or(&self.phase1)
    }

    pub fn converged(&self) -> bool {
        self.phase1.converged && self.phase2.as_ref().is_none_or(|p| p.converged)
    }
}

/// Phase I starts from λ ≡ 1 (θ⁰ = ϑ₁).
pub fn hybrid_run(prob: &InverseProblem, schedule: &HybridSchedule) -> Result<HybridResult> {
    schedule.validate()?;
    let n = prob.n();
    let phase1 = ias_run(prob, &schedule.phase1, &vec![1.0; n], schedule.options())?;
    let phase2 = match &schedule.phase2 {
        None => None,
        Some(hm) => {
            let theta = phase1.theta();
            let lambda0: Vec<f64> = theta
                .iter()
                .enumerate()
                .map(|(j, t)| t / hm.vartheta(j))
                .collect();
            Some(ias_run(prob, hm, &lambda0, schedule.options())?)
        }
    };
    Ok(HybridResult { phase1, phase2 })
}
