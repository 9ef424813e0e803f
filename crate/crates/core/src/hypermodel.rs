//! Generalized-gamma hyperprior on the prior variances, the per-component
//! λ-update rules of the IAS iteration, and the matching of hyperparameters
//! between a gamma reference model and a greedier model with a different `r`.
//!
//! All quantities are in the non-dimensional variables λ_j = θ_j / ϑ_j.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_ratio, ln_gamma};

/// Upper bound on a single RK4 substep of the λ-ODE.
pub const ODE_MAX_SUBSTEP: f64 = 1e-3;
/// Substeps are further limited to this fraction of the local time scale
/// `sqrt(2 r² φ^{r+1} + t²)`, which is small when φ(0) is small.
const ODE_SCALE_FRACTION: f64 = 0.01;
const MATCH_TOL: f64 = 1e-12;

/// Generalized-gamma hyperprior
/// `π(θ) = |r| / (Γ(β) ϑ) · (θ/ϑ)^{rβ-1} · exp(-(θ/ϑ)^r)`.
///
/// `vartheta` holds either one scale shared by every component or one per
/// component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypermodelRepr", into = "HypermodelRepr")]
pub struct Hypermodel {
    r: f64,
    beta: f64,
    vartheta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HypermodelRepr {
    r: f64,
    beta: f64,
    vartheta: Vec<f64>,
}

impl TryFrom<HypermodelRepr> for Hypermodel {
    type Error = Error;

    fn try_from(h: HypermodelRepr) -> Result<Self> {
        Hypermodel::with_scales(h.r, h.beta, h.vartheta)
    }
}

impl From<Hypermodel> for HypermodelRepr {
    fn from(h: Hypermodel) -> Self {
        HypermodelRepr {
            r: h.r,
            beta: h.beta,
            vartheta: h.vartheta,
        }
    }
}

impl Hypermodel {
    /// Hypermodel with one scale shared by all components.
    pub fn new(r: f64, beta: f64, vartheta: f64) -> Result<Self> {
        Self::with_scales(r, beta, vec![vartheta])
    }

    pub fn with_scales(r: f64, beta: f64, vartheta: Vec<f64>) -> Result<Self> {
        if !r.is_finite() || r == 0.0 {
            return Err(Error::InvalidHypermodel(format!(
                "r must be finite and nonzero, got {r}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidHypermodel(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if vartheta.is_empty() {
            return Err(Error::InvalidHypermodel("vartheta is empty".into()));
        }
        if let Some((j, v)) = vartheta
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidHypermodel(format!(
                "vartheta[{j}] must be positive, got {v}"
            )));
        }
        // φ(0) = (β - 3/(2r))^{1/r} must exist; automatic for r < 0.
        if r > 0.0 && beta - 1.5 / r <= 0.0 {
            return Err(Error::InvalidHypermodel(format!(
                "beta - 3/(2r) = {} must be positive for r = {r}",
                beta - 1.5 / r
            )));
        }
        Ok(Hypermodel { r, beta, vartheta })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Scale of component `j` (broadcast when a single scale is stored).
    pub fn vartheta(&self, j: usize) -> f64 {
        if self.vartheta.len() == 1 {
            self.vartheta[0]
        } else {
            self.vartheta[j]
        }
    }

    pub fn scales(&self) -> &[f64] {
        &self.vartheta
    }

    /// Per-component scales expanded to length `n`.
    pub fn scales_for(&self, n: usize) -> Result<Vec<f64>> {
        match self.vartheta.len() {
            1 => Ok(vec![self.vartheta[0]; n]),
            len if len == n => Ok(self.vartheta.clone()),
            len => Err(Error::Dimension {
                context: "hypermodel scales",
                expected: n,
                got: len,
            }),
        }
    }

    /// η = β - 3/2.
    pub fn eta(&self) -> f64 {
        self.beta - 1.5
    }

    /// κ = β + 3/2.
    pub fn kappa(&self) -> f64 {
        self.beta + 1.5
    }

    /// Coefficient of `log λ` in the Gibbs energy, rβ - 3/2.
    pub fn log_coefficient(&self) -> f64 {
        self.r * self.beta - 1.5
    }

    /// λ-update at ξ = 0, φ(0) = (β - 3/(2r))^{1/r}.
    pub fn phi0(&self) -> f64 {
        (self.beta - 1.5 / self.r).powf(1.0 / self.r)
    }

    pub fn has_closed_form(&self) -> bool {
        self.r == 1.0 || self.r == -1.0
    }
}

/// Log-density of the generalized gamma distribution for component `j`.
pub fn gg_log_pdf(theta: f64, hm: &Hypermodel, j: usize) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
        });
    }
    let scale = hm.vartheta(j);
    let u = theta / scale;
    Ok(
        hm.r.abs().ln() - ln_gamma(hm.beta) - scale.ln() + (hm.r * hm.beta - 1.0) * u.ln()
            - u.powf(hm.r),
    )
}

/// E[θ_j] = ϑ_j Γ(β + 1/r) / Γ(β), one entry per stored scale.
pub fn marginal_mean(hm: &Hypermodel) -> Result<Vec<f64>> {
    let factor = mean_factor(hm.r, hm.beta)?;
    Ok(hm.vartheta.iter().map(|v| v * factor).collect())
}

fn mean_factor(r: f64, beta: f64) -> Result<f64> {
    let shifted = beta + 1.0 / r;
    if shifted <= 0.0 {
        return Err(Error::InfiniteMean(shifted));
    }
    Ok(gamma_ratio(beta, 1.0 / r))
}

/// Closed-form λ-update for the gamma (r = 1) and inverse gamma (r = -1)
/// hyperpriors.
pub fn lambda_update_closed(xi: f64, hm: &Hypermodel) -> Result<f64> {
    if hm.r == 1.0 {
        let eta = hm.eta();
        Ok(0.5 * (eta + (eta * eta + 2.0 * xi * xi).sqrt()))
    } else if hm.r == -1.0 {
        Ok((0.5 * xi * xi + 1.0) / hm.kappa())
    } else {
        Err(Error::UnsupportedClosedForm(hm.r))
    }
}

/// Derivative in λ of `ξ²/(2λ) + λ^r - (rβ - 3/2) log λ`; vanishes at the
/// λ-update.
pub fn optimality_residual(xi: f64, lambda: f64, hm: &Hypermodel) -> f64 {
    -xi * xi / (2.0 * lambda * lambda) + hm.r * lambda.powf(hm.r - 1.0)
        - hm.log_coefficient() / lambda
}

/// Right side of φ'(t) = 2tφ / (2r²φ^{r+1} + t²).
#[inline]
fn phi_rhs(t: f64, phi: f64, r: f64) -> f64 {
    2.0 * t * phi / (2.0 * r * r * phi.powf(r + 1.0) + t * t)
}

/// Integrate the λ-ODE with classical RK4 from φ(0) through the sorted
/// points `ts`, returning φ at each point without any correction step.
pub fn integrate_phi(ts: &[f64], hm: &Hypermodel) -> Result<Vec<f64>> {
    check_sorted(ts)?;
    let r = hm.r;
    let mut t = 0.0;
    let mut phi = hm.phi0();
    let mut out = Vec::with_capacity(ts.len());
    for &target in ts {
        while t < target {
            let scale = (2.0 * r * r * phi.powf(r + 1.0) + t * t).sqrt();
            let h = (ODE_SCALE_FRACTION * scale)
                .min(ODE_MAX_SUBSTEP)
                .min(target - t);
            let k1 = phi_rhs(t, phi, r);
            let k2 = phi_rhs(t + 0.5 * h, phi + 0.5 * h * k1, r);
            let k3 = phi_rhs(t + 0.5 * h, phi + 0.5 * h * k2, r);
            let k4 = phi_rhs(t + h, phi + h * k3, r);
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = if target - t <= h { target } else { t + h };
            if !phi.is_finite() || phi <= 0.0 {
                return Err(Error::Integration { t });
            }
        }
        out.push(phi);
    }
    Ok(out)
}

fn check_sorted(ts: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for (index, &t) in ts.iter().enumerate() {
        if !(t >= prev) {
            return Err(Error::Unsorted { index });
        }
        prev = t;
    }
    Ok(())
}

/// Newton refinement of `r λ^{r+1} - cλ - t²/2 = 0` starting on the branch
/// selected by the ODE. The derivative there equals `r²λ^r + t²/(2λ) > 0`.
fn polish(t: f64, mut lambda: f64, hm: &Hypermodel) -> f64 {
    let r = hm.r;
    let c = hm.log_coefficient();
    let g = |l: f64| r * l.powf(r + 1.0) - c * l - 0.5 * t * t;
    let mut gl = g(lambda);
    for _ in 0..8 {
        let dg = r * (r + 1.0) * lambda.powf(r) - c;
        if !(dg > 0.0) {
            break;
        }
        let next = lambda - gl / dg;
        if !(next > 0.0) {
            break;
        }
        let gn = g(next);
        if gn.abs() >= gl.abs() {
            break;
        }
        let done = (next - lambda).abs() <= 4.0 * f64::EPSILON * lambda;
        lambda = next;
        gl = gn;
        if done {
            break;
        }
    }
    lambda
}

/// λ-update φ(|ξ|) for general r at ascending, non-negative points.
///
/// φ is obtained by integrating the initial value problem and then polished
/// by a few Newton steps on the optimality condition. The output is
/// ascending like the input; callers un-permute.
pub fn lambda_update_ode(xi_abs_sorted: &[f64], hm: &Hypermodel) -> Result<Vec<f64>> {
    let mut phi = integrate_phi(xi_abs_sorted, hm)?;
    for (l, &t) in phi.iter_mut().zip(xi_abs_sorted) {
        *l = polish(t, *l, hm);
    }
    Ok(phi)
}

/// Component-wise λ-update for an arbitrary ξ: closed form when available,
/// otherwise the sorted ODE sweep.
pub fn lambda_update(xi: &[f64], hm: &Hypermodel) -> Result<Vec<f64>> {
    if hm.has_closed_form() {
        return xi.iter().map(|&x| lambda_update_closed(x, hm)).collect();
    }
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs()));
    let sorted: Vec<f64> = order.iter().map(|&i| xi[i].abs()).collect();
    let phi = lambda_update_ode(&sorted, hm)?;
    let mut out = vec![0.0; xi.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = phi[k];
    }
    Ok(out)
}

/// Residuals of the two matching conditions relative to the reference
/// gamma model `(1, beta1, vartheta1)`: equal λ-update at ξ = 0 and equal
/// marginal mean. Both are returned as relative errors.
pub fn matching_residuals(hm: &Hypermodel, beta1: f64, vartheta1: f64) -> Result<(f64, f64)> {
    let eta = beta1 - 1.5;
    let scale = hm.vartheta(0);
    let baseline = scale * hm.phi0();
    let want_baseline = vartheta1 * eta;
    let mean = scale * mean_factor(hm.r, hm.beta)?;
    let want_mean = vartheta1 * (eta + 1.5);
    Ok((
        (baseline - want_baseline).abs() / want_baseline,
        (mean - want_mean).abs() / want_mean,
    ))
}

/// Hyperparameters `(r_target, β, ϑ)` matched to the gamma reference
/// `(1, beta1, vartheta1)`.
///
/// The matched model has the same λ-update at ξ = 0 (background variance
/// ϑ₁η) and the same marginal mean ϑ₁(η + 3/2). Closed forms are used for
/// r ∈ {1/2, -1/2, -1}; other values are solved numerically in β.
pub fn match_hyperparameters(r_target: f64, beta1: f64, vartheta1: f64) -> Result<Hypermodel> {
    let eta = beta1 - 1.5;
    if !(eta > 0.0) {
        return Err(Error::Invalid(format!(
            "reference model needs beta1 > 3/2, got {beta1}"
        )));
    }
    if !(vartheta1 > 0.0) {
        return Err(Error::Domain {
            what: "vartheta1",
            value: vartheta1,
        });
    }
    let m = 1.0 + 1.5 / eta;
    let (beta, vartheta) = if r_target == 1.0 {
        (beta1, vartheta1)
    } else if r_target == 0.5 {
        let beta = (6.0 * m + 1.0 + (48.0 * m + 1.0).sqrt()) / (2.0 * (m - 1.0));
        (beta, vartheta1 * eta / (beta - 3.0).powi(2))
    } else if r_target == -0.5 {
        // The other root violates β > 2 = -1/r (infinite marginal mean).
        let beta = (6.0 + 3.0 * m + (m * m + 80.0 * m).sqrt()) / (2.0 * (m - 1.0));
        (beta, vartheta1 * eta * (beta + 3.0).powi(2))
    } else if r_target == -1.0 {
        let beta = 1.0 + 5.0 / 3.0 * eta;
        (beta, vartheta1 * eta * (beta + 1.5))
    } else {
        let beta = match_beta_numeric(r_target, m)?;
        let phi0 = (beta - 1.5 / r_target).powf(1.0 / r_target);
        (beta, vartheta1 * eta / phi0)
    };
    Hypermodel::new(r_target, beta, vartheta)
}

/// Solve `Γ(β + 1/r) / (Γ(β) (β - 3/(2r))^{1/r}) = m` for β by bisection in
/// log form. The left side blows up at the lower edge of the admissible
/// region and tends to 1 < m as β grows, so a sign change always exists.
pub fn match_beta_numeric(r: f64, m: f64) -> Result<f64> {
    if !r.is_finite() || r == 0.0 {
        return Err(Error::MatchingInfeasible {
            r,
            reason: "r must be finite and nonzero".into(),
        });
    }
    let infeasible = |reason: &str| Error::MatchingInfeasible {
        r,
        reason: reason.to_string(),
    };
    let target = m.ln();
    let q =
        |beta: f64| ln_gamma(beta + 1.0 / r) - ln_gamma(beta) - (beta - 1.5 / r).ln() / r - target;
    let edge = if r > 0.0 { 1.5 / r } else { -1.0 / r };
    let edge = edge.max(0.0);

    let mut lo = edge + 1e-12 * edge.max(1.0);
    let mut step = 1e-9 * edge.max(1.0);
    while !(q(lo) > 0.0) {
        // Walk inward from the boundary until the ratio exceeds m.
        lo = edge + step;
        step *= 2.0;
        if step > 1e6 {
            return Err(infeasible("no admissible beta with ratio above target"));
        }
    }
    let mut hi = lo + 1.0;
    while q(hi) > 0.0 {
        hi = lo + 2.0 * (hi - lo);
        if hi > 1e12 {
            return Err(infeasible("failed to bracket a root"));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let qm = q(mid);
        if qm.abs() < MATCH_TOL || hi - lo <= 2.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        if qm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
