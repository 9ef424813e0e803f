//! Posterior sampling in the `(v, τ)` coordinates.
//!
//! With `v_j² = ξ_j²/λ_j` and `τ_j² = 2λ_j^r` the posterior becomes
//! `exp(-Φ(v, τ)) N(v, τ | 0, I_2n)` with
//!
//! ```text
//! Φ(v, τ) = ½‖b̂ - Â D_ϑ^{1/2} 2^{-1/(2r)} (v ∘ |τ|^{1/r})‖² - (2β - 1) Σ log|τ_j|
//! ```
//!
//! so Gaussian-reference kernels (pCN and the radial-angular variant) only
//! need Φ in the acceptance ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{cumulative, InverseProblem};
use crate::hypermodel::Hypermodel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamPoint {
    pub v: Vec<f64>,
    pub tau: Vec<f64>,
}

impl ReparamPoint {
    pub fn new(v: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if v.len() != tau.len() {
            return Err(Error::Dimension {
                context: "reparametrized point",
                expected: v.len(),
                got: tau.len(),
            });
        }
        Ok(ReparamPoint { v, tau })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    fn from_flat(flat: &[f64]) -> Self {
        let n = flat.len() / 2;
        ReparamPoint {
            v: flat[..n].to_vec(),
            tau: flat[n..].to_vec(),
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut out = self.v.clone();
        out.extend_from_slice(&self.tau);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.tau).all(|x| x.is_finite())
    }
}

/// Map `(ξ, λ)` to `(v, τ)` on the branch τ > 0, v carrying the sign of ξ.
pub fn to_reparam(xi: &[f64], lambda: &[f64], r: f64) -> Result<ReparamPoint> {
    if xi.len() != lambda.len() {
        return Err(Error::Dimension {
            context: "lambda",
            expected: xi.len(),
            got: lambda.len(),
        });
    }
    if let Some(&bad) = lambda.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Domain {
            what: "lambda",
            value: bad,
        });
    }
    let v = xi.iter().zip(lambda).map(|(x, l)| x / l.sqrt()).collect();
    let tau = lambda.iter().map(|l| (2.0 * l.powf(r)).sqrt()).collect();
    Ok(ReparamPoint { v, tau })
}

/// Map `(v, τ)` back to `(ξ, λ)`:
/// `λ = (τ²/2)^{1/r}`, `ξ = v |τ|^{1/r} / 2^{1/(2r)}`.
///
/// A zero `τ_j` lies on the zero-density boundary; it yields `λ_j = +∞`
/// (r < 0) or `λ_j = 0` (r > 0) and the caller must treat the point as
/// excluded.
pub fn from_reparam(p: &ReparamPoint, r: f64) -> (Vec<f64>, Vec<f64>) {
    let c = 2f64.powf(-0.5 / r);
    let xi =
        p.v.iter()
            .zip(&p.tau)
            .map(|(v, t)| v * t.abs().powf(1.0 / r) * c)
            .collect();
    let lambda = p.tau.iter().map(|t| (0.5 * t * t).powf(1.0 / r)).collect();
    (xi, lambda)
}

/// log |det ∂(λ, ξ)/∂(τ, v)| = log(2^{1 - 3/(2r)} / |r|) + (3/r - 1) log|τ|.
pub fn jacobian_logdet(_v: f64, tau: f64, r: f64) -> Result<f64> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::Domain {
            what: "|tau|",
            value: tau,
        });
    }
    Ok((1.0 - 1.5 / r) * std::f64::consts::LN_2 - r.abs().ln() + (3.0 / r - 1.0) * tau.abs().ln())
}

/// Non-Gaussian part Φ of a target `exp(-Φ) N(0, I_2n)`.
pub trait Potential {
    fn dim(&self) -> usize;

    /// Φ(v, τ); `+∞` marks zero density.
    fn eval(&self, v: &[f64], tau: &[f64]) -> f64;

    fn eval_point(&self, p: &ReparamPoint) -> f64 {
        self.eval(&p.v, &p.tau)
    }
}

/// Φ ≡ 0: the chain targets the Gaussian reference itself.
#[derive(Debug, Clone, Copy)]
pub struct NullPotential {
    pub n: usize,
}

impl Potential for NullPotential {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, _v: &[f64], _tau: &[f64]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
enum TauPower {
    One,
    MinusOne,
    Two,
    MinusTwo,
    General(f64),
}

impl TauPower {
    fn new(r: f64) -> Self {
        match r {
            1.0 => TauPower::One,
            -1.0 => TauPower::MinusOne,
            0.5 => TauPower::Two,
            -0.5 => TauPower::MinusTwo,
            r => TauPower::General(1.0 / r),
        }
    }

    /// |τ|^{1/r}
    #[inline]
    fn apply(self, tau: f64) -> f64 {
        let a = tau.abs();
        match self {
            TauPower::One => a,
            TauPower::MinusOne => 1.0 / a,
            TauPower::Two => a * a,
            TauPower::MinusTwo => 1.0 / (a * a),
            TauPower::General(p) => a.powf(p),
        }
    }
}

/// Φ for the linear whitened model. Column scaling by `√ϑ_j 2^{-1/(2r)}`
/// is folded into a column-major copy of the forward map.
#[derive(Debug, Clone)]
pub struct PosteriorPotential {
    n: usize,
    m: usize,
    cols: Vec<f64>,
    b_hat: Vec<f64>,
    power: TauPower,
    log_weight: f64,
}

impl PosteriorPotential {
    pub fn new(prob: &InverseProblem, hm: &Hypermodel) -> Result<Self> {
        let (m, n) = (prob.m(), prob.n());
        let scales = hm.scales_for(n)?;
        let c = 2f64.powf(-0.5 / hm.r());
        let a = prob.a_hat();
        let mut cols = Vec::with_capacity(m * n);
        for k in 0..n {
            let s = scales[k].sqrt() * c;
            cols.extend((0..m).map(|j| a[(j, k)] * s));
        }
        Ok(PosteriorPotential {
            n,
            m,
            cols,
            b_hat: prob.b_hat().iter().copied().collect(),
            power: TauPower::new(hm.r()),
            log_weight: 2.0 * hm.beta() - 1.0,
        })
    }

    /// Data misfit ½‖b̂ - f(...)‖² alone.
    pub fn misfit(&self, v: &[f64], tau: &[f64]) -> f64 {
        let mut resid = self.b_hat.clone();
        for k in 0..self.n {
            let u = v[k] * self.power.apply(tau[k]);
            if u != 0.0 {
                let col = &self.cols[k * self.m..(k + 1) * self.m];
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * u;
                }
            }
        }
        0.5 * resid.iter().map(|r| r * r).sum::<f64>()
    }
}

/// Σ log|τ_j| with products taken in blocks of eight.
fn sum_log_abs(tau: &[f64]) -> f64 {
    let mut total = 0.0;
    for chunk in tau.chunks(8) {
        let prod: f64 = chunk.iter().map(|t| t.abs()).product();
        if prod.is_normal() {
            total += prod.ln();
        } else {
            total += chunk.iter().map(|t| t.abs().ln()).sum::<f64>();
        }
    }
    total
}

impl Potential for PosteriorPotential {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, v: &[f64], tau: &[f64]) -> f64 {
        if tau.contains(&0.0) {
            return f64::INFINITY;
        }
        let phi = self.misfit(v, tau) - self.log_weight * sum_log_abs(tau);
        if phi.is_nan() {
            f64::INFINITY
        } else {
            phi
        }
    }
}

/// Φ(v, τ) for the whitened linear model.
pub fn potential(p: &ReparamPoint, prob: &InverseProblem, hm: &Hypermodel) -> Result<f64> {
    if p.dim() != prob.n() {
        return Err(Error::Dimension {
            context: "reparametrized point",
            expected: prob.n(),
            got: p.dim(),
        });
    }
    Ok(PosteriorPotential::new(prob, hm)?.eval_point(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Pcn,
    RadialPcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub kernel: KernelKind,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub total_steps: u64,
    pub thin: u64,
    pub seed: u64,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self.kernel {
            KernelKind::Pcn => {
                if !(self.h > 0.0 && self.h <= 1.0) {
                    return bad(format!("pCN step h must lie in (0, 1], got {}", self.h));
                }
            }
            KernelKind::RadialPcn => {
                if !(self.h > 0.0) || !self.h.is_finite() {
                    return bad(format!("angular step h must be positive, got {}", self.h));
                }
                match self.k {
                    Some(k) if k > 0.0 && k <= 1.0 => {}
                    other => {
                        return bad(format!(
                            "radial pCN needs a radial step k in (0, 1], got {other:?}"
                        ))
                    }
                }
            }
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.total_steps < self.thin {
            return bad(format!(
                "total_steps = {} stores nothing with thin = {}",
                self.total_steps, self.thin
            ));
        }
        Ok(())
    }

    pub fn stored_steps(&self) -> usize {
        (self.total_steps / self.thin) as usize
    }
}

/// Outcome of one Metropolis-Hastings step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: ReparamPoint,
    pub phi: f64,
    pub accepted: bool,
}

#[inline]
fn accept<R: Rng + ?Sized>(phi_current: f64, phi_proposal: f64, rng: &mut R) -> bool {
    if !phi_proposal.is_finite() {
        return false;
    }
    let log_alpha = phi_current - phi_proposal;
    log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
}

fn propose_pcn<R: Rng + ?Sized>(current: &[f64], out: &mut [f64], h: f64, rng: &mut R) {
    let c = (1.0 - h * h).sqrt();
    for (o, &x) in out.iter_mut().zip(current) {
        let w: f64 = rng.sample(StandardNormal);
        *o = c * x + h * w;
    }
}

/// Radial-angular proposal, pair by pair on `(τ_j, v_j)`: the radius takes
/// a 2D pCN step of size `k` (which keeps it Rayleigh(1)), the phase a
/// Gaussian random walk of size `h`.
fn propose_radial<R: Rng + ?Sized>(current: &[f64], out: &mut [f64], h: f64, k: f64, rng: &mut R) {
    let n = current.len() / 2;
    let ck = (1.0 - k * k).sqrt();
    for j in 0..n {
        let (v, tau) = (current[j], current[n + j]);
        let radius = tau.hypot(v);
        let phase = v.atan2(tau);
        let w1: f64 = rng.sample(StandardNormal);
        let w2: f64 = rng.sample(StandardNormal);
        let omega: f64 = rng.sample(StandardNormal);
        // ‖√(1-k²)(ρ, 0) + k w‖, the nonnegative form of the radial update.
        let radius_new = (ck * radius + k * w1).hypot(k * w2);
        let phase_new = phase + h * omega;
        let (s, c) = phase_new.sin_cos();
        out[n + j] = radius_new * c;
        out[j] = radius_new * s;
    }
}

/// One pCN step: `y = √(1-h²) x + h w`, accepted with probability
/// `min(1, exp(Φ(x) - Φ(y)))`.
pub fn pcn_step<P: Potential + ?Sized, R: Rng + ?Sized>(
    current: &ReparamPoint,
    phi_current: f64,
    h: f64,
    pot: &P,
    rng: &mut R,
) -> Step {
    let x = current.flat();
    let mut y = vec![0.0; x.len()];
    propose_pcn(&x, &mut y, h, rng);
    finish_step(current, phi_current, y, pot, rng)
}

/// One radial-angular pCN step, accepted jointly over all pairs with the
/// same Φ-difference ratio as plain pCN.
pub fn radial_pcn_step<P: Potential + ?Sized, R: Rng + ?Sized>(
    current: &ReparamPoint,
    phi_current: f64,
    h: f64,
    k: f64,
    pot: &P,
    rng: &mut R,
) -> Step {
    let x = current.flat();
    let mut y = vec![0.0; x.len()];
    propose_radial(&x, &mut y, h, k, rng);
    finish_step(current, phi_current, y, pot, rng)
}

fn finish_step<P: Potential + ?Sized, R: Rng + ?Sized>(
    current: &ReparamPoint,
    phi_current: f64,
    y: Vec<f64>,
    pot: &P,
    rng: &mut R,
) -> Step {
    let n = current.dim();
    let phi_y = pot.eval(&y[..n], &y[n..]);
    if accept(phi_current, phi_y, rng) {
        Step {
            next: ReparamPoint::from_flat(&y),
            phi: phi_y,
            accepted: true,
        }
    } else {
        Step {
            next: current.clone(),
            phi: phi_current,
            accepted: false,
        }
    }
}

/// Thinned chain output. Row `i` of `draws` is `(v_1..v_n, τ_1..τ_n)` after
/// step `(i + 1) * thin`; rejected proposals repeat the previous state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub config: ChainConfig,
    pub init: ReparamPoint,
    pub n: usize,
    pub draws: Vec<f64>,
    pub phi: Vec<f64>,
    pub accept_count: u64,
    pub total_proposals: u64,
}

impl SampleSet {
    pub fn stored(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.draws.len() / (2 * self.n)
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[2 * self.n * i..2 * self.n * (i + 1)]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.n]
    }

    pub fn tau(&self, i: usize) -> &[f64] {
        &self.row(i)[self.n..]
    }

    pub fn point(&self, i: usize) -> ReparamPoint {
        ReparamPoint::from_flat(self.row(i))
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total_proposals == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.total_proposals as f64
        }
    }
}

/// Run the configured kernel for `total_steps` steps from `init`.
pub fn run_chain<P: Potential + ?Sized>(
    init: &ReparamPoint,
    cfg: &ChainConfig,
    pot: &P,
) -> Result<SampleSet> {
    cfg.validate()?;
    let n = pot.dim();
    if init.dim() != n {
        return Err(Error::Dimension {
            context: "chain initial point",
            expected: n,
            got: init.dim(),
        });
    }
    let phi0 = pot.eval_point(init);
    if !init.is_finite() || !phi0.is_finite() {
        return Err(Error::InitNotFinite(phi0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stored = cfg.stored_steps();
    let mut draws = Vec::with_capacity(stored * 2 * n);
    let mut phis = Vec::with_capacity(stored);
    let mut current = init.flat();
    let mut proposal = vec![0.0; 2 * n];
    let mut phi = phi0;
    let mut accepted = 0u64;
    let k = cfg.k.unwrap_or(0.0);

    for step in 1..=cfg.total_steps {
        match cfg.kernel {
            KernelKind::Pcn => propose_pcn(&current, &mut proposal, cfg.h, &mut rng),
            KernelKind::RadialPcn => propose_radial(&current, &mut proposal, cfg.h, k, &mut rng),
        }
        let phi_y = pot.eval(&proposal[..n], &proposal[n..]);
        if accept(phi, phi_y, &mut rng) {
            std::mem::swap(&mut current, &mut proposal);
            phi = phi_y;
            accepted += 1;
        }
        if step % cfg.thin == 0 && phis.len() < stored {
            draws.extend_from_slice(&current);
            phis.push(phi);
        }
    }

    Ok(SampleSet {
        config: cfg.clone(),
        init: init.clone(),
        n,
        draws,
        phi: phis,
        accept_count: accepted,
        total_proposals: cfg.total_steps,
    })
}

/// Draws mapped to physical variables, one row of length `n` per stored
/// draw. Draws on the zero-density boundary are flagged, not dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalDraws {
    pub n: usize,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    pub excluded: Vec<bool>,
}

impl PhysicalDraws {
    pub fn len(&self) -> usize {
        self.excluded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excluded.is_empty()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }

    pub fn theta_row(&self, i: usize) -> &[f64] {
        &self.theta[i * self.n..(i + 1) * self.n]
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.n..(i + 1) * self.n]
    }

    /// Column `j` over the draws that are not excluded.
    pub fn column(&self, data: &[f64], j: usize) -> Vec<f64> {
        (0..self.len())
            .filter(|&i| !self.excluded[i])
            .map(|i| data[i * self.n + j])
            .collect()
    }
}

/// `x = D_ϑ^{1/2} ξ(v, τ)`, `θ = D_ϑ λ(v, τ)`, `z = L⁻¹ x` for every draw.
pub fn samples_to_physical(s: &SampleSet, vartheta: &[f64], r: f64) -> Result<PhysicalDraws> {
    let n = s.n;
    if vartheta.len() != n {
        return Err(Error::Dimension {
            context: "vartheta",
            expected: n,
            got: vartheta.len(),
        });
    }
    let stored = s.stored();
    let mut out = PhysicalDraws {
        n,
        x: Vec::with_capacity(stored * n),
        theta: Vec::with_capacity(stored * n),
        z: Vec::with_capacity(stored * n),
        excluded: Vec::with_capacity(stored),
    };
    for i in 0..stored {
        let (xi, lambda) = from_reparam(&s.point(i), r);
        let x: Vec<f64> = xi
            .iter()
            .zip(vartheta)
            .map(|(xi, t)| xi * t.sqrt())
            .collect();
        let theta: Vec<f64> = lambda.iter().zip(vartheta).map(|(l, t)| l * t).collect();
        let bad = s.tau(i).contains(&0.0) || x.iter().chain(&theta).any(|v| !v.is_finite());
        out.z.extend(cumulative(&x));
        out.x.extend(x);
        out.theta.extend(theta);
        out.excluded.push(bad);
    }
    Ok(out)
}
