//! Whitened linear forward models and the 1D Gaussian deconvolution
//! benchmark.
//!
//! The signal `z` on `n` cells is parametrized by its increments `x = L z`,
//! where `L` is the lower bidiagonal difference matrix with the boundary
//! value `z_0 = 0`. Data and forward map are scaled by `1/σ` so that the
//! noise is standard normal.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub location: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvolutionConfig {
    pub kernel_width: f64,
    pub kernel_amplitude: f64,
    pub n: usize,
    pub obs_stride: usize,
    pub m: usize,
    pub fine_n: usize,
    pub sigma: f64,
    pub signal_jumps: Vec<Jump>,
    pub rng_seed: u64,
}

impl Default for DeconvolutionConfig {
    fn default() -> Self {
        let jumps = [
            (0.10, 1.0),
            (0.25, -1.5),
            (0.45, 0.8),
            (0.60, 0.7),
            (0.80, -1.0),
        ];
        DeconvolutionConfig {
            kernel_width: 0.02,
            kernel_amplitude: 6.2,
            n: 128,
            obs_stride: 6,
            m: 22,
            fine_n: 1000,
            sigma: 0.03,
            signal_jumps: jumps
                .iter()
                .map(|&(location, increment)| Jump {
                    location,
                    increment,
                })
                .collect(),
            rng_seed: 20_240_501,
        }
    }
}

impl DeconvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.m == 0 || self.obs_stride == 0 {
            return fail("n, m and obs_stride must be positive".into());
        }
        if 1 + self.obs_stride * (self.m - 1) > self.n {
            return fail(format!(
                "observation stride {} with m = {} needs node {} but n = {}",
                self.obs_stride,
                self.m,
                1 + self.obs_stride * (self.m - 1),
                self.n
            ));
        }
        if self.fine_n < self.n {
            return fail(format!(
                "fine_n = {} must be at least n = {}",
                self.fine_n, self.n
            ));
        }
        if !(self.sigma > 0.0) || !(self.kernel_width > 0.0) {
            return fail("sigma and kernel_width must be positive".into());
        }
        if !self.kernel_amplitude.is_finite() {
            return fail("kernel_amplitude must be finite".into());
        }
        let mut prev = 0.0;
        for (i, jump) in self.signal_jumps.iter().enumerate() {
            if !(jump.location > prev && jump.location < 1.0) {
                return fail(format!(
                    "jump {i} at {} must lie in (0, 1) after the previous jump",
                    jump.location
                ));
            }
            if !jump.increment.is_finite() {
                return fail(format!("jump {i} has a non-finite increment"));
            }
            prev = jump.location;
        }
        Ok(())
    }

    /// Coarse cell midpoints s_k = (k - 1/2)/n.
    pub fn nodes(&self) -> Vec<f64> {
        midpoints(self.n)
    }

    /// Observation times t_j = s_{1 + stride (j - 1)}.
    pub fn obs_times(&self) -> Vec<f64> {
        let nodes = self.nodes();
        (0..self.m).map(|j| nodes[j * self.obs_stride]).collect()
    }

    /// Piecewise constant generative signal with g = 0 left of the first jump.
    pub fn signal(&self, s: f64) -> f64 {
        self.signal_jumps
            .iter()
            .take_while(|j| j.location <= s)
            .map(|j| j.increment)
            .sum()
    }
}

fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
}

/// Gaussian kernel `A exp(-t² / (2w²))`.
pub fn kernel_eval(t: f64, cfg: &DeconvolutionConfig) -> f64 {
    let w = cfg.kernel_width;
    cfg.kernel_amplitude * (-t * t / (2.0 * w * w)).exp()
}

/// x = L z.
pub fn difference(z: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    z.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

/// z = L⁻¹ x (cumulative sum).
pub fn cumulative(x: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect()
}

/// Linear inverse problem in standard form `b̂ = Â x + e`, `e ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseProblem {
    a_hat: DMatrix<f64>,
    b_hat: DVector<f64>,
    sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z_true: Vec<f64>,
    pub x_true: Vec<f64>,
    pub b_noiseless: Vec<f64>,
    pub b: Vec<f64>,
}

impl InverseProblem {
    pub fn new(a_hat: DMatrix<f64>, b_hat: DVector<f64>, sigma: f64) -> Result<Self> {
        if a_hat.nrows() != b_hat.len() {
            return Err(Error::Dimension {
                context: "data vector",
                expected: a_hat.nrows(),
                got: b_hat.len(),
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::Domain {
                what: "sigma",
                value: sigma,
            });
        }
        Ok(InverseProblem {
            a_hat,
            b_hat,
            sigma,
        })
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn b_hat(&self) -> &DVector<f64> {
        &self.b_hat
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.a_hat.ncols()
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn with_data(&self, b_hat: DVector<f64>) -> Result<Self> {
        Self::new(self.a_hat.clone(), b_hat, self.sigma)
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.a_hat.column_iter().map(|c| c.norm()).collect()
    }
}

/// Build the deconvolution benchmark.
///
/// Data are simulated by midpoint quadrature of the convolution on the
/// `fine_n` grid plus `N(0, σ²)` noise; the inversion matrix uses midpoint
/// quadrature on the coarse `n` grid, `A_jk = a(t_j - s_k)/n`.
pub fn build_problem(cfg: &DeconvolutionConfig) -> Result<(InverseProblem, GroundTruth)> {
    cfg.validate()?;
    let (n, m) = (cfg.n, cfg.m);
    let nodes = cfg.nodes();
    let times = cfg.obs_times();

    let fine = midpoints(cfg.fine_n);
    let g_fine: Vec<f64> = fine.iter().map(|&s| cfg.signal(s)).collect();
    let fine_w = 1.0 / cfg.fine_n as f64;
    let b_noiseless: Vec<f64> = times
        .iter()
        .map(|&t| {
            fine.iter()
                .zip(&g_fine)
                .map(|(&s, &g)| kernel_eval(t - s, cfg) * g)
                .sum::<f64>()
                * fine_w
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let b: Vec<f64> = b_noiseless
        .iter()
        .map(|&v| v + noise.sample(&mut rng))
        .collect();

    let coarse_w = 1.0 / n as f64;
    let a = DMatrix::from_fn(m, n, |j, k| {
        coarse_w * kernel_eval(times[j] - nodes[k], cfg)
    });
    // Â = A L⁻¹ / σ: column k sums columns k..n of A.
    let mut a_hat = DMatrix::zeros(m, n);
    for j in 0..m {
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += a[(j, k)];
            a_hat[(j, k)] = acc / cfg.sigma;
        }
    }
    let b_hat = DVector::from_iterator(m, b.iter().map(|v| v / cfg.sigma));

    let z_true: Vec<f64> = nodes.iter().map(|&s| cfg.signal(s)).collect();
    let x_true = difference(&z_true);
    let problem = InverseProblem::new(a_hat, b_hat, cfg.sigma)?;
    Ok((
        problem,
        GroundTruth {
            z_true,
            x_true,
            b_noiseless,
            b,
        },
    ))
}

/// Â D_ϑ^{1/2} ξ.
pub fn apply_scaled_forward(
    xi: &[f64],
    prob: &InverseProblem,
    vartheta: &[f64],
) -> Result<DVector<f64>> {
    let n = prob.n();
    for (len, context) in [(xi.len(), "xi"), (vartheta.len(), "vartheta")] {
        if len != n {
            return Err(Error::Dimension {
                context,
                expected: n,
                got: len,
            });
        }
    }
    let scaled = DVector::from_iterator(n, xi.iter().zip(vartheta).map(|(x, v)| x * v.sqrt()));
    Ok(prob.a_hat() * scaled)
}

/// Scales ϑ_j = C / ‖â_j‖² balancing the sensitivity of the data to each
/// unknown.
pub fn sensitivity_vartheta(prob: &InverseProblem, c: f64) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::Domain {
            what: "C",
            value: c,
        });
    }
    prob.column_norms()
        .into_iter()
        .enumerate()
        .map(|(j, norm)| {
            if norm == 0.0 {
                Err(Error::ZeroColumn(j))
            } else {
                Ok(c / (norm * norm))
            }
        })
        .collect()
}
