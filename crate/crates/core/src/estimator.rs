//! Simulated homodyne data, maximum-likelihood estimation of `phi`, and
//! variance experiments against the Cramér-Rao bound `1/(nu F)`.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::{fisher_information, loglog_fit, PhasePolicy};
use crate::gaussian::{
    model_with_derivatives, output_covariance, output_mean, GaussianDensity, GaussianModel, ProbeSpec,
};
use crate::linalg::{rng_stream, Cholesky, RealMatrix};
use crate::network::{default_step, first_row_decomposition, ParametrizedNetwork};

/// `nu` outcome vectors drawn at `truth`, with their sample mean and scatter
/// matrix `sum_j (x_j - xbar)(x_j - xbar)^T` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBatch {
    pub nu: usize,
    pub outcomes: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub truth: f64,
    mean: DVector<f64>,
    scatter: RealMatrix,
}

impl OutcomeBatch {
    pub fn from_outcomes(outcomes: Vec<Vec<f64>>, seed: u64, stream: u64, truth: f64) -> Result<Self> {
        let nu = outcomes.len();
        if nu == 0 {
            return Err(Error::invalid("batch needs at least one outcome"));
        }
        let m = outcomes[0].len();
        if m == 0 || outcomes.iter().any(|x| x.len() != m) {
            return Err(Error::invalid("outcome vectors must share a nonzero length"));
        }
        let mut mean = DVector::zeros(m);
        for x in &outcomes {
            for i in 0..m {
                mean[i] += x[i];
            }
        }
        mean /= nu as f64;
        let mut scatter = RealMatrix::zeros(m, m);
        for x in &outcomes {
            for i in 0..m {
                let di = x[i] - mean[i];
                for j in 0..=i {
                    scatter[(i, j)] += di * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                scatter[(j, i)] = scatter[(i, j)];
            }
        }
        Ok(Self { nu, outcomes, seed, stream, truth, mean, scatter })
    }

    pub fn modes(&self) -> usize {
        self.mean.len()
    }

    pub fn sample_mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn scatter(&self) -> &RealMatrix {
        &self.scatter
    }

    /// `sum_j x_j x_j^T / nu`.
    pub fn second_moment(&self) -> RealMatrix {
        (&self.scatter + &self.mean * self.mean.transpose() * self.nu as f64) / self.nu as f64
    }

    /// `sum_j (x_j - mu)(x_j - mu)^T`.
    fn scatter_about(&self, mu: &DVector<f64>) -> RealMatrix {
        let shift = &self.mean - mu;
        &self.scatter + &shift * shift.transpose() * self.nu as f64
    }
}

/// Draws `nu` outcomes `mu + L z` from `model`, reproducible per `(seed, stream)`.
pub fn sample_outcomes(model: &GaussianModel, nu: usize, seed: u64, stream: u64, truth: f64) -> Result<OutcomeBatch> {
    if nu == 0 {
        return Err(Error::invalid("nu must be at least 1"));
    }
    let density = model.density()?;
    let mut rng = rng_stream(seed, stream);
    sample_with(&density, nu, &mut rng, seed, stream, truth)
}

fn sample_with(
    density: &GaussianDensity,
    nu: usize,
    rng: &mut ChaCha8Rng,
    seed: u64,
    stream: u64,
    truth: f64,
) -> Result<OutcomeBatch> {
    let outcomes = (0..nu).map(|_| density.sample(rng)).collect();
    OutcomeBatch::from_outcomes(outcomes, seed, stream, truth)
}

fn check_batch(batch: &OutcomeBatch, net: &ParametrizedNetwork) -> Result<()> {
    if batch.modes() != net.modes() {
        return Err(Error::invalid("batch dimension does not match the network"));
    }
    Ok(())
}

/// Total log-likelihood of the batch at `phi`.
pub fn log_likelihood(
    phi: f64,
    batch: &OutcomeBatch,
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
) -> Result<f64> {
    check_batch(batch, net)?;
    let ch = first_row_decomposition(&net.evaluate(phi)?, theta)?;
    let mu = output_mean(probe, &ch);
    let chol = Cholesky::new(&output_covariance(probe, &ch))?;
    let s = batch.scatter_about(&mu);
    let quad = chol.solve_mat(&s).trace();
    let nu = batch.nu as f64;
    let m = batch.modes() as f64;
    Ok(-0.5 * nu * (chol.log_det() + m * (2.0 * std::f64::consts::PI).ln()) - 0.5 * quad)
}

/// `d/dphi` of the total log-likelihood:
/// `Tr[Sigma^-1 dSigma Sigma^-1 (S - nu Sigma)] / 2 + dmu^T Sigma^-1 (sum x - nu mu)`.
pub fn mle_score(
    phi: f64,
    batch: &OutcomeBatch,
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
) -> Result<f64> {
    check_batch(batch, net)?;
    let model = model_with_derivatives(net, probe, theta, phi, default_step(phi))?;
    let chol = Cholesky::new(&model.covariance)?;
    let nu = batch.nu as f64;
    let s = batch.scatter_about(&model.mean);
    // Sigma^-1 dSigma Sigma^-1 as two solves.
    let a = chol.solve_mat(&model.d_covariance);
    let d_inv = chol.solve_mat(&a.transpose());
    let cov_term = 0.5 * (&d_inv * (s - &model.covariance * nu)).trace();
    let resid = (batch.sample_mean() - &model.mean) * nu;
    let mean_term = model.d_mean.dot(&chol.solve_vec(&resid));
    Ok(cov_term + mean_term)
}

/// Covariance-only score for squeezed vacuum, written with the raw second
/// moment `Sigma~ = sum x x^T / nu`: `(nu/2) Tr[Sigma^-1 dSigma Sigma^-1 (Sigma~ - Sigma)]`.
pub fn mle_score_squeezed_vacuum(
    phi: f64,
    batch: &OutcomeBatch,
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
) -> Result<f64> {
    check_batch(batch, net)?;
    if probe.displacement() != 0.0 {
        return Err(Error::invalid("covariance-only score needs an undisplaced probe"));
    }
    let model = model_with_derivatives(net, probe, theta, phi, default_step(phi))?;
    let chol = Cholesky::new(&model.covariance)?;
    let a = chol.solve_mat(&model.d_covariance);
    let d_inv = chol.solve_mat(&a.transpose());
    let diff = batch.second_moment() - &model.covariance;
    Ok(0.5 * batch.nu as f64 * (&d_inv * diff).trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    pub estimate: f64,
    pub score_at_estimate: f64,
    /// `sqrt(nu F(estimate))`, the typical size of the score at the truth.
    pub score_scale: f64,
    pub iterations: usize,
    pub window: (f64, f64),
}

const BISECTION_STEPS: usize = 60;

/// Grid search of the log-likelihood over `window`, then bisection on the
/// score inside the cells adjacent to the best grid point.
pub fn mle_estimate(
    batch: &OutcomeBatch,
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    window: (f64, f64),
    grid: usize,
) -> Result<EstimationResult> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("window must be a finite interval with lo < hi"));
    }
    if grid < 32 {
        return Err(Error::invalid("grid must have at least 32 points"));
    }
    let points: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let mut best = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let ll = log_likelihood(p, batch, net, probe, theta)?;
        if ll > best_ll {
            best_ll = ll;
            best = i;
        }
    }
    let fallback = points[best];
    if best == 0 || best == grid - 1 {
        return Err(Error::EstimationFailure {
            reason: "likelihood maximum on the window boundary".into(),
            fallback,
        });
    }
    let score = |p: f64| mle_score(p, batch, net, probe, theta);
    let (s_lo, s_mid, s_hi) = (score(points[best - 1])?, score(fallback)?, score(points[best + 1])?);
    let (mut a, mut b) = if s_lo > 0.0 && s_mid <= 0.0 {
        (points[best - 1], fallback)
    } else if s_mid >= 0.0 && s_hi < 0.0 {
        (fallback, points[best + 1])
    } else {
        return Err(Error::EstimationFailure {
            reason: "no score sign change next to the grid maximum".into(),
            fallback,
        });
    };
    let mut iterations = 0;
    let mut s_root = f64::NAN;
    let mut root = 0.5 * (a + b);
    while iterations < BISECTION_STEPS {
        root = 0.5 * (a + b);
        if root <= a || root >= b {
            break;
        }
        s_root = score(root)?;
        iterations += 1;
        if s_root == 0.0 {
            break;
        }
        if s_root > 0.0 {
            a = root;
        } else {
            b = root;
        }
    }
    if s_root.is_nan() {
        s_root = score(root)?;
    }
    let fisher = fisher_information(net, probe, theta, root)?.total;
    Ok(EstimationResult {
        estimate: root,
        score_at_estimate: s_root,
        score_scale: (batch.nu as f64 * fisher.max(0.0)).sqrt(),
        iterations,
        window,
    })
}

/// Search interval and grid size for the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleSettings {
    /// Window width, centered on the true phase.
    pub window_width: f64,
    pub grid: usize,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self { window_width: 1.0, grid: 64 }
    }
}

impl MleSettings {
    pub fn window(&self, center: f64) -> (f64, f64) {
        (center - 0.5 * self.window_width, center + 0.5 * self.window_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Refined root, or the grid fallback for failed trials.
    pub estimate: f64,
    pub score_residual: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub trials: Vec<TrialOutcome>,
    pub failures: usize,
    /// Sample variance of the successful estimates.
    pub variance: f64,
    pub fisher: f64,
    pub crb: f64,
    pub ratio: f64,
}

/// `trials` independent estimations on fresh batches of `nu` outcomes at
/// `phi_true`; trial `t` draws from RNG stream `t`.
#[allow(clippy::too_many_arguments)]
pub fn crb_experiment(
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    phi_true: f64,
    nu: usize,
    trials: usize,
    seed: u64,
    settings: &MleSettings,
) -> Result<CrbReport> {
    if trials < 100 {
        return Err(Error::invalid("CRB experiment needs at least 100 trials"));
    }
    if nu == 0 {
        return Err(Error::invalid("nu must be at least 1"));
    }
    let ch = first_row_decomposition(&net.evaluate(phi_true)?, theta)?;
    let density = GaussianDensity::new(output_mean(probe, &ch), &output_covariance(probe, &ch))?;
    let window = settings.window(phi_true);
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_stream(seed, t as u64);
            let batch = sample_with(&density, nu, &mut rng, seed, t as u64, phi_true)?;
            match mle_estimate(&batch, net, probe, theta, window, settings.grid) {
                Ok(r) => Ok(TrialOutcome {
                    trial: t,
                    estimate: r.estimate,
                    score_residual: r.score_at_estimate,
                    failed: false,
                }),
                Err(Error::EstimationFailure { fallback, .. }) => Ok(TrialOutcome {
                    trial: t,
                    estimate: fallback,
                    score_residual: f64::NAN,
                    failed: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|o| o.failed).count();
    if failures * 20 > trials {
        return Err(Error::TooManyFailures { failures, trials });
    }
    let ok: Vec<f64> = outcomes.iter().filter(|o| !o.failed).map(|o| o.estimate).collect();
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let variance = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let fisher = fisher_information(net, probe, theta, phi_true)?.total;
    let crb = 1.0 / (nu as f64 * fisher);
    Ok(CrbReport { trials: outcomes, failures, variance, fisher, crb, ratio: variance / crb })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub photons: f64,
    pub variance: f64,
    pub crb: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSweep {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of variance against `N`.
    pub slope: f64,
}

/// One CRB experiment per photon number, with `theta` re-derived from
/// `policy` at each `N`. Row `i` uses seed `seed + i`.
#[allow(clippy::too_many_arguments)]
pub fn heisenberg_variance_sweep(
    net: &ParametrizedNetwork,
    policy: &PhasePolicy,
    beta: f64,
    phi_true: f64,
    photons: &[f64],
    nu: usize,
    trials: usize,
    seed: u64,
    settings: &MleSettings,
) -> Result<VarianceSweep> {
    let lo = photons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = photons.iter().cloned().fold(0.0, f64::max);
    if photons.len() < 2 || !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::invalid("photon numbers must be positive and span at least two decades"));
    }
    let mut rows = Vec::with_capacity(photons.len());
    for (i, &n) in photons.iter().enumerate() {
        let probe = ProbeSpec::new(n, beta)?;
        let theta = policy.oscillator_phases(net, phi_true, probe.squeezed_photons())?;
        let report = crb_experiment(
            net,
            &probe,
            &theta,
            phi_true,
            nu,
            trials,
            seed.wrapping_add(i as u64),
            settings,
        )?;
        rows.push(SweepRow { photons: n, variance: report.variance, crb: report.crb, failures: report.failures });
    }
    let variances: Vec<f64> = rows.iter().map(|r| r.variance).collect();
    let (slope, _) = loglog_fit(photons, &variances)?;
    Ok(VarianceSweep { rows, slope })
}
