//! Fisher information of the multi-homodyne measurement.
//!
//! [`fisher_information`] evaluates the exact expression in terms of the
//! cofactor matrix `C = |Sigma| Sigma^{-1}`:
//!
//! ```text
//! F = dmu^T C dmu / |Sigma| + (d|Sigma| / |Sigma|)^2 / 2 - Tr[dSigma dC] / (2 |Sigma|)
//! ```
//!
//! which stays well conditioned when `|Sigma| ~ 1/N_S`. [`asymptotic_fisher`]
//! is the large-`N` form reached when every relative phase sits within
//! `O(1/N_S)` of a squeezed quadrature.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{model_with_derivatives, GaussianDensity, GaussianModel, ProbeSpec};
use crate::gaussian::{output_covariance, output_mean};
use crate::linalg::rng_stream;
use crate::network::{
    default_step, first_row_decomposition, wrap_phase, ChannelDecomposition, ParametrizedNetwork,
    NULL_PROBABILITY,
};

/// The three additive contributions to the Fisher information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherBreakdown {
    /// `dmu^T C dmu / |Sigma|`
    pub displacement_term: f64,
    /// `(d|Sigma| / |Sigma|)^2 / 2`
    pub determinant_term: f64,
    /// `-Tr[dSigma dC] / (2 |Sigma|)`
    pub trace_term: f64,
    pub total: f64,
}

impl FisherBreakdown {
    pub fn from_model(model: &GaussianModel) -> Result<Self> {
        let det = model.det;
        if !(det > 0.0) {
            return Err(Error::SingularMatrix { index: 0, value: det });
        }
        let displacement_term = model.d_mean.dot(&(&model.cofactor * &model.d_mean)) / det;
        let ratio = model.d_det / det;
        let determinant_term = 0.5 * ratio * ratio;
        let trace_term = -(&model.d_covariance * &model.d_cofactor).trace() / (2.0 * det);
        Ok(Self {
            displacement_term,
            determinant_term,
            trace_term,
            total: displacement_term + determinant_term + trace_term,
        })
    }
}

/// Exact Fisher information at `phi` for fixed oscillator phases `theta`.
pub fn fisher_information(
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    phi: f64,
) -> Result<FisherBreakdown> {
    let model = model_with_derivatives(net, probe, theta, phi, default_step(phi))?;
    FisherBreakdown::from_model(&model)
}

/// `rho(x) = (8x)^2 / (16x^2 + 1)^2`, maximal (= 1) at `x = 1/4`.
pub fn rho(x: f64) -> f64 {
    let d = 16.0 * x * x + 1.0;
    64.0 * x * x / (d * d)
}

/// `zeta(x) = 1 / (16x^2 + 1)`, maximal (= 1) at `x = 0`.
pub fn zeta(x: f64) -> f64 {
    1.0 / (16.0 * x * x + 1.0)
}

/// Which squeezed quadrature a channel is steered to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureSign {
    #[serde(alias = "+")]
    Plus,
    #[serde(alias = "-")]
    Minus,
}

impl QuadratureSign {
    pub fn value(self) -> f64 {
        match self {
            QuadratureSign::Plus => 1.0,
            QuadratureSign::Minus => -1.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(QuadratureSign::Plus)
        } else if v == -1.0 {
            Ok(QuadratureSign::Minus)
        } else {
            Err(Error::invalid(format!("quadrature sign must be +1 or -1, got {v}")))
        }
    }
}

/// Relative phases `gamma_i = sign_i pi/2 + k_i / N_S^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub offsets: Vec<f64>,
    pub exponent: f64,
    pub signs: Vec<QuadratureSign>,
}

impl PhaseSchedule {
    pub fn new(offsets: Vec<f64>, exponent: f64, sign: QuadratureSign) -> Result<Self> {
        let signs = vec![sign; offsets.len()];
        Self::with_signs(offsets, exponent, signs)
    }

    pub fn with_signs(offsets: Vec<f64>, exponent: f64, signs: Vec<QuadratureSign>) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::invalid("schedule exponent must be positive"));
        }
        if offsets.len() != signs.len() || offsets.is_empty() {
            return Err(Error::invalid("schedule offsets and signs must have equal nonzero length"));
        }
        if offsets.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("schedule offsets must be finite"));
        }
        Ok(Self { offsets, exponent, signs })
    }

    /// Same offset `k` on all `modes` channels.
    pub fn uniform(modes: usize, k: f64, exponent: f64, sign: QuadratureSign) -> Result<Self> {
        Self::new(vec![k; modes], exponent, sign)
    }

    pub fn target_phases(&self, squeezed_photons: f64) -> Vec<f64> {
        let scale = squeezed_photons.powf(-self.exponent);
        self.offsets
            .iter()
            .zip(&self.signs)
            .map(|(k, s)| s.value() * FRAC_PI_2 + k * scale)
            .collect()
    }

    /// Offsets and signs that reproduce the actual relative phases of `ch`
    /// at `alpha = 1`, picking the nearer squeezed quadrature per channel.
    pub fn effective(ch: &ChannelDecomposition, squeezed_photons: f64) -> Result<Self> {
        let mut offsets = Vec::with_capacity(ch.modes());
        let mut signs = Vec::with_capacity(ch.modes());
        for (&g, &p) in ch.relative_phases.iter().zip(&ch.probabilities) {
            let from_plus = wrap_phase(g - FRAC_PI_2);
            let from_minus = wrap_phase(g + FRAC_PI_2);
            let (sign, dev) = if from_plus.abs() <= from_minus.abs() {
                (QuadratureSign::Plus, from_plus)
            } else {
                (QuadratureSign::Minus, from_minus)
            };
            signs.push(sign);
            offsets.push(if p < NULL_PROBABILITY { 0.0 } else { dev * squeezed_photons });
        }
        Self::with_signs(offsets, 1.0, signs)
    }
}

/// Oscillator phases putting every channel on its scheduled quadrature:
/// `theta_i = gamma_bar_i - (sign_i pi/2 + k_i / N_S^alpha)`.
pub fn heisenberg_schedule(
    ch: &ChannelDecomposition,
    squeezed_photons: f64,
    sched: &PhaseSchedule,
) -> Result<Vec<f64>> {
    if !(squeezed_photons > 0.0) {
        return Err(Error::invalid("schedule needs N_S > 0"));
    }
    if sched.offsets.len() != ch.modes() {
        return Err(Error::invalid(format!(
            "schedule has {} offsets for {} modes",
            sched.offsets.len(),
            ch.modes()
        )));
    }
    Ok(ch
        .network_phases
        .iter()
        .zip(sched.target_phases(squeezed_photons))
        .map(|(g, target)| g - target)
        .collect())
}

/// Probability-weighted `(k_avg, (d gamma)_avg)`; null channels contribute nothing.
pub fn weighted_averages(ch: &ChannelDecomposition, sched: &PhaseSchedule) -> Result<(f64, f64)> {
    let rates = ch
        .rates
        .as_ref()
        .ok_or_else(|| Error::invalid("channel decomposition has no phi-derivatives"))?;
    if sched.offsets.len() != ch.modes() {
        return Err(Error::invalid("schedule length does not match the mode count"));
    }
    let mut k_avg = 0.0;
    let mut dg_avg = 0.0;
    for i in 0..ch.modes() {
        let p = ch.probabilities[i];
        if p < NULL_PROBABILITY {
            continue;
        }
        k_avg += p * sched.offsets[i];
        dg_avg += p * rates.d_network_phases[i];
    }
    Ok((k_avg, dg_avg))
}

/// `8 (d gamma)_avg^2 (zeta(k_avg) N_D N_S + rho(k_avg) N_S^2)`.
pub fn asymptotic_fisher(
    ch: &ChannelDecomposition,
    sched: &PhaseSchedule,
    squeezed_photons: f64,
    displaced_photons: f64,
) -> Result<f64> {
    if sched.exponent != 1.0 {
        return Err(Error::invalid(format!(
            "asymptotic form needs schedule exponent 1, got {}",
            sched.exponent
        )));
    }
    let (k, dg) = weighted_averages(ch, sched)?;
    let ns = squeezed_photons;
    Ok(8.0 * dg * dg * (zeta(k) * displaced_photons * ns + rho(k) * ns * ns))
}

/// `|Sigma| = D1 N_S + D2 + D3 / N_S + O(N_S^-2)` at fixed relative phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticCoefficients {
    /// Sum-of-squares form, nonnegative by construction.
    pub d1: f64,
    /// Same coefficient from the `cos 2 gamma` form.
    pub d1_raw: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn determinant_expansion(ch: &ChannelDecomposition) -> AsymptoticCoefficients {
    let m = ch.modes() as i32;
    let p = &ch.probabilities;
    let g = &ch.relative_phases;
    let cos2: f64 = p.iter().zip(g).map(|(p, g)| p * (2.0 * g).cos()).sum();
    let mut pairs = 0.0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            pairs += p[i] * p[j] * (g[i] - g[j]).sin().powi(2);
        }
    }
    let d1_raw = 0.5f64.powi(m - 1) * (1.0 + cos2) - 0.5f64.powi(m - 2) * pairs;
    let cc: f64 = p.iter().zip(g).map(|(p, g)| p * g.cos().powi(2)).sum();
    let sc: f64 = p.iter().zip(g).map(|(p, g)| p * g.sin() * g.cos()).sum();
    AsymptoticCoefficients {
        d1: 0.5f64.powi(m - 2) * (cc * cc + sc * sc),
        d1_raw,
        d2: 0.5f64.powi(m) * (1.0 + cos2),
        d3: -0.5f64.powi(m + 2) * cos2,
    }
}

/// How the oscillator phases are chosen for a given photon budget.
#[derive(Debug, Clone, PartialEq)]
pub enum PhasePolicy {
    /// Reschedule at every `N_S` around `phi`.
    Schedule(PhaseSchedule),
    /// Keep `gamma_i` at fixed values regardless of `N`.
    FixedRelative(Vec<f64>),
    /// Use these `theta_i` as given.
    Explicit(Vec<f64>),
}

impl PhasePolicy {
    /// `theta` for a probe with `squeezed_photons` tuned at `phi`.
    pub fn oscillator_phases(
        &self,
        net: &ParametrizedNetwork,
        phi: f64,
        squeezed_photons: f64,
    ) -> Result<Vec<f64>> {
        let m = net.modes();
        let check = |v: &[f64]| {
            if v.len() != m {
                Err(Error::invalid(format!("expected {m} phases, got {}", v.len())))
            } else {
                Ok(())
            }
        };
        match self {
            PhasePolicy::Explicit(theta) => {
                check(theta)?;
                Ok(theta.clone())
            }
            PhasePolicy::FixedRelative(gamma) => {
                check(gamma)?;
                let ch = first_row_decomposition(&net.evaluate(phi)?, &vec![0.0; m])?;
                Ok(ch.network_phases.iter().zip(gamma).map(|(g, t)| g - t).collect())
            }
            PhasePolicy::Schedule(sched) => {
                let ch = first_row_decomposition(&net.evaluate(phi)?, &vec![0.0; m])?;
                heisenberg_schedule(&ch, squeezed_photons, sched)
            }
        }
    }
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("log-log fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("log-log fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fisher information over a range of photon numbers and its log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub photons: Vec<f64>,
    pub fisher: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// `F(N)` at fixed `beta` for each `N` in `photons`, with the oscillator phases
/// re-derived from `policy` at every `N`.
pub fn slope_experiment(
    net: &ParametrizedNetwork,
    beta: f64,
    photons: &[f64],
    policy: &PhasePolicy,
    phi: f64,
) -> Result<ScalingFit> {
    if photons.len() < 3 {
        return Err(Error::invalid("slope experiment needs at least three photon numbers"));
    }
    let lo = photons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = photons.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::invalid("photon numbers must be positive and span at least three decades"));
    }
    let fisher = photons
        .par_iter()
        .map(|&n| {
            let probe = ProbeSpec::new(n, beta)?;
            let theta = policy.oscillator_phases(net, phi, probe.squeezed_photons())?;
            Ok(fisher_information(net, &probe, &theta, phi)?.total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (slope, intercept) = loglog_fit(photons, &fisher)?;
    Ok(ScalingFit { photons: photons.to_vec(), fisher, slope, intercept })
}

/// Monte-Carlo estimate of `E[(d/dphi log p)^2]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

const MC_CHUNK: usize = 4096;

/// Draws outcomes at `phi` and averages the squared central-difference score.
///
/// Work is split into fixed chunks, each with its own RNG stream, and reduced
/// in chunk order, so the result does not depend on the thread count.
pub fn mc_fisher_oracle(
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    phi: f64,
    samples: usize,
    seed: u64,
    step: f64,
) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(Error::invalid("Monte-Carlo Fisher estimate needs at least 1000 samples"));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let density_at = |x: f64| -> Result<GaussianDensity> {
        let ch = first_row_decomposition(&net.evaluate(x)?, theta)?;
        GaussianDensity::new(output_mean(probe, &ch), &output_covariance(probe, &ch))
    };
    let center = density_at(phi)?;
    let up = density_at(phi + step)?;
    let down = density_at(phi - step)?;

    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_stream(seed, c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let x = center.sample(&mut rng);
                let score = (up.log_pdf(&x) - down.log_pdf(&x)) / (2.0 * step);
                let s2 = score * score;
                sum += s2;
                sum_sq += s2 * s2;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate { estimate: mean, std_error: (var / n).sqrt() })
}
