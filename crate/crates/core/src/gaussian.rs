//! Output statistics of a single-mode squeezed-coherent probe after the network.
//!
//! Quadratures use vacuum variance 1/2. All closed forms are expressed through
//! the amplitudes `q_j = sqrt(P_j)` and relative phases `gamma_j`, and are
//! rearranged so the large `sinh^2 r` and `sinh r cosh r` pieces never cancel
//! against each other explicitly:
//!
//! `sinh r (sinh r + cos 2g cosh r) = -sinh r e^{-r} + 2 sinh r cosh r cos^2 g`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dual::{Dual, Real};
use crate::error::{Error, Result};
use crate::linalg::{det_oracle, numerical_rank, Cholesky, ComplexMatrix, RealMatrix};
use crate::network::{
    channel_derivatives, ensure_unitary, first_row_decomposition, ChannelDecomposition,
    ParametrizedNetwork, NULL_PROBABILITY,
};

/// Photon budget of the probe, split between squeezing and displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    total: f64,
    beta: f64,
    squeezed: f64,
    displaced: f64,
}

impl ProbeSpec {
    /// `N_S = beta N`, `N_D = (1 - beta) N`.
    pub fn new(total_photons: f64, beta: f64) -> Result<Self> {
        if !(total_photons >= 0.0) || !total_photons.is_finite() {
            return Err(Error::invalid("total photon number must be finite and nonnegative"));
        }
        if !(beta > 0.0) {
            return Err(Error::invalid("β > 0 required"));
        }
        if !(beta <= 1.0) {
            return Err(Error::invalid("β ≤ 1 required"));
        }
        Ok(Self {
            total: total_photons,
            beta,
            squeezed: beta * total_photons,
            displaced: (1.0 - beta) * total_photons,
        })
    }

    pub fn from_photons(squeezed: f64, displaced: f64) -> Result<Self> {
        if !(squeezed >= 0.0 && displaced >= 0.0) || !(squeezed + displaced).is_finite() {
            return Err(Error::invalid("photon numbers must be finite and nonnegative"));
        }
        let total = squeezed + displaced;
        if total == 0.0 {
            return Self::new(0.0, 1.0);
        }
        if squeezed == 0.0 {
            return Err(Error::invalid("β > 0 required"));
        }
        Ok(Self { total, beta: squeezed / total, squeezed, displaced })
    }

    /// From the squeezing parameter `r` and displacement `d >= 0`.
    pub fn from_squeezing(r: f64, d: f64) -> Result<Self> {
        if !(d >= 0.0) {
            return Err(Error::invalid("displacement must be nonnegative"));
        }
        Self::from_photons(r.sinh().powi(2), d * d)
    }

    pub fn total(&self) -> f64 {
        self.total
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn squeezed_photons(&self) -> f64 {
        self.squeezed
    }
    pub fn displaced_photons(&self) -> f64 {
        self.displaced
    }
    pub fn squeezing(&self) -> f64 {
        self.sinh_r().asinh()
    }
    pub fn displacement(&self) -> f64 {
        self.displaced.sqrt()
    }
    pub fn sinh_r(&self) -> f64 {
        self.squeezed.sqrt()
    }
    pub fn cosh_r(&self) -> f64 {
        (1.0 + self.squeezed).sqrt()
    }
    /// `sinh r e^{-r}`, computed without subtracting `cosh r - sinh r`.
    fn sinh_exp_neg(&self) -> f64 {
        let s = self.sinh_r();
        s / (s + self.cosh_r())
    }
}

struct Squeeze {
    ss: f64,
    sc: f64,
    sem: f64,
}

impl Squeeze {
    fn of(probe: &ProbeSpec) -> Self {
        let s = probe.sinh_r();
        Self { ss: probe.squeezed_photons(), sc: s * probe.cosh_r(), sem: probe.sinh_exp_neg() }
    }
}

fn amplitudes(ch: &ChannelDecomposition) -> (Vec<f64>, Vec<f64>) {
    (
        ch.probabilities.iter().map(|p| p.sqrt()).collect(),
        ch.relative_phases.clone(),
    )
}

fn dual_amplitudes(ch: &ChannelDecomposition) -> Result<(Vec<Dual>, Vec<Dual>)> {
    let rates = ch
        .rates
        .as_ref()
        .ok_or_else(|| Error::invalid("channel decomposition has no phi-derivatives"))?;
    let q = ch
        .probabilities
        .iter()
        .zip(&rates.d_probabilities)
        .map(|(&p, &dp)| {
            let q = p.sqrt();
            Dual::new(q, if p < NULL_PROBABILITY { 0.0 } else { dp / (2.0 * q) })
        })
        .collect();
    let g = ch
        .relative_phases
        .iter()
        .zip(&rates.d_network_phases)
        .map(|(&g, &dg)| Dual::new(g, dg))
        .collect();
    Ok((q, g))
}

fn mean_of<T: Real>(d: f64, q: &[T], g: &[T]) -> Vec<T> {
    q.iter().zip(g).map(|(&qi, &gi)| qi * gi.cos() * d).collect()
}

/// `A = Sigma - I/2`, rank at most two.
fn offset_of<T: Real>(sq: &Squeeze, q: &[T], g: &[T]) -> Vec<Vec<T>> {
    let m = q.len();
    let mut a = vec![vec![T::constant(0.0); m]; m];
    for i in 0..m {
        for j in i..m {
            let half_diff = (g[i] - g[j]) * 0.5;
            let half_sum = (g[i] + g[j]) * 0.5;
            let sd = half_diff.sin();
            let cs = half_sum.cos();
            let shape = T::constant(-sq.sem) - sd * sd * (2.0 * sq.ss) + cs * cs * (2.0 * sq.sc);
            let v = q[i] * q[j] * shape;
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

fn det_of<T: Real>(sq: &Squeeze, q: &[T], g: &[T]) -> T {
    let m = q.len() as i32;
    let mut single = T::constant(0.0);
    for (&qi, &gi) in q.iter().zip(g) {
        let c = gi.cos();
        single += qi * qi * (T::constant(-sq.sem) + c * c * (2.0 * sq.sc));
    }
    let mut pairs = T::constant(0.0);
    for i in 0..q.len() {
        for j in (i + 1)..q.len() {
            let s = (g[i] - g[j]).sin();
            pairs += q[i] * q[i] * q[j] * q[j] * s * s;
        }
    }
    T::constant(0.5f64.powi(m)) + single * 0.5f64.powi(m - 1) - pairs * (sq.ss * 0.5f64.powi(m - 2))
}

/// `S_sti = sinh^2 r q_s q_t P_i sin(g_s - g_i) sin(g_t - g_i)`.
fn s_term<T: Real>(sq: &Squeeze, q: &[T], g: &[T], s: usize, t: usize, i: usize) -> T {
    q[s] * q[t] * q[i] * q[i] * (g[s] - g[i]).sin() * (g[t] - g[i]).sin() * sq.ss
}

fn cofactor_of<T: Real>(sq: &Squeeze, q: &[T], g: &[T], a: &[Vec<T>]) -> Vec<Vec<T>> {
    let m = q.len();
    let mi = m as i32;
    let w1 = 0.5f64.powi(mi - 1);
    let w2 = 0.5f64.powi(mi - 2);
    let w3 = 0.5f64.powi(mi - 3);
    let mut c = vec![vec![T::constant(0.0); m]; m];
    for s in 0..m {
        let mut diag = T::constant(w1);
        for i in (0..m).filter(|&i| i != s) {
            diag += a[i][i] * w2;
            for j in ((i + 1)..m).filter(|&j| j != s) {
                diag -= s_term(sq, q, g, i, i, j) * w3;
            }
        }
        c[s][s] = diag;
        for t in (s + 1)..m {
            let mut off = -a[s][t] * w2;
            for i in (0..m).filter(|&i| i != s && i != t) {
                off += s_term(sq, q, g, s, t, i) * w3;
            }
            c[s][t] = off;
            c[t][s] = off;
        }
    }
    c
}

fn to_matrix(rows: &[Vec<f64>]) -> RealMatrix {
    let m = rows.len();
    RealMatrix::from_fn(m, m, |i, j| rows[i][j])
}

/// `mu_i = d sqrt(P_i) cos(gamma_i)`.
pub fn output_mean(probe: &ProbeSpec, ch: &ChannelDecomposition) -> DVector<f64> {
    let (q, g) = amplitudes(ch);
    DVector::from_vec(mean_of(probe.displacement(), &q, &g))
}

/// `Sigma_ij = delta_ij/2 + sqrt(P_i P_j)(cos(g_i - g_j) sinh^2 r + cos(g_i + g_j) sinh r cosh r)`.
pub fn output_covariance(probe: &ProbeSpec, ch: &ChannelDecomposition) -> RealMatrix {
    let (q, g) = amplitudes(ch);
    let a = offset_of(&Squeeze::of(probe), &q, &g);
    to_matrix(&a) + RealMatrix::identity(q.len(), q.len()) * 0.5
}

/// `|Sigma|` in `O(M^2)` from the rank-two structure of `Sigma - I/2`.
pub fn covariance_determinant(probe: &ProbeSpec, ch: &ChannelDecomposition) -> f64 {
    let (q, g) = amplitudes(ch);
    det_of(&Squeeze::of(probe), &q, &g)
}

/// Cofactor matrix `C = |Sigma| Sigma^{-1}` in closed form.
pub fn cofactor_matrix(probe: &ProbeSpec, ch: &ChannelDecomposition) -> RealMatrix {
    let (q, g) = amplitudes(ch);
    let sq = Squeeze::of(probe);
    let a = offset_of(&sq, &q, &g);
    to_matrix(&cofactor_of(&sq, &q, &g, &a))
}

/// Numerical rank of `Sigma - I/2`.
pub fn vacuum_offset_rank(cov: &RealMatrix) -> usize {
    let n = cov.nrows();
    numerical_rank(&(cov - RealMatrix::identity(n, n) * 0.5))
}

/// Phase-space matrix `[[Re V, -Im V], [Im V, Re V]]` of a mode unitary `V`.
pub fn phase_space_rotation(v: &ComplexMatrix) -> RealMatrix {
    let m = v.nrows();
    RealMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = v[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Local oscillator rotation `[[cos T, sin T], [-sin T, cos T]]`, `T = diag(theta)`.
pub fn oscillator_rotation(theta: &[f64]) -> RealMatrix {
    let m = theta.len();
    let mut o = RealMatrix::zeros(2 * m, 2 * m);
    for (i, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        o[(i, i)] = c;
        o[(i, m + i)] = s;
        o[(m + i, i)] = -s;
        o[(m + i, m + i)] = c;
    }
    o
}

/// Mean and covariance of the homodyne outcomes from the full `2M x 2M`
/// phase-space description, independent of the closed forms.
///
/// The probe amplitudes leaving the network are the first row of `u`
/// (`(U)_{1j} = sqrt(P_j) e^{i gamma_bar_j}`), so the input vector
/// `(d, 0, ..)` is transported by the phase-space matrix of `u^T`.
pub fn phase_space_oracle(
    probe: &ProbeSpec,
    u: &ComplexMatrix,
    theta: &[f64],
) -> Result<(DVector<f64>, RealMatrix)> {
    let m = u.nrows();
    ensure_unitary(u)?;
    if theta.len() != m {
        return Err(Error::invalid(format!("expected {m} oscillator phases, got {}", theta.len())));
    }
    let r = phase_space_rotation(&u.transpose());
    let o = oscillator_rotation(theta);

    let stretch = (probe.sinh_r() + probe.cosh_r()).powi(2);
    let mut gamma0 = RealMatrix::identity(2 * m, 2 * m) * 0.5;
    gamma0[(0, 0)] = 0.5 * stretch;
    gamma0[(m, m)] = 0.5 / stretch;

    let mut alpha0 = DVector::zeros(2 * m);
    alpha0[0] = probe.displacement();

    let or = &o * &r;
    let mean = (&or * alpha0).rows(0, m).into_owned();
    let full = &or * gamma0 * or.transpose();
    let cov = full.view((0, 0), (m, m)).into_owned();
    Ok((mean, cov))
}

/// Mean, covariance, determinant and cofactor matrix together with their
/// `phi`-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub mean: DVector<f64>,
    pub covariance: RealMatrix,
    pub det: f64,
    pub cofactor: RealMatrix,
    pub d_mean: DVector<f64>,
    pub d_covariance: RealMatrix,
    pub d_det: f64,
    pub d_cofactor: RealMatrix,
}

impl GaussianModel {
    /// Chain rule through the closed forms, seeded with the channel rates.
    pub fn from_channels(probe: &ProbeSpec, ch: &ChannelDecomposition) -> Result<Self> {
        let (q, g) = dual_amplitudes(ch)?;
        let sq = Squeeze::of(probe);
        let mean = mean_of(probe.displacement(), &q, &g);
        let a = offset_of(&sq, &q, &g);
        let det = det_of(&sq, &q, &g);
        let cof = cofactor_of(&sq, &q, &g, &a);

        let m = q.len();
        let split = |rows: &[Vec<Dual>]| {
            (
                RealMatrix::from_fn(m, m, |i, j| rows[i][j].value),
                RealMatrix::from_fn(m, m, |i, j| rows[i][j].deriv),
            )
        };
        let (offset, d_covariance) = split(&a);
        let (cofactor, d_cofactor) = split(&cof);
        Ok(Self {
            mean: DVector::from_iterator(m, mean.iter().map(|x| x.value)),
            d_mean: DVector::from_iterator(m, mean.iter().map(|x| x.deriv)),
            covariance: offset + RealMatrix::identity(m, m) * 0.5,
            d_covariance,
            det: det.value,
            d_det: det.deriv,
            cofactor,
            d_cofactor,
        })
    }

    pub fn modes(&self) -> usize {
        self.mean.len()
    }

    /// `Tr[C dSigma]`, equal to `d|Sigma|` by Jacobi's formula.
    pub fn jacobi_trace(&self) -> f64 {
        (&self.cofactor * &self.d_covariance).trace()
    }

    pub fn density(&self) -> Result<GaussianDensity> {
        GaussianDensity::new(self.mean.clone(), &self.covariance)
    }
}

/// Model at `phi` with derivatives from `channel_derivatives`.
pub fn model_with_derivatives(
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    phi: f64,
    step: f64,
) -> Result<GaussianModel> {
    let ch = channel_derivatives(net, phi, theta, step)?;
    GaussianModel::from_channels(probe, &ch)
}

/// Central differences of the assembled `(mu, Sigma, |Sigma|, C)` across `phi +- step`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceDerivatives {
    pub d_mean: DVector<f64>,
    pub d_covariance: RealMatrix,
    pub d_det: f64,
    pub d_cofactor: RealMatrix,
}

pub fn finite_difference_derivatives(
    net: &ParametrizedNetwork,
    probe: &ProbeSpec,
    theta: &[f64],
    phi: f64,
    step: f64,
) -> Result<FiniteDifferenceDerivatives> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let at = |x: f64| -> Result<_> {
        let ch = first_row_decomposition(&net.evaluate(x)?, theta)?;
        Ok((
            output_mean(probe, &ch),
            output_covariance(probe, &ch),
            covariance_determinant(probe, &ch),
            cofactor_matrix(probe, &ch),
        ))
    };
    let (mu_p, cov_p, det_p, cof_p) = at(phi + step)?;
    let (mu_m, cov_m, det_m, cof_m) = at(phi - step)?;
    let h2 = 2.0 * step;
    Ok(FiniteDifferenceDerivatives {
        d_mean: (mu_p - mu_m) / h2,
        d_covariance: (cov_p - cov_m) / h2,
        d_det: (det_p - det_m) / h2,
        d_cofactor: (cof_p - cof_m) / h2,
    })
}

/// Multivariate normal density with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    chol: Cholesky,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: &RealMatrix) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::invalid("mean and covariance dimensions differ"));
        }
        let chol = Cholesky::new(cov)?;
        let m = mean.len() as f64;
        let log_norm = -0.5 * (chol.log_det() + m * (2.0 * std::f64::consts::PI).ln());
        Ok(Self { mean, chol, log_norm })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let centered: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        self.log_norm - 0.5 * self.chol.mahalanobis_sq(&centered)
    }

    /// One draw `mu + L z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.mean.len();
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.chol.lower();
        (0..m)
            .map(|i| self.mean[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }
}

/// `log p(x | phi)` for the model's mean and covariance.
pub fn log_pdf(x: &[f64], model: &GaussianModel) -> Result<f64> {
    if x.len() != model.modes() {
        return Err(Error::invalid("outcome length does not match the mode count"));
    }
    Ok(model.density()?.log_pdf(x))
}

/// Relative disagreement of the closed-form determinant with the LU oracle.
pub fn determinant_discrepancy(probe: &ProbeSpec, ch: &ChannelDecomposition) -> Result<f64> {
    let closed = covariance_determinant(probe, ch);
    let lu = det_oracle(&output_covariance(probe, ch))?;
    Ok((closed - lu).abs() / lu.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cofactor_oracle, random_haar_unitary, rng_stream};
    use crate::network::default_step;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single(p: f64, gamma: f64) -> ChannelDecomposition {
        ChannelDecomposition::from_parts(vec![p], vec![gamma]).unwrap()
    }

    fn haar_channels(m: usize, seed: u64) -> (ComplexMatrix, Vec<f64>, ChannelDecomposition) {
        let u = random_haar_unitary(m, seed).unwrap();
        let mut rng = rng_stream(seed, 77);
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
        let ch = first_row_decomposition(&u, &theta).unwrap();
        (u, theta, ch)
    }

    #[test]
    fn probe_photon_bookkeeping() {
        let p = ProbeSpec::new(10.0, 0.3).unwrap();
        let r = p.squeezing();
        let d = p.displacement();
        assert!((r.sinh().powi(2) + d * d - 10.0).abs() < 1e-10);
        assert!((p.squeezed_photons() - 3.0).abs() < 1e-15);
        assert!(ProbeSpec::new(10.0, 0.0).unwrap_err().to_string().contains("β > 0 required"));
        assert!(ProbeSpec::new(10.0, 1.5).is_err());
        assert!(ProbeSpec::new(-1.0, 0.5).is_err());
        assert!(ProbeSpec::from_squeezing(0.0, 1.0).is_err());
        let q = ProbeSpec::from_squeezing(1.0, 2.0).unwrap();
        assert!((q.squeezing() - 1.0).abs() < 1e-14);
        assert!((q.displacement() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mean_examples() {
        let sv = ProbeSpec::new(5.0, 1.0).unwrap();
        let (_, _, ch) = haar_channels(3, 1);
        assert!(output_mean(&sv, &ch).iter().all(|&x| x == 0.0));

        let p = ProbeSpec::from_squeezing(1.0, 3.0).unwrap();
        assert!((output_mean(&p, &single(1.0, 0.0))[0] - 3.0).abs() < 1e-15);

        let ch = ChannelDecomposition::from_parts(vec![0.2, 0.3, 0.5], vec![FRAC_PI_2; 3]).unwrap();
        assert!(output_mean(&p, &ch).iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn mean_energy_bound() {
        let p = ProbeSpec::from_squeezing(0.5, 2.0).unwrap();
        let (_, _, ch) = haar_channels(5, 4);
        assert!(output_mean(&p, &ch).norm_squared() <= p.displaced_photons() + 1e-12);
        let zero = ch.with_oscillator_phases(&ch.network_phases).unwrap();
        assert!((output_mean(&p, &zero).norm_squared() - p.displaced_photons()).abs() < 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let vac = ProbeSpec::new(0.0, 1.0).unwrap();
        let (_, _, ch) = haar_channels(4, 2);
        assert_eq!(output_covariance(&vac, &ch), RealMatrix::identity(4, 4) * 0.5);

        let r = 0.8;
        let p = ProbeSpec::from_squeezing(r, 0.0).unwrap();
        let anti = output_covariance(&p, &single(1.0, 0.0))[(0, 0)];
        let sq = output_covariance(&p, &single(1.0, FRAC_PI_2))[(0, 0)];
        assert!((anti - (2.0 * r).exp() / 2.0).abs() < 1e-13);
        assert!((sq - (-2.0 * r).exp() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_matches_textbook_form() {
        let p = ProbeSpec::from_squeezing(1.3, 0.0).unwrap();
        let (s, c) = (1.3f64.sinh(), 1.3f64.cosh());
        let (_, _, ch) = haar_channels(5, 8);
        let cov = output_covariance(&p, &ch);
        for i in 0..5 {
            for j in 0..5 {
                let (gi, gj) = (ch.relative_phases[i], ch.relative_phases[j]);
                let direct = if i == j { 0.5 } else { 0.0 }
                    + (ch.probabilities[i] * ch.probabilities[j]).sqrt()
                        * ((gi - gj).cos() * s * s + (gi + gj).cos() * s * c);
                assert!((cov[(i, j)] - direct).abs() < 1e-12);
            }
        }
        assert!(vacuum_offset_rank(&cov) <= 2);
    }

    #[test]
    fn determinant_examples() {
        let vac = ProbeSpec::new(0.0, 1.0).unwrap();
        let (_, _, ch) = haar_channels(3, 6);
        assert!((covariance_determinant(&vac, &ch) - 0.125).abs() < 1e-16);

        let r = 1.1;
        let p = ProbeSpec::from_squeezing(r, 0.0).unwrap();
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let ch = ChannelDecomposition::from_parts(probs, vec![FRAC_PI_2; 4]).unwrap();
        let expected = (-2.0 * r).exp() / 16.0;
        assert!((covariance_determinant(&p, &ch) - expected).abs() < 1e-14 * expected.max(1e-3));
    }

    #[test]
    fn determinant_matches_lu_oracle() {
        let p = ProbeSpec::from_squeezing(1.5, 0.7).unwrap();
        let (_, _, ch) = haar_channels(5, 12);
        assert!(determinant_discrepancy(&p, &ch).unwrap() < 1e-10);
    }

    #[test]
    fn cofactor_examples() {
        let vac = ProbeSpec::new(0.0, 1.0).unwrap();
        let (_, _, ch) = haar_channels(3, 3);
        assert!((cofactor_matrix(&vac, &ch) - RealMatrix::identity(3, 3) * 0.25).amax() < 1e-16);

        let p = ProbeSpec::from_squeezing(0.9, 1.0).unwrap();
        let one = cofactor_matrix(&p, &single(1.0, 0.4));
        assert_eq!(one, RealMatrix::from_element(1, 1, 1.0));

        let (_, _, ch) = haar_channels(2, 5);
        let cov = output_covariance(&p, &ch);
        let c = cofactor_matrix(&p, &ch);
        assert!((c[(0, 0)] - cov[(1, 1)]).abs() < 1e-13);
        assert!((c[(1, 1)] - cov[(0, 0)]).abs() < 1e-13);
        assert!((c[(0, 1)] + cov[(0, 1)]).abs() < 1e-13);
    }

    #[test]
    fn cofactor_matches_minor_expansion() {
        let p = ProbeSpec::from_squeezing(1.0, 0.0).unwrap();
        let (_, _, ch) = haar_channels(6, 19);
        let closed = cofactor_matrix(&p, &ch);
        let oracle = cofactor_oracle(&output_covariance(&p, &ch)).unwrap();
        let scale = oracle.amax();
        assert!((closed - oracle).amax() <= 1e-9 * scale);
    }

    #[test]
    fn phase_space_identity_network() {
        let p = ProbeSpec::from_squeezing(1.0, 2.0).unwrap();
        let m = 3;
        let (mean, cov) = phase_space_oracle(&p, &ComplexMatrix::identity(m, m), &[0.0; 3]).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-15 && mean[1] == 0.0 && mean[2] == 0.0);
        let mut expected = RealMatrix::identity(m, m) * 0.5;
        expected[(0, 0)] = (2.0f64).exp() / 2.0;
        assert!((cov - expected).amax() < 1e-12);
    }

    #[test]
    fn phase_space_rotation_is_orthogonal() {
        let u = random_haar_unitary(5, 2).unwrap();
        let r = phase_space_rotation(&u);
        assert!((&r * r.transpose() - RealMatrix::identity(10, 10)).amax() < 1e-12);
    }

    #[test]
    fn phase_space_matches_closed_form() {
        let net = ParametrizedNetwork::interpolated_random(4, 31).unwrap();
        let u = net.evaluate(0.3).unwrap();
        let theta = [0.3, -1.2, 2.5, 0.9];
        let p = ProbeSpec::from_squeezing(1.2, 1.7).unwrap();
        let ch = first_row_decomposition(&u, &theta).unwrap();
        let (mean, cov) = phase_space_oracle(&p, &u, &theta).unwrap();
        assert!((mean - output_mean(&p, &ch)).amax() < 1e-12);
        assert!((cov - output_covariance(&p, &ch)).amax() < 1e-12);
    }

    #[test]
    fn phase_space_rejects_non_unitary() {
        let p = ProbeSpec::from_squeezing(1.0, 0.0).unwrap();
        let u = ComplexMatrix::identity(2, 2) * num_complex::Complex64::new(1.5, 0.0);
        assert!(phase_space_oracle(&p, &u, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn log_pdf_peak_and_translation() {
        let model = GaussianModel {
            mean: DVector::from_vec(vec![0.3]),
            covariance: RealMatrix::from_element(1, 1, 0.5),
            det: 0.5,
            cofactor: RealMatrix::from_element(1, 1, 1.0),
            d_mean: DVector::zeros(1),
            d_covariance: RealMatrix::zeros(1, 1),
            d_det: 0.0,
            d_cofactor: RealMatrix::zeros(1, 1),
        };
        assert!((log_pdf(&[0.3], &model).unwrap() + 0.5 * PI.ln()).abs() < 1e-14);
        let mut shifted = model.clone();
        shifted.mean[0] += 1.7;
        let a = log_pdf(&[0.9], &model).unwrap();
        let b = log_pdf(&[2.6], &shifted).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(log_pdf(&[0.0, 1.0], &model).is_err());
    }

    #[test]
    fn log_pdf_normalizes() {
        // Importance-sample the density against a broad uniform box.
        let net = ParametrizedNetwork::interpolated_random(2, 3).unwrap();
        let p = ProbeSpec::from_squeezing(0.4, 0.5).unwrap();
        let model = model_with_derivatives(&net, &p, &[0.1, 0.2], 0.3, default_step(0.3)).unwrap();
        let dens = model.density().unwrap();
        let half = 5.0;
        let mut rng = rng_stream(1, 0);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = [
                model.mean[0] + rng.random_range(-half..half),
                model.mean[1] + rng.random_range(-half..half),
            ];
            acc += dens.log_pdf(&x).exp();
        }
        let integral = acc / n as f64 * (2.0 * half).powi(2);
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn model_derivatives_agree_with_finite_differences() {
        let net = ParametrizedNetwork::interpolated_random(4, 8).unwrap();
        let p = ProbeSpec::from_squeezing(1.0, 1.5).unwrap();
        let theta = [0.5, 1.5, -0.7, 2.2];
        let phi = 0.4;
        let model = model_with_derivatives(&net, &p, &theta, phi, default_step(phi)).unwrap();
        let fd = finite_difference_derivatives(&net, &p, &theta, phi, 1e-5).unwrap();
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale;
        let s = model.d_mean.amax().max(1e-12);
        assert!((&model.d_mean - &fd.d_mean).amax() / s < 1e-6);
        let s = model.d_covariance.amax();
        assert!((&model.d_covariance - &fd.d_covariance).amax() / s < 1e-6);
        let s = model.d_cofactor.amax();
        assert!((&model.d_cofactor - &fd.d_cofactor).amax() / s < 1e-6);
        assert!(rel(model.d_det, fd.d_det, model.d_det.abs()) < 1e-6);
        assert!(rel(model.d_det, model.jacobi_trace(), model.d_det.abs()) < 1e-8);
    }

    #[test]
    fn diagonal_phase_mean_derivative() {
        let net = ParametrizedNetwork::diagonal_phase(1, 0).unwrap();
        let p = ProbeSpec::from_squeezing(0.7, 2.0).unwrap();
        let phi = 0.9;
        let model = model_with_derivatives(&net, &p, &[0.2], phi, default_step(phi)).unwrap();
        let gamma = phi - 0.2;
        assert!((model.d_mean[0] + 2.0 * gamma.sin()).abs() < 1e-8);
    }

    #[test]
    fn vacuum_covariance_is_phi_independent() {
        let net = ParametrizedNetwork::interpolated_random(3, 4).unwrap();
        let vac = ProbeSpec::new(0.0, 1.0).unwrap();
        let model = model_with_derivatives(&net, &vac, &[0.0; 3], 0.2, 1e-6).unwrap();
        assert_eq!(model.d_covariance, RealMatrix::zeros(3, 3));
        assert_eq!(model.d_det, 0.0);
    }

    #[test]
    fn model_requires_rates() {
        let p = ProbeSpec::from_squeezing(1.0, 0.0).unwrap();
        assert!(GaussianModel::from_channels(&p, &single(1.0, 0.0)).is_err());
    }
}
