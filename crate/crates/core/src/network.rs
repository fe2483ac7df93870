//! Parameterized passive linear networks and the per-channel view of the probe.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_unitary_from_rng, rng_stream, unitarity_defect, ComplexMatrix};

/// Unitarity tolerance for network matrices.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Channels with `P_j` below this carry no phase.
pub const NULL_PROBABILITY: f64 = 1e-14;

/// Default central-difference step at `phi`.
pub fn default_step(phi: f64) -> f64 {
    1e-6 * (1.0 + phi.abs())
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkKind {
    /// `V_after * diag(.., e^{i phi}, ..) * V_before`.
    SinglePhaseInMesh {
        before: ComplexMatrix,
        after: ComplexMatrix,
        phase_mode: usize,
    },
    /// Two balanced beam splitters on modes 0 and 1 around a phase on `phase_mode`.
    MachZehnderLike { phase_mode: usize },
    /// `V_after * exp(i phi H) * V_before` with `H = W diag(lambda) W^dagger`.
    InterpolatedRandom {
        before: ComplexMatrix,
        after: ComplexMatrix,
        basis: ComplexMatrix,
        spectrum: Vec<f64>,
    },
    /// Tabulated samples; only exact `phi` matches are valid.
    CustomTable { samples: Vec<(f64, ComplexMatrix)> },
}

/// `phi -> U_phi` for an `M`-mode passive network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrizedNetwork {
    modes: usize,
    kind: NetworkKind,
}

fn check_unitary(u: &ComplexMatrix, modes: usize, what: &str) -> Result<()> {
    if u.nrows() != modes || u.ncols() != modes {
        return Err(Error::invalid(format!(
            "{what}: expected {modes}x{modes}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = unitarity_defect(u);
    if !(defect <= UNITARITY_TOLERANCE) {
        return Err(Error::invalid(format!(
            "{what} is not unitary: max |U^dagger U - I| = {defect:e}"
        )));
    }
    Ok(())
}

/// Errors unless `u` is square and unitary within `UNITARITY_TOLERANCE`.
pub fn ensure_unitary(u: &ComplexMatrix) -> Result<()> {
    check_unitary(u, u.nrows(), "matrix")
}

fn balanced_splitter(modes: usize) -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut b = ComplexMatrix::identity(modes, modes);
    b[(0, 0)] = Complex64::new(h, 0.0);
    b[(0, 1)] = Complex64::new(0.0, h);
    b[(1, 0)] = Complex64::new(0.0, h);
    b[(1, 1)] = Complex64::new(h, 0.0);
    b
}

impl ParametrizedNetwork {
    pub fn single_phase_in_mesh(
        before: ComplexMatrix,
        after: ComplexMatrix,
        phase_mode: usize,
    ) -> Result<Self> {
        let modes = before.nrows();
        if modes == 0 {
            return Err(Error::invalid("network needs at least one mode"));
        }
        check_unitary(&before, modes, "input mesh")?;
        check_unitary(&after, modes, "output mesh")?;
        if phase_mode >= modes {
            return Err(Error::invalid(format!(
                "phase mode {phase_mode} out of range for {modes} modes"
            )));
        }
        Ok(Self { modes, kind: NetworkKind::SinglePhaseInMesh { before, after, phase_mode } })
    }

    /// Phase `e^{i phi}` on `phase_mode` and nothing else.
    pub fn diagonal_phase(modes: usize, phase_mode: usize) -> Result<Self> {
        let id = ComplexMatrix::identity(modes, modes);
        Self::single_phase_in_mesh(id.clone(), id, phase_mode)
    }

    /// Single internal phase between two Haar-random meshes.
    pub fn random_mesh(modes: usize, phase_mode: usize, seed: u64) -> Result<Self> {
        let before = haar_unitary_from_rng(modes, &mut rng_stream(seed, 0))?;
        let after = haar_unitary_from_rng(modes, &mut rng_stream(seed, 1))?;
        Self::single_phase_in_mesh(before, after, phase_mode)
    }

    pub fn mach_zehnder(modes: usize, phase_mode: usize) -> Result<Self> {
        if modes < 2 {
            return Err(Error::invalid("mach_zehnder_like needs at least two modes"));
        }
        if phase_mode >= modes {
            return Err(Error::invalid(format!(
                "phase mode {phase_mode} out of range for {modes} modes"
            )));
        }
        Ok(Self { modes, kind: NetworkKind::MachZehnderLike { phase_mode } })
    }

    /// `V_after * exp(i phi H) * V_before` for a Hermitian generator `H`.
    pub fn interpolated(
        before: ComplexMatrix,
        generator: &ComplexMatrix,
        after: ComplexMatrix,
    ) -> Result<Self> {
        let modes = before.nrows();
        if modes == 0 {
            return Err(Error::invalid("network needs at least one mode"));
        }
        check_unitary(&before, modes, "input mesh")?;
        check_unitary(&after, modes, "output mesh")?;
        if generator.nrows() != modes || generator.ncols() != modes {
            return Err(Error::invalid("generator has the wrong shape"));
        }
        let herm_defect = (generator - generator.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_defect > 1e-12 * generator.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::invalid("generator is not Hermitian"));
        }
        let eig = generator.clone().symmetric_eigen();
        Ok(Self {
            modes,
            kind: NetworkKind::InterpolatedRandom {
                before,
                after,
                basis: eig.eigenvectors,
                spectrum: eig.eigenvalues.iter().cloned().collect(),
            },
        })
    }

    /// Generic network: Haar meshes and a generator with Haar eigenbasis and
    /// standard-normal spectrum.
    pub fn interpolated_random(modes: usize, seed: u64) -> Result<Self> {
        let before = haar_unitary_from_rng(modes, &mut rng_stream(seed, 0))?;
        let after = haar_unitary_from_rng(modes, &mut rng_stream(seed, 1))?;
        let basis = haar_unitary_from_rng(modes, &mut rng_stream(seed, 2))?;
        let mut rng = rng_stream(seed, 3);
        let spectrum = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Self {
            modes,
            kind: NetworkKind::InterpolatedRandom { before, after, basis, spectrum },
        })
    }

    pub fn custom_table(samples: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        let Some((_, first)) = samples.first() else {
            return Err(Error::invalid("custom table is empty"));
        };
        let modes = first.nrows();
        if modes == 0 {
            return Err(Error::invalid("network needs at least one mode"));
        }
        for (phi, u) in &samples {
            if !phi.is_finite() {
                return Err(Error::invalid("custom table has a non-finite phi"));
            }
            check_unitary(u, modes, &format!("custom table entry at phi = {phi}"))?;
        }
        Ok(Self { modes, kind: NetworkKind::CustomTable { samples } })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn kind(&self) -> &NetworkKind {
        &self.kind
    }

    /// `U_phi`.
    pub fn evaluate(&self, phi: f64) -> Result<ComplexMatrix> {
        if !phi.is_finite() {
            return Err(Error::invalid("phi must be finite"));
        }
        let m = self.modes;
        match &self.kind {
            NetworkKind::SinglePhaseInMesh { before, after, phase_mode } => {
                let mut inner = before.clone();
                let phase = Complex64::from_polar(1.0, phi);
                for j in 0..m {
                    inner[(*phase_mode, j)] *= phase;
                }
                Ok(after * inner)
            }
            NetworkKind::MachZehnderLike { phase_mode } => {
                let b = balanced_splitter(m);
                let mut inner = b.clone();
                let phase = Complex64::from_polar(1.0, phi);
                for j in 0..m {
                    inner[(*phase_mode, j)] *= phase;
                }
                Ok(b * inner)
            }
            NetworkKind::InterpolatedRandom { before, after, basis, spectrum } => {
                let phases = DVector::from_iterator(
                    m,
                    spectrum.iter().map(|&l| Complex64::from_polar(1.0, phi * l)),
                );
                let mut scaled = basis.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= phases[j];
                }
                Ok(after * (scaled * basis.adjoint()) * before)
            }
            NetworkKind::CustomTable { samples } => {
                let tol = 1e-12 * (1.0 + phi.abs());
                samples
                    .iter()
                    .find(|(p, _)| (p - phi).abs() <= tol)
                    .map(|(_, u)| u.clone())
                    .ok_or_else(|| {
                        Error::invalid(format!("phi = {phi} is not a tabulated point"))
                    })
            }
        }
    }
}

/// Per-channel rates `dP_j/dphi` and `d(gamma_bar_j)/dphi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRates {
    pub d_probabilities: Vec<f64>,
    pub d_network_phases: Vec<f64>,
}

/// First row of `U_phi` as `sqrt(P_j) e^{i gamma_bar_j}`, together with the
/// local oscillator phases `theta_j` and `gamma_j = gamma_bar_j - theta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecomposition {
    pub probabilities: Vec<f64>,
    pub network_phases: Vec<f64>,
    pub oscillator_phases: Vec<f64>,
    pub relative_phases: Vec<f64>,
    pub rates: Option<ChannelRates>,
}

impl ChannelDecomposition {
    pub fn modes(&self) -> usize {
        self.probabilities.len()
    }

    /// Builds a decomposition straight from `(P, gamma)`, with `theta = 0`.
    pub fn from_parts(probabilities: Vec<f64>, relative_phases: Vec<f64>) -> Result<Self> {
        if probabilities.len() != relative_phases.len() || probabilities.is_empty() {
            return Err(Error::invalid("probabilities and phases must have equal nonzero length"));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let m = probabilities.len();
        Ok(Self {
            probabilities,
            network_phases: relative_phases.clone(),
            oscillator_phases: vec![0.0; m],
            relative_phases,
            rates: None,
        })
    }

    pub fn with_rates(mut self, d_probabilities: Vec<f64>, d_network_phases: Vec<f64>) -> Result<Self> {
        let m = self.modes();
        if d_probabilities.len() != m || d_network_phases.len() != m {
            return Err(Error::invalid("rate vectors must match the mode count"));
        }
        self.rates = Some(ChannelRates { d_probabilities, d_network_phases });
        Ok(self)
    }

    /// Same network output, different local oscillators.
    pub fn with_oscillator_phases(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.modes() {
            return Err(Error::invalid(format!(
                "expected {} oscillator phases, got {}",
                self.modes(),
                theta.len()
            )));
        }
        let mut out = self.clone();
        out.oscillator_phases = theta.to_vec();
        out.relative_phases = self
            .network_phases
            .iter()
            .zip(theta)
            .map(|(g, t)| g - t)
            .collect();
        Ok(out)
    }

    pub fn probability_sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Reads `P_j` and `gamma_bar_j` off the first row of `u`.
pub fn first_row_decomposition(u: &ComplexMatrix, theta: &[f64]) -> Result<ChannelDecomposition> {
    let m = u.ncols();
    if theta.len() != m {
        return Err(Error::invalid(format!(
            "expected {m} oscillator phases, got {}",
            theta.len()
        )));
    }
    let mut probabilities = Vec::with_capacity(m);
    let mut network_phases = Vec::with_capacity(m);
    for j in 0..m {
        let a = u[(0, j)];
        let p = a.norm_sqr();
        probabilities.push(p);
        network_phases.push(if p < NULL_PROBABILITY { 0.0 } else { a.im.atan2(a.re) });
    }
    let relative_phases = network_phases.iter().zip(theta).map(|(g, t)| g - t).collect();
    Ok(ChannelDecomposition {
        probabilities,
        network_phases,
        oscillator_phases: theta.to_vec(),
        relative_phases,
        rates: None,
    })
}

/// Decomposition at `phi` with central-difference rates.
pub fn channel_derivatives(
    net: &ParametrizedNetwork,
    phi: f64,
    theta: &[f64],
    step: f64,
) -> Result<ChannelDecomposition> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let center = first_row_decomposition(&net.evaluate(phi)?, theta)?;
    let up = net.evaluate(phi + step)?;
    let down = net.evaluate(phi - step)?;
    let m = net.modes();
    let mut dp = Vec::with_capacity(m);
    let mut dg = Vec::with_capacity(m);
    for j in 0..m {
        let (a, b) = (up[(0, j)], down[(0, j)]);
        dp.push((a.norm_sqr() - b.norm_sqr()) / (2.0 * step));
        if center.probabilities[j] < NULL_PROBABILITY {
            dg.push(0.0);
        } else {
            let diff = wrap_phase(a.im.atan2(a.re) - b.im.atan2(b.re));
            dg.push(diff / (2.0 * step));
        }
    }
    center.with_rates(dp, dg)
}

/// JSON description of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub modes: usize,
    pub kind: NetworkKindName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub phase_mode: usize,
    #[serde(default)]
    pub mesh: MeshChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<TableEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKindName {
    SinglePhaseInMesh,
    MachZehnderLike,
    InterpolatedRandom,
    CustomTable,
}

/// Fixed meshes around the phase for `single_phase_in_mesh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshChoice {
    #[default]
    Haar,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub phi: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TableEntry {
    fn matrix(&self, modes: usize) -> Result<ComplexMatrix> {
        let shape_ok = self.re.len() == modes
            && self.im.len() == modes
            && self.re.iter().chain(&self.im).all(|row| row.len() == modes);
        if !shape_ok {
            return Err(Error::invalid(format!(
                "table entry at phi = {} must be {modes}x{modes}",
                self.phi
            )));
        }
        Ok(ComplexMatrix::from_fn(modes, modes, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

impl NetworkSpec {
    pub fn build(&self) -> Result<ParametrizedNetwork> {
        if self.modes == 0 {
            return Err(Error::invalid("network.modes must be at least 1"));
        }
        if self.table.is_some() && self.kind != NetworkKindName::CustomTable {
            return Err(Error::invalid("network.table is only valid for custom_table"));
        }
        match self.kind {
            NetworkKindName::SinglePhaseInMesh => match self.mesh {
                MeshChoice::Haar => ParametrizedNetwork::random_mesh(self.modes, self.phase_mode, self.seed),
                MeshChoice::Identity => ParametrizedNetwork::diagonal_phase(self.modes, self.phase_mode),
            },
            NetworkKindName::MachZehnderLike => ParametrizedNetwork::mach_zehnder(self.modes, self.phase_mode),
            NetworkKindName::InterpolatedRandom => ParametrizedNetwork::interpolated_random(self.modes, self.seed),
            NetworkKindName::CustomTable => {
                let entries = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::invalid("custom_table requires network.table"))?;
                let samples = entries
                    .iter()
                    .map(|e| e.matrix(self.modes).map(|u| (e.phi, u)))
                    .collect::<Result<Vec<_>>>()?;
                ParametrizedNetwork::custom_table(samples)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_phase_evaluation() {
        let net = ParametrizedNetwork::diagonal_phase(2, 0).unwrap();
        assert_eq!(net.evaluate(0.0).unwrap(), ComplexMatrix::identity(2, 2));
        let u = net.evaluate(PI / 3.0).unwrap();
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
        assert_eq!(u[(1, 1)], c(1.0, 0.0));
        assert_eq!(u[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn interpolated_random_is_unitary() {
        let net = ParametrizedNetwork::interpolated_random(4, 17).unwrap();
        assert!(unitarity_defect(&net.evaluate(0.7).unwrap()) <= 1e-12);
        for i in 0..120 {
            let phi = -3.0 + 0.05 * i as f64;
            assert!(unitarity_defect(&net.evaluate(phi).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn explicit_generator_matches_its_eigenbasis() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(-0.5, 0.0)]);
        let id = ComplexMatrix::identity(2, 2);
        let net = ParametrizedNetwork::interpolated(id.clone(), &h, id).unwrap();
        let u = net.evaluate(0.4).unwrap();
        // exp(i phi H) by truncated series
        let mut term = ComplexMatrix::identity(2, 2);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &h * c(0.0, 0.4 / k as f64);
            sum += &term;
        }
        assert!((u - sum).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
        let not_herm = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let id = ComplexMatrix::identity(2, 2);
        assert!(ParametrizedNetwork::interpolated(id.clone(), &not_herm, id).is_err());
    }

    #[test]
    fn first_row_of_identity() {
        let ch = first_row_decomposition(&ComplexMatrix::identity(3, 3), &[0.0; 3]).unwrap();
        assert_eq!(ch.probabilities, vec![1.0, 0.0, 0.0]);
        assert_eq!(ch.network_phases, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn first_row_of_beam_splitter() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = ComplexMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)]);
        let ch = first_row_decomposition(&u, &[0.0, 0.0]).unwrap();
        assert!((ch.probabilities[0] - 0.5).abs() < 1e-15);
        assert!((ch.probabilities[1] - 0.5).abs() < 1e-15);
        assert!(ch.network_phases[0].abs() < 1e-15);
        assert!((ch.network_phases[1] - PI / 2.0).abs() < 1e-15);
        assert!(first_row_decomposition(&u, &[0.0]).is_err());
    }

    #[test]
    fn haar_probabilities_normalized() {
        let u = crate::linalg::random_haar_unitary(6, 3).unwrap();
        let ch = first_row_decomposition(&u, &[0.1; 6]).unwrap();
        assert!((ch.probability_sum() - 1.0).abs() < 1e-12);
        for j in 0..6 {
            assert!((ch.relative_phases[j] - (ch.network_phases[j] - 0.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_phase_rates() {
        let net = ParametrizedNetwork::diagonal_phase(2, 0).unwrap();
        for &phi in &[0.0, 1.0, 3.1, -3.1] {
            let ch = channel_derivatives(&net, phi, &[0.0, 0.0], default_step(phi)).unwrap();
            let r = ch.rates.unwrap();
            assert!(r.d_probabilities.iter().all(|d| d.abs() < 1e-9));
            assert!((r.d_network_phases[0] - 1.0).abs() < 1e-8, "phi {phi}");
            assert_eq!(r.d_network_phases[1], 0.0);
        }
    }

    #[test]
    fn rates_reject_bad_step() {
        let net = ParametrizedNetwork::diagonal_phase(2, 0).unwrap();
        assert!(channel_derivatives(&net, 0.0, &[0.0, 0.0], 0.0).is_err());
        assert!(channel_derivatives(&net, 0.0, &[0.0, 0.0], -1e-3).is_err());
    }

    #[test]
    fn rates_sum_to_zero_and_are_step_consistent() {
        let net = ParametrizedNetwork::interpolated_random(4, 5).unwrap();
        let theta = [0.2, -0.4, 1.0, 2.0];
        let a = channel_derivatives(&net, 0.3, &theta, 1e-5).unwrap().rates.unwrap();
        let b = channel_derivatives(&net, 0.3, &theta, 1e-6).unwrap().rates.unwrap();
        assert!(a.d_probabilities.iter().sum::<f64>().abs() < 1e-8);
        assert!(b.d_probabilities.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..4 {
            assert!((a.d_probabilities[j] - b.d_probabilities[j]).abs() < 1e-6);
            assert!((a.d_network_phases[j] - b.d_network_phases[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn mach_zehnder_null_channels_have_no_phase() {
        let net = ParametrizedNetwork::mach_zehnder(3, 0).unwrap();
        let ch = channel_derivatives(&net, 0.8, &[0.0; 3], 1e-6).unwrap();
        assert_eq!(ch.probabilities[2], 0.0);
        assert_eq!(ch.network_phases[2], 0.0);
        assert_eq!(ch.rates.unwrap().d_network_phases[2], 0.0);
        assert!((ch.probabilities[0] - (0.4f64).sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn phases_are_continuous_across_branch_cut() {
        let net = ParametrizedNetwork::interpolated_random(3, 2).unwrap();
        let mut prev = first_row_decomposition(&net.evaluate(-2.0).unwrap(), &[0.0; 3]).unwrap();
        for i in 1..4000 {
            let phi = -2.0 + 1e-3 * i as f64;
            let cur = first_row_decomposition(&net.evaluate(phi).unwrap(), &[0.0; 3]).unwrap();
            for j in 0..3 {
                let jump = wrap_phase(cur.network_phases[j] - prev.network_phases[j]);
                assert!(jump.abs() < 0.1, "jump {jump} at phi {phi}");
            }
            prev = cur;
        }
    }

    #[test]
    fn custom_table_requires_exact_points() {
        let a = ComplexMatrix::identity(2, 2);
        let b = ParametrizedNetwork::diagonal_phase(2, 1).unwrap().evaluate(0.5).unwrap();
        let net = ParametrizedNetwork::custom_table(vec![(0.0, a.clone()), (0.5, b.clone())]).unwrap();
        assert_eq!(net.evaluate(0.5).unwrap(), b);
        assert!(net.evaluate(0.25).is_err());
        let mut bad = a;
        bad[(0, 0)] = c(1.1, 0.0);
        let err = ParametrizedNetwork::custom_table(vec![(0.0, bad)]).unwrap_err();
        assert!(err.to_string().contains("max |U^dagger U - I|"));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: NetworkSpec =
            serde_json::from_str(r#"{"modes": 4, "kind": "interpolated_random", "seed": 9}"#).unwrap();
        let net = spec.build().unwrap();
        assert_eq!(net, ParametrizedNetwork::interpolated_random(4, 9).unwrap());
        assert!(serde_json::from_str::<NetworkSpec>(r#"{"modes": 2, "kind": "x"}"#).is_err());
        assert!(serde_json::from_str::<NetworkSpec>(r#"{"modes": 2, "kind": "mach_zehnder_like", "bogus": 1}"#).is_err());
        let text = r#"{"modes": 1, "kind": "custom_table", "table": [{"phi": 0.0, "re": [[1.0]], "im": [[0.0]]}]}"#;
        let spec: NetworkSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.build().unwrap().modes(), 1);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
