//! `hhmetro` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration error.

mod config;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, OutputFormat, ProbeConfig, Resolved, ScheduleConfig};
pub use report::{write_atomic, Cell, Report};

use crate::estimator::crb_experiment;
use crate::fisher::{
    asymptotic_fisher, fisher_information, loglog_fit, mc_fisher_oracle, PhasePolicy, PhaseSchedule,
};
use crate::gaussian::{
    cofactor_matrix, covariance_determinant, finite_difference_derivatives, model_with_derivatives,
    output_covariance, output_mean, phase_space_oracle,
};
use crate::linalg::{cofactor_oracle, det_oracle, COFACTOR_ORACLE_MAX_DIM};
use crate::network::{channel_derivatives, default_step, first_row_decomposition};

#[derive(Debug, Parser)]
#[command(name = "hhmetro", version, about = "Multi-homodyne phase estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the closed-form statistics against independent oracles.
    Validate(Common),
    /// Exact, asymptotic and Monte-Carlo Fisher information per phase.
    Fisher(Common),
    /// Fisher information against photon number, with fitted slope.
    Scaling(Common),
    /// Maximum-likelihood trials and the Cramér-Rao ratio.
    Mle(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config output path; stdout if neither is set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Result of a subcommand: the rendered report and whether all checks passed.
pub struct Outcome {
    pub report: Report,
    pub ok: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("HH_THREADS must be a nonnegative integer, got {raw:?}")))?;
    if n > 0 {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one parsed invocation and writes its output. `Ok(false)` means a
/// validation check failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let common = match &cli.command {
        Command::Validate(c) | Command::Fisher(c) | Command::Scaling(c) | Command::Mle(c) => c,
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut config = config::parse_config(&text).map_err(CliError::Config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(format) = common.format {
        config.format = format;
    }
    let output = common.output.clone().or_else(|| config.output.clone());
    let resolved = config.resolve().map_err(CliError::Config)?;

    let outcome = match &cli.command {
        Command::Validate(_) => cmd_validate(&config, &resolved)?,
        Command::Fisher(_) => cmd_fisher(&config, &resolved)?,
        Command::Scaling(_) => cmd_scaling(&config, &resolved)?,
        Command::Mle(_) => cmd_mle(&config, &resolved)?,
    };
    let rendered = outcome.report.render(&config, config.format).map_err(CliError::Runtime)?;
    match output {
        Some(path) => write_atomic(&path, &rendered)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(outcome.ok)
}

fn single_probe(res: &Resolved) -> Result<crate::gaussian::ProbeSpec, CliError> {
    res.probe(res.single_photon_number()).map_err(CliError::Config)
}

fn phi_points(config: &ExperimentConfig) -> Vec<f64> {
    config.phi.clone().unwrap_or_else(|| vec![config.phi_true])
}

fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Oracle identities on every configured `(N, phi)` pair.
pub fn cmd_validate(config: &ExperimentConfig, res: &Resolved) -> Result<Outcome, CliError> {
    let net = &res.network;
    let m = net.modes();
    let mut det_err: f64 = 0.0;
    let mut cof_err: f64 = 0.0;
    let mut phase_err: f64 = 0.0;
    let mut jacobi_err: f64 = 0.0;
    let mut fd_err: f64 = 0.0;
    for &n in &res.photons {
        let probe = res.probe(n).map_err(CliError::Config)?;
        let theta = res.policy.oscillator_phases(net, config.phi_true, probe.squeezed_photons())?;
        for phi in phi_points(config) {
            let u = net.evaluate(phi)?;
            let ch = first_row_decomposition(&u, &theta)?;
            let cov = output_covariance(&probe, &ch);
            let det = covariance_determinant(&probe, &ch);
            det_err = det_err.max(relative_error(det, det_oracle(&cov)?));
            if m <= COFACTOR_ORACLE_MAX_DIM {
                let closed = cofactor_matrix(&probe, &ch);
                let oracle = cofactor_oracle(&cov)?;
                let scale = oracle.amax().max(f64::MIN_POSITIVE);
                cof_err = cof_err.max((closed - oracle).amax() / scale);
            }
            let (mu_ps, cov_ps) = phase_space_oracle(&probe, &u, &theta)?;
            let scale = cov.amax().max(1.0);
            let mean_gap = (output_mean(&probe, &ch) - mu_ps).amax();
            phase_err = phase_err.max(mean_gap.max((&cov - cov_ps).amax()) / scale);

            let step = default_step(phi);
            let model = model_with_derivatives(net, &probe, &theta, phi, step)?;
            jacobi_err = jacobi_err.max(relative_error(model.d_det, model.jacobi_trace()));
            let fd = finite_difference_derivatives(net, &probe, &theta, phi, step)?;
            fd_err = fd_err.max(relative_error(model.d_det, fd.d_det));
        }
    }
    let checks: Vec<(&str, f64, f64)> = vec![
        ("determinant_vs_lu", det_err, 1e-10),
        ("cofactor_vs_minors", cof_err, 1e-9),
        ("closed_form_vs_phase_space", phase_err, 1e-12),
        ("jacobi_trace", jacobi_err, 1e-8),
        ("determinant_derivative_vs_fd", fd_err, 1e-8),
    ];
    let mut report = Report::new("validate", vec!["identity", "max_error", "tolerance", "pass"]);
    let mut ok = true;
    for (name, err, tol) in checks {
        if name == "cofactor_vs_minors" && m > COFACTOR_ORACLE_MAX_DIM {
            continue;
        }
        let pass = err <= tol;
        ok &= pass;
        report.rows.push(vec![
            Cell::Text(name.into()),
            Cell::Num(err),
            Cell::Num(tol),
            Cell::Int(pass as u64),
        ]);
    }
    report.summary.push(("all_pass", Cell::Int(ok as u64)));
    Ok(Outcome { report, ok })
}

pub fn cmd_fisher(config: &ExperimentConfig, res: &Resolved) -> Result<Outcome, CliError> {
    let net = &res.network;
    let probe = single_probe(res)?;
    let theta = res.policy.oscillator_phases(net, config.phi_true, probe.squeezed_photons())?;
    let mut report = Report::new(
        "fisher",
        vec!["phi", "term1", "term2", "term3", "total", "asymptotic", "mc_estimate", "mc_stderr", "mc_agree"],
    );
    for (i, phi) in phi_points(config).into_iter().enumerate() {
        let f = fisher_information(net, &probe, &theta, phi)?;
        let ch = channel_derivatives(net, phi, &theta, default_step(phi))?;
        let sched = PhaseSchedule::effective(&ch, probe.squeezed_photons())?;
        let asym = asymptotic_fisher(&ch, &sched, probe.squeezed_photons(), probe.displaced_photons())?;
        let (mc, se, agree) = if config.mc_samples == 0 {
            (f64::NAN, f64::NAN, Cell::Text(String::new()))
        } else {
            let est = mc_fisher_oracle(
                net,
                &probe,
                &theta,
                phi,
                config.mc_samples,
                config.seed.wrapping_add(i as u64),
                default_step(phi),
            )?;
            let agree = (f.total - est.estimate).abs() <= 3.0 * est.std_error;
            (est.estimate, est.std_error, Cell::Int(agree as u64))
        };
        report.rows.push(vec![
            Cell::Num(phi),
            Cell::Num(f.displacement_term),
            Cell::Num(f.determinant_term),
            Cell::Num(f.trace_term),
            Cell::Num(f.total),
            Cell::Num(asym),
            Cell::Num(mc),
            Cell::Num(se),
            agree,
        ]);
    }
    Ok(Outcome { report, ok: true })
}

pub fn cmd_scaling(config: &ExperimentConfig, res: &Resolved) -> Result<Outcome, CliError> {
    let net = &res.network;
    let phi = config.phi_true;
    if res.photons.len() < 2 {
        return Err(CliError::Config("config field `probe.n_list`: scaling needs at least two values".into()));
    }
    let mut report = Report::new("scaling", vec!["N", "fisher_total", "asymptotic", "det_times_NS"]);
    let mut totals = Vec::with_capacity(res.photons.len());
    let mut det_limit = f64::NAN;
    for &n in &res.photons {
        let probe = res.probe(n).map_err(CliError::Config)?;
        let ns = probe.squeezed_photons();
        let theta = res.policy.oscillator_phases(net, phi, ns)?;
        let f = fisher_information(net, &probe, &theta, phi)?.total;
        let ch = channel_derivatives(net, phi, &theta, default_step(phi))?;
        let sched = PhaseSchedule::effective(&ch, ns)?;
        let asym = asymptotic_fisher(&ch, &sched, ns, probe.displaced_photons())?;
        let det_ns = covariance_determinant(&probe, &ch) * ns;
        if let PhasePolicy::Schedule(s) = &res.policy {
            if s.exponent == 1.0 {
                let (k, _) = crate::fisher::weighted_averages(&ch, s)?;
                det_limit = (k * k + 1.0 / 16.0) * 0.5f64.powi(net.modes() as i32 - 2);
            }
        }
        totals.push(f);
        report.rows.push(vec![Cell::Num(n), Cell::Num(f), Cell::Num(asym), Cell::Num(det_ns)]);
    }
    let (slope, _) = loglog_fit(&res.photons, &totals)?;
    report.summary.push(("slope", Cell::Num(slope)));
    report.summary.push(("det_times_NS_limit", Cell::Num(det_limit)));
    Ok(Outcome { report, ok: true })
}

pub fn cmd_mle(config: &ExperimentConfig, res: &Resolved) -> Result<Outcome, CliError> {
    let net = &res.network;
    let probe = single_probe(res)?;
    let theta = res.policy.oscillator_phases(net, config.phi_true, probe.squeezed_photons())?;
    if config.trials < 100 {
        return Err(CliError::Config("config field `trials`: must be at least 100".into()));
    }
    let r = crb_experiment(
        net,
        &probe,
        &theta,
        config.phi_true,
        config.nu,
        config.trials,
        config.seed,
        &res.settings,
    )?;
    let mut report = Report::new("mle", vec!["trial", "phi_hat", "score_residual", "failed"]);
    for t in &r.trials {
        report.rows.push(vec![
            Cell::Int(t.trial as u64),
            Cell::Num(t.estimate),
            Cell::Num(t.score_residual),
            Cell::Int(t.failed as u64),
        ]);
    }
    report.summary.push(("variance", Cell::Num(r.variance)));
    report.summary.push(("crb", Cell::Num(r.crb)));
    report.summary.push(("ratio", Cell::Num(r.ratio)));
    report.summary.push(("failures", Cell::Int(r.failures as u64)));
    Ok(Outcome { report, ok: true })
}
