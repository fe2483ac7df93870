//! Reference computations shared by the integration tests. None of these
//! call the closed forms under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn lu_det(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        if m[(pivot, col)] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap_rows(pivot, col);
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for row in (col + 1)..n {
            let f = m[(row, col)] / p;
            if f != 0.0 {
                for k in col..n {
                    m[(row, k)] -= f * m[(col, k)];
                }
            }
        }
    }
    det
}

/// Cofactor matrix `(-1)^{i+j} det(minor_ij)`.
pub fn minors_cofactor(a: &Mat) -> Mat {
    let n = a.nrows();
    if n == 1 {
        return Mat::from_element(1, 1, 1.0);
    }
    Mat::from_fn(n, n, |i, j| {
        let minor = a.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * lu_det(&minor)
    })
}

/// Homodyne statistics straight from `b_j = sum_k U_kj a_k`: the squeezed
/// coherent probe sits in mode 0 (`Var X = e^{2r}/2`, `Var P = e^{-2r}/2`,
/// `<X> = d`), all other inputs are vacuum, and detector `j` reads
/// `Re(e^{-i theta_j} b_j) sqrt(2)`.
pub fn heisenberg_stats(r: f64, d: f64, u: &CMat, theta: &[f64]) -> (DVector<f64>, Mat) {
    let m = u.nrows();
    // x = A z with z = (X_0..X_{M-1}, P_0..P_{M-1}).
    let a = Mat::from_fn(m, 2 * m, |j, c| {
        let k = c % m;
        let w = u[(k, j)] * Complex64::from_polar(1.0, -theta[j]);
        if c < m {
            w.re
        } else {
            -w.im
        }
    });
    let mut var = DVector::from_element(2 * m, 0.5);
    var[0] = 0.5 * (2.0 * r).exp();
    var[m] = 0.5 * (-2.0 * r).exp();
    let mut z_mean = DVector::zeros(2 * m);
    z_mean[0] = d;
    let mean = &a * z_mean;
    let cov = &a * Mat::from_diagonal(&var) * a.transpose();
    (mean, cov)
}

/// Five-point central difference.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Normal density through nalgebra's Cholesky and an explicit inverse.
pub struct Normal {
    mu: DVector<f64>,
    inv: Mat,
    log_norm: f64,
}

impl Normal {
    pub fn new(mu: DVector<f64>, cov: &Mat) -> Self {
        let m = mu.len() as f64;
        let chol = cov.clone().cholesky().expect("covariance must be positive definite");
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Self {
            mu,
            inv: chol.inverse(),
            log_norm: -0.5 * (logdet + m * (2.0 * std::f64::consts::PI).ln()),
        }
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mu;
        self.log_norm - 0.5 * diff.dot(&(&self.inv * &diff))
    }
}

/// Monte-Carlo `E[score^2]` with its standard error, sampling from
/// `stats(phi)` and differentiating `ln p` across `phi +- h`.
pub fn mc_score_variance(
    stats: impl Fn(f64) -> (DVector<f64>, Mat),
    phi: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let h = 1e-5;
    let (mu, cov) = stats(phi);
    let (mu_p, cov_p) = stats(phi + h);
    let (mu_m, cov_m) = stats(phi - h);
    let up = Normal::new(mu_p, &cov_p);
    let down = Normal::new(mu_m, &cov_m);
    let l = cov.cholesky().unwrap().l();
    let m = mu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &mu + &l * z;
        let s = (up.ln_pdf(&x) - down.ln_pdf(&x)) / (2.0 * h);
        sum += s * s;
        sum_sq += s.powi(4);
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `8 dg^2 (N_D N_S / (16k^2 + 1) + N_S^2 64k^2 / (16k^2 + 1)^2)`.
pub fn asymptotic_reference(k_avg: f64, dg_avg: f64, ns: f64, nd: f64) -> f64 {
    let q = 16.0 * k_avg * k_avg + 1.0;
    8.0 * dg_avg * dg_avg * (nd * ns / q + ns * ns * 64.0 * k_avg * k_avg / (q * q))
}

/// `(P_j, arg U_0j)` of the first row.
pub fn first_row(u: &CMat) -> (Vec<f64>, Vec<f64>) {
    let m = u.ncols();
    ((0..m).map(|j| u[(0, j)].norm_sqr()).collect(), (0..m).map(|j| u[(0, j)].arg()).collect())
}

/// Phase difference folded into `(-pi, pi]`.
pub fn fold(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let y = x - t * (x / t).round();
    if y <= -std::f64::consts::PI {
        y + t
    } else {
        y
    }
}
