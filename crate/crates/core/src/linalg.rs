//! Dense matrix primitives and reference oracles.
//!
//! The closed-form expressions elsewhere in the crate are checked against the
//! generic routines here: a pivoted-LU determinant, a minor-expansion cofactor
//! matrix and a Cholesky factorization used for sampling and likelihoods.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest size accepted by [`cofactor_oracle`].
pub const COFACTOR_ORACLE_MAX_DIM: usize = 10;

/// Deterministic generator for `(seed, stream)`.
///
/// Distinct streams of the same seed are independent ChaCha sequences, so
/// parallel tasks can each own one without coordinating.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Haar-distributed unitary of size `dim`, fully determined by `seed`.
pub fn random_haar_unitary(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    haar_unitary_from_rng(dim, &mut rng_stream(seed, 0))
}

/// QR of an i.i.d. complex Gaussian matrix with the phases of `R`'s diagonal
/// moved into `Q`.
pub fn haar_unitary_from_rng<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::invalid("unitary dimension must be at least 1"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        let phase = if norm > 0.0 { rjj / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// `max |(U†U - I)_ij|`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn require_square(m: &RealMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid(format!("{what}: empty matrix")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite entry")));
    }
    Ok(m.nrows())
}

/// Determinant by partially pivoted LU.
pub fn det_oracle(m: &RealMatrix) -> Result<f64> {
    require_square(m, "det_oracle")?;
    Ok(m.clone().lu().determinant())
}

/// Cofactor matrix by explicit minors: `C_st = (-1)^(s+t) det(m without row s, column t)`.
///
/// Each minor goes through the LU oracle, so this is `O(n^5)` and limited to
/// small matrices.
pub fn cofactor_oracle(m: &RealMatrix) -> Result<RealMatrix> {
    let n = require_square(m, "cofactor_oracle")?;
    if n > COFACTOR_ORACLE_MAX_DIM {
        return Err(Error::invalid(format!(
            "cofactor_oracle: size {n} exceeds {COFACTOR_ORACLE_MAX_DIM}"
        )));
    }
    if n == 1 {
        return Ok(RealMatrix::from_element(1, 1, 1.0));
    }
    let mut out = RealMatrix::zeros(n, n);
    for s in 0..n {
        for t in 0..n {
            let minor = m.clone().remove_row(s).remove_column(t);
            let sign = if (s + t) % 2 == 0 { 1.0 } else { -1.0 };
            out[(s, t)] = sign * minor.lu().determinant();
        }
    }
    Ok(out)
}

/// Number of singular values above `RANK_TOLERANCE` times the largest.
pub fn numerical_rank(m: &RealMatrix) -> usize {
    let sv = m.clone().singular_values();
    let largest = sv.iter().cloned().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

/// `Z = diag(d) + W` with `W` of small rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankDecomposition {
    pub diag: DVector<f64>,
    pub perturbation: RealMatrix,
    pub declared_rank: usize,
}

impl LowRankDecomposition {
    pub fn new(diag: DVector<f64>, perturbation: RealMatrix, declared_rank: usize) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("low-rank decomposition: empty diagonal"));
        }
        if perturbation.nrows() != n || perturbation.ncols() != n {
            return Err(Error::invalid(format!(
                "low-rank decomposition: perturbation is {}x{}, diagonal has length {n}",
                perturbation.nrows(),
                perturbation.ncols()
            )));
        }
        if declared_rank > 2 {
            return Err(Error::invalid("low-rank decomposition: declared rank must be at most 2"));
        }
        Ok(Self { diag, perturbation, declared_rank })
    }

    /// `I/2 + W` split for a covariance matrix.
    pub fn from_vacuum_offset(cov: &RealMatrix) -> Result<Self> {
        let n = require_square(cov, "from_vacuum_offset")?;
        let w = cov - RealMatrix::identity(n, n) * 0.5;
        Self::new(DVector::from_element(n, 0.5), w, 2.min(n))
    }

    pub fn dense(&self) -> RealMatrix {
        RealMatrix::from_diagonal(&self.diag) + &self.perturbation
    }
}

/// Determinant of `D + W` by replacing at most `declared_rank` columns of `D`
/// with the matching columns of `W`.
///
/// Terms with three or more replaced columns are principal minors of `W` of
/// size above its rank and vanish. Cost is `O(L^2)`.
pub fn lowrank_determinant(z: &LowRankDecomposition) -> f64 {
    let d = z.diag.as_slice();
    let w = &z.perturbation;
    let n = d.len();

    let mut total: f64 = d.iter().product();
    if z.declared_rank == 0 {
        return total;
    }

    // prefix[j] = product of d[k] over k < j with k != i; suffix likewise from the right.
    let mut prefix = vec![1.0; n + 1];
    let mut suffix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[0] = 1.0;
        for k in 0..n {
            prefix[k + 1] = prefix[k] * if k == i { 1.0 } else { d[k] };
        }
        suffix[n] = 1.0;
        for k in (0..n).rev() {
            suffix[k] = suffix[k + 1] * if k == i { 1.0 } else { d[k] };
        }
        // product over k != i
        total += w[(i, i)] * prefix[n];
        if z.declared_rank >= 2 {
            for j in (i + 1)..n {
                let others = prefix[j] * suffix[j + 1];
                let minor = w[(i, i)] * w[(j, j)] - w[(i, j)] * w[(j, i)];
                total += minor * others;
            }
        }
    }
    total
}

/// Lower-triangular Cholesky factorization with the failing pivot reported.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: RealMatrix,
}

impl Cholesky {
    pub fn new(m: &RealMatrix) -> Result<Self> {
        let n = require_square(m, "cholesky")?;
        let scale = m.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "cholesky: matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut l = RealMatrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = m[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > 0.0) {
                return Err(Error::SingularMatrix { index: j, value: pivot });
            }
            let diag = pivot.sqrt();
            l[(j, j)] = diag;
            for i in (j + 1)..n {
                let mut acc = m[(i, j)];
                for k in 0..j {
                    acc -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = acc / diag;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &RealMatrix {
        &self.lower
    }

    pub fn into_lower(self) -> RealMatrix {
        self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    fn forward(&self, b: &mut [f64]) {
        let l = &self.lower;
        for i in 0..b.len() {
            let mut acc = b[i];
            for k in 0..i {
                acc -= l[(i, k)] * b[k];
            }
            b[i] = acc / l[(i, i)];
        }
    }

    /// Solves `L^T x = y` in place.
    fn backward(&self, b: &mut [f64]) {
        let l = &self.lower;
        for i in (0..b.len()).rev() {
            let mut acc = b[i];
            for k in (i + 1)..b.len() {
                acc -= l[(k, i)] * b[k];
            }
            b[i] = acc / l[(i, i)];
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.forward(x.as_mut_slice());
        self.backward(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &RealMatrix) -> RealMatrix {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let mut v: Vec<f64> = col.iter().cloned().collect();
            self.forward(&mut v);
            self.backward(&mut v);
            col.copy_from_slice(&v);
        }
        out
    }

    /// `|L^{-1} v|^2 = v^T m^{-1} v`.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let mut y = v.to_vec();
        self.forward(&mut y);
        y.iter().map(|x| x * x).sum()
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_factor(m: &RealMatrix) -> Result<RealMatrix> {
    Cholesky::new(m).map(Cholesky::into_lower)
}
