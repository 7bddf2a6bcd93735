//! Seeded random problem generators.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`;
//! Gaussian samples use the ziggurat transform of `rand_distr::StandardNormal`.
//! Matrices are filled row by row, so a given `(dims, constants, seed)` always
//! produces the same bits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::families::{L2RegSaddle, QuadraticMinimax};
use super::problem::Constants;
use crate::error::{Error, Result};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample(StandardNormal)))
}

/// Orthogonal factor of a Gaussian matrix, with columns flipped so that the
/// triangular factor has a nonnegative diagonal.
fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric matrix with smallest eigenvalue `lo`, largest `hi`, and the rest
/// uniform on `[lo, hi]`.
fn spectrum_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, dim);
    let mut eig = DVector::zeros(dim);
    eig[0] = lo;
    for e in eig.iter_mut().take(dim.saturating_sub(1)).skip(1) {
        *e = lo + (hi - lo) * rng.random::<f64>();
    }
    eig[dim - 1] = hi;
    let scaled = &q * DMatrix::from_diagonal(&eig);
    let m = scaled * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn check_block(name: &str, dim: usize, mu: f64, l: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid(format!(
            "dimension of {name} must be at least 1"
        )));
    }
    if dim == 1 && mu != l {
        return Err(Error::invalid(format!(
            "a 1x1 {name} cannot have distinct extreme eigenvalues (mu = {mu}, L = {l})"
        )));
    }
    Ok(())
}

/// Random quadratic minimax instance: `R` has spectrum in `[mu_f/2, l_f/2]`
/// with both ends attained, `S` likewise, and `A` is `m x n` standard
/// Gaussian. Draw order is `R`, `S`, then `A`.
pub fn generate_quadratic(
    n: usize,
    m: usize,
    mu_f: f64,
    l_f: f64,
    mu_g: f64,
    l_g: f64,
    seed: u64,
) -> Result<QuadraticMinimax> {
    let constants = Constants::new(mu_f, l_f, mu_g, l_g)?;
    check_block("R", n, mu_f, l_f)?;
    check_block("S", m, mu_g, l_g)?;
    let mut rng = seeded_rng(seed);
    let r_mat = spectrum_matrix(&mut rng, n, mu_f / 2.0, l_f / 2.0);
    let s_mat = spectrum_matrix(&mut rng, m, mu_g / 2.0, l_g / 2.0);
    let coupling = gaussian_matrix(&mut rng, m, n);
    QuadraticMinimax::with_constants(r_mat, s_mat, coupling, constants)
}

/// Random l2-regularized saddle: `K` (`m x n`) then `b`, both standard
/// Gaussian.
pub fn generate_l2_saddle(n: usize, m: usize, mu: f64, seed: u64) -> Result<L2RegSaddle> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("dimensions must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let k_mat = gaussian_matrix(&mut rng, m, n);
    let b_vec = gaussian_vector(&mut rng, m);
    L2RegSaddle::new(k_mat, b_vec, mu)
}
