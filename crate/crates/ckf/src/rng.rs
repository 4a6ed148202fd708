//! Seeded, platform-independent random number generation.
//!
//! All simulation randomness flows from a single 64-bit seed. The base
//! generator is SplitMix64; normal deviates come from the classic Box–Muller
//! transform evaluated through `libm`, so a given seed reproduces the same
//! stream bit-for-bit on every platform. Distinct noise roles draw from
//! sub-streams derived by fixed offsets: stream 0 drives process noise,
//! stream 1 drives measurement noise (see [`substream`]).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::matops::DenseMatrix;
use crate::{Error, Result};

/// SplitMix64 generator.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in the half-open interval `(0, 1]` (safe under `ln`).
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0))
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Standard-normal stream: Box–Muller over SplitMix64, generating deviates
/// in pairs.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_unit();
        let u2 = self.rng.next_unit();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Draw `N(0, L L')` given a (possibly rank-deficient) lower factor `L`.
    /// Always consumes exactly `L.cols()` deviates, keeping the stream
    /// position independent of the covariance's rank.
    pub fn next_shaped(&mut self, l: &DenseMatrix) -> Vec<f64> {
        let z: Vec<f64> = (0..l.cols()).map(|_| self.next_normal()).collect();
        l.matvec(&z)
    }
}

/// Derive the generator for a fixed noise role from the scenario seed.
pub fn substream(seed: u64, stream: u64) -> GaussianStream {
    GaussianStream::new(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Cholesky-like lower factor of a positive-*semi*definite matrix: columns
/// hitting a (near-)zero pivot are zeroed rather than rejected, so exactly
/// singular noise covariances (e.g. a component with no noise) are valid.
pub fn psd_factor(cov: &DenseMatrix) -> Result<DenseMatrix> {
    assert!(cov.is_square());
    let n = cov.rows();
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(cov[(i, i)].abs());
    }
    let tol = 1e-12 * max_diag.max(1e-300);
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.abs() <= tol || (d < 0.0 && d >= -tol) {
            continue; // rank-deficient direction: leave the column zero
        }
        if d < 0.0 {
            return Err(Error::NotPositiveDefinite {
                what: "noise covariance",
            });
        }
        let ljj = libm::sqrt(d);
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Random dense matrix with entries uniform in `[lo, hi)`.
pub fn random_matrix(
    rng: &mut SplitMix64,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.next_in(lo, hi))
}

/// Random symmetric positive-definite matrix `M M' + ridge·I`.
pub fn random_spd(rng: &mut SplitMix64, n: usize, ridge: f64) -> DenseMatrix {
    let m = random_matrix(rng, n, n, -1.0, 1.0);
    let mut spd = &m * &m.transpose();
    for i in 0..n {
        spd[(i, i)] += ridge;
    }
    spd.symmetrized()
}

pub fn random_vec(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for x in v.iter_mut() {
        *x = rng.next_in(lo, hi);
    }
    v
}
