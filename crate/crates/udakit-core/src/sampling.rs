//! Seeded random states, operators and unitaries.
//!
//! Everything here is deterministic given the RNG, which the callers seed
//! explicitly; reports echo the seed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dims::DimProfile;
use crate::tensor::{DensityMatrix, Ket, Operator};

fn gaussian_c64<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Random ket with Gaussian amplitudes, normalized.
pub fn random_ket<R: Rng>(profile: &DimProfile, rng: &mut R) -> Ket {
    let d = profile.total_dim();
    let mut v = DVector::from_fn(d, |_, _| gaussian_c64(rng));
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v /= Complex64::new(norm, 0.0);
    Ket::new(v, profile.clone()).expect("normalized by construction")
}

/// Random rank-`rank` density matrix (normalized Wishart).
pub fn random_density<R: Rng>(profile: &DimProfile, rank: usize, rng: &mut R) -> DensityMatrix {
    let d = profile.total_dim();
    let r = rank.clamp(1, d);
    let g = DMatrix::from_fn(d, r, |_, _| gaussian_c64(rng));
    let mut w = &g * g.adjoint();
    let tr = w.trace().re;
    w /= Complex64::new(tr, 0.0);
    DensityMatrix::new(Operator::new(w, profile.clone()).expect("square"))
        .expect("Wishart is a state")
}

/// Random general (non-Hermitian) operator with Gaussian entries.
pub fn random_operator<R: Rng>(profile: &DimProfile, rng: &mut R) -> Operator {
    let d = profile.total_dim();
    let m = DMatrix::from_fn(d, d, |_, _| gaussian_c64(rng));
    Operator::new(m, profile.clone()).expect("square")
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian_c64(rng));
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian_c64(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase.conj();
        }
    }
    q
}
