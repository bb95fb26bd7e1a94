//! Real coordinates for Hermitian operators.
//!
//! A d x d Hermitian matrix is encoded as a real vector of length d^2 in a
//! fixed orthonormal basis under the trace inner product: the d diagonal
//! matrix units first, then for each index pair (i, j) with i < j in
//! row-major order the normalized symmetric element (E_ij + E_ji)/sqrt(2)
//! followed by the antisymmetric element i(E_ij - E_ji)/sqrt(2).
//!
//! The encoding is an isometry: the Euclidean inner product of coordinate
//! vectors equals the Hilbert-Schmidt inner product of the operators, and
//! decoding always yields an exactly Hermitian matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length of the coordinate vector for side d.
pub fn coords_len(d: usize) -> usize {
    d * d
}

/// One element of the Hermitian operator basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisElement {
    /// E_ii
    Diag(usize),
    /// (E_ij + E_ji)/sqrt(2), i < j
    SymPair(usize, usize),
    /// i (E_ij - E_ji)/sqrt(2), i < j
    AntiPair(usize, usize),
}

impl BasisElement {
    /// Basis element at coordinate index alpha for side d.
    pub fn from_index(alpha: usize, d: usize) -> Self {
        debug_assert!(alpha < d * d);
        if alpha < d {
            return BasisElement::Diag(alpha);
        }
        let p = (alpha - d) / 2;
        let which = (alpha - d) % 2;
        let (i, j) = unrank_pair(p, d);
        if which == 0 {
            BasisElement::SymPair(i, j)
        } else {
            BasisElement::AntiPair(i, j)
        }
    }

    /// Sparse matrix entries (row, col, value) of this element.
    pub fn entries(&self) -> Vec<(usize, usize, Complex64)> {
        match *self {
            BasisElement::Diag(i) => vec![(i, i, Complex64::new(1.0, 0.0))],
            BasisElement::SymPair(i, j) => vec![
                (i, j, Complex64::new(1.0 / SQRT2, 0.0)),
                (j, i, Complex64::new(1.0 / SQRT2, 0.0)),
            ],
            BasisElement::AntiPair(i, j) => vec![
                (i, j, Complex64::new(0.0, 1.0 / SQRT2)),
                (j, i, Complex64::new(0.0, -1.0 / SQRT2)),
            ],
        }
    }
}

/// Row-major rank of the pair (i, j), i < j.
pub fn rank_pair(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(i < j && j < d);
    // pairs (0,1)..(0,d-1), (1,2)..  -> offset of row i is i*d - i*(i+1)/2 - i
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

fn unrank_pair(mut p: usize, d: usize) -> (usize, usize) {
    for i in 0..d {
        let row_len = d - i - 1;
        if p < row_len {
            return (i, i + 1 + p);
        }
        p -= row_len;
    }
    unreachable!("pair rank out of range")
}

/// Coordinate index of the diagonal element E_ii.
pub fn diag_index(i: usize) -> usize {
    i
}

/// Coordinate index of the symmetric pair element for (i, j), i < j.
pub fn sym_index(i: usize, j: usize, d: usize) -> usize {
    d + 2 * rank_pair(i, j, d)
}

/// Coordinate index of the antisymmetric pair element for (i, j), i < j.
pub fn anti_index(i: usize, j: usize, d: usize) -> usize {
    d + 2 * rank_pair(i, j, d) + 1
}

/// Encode a Hermitian matrix into coordinates. The strictly lower triangle is
/// not read; the caller guarantees Hermiticity.
pub fn encode(m: &DMatrix<Complex64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    let mut c = DVector::zeros(d * d);
    for i in 0..d {
        c[diag_index(i)] = m[(i, i)].re;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let v = m[(i, j)];
            c[sym_index(i, j, d)] = SQRT2 * v.re;
            c[anti_index(i, j, d)] = SQRT2 * v.im;
        }
    }
    c
}

/// Decode coordinates into an exactly Hermitian matrix.
pub fn decode(c: &[f64], d: usize) -> DMatrix<Complex64> {
    debug_assert_eq!(c.len(), d * d);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(c[diag_index(i)], 0.0);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let re = c[sym_index(i, j, d)] / SQRT2;
            let im = c[anti_index(i, j, d)] / SQRT2;
            m[(i, j)] = Complex64::new(re, im);
            m[(j, i)] = Complex64::new(re, -im);
        }
    }
    m
}

/// Trace of the operator encoded by `c` (sum of diagonal coordinates).
pub fn trace_of_coords(c: &[f64], d: usize) -> f64 {
    c[..d].iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_herm(d: usize, seed: u64) -> DMatrix<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn basis_is_orthonormal() {
        let d = 4;
        for a in 0..d * d {
            let ea = decode(
                DVector::from_fn(d * d, |i, _| if i == a { 1.0 } else { 0.0 }).as_slice(),
                d,
            );
            for b in 0..d * d {
                let eb = decode(
                    DVector::from_fn(d * d, |i, _| if i == b { 1.0 } else { 0.0 }).as_slice(),
                    d,
                );
                let ip: Complex64 = (ea.adjoint() * &eb).trace();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-14 && ip.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn index_maps_agree_with_from_index() {
        let d = 5;
        for alpha in 0..d * d {
            let e = BasisElement::from_index(alpha, d);
            let back = match e {
                BasisElement::Diag(i) => diag_index(i),
                BasisElement::SymPair(i, j) => sym_index(i, j, d),
                BasisElement::AntiPair(i, j) => anti_index(i, j, d),
            };
            assert_eq!(back, alpha);
        }
    }

    #[test]
    fn roundtrip_is_tight() {
        for d in [2usize, 3, 6] {
            let m = random_herm(d, 42 + d as u64);
            let c = encode(&m);
            let m2 = decode(c.as_slice(), d);
            let dev = (&m - &m2).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-13, "roundtrip dev {dev}");
            let c2 = encode(&m2);
            let cdev = (&c - &c2).amax();
            assert!(cdev < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn encode_is_isometric(seed in 0u64..500) {
            let d = 3;
            let a = random_herm(d, seed);
            let b = random_herm(d, seed.wrapping_add(1));
            let hs: Complex64 = (a.adjoint() * &b).trace();
            let dot = encode(&a).dot(&encode(&b));
            prop_assert!((hs.re - dot).abs() < 1e-12);
            prop_assert!(hs.im.abs() < 1e-12);
        }
    }
}
