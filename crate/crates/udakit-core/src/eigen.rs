//! Dense Hermitian eigendecomposition.
//!
//! Classic two-stage scheme: unitary Householder reduction to a real
//! symmetric tridiagonal matrix (with a phase scaling that makes the
//! subdiagonal real), then implicit-shift QL iteration accumulating the
//! rotations into the eigenvector matrix. Eigenvalues come back ascending.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian
/// matrix. Only the Hermitian part of the input is read.
pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    if n == 1 {
        return (
            DVector::from_element(1, a[(0, 0)].re),
            DMatrix::identity(1, 1),
        );
    }

    // work on the Hermitian part
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * Complex64::new(0.5, 0.0);
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }

    let mut q = DMatrix::<Complex64>::identity(n, n);
    let mut diag = vec![0.0f64; n];
    let mut sub = vec![Complex64::new(0.0, 0.0); n - 1];

    // Householder tridiagonalization, accumulating Q. Columns are scaled
    // before taking norms so squared entries can neither underflow nor
    // overflow; the reflector is homogeneous in v, only the subdiagonal
    // value needs the scale back.
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n - 1 {
        let mut scale = 0.0f64;
        for i in (k + 1)..n {
            scale += h[(i, k)].re.abs() + h[(i, k)].im.abs();
        }
        if scale == 0.0 {
            sub[k] = Complex64::new(0.0, 0.0);
            continue;
        }
        let mut norm_sq = 0.0f64;
        for i in (k + 1)..n {
            v[i] = h[(i, k)] / scale;
            norm_sq += v[i].norm_sqr();
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            sub[k] = Complex64::new(0.0, 0.0);
            continue;
        }
        let x0 = v[k + 1];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        v[k + 1] -= alpha;
        let vv: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        if vv == 0.0 {
            sub[k] = alpha * scale;
            continue;
        }
        let beta = 2.0 / vv;

        // p = beta * H v on the trailing block
        for i in (k + 1)..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (k + 1)..n {
                acc += h[(i, j)] * v[j];
            }
            p[i] = acc * beta;
        }
        // K = beta/2 * v^dag p
        let mut vp = Complex64::new(0.0, 0.0);
        for i in (k + 1)..n {
            vp += v[i].conj() * p[i];
        }
        let kc = vp * (beta / 2.0);
        // w = p - K v;  H' = H - w v^dag - v w^dag
        for i in (k + 1)..n {
            p[i] -= kc * v[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let upd = p[i] * v[j].conj() + v[i] * p[j].conj();
                h[(i, j)] -= upd;
            }
        }
        sub[k] = alpha * scale;

        // accumulate Q <- Q * H_k (H_k acts on rows k+1..)
        for r in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in (k + 1)..n {
                acc += q[(r, i)] * v[i];
            }
            acc *= beta;
            for i in (k + 1)..n {
                let sub_v = acc * v[i].conj();
                q[(r, i)] -= sub_v;
            }
        }
    }
    for i in 0..n {
        diag[i] = h[(i, i)].re;
    }

    // phase-scale columns so the subdiagonal becomes real nonnegative
    let mut e = vec![0.0f64; n - 1];
    let mut phi = Complex64::new(1.0, 0.0);
    for k in 0..n - 1 {
        let mag = sub[k].norm();
        e[k] = mag;
        let phase = if mag > 0.0 {
            sub[k] / mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        // column k already carries phi; column k+1 gets phi * phase
        phi *= phase;
        for r in 0..n {
            q[(r, k + 1)] *= phi;
        }
    }

    tql_implicit(&mut diag, &mut e, &mut q);

    // sort ascending, carrying the columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&i| diag[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (out, &i) in order.iter().enumerate() {
        vectors.set_column(out, &q.column(i));
    }
    (values, vectors)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix (diag d, subdiag
/// e), applying every rotation to the columns of `q`.
fn tql_implicit(d: &mut [f64], e: &mut [f64], q: &mut DMatrix<Complex64>) {
    let n = d.len();
    if n <= 1 {
        return;
    }
    let mut e_ext = vec![0.0f64; n];
    e_ext[..n - 1].copy_from_slice(e);

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small subdiagonal element to split at
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e_ext[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                // leave the current value; deflation has stalled beyond
                // machine precision
                break;
            }
            // Wilkinson-style shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e_ext[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e_ext[l] / (g + sign_r);
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e_ext[i];
                let b = c * e_ext[i];
                r = f.hypot(g);
                e_ext[i + 1] = r;
                if r == 0.0 {
                    // recover from an underflowed rotation and retry
                    d[i + 1] -= p;
                    e_ext[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // rotate eigenvector columns i and i+1
                for row in 0..q.nrows() {
                    f = q[(row, i + 1)].re;
                    let fi = q[(row, i + 1)].im;
                    let vr = q[(row, i)].re;
                    let vi = q[(row, i)].im;
                    q[(row, i + 1)] = Complex64::new(s * vr + c * f, s * vi + c * fi);
                    q[(row, i)] = Complex64::new(c * vr - s * f, c * vi - s * fi);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e_ext[l] = g;
            e_ext[m] = 0.0;
        }
    }
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &DMatrix<Complex64>) -> DVector<f64> {
    // the accumulation cost is dominated by the two-sided updates; reuse the
    // full routine
    hermitian_eigen(a).0
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &DMatrix<Complex64>) -> f64 {
    hermitian_eigen(a).0[0]
}

/// Eigendecomposition of a real symmetric matrix through the Hermitian path.
pub fn symmetric_eigen_real(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let c = DMatrix::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], 0.0));
    let (vals, vecs) = hermitian_eigen(&c);
    // eigenvectors of a real symmetric matrix can be taken real up to a
    // column phase; rotate each column onto the real axis
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = vecs.column(j);
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for i in 0..n {
            let m = col[i].norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        let z = col[best];
        let phase = if z.norm() > 0.0 {
            z.conj() / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            out[(i, j)] = (col[i] * phase).re;
        }
        // renormalize (imaginary residue is at machine scale)
        let norm = out.column(j).norm();
        if norm > 0.0 {
            for i in 0..n {
                out[(i, j)] /= norm;
            }
        }
    }
    (vals, out)
}
