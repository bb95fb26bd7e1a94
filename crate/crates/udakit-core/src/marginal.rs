//! The k-marginal map as a real-linear operator on Hermitian space and its
//! null space: the correlation space of traceless Hermitian operators whose
//! every k-party reduction vanishes.
//!
//! The constraint matrix stacks the trace functional with the Hermitian
//! coordinates of all C(n, k) k-party reductions. Its null space is computed
//! by SVD with a relative singular-value threshold; the closed-form dimension
//! count [`kernel_dim_formula`] cross-checks the numerical rank.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dims::{combinations, DimProfile, SubsetSpec};
use crate::hermitian;
use crate::products::{Factor, FactorLayout};
use crate::tensor::{partial_trace, Operator};
use crate::{Error, Result};

/// Relative singular-value threshold for the numerical null space.
pub const SVD_REL_THRESHOLD: f64 = 1e-10;

/// Max entry magnitude allowed in a required-zero reduction.
pub const REDUCTION_TOL: f64 = 1e-10;

/// Traceless Hermitian operator whose every k-party reduction vanishes.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    op: Operator,
    k: usize,
}

impl CorrelationMatrix {
    /// Validate and wrap: Hermitian, trace within 1e-12 of zero, every
    /// k-party reduction entry below [`REDUCTION_TOL`].
    pub fn new(op: Operator, k: usize) -> Result<Self> {
        let n = op.profile().parties();
        if k < 1 || k >= n {
            return Err(Error::KOutOfRange { k, n });
        }
        let herm = op.hermiticity_defect();
        if herm > 1e-12 {
            return Err(Error::NotHermitian { max_dev: herm });
        }
        let tr = op.trace();
        if tr.norm() > 1e-12 {
            return Err(Error::BadParameter(format!(
                "correlation matrix trace {:.3e} is not zero",
                tr.norm()
            )));
        }
        for subset in combinations(n, k) {
            let red = partial_trace(&op, &subset)?;
            let dev = red.max_abs_entry();
            if dev > REDUCTION_TOL {
                return Err(Error::BadParameter(format!(
                    "reduction on {:?} has entry {:.3e}",
                    subset.indices(),
                    dev
                )));
            }
        }
        Ok(Self { op, k })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn profile(&self) -> &DimProfile {
        self.op.profile()
    }

    pub fn coords(&self) -> DVector<f64> {
        hermitian::encode(self.op.matrix())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.op.frobenius_norm()
    }
}

/// Orthonormal basis of a correlation space, plus the coordinate matrix used
/// for projections.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    dims: DimProfile,
    k: usize,
    basis: Vec<CorrelationMatrix>,
    /// D^2 x K matrix whose columns are the basis coordinates.
    coords: DMatrix<f64>,
}

impl KernelBasis {
    pub fn dims(&self) -> &DimProfile {
        &self.dims
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn element(&self, i: usize) -> &CorrelationMatrix {
        &self.basis[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CorrelationMatrix> {
        self.basis.iter()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Coefficients of the orthogonal projection of `v` onto the span.
    pub fn project_coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        self.coords.transpose() * v
    }

    /// Norm of the part of `op` outside the span.
    pub fn span_residual(&self, op: &Operator) -> f64 {
        let v = hermitian::encode(op.matrix());
        let coeff = self.project_coefficients(&v);
        (&v - &self.coords * coeff).norm()
    }

    /// Max deviation of the Gram matrix from the identity.
    pub fn gram_defect(&self) -> f64 {
        let g = self.coords.transpose() * &self.coords;
        let mut dev = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((g[(i, j)] - expect).abs());
            }
        }
        dev
    }
}

/// Matrix of the real-linear map sending Hermitian coordinates to the stacked
/// coordinates of all C(n, k) k-party reductions plus the trace.
///
/// Row 0 is the trace; then one block of (prod_{i in S} d_i)^2 rows per
/// subset S in lexicographic order.
pub fn marginal_constraint_matrix(dims: &DimProfile, k: usize) -> Result<DMatrix<f64>> {
    let n = dims.parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let subsets = combinations(n, k);
    let blocks: Vec<ReductionBlock> = subsets
        .iter()
        .map(|s| ReductionBlock::for_subset(dims, s))
        .collect();
    Ok(assemble_constraint_matrix(dims, &blocks))
}

/// One group of constraint rows: the Hermitian coordinates of a reduction
/// defined by an index splitter flat -> (kept, traced) with a diagonal match
/// on the traced part.
struct ReductionBlock {
    kept_dim: usize,
    /// kept flat index and traced flat index of every big flat index
    split: Vec<(usize, usize)>,
}

impl ReductionBlock {
    fn for_subset(dims: &DimProfile, subset: &SubsetSpec) -> Self {
        let keep0 = subset.zero_based();
        let n = dims.parties();
        let traced0: Vec<usize> = (0..n).filter(|i| !keep0.contains(i)).collect();
        let kept_profile = dims.restrict(subset);
        let kept_dim = kept_profile.total_dim();
        let d = dims.total_dim();
        let mut split = Vec::with_capacity(d);
        for flat in 0..d {
            let digits = dims.decode(flat);
            let kept: Vec<usize> = keep0.iter().map(|&i| digits[i]).collect();
            let mut traced = 0usize;
            for &i in &traced0 {
                traced = traced * dims.dims()[i] + digits[i];
            }
            split.push((kept_profile.encode(&kept), traced));
        }
        Self { kept_dim, split }
    }

    fn for_group(layout: &FactorLayout, keep: Factor) -> Self {
        let profile = layout.composite_profile().expect("layout profile");
        let keep_first = matches!(keep, Factor::First);
        let kept_dims: Vec<usize> = layout.factor_dims(keep_first);
        let kept_profile = DimProfile::new_unchecked(kept_dims);
        let kept_dim = kept_profile.total_dim();
        let d = profile.total_dim();
        let mut split = Vec::with_capacity(d);
        for flat in 0..d {
            let digits = profile.decode(flat);
            let mut kept = 0usize;
            let mut traced = 0usize;
            for (j, &(da, db)) in layout.pairs().iter().enumerate() {
                let a = digits[j] / db;
                let b = digits[j] % db;
                let (kd, td) = if keep_first { (a, b) } else { (b, a) };
                let (kdim, tdim) = if keep_first { (da, db) } else { (db, da) };
                if kdim > 1 {
                    kept = kept * kdim + kd;
                }
                if tdim > 1 {
                    traced = traced * tdim + td;
                }
            }
            split.push((kept, traced));
        }
        Self { kept_dim, split }
    }

    fn rows(&self) -> usize {
        self.kept_dim * self.kept_dim
    }
}

fn assemble_constraint_matrix(dims: &DimProfile, blocks: &[ReductionBlock]) -> DMatrix<f64> {
    let d = dims.total_dim();
    let ncols = hermitian::coords_len(d);
    let nrows = 1 + blocks.iter().map(ReductionBlock::rows).sum::<usize>();
    let mut a = DMatrix::zeros(nrows, ncols);

    // trace row: sum of diagonal coordinates
    for i in 0..d {
        a[(0, hermitian::diag_index(i))] = 1.0;
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for alpha in 0..ncols {
        let element = hermitian::BasisElement::from_index(alpha, d);
        for (p, q, v) in element.entries() {
            let mut row_base = 1usize;
            for block in blocks {
                let (pk, pt) = block.split[p];
                let (qk, qt) = block.split[q];
                if pt == qt {
                    // reduced entry (pk, qk) receives v; encode into the
                    // reduced Hermitian coordinates reading only pk <= qk
                    let dk = block.kept_dim;
                    if pk == qk {
                        a[(row_base + hermitian::diag_index(pk), alpha)] += v.re;
                    } else if pk < qk {
                        a[(row_base + hermitian::sym_index(pk, qk, dk), alpha)] += sqrt2 * v.re;
                        a[(row_base + hermitian::anti_index(pk, qk, dk), alpha)] += sqrt2 * v.im;
                    }
                }
                row_base += block.rows();
            }
        }
    }
    a
}

/// Closed-form dimension of the correlation space: the number of product
/// basis words of local traceless directions whose non-identity support
/// exceeds k parties, sum over |T| >= k+1 of prod_{i in T} (d_i^2 - 1).
pub fn kernel_dim_formula(dims: &DimProfile, k: usize) -> Result<usize> {
    let n = dims.parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    // elementary symmetric polynomials of e_i = d_i^2 - 1
    let mut esp = vec![0u128; n + 1];
    esp[0] = 1;
    for &d in dims.dims() {
        let e = (d * d - 1) as u128;
        for j in (1..=n).rev() {
            esp[j] += esp[j - 1] * e;
        }
    }
    let total: u128 = esp[k + 1..].iter().sum();
    usize::try_from(total).map_err(|_| Error::BadParameter("kernel dimension overflows".into()))
}

/// Numerical rank and an orthonormal null-space basis of `a`, from the
/// singular value decomposition realized through the symmetric
/// eigendecomposition of the smaller Gram matrix. Singular values are
/// measured directly as |A^T u| (resp. |A v|), which keeps the stated
/// relative threshold meaningful: genuine zeros land at machine scale while
/// the smallest true singular value of these exactly-rational constraint
/// matrices sits many orders above the cut.
fn svd_null_space(a: &DMatrix<f64>, rel_threshold: f64) -> (usize, DMatrix<f64>) {
    let (m, ncols) = a.shape();
    if m < ncols {
        // eigen of A A^T gives the row space; complement it
        let gram = a * a.transpose();
        let (_, evecs) = crate::eigen::symmetric_eigen_real(&gram);
        let mut cols: Vec<(f64, DVector<f64>)> = Vec::with_capacity(m);
        for i in 0..m {
            let u = evecs.column(i);
            let w = a.transpose() * u;
            cols.push((w.norm(), w));
        }
        cols.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let smax = cols[0].0;
        let rank = cols
            .iter()
            .filter(|(s, _)| *s > rel_threshold * smax)
            .count();
        let mut row_space = DMatrix::zeros(ncols, rank);
        for (j, (s, w)) in cols.iter().take(rank).enumerate() {
            row_space.set_column(j, &(w / *s));
        }
        (rank, orthonormal_complement(&row_space))
    } else {
        // eigen of A^T A carries the null space directly
        let gram = a.transpose() * a;
        let (_, evecs) = crate::eigen::symmetric_eigen_real(&gram);
        let mut idx: Vec<(f64, usize)> = (0..ncols)
            .map(|i| ((a * evecs.column(i)).norm(), i))
            .collect();
        idx.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let smax = idx[0].0;
        let rank = idx
            .iter()
            .filter(|(s, _)| *s > rel_threshold * smax)
            .count();
        let mut null = DMatrix::zeros(ncols, ncols - rank);
        for (out_col, (_, i)) in idx[rank..].iter().enumerate() {
            null.set_column(out_col, &evecs.column(*i));
        }
        (rank, null)
    }
}

/// Orthonormal basis of the orthogonal complement of the column space of `q0`
/// (whose columns are assumed orthonormal), via the full Q factor of a
/// Householder QR.
fn orthonormal_complement(q0: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = q0.shape();
    debug_assert!(r <= n);
    // Householder vectors of the QR of q0
    let mut work = q0.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let mut v = DVector::zeros(n);
        let mut norm_sq = 0.0;
        for i in k..n {
            let x = work[(i, k)];
            v[i] = x;
            norm_sq += x * x;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            reflectors.push(DVector::zeros(n));
            continue;
        }
        let sign = if v[k] >= 0.0 { 1.0 } else { -1.0 };
        v[k] += sign * norm;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
        }
        // apply H = I - 2 v v^T to the remaining columns
        for col in k..r {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * work[(i, col)];
            }
            for i in k..n {
                work[(i, col)] -= 2.0 * dot * v[i];
            }
        }
        reflectors.push(v);
    }
    // complement columns: q_j = H_1 ... H_r e_j for j = r..n-1
    let mut out = DMatrix::zeros(n, n - r);
    for (out_col, j) in (r..n).enumerate() {
        let mut col = DVector::zeros(n);
        col[j] = 1.0;
        for v in reflectors.iter().rev() {
            let dot = v.dot(&col);
            if dot != 0.0 {
                col.axpy(-2.0 * dot, v, 1.0);
            }
        }
        out.set_column(out_col, &col);
    }
    out
}

fn basis_from_null_columns(
    null: &DMatrix<f64>,
    dims: &DimProfile,
    k: usize,
) -> Result<KernelBasis> {
    let d = dims.total_dim();
    let mut basis = Vec::with_capacity(null.ncols());
    for col in 0..null.ncols() {
        let coords: Vec<f64> = (0..null.nrows()).map(|r| null[(r, col)]).collect();
        let m = hermitian::decode(&coords, d);
        let op = Operator::new(m, dims.clone())?;
        basis.push(CorrelationMatrix::new(op, k)?);
    }
    Ok(KernelBasis {
        dims: dims.clone(),
        k,
        basis,
        coords: null.clone(),
    })
}

/// Orthonormal basis of the correlation space for the given profile and
/// marginal order, via the SVD null space of [`marginal_constraint_matrix`].
pub fn correlation_kernel(dims: &DimProfile, k: usize) -> Result<KernelBasis> {
    correlation_kernel_with_threshold(dims, k, SVD_REL_THRESHOLD)
}

pub fn correlation_kernel_with_threshold(
    dims: &DimProfile,
    k: usize,
    rel_threshold: f64,
) -> Result<KernelBasis> {
    let a = marginal_constraint_matrix(dims, k)?;
    let (_, null) = svd_null_space(&a, rel_threshold);
    let expected = kernel_dim_formula(dims, k)?;
    if null.ncols() != expected {
        return Err(Error::Numerical(format!(
            "kernel dimension {} disagrees with the closed-form count {}",
            null.ncols(),
            expected
        )));
    }
    basis_from_null_columns(&null, dims, k)
}

/// Composition mode selecting the index map for group constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ComposeMode {
    Tensor,
    Kron,
    /// Partial merge of the first l party pairs.
    Kc(usize),
}

fn layout_for_mode(
    dims_a: &DimProfile,
    dims_b: &DimProfile,
    mode: ComposeMode,
) -> Result<FactorLayout> {
    match mode {
        ComposeMode::Tensor => Ok(FactorLayout::tensor(dims_a, dims_b)),
        ComposeMode::Kron => {
            if dims_a.parties() > dims_b.parties() {
                return Err(Error::BadParameter(
                    "kron group constraints need len(dims_a) <= len(dims_b)".into(),
                ));
            }
            Ok(FactorLayout::kron(dims_a, dims_b))
        }
        ComposeMode::Kc(l) => {
            if l > dims_a.parties().min(dims_b.parties()) {
                return Err(Error::BadParameter(format!(
                    "merge count l = {l} out of range"
                )));
            }
            Ok(FactorLayout::kc(dims_a, dims_b, l))
        }
    }
}

fn group_constraint_matrix(
    dims_a: &DimProfile,
    dims_b: &DimProfile,
    k: usize,
    mode: ComposeMode,
) -> Result<(DMatrix<f64>, FactorLayout, DimProfile)> {
    let layout = layout_for_mode(dims_a, dims_b, mode)?;
    let composite = layout.composite_profile()?;
    let n = composite.parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut blocks: Vec<ReductionBlock> = combinations(n, k)
        .iter()
        .map(|s| ReductionBlock::for_subset(&composite, s))
        .collect();
    blocks.push(ReductionBlock::for_group(&layout, Factor::First));
    blocks.push(ReductionBlock::for_group(&layout, Factor::Second));
    Ok((
        assemble_constraint_matrix(&composite, &blocks),
        layout,
        composite,
    ))
}

/// Orthonormal basis of the correlation-space elements whose whole-group
/// reductions onto each factor also vanish, with group reductions computed
/// through the composition mode's index map. Always a subspace of
/// [`correlation_kernel`] of the composite profile.
pub fn kernel_with_group_constraints(
    dims_a: &DimProfile,
    dims_b: &DimProfile,
    k: usize,
    mode: ComposeMode,
) -> Result<KernelBasis> {
    let (a, layout, composite) = group_constraint_matrix(dims_a, dims_b, k, mode)?;
    let (_, null) = svd_null_space(&a, SVD_REL_THRESHOLD);
    let basis = basis_from_null_columns(&null, &composite, k)?;
    // group reductions must vanish as well
    for cm in basis.iter() {
        for factor in [Factor::First, Factor::Second] {
            let red = crate::products::group_reduction(cm.op(), &layout, factor)?;
            if red.max_abs_entry() > REDUCTION_TOL {
                return Err(Error::Numerical(
                    "group reduction of a constrained kernel element is not zero".into(),
                ));
            }
        }
    }
    Ok(basis)
}

/// Dimension of the group-constrained correlation space, by numerical rank
/// only (no basis assembly).
pub fn group_constrained_kernel_dim(
    dims_a: &DimProfile,
    dims_b: &DimProfile,
    k: usize,
    mode: ComposeMode,
) -> Result<usize> {
    let (a, _, composite) = group_constraint_matrix(dims_a, dims_b, k, mode)?;
    let gram = &a * a.transpose();
    let (_, evecs) = crate::eigen::symmetric_eigen_real(&gram);
    let sv: Vec<f64> = (0..a.nrows())
        .map(|i| (a.transpose() * evecs.column(i)).norm())
        .collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > SVD_REL_THRESHOLD * smax).count();
    Ok(hermitian::coords_len(composite.total_dim()) - rank)
}

/// The exact two-qubit family of traceless Hermitian matrices with both
/// single-qubit reductions zero:
///
/// ```text
/// [  m1    m2    m3    m4 ]
/// [  m2*  -m1    m5   -m3 ]
/// [  m3*   m5*  -m1   -m2 ]
/// [  m4*  -m3*  -m2*   m1 ]
/// ```
///
/// with m1 real and m2..m5 complex.
pub fn two_qubit_null_marginal_family(m1: f64, m: [Complex64; 4]) -> CorrelationMatrix {
    let [m2, m3, m4, m5] = m;
    let c = |x: f64| Complex64::new(x, 0.0);
    let rows = [
        [c(m1), m2, m3, m4],
        [m2.conj(), c(-m1), m5, -m3],
        [m3.conj(), m5.conj(), c(-m1), -m2],
        [m4.conj(), -m3.conj(), -m2.conj(), c(m1)],
    ];
    let mut mat = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            mat[(i, j)] = rows[i][j];
        }
    }
    let profile = DimProfile::n_qubits(2).expect("two qubits");
    let op = Operator::new(mat, profile).expect("4x4");
    CorrelationMatrix::new(op, 1).expect("family is in the kernel by construction")
}

/// One coherence term of [`all_diff_coherence`].
#[derive(Debug, Clone)]
pub struct CoherenceTerm {
    pub row: Vec<usize>,
    pub col: Vec<usize>,
    pub coeff: Complex64,
}

/// Hermitian correlation matrix built from coherences between basis tuples
/// that differ at every party: chi = sum c |row><col| + c* |col><row|.
///
/// Any reduction that traces at least one party kills every term, so all
/// (n-1)-party (hence all lower) reductions vanish exactly.
pub fn all_diff_coherence(dims: &DimProfile, terms: &[CoherenceTerm]) -> Result<CorrelationMatrix> {
    let n = dims.parties();
    if n < 2 {
        return Err(Error::KOutOfRange { k: 0, n });
    }
    let d = dims.total_dim();
    let mut mat = DMatrix::zeros(d, d);
    for term in terms {
        if term.row.len() != n || term.col.len() != n {
            return Err(Error::InvalidCoherenceTerm(format!(
                "tuples must have {} indices",
                n
            )));
        }
        for l in 0..n {
            let dl = dims.dims()[l];
            if term.row[l] >= dl || term.col[l] >= dl {
                return Err(Error::InvalidCoherenceTerm(format!(
                    "index out of range at party {}",
                    l + 1
                )));
            }
            if term.row[l] == term.col[l] {
                return Err(Error::InvalidCoherenceTerm(format!(
                    "indices must differ at every party, equal at party {}",
                    l + 1
                )));
            }
        }
        let r = dims.encode(&term.row);
        let c = dims.encode(&term.col);
        mat[(r, c)] += term.coeff;
        mat[(c, r)] += term.coeff.conj();
    }
    let op = Operator::new(mat, dims.clone())?;
    CorrelationMatrix::new(op, n - 1)
}
