//! Kets, operators and density matrices over multipartite index structures,
//! with partial traces, subsystem permutations, local unitaries and the
//! factorization of states whose reduction on a group of parties is pure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dims::{DimProfile, SubsetSpec};
use crate::{Error, Result, Tolerances};

/// Residual guarantee of [`factorize_pure_reduction`].
pub const FACTORIZATION_RESIDUAL: f64 = 1e-8;

/// Normalized state vector tagged with a dimension profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: DVector<Complex64>,
    profile: DimProfile,
}

impl Ket {
    pub fn new(amplitudes: DVector<Complex64>, profile: DimProfile) -> Result<Self> {
        Self::with_tolerances(amplitudes, profile, &Tolerances::default())
    }

    pub fn with_tolerances(
        amplitudes: DVector<Complex64>,
        profile: DimProfile,
        tol: &Tolerances,
    ) -> Result<Self> {
        if amplitudes.len() != profile.total_dim() {
            return Err(Error::ShapeMismatch {
                expected: profile.total_dim(),
                got: amplitudes.len(),
            });
        }
        let norm_sq = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm_sq - 1.0).abs() > tol.tol_norm {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self {
            amplitudes,
            profile,
        })
    }

    /// Basis ket |digits> for the given profile.
    pub fn basis(profile: DimProfile, digits: &[usize]) -> Result<Self> {
        let flat = profile.encode(digits);
        let d = profile.total_dim();
        let amplitudes = DVector::from_fn(d, |i, _| {
            if i == flat {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ket::new(amplitudes, profile)
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn profile(&self) -> &DimProfile {
        &self.profile
    }

    /// |psi><psi| as a density matrix.
    pub fn projector(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix {
            op: Operator::new(m, self.profile.clone()).expect("projector shape"),
        }
    }

    /// Tensor product |self> (x) |other>, profiles concatenated.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        let profile = self.profile.concat(&other.profile)?;
        let a = &self.amplitudes;
        let b = &other.amplitudes;
        let mut amps = DVector::zeros(a.len() * b.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                amps[i * b.len() + j] = a[i] * b[j];
            }
        }
        Ket::new(amps, profile)
    }

    /// Relabel parties so party i moves to position perm[i-1] (both 1-based).
    pub fn permute(&self, perm: &[usize]) -> Result<Ket> {
        let (new_profile, map) = permutation_map(&self.profile, perm)?;
        let mut amps = DVector::zeros(self.amplitudes.len());
        for old in 0..self.amplitudes.len() {
            amps[map[old]] = self.amplitudes[old];
        }
        Ok(Ket {
            amplitudes: amps,
            profile: new_profile,
        })
    }

    /// Fix the global phase: largest-magnitude amplitude becomes real positive.
    pub fn phase_fixed(&self) -> Ket {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, z) in self.amplitudes.iter().enumerate() {
            let m = z.norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        let z = self.amplitudes[best];
        if z.norm() == 0.0 {
            return self.clone();
        }
        let phase = z / z.norm();
        let amps = self.amplitudes.map(|a| a * phase.conj());
        Ket {
            amplitudes: amps,
            profile: self.profile.clone(),
        }
    }
}

/// General (unconstrained) operator tagged with a dimension profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<Complex64>,
    profile: DimProfile,
}

impl Operator {
    pub fn new(matrix: DMatrix<Complex64>, profile: DimProfile) -> Result<Self> {
        let d = profile.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { matrix, profile })
    }

    pub fn zeros(profile: DimProfile) -> Self {
        let d = profile.total_dim();
        Self {
            matrix: DMatrix::zeros(d, d),
            profile,
        }
    }

    pub fn identity(profile: DimProfile) -> Self {
        let d = profile.total_dim();
        Self {
            matrix: DMatrix::identity(d, d),
            profile,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn profile(&self) -> &DimProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max entry magnitude of M - M^dag.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut dev = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Largest entry magnitude.
    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues assuming Hermiticity, ascending.
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        crate::eigen::hermitian_eigenvalues(&self.matrix)
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        crate::eigen::min_eigenvalue(&self.matrix)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, &Tolerances::default())
    }

    pub fn with_tolerances(op: Operator, tol: &Tolerances) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > tol.tol_herm {
            return Err(Error::NotHermitian { max_dev: herm });
        }
        let trace = op.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::TraceNotOne { trace: trace.re });
        }
        let min_eig = op.min_eigenvalue();
        if min_eig < -tol.eps_psd * trace.re {
            return Err(Error::NotPositive { min_eig });
        }
        Ok(Self { op })
    }

    /// Repair an approximately valid state: Hermitize, clip negative spectrum,
    /// renormalize the trace. Used for solver iterates and witness rounding;
    /// verification happens separately.
    pub fn from_matrix_clamped(matrix: DMatrix<Complex64>, profile: DimProfile) -> Result<Self> {
        let d = profile.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: matrix.nrows(),
            });
        }
        let (evals, evecs) = crate::eigen::hermitian_eigen(&matrix);
        let mut clipped = DMatrix::zeros(d, d);
        let mut tr = 0.0f64;
        for k in 0..d {
            tr += evals[k].max(0.0);
        }
        if tr <= 0.0 {
            return Err(Error::Numerical("clamped state has zero trace".into()));
        }
        for k in 0..d {
            let lam = evals[k].max(0.0) / tr;
            if lam == 0.0 {
                continue;
            }
            let v = evecs.column(k);
            for i in 0..d {
                for j in 0..d {
                    clipped[(i, j)] += v[i] * v[j].conj() * Complex64::new(lam, 0.0);
                }
            }
        }
        DensityMatrix::new(Operator::new(clipped, profile)?)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.op.matrix()
    }

    pub fn profile(&self) -> &DimProfile {
        self.op.profile()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Trace of the square.
    pub fn purity(&self) -> f64 {
        let m = self.op.matrix();
        let mut p = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                p += (m[(i, j)] * m[(j, i)]).re;
            }
        }
        p
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (self.matrix() - other.matrix())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Trace out the complement of `keep`, returning the reduction on the kept
/// parties. The kept parties stay in their original relative order.
pub fn partial_trace(op: &Operator, keep: &SubsetSpec) -> Result<Operator> {
    let n = op.profile().parties();
    keep.validate_for(n)?;
    let keep0 = keep.zero_based();
    let strides = op.profile().strides();
    let dims = op.profile().dims();

    let traced0: Vec<usize> = (0..n).filter(|i| !keep0.contains(i)).collect();
    let keep_profile = op.profile().restrict(keep);
    let d_keep = keep_profile.total_dim();
    let d_traced: usize = traced0.iter().map(|&i| dims[i]).product();

    // flat offsets of every kept-index tuple and every traced-index tuple
    let keep_offsets = enumerate_offsets(&keep0, dims, &strides);
    let traced_offsets = enumerate_offsets(&traced0, dims, &strides);
    debug_assert_eq!(keep_offsets.len(), d_keep);
    debug_assert_eq!(traced_offsets.len(), d_traced);

    let m = op.matrix();
    let mut out = DMatrix::zeros(d_keep, d_keep);
    for (r, &ro) in keep_offsets.iter().enumerate() {
        for (c, &co) in keep_offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Operator::new(out, keep_profile)
}

/// Flat offsets of all index tuples over the chosen (0-based) parties,
/// enumerated row-major in the order the parties appear in `parties`.
fn enumerate_offsets(parties: &[usize], dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = parties.iter().map(|&i| dims[i]).product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; parties.len()];
    loop {
        let off = digits
            .iter()
            .zip(parties)
            .map(|(&d, &p)| d * strides[p])
            .sum();
        out.push(off);
        // increment
        let mut i = parties.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < dims[parties[i]] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Compute the destination profile and flat-index relabeling for a party
/// permutation: party i moves to position perm[i-1] (1-based).
fn permutation_map(profile: &DimProfile, perm: &[usize]) -> Result<(DimProfile, Vec<usize>)> {
    let n = profile.parties();
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "permutation length {} does not match {} parties",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p == 0 || p > n || seen[p - 1] {
            return Err(Error::InvalidPermutation(format!(
                "{:?} is not a bijection on 1..={}",
                perm, n
            )));
        }
        seen[p - 1] = true;
    }
    let dims = profile.dims();
    let mut new_dims = vec![0usize; n];
    for i in 0..n {
        new_dims[perm[i] - 1] = dims[i];
    }
    let new_profile = DimProfile::new_unchecked(new_dims);
    let new_strides = new_profile.strides();
    let d = profile.total_dim();
    let mut map = vec![0usize; d];
    for old in 0..d {
        let digits = profile.decode(old);
        let mut flat = 0usize;
        for i in 0..n {
            flat += digits[i] * new_strides[perm[i] - 1];
        }
        map[old] = flat;
    }
    Ok((new_profile, map))
}

/// Relabel basis indices so party i moves to position perm[i-1]. The spectrum
/// is untouched; applying the inverse permutation recovers the input.
pub fn permute_subsystems(op: &Operator, perm: &[usize]) -> Result<Operator> {
    let (new_profile, map) = permutation_map(op.profile(), perm)?;
    let d = op.dim();
    let m = op.matrix();
    let mut out = DMatrix::zeros(d, d);
    for r in 0..d {
        let nr = map[r];
        for c in 0..d {
            out[(nr, map[c])] = m[(r, c)];
        }
    }
    Operator::new(out, new_profile)
}

/// Inverse of a permutation given as party -> position (1-based).
pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p - 1] = i + 1;
    }
    inv
}

/// Conjugate a state by a product of one local unitary per party.
pub fn apply_local_unitaries(
    rho: &DensityMatrix,
    unitaries: &[DMatrix<Complex64>],
) -> Result<DensityMatrix> {
    let profile = rho.profile().clone();
    let n = profile.parties();
    if unitaries.len() != n {
        return Err(Error::BadParameter(format!(
            "expected {} local unitaries, got {}",
            n,
            unitaries.len()
        )));
    }
    for (i, u) in unitaries.iter().enumerate() {
        let d = profile.local_dim(i + 1);
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: u.nrows(),
            });
        }
        let dev = (u * u.adjoint() - DMatrix::<Complex64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::NotUnitary { party: i + 1, dev });
        }
    }
    let mut full = unitaries[0].clone();
    for u in &unitaries[1..] {
        full = full.kronecker(u);
    }
    let conj = &full * rho.matrix() * full.adjoint();
    DensityMatrix::new(Operator::new(conj, profile)?)
}

/// Split a state whose reduction on `group` is pure into that pure factor and
/// the state of the remaining parties: rho = |psi><psi| (x) sigma after
/// reordering parties so the group comes first.
///
/// Errors when the reduction's purity falls below 1 - tol_pure, or when the
/// reconstruction residual exceeds [`FACTORIZATION_RESIDUAL`].
pub fn factorize_pure_reduction(
    rho: &DensityMatrix,
    group: &SubsetSpec,
) -> Result<(Ket, DensityMatrix)> {
    factorize_pure_reduction_with(rho, group, &Tolerances::default())
}

pub fn factorize_pure_reduction_with(
    rho: &DensityMatrix,
    group: &SubsetSpec,
    tol: &Tolerances,
) -> Result<(Ket, DensityMatrix)> {
    let n = rho.profile().parties();
    group.validate_for(n)?;
    let env = group.complement(n).map_err(|_| {
        Error::InvalidSubset("group must leave at least one party as environment".into())
    })?;

    let reduction = partial_trace(rho.op(), group)?;
    let purity = {
        let m = reduction.matrix();
        let mut p = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                p += (m[(i, j)] * m[(j, i)]).re;
            }
        }
        p
    };
    if purity < 1.0 - tol.tol_pure {
        return Err(Error::ReductionNotPure { purity });
    }

    // dominant eigenvector of the reduction, phase fixed
    let (evals, evecs) = crate::eigen::hermitian_eigen(reduction.matrix());
    let top = evals.len() - 1;
    let psi_raw = DVector::from_column_slice(evecs.column(top).as_slice());
    let group_profile = rho.profile().restrict(group);
    let psi = Ket::with_tolerances(
        psi_raw,
        group_profile,
        &Tolerances {
            tol_norm: 1e-9,
            ..*tol
        },
    )?
    .phase_fixed();

    // reorder rho so the group parties come first
    let mut perm = vec![0usize; n];
    for (pos, &g) in group.indices().iter().enumerate() {
        perm[g - 1] = pos + 1;
    }
    for (pos, &e) in env.indices().iter().enumerate() {
        perm[e - 1] = group.len() + pos + 1;
    }
    let reordered = permute_subsystems(rho.op(), &perm)?;

    // sigma_E = <psi| rho |psi> contracted over the group indices
    let env_profile = rho.profile().restrict(&env);
    let dg = psi.amplitudes().len();
    let de = env_profile.total_dim();
    let m = reordered.matrix();
    let amps = psi.amplitudes();
    let mut sigma = DMatrix::zeros(de, de);
    for e in 0..de {
        for e2 in 0..de {
            let mut acc = Complex64::new(0.0, 0.0);
            for g in 0..dg {
                let row = g * de + e;
                for g2 in 0..dg {
                    acc += amps[g].conj() * m[(row, g2 * de + e2)] * amps[g2];
                }
            }
            sigma[(e, e2)] = acc;
        }
    }
    // normalize the conditional state
    let tr = sigma.trace();
    if tr.re <= 0.0 {
        return Err(Error::Numerical(
            "pure-factor contraction has zero trace".into(),
        ));
    }
    sigma /= Complex64::new(tr.re, 0.0);
    let sigma_e = DensityMatrix::new(Operator::new(sigma, env_profile)?)?;

    // reconstruction residual check in the reordered frame
    let rebuilt = psi.projector().matrix().kronecker(sigma_e.matrix());
    let residual = (&rebuilt - m)
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if residual > FACTORIZATION_RESIDUAL {
        return Err(Error::FactorResidual { residual });
    }

    Ok((psi, sigma_e))
}
