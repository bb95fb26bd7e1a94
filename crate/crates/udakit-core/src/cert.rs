//! Numerical certification of whether a state is uniquely determined among
//! all states by its k-party marginals.
//!
//! The compatible set {sigma >= 0 : all k-marginals of sigma equal rho's} is
//! a spectrahedron containing rho. Every compatible sigma differs from rho by
//! an element of the correlation kernel, so rho is the only compatible state
//! exactly when the supremum of |<chi, sigma - rho>| over the compatible set
//! vanishes for every kernel direction chi. Full mode certifies those
//! suprema direction by direction with a dual bound; sampled mode only ever
//! looks for counterexamples and never claims uniqueness.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dims::DimProfile;
use crate::hermitian;
use crate::marginal::{
    correlation_kernel, kernel_dim_formula, marginal_constraint_matrix, CorrelationMatrix,
    KernelBasis,
};
use crate::sampling;
use crate::tensor::{partial_trace, DensityMatrix, Operator};
use crate::{Error, Result, Tolerances};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Tolerances and budgets of the certifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertConfig {
    /// Frobenius bound on each marginal mismatch of a feasible point.
    pub tol_feas: f64,
    /// Optimality-gap bound below which a directional solve counts as
    /// converged.
    pub tol_gap: f64,
    /// Certified directional deviation below which uniqueness is declared.
    pub uda_threshold: f64,
    /// Minimal Frobenius distance of a valid witness.
    pub witness_min_dist: f64,
    /// Iteration cap per directional solve.
    pub max_iter: usize,
    /// RNG seed for sampled modes.
    pub seed: u64,
    /// Full mode refuses kernels larger than this.
    pub kernel_budget: usize,
    /// Cap on the number of coherence-pair screen directions.
    pub screen_dir_cap: usize,
}

impl Default for CertConfig {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-7,
            uda_threshold: 1e-5,
            witness_min_dist: 1e-4,
            max_iter: 5000,
            seed: 0,
            kernel_budget: 4000,
            screen_dir_cap: 20000,
        }
    }
}

impl CertConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tol_feas", self.tol_feas),
            ("tol_gap", self.tol_gap),
            ("uda_threshold", self.uda_threshold),
            ("witness_min_dist", self.witness_min_dist),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::BadParameter(format!("{name} must be positive")));
            }
        }
        if self.uda_threshold <= self.tol_gap {
            return Err(Error::BadParameter(
                "uda_threshold must exceed tol_gap".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::BadParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Certified outcome of a uniqueness run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UdaStatus {
    Uda,
    NotUda,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertMode {
    Full,
    Sampled,
}

/// Outcome of the two directional solves along one kernel direction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DirectionReport {
    /// Achieved deviation <chi, sigma - rho> of the sup solve.
    pub sup_dev: f64,
    /// Certified upper bound on the true sup deviation.
    pub sup_bound: f64,
    /// Achieved deviation of the inf solve (reported as a magnitude).
    pub inf_dev: f64,
    /// Certified upper bound on the true inf deviation magnitude.
    pub inf_bound: f64,
}

impl DirectionReport {
    pub fn certified_below(&self, threshold: f64) -> bool {
        self.sup_bound <= threshold && self.inf_bound <= threshold
    }
}

/// Explicit second state with the same k-marginals.
#[derive(Debug, Clone)]
pub struct Witness {
    pub sigma: DensityMatrix,
    /// Frobenius distance to the certified state.
    pub distance: f64,
    /// Max marginal-mismatch Frobenius norm.
    pub residual: f64,
}

/// Verdict plus the evidence that produced it.
#[derive(Debug, Clone)]
pub struct UdaVerdict {
    pub status: UdaStatus,
    pub witness: Option<Witness>,
    pub evidence: Vec<DirectionReport>,
    pub mode: CertMode,
    pub config: CertConfig,
    pub annotation: Option<String>,
}

/// Measurements of a witness candidate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WitnessReport {
    pub pass: bool,
    pub min_eig: f64,
    pub trace: f64,
    pub max_marginal_residual: f64,
    pub distance: f64,
}

/// True iff sigma is a state (PSD within eps_psd, unit trace), matches every
/// k-marginal of rho within tol_feas, and sits at least witness_min_dist away.
pub fn verify_witness(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    k: usize,
    config: &CertConfig,
) -> Result<WitnessReport> {
    if rho.profile() != sigma.profile() {
        return Err(Error::BadParameter("profiles differ".into()));
    }
    let n = rho.profile().parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let tol = Tolerances::default();
    let min_eig = sigma.op().min_eigenvalue();
    let trace = sigma.op().trace().re;
    let mut max_res = 0.0f64;
    for subset in crate::dims::combinations(n, k) {
        let a = partial_trace(sigma.op(), &subset)?;
        let b = partial_trace(rho.op(), &subset)?;
        let res = (a.matrix() - b.matrix())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        max_res = max_res.max(res);
    }
    let distance = sigma.frobenius_distance(rho);
    let pass = min_eig >= -tol.eps_psd * trace.max(1.0)
        && (trace - 1.0).abs() <= 1e-10
        && max_res <= config.tol_feas
        && distance >= config.witness_min_dist;
    Ok(WitnessReport {
        pass,
        min_eig,
        trace,
        max_marginal_residual: max_res,
        distance,
    })
}

/// Largest t >= 0 with rho + t chi still positive semidefinite (within
/// eps_psd), by bisection on the minimum eigenvalue. Zero when the kernel
/// direction immediately violates positivity on the null space of rho.
pub fn max_feasible_step(rho: &DensityMatrix, chi: &CorrelationMatrix) -> Result<f64> {
    if chi.profile() != rho.profile() {
        return Err(Error::BadParameter("profiles differ".into()));
    }
    let norm = chi.frobenius_norm();
    if norm <= 1e-12 {
        return Err(Error::BadParameter(
            "perturbation is numerically zero".into(),
        ));
    }
    let cache = RhoEig::new(rho);
    Ok(feasible_step_with_cache(rho, &cache, chi.op().matrix()))
}

/// Eigen data of rho reused across many directional feasibility checks.
struct RhoEig {
    null_basis: Option<DMatrix<Complex64>>,
}

impl RhoEig {
    fn new(rho: &DensityMatrix) -> Self {
        let tol = Tolerances::default();
        let (evals, evecs) = crate::eigen::hermitian_eigen(rho.matrix());
        let d = rho.dim();
        let null_cols: Vec<usize> = (0..d).filter(|&i| evals[i] <= tol.eps_psd).collect();
        let null_basis = if null_cols.is_empty() {
            None
        } else {
            let mut nb = DMatrix::zeros(d, null_cols.len());
            for (out, &c) in null_cols.iter().enumerate() {
                nb.set_column(out, &evecs.column(c));
            }
            Some(nb)
        };
        Self { null_basis }
    }
}

fn feasible_step_with_cache(rho: &DensityMatrix, cache: &RhoEig, chi: &DMatrix<Complex64>) -> f64 {
    let tol = Tolerances::default();
    // a first-order obstruction on the null space of rho pins t_max at zero
    if let Some(nb) = &cache.null_basis {
        let b = nb.adjoint() * chi * nb;
        if crate::eigen::min_eigenvalue(&b) < -1e-11 {
            return 0.0;
        }
    }
    let chi_min = crate::eigen::min_eigenvalue(chi);
    if chi_min >= -1e-14 {
        // traceless nonzero Hermitian always has a negative eigenvalue;
        // a flat spectrum here means chi is numerically zero
        return 0.0;
    }
    let feasible = |t: f64| -> bool {
        let m = rho.matrix() + chi * Complex64::new(t, 0.0);
        crate::eigen::min_eigenvalue(&m) >= -tol.eps_psd
    };
    let t_hi = 2.0 * rho.op().trace().re / chi_min.abs();
    if feasible(t_hi) {
        return t_hi;
    }
    let mut lo = 0.0f64;
    let mut hi = t_hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// An affine slice of Hermitian coordinate space with orthonormalized
/// constraint rows: either the k-marginal slice of a reference state, or its
/// compression onto a support face.
pub(crate) struct MarginalSlice {
    d: usize,
    /// r x D^2 with orthonormal rows spanning the constraint row space.
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    rho_coords: DVector<f64>,
}

impl MarginalSlice {
    fn new(rho: &DensityMatrix, k: usize) -> Result<Self> {
        let a = marginal_constraint_matrix(rho.profile(), k)?;
        Self::from_constraints(&a, rho)
    }

    fn from_constraints(a: &DMatrix<f64>, rho: &DensityMatrix) -> Result<Self> {
        // orthonormalize the rows through the row Gram matrix; the constraint
        // rows are exactly rational with a wide spectral gap at the rank cut
        let gram = a * a.transpose();
        let (evals, evecs) = crate::eigen::symmetric_eigen_real(&gram);
        let lam_max = evals.iter().copied().fold(0.0, f64::max);
        let kept: Vec<usize> = (0..evals.len())
            .filter(|&i| evals[i] > 1e-10 * lam_max)
            .collect();
        let mut rows = DMatrix::zeros(kept.len(), a.ncols());
        for (r, &i) in kept.iter().enumerate() {
            let u = evecs.column(i);
            let w = a.transpose() * u;
            let norm = w.norm();
            rows.set_row(r, &(w / norm).transpose());
        }
        let rho_coords = hermitian::encode(rho.matrix());
        let rhs = &rows * &rho_coords;
        Ok(Self {
            d: rho.dim(),
            rows,
            rhs,
            rho_coords,
        })
    }

    /// Compress the constraint map onto a support face. Returns the face
    /// slice and the dimension of its direction space.
    fn on_face(a: &DMatrix<f64>, face: &SupportFace, rho: &DensityMatrix) -> (Self, usize) {
        let r = face.r;
        let rlen = hermitian::coords_len(r);
        let mut a_face = DMatrix::<f64>::zeros(a.nrows(), rlen);
        let mut unit = vec![0.0f64; rlen];
        for alpha in 0..rlen {
            unit[alpha] = 1.0;
            let e = hermitian::decode(&unit, r);
            unit[alpha] = 0.0;
            let lift = &face.basis * e * face.basis.adjoint();
            let lift_h = (&lift + lift.adjoint()) * Complex64::new(0.5, 0.0);
            a_face.set_column(alpha, &(a * hermitian::encode(&lift_h)));
        }
        // the row space of the compressed map through its tiny column Gram
        let gram = a_face.transpose() * &a_face;
        let (_, evecs) = crate::eigen::symmetric_eigen_real(&gram);
        let sv: Vec<f64> = (0..rlen)
            .map(|i| (&a_face * evecs.column(i)).norm())
            .collect();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let kept: Vec<usize> = (0..rlen)
            .filter(|&i| sv[i] > 1e-10 * smax.max(1e-300))
            .collect();
        let mut rows = DMatrix::zeros(kept.len(), rlen);
        for (out, &i) in kept.iter().enumerate() {
            rows.set_row(out, &evecs.column(i).transpose());
        }
        let compressed = face.basis.adjoint() * rho.matrix() * &face.basis;
        let rho_coords =
            hermitian::encode(&((&compressed + compressed.adjoint()) * Complex64::new(0.5, 0.0)));
        let rhs = &rows * &rho_coords;
        let kernel_dim = rlen - kept.len();
        (
            Self {
                d: r,
                rows,
                rhs,
                rho_coords,
            },
            kernel_dim,
        )
    }

    /// Exact projection onto the affine slice.
    fn project_affine(&self, x: &mut DVector<f64>) {
        let r = &self.rows * &*x - &self.rhs;
        *x -= self.rows.transpose() * r;
    }

    /// Orthogonal projection onto the kernel (the slice's direction space).
    fn project_kernel(&self, x: &mut DVector<f64>) {
        let r = &self.rows * &*x;
        *x -= self.rows.transpose() * r;
    }

    fn kernel_residual_norm(&self, x: &DVector<f64>) -> f64 {
        let mut v = x.clone();
        self.project_kernel(&mut v);
        v.norm()
    }
}

/// Projection onto the PSD cone in Hermitian coordinates.
fn psd_project(coords: &DVector<f64>, d: usize) -> DVector<f64> {
    let m = hermitian::decode(coords.as_slice(), d);
    let (evals, evecs) = crate::eigen::hermitian_eigen(&m);
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        let lam = evals[k];
        if lam <= 0.0 {
            continue;
        }
        let v = evecs.column(k);
        for i in 0..d {
            for j in i..d {
                out[(i, j)] += v[i] * v[j].conj() * Complex64::new(lam, 0.0);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            out[(i, j)] = out[(j, i)].conj();
        }
    }
    hermitian::encode(&out)
}

fn min_eigenvalue_of_coords(coords: &DVector<f64>, d: usize) -> f64 {
    let m = hermitian::decode(coords.as_slice(), d);
    crate::eigen::min_eigenvalue(&m)
}

/// Support face that provably contains every marginal-compatible state.
///
/// For any compatible sigma and subset S, supp(sigma_S) = supp(rho_S), so
/// supp(sigma) lies inside V = intersection of supp(rho_S) (x) rest. The
/// certificate is quantitative: R = sum of lifted null projectors of the
/// reductions is PSD, lives in the constraint row space, and <R, sigma> =
/// <R, rho> =: eta, which caps the trace mass of sigma outside ker(R) at
/// tau = eta / lambda_min+(R).
struct SupportFace {
    /// D x r isometry onto V.
    basis: DMatrix<Complex64>,
    r: usize,
    /// Frobenius bound on sigma - P sigma P for any compatible sigma.
    eps_sigma: f64,
    /// Coordinates of rho - P rho P.
    rho_defect: DVector<f64>,
    /// Affine slack of compressed compatible states on the face slice.
    delta: f64,
}

fn compatible_support_face(rho: &DensityMatrix, k: usize) -> Result<Option<SupportFace>> {
    let n = rho.profile().parties();
    let d = rho.dim();
    let strides = rho.profile().strides();
    let dims = rho.profile().dims();

    // R = sum over subsets of (null projector of the reduction) (x) identity
    let mut r_mat = DMatrix::<Complex64>::zeros(d, d);
    for subset in crate::dims::combinations(n, k) {
        let red = partial_trace(rho.op(), &subset)?;
        let (evals, evecs) = crate::eigen::hermitian_eigen(red.matrix());
        let ds = red.dim();
        let mut null_proj = DMatrix::<Complex64>::zeros(ds, ds);
        let mut any = false;
        for i in 0..ds {
            if evals[i] <= 1e-12 {
                any = true;
                let v = evecs.column(i);
                for a in 0..ds {
                    for b in 0..ds {
                        null_proj[(a, b)] += v[a] * v[b].conj();
                    }
                }
            }
        }
        if !any {
            continue;
        }
        // lift onto the kept parties, identity elsewhere
        let keep0 = subset.zero_based();
        let traced0: Vec<usize> = (0..n).filter(|i| !keep0.contains(i)).collect();
        let kept_offsets = {
            let kept_dims: Vec<usize> = keep0.iter().map(|&i| dims[i]).collect();
            let kept_strides: Vec<usize> = keep0.iter().map(|&i| strides[i]).collect();
            offsets_of(&kept_dims, &kept_strides)
        };
        let traced_offsets = {
            let tr_dims: Vec<usize> = traced0.iter().map(|&i| dims[i]).collect();
            let tr_strides: Vec<usize> = traced0.iter().map(|&i| strides[i]).collect();
            offsets_of(&tr_dims, &tr_strides)
        };
        for (ai, &ao) in kept_offsets.iter().enumerate() {
            for (bi, &bo) in kept_offsets.iter().enumerate() {
                let v = null_proj[(ai, bi)];
                if v.norm() == 0.0 {
                    continue;
                }
                for &t in &traced_offsets {
                    r_mat[(ao + t, bo + t)] += v;
                }
            }
        }
    }

    let (r_evals, r_evecs) = crate::eigen::hermitian_eigen(&r_mat);
    let lam_max = r_evals[d - 1];
    if lam_max <= 1e-8 {
        // no support constraints at all
        return Ok(None);
    }
    let null_cut = 1e-8 * lam_max;
    let face_cols: Vec<usize> = (0..d).filter(|&i| r_evals[i] <= null_cut).collect();
    let r_dim = face_cols.len();
    if r_dim == 0 || r_dim == d {
        return Ok(None);
    }
    let lam_plus = r_evals
        .iter()
        .copied()
        .filter(|&v| v > null_cut)
        .fold(f64::INFINITY, f64::min);
    if lam_plus < 1e-4 * lam_max {
        // unreliable spectral gap
        return Ok(None);
    }
    // trace mass of any compatible state outside the face
    let eta = {
        let mut acc = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                acc += (r_mat[(i, j)] * rho.matrix()[(j, i)]).re;
            }
        }
        acc.max(0.0)
    };
    let tau = eta / lam_plus;
    if tau > 1e-10 {
        return Ok(None);
    }
    let eps_sigma = (2.0 * tau).sqrt() + tau;

    let mut basis = DMatrix::zeros(d, r_dim);
    for (out, &i) in face_cols.iter().enumerate() {
        basis.set_column(out, &r_evecs.column(i));
    }
    // measured defect of rho itself
    let compressed = &basis * (basis.adjoint() * rho.matrix() * &basis) * basis.adjoint();
    let defect = rho.matrix() - compressed;
    let rho_defect = hermitian::encode(&((&defect + defect.adjoint()) * Complex64::new(0.5, 0.0)));
    let eps_rho = rho_defect.norm();
    Ok(Some(SupportFace {
        basis,
        r: r_dim,
        eps_sigma,
        rho_defect,
        delta: eps_sigma + eps_rho,
    }))
}

fn offsets_of(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total.max(1));
    let mut digits = vec![0usize; dims.len()];
    loop {
        out.push(
            digits
                .iter()
                .zip(strides)
                .map(|(&a, &s)| a * s)
                .sum::<usize>(),
        );
        let mut i = dims.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < dims[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

struct SolveOptions {
    max_iter: usize,
    /// Stop once the certified deviation bound drops this low.
    certify_below: Option<f64>,
    tol_gap: f64,
    /// Affine slack of the (relaxed) slice the bound must cover.
    slack_delta: f64,
}

struct SolveOutcome {
    /// Slice-exact iterate (may be slightly outside the PSD cone).
    x: DVector<f64>,
    /// Achieved objective <c, x>.
    value: f64,
    /// Certified upper bound on sup <c, y - rho> over the compatible set.
    dev_bound: f64,
    /// True when the solve converged (gap within tol) rather than timing out.
    converged: bool,
    iterations: usize,
}

/// Maximize <c, y> over the spectrahedron slice /\ PSD by alternating the
/// closed-form affine projection with the spectral cone projection under an
/// augmented-Lagrangian dual update. The scaled dual accumulates the PSD
/// multiplier, which yields a certified deviation bound at any iterate:
/// for S >= -s I with c + S orthogonal to the kernel up to r,
/// sup <c, y - rho> <= <S, rho> + s + sqrt(2) r.
fn solve_linear_max(slice: &MarginalSlice, c: &DVector<f64>, opts: &SolveOptions) -> SolveOutcome {
    let n = c.len();
    let d = slice.d;
    let mut x = slice.rho_coords.clone();
    let mut z = x.clone();
    let mut u = DVector::<f64>::zeros(n);
    let mut pen = 1.0f64;

    let c_rho = c.dot(&slice.rho_coords);
    let mut best_bound = f64::INFINITY;
    let mut last_value = f64::INFINITY;
    let mut stalled_checks = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    let check_every = 25usize;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        // x-step: affine projection of z - u + c / pen
        x = &z - &u + c * (1.0 / pen);
        slice.project_affine(&mut x);
        // z-step: cone projection of w = x + u; the new scaled dual
        // u = w - z is exactly the negative part of w
        let w = &x + &u;
        let z_new = psd_project(&w, d);
        u = &w - &z_new;
        let z_prev = std::mem::replace(&mut z, z_new);

        if iter % check_every == 0 || iter == opts.max_iter {
            let value = c.dot(&x);
            // dual certificate from the scaled multiplier: u holds the
            // negative part of the splitting iterate, so -pen * u >= 0
            let s_coords = &u * (-pen);
            let s_min = min_eigenvalue_of_coords(&s_coords, d);
            let shift = (-s_min).max(0.0);
            let cs = c + &s_coords;
            let kernel_res = slice.kernel_residual_norm(&cs);
            let dl = opts.slack_delta;
            let row_term = if dl > 0.0 {
                dl * (&slice.rows * &cs).norm()
            } else {
                0.0
            };
            let bound = (s_coords.dot(&slice.rho_coords)
                + shift * (1.0 + dl)
                + (SQRT2 + dl) * kernel_res
                + row_term)
                .max(0.0);
            best_bound = best_bound.min(bound);

            let dev = value - c_rho;
            if let Some(stop) = opts.certify_below {
                if best_bound <= stop {
                    converged = true;
                    break;
                }
            }
            if best_bound - dev <= opts.tol_gap && (&x - &z).norm() <= 1e-9 {
                converged = true;
                break;
            }
            if (value - last_value).abs() <= 1e-12 * value.abs().max(1.0) {
                stalled_checks += 1;
                if stalled_checks >= 4 && (&x - &z).norm() <= 1e-7 {
                    break;
                }
            } else {
                stalled_checks = 0;
            }
            last_value = value;

            // penalty adaptation with dual rescaling
            let r_primal = (&x - &z).norm();
            let r_dual = pen * (&z - &z_prev).norm();
            if r_primal > 10.0 * r_dual && pen < 1e6 {
                pen *= 2.0;
                u /= 2.0;
            } else if r_dual > 10.0 * r_primal && pen > 1e-6 {
                pen /= 2.0;
                u *= 2.0;
            }
        }
    }

    let value = c.dot(&x);
    SolveOutcome {
        x,
        value,
        dev_bound: best_bound,
        converged,
        iterations,
    }
}

/// Result of [`maximize_linear`].
#[derive(Debug, Clone)]
pub struct LinearOptimum {
    pub sigma: DensityMatrix,
    pub value: f64,
    /// Certified bound on the distance of `value` to the true optimum;
    /// meaningful only when `certified` is set.
    pub gap_bound: f64,
    pub certified: bool,
    pub iterations: usize,
}

/// Maximize <C, sigma> over all states sharing rho's k-marginals.
pub fn maximize_linear(
    c: &Operator,
    rho: &DensityMatrix,
    k: usize,
    config: &CertConfig,
) -> Result<LinearOptimum> {
    config.validate()?;
    if c.profile() != rho.profile() {
        return Err(Error::BadParameter("profiles differ".into()));
    }
    let herm = c.hermiticity_defect();
    if herm > 1e-12 {
        return Err(Error::NotHermitian { max_dev: herm });
    }
    let slice = MarginalSlice::new(rho, k)?;
    let c_coords = hermitian::encode(c.matrix());
    let outcome = solve_linear_max(
        &slice,
        &c_coords,
        &SolveOptions {
            max_iter: config.max_iter,
            certify_below: None,
            tol_gap: config.tol_gap,
            slack_delta: 0.0,
        },
    );
    let sigma = DensityMatrix::from_matrix_clamped(
        hermitian::decode(outcome.x.as_slice(), rho.dim()),
        rho.profile().clone(),
    )?;
    let value = (c.matrix().adjoint() * sigma.matrix()).trace().re;
    let c_rho = c_coords.dot(&slice.rho_coords);
    let gap_bound = ((c_rho + outcome.dev_bound) - value).max(0.0);
    Ok(LinearOptimum {
        sigma,
        value,
        gap_bound,
        certified: outcome.converged,
        iterations: outcome.iterations,
    })
}

/// Round a solver iterate onto the exact-marginal slice and the PSD cone by
/// alternation, then check it against the witness gates.
fn round_to_witness(
    slice: &MarginalSlice,
    start: &DVector<f64>,
    rho: &DensityMatrix,
    k: usize,
    config: &CertConfig,
) -> Option<Witness> {
    let tol = Tolerances::default();
    let d = slice.d;
    let mut x = start.clone();
    slice.project_affine(&mut x);
    for _ in 0..50 {
        if min_eigenvalue_of_coords(&x, d) >= -tol.eps_psd {
            break;
        }
        x = psd_project(&x, d);
        slice.project_affine(&mut x);
    }
    let m = hermitian::decode(x.as_slice(), d);
    let sigma = DensityMatrix::new(Operator::new(m, rho.profile().clone()).ok()?).ok()?;
    let report = verify_witness(rho, &sigma, k, config).ok()?;
    if report.pass {
        Some(Witness {
            sigma,
            distance: report.distance,
            residual: report.max_marginal_residual,
        })
    } else {
        None
    }
}

/// Directional solver dispatching between the full-space slice and the
/// support-face compression.
enum DirectionEngine {
    Full {
        slice: MarginalSlice,
    },
    Faced {
        face: SupportFace,
        fslice: MarginalSlice,
        fkernel_dim: usize,
    },
}

struct DirectionOutcome {
    /// Achieved deviation <c, y - rho> at the iterate.
    dev: f64,
    /// Certified upper bound on the true sup deviation.
    bound: f64,
    /// Full-space coordinates to seed witness extraction, when the direction
    /// moved.
    x_full: Option<DVector<f64>>,
}

impl DirectionEngine {
    fn build(a: &DMatrix<f64>, rho: &DensityMatrix, k: usize) -> Result<Self> {
        match compatible_support_face(rho, k)? {
            Some(face) => {
                let (fslice, fkernel_dim) = MarginalSlice::on_face(a, &face, rho);
                Ok(DirectionEngine::Faced {
                    face,
                    fslice,
                    fkernel_dim,
                })
            }
            None => Ok(DirectionEngine::Full {
                slice: MarginalSlice::from_constraints(a, rho)?,
            }),
        }
    }

    fn annotation(&self) -> String {
        match self {
            DirectionEngine::Full { .. } => "full-space directional solves".into(),
            DirectionEngine::Faced {
                face, fkernel_dim, ..
            } => format!(
                "support-face reduction to dimension {} (direction space {})",
                face.r, fkernel_dim
            ),
        }
    }

    /// Certify (or refute) one kernel direction given by full-space unit
    /// coordinates.
    fn solve(
        &self,
        c: &DVector<f64>,
        config: &CertConfig,
        stop_below: Option<f64>,
    ) -> DirectionOutcome {
        match self {
            DirectionEngine::Full { slice } => {
                let outcome = solve_linear_max(
                    slice,
                    c,
                    &SolveOptions {
                        max_iter: config.max_iter,
                        certify_below: stop_below,
                        tol_gap: config.tol_gap,
                        slack_delta: 0.0,
                    },
                );
                DirectionOutcome {
                    dev: outcome.value - c.dot(&slice.rho_coords),
                    bound: outcome.dev_bound,
                    x_full: Some(outcome.x),
                }
            }
            DirectionEngine::Faced {
                face,
                fslice,
                fkernel_dim,
            } => {
                // slack picked up by compressing the compatible set
                let c_mat = hermitian::decode(c.as_slice(), face.basis.nrows());
                let extra = c.norm() * face.eps_sigma + c.dot(&face.rho_defect).abs();
                let compressed = face.basis.adjoint() * &c_mat * &face.basis;
                let c_face = hermitian::encode(
                    &((&compressed + compressed.adjoint()) * Complex64::new(0.5, 0.0)),
                );
                if *fkernel_dim == 0 {
                    // the face slice pins the compressed state outright
                    return DirectionOutcome {
                        dev: 0.0,
                        bound: c_face.norm() * face.delta + extra,
                        x_full: None,
                    };
                }
                let outcome = solve_linear_max(
                    fslice,
                    &c_face,
                    &SolveOptions {
                        max_iter: config.max_iter,
                        certify_below: stop_below.map(|t| (t - extra).max(1e-12)),
                        tol_gap: config.tol_gap,
                        slack_delta: face.delta,
                    },
                );
                let dev = outcome.value - c_face.dot(&fslice.rho_coords);
                // lift the iterate for witness extraction
                let m = hermitian::decode(outcome.x.as_slice(), face.r);
                let lifted = &face.basis * m * face.basis.adjoint();
                let x_full =
                    hermitian::encode(&((&lifted + lifted.adjoint()) * Complex64::new(0.5, 0.0)));
                DirectionOutcome {
                    dev,
                    bound: outcome.dev_bound + extra,
                    x_full: Some(x_full),
                }
            }
        }
    }
}

/// Coherence-pair screen directions: normalized symmetric and antisymmetric
/// units between basis tuples differing on more than k parties. All are exact
/// kernel elements.
fn pair_screen_directions(profile: &DimProfile, k: usize, cap: usize) -> Vec<DMatrix<Complex64>> {
    let d = profile.total_dim();
    let n = profile.parties();
    let mut out = Vec::new();
    'outer: for p in 0..d {
        let pd = profile.decode(p);
        for q in (p + 1)..d {
            let qd = profile.decode(q);
            let diff = pd.iter().zip(&qd).filter(|(a, b)| a != b).count();
            if diff < k + 1 || diff > n {
                continue;
            }
            let half = Complex64::new(1.0 / SQRT2, 0.0);
            let mut sym = DMatrix::zeros(d, d);
            sym[(p, q)] = half;
            sym[(q, p)] = half;
            out.push(sym);
            let ihalf = Complex64::new(0.0, 1.0 / SQRT2);
            let mut anti = DMatrix::zeros(d, d);
            anti[(p, q)] = ihalf;
            anti[(q, p)] = -ihalf;
            out.push(anti);
            if out.len() >= cap {
                break 'outer;
            }
        }
    }
    out
}

/// Screen a list of directions for a strictly positive feasible step; returns
/// the first (by index) valid witness. Both signs of every direction are
/// tried.
fn screen_for_witness(
    rho: &DensityMatrix,
    k: usize,
    config: &CertConfig,
    directions: &[DMatrix<Complex64>],
) -> Option<Witness> {
    let cache = RhoEig::new(rho);
    let steps: Vec<(usize, f64, f64)> = directions
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let plus = feasible_step_with_cache(rho, &cache, m);
            let minus_m = -m;
            let minus = feasible_step_with_cache(rho, &cache, &minus_m);
            (i, plus, minus)
        })
        .collect();
    for (i, plus, minus) in steps {
        for (t, sign) in [(plus, 1.0f64), (minus, -1.0f64)] {
            if t < config.witness_min_dist {
                continue;
            }
            let m = rho.matrix() + &directions[i] * Complex64::new(sign * t, 0.0);
            let sigma = match DensityMatrix::from_matrix_clamped(m, rho.profile().clone()) {
                Ok(s) => s,
                Err(_) => continue,
            };
            if let Ok(report) = verify_witness(rho, &sigma, k, config) {
                if report.pass {
                    return Some(Witness {
                        sigma,
                        distance: report.distance,
                        residual: report.max_marginal_residual,
                    });
                }
            }
        }
    }
    None
}

fn not_uda(witness: Witness, mode: CertMode, config: &CertConfig, note: &str) -> UdaVerdict {
    UdaVerdict {
        status: UdaStatus::NotUda,
        witness: Some(witness),
        evidence: Vec::new(),
        mode,
        config: config.clone(),
        annotation: Some(note.into()),
    }
}

/// Complete certification: screens for cheap witnesses, then certifies the
/// directional suprema over the whole kernel basis. Returns Uda only when
/// every directional deviation is certified below the threshold.
pub fn certify_uda(rho: &DensityMatrix, k: usize, config: &CertConfig) -> Result<UdaVerdict> {
    config.validate()?;
    let n = rho.profile().parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let dim = kernel_dim_formula(rho.profile(), k)?;
    if dim > config.kernel_budget {
        return Err(Error::KernelBudget {
            dim,
            budget: config.kernel_budget,
        });
    }
    let kernel = correlation_kernel(rho.profile(), k)?;
    let a = marginal_constraint_matrix(rho.profile(), k)?;
    let slice = MarginalSlice::from_constraints(&a, rho)?;

    // fast screen: coherence pairs, then the kernel basis itself
    let mut screen_dirs = pair_screen_directions(rho.profile(), k, config.screen_dir_cap);
    screen_dirs.extend(kernel.iter().map(|cm| cm.op().matrix().clone()));
    if let Some(witness) = screen_for_witness(rho, k, config, &screen_dirs) {
        return Ok(not_uda(
            witness,
            CertMode::Full,
            config,
            "witness found by feasible-step screen",
        ));
    }
    drop(screen_dirs);

    // complete phase: certify sup and inf along every basis direction
    let engine = DirectionEngine::build(&a, rho, k)?;
    let outcomes: Vec<(DirectionOutcome, DirectionOutcome)> = (0..kernel.len())
        .into_par_iter()
        .map(|i| {
            let c_plus = DVector::from_column_slice(kernel.coords().column(i).as_slice());
            let c_minus = -&c_plus;
            let stop = Some(config.uda_threshold * 0.9);
            let sup = engine.solve(&c_plus, config, stop);
            let inf = engine.solve(&c_minus, config, stop);
            (sup, inf)
        })
        .collect();

    let mut evidence = Vec::with_capacity(kernel.len());
    for (sup, inf) in &outcomes {
        evidence.push(DirectionReport {
            sup_dev: sup.dev,
            sup_bound: sup.bound,
            inf_dev: inf.dev,
            inf_bound: inf.bound,
        });
    }

    let all_certified = evidence
        .iter()
        .all(|e| e.certified_below(config.uda_threshold));
    if all_certified {
        return Ok(UdaVerdict {
            status: UdaStatus::Uda,
            witness: None,
            evidence,
            mode: CertMode::Full,
            config: config.clone(),
            annotation: Some(engine.annotation()),
        });
    }

    // some direction moved: extract a witness from the largest deviations
    let mut candidates: Vec<(f64, usize, bool)> = Vec::new();
    for (i, e) in evidence.iter().enumerate() {
        if e.sup_dev > config.uda_threshold {
            candidates.push((e.sup_dev, i, true));
        }
        if e.inf_dev > config.uda_threshold {
            candidates.push((e.inf_dev, i, false));
        }
    }
    candidates.sort_by(|a, b| (b.0, b.1).partial_cmp(&(a.0, a.1)).unwrap());
    for (_, i, is_sup) in &candidates {
        let outcome = if *is_sup {
            &outcomes[*i].0
        } else {
            &outcomes[*i].1
        };
        if let Some(x) = &outcome.x_full {
            if let Some(witness) = round_to_witness(&slice, x, rho, k, config) {
                return Ok(UdaVerdict {
                    status: UdaStatus::NotUda,
                    witness: Some(witness),
                    evidence,
                    mode: CertMode::Full,
                    config: config.clone(),
                    annotation: Some("witness extracted from a directional optimizer".into()),
                });
            }
        }
    }

    let uncertified = evidence
        .iter()
        .filter(|e| !e.certified_below(config.uda_threshold))
        .count();
    Ok(UdaVerdict {
        status: UdaStatus::Inconclusive,
        witness: None,
        evidence,
        mode: CertMode::Full,
        config: config.clone(),
        annotation: Some(format!(
            "{uncertified} of {} directions not certified and no witness verified ({})",
            kernel.len(),
            engine.annotation()
        )),
    })
}

/// Sampled certification: the screen plus seeded random kernel directions,
/// each optimized for a counterexample. Never returns Uda; a clean run is
/// reported as Inconclusive and annotated UDA-consistent.
pub fn certify_uda_sampled(
    rho: &DensityMatrix,
    k: usize,
    n_dirs: usize,
    config: &CertConfig,
) -> Result<UdaVerdict> {
    config.validate()?;
    let n = rho.profile().parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let a = marginal_constraint_matrix(rho.profile(), k)?;
    let slice = MarginalSlice::from_constraints(&a, rho)?;

    // screen: coherence pairs always, the kernel basis when it fits the budget
    let mut screen_dirs = pair_screen_directions(rho.profile(), k, config.screen_dir_cap);
    let mut basis: Option<KernelBasis> = None;
    if kernel_dim_formula(rho.profile(), k)? <= config.kernel_budget {
        let kb = correlation_kernel(rho.profile(), k)?;
        screen_dirs.extend(kb.iter().map(|cm| cm.op().matrix().clone()));
        basis = Some(kb);
    }
    let screened = screen_dirs.len();
    if let Some(witness) = screen_for_witness(rho, k, config, &screen_dirs) {
        return Ok(not_uda(
            witness,
            CertMode::Sampled,
            config,
            "witness found by feasible-step screen",
        ));
    }
    drop(basis);
    drop(screen_dirs);
    let engine = DirectionEngine::build(&a, rho, k)?;

    // seeded random unit directions inside the kernel
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let ncoords = hermitian::coords_len(rho.dim());
    let mut directions: Vec<DVector<f64>> = Vec::with_capacity(n_dirs);
    while directions.len() < n_dirs {
        let mut g = DVector::from_fn(ncoords, |_, _| {
            use rand_distr::Distribution;
            rand_distr::StandardNormal.sample(&mut rng)
        });
        slice.project_kernel(&mut g);
        let norm = g.norm();
        if norm > 1e-8 {
            g /= norm;
            directions.push(g);
        }
    }

    let stop = Some(config.uda_threshold * 0.9);
    let chunk = rayon::current_num_threads().max(1) * 4;
    let mut checked = 0usize;
    let mut evidence = Vec::with_capacity(n_dirs);
    for block in directions.chunks(chunk) {
        let outcomes: Vec<DirectionOutcome> = block
            .par_iter()
            .map(|c| engine.solve(c, config, stop))
            .collect();
        for outcome in &outcomes {
            checked += 1;
            let dev = outcome.dev;
            evidence.push(DirectionReport {
                sup_dev: dev,
                sup_bound: outcome.bound,
                inf_dev: 0.0,
                inf_bound: f64::INFINITY,
            });
            if dev > config.uda_threshold {
                if let Some(x) = &outcome.x_full {
                    if let Some(witness) = round_to_witness(&slice, x, rho, k, config) {
                        return Ok(UdaVerdict {
                            status: UdaStatus::NotUda,
                            witness: Some(witness),
                            evidence,
                            mode: CertMode::Sampled,
                            config: config.clone(),
                            annotation: Some(format!(
                                "witness from random direction {checked} of {n_dirs}"
                            )),
                        });
                    }
                }
            }
        }
    }

    Ok(UdaVerdict {
        status: UdaStatus::Inconclusive,
        witness: None,
        evidence,
        mode: CertMode::Sampled,
        config: config.clone(),
        annotation: Some(format!(
            "UDA-consistent after {checked} directions (screened {screened} basis/pair directions)"
        )),
    })
}

/// Independent feasibility-search oracle: coordinate sweeps over the kernel
/// basis (when small) and Dykstra alternating projections from random
/// anchors. Used to cross-validate the certifier, never as the primary
/// decision.
pub fn brute_oracle_search(
    rho: &DensityMatrix,
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<Option<Witness>> {
    let config = CertConfig {
        seed,
        ..CertConfig::default()
    };
    let n = rho.profile().parties();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n });
    }
    let slice = MarginalSlice::new(rho, k)?;

    // coordinate sweep when the kernel is small, plus the pair coherences
    let mut dirs = pair_screen_directions(rho.profile(), k, config.screen_dir_cap);
    let dim = kernel_dim_formula(rho.profile(), k)?;
    if dim <= 64 {
        let kb = correlation_kernel(rho.profile(), k)?;
        dirs.extend(kb.iter().map(|cm| cm.op().matrix().clone()));
    }
    if let Some(w) = screen_for_witness(rho, k, &config, &dirs) {
        return Ok(Some(w));
    }
    drop(dirs);

    // Dykstra alternating projections between the slice and the PSD cone,
    // started from seeded random full-rank states
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let per_anchor = 400usize;
    let anchors = (budget / per_anchor).max(1);
    let d = rho.dim();
    let tol = Tolerances::default();
    for _ in 0..anchors {
        let tau = sampling::random_density(rho.profile(), d, &mut rng);
        let mut y = hermitian::encode(tau.matrix());
        let mut p = DVector::<f64>::zeros(y.len());
        let mut q = DVector::<f64>::zeros(y.len());
        let mut a = y.clone();
        for _ in 0..per_anchor {
            a = &y + &p;
            slice.project_affine(&mut a);
            p = &y + &p - &a;
            let b = psd_project(&(&a + &q), d);
            q = &a + &q - &b;
            let shift = (&y - &b).norm();
            y = b;
            if shift <= 1e-12 {
                break;
            }
        }
        // the affine-side iterate has exact marginals
        if min_eigenvalue_of_coords(&a, d) < -tol.eps_psd {
            continue;
        }
        let m = hermitian::decode(a.as_slice(), d);
        let sigma = match DensityMatrix::new(Operator::new(m, rho.profile().clone())?) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let report = verify_witness(rho, &sigma, k, &config)?;
        if report.pass {
            return Ok(Some(Witness {
                sigma,
                distance: report.distance,
                residual: report.max_marginal_residual,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::{all_diff_coherence, CoherenceTerm};
    use crate::states::{generalized_ghz, sigma_state, w_state, WParams};
    use approx::assert_relative_eq;

    fn ghz3() -> DensityMatrix {
        generalized_ghz(3, 0.5).unwrap().projector()
    }

    fn w3() -> DensityMatrix {
        w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap())
            .unwrap()
            .projector()
    }

    fn ghz_coherence(scale: f64) -> CorrelationMatrix {
        all_diff_coherence(
            &DimProfile::n_qubits(3).unwrap(),
            &[CoherenceTerm {
                row: vec![0, 0, 0],
                col: vec![1, 1, 1],
                coeff: Complex64::new(scale, 0.0),
            }],
        )
        .unwrap()
    }

    #[test]
    fn feasible_step_closed_forms() {
        // maximally mixed two-qubit state against the antidiagonal coherence
        let p = DimProfile::n_qubits(2).unwrap();
        let mixed = DensityMatrix::new(
            Operator::new(
                DMatrix::identity(4, 4) * Complex64::new(0.25, 0.0),
                p.clone(),
            )
            .unwrap(),
        )
        .unwrap();
        let chi = all_diff_coherence(
            &p,
            &[CoherenceTerm {
                row: vec![0, 0],
                col: vec![1, 1],
                coeff: Complex64::new(0.5, 0.0),
            }],
        )
        .unwrap();
        let t = max_feasible_step(&mixed, &chi).unwrap();
        assert_relative_eq!(t, 0.5, epsilon = 1e-7);

        // GHZ against its own coherence: blocked one way, open to t = 1 the
        // other way
        let rho = ghz3();
        let plus = ghz_coherence(1.0);
        assert_eq!(max_feasible_step(&rho, &plus).unwrap(), 0.0);
        let minus = ghz_coherence(-1.0);
        let t = max_feasible_step(&rho, &minus).unwrap();
        assert_relative_eq!(t, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn feasible_step_rejects_zero_direction() {
        let p = DimProfile::n_qubits(3).unwrap();
        let zero = all_diff_coherence(&p, &[]).unwrap();
        assert!(max_feasible_step(&ghz3(), &zero).is_err());
    }

    #[test]
    fn maximize_identity_objective_is_trace() {
        let rho = w3();
        let config = CertConfig::default();
        let c = Operator::identity(rho.profile().clone());
        let out = maximize_linear(&c, &rho, 2, &config).unwrap();
        assert_relative_eq!(out.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn maximize_along_ghz_projector() {
        let rho = ghz3();
        let config = CertConfig::default();
        let proj = rho.op().clone();
        // the projector itself is maximized by rho
        let out = maximize_linear(&proj, &rho, 2, &config).unwrap();
        assert!((out.value - 1.0).abs() < 1e-4, "value {}", out.value);
        // its negation is maximized at the opposite end of the coherence
        // segment, reaching zero
        let neg = Operator::new(-proj.matrix(), rho.profile().clone()).unwrap();
        let out = maximize_linear(&neg, &rho, 2, &config).unwrap();
        assert!(out.value.abs() < 1e-4, "value {}", out.value);
    }

    #[test]
    fn witness_verification_examples() {
        let rho = ghz3();
        let config = CertConfig::default();
        // classical mixture shares all two-party marginals
        let p = rho.profile().clone();
        let mut m = DMatrix::zeros(8, 8);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(7, 7)] = Complex64::new(0.5, 0.0);
        let mixture = DensityMatrix::new(Operator::new(m, p).unwrap()).unwrap();
        let report = verify_witness(&rho, &mixture, 2, &config).unwrap();
        assert!(report.pass);
        assert_relative_eq!(report.distance, 1.0 / 2.0_f64.sqrt(), epsilon = 1e-12);

        // the state itself fails on distance
        let report = verify_witness(&rho, &rho, 2, &config).unwrap();
        assert!(!report.pass);
        assert!(report.distance < 1e-12);

        // maximally mixed fails on marginals against W
        let w = w3();
        let mixed = DensityMatrix::new(
            Operator::new(
                DMatrix::identity(8, 8) * Complex64::new(0.125, 0.0),
                w.profile().clone(),
            )
            .unwrap(),
        )
        .unwrap();
        let report = verify_witness(&w, &mixed, 2, &config).unwrap();
        assert!(!report.pass);
        assert!(report.max_marginal_residual > 1e-2);
    }

    #[test]
    fn certify_ghz_not_uda_with_screen() {
        let rho = ghz3();
        let config = CertConfig::default();
        let verdict = certify_uda(&rho, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
        let w = verdict.witness.expect("witness");
        assert!(w.distance >= 0.7);
        let report = verify_witness(&rho, &w.sigma, 2, &config).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn certify_generalized_ghz_not_uda() {
        let rho = generalized_ghz(3, 0.3).unwrap().projector();
        let config = CertConfig::default();
        let verdict = certify_uda(&rho, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
    }

    #[test]
    fn certify_w_uda_full_mode() {
        let rho = w3();
        let config = CertConfig::default();
        let verdict = certify_uda(&rho, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::Uda);
        assert_eq!(verdict.evidence.len(), 27);
        for e in &verdict.evidence {
            assert!(e.certified_below(config.uda_threshold));
        }
    }

    #[test]
    fn certify_sigma_uda_full_mode() {
        let rho = sigma_state().unwrap();
        let config = CertConfig::default();
        let verdict = certify_uda(&rho, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::Uda);
    }

    #[test]
    fn certify_pure_product_k1() {
        // |0> (x) |+>: pure one-party marginals force the product
        let p = DimProfile::n_qubits(2).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        let amps = DVector::from_vec(vec![
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let rho = crate::tensor::Ket::new(amps, p).unwrap().projector();
        let verdict = certify_uda(&rho, 1, &CertConfig::default()).unwrap();
        assert_eq!(verdict.status, UdaStatus::Uda);
    }

    #[test]
    fn sampled_mode_finds_ghz_witness_with_zero_dirs() {
        let rho = ghz3();
        let verdict = certify_uda_sampled(&rho, 2, 0, &CertConfig::default()).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
    }

    #[test]
    fn sampled_mode_finds_padded_ghz_witness() {
        let ghz = generalized_ghz(3, 0.5).unwrap();
        let zero = crate::tensor::Ket::basis(DimProfile::new(vec![2]).unwrap(), &[0]).unwrap();
        let rho = ghz.tensor(&zero).unwrap().projector();
        let verdict = certify_uda_sampled(&rho, 2, 200, &CertConfig::default()).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
    }

    #[test]
    fn sampled_mode_never_claims_uda() {
        let rho = w3();
        let verdict = certify_uda_sampled(&rho, 2, 20, &CertConfig::default()).unwrap();
        assert_eq!(verdict.status, UdaStatus::Inconclusive);
        assert!(verdict
            .annotation
            .as_deref()
            .unwrap()
            .contains("UDA-consistent"));
    }

    #[test]
    fn oracle_agrees_on_small_cases() {
        // finds the GHZ witness
        let found = brute_oracle_search(&ghz3(), 2, 2000, 0).unwrap();
        assert!(found.is_some());
        let w = found.unwrap();
        let report = verify_witness(&ghz3(), &w.sigma, 2, &CertConfig::default()).unwrap();
        assert!(report.pass);

        // finds nothing for W
        let none = brute_oracle_search(&w3(), 2, 2000, 0).unwrap();
        assert!(none.is_none());

        // the maximally mixed state is far from unique
        let p = DimProfile::n_qubits(3).unwrap();
        let mixed = DensityMatrix::new(
            Operator::new(DMatrix::identity(8, 8) * Complex64::new(0.125, 0.0), p).unwrap(),
        )
        .unwrap();
        let found = brute_oracle_search(&mixed, 2, 2000, 0).unwrap();
        assert!(found.is_some());
    }

    #[test]
    fn full_rank_states_are_never_unique() {
        // the maximally mixed state admits witnesses in every kernel
        // direction; the screen finds one immediately
        let p = DimProfile::n_qubits(3).unwrap();
        let mixed = DensityMatrix::new(
            Operator::new(DMatrix::identity(8, 8) * Complex64::new(0.125, 0.0), p).unwrap(),
        )
        .unwrap();
        let verdict = certify_uda(&mixed, 2, &CertConfig::default()).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
        let w = verdict.witness.unwrap();
        assert!(w.distance >= 1e-4);
    }

    #[test]
    fn verdicts_are_deterministic() {
        let rho = w3();
        let config = CertConfig::default();
        let v1 = certify_uda(&rho, 2, &config).unwrap();
        let v2 = certify_uda(&rho, 2, &config).unwrap();
        assert_eq!(v1.status, v2.status);
        let s1 = serde_json::to_string(&v1.evidence).unwrap();
        let s2 = serde_json::to_string(&v2.evidence).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn lu_invariance_of_verdicts() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let config = CertConfig::default();

        let w = w3();
        let us: Vec<_> = (0..3)
            .map(|_| sampling::random_unitary(2, &mut rng))
            .collect();
        let moved = crate::tensor::apply_local_unitaries(&w, &us).unwrap();
        let verdict = certify_uda(&moved, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::Uda);

        let ghz = ghz3();
        let us: Vec<_> = (0..3)
            .map(|_| sampling::random_unitary(2, &mut rng))
            .collect();
        let moved = crate::tensor::apply_local_unitaries(&ghz, &us).unwrap();
        let verdict = certify_uda(&moved, 2, &config).unwrap();
        assert_eq!(verdict.status, UdaStatus::NotUda);
        let w_moved = verdict.witness.unwrap();
        let report = verify_witness(&moved, &w_moved.sigma, 2, &config).unwrap();
        assert!(report.pass);

        // conjugating the original witness by the same unitaries gives a
        // witness for the transformed state (marginal covariance)
        let original = certify_uda(&ghz, 2, &config).unwrap();
        let w0 = original.witness.unwrap();
        let transported = crate::tensor::apply_local_unitaries(&w0.sigma, &us).unwrap();
        let report = verify_witness(&moved, &transported, 2, &config).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn kernel_budget_guard() {
        let config = CertConfig {
            kernel_budget: 10,
            ..CertConfig::default()
        };
        let err = certify_uda(&w3(), 2, &config);
        assert!(matches!(
            err,
            Err(Error::KernelBudget {
                dim: 27,
                budget: 10
            })
        ));
    }

    #[test]
    fn config_validation() {
        let mut config = CertConfig::default();
        config.uda_threshold = config.tol_gap / 2.0;
        assert!(config.validate().is_err());
        let config = CertConfig {
            tol_feas: 0.0,
            ..CertConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
