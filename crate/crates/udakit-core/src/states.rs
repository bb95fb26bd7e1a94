//! Concrete state families and the pipeline composing genuinely entangled
//! states that stay uniquely determined by their k-body marginals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dims::{DimProfile, SubsetSpec};
use crate::products::{kc_compose, kron_compose};
use crate::tensor::{DensityMatrix, Ket, Operator};
use crate::{Error, Result};

/// Parameters of the three-qubit W-type family
/// sqrt(a)|001> + sqrt(b)|010> + sqrt(c)|100> + sqrt(d)|000|, d = 1-(a+b+c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::BadParameter(
                "W-type weights a, b, c must be strictly positive".into(),
            ));
        }
        let sum = a + b + c;
        if sum > 1.0 + 1e-12 {
            return Err(Error::BadParameter(format!(
                "W-type weights sum to {sum} > 1"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn d(&self) -> f64 {
        (1.0 - (self.a + self.b + self.c)).max(0.0)
    }
}

/// W-type ket on three qubits.
pub fn w_state(params: &WParams) -> Result<Ket> {
    let profile = DimProfile::n_qubits(3)?;
    let mut amps = DVector::zeros(8);
    amps[0] = Complex64::new(params.d().sqrt(), 0.0); // |000>
    amps[1] = Complex64::new(params.a.sqrt(), 0.0); // |001>
    amps[2] = Complex64::new(params.b.sqrt(), 0.0); // |010>
    amps[4] = Complex64::new(params.c.sqrt(), 0.0); // |100>
    Ket::new(amps, profile)
}

/// Generalized GHZ ket sqrt(lambda)|0..0> + sqrt(1-lambda)|1..1> on n qubits.
pub fn generalized_ghz(n: usize, lambda: f64) -> Result<Ket> {
    if n < 2 {
        return Err(Error::BadParameter("need at least two qubits".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::BadParameter(format!(
            "lambda = {lambda} must lie strictly inside (0, 1)"
        )));
    }
    let profile = DimProfile::n_qubits(n)?;
    let d = profile.total_dim();
    let mut amps = DVector::zeros(d);
    amps[0] = Complex64::new(lambda.sqrt(), 0.0);
    amps[d - 1] = Complex64::new((1.0 - lambda).sqrt(), 0.0);
    Ket::new(amps, profile)
}

/// The ket (1/2)|010> + (1/2)|110> + (1/sqrt(2))|001>.
pub fn xi_ket() -> Result<Ket> {
    let profile = DimProfile::n_qubits(3)?;
    let mut amps = DVector::zeros(8);
    amps[2] = Complex64::new(0.5, 0.0); // |010>
    amps[6] = Complex64::new(0.5, 0.0); // |110>
    amps[1] = Complex64::new(1.0 / 2.0_f64.sqrt(), 0.0); // |001>
    Ket::new(amps, profile)
}

/// The rank-two three-qubit mixture (2/3)|xi><xi| + (1/3)|111><111|.
pub fn sigma_state() -> Result<DensityMatrix> {
    let xi = xi_ket()?;
    let profile = DimProfile::n_qubits(3)?;
    let ones = Ket::basis(profile.clone(), &[1, 1, 1])?;
    let m = xi.projector().matrix() * Complex64::new(2.0 / 3.0, 0.0)
        + ones.projector().matrix() * Complex64::new(1.0 / 3.0, 0.0);
    DensityMatrix::new(Operator::new(m, profile)?)
}

/// Parameters of the qudit extension of [`sigma_state`]: local dimension
/// d + 1 and weights p_1 > 0, p_m >= 0 (m = 2..d) summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub d: usize,
    /// `p[0]` = p_1, `p[m-1]` = p_m.
    pub p: Vec<f64>,
}

impl BetaParams {
    pub fn new(d: usize, p: Vec<f64>) -> Result<Self> {
        if d < 1 {
            return Err(Error::BadParameter("need d >= 1".into()));
        }
        if p.len() != d {
            return Err(Error::BadParameter(format!(
                "expected {} weights, got {}",
                d,
                p.len()
            )));
        }
        if !p[0].is_finite() || p[0] <= 0.0 {
            return Err(Error::BadParameter("p_1 must be strictly positive".into()));
        }
        if p[1..].iter().any(|&w| w < 0.0) {
            return Err(Error::BadParameter("weights must be nonnegative".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadParameter(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { d, p })
    }
}

/// beta = p_1 sigma + sum_{m=2}^d p_m |mmm><mmm| on three parties of local
/// dimension d + 1, with sigma embedded on levels {0, 1}.
pub fn beta_state(params: &BetaParams) -> Result<DensityMatrix> {
    let dl = params.d + 1;
    let profile = DimProfile::new(vec![dl; 3])?;
    let dim = profile.total_dim();
    let sigma = sigma_state()?;
    let qubit_profile = sigma.profile().clone();

    let mut m = DMatrix::zeros(dim, dim);
    // embed sigma on levels {0, 1} of each party
    let qd = qubit_profile.total_dim();
    for r in 0..qd {
        let rd = qubit_profile.decode(r);
        let rr = profile.encode(&rd);
        for c in 0..qd {
            let cd = qubit_profile.decode(c);
            let cc = profile.encode(&cd);
            m[(rr, cc)] += sigma.matrix()[(r, c)] * Complex64::new(params.p[0], 0.0);
        }
    }
    for level in 2..=params.d {
        let flat = profile.encode(&[level, level, level]);
        m[(flat, flat)] += Complex64::new(params.p[level - 1], 0.0);
    }
    DensityMatrix::new(Operator::new(m, profile)?)
}

/// True when the ket is entangled across every bipartition: the reshaped
/// amplitude matrix has numerical rank at least 2 on each of the
/// 2^(n-1) - 1 cuts (singular-value threshold 1e-8).
pub fn is_gme_pure(psi: &Ket) -> bool {
    let n = psi.profile().parties();
    if n < 2 {
        return false;
    }
    // bipartitions = subsets containing party 1
    for mask in 0u32..(1u32 << (n - 1)) {
        let mut left = vec![1usize];
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                left.push(i + 1);
            }
        }
        if left.len() == n {
            continue;
        }
        let left_spec = SubsetSpec::new(left).expect("nonempty increasing");
        if schmidt_rank_at_least_two(psi, &left_spec) {
            continue;
        }
        return false;
    }
    true
}

fn schmidt_rank_at_least_two(psi: &Ket, left: &SubsetSpec) -> bool {
    let n = psi.profile().parties();
    let right = left.complement(n).expect("proper bipartition");
    // permute so the left block comes first, then reshape
    let mut perm = vec![0usize; n];
    for (pos, &g) in left.indices().iter().enumerate() {
        perm[g - 1] = pos + 1;
    }
    for (pos, &e) in right.indices().iter().enumerate() {
        perm[e - 1] = left.len() + pos + 1;
    }
    let moved = psi.permute(&perm).expect("valid permutation");
    let dl = psi.profile().restrict(left).total_dim();
    let dr = psi.profile().restrict(&right).total_dim();
    let amps = moved.amplitudes();
    let m = DMatrix::from_fn(dl, dr, |i, j| amps[i * dr + j]);
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.len() >= 2 && sv[1] > 1e-8
}

/// State plus the flags the composition rules track.
#[derive(Debug, Clone)]
pub struct GmeUdaState {
    density: DensityMatrix,
    ket: Option<Ket>,
    gme: bool,
    uda_k: usize,
    provenance: Vec<String>,
}

impl GmeUdaState {
    /// Pure input: genuine multipartite entanglement is checked here, the
    /// uniqueness order is the caller's assertion.
    pub fn pure(ket: Ket, uda_k: usize) -> Result<Self> {
        let gme = is_gme_pure(&ket);
        Ok(Self {
            density: ket.projector(),
            ket: Some(ket),
            gme,
            uda_k,
            provenance: vec!["input(pure)".into()],
        })
    }

    /// Mixed input with asserted flags; mixed-state genuine entanglement is
    /// not certified here.
    pub fn mixed(density: DensityMatrix, uda_k: usize, gme: bool) -> Self {
        Self {
            density,
            ket: None,
            gme,
            uda_k,
            provenance: vec!["input(mixed)".into()],
        }
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.density
    }

    pub fn ket(&self) -> Option<&Ket> {
        self.ket.as_ref()
    }

    pub fn is_pure(&self) -> bool {
        self.ket.is_some()
    }

    pub fn gme(&self) -> bool {
        self.gme
    }

    pub fn uda_k(&self) -> usize {
        self.uda_k
    }

    pub fn profile(&self) -> &DimProfile {
        self.density.profile()
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }
}

/// Composition mode for the flagged pipeline; plain tensoring is excluded
/// because it never produces genuine entanglement across the factor cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GmeComposeMode {
    Kron,
    /// Merge the first l party pairs, 1 <= l <= min(m, n).
    Kc(usize),
}

/// Compose two flagged states. Requires both inputs flagged genuinely
/// entangled and uniquely determined, with at least one pure; the output
/// carries uniqueness order max(k_a, k_b), the genuine-entanglement flag, and
/// purity only when both inputs are pure. Pure outputs are re-checked.
pub fn compose_gme_uda(
    alpha: &GmeUdaState,
    beta: &GmeUdaState,
    mode: GmeComposeMode,
) -> Result<GmeUdaState> {
    if !alpha.gme || !beta.gme {
        return Err(Error::BadParameter(
            "both inputs must be flagged genuinely entangled".into(),
        ));
    }
    if !alpha.is_pure() && !beta.is_pure() {
        return Err(Error::BadParameter(
            "at least one input must be pure".into(),
        ));
    }
    if let GmeComposeMode::Kc(l) = mode {
        let lim = alpha.profile().parties().min(beta.profile().parties());
        if l < 1 || l > lim {
            return Err(Error::BadParameter(format!(
                "merge count l = {l} out of range 1..={lim}"
            )));
        }
    }

    let density = match mode {
        GmeComposeMode::Kron => kron_compose(&alpha.density, &beta.density)?.state,
        GmeComposeMode::Kc(l) => kc_compose(&alpha.density, &beta.density, l)?.state,
    };
    let uda_k = alpha.uda_k.max(beta.uda_k);

    let ket = if alpha.is_pure() && beta.is_pure() {
        // recover the composite ket from the rank-one density
        let (evals, evecs) = crate::eigen::hermitian_eigen(density.matrix());
        let top = evals.len() - 1;
        let v = DVector::from_column_slice(evecs.column(top).as_slice());
        let ket = Ket::with_tolerances(
            v,
            density.profile().clone(),
            &crate::Tolerances {
                tol_norm: 1e-9,
                ..Default::default()
            },
        )?
        .phase_fixed();
        if !is_gme_pure(&ket) {
            return Err(Error::Numerical(
                "pure composite failed the genuine-entanglement re-check".into(),
            ));
        }
        Some(ket)
    } else {
        None
    };

    let mut provenance = alpha.provenance.clone();
    provenance.push(match mode {
        GmeComposeMode::Kron => format!(
            "kron with {:?} -> {:?}",
            beta.profile().dims(),
            density.profile().dims()
        ),
        GmeComposeMode::Kc(l) => format!(
            "kc(l={l}) with {:?} -> {:?}",
            beta.profile().dims(),
            density.profile().dims()
        ),
    });

    Ok(GmeUdaState {
        density,
        ket,
        gme: true,
        uda_k,
        provenance,
    })
}

/// One step of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineStep {
    pub mode: GmeComposeMode,
    pub partner: GmeUdaState,
}

/// Fold [`compose_gme_uda`] over a schedule, reporting the failing step on
/// error. The provenance chain of the result records each composition.
pub fn run_pipeline(seed: GmeUdaState, schedule: Vec<PipelineStep>) -> Result<GmeUdaState> {
    let mut current = seed;
    for (idx, step) in schedule.into_iter().enumerate() {
        current = compose_gme_uda(&current, &step.partner, step.mode)
            .map_err(|e| Error::BadParameter(format!("pipeline step {}: {e}", idx + 1)))?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::combinations;
    use crate::tensor::partial_trace;
    use approx::assert_relative_eq;

    #[test]
    fn w_state_examples() {
        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()).unwrap();
        let s = 1.0 / 3.0_f64.sqrt();
        assert_relative_eq!(w.amplitudes()[1].re, s, epsilon = 1e-15);
        assert_relative_eq!(w.amplitudes()[2].re, s, epsilon = 1e-15);
        assert_relative_eq!(w.amplitudes()[4].re, s, epsilon = 1e-15);
        assert_relative_eq!(w.amplitudes()[0].re, 0.0, epsilon = 1e-15);

        let even = w_state(&WParams::new(0.25, 0.25, 0.25).unwrap()).unwrap();
        let norm: f64 = even.amplitudes().iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-15);
        assert_relative_eq!(even.amplitudes()[0].re, 0.5, epsilon = 1e-15);

        assert!(WParams::new(0.0, 0.5, 0.4).is_err());
        assert!(WParams::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn ghz_examples() {
        let ghz = generalized_ghz(3, 0.5).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(ghz.amplitudes()[0].re, s, epsilon = 1e-15);
        assert_relative_eq!(ghz.amplitudes()[7].re, s, epsilon = 1e-15);

        let bell = generalized_ghz(2, 0.5).unwrap();
        assert_eq!(bell.profile().dims(), &[2, 2]);

        assert!(generalized_ghz(3, 0.0).is_err());
        assert!(generalized_ghz(3, 1.0).is_err());
        assert!(generalized_ghz(1, 0.5).is_err());
    }

    #[test]
    fn ghz_marginals_match_classical_mixture() {
        for (n, lambda) in [(3usize, 0.5f64), (3, 0.3), (4, 0.7)] {
            let ghz = generalized_ghz(n, lambda).unwrap().projector();
            let profile = DimProfile::n_qubits(n).unwrap();
            let d = profile.total_dim();
            let mut mix = DMatrix::zeros(d, d);
            mix[(0, 0)] = Complex64::new(lambda, 0.0);
            mix[(d - 1, d - 1)] = Complex64::new(1.0 - lambda, 0.0);
            let mix = DensityMatrix::new(Operator::new(mix, profile).unwrap()).unwrap();
            for subset in combinations(n, n - 1) {
                let a = partial_trace(ghz.op(), &subset).unwrap();
                let b = partial_trace(mix.op(), &subset).unwrap();
                let dev = (a.matrix() - b.matrix())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(dev <= 1e-14);
            }
        }
    }

    #[test]
    fn xi_and_sigma_examples() {
        let xi = xi_ket().unwrap();
        let norm: f64 = xi.amplitudes().iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-15);

        let sigma = sigma_state().unwrap();
        assert_relative_eq!(sigma.op().trace().re, 1.0, epsilon = 1e-14);
        let ev = sigma.op().eigenvalues_hermitian();
        assert_relative_eq!(ev[7], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[6], 1.0 / 3.0, epsilon = 1e-12);
        for v in &ev[..6] {
            assert!(v.abs() < 1e-12);
        }
        assert_relative_eq!(sigma.purity(), 5.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_examples() {
        // d = 1 reduces to sigma
        let beta = beta_state(&BetaParams::new(1, vec![1.0]).unwrap()).unwrap();
        let sigma = sigma_state().unwrap();
        assert!(beta.frobenius_distance(&sigma) < 1e-14);

        // d = 2 on qutrits: rank 3, trace 1
        let beta = beta_state(&BetaParams::new(2, vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(beta.profile().dims(), &[3, 3, 3]);
        assert_relative_eq!(beta.op().trace().re, 1.0, epsilon = 1e-14);
        let rank = beta
            .op()
            .eigenvalues_hermitian()
            .iter()
            .filter(|&&v| v > 1e-12)
            .count();
        assert_eq!(rank, 3);

        assert!(BetaParams::new(2, vec![0.0, 1.0]).is_err());
        assert!(BetaParams::new(2, vec![0.6, 0.6]).is_err());
    }

    #[test]
    fn beta_with_d1_has_sigma_bipartite_marginals() {
        let beta = beta_state(&BetaParams::new(1, vec![1.0]).unwrap()).unwrap();
        let sigma = sigma_state().unwrap();
        for subset in combinations(3, 2) {
            let a = partial_trace(beta.op(), &subset).unwrap();
            let b = partial_trace(sigma.op(), &subset).unwrap();
            let dev = (a.matrix() - b.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-14);
        }
    }

    #[test]
    fn gme_detection_examples() {
        let ghz = generalized_ghz(3, 0.5).unwrap();
        assert!(is_gme_pure(&ghz));

        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()).unwrap();
        assert!(is_gme_pure(&w));

        // |0> (x) Bell is product across the 1|23 cut
        let zero = Ket::basis(DimProfile::new(vec![2]).unwrap(), &[0]).unwrap();
        let bell = generalized_ghz(2, 0.5).unwrap();
        let prod = zero.tensor(&bell).unwrap();
        assert!(!is_gme_pure(&prod));
    }

    #[test]
    fn kron_of_gme_kets_stays_gme() {
        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()).unwrap();
        let ghz = generalized_ghz(3, 0.5).unwrap();
        for (a, b) in [(&w, &w), (&w, &ghz), (&ghz, &ghz)] {
            let sa = GmeUdaState::pure(a.clone(), 2).unwrap();
            let sb = GmeUdaState::pure(b.clone(), 2).unwrap();
            let out = compose_gme_uda(&sa, &sb, GmeComposeMode::Kron).unwrap();
            assert!(out.is_pure());
            assert!(is_gme_pure(out.ket().unwrap()));
        }
    }

    #[test]
    fn compose_flags_and_errors() {
        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()).unwrap();
        let wp = GmeUdaState::pure(w, 2).unwrap();
        let sigma = GmeUdaState::mixed(sigma_state().unwrap(), 2, true);

        // pure x mixed via partial merge
        let out = compose_gme_uda(&wp, &sigma, GmeComposeMode::Kc(1)).unwrap();
        assert_eq!(out.profile().dims(), &[4, 2, 2, 2, 2]);
        assert!(!out.is_pure());
        assert!(out.gme());
        assert_eq!(out.uda_k(), 2);

        // neither pure
        let err = compose_gme_uda(&sigma, &sigma, GmeComposeMode::Kron);
        assert!(err.is_err());

        // not flagged GME
        let dull = GmeUdaState::mixed(sigma_state().unwrap(), 2, false);
        assert!(compose_gme_uda(&wp, &dull, GmeComposeMode::Kron).is_err());
    }

    #[test]
    fn pipeline_profiles_and_errors() {
        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()).unwrap();
        let wp = GmeUdaState::pure(w, 2).unwrap();

        // empty schedule returns the seed unchanged
        let same = run_pipeline(wp.clone(), vec![]).unwrap();
        assert_eq!(same.profile().dims(), &[2, 2, 2]);

        // kron then partial merge
        let out = run_pipeline(
            wp.clone(),
            vec![
                PipelineStep {
                    mode: GmeComposeMode::Kron,
                    partner: wp.clone(),
                },
                PipelineStep {
                    mode: GmeComposeMode::Kc(1),
                    partner: wp.clone(),
                },
            ],
        )
        .unwrap();
        assert_eq!(out.profile().dims(), &[8, 4, 4, 2, 2]);
        assert!(out.is_pure());
        assert_eq!(out.provenance().len(), 3);

        // a step pairing two mixed states fails with its index
        let sigma = GmeUdaState::mixed(sigma_state().unwrap(), 2, true);
        let err = run_pipeline(
            sigma.clone(),
            vec![PipelineStep {
                mode: GmeComposeMode::Kron,
                partner: sigma,
            }],
        );
        match err {
            Err(Error::BadParameter(msg)) => assert!(msg.contains("step 1")),
            other => panic!("expected step error, got {other:?}"),
        }
    }
}
