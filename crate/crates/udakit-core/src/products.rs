//! The three composition products of two multipartite states.
//!
//! * [`tensor_compose`] — plain tensor product, m + n parties.
//! * [`kron_compose`] — pairwise party merge, max(m, n) parties whose first
//!   min(m, n) local dimensions multiply.
//! * [`kc_compose`] — merge only the first l party pairs, m + n - l parties.
//!
//! A merged party's local index is a * d_B + b (first-factor major), which is
//! exactly the row-major flat index of the pair, so merging is pure profile
//! relabeling once the parties are interleaved.

use crate::dims::{DimProfile, SubsetSpec};
use crate::tensor::{partial_trace, permute_subsystems, DensityMatrix, Operator};
use crate::{Error, Result};

/// Which factor each composite party carries, as (d_A, d_B) with 1 marking an
/// absent factor. Drives group reductions through the product's index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorLayout {
    pairs: Vec<(usize, usize)>,
}

impl FactorLayout {
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn tensor(dims_a: &DimProfile, dims_b: &DimProfile) -> Self {
        let mut pairs: Vec<(usize, usize)> = dims_a.dims().iter().map(|&d| (d, 1)).collect();
        pairs.extend(dims_b.dims().iter().map(|&d| (1, d)));
        Self { pairs }
    }

    /// Kronecker layout; requires len(dims_a) <= len(dims_b).
    pub fn kron(dims_a: &DimProfile, dims_b: &DimProfile) -> Self {
        let m = dims_a.parties();
        let pairs = dims_b
            .dims()
            .iter()
            .enumerate()
            .map(|(j, &db)| {
                if j < m {
                    (dims_a.dims()[j], db)
                } else {
                    (1, db)
                }
            })
            .collect();
        Self { pairs }
    }

    /// Partial-merge layout with l merged pairs.
    pub fn kc(dims_a: &DimProfile, dims_b: &DimProfile, l: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..l)
            .map(|j| (dims_a.dims()[j], dims_b.dims()[j]))
            .collect();
        pairs.extend(dims_a.dims()[l..].iter().map(|&d| (d, 1)));
        pairs.extend(dims_b.dims()[l..].iter().map(|&d| (1, d)));
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Composite profile (products of the pair dimensions).
    pub fn composite_profile(&self) -> Result<DimProfile> {
        DimProfile::new(self.pairs.iter().map(|&(a, b)| a * b).collect())
    }

    /// Dimensions of one factor's parties, placeholders dropped.
    pub fn factor_dims(&self, first: bool) -> Vec<usize> {
        self.pairs
            .iter()
            .map(|&(a, b)| if first { a } else { b })
            .filter(|&d| d > 1)
            .collect()
    }

    fn factor_dims_full(&self, first: bool) -> Vec<usize> {
        self.pairs
            .iter()
            .map(|&(a, b)| if first { a } else { b })
            .collect()
    }

    /// Layout restricted to a subset of composite parties.
    pub fn restrict(&self, subset: &SubsetSpec) -> FactorLayout {
        FactorLayout {
            pairs: subset.zero_based().iter().map(|&j| self.pairs[j]).collect(),
        }
    }
}

/// Which factor of a [`FactorLayout`] to keep in a group reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Combine two operators into the composite described by `layout`: tensor
/// them, interleave parties into layout order, and merge factor pairs into
/// single composite parties.
pub fn compose_with_layout(a: &Operator, b: &Operator, layout: &FactorLayout) -> Result<Operator> {
    if a.profile().dims() != layout.factor_dims(true).as_slice() {
        return Err(Error::BadParameter(
            "first factor does not match layout".into(),
        ));
    }
    if b.profile().dims() != layout.factor_dims(false).as_slice() {
        return Err(Error::BadParameter(
            "second factor does not match layout".into(),
        ));
    }
    let m = a.profile().parties();
    let n = b.profile().parties();
    let plain = a.matrix().kronecker(b.matrix());
    let concat = DimProfile::new_unchecked(
        a.profile()
            .dims()
            .iter()
            .chain(b.profile().dims())
            .copied()
            .collect(),
    );

    // positions in the interleaved (pre-merge) order: walk the layout and
    // place each present factor, A side first inside a merged pair
    let mut perm = vec![0usize; m + n];
    let mut pos = 0usize;
    let mut ai = 0usize;
    let mut bi = 0usize;
    for &(da, db) in layout.pairs() {
        if da > 1 {
            pos += 1;
            perm[ai] = pos;
            ai += 1;
        }
        if db > 1 {
            pos += 1;
            perm[m + bi] = pos;
            bi += 1;
        }
    }
    debug_assert_eq!(pos, m + n);

    let interleaved = permute_subsystems(&Operator::new(plain, concat)?, &perm)?;
    // merging adjacent factor indices into one party leaves flat indices as
    // they are; only the profile changes
    Operator::new(interleaved.into_matrix(), layout.composite_profile()?)
}

/// Trace out one factor of every composite party, keeping the other, through
/// the product's index map. The kept profile drops the size-one placeholders.
pub fn group_reduction(op: &Operator, layout: &FactorLayout, keep: Factor) -> Result<Operator> {
    let profile = op.profile();
    if profile.dims().len() != layout.pairs().len()
        || profile
            .dims()
            .iter()
            .zip(layout.pairs())
            .any(|(&d, &(a, b))| d != a * b)
    {
        return Err(Error::BadParameter(
            "factor layout does not match operator profile".into(),
        ));
    }
    let strides = profile.strides();
    let keep_first = matches!(keep, Factor::First);
    let kept_dims_full = layout.factor_dims_full(keep_first);
    let traced_dims_full = layout.factor_dims_full(!keep_first);

    // flat offset = sum_j (a_j * d_Bj + b_j) * stride_j splits into a kept
    // part and a traced part
    let kept_stride: Vec<usize> = strides
        .iter()
        .zip(layout.pairs())
        .map(|(&s, &(_, b))| if keep_first { s * b } else { s })
        .collect();
    let traced_stride: Vec<usize> = strides
        .iter()
        .zip(layout.pairs())
        .map(|(&s, &(_, b))| if keep_first { s } else { s * b })
        .collect();

    let kept_offsets = offsets(&kept_dims_full, &kept_stride);
    let traced_offsets = offsets(&traced_dims_full, &traced_stride);

    let kept_profile = DimProfile::new(layout.factor_dims(keep_first))
        .map_err(|_| Error::BadParameter("group reduction keeps no party".into()))?;
    let dk: usize = kept_dims_full.iter().product();
    debug_assert_eq!(dk, kept_profile.total_dim());

    let m = op.matrix();
    let mut out = nalgebra::DMatrix::zeros(dk, dk);
    for (r, &ro) in kept_offsets.iter().enumerate() {
        for (c, &co) in kept_offsets.iter().enumerate() {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Operator::new(out, kept_profile)
}

fn offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    loop {
        out.push(
            digits
                .iter()
                .zip(strides)
                .map(|(&d, &s)| d * s)
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

/// Plain tensor product: profile is dims(rho) followed by dims(sigma).
pub fn tensor_compose(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DensityMatrix> {
    let profile = rho.profile().concat(sigma.profile())?;
    let m = rho.matrix().kronecker(sigma.matrix());
    DensityMatrix::new(Operator::new(m, profile)?)
}

/// Result of [`kron_compose`]: the merged state plus bookkeeping.
#[derive(Debug, Clone)]
pub struct KronComposed {
    pub state: DensityMatrix,
    /// True when the arguments were swapped to satisfy m <= n.
    pub swapped: bool,
    pub layout: FactorLayout,
}

/// Pairwise party merge. When rho has more parties than sigma the roles swap
/// (recorded in the output) so the first factor is always the shorter one.
pub fn kron_compose(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<KronComposed> {
    if rho.profile().parties() > sigma.profile().parties() {
        let mut out = kron_compose(sigma, rho)?;
        out.swapped = true;
        return Ok(out);
    }
    let layout = FactorLayout::kron(rho.profile(), sigma.profile());
    let state = DensityMatrix::new(compose_with_layout(rho.op(), sigma.op(), &layout)?)?;
    Ok(KronComposed {
        state,
        swapped: false,
        layout,
    })
}

/// Result of [`kc_compose`].
#[derive(Debug, Clone)]
pub struct KcComposed {
    pub state: DensityMatrix,
    pub layout: FactorLayout,
}

/// Merge the first `l` party pairs and keep the remaining parties of both
/// factors separate; party order is the l merged parties, then the rest of
/// rho's parties, then the rest of sigma's.
///
/// l = 0 degenerates to the tensor product; l = min(m, n) with m <= n
/// degenerates to the Kronecker product.
pub fn kc_compose(rho: &DensityMatrix, sigma: &DensityMatrix, l: usize) -> Result<KcComposed> {
    let m = rho.profile().parties();
    let n = sigma.profile().parties();
    if l > m.min(n) {
        return Err(Error::BadParameter(format!(
            "merge count l = {l} exceeds min({m}, {n})"
        )));
    }
    let layout = FactorLayout::kc(rho.profile(), sigma.profile(), l);
    let state = DensityMatrix::new(compose_with_layout(rho.op(), sigma.op(), &layout)?)?;
    Ok(KcComposed { state, layout })
}

/// Marginal of a composite product state predicted from the factors alone:
/// reduce each factor to the parties it contributes to the subset, then
/// recombine under the restricted layout.
pub fn predicted_product_marginal(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    layout: &FactorLayout,
    subset: &SubsetSpec,
) -> Result<Operator> {
    let sub_layout = layout.restrict(subset);

    // indices each factor contributes, as 1-based positions in that factor
    let mut a_sel = Vec::new();
    let mut b_sel = Vec::new();
    let mut ai = 0usize;
    let mut bi = 0usize;
    for (j, &(da, db)) in layout.pairs().iter().enumerate() {
        let selected = subset.zero_based().contains(&j);
        if da > 1 {
            ai += 1;
            if selected {
                a_sel.push(ai);
            }
        }
        if db > 1 {
            bi += 1;
            if selected {
                b_sel.push(bi);
            }
        }
    }

    match (a_sel.is_empty(), b_sel.is_empty()) {
        (true, true) => Err(Error::InvalidSubset("empty subset".into())),
        (false, true) => partial_trace(rho.op(), &SubsetSpec::new(a_sel)?),
        (true, false) => partial_trace(sigma.op(), &SubsetSpec::new(b_sel)?),
        (false, false) => {
            let a_red = partial_trace(rho.op(), &SubsetSpec::new(a_sel)?)?;
            let b_red = partial_trace(sigma.op(), &SubsetSpec::new(b_sel)?)?;
            compose_with_layout(&a_red, &b_red, &sub_layout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::combinations;
    use crate::sampling;
    use crate::tensor::Ket;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn w3() -> DensityMatrix {
        crate::states::w_state(
            &crate::states::WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap(),
        )
        .unwrap()
        .projector()
    }

    #[test]
    fn tensor_of_basis_projectors() {
        let p = DimProfile::new(vec![2]).unwrap();
        let zero = Ket::basis(p.clone(), &[0]).unwrap().projector();
        let one = Ket::basis(p, &[1]).unwrap().projector();
        let prod = tensor_compose(&zero, &one).unwrap();
        assert_eq!(prod.profile().dims(), &[2, 2]);
        assert_relative_eq!(prod.matrix()[(1, 1)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_of_maximally_mixed() {
        let i2 = DensityMatrix::new(
            Operator::new(
                DMatrix::identity(2, 2) * c(0.5, 0.0),
                DimProfile::new(vec![2]).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let i3 = DensityMatrix::new(
            Operator::new(
                DMatrix::identity(3, 3) * c(1.0 / 3.0, 0.0),
                DimProfile::new(vec![3]).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let prod = tensor_compose(&i2, &i3).unwrap();
        assert_eq!(prod.profile().dims(), &[2, 3]);
        for i in 0..6 {
            assert_relative_eq!(prod.matrix()[(i, i)].re, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn tensor_reduction_gives_first_factor() {
        let w = w3();
        let prod = tensor_compose(&w, &w).unwrap();
        assert_eq!(prod.profile().parties(), 6);
        let red = partial_trace(prod.op(), &SubsetSpec::new(vec![1, 2, 3]).unwrap()).unwrap();
        let dev = (red.matrix() - w.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-13);
    }

    #[test]
    fn kron_profile_multiplies_dimensions() {
        let w = w3();
        let out = kron_compose(&w, &w).unwrap();
        assert!(!out.swapped);
        assert_eq!(out.state.profile().dims(), &[4, 4, 4]);
    }

    #[test]
    fn kron_index_bookkeeping_is_first_factor_major() {
        let p = DimProfile::n_qubits(3).unwrap();
        let zeros = Ket::basis(p.clone(), &[0, 0, 0]).unwrap().projector();
        let ones = Ket::basis(p, &[1, 1, 1]).unwrap().projector();
        let out = kron_compose(&zeros, &ones).unwrap();
        // local index a * d_B + b = 0 * 2 + 1 = 1 in each dim-4 party
        let flat = out.state.profile().encode(&[1, 1, 1]);
        assert_relative_eq!(out.state.matrix()[(flat, flat)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(out.state.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kron_group_reductions_recover_factors() {
        let w = w3();
        let sigma = crate::states::sigma_state().unwrap();
        let out = kron_compose(&w, &sigma).unwrap();
        let a = group_reduction(out.state.op(), &out.layout, Factor::First).unwrap();
        let dev = (a.matrix() - w.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
        let b = group_reduction(out.state.op(), &out.layout, Factor::Second).unwrap();
        let dev = (b.matrix() - sigma.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn kron_swaps_longer_first_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = sampling::random_density(&DimProfile::n_qubits(3).unwrap(), 2, &mut rng);
        let b = sampling::random_density(&DimProfile::n_qubits(2).unwrap(), 2, &mut rng);
        let out = kron_compose(&a, &b).unwrap();
        assert!(out.swapped);
        assert_eq!(out.state.profile().dims(), &[4, 4, 2]);
    }

    #[test]
    fn kc_profile_and_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p3 = DimProfile::n_qubits(3).unwrap();
        let a = sampling::random_density(&p3, 2, &mut rng);
        let b = sampling::random_density(&p3, 2, &mut rng);

        let kc1 = kc_compose(&a, &b, 1).unwrap();
        assert_eq!(kc1.state.profile().dims(), &[4, 2, 2, 2, 2]);

        // l = 0 is the tensor product
        let kc0 = kc_compose(&a, &b, 0).unwrap();
        let plain = tensor_compose(&a, &b).unwrap();
        assert!(kc0.state.frobenius_distance(&plain) < 1e-13);

        // l = min(m, n) matches the Kronecker product (same party order here)
        let kc3 = kc_compose(&a, &b, 3).unwrap();
        let kr = kron_compose(&a, &b).unwrap();
        assert!(kc3.state.frobenius_distance(&kr.state) < 1e-13);

        assert!(kc_compose(&a, &b, 4).is_err());
    }

    #[test]
    fn products_preserve_state_invariants_and_purity_multiplies() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = sampling::random_density(&DimProfile::new(vec![2, 3]).unwrap(), 2, &mut rng);
        let b = sampling::random_density(&DimProfile::new(vec![2, 2]).unwrap(), 3, &mut rng);
        let pa = a.purity();
        let pb = b.purity();

        let t = tensor_compose(&a, &b).unwrap();
        assert_relative_eq!(t.purity(), pa * pb, epsilon = 1e-12);

        let k = kron_compose(&a, &b).unwrap();
        assert_relative_eq!(k.state.purity(), pa * pb, epsilon = 1e-12);

        let kc = kc_compose(&a, &b, 1).unwrap();
        assert_relative_eq!(kc.state.purity(), pa * pb, epsilon = 1e-12);
    }

    #[test]
    fn composite_marginals_match_factor_predictions_up_to_dim_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let a = sampling::random_density(&DimProfile::new(vec![2, 2]).unwrap(), 3, &mut rng);
        let b = sampling::random_density(&DimProfile::new(vec![2, 2, 2, 2]).unwrap(), 2, &mut rng);
        let kr = kron_compose(&a, &b).unwrap();
        assert_eq!(kr.state.dim(), 64);
        for subset in [vec![1usize, 2], vec![2, 4], vec![1, 3, 4]] {
            let subset = SubsetSpec::new(subset).unwrap();
            let direct = partial_trace(kr.state.op(), &subset).unwrap();
            let predicted = predicted_product_marginal(&a, &b, &kr.layout, &subset).unwrap();
            let dev = (direct.matrix() - predicted.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "subset {:?} dev {dev}", subset.indices());
        }
    }

    #[test]
    fn composite_marginals_match_factor_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a = sampling::random_density(&DimProfile::n_qubits(2).unwrap(), 2, &mut rng);
        let b = sampling::random_density(&DimProfile::new(vec![2, 3]).unwrap(), 2, &mut rng);

        for (state, layout) in [
            {
                let t = tensor_compose(&a, &b).unwrap();
                (t, FactorLayout::tensor(a.profile(), b.profile()))
            },
            {
                let k = kron_compose(&a, &b).unwrap();
                (k.state.clone(), k.layout.clone())
            },
            {
                let kc = kc_compose(&a, &b, 1).unwrap();
                (kc.state.clone(), kc.layout.clone())
            },
        ] {
            let n = state.profile().parties();
            for k_marg in 1..n {
                for subset in combinations(n, k_marg) {
                    let direct = partial_trace(state.op(), &subset).unwrap();
                    let predicted = predicted_product_marginal(&a, &b, &layout, &subset).unwrap();
                    let dev = (direct.matrix() - predicted.matrix())
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max);
                    assert!(
                        dev < 1e-12,
                        "subset {:?} layout {:?} dev {dev}",
                        subset.indices(),
                        layout.pairs()
                    );
                }
            }
        }
    }

    #[test]
    fn group_reduction_matches_partial_trace_for_tensor_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = sampling::random_density(&DimProfile::n_qubits(2).unwrap(), 2, &mut rng);
        let b = sampling::random_density(&DimProfile::n_qubits(2).unwrap(), 2, &mut rng);
        let t = tensor_compose(&a, &b).unwrap();
        let layout = FactorLayout::tensor(a.profile(), b.profile());
        let first = group_reduction(t.op(), &layout, Factor::First).unwrap();
        let direct = partial_trace(t.op(), &SubsetSpec::new(vec![1, 2]).unwrap()).unwrap();
        let dev = (first.matrix() - direct.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-13);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn purity_multiplies_and_spectra_stay_valid(
                seed in 0u64..1000,
                l in 0usize..3,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = sampling::random_density(&DimProfile::n_qubits(2).unwrap(), 2, &mut rng);
                let b = sampling::random_density(&DimProfile::new(vec![2, 3]).unwrap(), 3, &mut rng);
                let kc = kc_compose(&a, &b, l).unwrap();
                prop_assert!((kc.state.purity() - a.purity() * b.purity()).abs() < 1e-12);
                prop_assert!((kc.state.op().trace().re - 1.0).abs() < 1e-12);
                prop_assert!(kc.state.op().min_eigenvalue() > -1e-12);
            }
        }
    }

    #[test]
    fn ket_tensor_matches_projector_tensor() {
        let p = DimProfile::n_qubits(2).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        let bell = Ket::new(
            DVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]),
            p.clone(),
        )
        .unwrap();
        let zero = Ket::basis(DimProfile::new(vec![2]).unwrap(), &[0]).unwrap();
        let kk = bell.tensor(&zero).unwrap().projector();
        let mm = tensor_compose(&bell.projector(), &zero.projector()).unwrap();
        assert!(kk.frobenius_distance(&mm) < 1e-14);
    }
}
