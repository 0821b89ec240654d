//! Point derivative, multiple point splitter, their adjoints and the
//! Skorokhod integrals.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{QsError, Result};
use crate::scalar::{czero, Real, C};
use crate::space::lattice::same_lattice;
use crate::space::{chains_within, interleave_permutation, Chain, FockVector, Lattice, WeightFunction};

/// `∇ₓχ`: the vector `κ ↦ χ(κ ⊔ x)` on chains `κ ∌ x`, carrying the slot of `x`.
pub fn point_split<T: Real>(x: usize, chi: &FockVector<T>) -> Result<FockVector<T>> {
    if chi.marked().is_some() {
        return Err(QsError::Shape("point split expects an unmarked vector".into()));
    }
    let lattice = chi.lattice();
    let mut out = FockVector::zero_marked(lattice, x)?;
    for (c, b) in chi.iter() {
        if c.contains(x) {
            out.set_block(c.without(x), b.to_vec())?;
        }
    }
    Ok(out)
}

/// `∇*ₓψ`: inserts `x` into every chain, `(∇*ₓψ)(κ ⊔ x) = ψ(κ)`.
pub fn point_insert<T: Real>(psi: &FockVector<T>) -> Result<FockVector<T>> {
    let x = psi
        .marked()
        .ok_or_else(|| QsError::Shape("point insertion expects a marked vector".into()))?;
    let mut out = FockVector::zero(psi.lattice());
    for (c, b) in psi.iter() {
        out.set_block(c.with(x), b.to_vec())?;
    }
    Ok(out)
}

/// `[∇*ψ](ϑ) = Σ_{x∈ϑ} ψ(x, ϑ∖x)`; `psi[x]` must carry the slot of `x`.
pub fn point_integral<T: Real>(lattice: &Arc<Lattice<T>>, psi: &[FockVector<T>]) -> Result<FockVector<T>> {
    if psi.len() != lattice.len() {
        return Err(QsError::Shape(format!(
            "expected one field value per point ({}), got {}",
            lattice.len(),
            psi.len()
        )));
    }
    let mut out = FockVector::zero(lattice);
    let one = C::new(T::one(), T::zero());
    for (x, p) in psi.iter().enumerate() {
        same_lattice(lattice, p.lattice())?;
        if p.marked() != Some(x) {
            return Err(QsError::Shape(format!("field value at point {x} must carry the slot of {x}")));
        }
        for (c, b) in p.iter() {
            out.accumulate(c.with(x), b, one);
        }
    }
    Ok(out)
}

/// Index of the split space: disjoint pairs `(υ, κ)` with `|υ| + |κ| ≤ cap`.
#[derive(Debug, Clone)]
pub struct SplitBasis {
    pairs: Vec<(Chain, Chain)>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    index: HashMap<(Chain, Chain), usize>,
    dim: usize,
}

impl SplitBasis {
    pub fn new<T: Real>(lattice: &Lattice<T>) -> Self {
        let mut pairs: Vec<(Chain, Chain)> = Vec::new();
        for &th in lattice.basis().chains() {
            for u in th.subsets() {
                pairs.push((u, th.difference(u)));
            }
        }
        pairs.sort();
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut sizes = Vec::with_capacity(pairs.len());
        let mut index = HashMap::with_capacity(pairs.len());
        let mut dim = 0;
        for (i, &(u, k)) in pairs.iter().enumerate() {
            let s = lattice.block_size(u.union(k));
            offsets.push(dim);
            sizes.push(s);
            index.insert((u, k), i);
            dim += s;
        }
        Self {
            pairs,
            offsets,
            sizes,
            index,
            dim,
        }
    }

    pub fn pairs(&self) -> &[(Chain, Chain)] {
        &self.pairs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, u: Chain, k: Chain) -> Option<(usize, usize)> {
        self.index.get(&(u, k)).map(|&i| (self.offsets[i], self.sizes[i]))
    }

    /// Per-coordinate diagonal `q₀(υ)w(υ) · q₁(κ)w(κ)`.
    pub fn weight_diag<T: Real>(&self, lattice: &Lattice<T>, q0: &WeightFunction<T>, q1: &WeightFunction<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim);
        for (i, &(u, k)) in self.pairs.iter().enumerate() {
            let v = q0.chain_weight(u) * lattice.measure(u) * q1.chain_weight(k) * lattice.measure(k);
            out.extend(std::iter::repeat_n(v, self.sizes[i]));
        }
        out
    }
}

/// Function on disjoint chain pairs; the block of `(υ, κ)` is laid out as
/// `[initial][υ factors][κ factors]`.
#[derive(Debug, Clone)]
pub struct SplitVector<T: Real> {
    lattice: Arc<Lattice<T>>,
    blocks: BTreeMap<(Chain, Chain), Vec<C<T>>>,
}

impl<T: Real> SplitVector<T> {
    pub fn zero(lattice: &Arc<Lattice<T>>) -> Self {
        Self {
            lattice: Arc::clone(lattice),
            blocks: BTreeMap::new(),
        }
    }

    /// Fills every admissible pair with `f(υ, κ)`.
    pub fn from_fn(lattice: &Arc<Lattice<T>>, mut f: impl FnMut(Chain, Chain) -> Vec<C<T>>) -> Result<Self> {
        let mut v = Self::zero(lattice);
        for (u, k) in SplitBasis::new(lattice).pairs().to_vec() {
            v.set_block(u, k, f(u, k))?;
        }
        Ok(v)
    }

    pub fn from_dense(lattice: &Arc<Lattice<T>>, basis: &SplitBasis, data: &[C<T>]) -> Result<Self> {
        if data.len() != basis.dim() {
            return Err(QsError::Shape(format!(
                "dense split vector has length {}, expected {}",
                data.len(),
                basis.dim()
            )));
        }
        let mut v = Self::zero(lattice);
        for &(u, k) in basis.pairs() {
            let (off, size) = basis.block(u, k).unwrap();
            let b = &data[off..off + size];
            if b.iter().any(|z| *z != czero()) {
                v.blocks.insert((u, k), b.to_vec());
            }
        }
        Ok(v)
    }

    pub fn to_dense(&self, basis: &SplitBasis) -> Vec<C<T>> {
        let mut out = vec![czero(); basis.dim()];
        for ((u, k), b) in &self.blocks {
            if let Some((off, _)) = basis.block(*u, *k) {
                out[off..off + b.len()].copy_from_slice(b);
            }
        }
        out
    }

    pub fn lattice(&self) -> &Arc<Lattice<T>> {
        &self.lattice
    }

    pub fn set_block(&mut self, u: Chain, k: Chain, block: Vec<C<T>>) -> Result<()> {
        if !u.is_disjoint(k) {
            return Err(QsError::InvalidChain(format!("{u} and {k} overlap")));
        }
        self.lattice.check_chain(u.union(k))?;
        let n = self.lattice.block_size(u.union(k));
        if block.len() != n {
            return Err(QsError::Shape(format!(
                "block at ({u}, {k}) must have {n} entries, got {}",
                block.len()
            )));
        }
        self.blocks.insert((u, k), block);
        Ok(())
    }

    pub fn block(&self, u: Chain, k: Chain) -> Option<&[C<T>]> {
        self.blocks.get(&(u, k)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Chain, Chain), &[C<T>])> {
        self.blocks.iter().map(|(p, b)| (*p, b.as_slice()))
    }

    /// `Σ ⟨self|other⟩ q₀(υ)w(υ) q₁(κ)w(κ)`.
    pub fn pairing(&self, other: &Self, q0: &WeightFunction<T>, q1: &WeightFunction<T>) -> Result<C<T>> {
        same_lattice(&self.lattice, &other.lattice)?;
        let mut acc = czero();
        for ((u, k), a) in &self.blocks {
            if let Some(b) = other.blocks.get(&(*u, *k)) {
                let s = a.iter().zip(b).fold(czero(), |s, (x, y)| s + x.conj() * y);
                let wt = q0.chain_weight(*u) * self.lattice.measure(*u) * q1.chain_weight(*k) * self.lattice.measure(*k);
                acc = acc + s * wt;
            }
        }
        Ok(acc)
    }

    /// `‖ψ‖(q₀, q₁)`.
    pub fn norm(&self, q0: &WeightFunction<T>, q1: &WeightFunction<T>) -> Result<T> {
        Ok(self.pairing(self, q0, q1)?.re.max(T::zero()).sqrt())
    }
}

/// `Δχ`: `(υ, κ) ↦ χ(υ ⊔ κ)` over all admissible disjoint pairs.
pub fn split<T: Real>(chi: &FockVector<T>) -> Result<SplitVector<T>> {
    if chi.marked().is_some() {
        return Err(QsError::Shape("split expects an unmarked vector".into()));
    }
    let lattice = chi.lattice();
    let mut out = SplitVector::zero(lattice);
    for (th, b) in chi.iter() {
        for u in th.subsets() {
            let k = th.difference(u);
            let perm = interleave_permutation(lattice, u, k);
            out.blocks.insert((u, k), perm.iter().map(|&j| b[j]).collect());
        }
    }
    Ok(out)
}

/// `[Δ*ψ](ϑ) = Σ_{υ⊆ϑ} ψ(υ, ϑ∖υ)`.
pub fn multi_point_integral<T: Real>(psi: &SplitVector<T>) -> FockVector<T> {
    let lattice = psi.lattice();
    let mut out = FockVector::zero(lattice);
    for ((u, k), b) in psi.iter() {
        let th = u.union(k);
        let perm = interleave_permutation(lattice, u, k);
        let mut merged = vec![czero(); b.len()];
        for (i, &j) in perm.iter().enumerate() {
            merged[j] = b[i];
        }
        out.accumulate(th, &merged, C::new(T::one(), T::zero()));
    }
    out
}

/// Values of an `n`-point integrand: `n`-chain → block over its
/// multiplicity factors (no initial-space factor).
pub type ChainField<T> = BTreeMap<Chain, Vec<C<T>>>;

/// `[Sₙ(ψₙ)χ](ϑ) = Σ_{υ⊆ϑ, |υ|=n} ψₙ(υ) ⊗ χ(ϑ∖υ)`.
pub fn skorokhod_n<T: Real>(n: usize, psi: &ChainField<T>, chi: &FockVector<T>) -> Result<FockVector<T>> {
    let lattice = chi.lattice();
    if n > lattice.cap() {
        return Err(QsError::CapExceeded { order: n, cap: lattice.cap() });
    }
    if chi.marked().is_some() {
        return Err(QsError::Shape("Skorokhod integral expects an unmarked vector".into()));
    }
    for (u, b) in psi {
        if u.len() != n || !u.is_subset(lattice.all_points()) {
            return Err(QsError::InvalidChain(format!("{u} is not an {n}-chain of the lattice")));
        }
        let need = lattice.block_size(*u) / lattice.initial_dim();
        if b.len() != need {
            return Err(QsError::Shape(format!(
                "integrand at {u} must have {need} entries, got {}",
                b.len()
            )));
        }
    }
    let h = lattice.initial_dim();
    let mut out = FockVector::zero(lattice);
    let one = C::new(T::one(), T::zero());
    for (k, cb) in chi.iter() {
        let kdim = cb.len() / h;
        for (u, pb) in psi {
            if !u.is_disjoint(k) || u.len() + k.len() > lattice.cap() {
                continue;
            }
            // split layout [h][υ][κ], then reorder into time order
            let udim = pb.len();
            let mut split_block = Vec::with_capacity(h * udim * kdim);
            for hi in 0..h {
                for pu in pb {
                    for ck in &cb[hi * kdim..(hi + 1) * kdim] {
                        split_block.push(*pu * *ck);
                    }
                }
            }
            let perm = interleave_permutation(lattice, *u, k);
            let mut merged = vec![czero(); split_block.len()];
            for (i, &j) in perm.iter().enumerate() {
                merged[j] = split_block[i];
            }
            out.accumulate(u.union(k), &merged, one);
        }
    }
    Ok(out)
}

/// Chain-sum side of the principal formula: `Σ_ϑ Σ_{υ⊆ϑ} f(υ, ϑ∖υ) w(ϑ)`.
pub fn principal_lhs<T: Real>(lattice: &Lattice<T>, mut f: impl FnMut(Chain, Chain) -> C<T>) -> C<T> {
    let mut acc = czero();
    for &th in lattice.basis().chains() {
        let mut inner = czero();
        for u in th.subsets() {
            inner = inner + f(u, th.difference(u));
        }
        acc = acc + inner * lattice.measure(th);
    }
    acc
}

/// Double-sum side of the principal formula:
/// `Σ_{(υ,κ) disjoint} f(υ, κ) w(υ) w(κ)`.
pub fn principal_rhs<T: Real>(lattice: &Lattice<T>, mut f: impl FnMut(Chain, Chain) -> C<T>) -> C<T> {
    let all = lattice.all_points();
    let cap = lattice.cap();
    let mut acc = czero();
    for u in chains_within(all, cap) {
        let wu = lattice.measure(u);
        for k in chains_within(all.difference(u), cap - u.len()) {
            acc = acc + f(u, k) * (wu * lattice.measure(k));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_lattice;

    fn l2() -> Arc<Lattice<f64>> {
        build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap()
    }

    fn re(x: f64) -> C<f64> {
        C::new(x, 0.0)
    }

    fn chi(l: &Arc<Lattice<f64>>) -> FockVector<f64> {
        FockVector::from_scalars(l, &[re(1.0), re(2.0), re(3.0), re(4.0)]).unwrap()
    }

    #[test]
    fn point_split_readout() {
        let l = l2();
        let s = point_split(0, &chi(&l)).unwrap();
        assert_eq!(s.coeff(Chain::EMPTY), re(2.0));
        assert_eq!(s.coeff(Chain::singleton(1)), re(4.0));
        assert_eq!(s.coeff(Chain::singleton(0)), re(0.0));
        assert_eq!(point_split(0, &FockVector::vacuum(&l)).unwrap().support_len(), 0);
    }

    #[test]
    fn point_integral_examples() {
        let l = l2();
        let vac_at = |x| {
            let mut v = FockVector::zero_marked(&l, x).unwrap();
            v.set_block(Chain::EMPTY, vec![re(1.0)]).unwrap();
            v
        };
        let r = point_integral(&l, &[vac_at(0), vac_at(1)]).unwrap();
        assert_eq!(r.coeff(Chain::singleton(0)), re(1.0));
        assert_eq!(r.coeff(Chain::from_points([0, 1])), re(0.0));

        let mut a = FockVector::zero_marked(&l, 0).unwrap();
        a.set_block(Chain::singleton(1), vec![re(1.0)]).unwrap();
        let mut b = FockVector::zero_marked(&l, 1).unwrap();
        b.set_block(Chain::singleton(0), vec![re(1.0)]).unwrap();
        let r = point_integral(&l, &[a, b]).unwrap();
        assert_eq!(r.coeff(Chain::from_points([0, 1])), re(2.0));
    }

    #[test]
    fn split_examples() {
        let l = l2();
        let s = split(&chi(&l)).unwrap();
        assert_eq!(s.block(Chain::singleton(0), Chain::singleton(1)).unwrap(), &[re(4.0)]);
        let v = split(&FockVector::vacuum(&l)).unwrap();
        assert_eq!(v.iter().count(), 1);
        assert_eq!(v.block(Chain::EMPTY, Chain::EMPTY).unwrap(), &[re(1.0)]);
        let one = WeightFunction::ones(2);
        let n = s.norm(&one, &one).unwrap();
        assert!((n - 91f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn multi_point_integral_examples() {
        let l = l2();
        let ones = SplitVector::from_fn(&l, |_, _| vec![re(1.0)]).unwrap();
        assert_eq!(multi_point_integral(&ones).coeff(Chain::from_points([0, 1])), re(4.0));
        let c = chi(&l);
        let emb = SplitVector::from_fn(&l, |u, k| {
            if u.is_empty() {
                vec![c.coeff(k)]
            } else {
                vec![re(0.0)]
            }
        })
        .unwrap();
        assert_eq!(multi_point_integral(&emb).to_dense(), c.to_dense());
    }

    #[test]
    fn skorokhod_examples() {
        let l = l2();
        let vac = FockVector::vacuum(&l);
        let psi1: ChainField<f64> = [(Chain::singleton(0), vec![re(1.0)]), (Chain::singleton(1), vec![re(1.0)])]
            .into_iter()
            .collect();
        let r = skorokhod_n(1, &psi1, &vac).unwrap();
        assert_eq!(r.to_dense(), vec![re(0.0), re(1.0), re(1.0), re(0.0)]);
        let psi0: ChainField<f64> = [(Chain::EMPTY, vec![re(5.0)])].into_iter().collect();
        let c = chi(&l);
        assert_eq!(skorokhod_n(0, &psi0, &c).unwrap().to_dense(), c.scale(re(5.0)).to_dense());
        let psi2: ChainField<f64> = [(Chain::from_points([0, 1]), vec![re(1.0)])].into_iter().collect();
        assert_eq!(skorokhod_n(2, &psi2, &vac).unwrap().coeff(Chain::from_points([0, 1])), re(1.0));
        assert!(matches!(skorokhod_n(3, &psi2, &vac), Err(QsError::CapExceeded { .. })));
    }

    #[test]
    fn skorokhod_interleaves_multiplicity_factors() {
        // ψ on {1} (dim 3) tensored with χ on {0} (dim 2): output layout [0][1]
        let l = build_lattice(&[(1.0, 1.0, 2), (2.0, 1.0, 3)], 1, 2).unwrap();
        let mut chi = FockVector::zero(&l);
        chi.set_block(Chain::singleton(0), vec![re(1.0), re(10.0)]).unwrap();
        let psi: ChainField<f64> = [(Chain::singleton(1), vec![re(1.0), re(2.0), re(3.0)])].into_iter().collect();
        let r = skorokhod_n(1, &psi, &chi).unwrap();
        let b = r.block(Chain::from_points([0, 1])).unwrap();
        let expect: Vec<C<f64>> = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0].iter().map(|&x| re(x)).collect();
        assert_eq!(b, expect.as_slice());
    }

    #[test]
    fn insert_after_split_keeps_occupied_chains() {
        let l = l2();
        let c = chi(&l);
        let r = point_insert(&point_split(1, &c).unwrap()).unwrap();
        assert_eq!(r.to_dense(), vec![re(0.0), re(0.0), re(3.0), re(4.0)]);
    }
}
