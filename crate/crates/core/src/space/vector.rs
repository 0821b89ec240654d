use std::collections::BTreeMap;
use std::sync::Arc;

use super::chain::Chain;
use super::lattice::{same_lattice, Basis, Lattice};
use super::weight::WeightFunction;
use crate::error::{QsError, Result};
use crate::scalar::{czero, Real, C};

/// Sparse truncated Fock vector: chain → coefficient block.
///
/// With `marked = Some(x)` the vector carries an extra multiplicity slot at
/// `x`: it is indexed by chains not containing `x`, and the block of `κ` is
/// laid out as the block of `κ ⊔ x`. This is the value space of the point
/// split `χ̊(x)`.
#[derive(Debug, Clone)]
pub struct FockVector<T: Real> {
    lattice: Arc<Lattice<T>>,
    marked: Option<usize>,
    blocks: BTreeMap<Chain, Vec<C<T>>>,
}

impl<T: Real> PartialEq for FockVector<T> {
    fn eq(&self, other: &Self) -> bool {
        *self.lattice == *other.lattice && self.marked == other.marked && self.blocks == other.blocks
    }
}

impl<T: Real> FockVector<T> {
    pub fn zero(lattice: &Arc<Lattice<T>>) -> Self {
        Self {
            lattice: Arc::clone(lattice),
            marked: None,
            blocks: BTreeMap::new(),
        }
    }

    /// Zero vector with the extra slot at `x`.
    pub fn zero_marked(lattice: &Arc<Lattice<T>>, x: usize) -> Result<Self> {
        lattice.check_point(x)?;
        Ok(Self {
            lattice: Arc::clone(lattice),
            marked: Some(x),
            blocks: BTreeMap::new(),
        })
    }

    /// Vacuum `δ_∅ ⊗ e₀`.
    pub fn vacuum(lattice: &Arc<Lattice<T>>) -> Self {
        let mut v = Self::zero(lattice);
        let mut b = vec![czero(); lattice.initial_dim()];
        b[0] = C::new(T::one(), T::zero());
        v.blocks.insert(Chain::EMPTY, b);
        v
    }

    pub fn from_blocks<I>(lattice: &Arc<Lattice<T>>, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Chain, Vec<C<T>>)>,
    {
        let mut v = Self::zero(lattice);
        for (c, b) in blocks {
            v.set_block(c, b)?;
        }
        Ok(v)
    }

    /// Scalar coefficients on consecutive basis chains, for `initial_dim = 1`
    /// and scalar multiplicity.
    pub fn from_scalars(lattice: &Arc<Lattice<T>>, values: &[C<T>]) -> Result<Self> {
        let basis = lattice.basis();
        if values.len() != basis.dim() {
            return Err(QsError::Shape(format!(
                "expected {} coefficients, got {}",
                basis.dim(),
                values.len()
            )));
        }
        Self::from_dense(lattice, None, values)
    }

    /// Unit vector at dense coordinate `k` of the (marked) basis.
    pub fn unit(lattice: &Arc<Lattice<T>>, marked: Option<usize>, k: usize) -> Result<Self> {
        let basis = basis_of(lattice, marked);
        let mut data = vec![czero(); basis.dim()];
        if k >= data.len() {
            return Err(QsError::Shape(format!("coordinate {k} out of range {}", data.len())));
        }
        data[k] = C::new(T::one(), T::zero());
        Self::from_dense(lattice, marked, &data)
    }

    /// Vector with the given dense coordinates over the full (or marked) basis.
    pub fn from_dense(lattice: &Arc<Lattice<T>>, marked: Option<usize>, data: &[C<T>]) -> Result<Self> {
        if let Some(x) = marked {
            lattice.check_point(x)?;
        }
        let basis = basis_of(lattice, marked);
        if data.len() != basis.dim() {
            return Err(QsError::Shape(format!(
                "dense vector has length {}, basis dimension is {}",
                data.len(),
                basis.dim()
            )));
        }
        let mut blocks = BTreeMap::new();
        for (i, &c) in basis.chains().iter().enumerate() {
            let (off, size) = basis.block_at(i);
            let b = &data[off..off + size];
            if b.iter().any(|z| *z != czero()) {
                blocks.insert(c, b.to_vec());
            }
        }
        Ok(Self {
            lattice: Arc::clone(lattice),
            marked,
            blocks,
        })
    }

    /// Dense coordinates over the full (or marked) basis.
    pub fn to_dense(&self) -> Vec<C<T>> {
        let basis = self.basis();
        let mut out = vec![czero(); basis.dim()];
        for (c, b) in &self.blocks {
            if let Some((off, _)) = basis.block(*c) {
                out[off..off + b.len()].copy_from_slice(b);
            }
        }
        out
    }

    /// Dense coordinates over an arbitrary basis containing every stored chain;
    /// blocks outside the basis are dropped.
    pub fn to_dense_in(&self, basis: &Basis) -> Vec<C<T>> {
        let mut out = vec![czero(); basis.dim()];
        for (c, b) in &self.blocks {
            if let Some((off, _)) = basis.block(*c) {
                out[off..off + b.len()].copy_from_slice(b);
            }
        }
        out
    }

    #[inline]
    pub fn lattice(&self) -> &Arc<Lattice<T>> {
        &self.lattice
    }

    #[inline]
    pub fn marked(&self) -> Option<usize> {
        self.marked
    }

    pub fn basis(&self) -> &Basis {
        basis_of(&self.lattice, self.marked)
    }

    /// Expected block length at chain `c`.
    pub fn block_len(&self, c: Chain) -> usize {
        let full = match self.marked {
            Some(x) => c.with(x),
            None => c,
        };
        self.lattice.block_size(full)
    }

    fn check_index(&self, c: Chain) -> Result<()> {
        match self.marked {
            None => self.lattice.check_chain(c),
            Some(x) => {
                if c.contains(x) {
                    return Err(QsError::InvalidChain(format!("{c} contains the marked point {x}")));
                }
                if !c.is_subset(self.lattice.all_points()) || c.len() + 1 > self.lattice.cap() {
                    return Err(QsError::InvalidChain(format!("{c} is not admissible beside marked point {x}")));
                }
                Ok(())
            }
        }
    }

    pub fn block(&self, c: Chain) -> Option<&[C<T>]> {
        self.blocks.get(&c).map(Vec::as_slice)
    }

    /// First coefficient of the block at `c`; zero if absent.
    pub fn coeff(&self, c: Chain) -> C<T> {
        self.blocks.get(&c).map_or(czero(), |b| b[0])
    }

    pub fn set_block(&mut self, c: Chain, block: Vec<C<T>>) -> Result<()> {
        self.check_index(c)?;
        let n = self.block_len(c);
        if block.len() != n {
            return Err(QsError::Shape(format!(
                "block at {c} must have {n} entries, got {}",
                block.len()
            )));
        }
        self.blocks.insert(c, block);
        Ok(())
    }

    /// Adds `coeff · block` at `c`. Chains outside the truncated index set are
    /// dropped, which is the truncation rule shared by every operator.
    pub fn accumulate(&mut self, c: Chain, block: &[C<T>], coeff: C<T>) {
        if self.check_index(c).is_err() {
            return;
        }
        debug_assert_eq!(block.len(), self.block_len(c));
        let n = block.len();
        let entry = self.blocks.entry(c).or_insert_with(|| vec![czero(); n]);
        for (e, b) in entry.iter_mut().zip(block) {
            *e = *e + *b * coeff;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Chain, &[C<T>])> {
        self.blocks.iter().map(|(c, b)| (*c, b.as_slice()))
    }

    /// Number of stored blocks.
    pub fn support_len(&self) -> usize {
        self.blocks.len()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        same_lattice(&self.lattice, &other.lattice)?;
        if self.marked != other.marked {
            return Err(QsError::Shape("vectors carry different marked slots".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(C::new(T::one(), T::zero()), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C::new(-T::one(), T::zero()), other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: C<T>, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (c, b) in &other.blocks {
            out.accumulate(*c, b, a);
        }
        Ok(out)
    }

    pub fn scale(&self, a: C<T>) -> Self {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            for z in b.iter_mut() {
                *z = *z * a;
            }
        }
        out
    }

    /// `Σ_c ⟨self(c)|other(c)⟩ f(c) w(c)`, conjugate-linear in `self`. The
    /// marked point carries no weight. `None` means `f ≡ 1`.
    pub fn pairing(&self, other: &Self, f: Option<&WeightFunction<T>>) -> Result<C<T>> {
        self.check_compatible(other)?;
        if let Some(f) = f {
            f.require_len(self.lattice.len())?;
        }
        let mut acc = czero();
        for (c, a) in &self.blocks {
            if let Some(b) = other.blocks.get(c) {
                let mut s = czero();
                for (x, y) in a.iter().zip(b) {
                    s = s + x.conj() * y;
                }
                let mut wt = self.lattice.measure(*c);
                if let Some(f) = f {
                    wt = wt * f.chain_weight(*c);
                }
                acc = acc + s * wt;
            }
        }
        Ok(acc)
    }

    /// `‖χ‖(f) = pairing(χ, χ, f)^{1/2}`.
    pub fn norm(&self, f: Option<&WeightFunction<T>>) -> Result<T> {
        if let Some(f) = f {
            f.require_len(self.lattice.len())?;
        }
        let mut acc = T::zero();
        for (c, b) in &self.blocks {
            let s: T = b.iter().map(|z| z.norm_sqr()).sum();
            let mut wt = self.lattice.measure(*c);
            if let Some(f) = f {
                wt = wt * f.chain_weight(*c);
            }
            acc = acc + s * wt;
        }
        Ok(acc.sqrt())
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> T {
        self.blocks
            .values()
            .flat_map(|b| b.iter())
            .fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Keeps only blocks on chains satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(Chain) -> bool) -> Self {
        let mut out = self.clone();
        out.blocks.retain(|c, _| keep(*c));
        out
    }
}

pub(crate) fn basis_of<T: Real>(lattice: &Lattice<T>, marked: Option<usize>) -> &Basis {
    match marked {
        Some(x) => lattice.marked_basis(x),
        None => lattice.basis(),
    }
}

/// `chain_weight` as a free function on a lattice chain.
pub fn chain_weight<T: Real>(lattice: &Lattice<T>, c: Chain, f: &WeightFunction<T>) -> Result<T> {
    lattice.check_chain(c)?;
    f.require_len(lattice.len())?;
    Ok(f.chain_weight(c))
}

/// Free-function form of [`FockVector::pairing`].
pub fn pairing<T: Real>(psi: &FockVector<T>, chi: &FockVector<T>, f: Option<&WeightFunction<T>>) -> Result<C<T>> {
    psi.pairing(chi, f)
}

/// Free-function form of [`FockVector::norm`].
pub fn norm<T: Real>(chi: &FockVector<T>, f: Option<&WeightFunction<T>>) -> Result<T> {
    chi.norm(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::lattice::build_lattice;

    fn l2() -> Arc<Lattice<f64>> {
        build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap()
    }

    fn chi(l: &Arc<Lattice<f64>>) -> FockVector<f64> {
        let v: Vec<C<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| C::new(x, 0.0)).collect();
        FockVector::from_scalars(l, &v).unwrap()
    }

    #[test]
    fn pairing_against_direct_sum() {
        let l = l2();
        let c = chi(&l);
        assert!((c.pairing(&c, None).unwrap().re - 30.0).abs() < 1e-14);
        let two = WeightFunction::constant(2, 2.0).unwrap();
        assert!((c.pairing(&c, Some(&two)).unwrap().re - 91.0).abs() < 1e-13);
        assert!((c.norm(Some(&two)).unwrap() - 91f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn vacuum_and_zero_norms() {
        let l = l2();
        let two = WeightFunction::constant(2, 2.0).unwrap();
        assert_eq!(FockVector::vacuum(&l).norm(Some(&two)).unwrap(), 1.0);
        assert_eq!(FockVector::zero(&l).norm(Some(&two)).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_linear_first_argument() {
        let l = l2();
        let c = chi(&l);
        let i = C::new(0.0, 1.0);
        let lhs = c.scale(i).pairing(&c, None).unwrap();
        assert!((lhs - C::new(0.0, -30.0)).norm() < 1e-13);
    }

    #[test]
    fn dense_round_trip() {
        let l = build_lattice(&[(1.0, 0.5, 2), (2.0, 1.5, 1)], 2, 2).unwrap();
        let data: Vec<C<f64>> = (0..l.basis().dim()).map(|k| C::new(k as f64, -1.0)).collect();
        let v = FockVector::from_dense(&l, None, &data).unwrap();
        assert_eq!(v.to_dense(), data);
    }

    #[test]
    fn set_block_checks_shape_and_cap() {
        let l = build_lattice(&[(1.0, 1.0, 2), (2.0, 1.0, 1)], 1, 1).unwrap();
        let mut v = FockVector::zero(&l);
        assert!(v.set_block(Chain::singleton(0), vec![C::new(1.0, 0.0)]).is_err());
        assert!(v.set_block(Chain::singleton(0), vec![C::new(1.0, 0.0); 2]).is_ok());
        assert!(v.set_block(Chain::from_points([0, 1]), vec![C::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn lattice_mismatch() {
        let a = chi(&l2());
        let other = build_lattice(&[(1.0, 2.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap();
        let b = FockVector::vacuum(&other);
        assert_eq!(a.pairing(&b, None), Err(QsError::LatticeMismatch));
    }
}
