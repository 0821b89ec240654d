//! Multiple QS integrals of table-indexed integrands, their norm, adjoint,
//! point derivatives and differential.
//!
//! Multiplicity spaces must be one-dimensional here; the initial space may
//! have any dimension.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{QsError, Result};
use crate::linalg::Matrix;
use crate::oracle::{op_norm, pairing_adjoint};
use crate::scalar::{czero, Real, C};
use crate::single_qs::{marked_restriction, q_scalings, KernelQuadruple, Slot};
use crate::space::lattice::same_lattice;
use crate::space::{Chain, FockVector, Lattice, WeightFunction};

/// Four pairwise disjoint chains: preservation `υ⁻₊`, annihilation `υ⁻∘`,
/// creation `υ∘₊`, exchange `υ∘∘`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ChainTable {
    pub preservation: Chain,
    pub annihilation: Chain,
    pub creation: Chain,
    pub exchange: Chain,
}

impl ChainTable {
    pub const EMPTY: ChainTable = ChainTable {
        preservation: Chain::EMPTY,
        annihilation: Chain::EMPTY,
        creation: Chain::EMPTY,
        exchange: Chain::EMPTY,
    };

    pub fn new(preservation: Chain, annihilation: Chain, creation: Chain, exchange: Chain) -> Self {
        Self {
            preservation,
            annihilation,
            creation,
            exchange,
        }
    }

    /// The single-point table with `x` in `slot`.
    pub fn atomic(x: usize, slot: Slot) -> Self {
        Self::EMPTY.with(x, slot)
    }

    pub fn get(&self, slot: Slot) -> Chain {
        match slot {
            Slot::Preservation => self.preservation,
            Slot::Annihilation => self.annihilation,
            Slot::Creation => self.creation,
            Slot::Exchange => self.exchange,
        }
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut Chain {
        match slot {
            Slot::Preservation => &mut self.preservation,
            Slot::Annihilation => &mut self.annihilation,
            Slot::Creation => &mut self.creation,
            Slot::Exchange => &mut self.exchange,
        }
    }

    /// Copy with `x` adjoined to `slot`.
    pub fn with(mut self, x: usize, slot: Slot) -> Self {
        let c = self.slot_mut(slot);
        *c = c.with(x);
        self
    }

    /// Copy with `x` removed from `slot`.
    pub fn without(mut self, x: usize, slot: Slot) -> Self {
        let c = self.slot_mut(slot);
        *c = c.without(x);
        self
    }

    pub fn union(&self) -> Chain {
        self.preservation
            .union(self.annihilation)
            .union(self.creation)
            .union(self.exchange)
    }

    pub fn total_len(&self) -> usize {
        self.preservation.len() + self.annihilation.len() + self.creation.len() + self.exchange.len()
    }

    pub fn is_disjoint(&self) -> bool {
        self.union().len() == self.total_len()
    }

    /// Creation and annihilation slots swapped.
    pub fn transposed(&self) -> Self {
        Self {
            preservation: self.preservation,
            annihilation: self.creation,
            creation: self.annihilation,
            exchange: self.exchange,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.union().is_empty()
    }
}

impl std::fmt::Display for ChainTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(-+ {}, -o {}, o+ {}, oo {})",
            self.preservation, self.annihilation, self.creation, self.exchange
        )
    }
}

/// Finite table-indexed family of operators on the full truncated space.
#[derive(Debug, Clone)]
pub struct MultiIntegrand<T: Real> {
    lattice: Arc<Lattice<T>>,
    maps: BTreeMap<ChainTable, Matrix<T>>,
}

impl<T: Real> MultiIntegrand<T> {
    pub fn zero(lattice: &Arc<Lattice<T>>) -> Result<Self> {
        if !lattice.is_scalar() {
            return Err(QsError::ScalarContract);
        }
        Ok(Self {
            lattice: Arc::clone(lattice),
            maps: BTreeMap::new(),
        })
    }

    pub fn lattice(&self) -> &Arc<Lattice<T>> {
        &self.lattice
    }

    pub fn insert(&mut self, table: ChainTable, map: Matrix<T>) -> Result<()> {
        if !table.is_disjoint() {
            return Err(QsError::Table(format!("slots of {table} overlap")));
        }
        if !table.union().is_subset(self.lattice.all_points()) {
            return Err(QsError::Table(format!("{table} uses points outside the lattice")));
        }
        if table.total_len() > self.lattice.cap() {
            return Err(QsError::Table(format!("{table} is longer than the cap {}", self.lattice.cap())));
        }
        let n = self.lattice.basis().dim();
        if map.shape() != (n, n) {
            return Err(QsError::Shape(format!(
                "map at {table} must be {n}x{n}, got {}x{}",
                map.rows(),
                map.cols()
            )));
        }
        self.maps.insert(table, map);
        Ok(())
    }

    pub fn get(&self, table: &ChainTable) -> Option<&Matrix<T>> {
        self.maps.get(table)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChainTable, &Matrix<T>)> {
        self.maps.iter()
    }

    pub fn support_len(&self) -> usize {
        self.maps.len()
    }

    /// `M(∅)`, zero when absent.
    pub fn empty_value(&self) -> Matrix<T> {
        let n = self.lattice.basis().dim();
        self.maps
            .get(&ChainTable::EMPTY)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(n, n))
    }

    pub fn scalar(lattice: &Arc<Lattice<T>>, c: C<T>) -> Result<Self> {
        let mut m = Self::zero(lattice)?;
        m.insert(ChainTable::EMPTY, Matrix::scalar(lattice.basis().dim(), c))?;
        Ok(m)
    }
}

/// `ı₀ᵗ(M)χ`. For each table inside `Xᵗ` the argument is split along
/// `υ⁻∘ ⊔ υ∘∘`, the map is applied, and the result is re-extended by
/// `υ∘₊ ⊔ υ∘∘`, weighted by `w(υ⁻₊) w(υ⁻∘)`.
pub fn multi_integral<T: Real>(m: &MultiIntegrand<T>, t: T, chi: &FockVector<T>) -> Result<FockVector<T>> {
    if t < T::zero() {
        return Err(QsError::Validation(format!("t must be nonnegative, got {t}")));
    }
    if chi.marked().is_some() {
        return Err(QsError::Shape("multiple integral expects an unmarked vector".into()));
    }
    let lattice = chi.lattice();
    same_lattice(lattice, m.lattice())?;
    let past = lattice.past_of_time(t);
    let basis = lattice.basis();
    let h = lattice.initial_dim();
    let mut out = FockVector::zero(lattice);
    for (table, map) in m.iter() {
        if !table.union().is_subset(past) {
            continue;
        }
        let removed = table.annihilation.union(table.exchange);
        let added = table.creation.union(table.exchange);
        let wt = C::new(
            lattice.measure(table.preservation) * lattice.measure(table.annihilation),
            T::zero(),
        );
        let mut phi = vec![czero(); basis.dim()];
        let mut any = false;
        for (i, &k) in basis.chains().iter().enumerate() {
            if !k.is_disjoint(removed) {
                continue;
            }
            if let Some(b) = chi.block(k.union(removed)) {
                let (off, _) = basis.block_at(i);
                phi[off..off + h].copy_from_slice(b);
                any = true;
            }
        }
        if !any {
            continue;
        }
        let y = map.matvec(&phi);
        for (i, &r) in basis.chains().iter().enumerate() {
            if !r.is_disjoint(added) {
                continue;
            }
            let (off, _) = basis.block_at(i);
            out.accumulate(r.union(added), &y[off..off + h], wt);
        }
    }
    Ok(out)
}

/// Dense matrix of `ı₀ᵗ(M)`, assembled column by column.
pub fn multi_integral_matrix<T: Real>(m: &MultiIntegrand<T>, t: T) -> Result<Matrix<T>> {
    let lattice = m.lattice();
    let n = lattice.basis().dim();
    let mut out = Matrix::zeros(n, n);
    for j in 0..n {
        let col = multi_integral(m, t, &FockVector::unit(lattice, None, j)?)?.to_dense();
        for (i, z) in col.into_iter().enumerate() {
            out[(i, j)] = z;
        }
    }
    Ok(out)
}

/// `‖A‖_q` from `G(q)` to `G(q⁻¹)` on the full basis.
fn q_norm<T: Real>(lattice: &Lattice<T>, a: &Matrix<T>, q: &WeightFunction<T>) -> Result<T> {
    let (dom, cod) = q_scalings(lattice, None, q);
    op_norm(a, &dom, &cod)
}

/// `‖M‖^s_{q,t}(r) = Σ_{υ⁻₊} w(υ⁻₊) (Σ_{υ∘₊,υ⁻∘} w w r (max_{υ∘∘} s ‖M‖_q)²)^{1/2}`
/// over tables inside `Xᵗ`.
pub fn multi_norm<T: Real>(
    m: &MultiIntegrand<T>,
    q: &WeightFunction<T>,
    r: &WeightFunction<T>,
    s: &WeightFunction<T>,
    t: T,
) -> Result<T> {
    let lattice = m.lattice();
    crate::space::weight::check_norm_weights(lattice.len(), q, r, s)?;
    let past = lattice.past_of_time(t);
    // (p, c, b) -> max over a of s(a)‖M‖_q
    let mut sup: BTreeMap<(Chain, Chain, Chain), T> = BTreeMap::new();
    for (table, map) in m.iter() {
        if !table.union().is_subset(past) {
            continue;
        }
        let v = s.chain_weight(table.exchange) * q_norm(lattice, map, q)?;
        let e = sup
            .entry((table.preservation, table.annihilation, table.creation))
            .or_insert(T::zero());
        *e = e.max(v);
    }
    let mut inner: BTreeMap<Chain, T> = BTreeMap::new();
    for ((p, c, b), v) in sup {
        let bc = b.union(c);
        let term = lattice.measure(b) * lattice.measure(c) * r.chain_weight(bc) * v * v;
        let e = inner.entry(p).or_insert(T::zero());
        *e = *e + term;
    }
    Ok(inner
        .into_iter()
        .map(|(p, v)| lattice.measure(p) * v.sqrt())
        .sum())
}

/// Per-coordinate measure `w(ϑ)` of the full basis.
fn measure_diag<T: Real>(lattice: &Lattice<T>) -> Vec<T> {
    lattice.basis().weight_diag(lattice, None)
}

/// `M‡`: creation and annihilation slots swapped, each map replaced by its
/// adjoint under the measure pairing.
pub fn adjoint_integrand<T: Real>(m: &MultiIntegrand<T>) -> Result<MultiIntegrand<T>> {
    let lattice = m.lattice();
    let w = measure_diag(lattice);
    let mut out = MultiIntegrand::zero(lattice)?;
    for (table, map) in m.iter() {
        out.insert(table.transposed(), pairing_adjoint(map, &w, &w)?)?;
    }
    Ok(out)
}

/// `Ṁ(υ) = M(υ` with `x` adjoined to `slot)`.
pub fn point_derivative<T: Real>(m: &MultiIntegrand<T>, x: usize, slot: Slot) -> Result<MultiIntegrand<T>> {
    let lattice = m.lattice();
    lattice.check_point(x)?;
    let mut out = MultiIntegrand::zero(lattice)?;
    for (table, map) in m.iter() {
        if table.get(slot).contains(x) {
            out.insert(table.without(x, slot), map.clone())?;
        }
    }
    Ok(out)
}

/// `D(x)` in `slot`: `ı₀^{t(x)}(Ṁ)` at `x`, moved onto the marked space of
/// `x` where the slot requires it.
pub fn qs_derivative_at<T: Real>(m: &MultiIntegrand<T>, x: usize, slot: Slot) -> Result<Matrix<T>> {
    let lattice = m.lattice();
    let a = multi_integral_matrix(&point_derivative(m, x, slot)?, lattice.time(x))?;
    let r = marked_restriction(lattice, x)?;
    Ok(match slot {
        Slot::Preservation => a,
        Slot::Creation => r.matmul(&a),
        Slot::Annihilation => a.matmul(&r.conj_transpose()),
        Slot::Exchange => r.matmul(&a).matmul(&r.conj_transpose()),
    })
}

/// The quadruple of derivatives at every lattice point.
pub fn qs_derivatives<T: Real>(m: &MultiIntegrand<T>) -> Result<KernelQuadruple<T>> {
    let lattice = m.lattice();
    let mut d = KernelQuadruple::zero(lattice);
    for x in 0..lattice.len() {
        for slot in Slot::ALL {
            let a = qs_derivative_at(m, x, slot)?;
            if a.max_abs() > T::zero() {
                d.set(slot, x, a)?;
            }
        }
    }
    Ok(d)
}

/// Single integrand as a multi-integrand on atomic tables.
pub fn embed_single<T: Real>(d: &KernelQuadruple<T>) -> Result<MultiIntegrand<T>> {
    let lattice = d.lattice();
    let mut m = MultiIntegrand::zero(lattice)?;
    for x in 0..lattice.len() {
        let r = marked_restriction(lattice, x)?;
        let e = r.conj_transpose();
        for slot in Slot::ALL {
            let Some(dm) = d.get(slot, x) else { continue };
            let full = match slot {
                Slot::Preservation => dm.clone(),
                Slot::Creation => e.matmul(dm),
                Slot::Annihilation => dm.matmul(&r),
                Slot::Exchange => e.matmul(dm).matmul(&r),
            };
            m.insert(ChainTable::atomic(x, slot), full)?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_qs::qs_integral;
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
    fn scalar_integrand_scales() {
        let l = l2();
        let m = MultiIntegrand::scalar(&l, C::new(2.0, 1.0)).unwrap();
        let r = multi_integral(&m, 3.0, &chi(&l)).unwrap();
        assert_eq!(r.to_dense(), chi(&l).scale(C::new(2.0, 1.0)).to_dense());
        let one = WeightFunction::ones(2);
        let m1 = MultiIntegrand::scalar(&l, re(1.0)).unwrap();
        assert!((multi_norm(&m1, &one, &one, &one, 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(multi_norm(&MultiIntegrand::zero(&l).unwrap(), &one, &one, &one, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn table_invariants() {
        let l = l2();
        let mut m = MultiIntegrand::zero(&l).unwrap();
        let bad = ChainTable::new(Chain::singleton(0), Chain::singleton(0), Chain::EMPTY, Chain::EMPTY);
        assert!(matches!(m.insert(bad, Matrix::identity(4)), Err(QsError::Table(_))));
        assert!(matches!(
            m.insert(ChainTable::EMPTY, Matrix::identity(3)),
            Err(QsError::Shape(_))
        ));
    }

    #[test]
    fn adjoint_conjugates_and_swaps() {
        let l = l2();
        let m = MultiIntegrand::scalar(&l, C::new(1.0, 2.0)).unwrap();
        let a = adjoint_integrand(&m).unwrap();
        assert_eq!(a.empty_value(), Matrix::scalar(4, C::new(1.0, -2.0)));
        let mut c = MultiIntegrand::zero(&l).unwrap();
        c.insert(ChainTable::atomic(1, Slot::Creation), Matrix::identity(4)).unwrap();
        let a = adjoint_integrand(&c).unwrap();
        assert!(a.get(&ChainTable::atomic(1, Slot::Annihilation)).is_some());
    }

    #[test]
    fn embed_single_matches_single_integral() {
        let l = l2();
        let d = KernelQuadruple::zero(&l)
            .with_identity(Slot::Creation, re(1.0))
            .unwrap()
            .with_identity(Slot::Annihilation, re(0.5))
            .unwrap()
            .with_identity(Slot::Exchange, re(2.0))
            .unwrap()
            .with_identity(Slot::Preservation, re(-1.0))
            .unwrap();
        let m = embed_single(&d).unwrap();
        let c = chi(&l);
        let a = multi_integral(&m, 3.0, &c).unwrap();
        let b = qs_integral(&d, 3.0, &c).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-14);
        let pd = point_derivative(&m, 1, Slot::Exchange).unwrap();
        assert_eq!(pd.support_len(), 1);
        assert!(pd.get(&ChainTable::EMPTY).is_some());
    }

    #[test]
    fn scalar_only_has_no_derivatives() {
        let l = l2();
        let m = MultiIntegrand::scalar(&l, re(3.0)).unwrap();
        assert!(qs_derivatives(&m).unwrap().is_zero());
    }

    #[test]
    fn rejects_multiplicity() {
        let l = build_lattice(&[(1.0, 1.0, 2)], 1, 1).unwrap();
        assert_eq!(MultiIntegrand::zero(&l).unwrap_err(), QsError::ScalarContract);
    }
}
