//! The four fundamental processes, the single QS integral and the integrand
//! norms.

use std::sync::Arc;

use crate::error::{QsError, Result};
use crate::linalg::Matrix;
use crate::oracle::op_norm;
use crate::scalar::{czero, Real, C};
use crate::space::lattice::same_lattice;
use crate::space::{Chain, FockVector, Lattice, WeightFunction};
use crate::splitter::{point_insert, point_split};

/// Slot of an integrand: `−+` preservation, `∘+` creation, `−∘`
/// annihilation, `∘∘` exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Preservation,
    Creation,
    Annihilation,
    Exchange,
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::Preservation, Slot::Creation, Slot::Annihilation, Slot::Exchange];

    /// Whether the map takes its argument from the split `χ̊(x)`.
    pub fn splits(self) -> bool {
        matches!(self, Slot::Annihilation | Slot::Exchange)
    }

    /// Whether the result is inserted at `x` instead of integrated over `dx`.
    pub fn inserts(self) -> bool {
        matches!(self, Slot::Creation | Slot::Exchange)
    }

    /// Domain and codomain marked slot for the map at `x`.
    pub fn shape(self, x: usize) -> (Option<usize>, Option<usize>) {
        let m = |b: bool| if b { Some(x) } else { None };
        (m(self.splits()), m(self.inserts()))
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Slot::Preservation => "-+",
            Slot::Creation => "o+",
            Slot::Annihilation => "-o",
            Slot::Exchange => "oo",
        }
    }
}

/// A set of lattice points over which a process is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region(Chain);

impl Region {
    /// `Xᵗ = {x : t(x) < t}`.
    pub fn time_slice<T: Real>(lattice: &Lattice<T>, t: T) -> Self {
        Region(lattice.past_of_time(t))
    }

    pub fn explicit<T: Real>(lattice: &Lattice<T>, points: &[usize]) -> Result<Self> {
        for &x in points {
            lattice.check_point(x)?;
        }
        Ok(Region(Chain::from_points(points.iter().copied())))
    }

    pub fn all<T: Real>(lattice: &Lattice<T>) -> Self {
        Region(lattice.all_points())
    }

    pub fn from_chain(c: Chain) -> Self {
        Region(c)
    }

    pub fn points(self) -> Chain {
        self.0
    }

    pub fn contains(self, x: usize) -> bool {
        self.0.contains(x)
    }

    pub fn measure<T: Real>(self, lattice: &Lattice<T>) -> T {
        lattice.lambda(self.0)
    }
}

/// Per-point integrand maps `D⁻₊(x), D∘₊(x), D⁻∘(x), D∘∘(x)` as dense
/// matrices over the full basis, extended by the slot of `x` where the slot
/// requires it. Absent maps are zero.
#[derive(Debug, Clone)]
pub struct KernelQuadruple<T: Real> {
    lattice: Arc<Lattice<T>>,
    maps: [Vec<Option<Matrix<T>>>; 4],
}

fn slot_index(s: Slot) -> usize {
    match s {
        Slot::Preservation => 0,
        Slot::Creation => 1,
        Slot::Annihilation => 2,
        Slot::Exchange => 3,
    }
}

/// Dimension of the full (`None`) or marked basis.
pub(crate) fn space_dim<T: Real>(lattice: &Lattice<T>, marked: Option<usize>) -> usize {
    match marked {
        Some(x) => lattice.marked_basis(x).dim(),
        None => lattice.basis().dim(),
    }
}

impl<T: Real> KernelQuadruple<T> {
    pub fn zero(lattice: &Arc<Lattice<T>>) -> Self {
        let n = lattice.len();
        Self {
            lattice: Arc::clone(lattice),
            maps: [vec![None; n], vec![None; n], vec![None; n], vec![None; n]],
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice<T>> {
        &self.lattice
    }

    /// Expected `(rows, cols)` of the map in `slot` at `x`.
    pub fn expected_shape(&self, slot: Slot, x: usize) -> (usize, usize) {
        let (dom, cod) = slot.shape(x);
        (space_dim(&self.lattice, cod), space_dim(&self.lattice, dom))
    }

    pub fn set(&mut self, slot: Slot, x: usize, map: Matrix<T>) -> Result<()> {
        self.lattice.check_point(x)?;
        let want = self.expected_shape(slot, x);
        if map.shape() != want {
            return Err(QsError::Shape(format!(
                "{} map at point {x} must be {}x{}, got {}x{}",
                slot.symbol(),
                want.0,
                want.1,
                map.rows(),
                map.cols()
            )));
        }
        if !map.is_finite() {
            return Err(QsError::Validation(format!("{} map at point {x} is not finite", slot.symbol())));
        }
        self.maps[slot_index(slot)][x] = Some(map);
        Ok(())
    }

    pub fn clear(&mut self, slot: Slot, x: usize) {
        self.maps[slot_index(slot)][x] = None;
    }

    pub fn get(&self, slot: Slot, x: usize) -> Option<&Matrix<T>> {
        self.maps[slot_index(slot)].get(x).and_then(Option::as_ref)
    }

    /// The map in `slot` at `x`, materialized as zero when absent.
    pub fn get_or_zero(&self, slot: Slot, x: usize) -> Matrix<T> {
        match self.get(slot, x) {
            Some(m) => m.clone(),
            None => {
                let (r, c) = self.expected_shape(slot, x);
                Matrix::zeros(r, c)
            }
        }
    }

    /// Fills `slot` at every point with `f(x)`.
    pub fn with_slot(mut self, slot: Slot, mut f: impl FnMut(usize) -> Option<Matrix<T>>) -> Result<Self> {
        for x in 0..self.lattice.len() {
            match f(x) {
                Some(m) => self.set(slot, x, m)?,
                None => self.clear(slot, x),
            }
        }
        Ok(self)
    }

    /// `c` times the canonical unit map of `slot` at every point: the
    /// identity for preservation and exchange, the inclusion `κ ↦ κ` between
    /// the full and the marked space for creation and annihilation (scalar
    /// multiplicity at each point).
    pub fn with_identity(self, slot: Slot, c: C<T>) -> Result<Self> {
        let lattice = Arc::clone(&self.lattice);
        let mut maps = Vec::with_capacity(lattice.len());
        for x in 0..lattice.len() {
            maps.push(unit_map(&lattice, slot, x)?.scale(c));
        }
        let mut it = maps.into_iter();
        self.with_slot(slot, |_| it.next())
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        same_lattice(&self.lattice, &other.lattice)?;
        let mut out = self.clone();
        for s in Slot::ALL {
            for x in 0..self.lattice.len() {
                match (self.get(s, x), other.get(s, x)) {
                    (Some(a), Some(b)) => out.set(s, x, a + b)?,
                    (None, Some(b)) => out.set(s, x, b.clone())?,
                    _ => {}
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: C<T>) -> Self {
        let mut out = self.clone();
        for v in out.maps.iter_mut() {
            for m in v.iter_mut().flatten() {
                *m = m.scale(c);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.maps
            .iter()
            .all(|v| v.iter().all(|m| m.as_ref().is_none_or(|m| m.max_abs() == T::zero())))
    }
}

/// `R_x`: the inclusion of the full space onto the marked space at `x`,
/// taking the block of `κ ∌ x` (|κ| < cap) to the block of `κ`. Requires a
/// one-dimensional multiplicity space at `x`.
pub fn marked_restriction<T: Real>(lattice: &Lattice<T>, x: usize) -> Result<Matrix<T>> {
    lattice.check_point(x)?;
    if lattice.mult_dim(x) != 1 {
        return Err(QsError::ScalarContract);
    }
    let full = lattice.basis();
    let marked = lattice.marked_basis(x);
    let mut m = Matrix::zeros(marked.dim(), full.dim());
    for &k in marked.chains() {
        let (ro, size) = marked.block(k).unwrap();
        let (co, _) = full.block(k).unwrap();
        for i in 0..size {
            m[(ro + i, co + i)] = C::new(T::one(), T::zero());
        }
    }
    Ok(m)
}

/// Unit map of a slot at `x`, see [`KernelQuadruple::with_identity`].
pub fn unit_map<T: Real>(lattice: &Lattice<T>, slot: Slot, x: usize) -> Result<Matrix<T>> {
    match slot {
        Slot::Preservation => Ok(Matrix::identity(lattice.basis().dim())),
        Slot::Exchange => Ok(Matrix::identity(lattice.marked_basis(x).dim())),
        Slot::Creation => marked_restriction(lattice, x),
        Slot::Annihilation => Ok(marked_restriction(lattice, x)?.conj_transpose()),
    }
}

fn check_unmarked<T: Real>(chi: &FockVector<T>) -> Result<()> {
    if chi.marked().is_some() {
        return Err(QsError::Shape("process expects an unmarked vector".into()));
    }
    Ok(())
}

fn apply<T: Real>(m: &Matrix<T>, v: &FockVector<T>, cod: Option<usize>) -> Result<FockVector<T>> {
    FockVector::from_dense(v.lattice(), cod, &m.matvec(&v.to_dense()))
}

/// One of the four fundamental processes over `region`:
///
/// * preservation: `Σ_{x∈△} w_x [D(x)χ](ϑ)`
/// * creation: `Σ_{x∈△∩ϑ} [D(x)χ](ϑ∖x)`
/// * annihilation: `Σ_{x∈△} w_x [D(x)χ̊(x)](ϑ)`
/// * exchange: `Σ_{x∈△∩ϑ} [D(x)χ̊(x)](ϑ∖x)`
pub fn fundamental_process<T: Real>(
    kind: Slot,
    d: &KernelQuadruple<T>,
    region: Region,
    chi: &FockVector<T>,
) -> Result<FockVector<T>> {
    check_unmarked(chi)?;
    let lattice = chi.lattice();
    same_lattice(lattice, d.lattice())?;
    let mut out = FockVector::zero(lattice);
    for x in region.points().points() {
        if x >= lattice.len() {
            return Err(QsError::InvalidPoint { index: x, len: lattice.len() });
        }
        let Some(m) = d.get(kind, x) else { continue };
        let (_, cod) = kind.shape(x);
        let arg = if kind.splits() { point_split(x, chi)? } else { chi.clone() };
        let y = apply(m, &arg, cod)?;
        if kind.inserts() {
            out = out.add(&point_insert(&y)?)?;
        } else {
            out = out.axpy(C::new(lattice.weight(x), T::zero()), &y)?;
        }
    }
    Ok(out)
}

/// `i(D)` over an arbitrary region: the sum of the four processes.
pub fn qs_integral_region<T: Real>(d: &KernelQuadruple<T>, region: Region, chi: &FockVector<T>) -> Result<FockVector<T>> {
    let mut out = FockVector::zero(chi.lattice());
    for s in Slot::ALL {
        out = out.add(&fundamental_process(s, d, region, chi)?)?;
    }
    Ok(out)
}

/// `i₀ᵗ(D)χ`, integrating over `Xᵗ`.
pub fn qs_integral<T: Real>(d: &KernelQuadruple<T>, t: T, chi: &FockVector<T>) -> Result<FockVector<T>> {
    if t < T::zero() {
        return Err(QsError::Validation(format!("t must be nonnegative, got {t}")));
    }
    qs_integral_region(d, Region::time_slice(chi.lattice(), t), chi)
}

/// Per-coordinate diagonals `(q(c)w(c), w(c)/q(c))` of the (marked) basis,
/// the domain and codomain scalings of `‖·‖_q`.
pub fn q_scalings<T: Real>(lattice: &Lattice<T>, marked: Option<usize>, q: &WeightFunction<T>) -> (Vec<T>, Vec<T>) {
    let basis = match marked {
        Some(x) => lattice.marked_basis(x),
        None => lattice.basis(),
    };
    (
        basis.weight_diag(lattice, Some(q)),
        basis.weight_diag(lattice, Some(&q.reciprocal())),
    )
}

/// `‖D(x)‖_q` of the map in `slot` at `x`; zero when absent.
pub fn slot_q_norm<T: Real>(d: &KernelQuadruple<T>, slot: Slot, x: usize, q: &WeightFunction<T>) -> Result<T> {
    let Some(m) = d.get(slot, x) else { return Ok(T::zero()) };
    let lattice = d.lattice();
    let (dom, cod) = slot.shape(x);
    let (dom_w, _) = q_scalings(lattice, dom, q);
    let (_, cod_w) = q_scalings(lattice, cod, q);
    op_norm(m, &dom_w, &cod_w)
}

/// Weighted integrand norms over `Xᵗ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandNorms<T: Real> {
    /// `Σ_{x∈Xᵗ} w_x ‖D⁻₊(x)‖_q`.
    pub n1: T,
    /// `(Σ w_x ‖D∘₊(x)‖_q² r(x))^{1/2}`.
    pub n2_create: T,
    /// `(Σ w_x ‖D⁻∘(x)‖_q² r(x))^{1/2}`.
    pub n2_annih: T,
    /// `max_{x∈Xᵗ} s(x) ‖D∘∘(x)‖_q`.
    pub n_inf: T,
    pub total: T,
}

pub fn integrand_norms<T: Real>(
    d: &KernelQuadruple<T>,
    q: &WeightFunction<T>,
    r: &WeightFunction<T>,
    s: &WeightFunction<T>,
    t: T,
) -> Result<IntegrandNorms<T>> {
    let lattice = d.lattice();
    crate::space::weight::check_norm_weights(lattice.len(), q, r, s)?;
    let mut n1 = T::zero();
    let mut c2 = T::zero();
    let mut a2 = T::zero();
    let mut n_inf = T::zero();
    for x in lattice.past_of_time(t).points() {
        let w = lattice.weight(x);
        n1 = n1 + w * slot_q_norm(d, Slot::Preservation, x, q)?;
        let nc = slot_q_norm(d, Slot::Creation, x, q)?;
        c2 = c2 + w * nc * nc * r.value(x);
        let na = slot_q_norm(d, Slot::Annihilation, x, q)?;
        a2 = a2 + w * na * na * r.value(x);
        n_inf = n_inf.max(s.value(x) * slot_q_norm(d, Slot::Exchange, x, q)?);
    }
    let n2_create = c2.sqrt();
    let n2_annih = a2.sqrt();
    Ok(IntegrandNorms {
        n1,
        n2_create,
        n2_annih,
        n_inf,
        total: n1 + n2_create + n2_annih + n_inf,
    })
}

/// Dense matrix of `χ ↦ i(D)χ` over `region`, assembled column by column.
pub fn qs_integral_matrix<T: Real>(d: &KernelQuadruple<T>, region: Region) -> Result<Matrix<T>> {
    let lattice = d.lattice();
    let n = lattice.basis().dim();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        let col = qs_integral_region(d, region, &FockVector::unit(lattice, None, j)?)?.to_dense();
        for (i, z) in col.into_iter().enumerate() {
            if z != czero() {
                m[(i, j)] = z;
            }
        }
    }
    Ok(m)
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
    fn preservation_scalar_multiple() {
        let l = l2();
        let d = KernelQuadruple::zero(&l).with_identity(Slot::Preservation, re(1.5)).unwrap();
        let r = fundamental_process(Slot::Preservation, &d, Region::all(&l), &chi(&l)).unwrap();
        assert_eq!(r.to_dense(), chi(&l).scale(re(3.0)).to_dense());
    }

    #[test]
    fn creation_on_vacuum() {
        let l = l2();
        let d = KernelQuadruple::zero(&l).with_identity(Slot::Creation, re(1.0)).unwrap();
        let r = fundamental_process(Slot::Creation, &d, Region::all(&l), &FockVector::vacuum(&l)).unwrap();
        assert_eq!(r.to_dense(), vec![re(0.0), re(1.0), re(1.0), re(0.0)]);
    }

    #[test]
    fn exchange_counts_points() {
        let l = l2();
        let d = KernelQuadruple::zero(&l).with_identity(Slot::Exchange, re(1.0)).unwrap();
        let r = fundamental_process(Slot::Exchange, &d, Region::all(&l), &chi(&l)).unwrap();
        assert_eq!(r.to_dense(), vec![re(0.0), re(2.0), re(3.0), re(8.0)]);
    }

    #[test]
    fn annihilation_of_singleton() {
        let l = l2();
        let d = KernelQuadruple::zero(&l).with_identity(Slot::Annihilation, re(1.0)).unwrap();
        let mut v = FockVector::zero(&l);
        v.set_block(Chain::singleton(0), vec![re(1.0)]).unwrap();
        let r = fundamental_process(Slot::Annihilation, &d, Region::all(&l), &v).unwrap();
        assert_eq!(r.coeff(Chain::EMPTY), re(1.0));
    }

    #[test]
    fn integral_examples() {
        let l = l2();
        let zero = KernelQuadruple::zero(&l);
        assert_eq!(qs_integral(&zero, 3.0, &chi(&l)).unwrap().support_len(), 0);
        let p = zero.clone().with_identity(Slot::Preservation, re(1.0)).unwrap();
        assert_eq!(qs_integral(&p, 3.0, &chi(&l)).unwrap().to_dense(), chi(&l).scale(re(2.0)).to_dense());
        assert_eq!(qs_integral(&p, 0.5, &chi(&l)).unwrap().support_len(), 0);
        let ca = zero
            .with_identity(Slot::Creation, re(1.0))
            .unwrap()
            .with_identity(Slot::Annihilation, re(1.0))
            .unwrap();
        let r = qs_integral(&ca, 3.0, &FockVector::vacuum(&l)).unwrap();
        assert_eq!(r.to_dense(), vec![re(0.0), re(1.0), re(1.0), re(0.0)]);
    }

    #[test]
    fn norm_examples() {
        let l = l2();
        let one = WeightFunction::ones(2);
        let three = WeightFunction::constant(2, 3.0).unwrap();
        let zero = KernelQuadruple::zero(&l);
        let n = integrand_norms(&zero, &one, &one, &one, 3.0).unwrap();
        assert_eq!(n.total, 0.0);
        let p = zero.clone().with_identity(Slot::Preservation, re(1.0)).unwrap();
        let n = integrand_norms(&p, &one, &one, &one, 3.0).unwrap();
        assert!((n.n1 - 2.0).abs() < 1e-12);
        let e = zero.with_identity(Slot::Exchange, re(1.0)).unwrap();
        let n = integrand_norms(&e, &one, &one, &three, 3.0).unwrap();
        assert!((n.n_inf - 3.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let l = l2();
        let mut d = KernelQuadruple::zero(&l);
        assert!(matches!(d.set(Slot::Creation, 0, Matrix::identity(4)), Err(QsError::Shape(_))));
    }

    #[test]
    fn creation_identity_needs_scalar_multiplicity() {
        let l = build_lattice(&[(1.0, 1.0, 2)], 1, 1).unwrap();
        assert_eq!(
            KernelQuadruple::zero(&l).with_identity(Slot::Creation, re(1.0)).unwrap_err(),
            QsError::ScalarContract
        );
        assert!(KernelQuadruple::zero(&l).with_identity(Slot::Exchange, re(1.0)).is_ok());
    }
}
