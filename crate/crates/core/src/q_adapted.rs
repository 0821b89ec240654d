//! Q-adapted integrands: past projections, Q-ampliation of past kernels,
//! g-commutators of creation and annihilation integrals, and the Wiener
//! operator.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{QsError, Result};
use crate::linalg::Matrix;
use crate::multi_qs::{ChainTable, MultiIntegrand};
use crate::scalar::{czero, Real, C};
use crate::single_qs::{fundamental_process, qs_integral_matrix, KernelQuadruple, Region, Slot};
use crate::space::lattice::same_lattice;
use crate::space::{Basis, Chain, FockVector, Lattice, WeightFunction};

/// `[P_t χ](ϑ) = χ(ϑ)` if `ϑ ⊆ Xᵗ`, else 0.
pub fn past_projection<T: Real>(t: T, chi: &FockVector<T>) -> Result<FockVector<T>> {
    if t < T::zero() {
        return Err(QsError::Validation(format!("t must be nonnegative, got {t}")));
    }
    let past = chi.lattice().past_of_time(t);
    let marked = chi.marked();
    Ok(chi.restrict(|c| c.is_subset(past) && marked.is_none_or(|x| past.contains(x))))
}

/// Per-point operators `Q(x)` on the multiplicity spaces together with a
/// weight `q` bounding their norms.
#[derive(Debug, Clone)]
pub struct QFunction<T: Real> {
    lattice: Arc<Lattice<T>>,
    values: Vec<Matrix<T>>,
    witness: WeightFunction<T>,
}

impl<T: Real> QFunction<T> {
    pub fn new(lattice: &Arc<Lattice<T>>, values: Vec<Matrix<T>>, witness: WeightFunction<T>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(QsError::Shape(format!(
                "expected {} point operators, got {}",
                lattice.len(),
                values.len()
            )));
        }
        witness.require_len(lattice.len())?;
        for (x, q) in values.iter().enumerate() {
            let d = lattice.mult_dim(x);
            if q.shape() != (d, d) {
                return Err(QsError::Shape(format!("Q({x}) must be {d}x{d}")));
            }
            let n = q.spectral_norm();
            if n > witness.value(x) * (T::one() + T::lit(1e-12)) {
                return Err(QsError::Weight(format!(
                    "‖Q({x})‖ = {n} exceeds the contractivity bound {}",
                    witness.value(x)
                )));
            }
        }
        Ok(Self {
            lattice: Arc::clone(lattice),
            values,
            witness,
        })
    }

    /// Witness `max(‖Q(x)‖, 1)`.
    fn with_default_witness(lattice: &Arc<Lattice<T>>, values: Vec<Matrix<T>>) -> Result<Self> {
        let w = WeightFunction::new(values.iter().map(|q| q.spectral_norm().max(T::one())).collect())?;
        Self::new(lattice, values, w)
    }

    /// `c · I` at every point.
    pub fn constant(lattice: &Arc<Lattice<T>>, c: C<T>) -> Result<Self> {
        let values = (0..lattice.len())
            .map(|x| Matrix::scalar(lattice.mult_dim(x), c))
            .collect();
        Self::with_default_witness(lattice, values)
    }

    pub fn identity(lattice: &Arc<Lattice<T>>) -> Result<Self> {
        Self::constant(lattice, C::new(T::one(), T::zero()))
    }

    pub fn zero(lattice: &Arc<Lattice<T>>) -> Result<Self> {
        Self::constant(lattice, czero())
    }

    /// `c_x · I` at point `x`.
    pub fn per_point(lattice: &Arc<Lattice<T>>, values: &[C<T>]) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(QsError::Shape(format!("expected {} values", lattice.len())));
        }
        let mats = values
            .iter()
            .enumerate()
            .map(|(x, &c)| Matrix::scalar(lattice.mult_dim(x), c))
            .collect();
        Self::with_default_witness(lattice, mats)
    }

    pub fn lattice(&self) -> &Arc<Lattice<T>> {
        &self.lattice
    }

    pub fn at(&self, x: usize) -> &Matrix<T> {
        &self.values[x]
    }

    pub fn witness(&self) -> &WeightFunction<T> {
        &self.witness
    }

    /// Pointwise adjoint `Q*`.
    pub fn adjoint(&self) -> Self {
        Self {
            lattice: Arc::clone(&self.lattice),
            values: self.values.iter().map(Matrix::conj_transpose).collect(),
            witness: self.witness.clone(),
        }
    }

    /// `‖[Q(x), Q(x)*]‖ ≤ tol`.
    pub fn is_normal(&self, x: usize, tol: T) -> bool {
        let q = &self.values[x];
        let qs = q.conj_transpose();
        (&q.matmul(&qs) - &qs.matmul(q)).max_abs() <= tol
    }

    /// `⊗_{y∈c} Q(y)` in time order; `[1]` for the empty chain.
    pub fn tensor(&self, c: Chain) -> Matrix<T> {
        c.points()
            .fold(Matrix::identity(1), |acc, y| acc.kron(&self.values[y]))
    }

    /// `⊗_{y∈c} Q(y)*Q(y)`.
    pub fn gram_tensor(&self, c: Chain) -> Matrix<T> {
        c.points().fold(Matrix::identity(1), |acc, y| {
            let q = &self.values[y];
            acc.kron(&q.conj_transpose().matmul(q))
        })
    }
}

/// Chains before `x` admissible on the full space (`marked = None`) or beside
/// the slot of `x`.
pub fn past_sector<T: Real>(lattice: &Lattice<T>, x: usize, marked: bool) -> Result<Basis> {
    lattice.check_point(x)?;
    if marked {
        if lattice.cap() == 0 {
            return Err(QsError::Validation("a marked slot needs cap ≥ 1".into()));
        }
        Ok(lattice.sector_basis(Chain::before(x), lattice.cap() - 1, Some(x)))
    } else {
        Ok(lattice.sector_basis(Chain::before(x), lattice.cap(), None))
    }
}

fn sub_block<T: Real>(m: &Matrix<T>, r0: usize, rn: usize, c0: usize, cn: usize) -> Matrix<T> {
    Matrix::from_fn(rn, cn, |i, j| m[(r0 + i, c0 + j)])
}

/// Full-space map of `slot` at `x` acting as `k` on the past sector and as
/// `⊗ Q(y)` on the future factors. For preservation the future starts at `x`;
/// for the other slots it is strictly after `x`.
pub fn q_ampliation<T: Real>(k: &Matrix<T>, q: &QFunction<T>, x: usize, slot: Slot) -> Result<Matrix<T>> {
    let lattice = q.lattice();
    let (dom_m, cod_m) = slot.shape(x);
    let dom_past = past_sector(lattice, x, dom_m.is_some())?;
    let cod_past = past_sector(lattice, x, cod_m.is_some())?;
    if k.shape() != (cod_past.dim(), dom_past.dim()) {
        return Err(QsError::Shape(format!(
            "past kernel must be {}x{}, got {}x{}",
            cod_past.dim(),
            dom_past.dim(),
            k.rows(),
            k.cols()
        )));
    }
    let full = |m: Option<usize>| match m {
        Some(x) => lattice.marked_basis(x),
        None => lattice.basis(),
    };
    let dom_full = full(dom_m);
    let cod_full = full(cod_m);
    let mut out = Matrix::zeros(cod_full.dim(), dom_full.dim());
    for &th in dom_full.chains() {
        let past = th.part_before(x);
        let future = if slot == Slot::Preservation {
            th.part_from(x)
        } else {
            th.part_after(x)
        };
        if past.union(future) != th {
            continue;
        }
        let Some((pc0, pcn)) = dom_past.block(past) else { continue };
        let (fc0, _) = dom_full.block(th).unwrap();
        let qf = q.tensor(future);
        for &pp in cod_past.chains() {
            let Some((fr0, _)) = cod_full.block(pp.union(future)) else { continue };
            let (pr0, prn) = cod_past.block(pp).unwrap();
            let kb = sub_block(k, pr0, prn, pc0, pcn);
            if kb.max_abs() == T::zero() {
                continue;
            }
            let blk = kb.kron(&qf);
            for i in 0..blk.rows() {
                for j in 0..blk.cols() {
                    out[(fr0 + i, fc0 + j)] = blk[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// Past-sector map of `slot` at `x` taking the block of `υ` to the block of
/// `υ` via `f(υ)` acting on the initial space. Between the full and the
/// marked sector this needs a one-dimensional multiplicity space at `x`.
pub fn diagonal_past_map<T: Real>(
    lattice: &Lattice<T>,
    x: usize,
    slot: Slot,
    mut f: impl FnMut(Chain) -> Matrix<T>,
) -> Result<Matrix<T>> {
    let (dom_m, cod_m) = slot.shape(x);
    if dom_m != cod_m && lattice.mult_dim(x) != 1 {
        return Err(QsError::ScalarContract);
    }
    let dom = past_sector(lattice, x, dom_m.is_some())?;
    let cod = past_sector(lattice, x, cod_m.is_some())?;
    let h = lattice.initial_dim();
    let mut out = Matrix::zeros(cod.dim(), dom.dim());
    for &u in cod.chains() {
        let Some((c0, _)) = dom.block(u) else { continue };
        let (r0, size) = cod.block(u).unwrap();
        let fu = f(u);
        if fu.shape() != (h, h) {
            return Err(QsError::Shape(format!("initial-space operator must be {h}x{h}")));
        }
        let blk = fu.kron(&Matrix::identity(size / h));
        for i in 0..size {
            for j in 0..size {
                out[(r0 + i, c0 + j)] = blk[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Scalar kernel `K(x, υ)` on past chains `υ ⊆ X^{t(x)}`, acting as a
/// multiple of the identity.
#[derive(Debug, Clone)]
pub struct DiagonalKernel<T: Real> {
    lattice: Arc<Lattice<T>>,
    k: Vec<C<T>>,
    h: Vec<C<T>>,
}

impl<T: Real> DiagonalKernel<T> {
    /// `K(x, υ) = k(x) ∏_{z∈υ} h(z)`.
    pub fn separable(lattice: &Arc<Lattice<T>>, k: Vec<C<T>>, h: Vec<C<T>>) -> Result<Self> {
        if k.len() != lattice.len() || h.len() != lattice.len() {
            return Err(QsError::Shape(format!("k and h need {} values each", lattice.len())));
        }
        Ok(Self {
            lattice: Arc::clone(lattice),
            k,
            h,
        })
    }

    /// `K ≡ c`.
    pub fn constant(lattice: &Arc<Lattice<T>>, c: C<T>) -> Result<Self> {
        let one = C::new(T::one(), T::zero());
        Self::separable(lattice, vec![c; lattice.len()], vec![one; lattice.len()])
    }

    pub fn value(&self, x: usize, u: Chain) -> C<T> {
        debug_assert!(u.is_subset(Chain::before(x)));
        u.points().fold(self.k[x], |acc, z| acc * self.h[z])
    }

    pub fn k(&self) -> &[C<T>] {
        &self.k
    }

    pub fn h(&self) -> &[C<T>] {
        &self.h
    }

    pub fn past_map(&self, x: usize, slot: Slot) -> Result<Matrix<T>> {
        let h = self.lattice.initial_dim();
        diagonal_past_map(&self.lattice, x, slot, |u| Matrix::scalar(h, self.value(x, u)))
    }
}

/// Q-adapted creation integrand `D∘₊(x) = K∘₊(x) ⊗ Q^⊗`.
pub fn creation_integrand<T: Real>(kp: &DiagonalKernel<T>, q: &QFunction<T>) -> Result<KernelQuadruple<T>> {
    same_lattice(&kp.lattice, q.lattice())?;
    let mut maps = Vec::with_capacity(q.lattice().len());
    for x in 0..q.lattice().len() {
        maps.push(q_ampliation(&kp.past_map(x, Slot::Creation)?, q, x, Slot::Creation)?);
    }
    let mut it = maps.into_iter();
    KernelQuadruple::zero(q.lattice()).with_slot(Slot::Creation, |_| it.next())
}

/// Q-adapted annihilation integrand `D⁻∘(x) = K⁻∘(x) ⊗ Q*^⊗`.
pub fn annihilation_integrand<T: Real>(km: &DiagonalKernel<T>, q: &QFunction<T>) -> Result<KernelQuadruple<T>> {
    same_lattice(&km.lattice, q.lattice())?;
    let qs = q.adjoint();
    let mut maps = Vec::with_capacity(q.lattice().len());
    for x in 0..q.lattice().len() {
        maps.push(q_ampliation(&km.past_map(x, Slot::Annihilation)?, &qs, x, Slot::Annihilation)?);
    }
    let mut it = maps.into_iter();
    KernelQuadruple::zero(q.lattice()).with_slot(Slot::Annihilation, |_| it.next())
}

/// Two-point kernel `g(z, x)`, including its diagonal `g(x, x)`.
#[derive(Debug, Clone)]
pub struct GKernel<T: Real> {
    values: Vec<Vec<C<T>>>,
}

impl<T: Real> GKernel<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        Self {
            values: (0..n).map(|z| (0..n).map(|x| f(z, x)).collect()).collect(),
        }
    }

    /// `g(z,x) = h_ann(z) q(x)` for `z < x`, `conj(q(z)) h_cre(x)` for `x < z`,
    /// and `h_ann(x) q(x)` on the diagonal.
    pub fn separable(h_ann: &[C<T>], h_cre: &[C<T>], q: &[C<T>]) -> Result<Self> {
        let n = q.len();
        if h_ann.len() != n || h_cre.len() != n {
            return Err(QsError::Shape("h_ann, h_cre and q must have equal lengths".into()));
        }
        Ok(Self::from_fn(n, |z, x| {
            if z <= x {
                h_ann[z] * q[x]
            } else {
                q[z].conj() * h_cre[x]
            }
        }))
    }

    /// Constant `g ≡ q` off the diagonal (conjugated below it) and `q` on it.
    pub fn constant(n: usize, q: C<T>) -> Self {
        Self::from_fn(n, |z, x| if x < z { q.conj() } else { q })
    }

    /// `g(z, x) = exp(i (p(x) − p(z)))`.
    pub fn phase(p: &[T]) -> Self {
        Self::from_fn(p.len(), |z, x| {
            let a = p[x] - p[z];
            C::new(a.cos(), a.sin())
        })
    }

    pub fn value(&self, z: usize, x: usize) -> C<T> {
        self.values[z][x]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `g*(x, z) = g(z, x)` off the diagonal, up to `tol`.
    pub fn is_self_adjoint(&self, tol: T) -> bool {
        let n = self.len();
        (0..n).all(|z| (0..n).all(|x| z == x || (self.values[x][z].conj() - self.values[z][x]).norm() <= tol))
    }
}

fn point_process_matrix<T: Real>(d: &KernelQuadruple<T>, slot: Slot, x: usize) -> Result<Matrix<T>> {
    let lattice = d.lattice();
    let n = lattice.basis().dim();
    let region = Region::from_chain(Chain::singleton(x));
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        let col = fundamental_process(slot, d, region, &FockVector::unit(lattice, None, j)?)?.to_dense();
        for (i, z) in col.into_iter().enumerate() {
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

/// `Λ(D⁻∘)Λ(D∘₊) − Σ_{z,x} g(z,x) Λ∘₊(dz)D∘₊(z) D⁻∘(x)Λ⁻∘(dx)` over `Xᵗ`.
pub fn g_commutator<T: Real>(
    dm: &KernelQuadruple<T>,
    dp: &KernelQuadruple<T>,
    g: &GKernel<T>,
    t: T,
) -> Result<Matrix<T>> {
    let lattice = dm.lattice();
    same_lattice(lattice, dp.lattice())?;
    if g.len() != lattice.len() {
        return Err(QsError::Shape(format!("g must be defined on {} points", lattice.len())));
    }
    let past = lattice.past_of_time(t);
    let n = lattice.basis().dim();
    let pts: Vec<usize> = past.points().collect();
    let a: Vec<Matrix<T>> = pts
        .iter()
        .map(|&x| point_process_matrix(dm, Slot::Annihilation, x))
        .collect::<Result<_>>()?;
    let c: Vec<Matrix<T>> = pts
        .iter()
        .map(|&z| point_process_matrix(dp, Slot::Creation, z))
        .collect::<Result<_>>()?;
    let sum = |ms: &[Matrix<T>]| ms.iter().fold(Matrix::zeros(n, n), |acc, m| &acc + m);
    let mut out = sum(&a).matmul(&sum(&c));
    for (iz, &z) in pts.iter().enumerate() {
        let mut ga = Matrix::zeros(n, n);
        for (ix, &x) in pts.iter().enumerate() {
            ga = &ga + &a[ix].scale(g.value(z, x));
        }
        out = &out - &c[iz].matmul(&ga);
    }
    Ok(out)
}

/// `Σ_{x∈Xᵗ} w_x K⁻∘(x)K∘₊(x) ⊗ (Q*Q)^⊗` on the factors from `x` on.
pub fn expected_g_commutator<T: Real>(
    km: &DiagonalKernel<T>,
    kp: &DiagonalKernel<T>,
    q: &QFunction<T>,
    t: T,
) -> Result<Matrix<T>> {
    let lattice = q.lattice();
    same_lattice(lattice, &km.lattice)?;
    same_lattice(lattice, &kp.lattice)?;
    let basis = lattice.basis();
    let past = lattice.past_of_time(t);
    let mut out = Matrix::zeros(basis.dim(), basis.dim());
    for &th in basis.chains() {
        let (off, size) = basis.block(th).unwrap();
        for x in past.points() {
            let before = th.part_before(x);
            let c = km.value(x, before) * kp.value(x, before) * lattice.weight(x);
            if c == czero() {
                continue;
            }
            let lead = size / lattice.block_size(th.part_from(x)) * lattice.initial_dim();
            let blk = Matrix::identity(lead).kron(&q.gram_tensor(th.part_from(x))).scale(c);
            for i in 0..size {
                for j in 0..size {
                    out[(off + i, off + j)] = out[(off + i, off + j)] + blk[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// Occupied-point part of the g-commutator:
/// `−Σ_{x∈ϑ∩Xᵗ} w_x K⁻∘K∘₊ [g(x,x) (QQ*)^⊗(ϑ>x) + (Q*Q)^⊗(ϑ≥x)]`.
/// Vanishes for `Q = −I` with `g(x,x) = −1` and for `Q = 0`.
pub fn occupied_defect<T: Real>(
    km: &DiagonalKernel<T>,
    kp: &DiagonalKernel<T>,
    q: &QFunction<T>,
    g: &GKernel<T>,
    t: T,
) -> Result<Matrix<T>> {
    let lattice = q.lattice();
    same_lattice(lattice, &km.lattice)?;
    same_lattice(lattice, &kp.lattice)?;
    if g.len() != lattice.len() {
        return Err(QsError::Shape(format!("g must be defined on {} points", lattice.len())));
    }
    let basis = lattice.basis();
    let past = lattice.past_of_time(t);
    let co = |c: Chain| {
        c.points().fold(Matrix::identity(1), |acc, y| {
            let m = q.at(y);
            acc.kron(&m.matmul(&m.conj_transpose()))
        })
    };
    let mut out = Matrix::zeros(basis.dim(), basis.dim());
    for &th in basis.chains() {
        let (off, size) = basis.block(th).unwrap();
        for x in th.intersection(past).points() {
            let before = th.part_before(x);
            let c = km.value(x, before) * kp.value(x, before) * lattice.weight(x);
            if c == czero() {
                continue;
            }
            let lead = size / lattice.block_size(th.part_from(x)) * lattice.initial_dim();
            let after = th.part_after(x);
            let dx = lattice.mult_dim(x);
            let occ = Matrix::identity(dx).kron(&co(after)).scale(g.value(x, x));
            let full = &occ + &q.gram_tensor(th.part_from(x));
            let blk = Matrix::identity(lead).kron(&full).scale(-c);
            for i in 0..size {
                for j in 0..size {
                    out[(off + i, off + j)] = out[(off + i, off + j)] + blk[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// Spectral norm of `a − b` restricted to chains whose continuation is not
/// cut by the cap.
pub fn unsaturated_residual<T: Real>(lattice: &Lattice<T>, a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.shape() != b.shape() || a.rows() != lattice.basis().dim() {
        return Err(QsError::Shape("operators must act on the full basis".into()));
    }
    sector_residual(lattice, a, b, |c| !lattice.is_saturated(c))
}

/// Spectral norm of `a − b` restricted to chains satisfying `keep`.
pub fn sector_residual<T: Real>(lattice: &Lattice<T>, a: &Matrix<T>, b: &Matrix<T>, keep: impl Fn(Chain) -> bool) -> Result<T> {
    let idx: Vec<usize> = lattice
        .basis()
        .coordinate_chains()
        .into_iter()
        .enumerate()
        .filter(|(_, c)| keep(*c))
        .map(|(i, _)| i)
        .collect();
    let d = a - b;
    Ok(Matrix::from_fn(idx.len(), idx.len(), |i, j| d[(idx[i], idx[j])]).spectral_norm())
}

/// Largest deviation of `m` from the factorized form
/// `m[p⊔f, p'⊔f'] = δ_{ff'} m[p, p'] ⊗ Q^⊗(f)` with `p, p' ⊆ Xᵗ` and
/// `f, f'` after `t`.
pub fn factorization_residual<T: Real>(m: &Matrix<T>, q: &QFunction<T>, t: T) -> Result<T> {
    let lattice = q.lattice();
    let basis = lattice.basis();
    if m.shape() != (basis.dim(), basis.dim()) {
        return Err(QsError::Shape("operator must act on the full basis".into()));
    }
    let past = lattice.past_of_time(t);
    let mut worst = T::zero();
    for &r in basis.chains() {
        let (pr, fr) = (r.intersection(past), r.difference(past));
        let (r0, rn) = basis.block(r).unwrap();
        let (pr0, prn) = basis.block(pr).unwrap();
        for &c in basis.chains() {
            let (pc, fc) = (c.intersection(past), c.difference(past));
            let (c0, cn) = basis.block(c).unwrap();
            let actual = sub_block(m, r0, rn, c0, cn);
            let dev = if fr == fc {
                let (pc0, pcn) = basis.block(pc).unwrap();
                let expect = sub_block(m, pr0, prn, pc0, pcn).kron(&q.tensor(fr));
                (&actual - &expect).max_abs()
            } else {
                actual.max_abs()
            };
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

/// `K ⊗ I` on the full space for an initial-space operator `K`.
pub fn initial_ampliation<T: Real>(lattice: &Lattice<T>, k: &Matrix<T>) -> Result<Matrix<T>> {
    let h = lattice.initial_dim();
    if k.shape() != (h, h) {
        return Err(QsError::Shape(format!("initial-space operator must be {h}x{h}")));
    }
    let basis = lattice.basis();
    let mut out = Matrix::zeros(basis.dim(), basis.dim());
    for &c in basis.chains() {
        let (off, size) = basis.block(c).unwrap();
        let blk = k.kron(&Matrix::identity(size / h));
        for i in 0..size {
            for j in 0..size {
                out[(off + i, off + j)] = blk[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `m(𝝊) · Q^⊗` on the full space for scalar kernel values `m`.
pub fn trivially_adapted<T: Real>(
    lattice: &Arc<Lattice<T>>,
    m: &BTreeMap<ChainTable, C<T>>,
    q: &QFunction<T>,
) -> Result<MultiIntegrand<T>> {
    same_lattice(lattice, q.lattice())?;
    let basis = lattice.basis();
    let mut amp = Matrix::zeros(basis.dim(), basis.dim());
    for &c in basis.chains() {
        let (off, size) = basis.block(c).unwrap();
        let blk = Matrix::identity(lattice.initial_dim()).kron(&q.tensor(c));
        for i in 0..size {
            for j in 0..size {
                amp[(off + i, off + j)] = blk[(i, j)];
            }
        }
    }
    let mut out = MultiIntegrand::zero(lattice)?;
    for (tab, &v) in m {
        out.insert(*tab, amp.scale(v))?;
    }
    Ok(out)
}

/// Multi-integrand `M(𝝊) = m(υ⁻∘ ⊔ υ∘₊) δ_∅(υ⁻₊) δ_∅(υ∘∘)` times the identity.
pub fn wiener_chaos_integrand<T: Real>(
    lattice: &Arc<Lattice<T>>,
    mut m: impl FnMut(Chain) -> C<T>,
) -> Result<MultiIntegrand<T>> {
    let n = lattice.basis().dim();
    let mut out = MultiIntegrand::zero(lattice)?;
    for &u in lattice.basis().chains() {
        let v = m(u);
        if v == czero() {
            continue;
        }
        for ann in u.subsets() {
            let tab = ChainTable::new(Chain::EMPTY, ann, u.difference(ann), Chain::EMPTY);
            out.insert(tab, Matrix::scalar(n, v))?;
        }
    }
    Ok(out)
}

/// Dense `ŵ(△) = A∘₊(△) + A⁻∘(△)`.
pub fn wiener_op<T: Real>(lattice: &Arc<Lattice<T>>, region: Region) -> Result<Matrix<T>> {
    if !lattice.is_scalar() || lattice.initial_dim() != 1 {
        return Err(QsError::ScalarContract);
    }
    let one = C::new(T::one(), T::zero());
    let d = KernelQuadruple::zero(lattice)
        .with_identity(Slot::Creation, one)?
        .with_identity(Slot::Annihilation, one)?;
    qs_integral_matrix(&d, region)
}

/// `⟨δ_∅| ŵ(△)^k δ_∅⟩`.
pub fn vacuum_moment<T: Real>(lattice: &Arc<Lattice<T>>, region: Region, k: usize) -> Result<T> {
    let w = wiener_op(lattice, region)?;
    let mut v = FockVector::vacuum(lattice).to_dense();
    for _ in 0..k {
        v = w.matvec(&v);
    }
    Ok(v[0].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_lattice;

    fn re(x: f64) -> C<f64> {
        C::new(x, 0.0)
    }

    fn l2() -> Arc<Lattice<f64>> {
        build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap()
    }

    #[test]
    fn past_projection_examples() {
        let l = l2();
        let chi = FockVector::from_scalars(&l, &[re(1.0), re(2.0), re(3.0), re(4.0)]).unwrap();
        assert_eq!(past_projection(5.0, &chi).unwrap(), chi);
        assert_eq!(past_projection(0.0, &chi).unwrap().to_dense(), vec![re(1.0), re(0.0), re(0.0), re(0.0)]);
        assert_eq!(past_projection(1.5, &chi).unwrap().to_dense(), vec![re(1.0), re(2.0), re(0.0), re(0.0)]);
    }

    #[test]
    fn ampliation_at_last_point_is_past_kernel() {
        let l = build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 2)], 1, 2).unwrap();
        let q = QFunction::constant(&l, re(0.5)).unwrap();
        let k = Matrix::from_fn(4, 4, |i, j| re((i + 2 * j) as f64));
        let d = q_ampliation(&k, &q, 1, Slot::Exchange).unwrap();
        assert_eq!(d, k);
    }

    #[test]
    fn identity_q_gives_plain_ampliation() {
        let l = l2();
        let q = QFunction::identity(&l).unwrap();
        let k = Matrix::scalar(1, re(3.0));
        let d = q_ampliation(&k, &q, 0, Slot::Preservation).unwrap();
        assert_eq!(d, Matrix::scalar(4, re(3.0)));
        let z = QFunction::zero(&l).unwrap();
        let d0 = q_ampliation(&k, &z, 0, Slot::Preservation).unwrap();
        let diag: Vec<C<f64>> = [3.0, 0.0, 0.0, 0.0].iter().map(|&v| re(v)).collect();
        assert_eq!(d0, Matrix::diagonal(&diag));
    }

    #[test]
    fn one_point_relations() {
        let w = 0.7;
        let l = build_lattice(&[(1.0, w, 1)], 1, 1).unwrap();
        let one = DiagonalKernel::constant(&l, re(1.0)).unwrap();
        for (qv, expect) in [(-1.0, [w, w]), (0.0, [w, 0.0]), (1.0, [w, -w])] {
            let q = QFunction::constant(&l, re(qv)).unwrap();
            let dm = annihilation_integrand(&one, &q).unwrap();
            let dp = creation_integrand(&one, &q).unwrap();
            let g = GKernel::constant(1, re(qv));
            let c = g_commutator(&dm, &dp, &g, 2.0).unwrap();
            let e: Vec<C<f64>> = expect.iter().map(|&v| re(v)).collect();
            assert!((&c - &Matrix::diagonal(&e)).max_abs() < 1e-15, "q = {qv}");
        }
    }

    fn random_kernels(l: &Arc<Lattice<f64>>, seed: u64, unit_h: bool) -> (DiagonalKernel<f64>, DiagonalKernel<f64>) {
        let mut r = crate::sample::rng(seed);
        let n = l.len();
        let mut draw = |unit: bool| -> Vec<C<f64>> {
            (0..n).map(|_| if unit { re(1.0) } else { crate::sample::complex(&mut r) }).collect()
        };
        let (km, hm, kp, hp) = (draw(false), draw(unit_h), draw(false), draw(unit_h));
        (
            DiagonalKernel::separable(l, km, hm).unwrap(),
            DiagonalKernel::separable(l, kp, hp).unwrap(),
        )
    }

    fn commutator_residual(l: &Arc<Lattice<f64>>, qv: f64, seed: u64, unit_h: bool) -> (f64, f64) {
        let (km, kp) = random_kernels(l, seed, unit_h);
        let q = QFunction::constant(l, re(qv)).unwrap();
        let dm = annihilation_integrand(&km, &q).unwrap();
        let dp = creation_integrand(&kp, &q).unwrap();
        let qs = vec![re(qv); l.len()];
        let g = GKernel::separable(km.h(), kp.h(), &qs).unwrap();
        let t = 10.0;
        let c = g_commutator(&dm, &dp, &g, t).unwrap();
        let e = expected_g_commutator(&km, &kp, &q, t).unwrap();
        let full = unsaturated_residual(l, &c, &e).unwrap();
        let vac = sector_residual(l, &c, &e, |ch| ch.is_empty()).unwrap();
        let e2 = &e + &occupied_defect(&km, &kp, &q, &g, t).unwrap();
        assert!(unsaturated_residual(l, &c, &e2).unwrap() < 1e-12, "defect identity, q = {qv}");
        (full, vac)
    }

    #[test]
    fn fermi_and_monotone_relations_are_exact() {
        let l = build_lattice(&[(1.0, 0.5, 1), (2.0, 1.2, 1), (3.0, 0.8, 1)], 1, 3).unwrap();
        for seed in 0..3 {
            assert!(commutator_residual(&l, -1.0, seed, true).0 < 1e-12);
            assert!(commutator_residual(&l, 0.0, seed, true).0 < 1e-12);
            assert!(commutator_residual(&l, 0.0, seed, false).0 < 1e-12);
        }
    }

    #[test]
    fn bose_relation_is_exact_on_vacuum() {
        let l = build_lattice(&[(1.0, 0.5, 1), (2.0, 1.2, 1), (3.0, 0.8, 1)], 1, 2).unwrap();
        let (full, vac) = commutator_residual(&l, 1.0, 4, true);
        assert!(vac < 1e-12);
        assert!(full > 1e-3);
    }

    #[test]
    fn defect_identity_holds_for_general_q_and_h() {
        let l = build_lattice(&[(1.0, 0.5, 1), (2.0, 1.2, 1), (3.0, 0.8, 1)], 1, 2).unwrap();
        for (i, qv) in [0.3, -1.0, 1.0, -0.6].into_iter().enumerate() {
            commutator_residual(&l, qv, 10 + i as u64, false);
        }
    }

    #[test]
    fn wiener_second_moment() {
        let l = l2();
        assert!((vacuum_moment(&l, Region::all(&l), 2).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(vacuum_moment(&l, Region::all(&l), 1).unwrap(), 0.0);
    }

    #[test]
    fn separable_g_is_self_adjoint_for_matching_h() {
        let h = [re(0.5), C::new(0.2, 0.3), re(2.0)];
        let hc: Vec<C<f64>> = h.iter().map(|z| z.conj()).collect();
        let q = [re(1.0), re(-1.0), re(0.5)];
        let g = GKernel::separable(&hc, &h, &q).unwrap();
        assert!(g.is_self_adjoint(1e-15));
    }

    #[test]
    fn contractivity_witness_enforced() {
        let l = l2();
        let mats = vec![Matrix::scalar(1, re(2.0)), Matrix::scalar(1, re(0.5))];
        assert!(QFunction::new(&l, mats, WeightFunction::ones(2)).is_err());
    }
}
