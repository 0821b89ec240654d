//! Dense reference implementations, weighted adjoints and operator norms.
//!
//! Everything here is built directly from index bookkeeping on the chain
//! bases and never calls the engine's operator code.

use crate::error::{QsError, Result};
use crate::linalg::Matrix;
use crate::scalar::{czero, Real, C};
use crate::multi_qs::{ChainTable, MultiIntegrand};
use crate::space::{interleave_permutation, Chain, FockVector, Lattice, WeightFunction};
use crate::splitter::SplitBasis;

use std::sync::Arc;

/// A dense matrix together with the diagonal scalings defining the norms of
/// its domain and codomain.
#[derive(Debug, Clone)]
pub struct DenseOperator<T: Real> {
    pub matrix: Matrix<T>,
    pub domain_weight: Vec<T>,
    pub codomain_weight: Vec<T>,
}

impl<T: Real> DenseOperator<T> {
    pub fn new(matrix: Matrix<T>, domain_weight: Vec<T>, codomain_weight: Vec<T>) -> Result<Self> {
        if matrix.cols() != domain_weight.len() || matrix.rows() != codomain_weight.len() {
            return Err(QsError::Shape(format!(
                "{}x{} matrix with weights of length {} (codomain) and {} (domain)",
                matrix.rows(),
                matrix.cols(),
                codomain_weight.len(),
                domain_weight.len()
            )));
        }
        Ok(Self {
            matrix,
            domain_weight,
            codomain_weight,
        })
    }

    pub fn op_norm(&self) -> Result<T> {
        op_norm(&self.matrix, &self.domain_weight, &self.codomain_weight)
    }

    /// Pairing adjoint, mapping the codomain back into the domain.
    pub fn adjoint(&self) -> Result<Self> {
        Ok(Self {
            matrix: pairing_adjoint(&self.matrix, &self.domain_weight, &self.codomain_weight)?,
            domain_weight: self.codomain_weight.clone(),
            codomain_weight: self.domain_weight.clone(),
        })
    }
}

/// Column `j` is `action(e_j)`.
pub fn to_dense<T: Real>(
    dom_dim: usize,
    cod_dim: usize,
    mut action: impl FnMut(&[C<T>]) -> Result<Vec<C<T>>>,
) -> Result<Matrix<T>> {
    let mut m = Matrix::zeros(cod_dim, dom_dim);
    let mut e = vec![czero(); dom_dim];
    for j in 0..dom_dim {
        e[j] = C::new(T::one(), T::zero());
        let col = action(&e)?;
        e[j] = czero();
        if col.len() != cod_dim {
            return Err(QsError::Shape(format!(
                "action returned {} coordinates, expected {cod_dim}",
                col.len()
            )));
        }
        for (i, z) in col.into_iter().enumerate() {
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

/// Densifies a linear map between (marked) Fock spaces of one lattice.
pub fn to_dense_fock<T: Real>(
    lattice: &Arc<Lattice<T>>,
    dom: Option<usize>,
    cod: Option<usize>,
    mut action: impl FnMut(&FockVector<T>) -> Result<FockVector<T>>,
) -> Result<Matrix<T>> {
    let dim = |m: Option<usize>| match m {
        Some(x) => lattice.marked_basis(x).dim(),
        None => lattice.basis().dim(),
    };
    to_dense(dim(dom), dim(cod), |e| {
        let v = FockVector::from_dense(lattice, dom, e)?;
        let r = action(&v)?;
        if r.marked() != cod {
            return Err(QsError::Shape("action returned a vector on the wrong space".into()));
        }
        Ok(r.to_dense())
    })
}

fn check_diag<T: Real>(d: &[T], what: &str) -> Result<()> {
    if d.iter().all(|&v| v > T::zero() && v.is_finite()) {
        Ok(())
    } else {
        Err(QsError::Validation(format!("{what} weight must be positive and finite")))
    }
}

/// `σ_max(W_cod^{1/2} T W_dom^{-1/2})`: the norm of `T` from the space with
/// per-coordinate weights `dom` to the space with weights `cod`.
pub fn op_norm<T: Real>(t: &Matrix<T>, dom: &[T], cod: &[T]) -> Result<T> {
    check_diag(dom, "domain")?;
    check_diag(cod, "codomain")?;
    if t.cols() != dom.len() || t.rows() != cod.len() {
        return Err(QsError::Shape("weights do not match the matrix".into()));
    }
    let left: Vec<T> = cod.iter().map(|v| v.sqrt()).collect();
    let right: Vec<T> = dom.iter().map(|v| T::one() / v.sqrt()).collect();
    Ok(t.scale_rows_cols(&left, &right).spectral_norm())
}

/// `‖T‖_p`: norm from `G(p)` to `G(p⁻¹)` on the full basis.
pub fn op_norm_p<T: Real>(t: &Matrix<T>, lattice: &Lattice<T>, p: &WeightFunction<T>) -> Result<T> {
    p.require_len(lattice.len())?;
    let b = lattice.basis();
    op_norm(t, &b.weight_diag(lattice, Some(p)), &b.weight_diag(lattice, Some(&p.reciprocal())))
}

/// `T* = W_dom⁻¹ Tᴴ W_cod`, the adjoint under the weighted pairings.
pub fn pairing_adjoint<T: Real>(t: &Matrix<T>, dom: &[T], cod: &[T]) -> Result<Matrix<T>> {
    check_diag(dom, "domain")?;
    check_diag(cod, "codomain")?;
    if t.cols() != dom.len() || t.rows() != cod.len() {
        return Err(QsError::Shape("weights do not match the matrix".into()));
    }
    let inv: Vec<T> = dom.iter().map(|&v| T::one() / v).collect();
    Ok(t.conj_transpose().scale_rows_cols(&inv, cod))
}

/// Norm of `T* − S`, where `T: dom → cod`, `S: cod → dom`; zero exactly when
/// `S` is the pairing adjoint of `T`.
pub fn adjoint_residual<T: Real>(t: &Matrix<T>, s: &Matrix<T>, dom: &[T], cod: &[T]) -> Result<T> {
    let adj = pairing_adjoint(t, dom, cod)?;
    if adj.shape() != s.shape() {
        return Err(QsError::Shape(format!(
            "adjoint is {}x{}, candidate is {}x{}",
            adj.rows(),
            adj.cols(),
            s.rows(),
            s.cols()
        )));
    }
    op_norm(&(&adj - s), cod, dom)
}

/// `S_x`: full space → marked space at `x`, reading the block of `κ ⊔ x`.
pub fn dense_point_split<T: Real>(lattice: &Lattice<T>, x: usize) -> Result<Matrix<T>> {
    lattice.check_point(x)?;
    let full = lattice.basis();
    let mk = lattice.marked_basis(x);
    let mut m = Matrix::zeros(mk.dim(), full.dim());
    for &k in mk.chains() {
        let (ro, size) = mk.block(k).unwrap();
        let (co, _) = full.block(k.with(x)).unwrap();
        for i in 0..size {
            m[(ro + i, co + i)] = C::new(T::one(), T::zero());
        }
    }
    Ok(m)
}

/// `E_x`: marked space at `x` → full space, writing the block of `κ ⊔ x`.
pub fn dense_point_insert<T: Real>(lattice: &Lattice<T>, x: usize) -> Result<Matrix<T>> {
    Ok(dense_point_split(lattice, x)?.conj_transpose())
}

/// Dense `Δ` from the full basis into the split basis.
pub fn dense_split<T: Real>(lattice: &Lattice<T>, sb: &SplitBasis) -> Matrix<T> {
    let full = lattice.basis();
    let mut m = Matrix::zeros(sb.dim(), full.dim());
    for &(u, k) in sb.pairs() {
        let (ro, size) = sb.block(u, k).unwrap();
        let (co, _) = full.block(u.union(k)).unwrap();
        let perm = interleave_permutation(lattice, u, k);
        for i in 0..size {
            m[(ro + i, co + perm[i])] = C::new(T::one(), T::zero());
        }
    }
    m
}

/// Dense `Δ*` from the split basis into the full basis.
pub fn dense_split_adjoint<T: Real>(lattice: &Lattice<T>, sb: &SplitBasis) -> Matrix<T> {
    dense_split(lattice, sb).conj_transpose()
}

/// Kind of a fundamental process for [`dense_process`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Preserve,
    Create,
    Annihilate,
    Exchange,
}

/// Dense fundamental process over `region`, composed from the per-point
/// maps with `S_x`, `E_x` and the measure weights. `maps[x]` is `None` for
/// absent maps.
pub fn dense_process<T: Real>(
    lattice: &Lattice<T>,
    kind: ProcessKind,
    maps: &[Option<Matrix<T>>],
    region: Chain,
) -> Result<Matrix<T>> {
    let n = lattice.basis().dim();
    let mut acc = Matrix::zeros(n, n);
    for x in region.points() {
        let Some(d) = maps.get(x).and_then(Option::as_ref) else { continue };
        let w = C::new(lattice.weight(x), T::zero());
        let term = match kind {
            ProcessKind::Preserve => d.scale(w),
            ProcessKind::Create => dense_point_insert(lattice, x)?.matmul(d),
            ProcessKind::Annihilate => d.matmul(&dense_point_split(lattice, x)?).scale(w),
            ProcessKind::Exchange => dense_point_insert(lattice, x)?
                .matmul(d)
                .matmul(&dense_point_split(lattice, x)?),
        };
        if term.shape() != (n, n) {
            return Err(QsError::Shape(format!("map at point {x} has the wrong shape for {kind:?}")));
        }
        acc = &acc + &term;
    }
    Ok(acc)
}

/// Literal nested-loop evaluation of `ı₀ᵗ(M)χ`: for every output chain `ϑ`
/// and every decomposition `ϑ = ρ ⊔ υ∘∘ ⊔ υ∘₊` with both slots in `ϑᵗ`, sum
/// over `υ⁻₊, υ⁻∘ ⊆ Xᵗ` the weighted coefficient `[M(𝝊) χ(· ⊔ υ⁻∘ ⊔ υ∘∘)](ρ)`.
pub fn brute_multi_integral<T: Real>(m: &MultiIntegrand<T>, t: T, chi: &FockVector<T>) -> Result<FockVector<T>> {
    let lattice = chi.lattice();
    if !lattice.is_scalar() {
        return Err(QsError::ScalarContract);
    }
    let basis = lattice.basis();
    let h = lattice.initial_dim();
    let past = lattice.past_of_time(t);
    let past_chains: Vec<Chain> = past.subsets().collect();
    let mut out = FockVector::zero(lattice);
    for &th in basis.chains() {
        let th_past = th.intersection(past);
        let mut acc = vec![czero(); h];
        for a in th_past.subsets() {
            for b in th_past.difference(a).subsets() {
                let rho = th.difference(a).difference(b);
                let (ro, _) = basis.block(rho).unwrap();
                for &p in &past_chains {
                    for &c in &past_chains {
                        let table = ChainTable::new(p, c, b, a);
                        let Some(map) = m.get(&table) else { continue };
                        let wt = lattice.measure(p) * lattice.measure(c);
                        let removed = c.union(a);
                        for &k in basis.chains() {
                            if !k.is_disjoint(removed) {
                                continue;
                            }
                            let Some(src) = chi.block(k.union(removed)) else { continue };
                            let (co, _) = basis.block(k).unwrap();
                            for i in 0..h {
                                for j in 0..h {
                                    acc[i] = acc[i] + map[(ro + i, co + j)] * src[j] * wt;
                                }
                            }
                        }
                    }
                }
            }
        }
        if acc.iter().any(|z| *z != czero()) {
            out.set_block(th, acc)?;
        }
    }
    Ok(out)
}

/// Dense `ı₀ᵗ(M)` composed table by table as
/// `w(υ⁻₊)w(υ⁻∘) · Ins(υ∘₊⊔υ∘∘) · M(𝝊) · Cut(υ⁻∘⊔υ∘∘)`.
pub fn dense_multi_integral<T: Real>(m: &MultiIntegrand<T>, t: T) -> Result<Matrix<T>> {
    let lattice = m.lattice();
    let basis = lattice.basis();
    let n = basis.dim();
    let past = lattice.past_of_time(t);
    // shift(s)[(k ⊔ s), k] = 1 for k disjoint from s
    let shift = |s: Chain| {
        let mut mat = Matrix::zeros(n, n);
        for &k in basis.chains() {
            if !k.is_disjoint(s) {
                continue;
            }
            if let (Some((ro, size)), Some((co, _))) = (basis.block(k.union(s)), basis.block(k)) {
                for i in 0..size {
                    mat[(ro + i, co + i)] = C::new(T::one(), T::zero());
                }
            }
        }
        mat
    };
    let mut acc = Matrix::zeros(n, n);
    for (table, map) in m.iter() {
        if !table.union().is_subset(past) {
            continue;
        }
        let wt = C::new(lattice.measure(table.preservation) * lattice.measure(table.annihilation), T::zero());
        let ins = shift(table.creation.union(table.exchange));
        let cut = shift(table.annihilation.union(table.exchange)).conj_transpose();
        acc = &acc + &ins.matmul(map).matmul(&cut).scale(wt);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_lattice;

    fn re(x: f64) -> C<f64> {
        C::new(x, 0.0)
    }

    #[test]
    fn identity_densifies_to_identity() {
        let l = build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap();
        let m = to_dense_fock(&l, None, None, |v| Ok(v.clone())).unwrap();
        assert_eq!(m, Matrix::identity(4));
        let z = to_dense_fock(&l, None, None, |v| Ok(v.scale(re(0.0)))).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn identity_norms() {
        let l = build_lattice(&[(1.0, 0.5, 1), (2.0, 2.0, 1)], 1, 2).unwrap();
        let id = Matrix::<f64>::identity(4);
        assert!((op_norm_p(&id, &l, &WeightFunction::ones(2)).unwrap() - 1.0).abs() < 1e-14);
        let p = WeightFunction::new(vec![1.5, 3.0]).unwrap();
        assert!((op_norm_p(&id, &l, &p).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exchange_is_number_operator() {
        let l = build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap();
        let maps: Vec<_> = (0..2).map(|x| Some(Matrix::identity(l.marked_basis(x).dim()))).collect();
        let m = dense_process(&l, ProcessKind::Exchange, &maps, Chain::prefix(2)).unwrap();
        let d: Vec<C<f64>> = [0.0, 1.0, 1.0, 2.0].iter().map(|&x| re(x)).collect();
        assert_eq!(m, Matrix::diagonal(&d));
    }

    #[test]
    fn adjoint_residuals() {
        let id = Matrix::<f64>::identity(3);
        let w = [0.5, 1.0, 2.0];
        assert!(adjoint_residual(&id, &id, &w, &w).unwrap() < 1e-15);
        let t = Matrix::from_fn(3, 3, |i, j| re((i * 3 + j) as f64));
        assert!(adjoint_residual(&t, &t, &w, &w).unwrap() > 0.1);
    }

    #[test]
    fn rejects_zero_weight() {
        let id = Matrix::<f64>::identity(2);
        assert!(matches!(op_norm(&id, &[1.0, 0.0], &[1.0, 1.0]), Err(QsError::Validation(_))));
    }
}
