use std::collections::HashMap;
use std::sync::Arc;

use super::chain::{chains_within, Chain, MAX_POINTS};
use super::weight::WeightFunction;
use crate::error::{QsError, Result};
use crate::scalar::Real;

/// Upper bound on the number of complex coefficients of the full chain basis.
pub const MAX_BASIS_DIM: usize = 1 << 22;

/// One point of the discretized ordered space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint<T: Real> {
    pub time: T,
    /// Quadrature weight standing in for the measure of the point.
    pub weight: T,
    /// Dimension of the multiplicity space at the point.
    pub mult_dim: usize,
}

impl<T: Real> LatticePoint<T> {
    pub fn new(time: T, weight: T, mult_dim: usize) -> Self {
        Self {
            time,
            weight,
            mult_dim,
        }
    }
}

/// An indexed family of chains together with the block layout of their
/// coefficients.
///
/// The block of chain `c` has `initial_dim · ∏ mult_dim` entries over the
/// points of `c` (plus the marked point, if any), laid out row-major with the
/// initial space first and multiplicity factors in increasing time order.
#[derive(Debug, Clone)]
pub struct Basis {
    chains: Vec<Chain>,
    index: HashMap<Chain, usize>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    dim: usize,
    marked: Option<usize>,
}

impl Basis {
    fn build<T: Real>(lattice: &LatticeData<T>, chains: Vec<Chain>, marked: Option<usize>) -> Self {
        let mut offsets = Vec::with_capacity(chains.len());
        let mut sizes = Vec::with_capacity(chains.len());
        let mut index = HashMap::with_capacity(chains.len());
        let mut dim = 0;
        for (i, &c) in chains.iter().enumerate() {
            let full = match marked {
                Some(x) => c.with(x),
                None => c,
            };
            let size = lattice.block_size(full);
            offsets.push(dim);
            sizes.push(size);
            index.insert(c, i);
            dim += size;
        }
        Self {
            chains,
            index,
            offsets,
            sizes,
            dim,
            marked,
        }
    }

    #[inline]
    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.chains.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// The point carried as an extra tensor slot by every chain, if any.
    #[inline]
    pub fn marked(&self) -> Option<usize> {
        self.marked
    }

    #[inline]
    pub fn position(&self, c: Chain) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Dense offset and block size of chain `c`.
    #[inline]
    pub fn block(&self, c: Chain) -> Option<(usize, usize)> {
        self.position(c).map(|i| (self.offsets[i], self.sizes[i]))
    }

    #[inline]
    pub fn block_at(&self, i: usize) -> (usize, usize) {
        (self.offsets[i], self.sizes[i])
    }

    pub fn contains(&self, c: Chain) -> bool {
        self.index.contains_key(&c)
    }

    /// Chain of each dense coordinate.
    pub fn coordinate_chains(&self) -> Vec<Chain> {
        let mut out = Vec::with_capacity(self.dim);
        for (i, &c) in self.chains.iter().enumerate() {
            out.extend(std::iter::repeat_n(c, self.sizes[i]));
        }
        out
    }

    /// Per-coordinate diagonal `f(c) · w(c)`; the marked point does not
    /// contribute. `None` means `f ≡ 1`.
    pub fn weight_diag<T: Real>(&self, lattice: &Lattice<T>, f: Option<&WeightFunction<T>>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim);
        for (i, &c) in self.chains.iter().enumerate() {
            let mut v = lattice.measure(c);
            if let Some(f) = f {
                v = v * f.chain_weight(c);
            }
            out.extend(std::iter::repeat_n(v, self.sizes[i]));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LatticeData<T: Real> {
    points: Vec<LatticePoint<T>>,
    initial_dim: usize,
    cap: usize,
}

impl<T: Real> LatticeData<T> {
    fn block_size(&self, c: Chain) -> usize {
        c.points().fold(self.initial_dim, |acc, x| acc * self.points[x].mult_dim)
    }
}

/// The discretized ordered space: points with strictly increasing times,
/// positive weights, multiplicity dimensions, the initial-space dimension and
/// the chain-length cap that truncates the Fock space.
#[derive(Debug, Clone)]
pub struct Lattice<T: Real> {
    data: LatticeData<T>,
    basis: Basis,
    marked: Vec<Basis>,
}

impl<T: Real> PartialEq for Lattice<T> {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl<T: Real> Lattice<T> {
    pub fn new(points: Vec<LatticePoint<T>>, initial_dim: usize, cap: usize) -> Result<Arc<Self>> {
        if points.len() > MAX_POINTS {
            return Err(QsError::Validation(format!(
                "at most {MAX_POINTS} lattice points are supported, got {}",
                points.len()
            )));
        }
        if initial_dim == 0 {
            return Err(QsError::Validation("initial_dim must be at least 1".into()));
        }
        if cap > points.len() {
            return Err(QsError::Validation(format!(
                "cap {cap} exceeds the number of points {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.time.is_finite() {
                return Err(QsError::Validation(format!("time of point {i} is not finite")));
            }
            if !(p.weight > T::zero()) || !p.weight.is_finite() {
                return Err(QsError::Validation(format!(
                    "weight of point {i} must be positive and finite, got {}",
                    p.weight
                )));
            }
            if p.mult_dim == 0 {
                return Err(QsError::Validation(format!("mult_dim of point {i} must be at least 1")));
            }
            if i > 0 && !(p.time > points[i - 1].time) {
                return Err(QsError::Ordering {
                    prev_index: i - 1,
                    index: i,
                    previous: points[i - 1].time.to_f64_lossy(),
                    current: p.time.to_f64_lossy(),
                });
            }
        }
        let data = LatticeData {
            points,
            initial_dim,
            cap,
        };
        let n = data.points.len();
        let chains = chains_within(Chain::prefix(n), cap);
        let basis = Basis::build(&data, chains, None);
        if basis.dim() > MAX_BASIS_DIM {
            return Err(QsError::Validation(format!(
                "chain basis dimension {} exceeds the supported maximum {MAX_BASIS_DIM}",
                basis.dim()
            )));
        }
        let marked = (0..n)
            .map(|x| {
                let chains = if cap == 0 {
                    Vec::new()
                } else {
                    chains_within(Chain::prefix(n).without(x), cap - 1)
                };
                Basis::build(&data, chains, Some(x))
            })
            .collect();
        Ok(Arc::new(Self {
            data,
            basis,
            marked,
        }))
    }

    #[inline]
    pub fn points(&self) -> &[LatticePoint<T>] {
        &self.data.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.points.is_empty()
    }

    #[inline]
    pub fn initial_dim(&self) -> usize {
        self.data.initial_dim
    }

    #[inline]
    pub fn cap(&self) -> usize {
        self.data.cap
    }

    #[inline]
    pub fn time(&self, x: usize) -> T {
        self.data.points[x].time
    }

    #[inline]
    pub fn weight(&self, x: usize) -> T {
        self.data.points[x].weight
    }

    #[inline]
    pub fn mult_dim(&self, x: usize) -> usize {
        self.data.points[x].mult_dim
    }

    pub fn is_scalar(&self) -> bool {
        self.data.points.iter().all(|p| p.mult_dim == 1)
    }

    pub fn all_points(&self) -> Chain {
        Chain::prefix(self.len())
    }

    /// The full truncated chain basis.
    #[inline]
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Basis of the space carrying an extra multiplicity slot at `x`: chains
    /// not containing `x` of length below the cap, each with the block layout
    /// of the chain with `x` adjoined.
    #[inline]
    pub fn marked_basis(&self, x: usize) -> &Basis {
        &self.marked[x]
    }

    /// Basis of chains inside `allowed` of length at most `max_len`,
    /// optionally carrying the slot of point `marked`.
    pub fn sector_basis(&self, allowed: Chain, max_len: usize, marked: Option<usize>) -> Basis {
        let allowed = allowed.intersection(self.all_points());
        let allowed = match marked {
            Some(x) => allowed.without(x),
            None => allowed,
        };
        Basis::build(&self.data, chains_within(allowed, max_len), marked)
    }

    pub fn block_size(&self, c: Chain) -> usize {
        self.data.block_size(c)
    }

    /// Product measure `w(c) = ∏_{x∈c} w_x`.
    pub fn measure(&self, c: Chain) -> T {
        c.points().fold(T::one(), |acc, x| acc * self.data.points[x].weight)
    }

    /// Total weight of a set of points.
    pub fn lambda(&self, region: Chain) -> T {
        region.points().map(|x| self.data.points[x].weight).sum()
    }

    /// Points with time strictly below `t`.
    pub fn past_of_time(&self, t: T) -> Chain {
        Chain::from_points((0..self.len()).filter(|&x| self.data.points[x].time < t))
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(QsError::InvalidPoint {
                index: x,
                len: self.len(),
            })
        }
    }

    pub fn check_chain(&self, c: Chain) -> Result<()> {
        if !c.is_subset(self.all_points()) {
            return Err(QsError::InvalidChain(format!("{c} uses points outside the lattice")));
        }
        if c.len() > self.cap() {
            return Err(QsError::InvalidChain(format!("{c} is longer than the cap {}", self.cap())));
        }
        Ok(())
    }

    /// Chains of maximal length whose continuation is cut by the cap; empty
    /// when the cap equals the number of points.
    pub fn is_saturated(&self, c: Chain) -> bool {
        self.cap() < self.len() && c.len() == self.cap()
    }
}

/// Builds a lattice from `(time, weight, mult_dim)` triples.
pub fn build_lattice<T: Real>(spec: &[(T, T, usize)], initial_dim: usize, cap: usize) -> Result<Arc<Lattice<T>>> {
    Lattice::new(
        spec.iter().map(|&(t, w, d)| LatticePoint::new(t, w, d)).collect(),
        initial_dim,
        cap,
    )
}

/// `n` equally spaced points of weight `measure / n` on `(0, measure]`.
pub fn uniform_lattice<T: Real>(n: usize, measure: T, initial_dim: usize, cap: usize) -> Result<Arc<Lattice<T>>> {
    let w = measure / T::lit(n as f64);
    let spec: Vec<(T, T, usize)> = (0..n).map(|i| (w * T::lit((i + 1) as f64), w, 1)).collect();
    build_lattice(&spec, initial_dim, cap.min(n))
}

pub(crate) fn same_lattice<T: Real>(a: &Arc<Lattice<T>>, b: &Arc<Lattice<T>>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(QsError::LatticeMismatch)
    }
}

/// Index permutation taking a block laid out as `[h][a-factors][b-factors]`
/// to the time-ordered layout of `a ⊔ b`: `out[i]` is the merged position of
/// split position `i`.
pub fn interleave_permutation<T: Real>(lattice: &Lattice<T>, a: Chain, b: Chain) -> Vec<usize> {
    debug_assert!(a.is_disjoint(b));
    let merged = a.union(b);
    let h = lattice.initial_dim();
    // split-order factor list: a's points then b's points
    let split_pts: Vec<usize> = a.points().chain(b.points()).collect();
    let merged_pts: Vec<usize> = merged.points().collect();
    let dims_split: Vec<usize> = split_pts.iter().map(|&x| lattice.mult_dim(x)).collect();
    // stride of each point in the merged layout
    let mut merged_stride = vec![0usize; merged_pts.len()];
    let mut s = 1;
    for k in (0..merged_pts.len()).rev() {
        merged_stride[k] = s;
        s *= lattice.mult_dim(merged_pts[k]);
    }
    let factor_total = s;
    let stride_for: Vec<usize> = split_pts
        .iter()
        .map(|x| merged_stride[merged_pts.iter().position(|y| y == x).unwrap()])
        .collect();
    let mut out = Vec::with_capacity(h * factor_total);
    for hi in 0..h {
        let mut digits = vec![0usize; split_pts.len()];
        for _ in 0..factor_total {
            let pos: usize = digits.iter().zip(&stride_for).map(|(d, st)| d * st).sum();
            out.push(hi * factor_total + pos);
            // increment split-order digits (last varies fastest)
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < dims_split[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_lattice_basis() {
        let l = build_lattice(&[(1.0, 1.0, 1), (2.0, 1.0, 1)], 1, 2).unwrap();
        let masks: Vec<u64> = l.basis().chains().iter().map(|c| c.mask()).collect();
        assert_eq!(masks, vec![0, 1, 2, 3]);
        assert_eq!(l.basis().dim(), 4);
    }

    #[test]
    fn one_point_lattice() {
        let l = build_lattice(&[(1.0, 0.5, 1)], 1, 1).unwrap();
        assert_eq!(l.basis().dim(), 2);
    }

    #[test]
    fn ordering_error() {
        let e = build_lattice(&[(2.0, 1.0, 1), (1.0, 1.0, 1)], 1, 2).unwrap_err();
        assert!(matches!(e, QsError::Ordering { .. }));
        let e = build_lattice(&[(1.0, 1.0, 1), (1.0, 1.0, 1)], 1, 2).unwrap_err();
        assert!(matches!(e, QsError::Ordering { .. }));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            build_lattice(&[(1.0, 0.0, 1)], 1, 1),
            Err(QsError::Validation(_))
        ));
        assert!(matches!(
            build_lattice(&[(1.0, 1.0, 0)], 1, 1),
            Err(QsError::Validation(_))
        ));
        assert!(matches!(
            build_lattice(&[(1.0, 1.0, 1)], 1, 2),
            Err(QsError::Validation(_))
        ));
    }

    #[test]
    fn multiplicity_block_sizes() {
        let l = build_lattice(&[(1.0, 1.0, 2), (2.0, 1.0, 3)], 2, 2).unwrap();
        assert_eq!(l.basis().dim(), 2 * (1 + 2 + 3 + 6));
        // marked at point 0: chains {∅, {1}} with blocks of {0} and {0,1}
        assert_eq!(l.marked_basis(0).dim(), 2 * (2 + 6));
    }

    #[test]
    fn interleave_moves_factors_into_time_order() {
        // a = {1} (dim 3), b = {0} (dim 2); split layout [a][b], merged [0][1]
        let l = build_lattice(&[(1.0, 1.0, 2), (2.0, 1.0, 3)], 1, 2).unwrap();
        let perm = interleave_permutation(&l, Chain::singleton(1), Chain::singleton(0));
        // split index (ia, ib) = ia*2 + ib  ->  merged ib*3 + ia
        for ia in 0..3 {
            for ib in 0..2 {
                assert_eq!(perm[ia * 2 + ib], ib * 3 + ia);
            }
        }
    }
}
