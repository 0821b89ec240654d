use std::fmt;

/// A finite chain of lattice points, stored as a bitmask over point indices.
///
/// Lattice times strictly increase with the index, so every subset of points
/// is a chain and bit order is time order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Chain(u64);

/// Largest number of lattice points a chain can index.
pub const MAX_POINTS: usize = 63;

impl Chain {
    pub const EMPTY: Chain = Chain(0);

    #[inline]
    pub const fn from_mask(mask: u64) -> Self {
        Chain(mask)
    }

    #[inline]
    pub const fn mask(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn singleton(x: usize) -> Self {
        debug_assert!(x < MAX_POINTS);
        Chain(1u64 << x)
    }

    /// Builds a chain from point indices in any order; duplicates collapse.
    pub fn from_points<I: IntoIterator<Item = usize>>(points: I) -> Self {
        Chain(points.into_iter().fold(0u64, |m, x| m | (1u64 << x)))
    }

    /// Mask of all points strictly before `x`.
    #[inline]
    pub fn before(x: usize) -> Self {
        Chain((1u64 << x) - 1)
    }

    /// Mask of the first `n` points.
    #[inline]
    pub fn prefix(n: usize) -> Self {
        if n >= 64 {
            Chain(u64::MAX)
        } else {
            Chain((1u64 << n) - 1)
        }
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn contains(self, x: usize) -> bool {
        x < 64 && self.0 & (1u64 << x) != 0
    }

    #[inline]
    pub fn is_disjoint(self, other: Chain) -> bool {
        self.0 & other.0 == 0
    }

    #[inline]
    pub fn is_subset(self, other: Chain) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn union(self, other: Chain) -> Chain {
        Chain(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Chain) -> Chain {
        Chain(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Chain) -> Chain {
        Chain(self.0 & !other.0)
    }

    #[inline]
    pub fn with(self, x: usize) -> Chain {
        Chain(self.0 | (1u64 << x))
    }

    #[inline]
    pub fn without(self, x: usize) -> Chain {
        Chain(self.0 & !(1u64 << x))
    }

    /// Points of the chain strictly before point `x`.
    #[inline]
    pub fn part_before(self, x: usize) -> Chain {
        self.intersection(Chain::before(x))
    }

    /// Points of the chain strictly after point `x`.
    #[inline]
    pub fn part_after(self, x: usize) -> Chain {
        Chain(self.0 & !((1u64 << (x + 1)) - 1))
    }

    /// Points of the chain at or after point `x`.
    #[inline]
    pub fn part_from(self, x: usize) -> Chain {
        Chain(self.0 & !((1u64 << x) - 1))
    }

    /// Point indices in increasing (time) order.
    pub fn points(self) -> ChainPoints {
        ChainPoints(self.0)
    }

    /// Position of `x` among the chain's points, if present.
    pub fn rank_of(self, x: usize) -> Option<usize> {
        self.contains(x)
            .then(|| (self.0 & ((1u64 << x) - 1)).count_ones() as usize)
    }

    /// All sub-chains, including the empty chain and `self`.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(self.0),
        }
    }
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.points().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub struct ChainPoints(u64);

impl Iterator for ChainPoints {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let x = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(x)
    }
}

pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Chain;
    fn next(&mut self) -> Option<Chain> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & self.mask)
        };
        Some(Chain(cur))
    }
}

/// All chains inside `allowed` with at most `max_len` points, in mask order.
pub fn chains_within(allowed: Chain, max_len: usize) -> Vec<Chain> {
    let pts: Vec<usize> = allowed.points().collect();
    let mut out = Vec::new();
    fn rec(pts: &[usize], start: usize, cur: u64, left: usize, out: &mut Vec<Chain>) {
        out.push(Chain(cur));
        if left == 0 {
            return;
        }
        for i in start..pts.len() {
            rec(pts, i + 1, cur | (1u64 << pts[i]), left - 1, out);
        }
    }
    rec(&pts, 0, 0, max_len, &mut out);
    out.sort();
    out
}
