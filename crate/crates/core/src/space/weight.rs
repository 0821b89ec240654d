use super::chain::Chain;
use crate::error::{QsError, Result};
use crate::scalar::Real;

/// Class of a weight function within the positive semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightClass {
    /// All values ≥ 1.
    AtLeastOne,
    /// All values in (0, 1].
    AtMostOne,
    /// Positive values on both sides of 1.
    General,
}

/// Positive per-point weight `q(x)`, extended multiplicatively to chains.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction<T: Real> {
    values: Vec<T>,
}

impl<T: Real> WeightFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !(*v > T::zero()) || !v.is_finite() {
                return Err(QsError::Weight(format!("value at point {i} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: T) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![T::one(); n],
        }
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, x: usize) -> T {
        self.values[x]
    }

    pub fn class(&self) -> WeightClass {
        if self.values.iter().all(|&v| v >= T::one()) {
            WeightClass::AtLeastOne
        } else if self.values.iter().all(|&v| v <= T::one()) {
            WeightClass::AtMostOne
        } else {
            WeightClass::General
        }
    }

    /// `∏_{x∈c} q(x)`; the empty chain has weight 1.
    pub fn chain_weight(&self, c: Chain) -> T {
        c.points().fold(T::one(), |acc, x| acc * self.values[x])
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.len() != other.len() {
            return Err(QsError::Weight(format!(
                "length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Self::new(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    /// Pointwise reciprocal.
    pub fn reciprocal(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| T::one() / v).collect(),
        }
    }

    /// `self(x) ≤ other(x)` for every point, up to a relative slack.
    pub fn dominated_by(&self, other: &Self, rel_slack: T) -> bool {
        self.len() == other.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| a <= b * (T::one() + rel_slack))
    }

    pub fn require_len(&self, n: usize) -> Result<()> {
        if self.len() == n {
            Ok(())
        } else {
            Err(QsError::Weight(format!("expected {n} values, got {}", self.len())))
        }
    }

    pub fn require_class_at_least_one(&self) -> Result<()> {
        if self.class() == WeightClass::AtLeastOne {
            Ok(())
        } else {
            Err(QsError::Weight("q must be at least 1 at every point".into()))
        }
    }
}

/// The minimal admissible `p = 1/r + q + 1/s`.
pub fn admissible_p<T: Real>(q: &WeightFunction<T>, r: &WeightFunction<T>, s: &WeightFunction<T>) -> Result<WeightFunction<T>> {
    r.reciprocal().add(q)?.add(&s.reciprocal())
}

/// Checks the weight classes required by the integrand norms: `q ≥ 1`,
/// `r, s > 0` with `1/r, 1/s` positive.
pub fn check_norm_weights<T: Real>(
    n: usize,
    q: &WeightFunction<T>,
    r: &WeightFunction<T>,
    s: &WeightFunction<T>,
) -> Result<()> {
    q.require_len(n)?;
    r.require_len(n)?;
    s.require_len(n)?;
    q.require_class_at_least_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_weight_products() {
        let f = WeightFunction::constant(2, 2.0).unwrap();
        assert_eq!(f.chain_weight(Chain::EMPTY), 1.0);
        assert_eq!(f.chain_weight(Chain::from_points([0, 1])), 4.0);
        let g = WeightFunction::new(vec![3.0, 5.0]).unwrap();
        assert_eq!(g.chain_weight(Chain::singleton(0)), 3.0);
    }

    #[test]
    fn classes() {
        assert_eq!(WeightFunction::new(vec![1.0, 2.0]).unwrap().class(), WeightClass::AtLeastOne);
        assert_eq!(WeightFunction::new(vec![0.5, 1.0]).unwrap().class(), WeightClass::AtMostOne);
        assert_eq!(WeightFunction::new(vec![0.5, 2.0]).unwrap().class(), WeightClass::General);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(WeightFunction::new(vec![1.0, 0.0]).is_err());
        assert!(WeightFunction::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn semigroup_ops() {
        let a = WeightFunction::new(vec![1.0, 2.0]).unwrap();
        let b = WeightFunction::new(vec![0.5, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().values(), &[1.5, 6.0]);
        assert_eq!(b.reciprocal().values(), &[2.0, 0.25]);
        let p = admissible_p(&a, &b, &b).unwrap();
        assert_eq!(p.values(), &[5.0, 2.5]);
    }
}
