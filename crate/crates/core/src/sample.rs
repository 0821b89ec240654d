//! Seeded random lattices, vectors, weights and integrands for the
//! verification suites.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::multi_qs::{ChainTable, MultiIntegrand};
use crate::scalar::{Real, C};
use crate::single_qs::{KernelQuadruple, Slot};
use crate::space::{build_lattice, chains_within, FockVector, Lattice, WeightFunction};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform<T: Real>(rng: &mut SampleRng, lo: f64, hi: f64) -> T {
    T::lit(rng.gen_range(lo..hi))
}

/// Complex number with both parts uniform in `[-1, 1)`.
pub fn complex<T: Real>(rng: &mut SampleRng) -> C<T> {
    C::new(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0))
}

/// `n` points with random increasing times and weights in `[0.2, 1.5)`.
pub fn lattice<T: Real>(
    rng: &mut SampleRng,
    n: usize,
    cap: usize,
    initial_dim: usize,
    max_mult: usize,
) -> Result<Arc<Lattice<T>>> {
    let mut t = 0.0;
    let spec: Vec<(T, T, usize)> = (0..n)
        .map(|_| {
            t += rng.gen_range(0.1..1.0);
            (T::lit(t), uniform(rng, 0.2, 1.5), rng.gen_range(1..=max_mult.max(1)))
        })
        .collect();
    build_lattice(&spec, initial_dim, cap.min(n))
}

/// Random vector on the full (or marked) basis.
pub fn vector<T: Real>(rng: &mut SampleRng, lattice: &Arc<Lattice<T>>, marked: Option<usize>) -> Result<FockVector<T>> {
    let dim = match marked {
        Some(x) => lattice.marked_basis(x).dim(),
        None => lattice.basis().dim(),
    };
    let data: Vec<C<T>> = (0..dim).map(|_| complex(rng)).collect();
    FockVector::from_dense(lattice, marked, &data)
}

pub fn weight<T: Real>(rng: &mut SampleRng, n: usize, lo: f64, hi: f64) -> WeightFunction<T> {
    WeightFunction::new((0..n).map(|_| uniform(rng, lo, hi)).collect()).expect("positive range")
}

pub fn matrix<T: Real>(rng: &mut SampleRng, rows: usize, cols: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| complex(rng))
}

/// Random `(q, r, s)` with `q ≥ 1`, and the minimal admissible `p`.
pub fn admissible_weights<T: Real>(
    rng: &mut SampleRng,
    n: usize,
) -> (WeightFunction<T>, WeightFunction<T>, WeightFunction<T>, WeightFunction<T>) {
    let q = weight(rng, n, 1.0, 2.0);
    let r = weight(rng, n, 0.5, 3.0);
    let s = weight(rng, n, 0.5, 3.0);
    let p = crate::space::admissible_p(&q, &r, &s).expect("matching lengths");
    (q, r, s, p)
}

/// Kernel quadruple with a random dense map in every slot at every point.
pub fn kernel<T: Real>(rng: &mut SampleRng, lattice: &Arc<Lattice<T>>) -> Result<KernelQuadruple<T>> {
    let mut d = KernelQuadruple::zero(lattice);
    for x in 0..lattice.len() {
        for slot in Slot::ALL {
            let (r, c) = d.expected_shape(slot, x);
            d.set(slot, x, matrix(rng, r, c))?;
        }
    }
    Ok(d)
}

/// Random table: each point of a random chain within the cap goes to a
/// random slot.
pub fn table<T: Real>(rng: &mut SampleRng, lattice: &Lattice<T>) -> ChainTable {
    let chains = chains_within(lattice.all_points(), lattice.cap());
    let c = chains[rng.gen_range(0..chains.len())];
    let mut tab = ChainTable::EMPTY;
    for x in c.points() {
        tab = tab.with(x, Slot::ALL[rng.gen_range(0..4)]);
    }
    tab
}

/// Multi-integrand with `support` random tables (duplicates collapse) and
/// random dense maps. When `with_empty` is set the empty table is included.
pub fn multi_integrand<T: Real>(
    rng: &mut SampleRng,
    lattice: &Arc<Lattice<T>>,
    support: usize,
    with_empty: bool,
) -> Result<MultiIntegrand<T>> {
    let n = lattice.basis().dim();
    let mut m = MultiIntegrand::zero(lattice)?;
    if with_empty {
        m.insert(ChainTable::EMPTY, matrix(rng, n, n))?;
    }
    for _ in 0..support {
        let tab = table(rng, lattice);
        m.insert(tab, matrix(rng, n, n))?;
    }
    Ok(m)
}

/// Smooth random function of time on `[0, 1]`: a short random Fourier sum
/// with values in `[-1, 1]`.
pub fn smooth_profile(rng: &mut SampleRng, modes: usize) -> impl Fn(f64) -> f64 {
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let norm: f64 = coeffs.iter().map(|(a, _)| a.abs()).sum::<f64>().max(1.0);
    move |t: f64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, ph))| a * (std::f64::consts::TAU * (k as f64 + 1.0) * t + ph).sin())
            .sum::<f64>()
            / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generators_are_reproducible() {
        let a: Arc<Lattice<f64>> = lattice(&mut rng(7), 4, 3, 1, 2).unwrap();
        let b: Arc<Lattice<f64>> = lattice(&mut rng(7), 4, 3, 1, 2).unwrap();
        assert_eq!(*a, *b);
        let va = vector(&mut rng(3), &a, None).unwrap();
        let vb = vector(&mut rng(3), &b, None).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn random_tables_are_admissible() {
        let l: Arc<Lattice<f64>> = lattice(&mut rng(1), 4, 3, 1, 1).unwrap();
        let mut r = rng(2);
        for _ in 0..50 {
            let t = table(&mut r, &l);
            assert!(t.is_disjoint());
            assert!(t.total_len() <= 3);
        }
    }

    #[test]
    fn profile_is_bounded() {
        let f = smooth_profile(&mut rng(5), 4);
        assert!((0..100).all(|i| f(i as f64 / 100.0).abs() <= 1.0));
    }
}
