use std::sync::Arc;

use qsfock::multi_qs::{embed_single, multi_integral, multi_integral_matrix};
use qsfock::oracle::{
    brute_multi_integral, dense_multi_integral, dense_point_insert, dense_point_split, dense_process, dense_split,
    dense_split_adjoint, to_dense_fock, ProcessKind,
};
use qsfock::sample;
use qsfock::single_qs::{fundamental_process, qs_integral, KernelQuadruple, Region, Slot};
use qsfock::splitter::{multi_point_integral, point_integral, point_split, split, SplitBasis, SplitVector};
use qsfock::{FockVector, Lattice, Matrix, Real, C};

fn lattices<T: Real>(seed: u64, max_mult: usize) -> Vec<Arc<Lattice<T>>> {
    let mut rng = sample::rng(seed);
    let mut out = Vec::new();
    for n in 1..=4 {
        for cap in 1..=n {
            for h in 1..=2 {
                out.push(sample::lattice(&mut rng, n, cap, h, max_mult).unwrap());
            }
        }
    }
    out
}

fn as_matrix<T: Real>(cols: Vec<Vec<C<T>>>, rows: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

#[test]
fn splitter_matches_dense_reference() {
    for l in lattices::<f64>(1, 2) {
        let sb = SplitBasis::new(&l);
        let n = l.basis().dim();
        let cols: Vec<_> = (0..n)
            .map(|j| split(&FockVector::unit(&l, None, j).unwrap()).unwrap().to_dense(&sb))
            .collect();
        assert_eq!(as_matrix(cols, sb.dim()), dense_split(&l, &sb));
        let cols: Vec<_> = (0..sb.dim())
            .map(|j| {
                let mut e = vec![C::new(0.0, 0.0); sb.dim()];
                e[j] = C::new(1.0, 0.0);
                multi_point_integral(&SplitVector::from_dense(&l, &sb, &e).unwrap()).to_dense()
            })
            .collect();
        assert_eq!(as_matrix(cols, n), dense_split_adjoint(&l, &sb));
    }
}

#[test]
fn point_derivatives_match_dense_reference() {
    for l in lattices::<f64>(2, 2) {
        for x in 0..l.len() {
            let engine = to_dense_fock(&l, None, Some(x), |v| point_split(x, v)).unwrap();
            assert_eq!(engine, dense_point_split(&l, x).unwrap());
        }
        let mut rng = sample::rng(7);
        let psi: Vec<FockVector<f64>> = (0..l.len()).map(|x| sample::vector(&mut rng, &l, Some(x)).unwrap()).collect();
        let got = point_integral(&l, &psi).unwrap().to_dense();
        let mut want = vec![C::new(0.0, 0.0); l.basis().dim()];
        for (x, p) in psi.iter().enumerate() {
            let v = dense_point_insert(&l, x).unwrap().matvec(&p.to_dense());
            for (w, z) in want.iter_mut().zip(v) {
                *w += z;
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}

fn check_processes<T: Real>(seed: u64, tol: T) {
    let mut rng = sample::rng(seed);
    for l in lattices::<T>(seed, 2) {
        let d = sample::kernel(&mut rng, &l).unwrap();
        let region = l.all_points();
        for (slot, kind) in [
            (Slot::Preservation, ProcessKind::Preserve),
            (Slot::Creation, ProcessKind::Create),
            (Slot::Annihilation, ProcessKind::Annihilate),
            (Slot::Exchange, ProcessKind::Exchange),
        ] {
            let engine = to_dense_fock(&l, None, None, |v| fundamental_process(slot, &d, Region::from_chain(region), v))
                .unwrap();
            let maps: Vec<_> = (0..l.len()).map(|x| d.get(slot, x).cloned()).collect();
            let reference = dense_process(&l, kind, &maps, region).unwrap();
            assert!((&engine - &reference).max_abs() <= tol, "{slot:?}");
        }
    }
}

#[test]
fn processes_match_dense_reference() {
    check_processes::<f64>(3, 1e-13);
    check_processes::<f32>(4, 1e-5);
}

#[test]
fn multi_integrals_match_both_references() {
    let mut rng = sample::rng(5);
    for l in lattices::<f64>(5, 1) {
        for _ in 0..3 {
            let m = sample::multi_integrand(&mut rng, &l, 4, true).unwrap();
            let t = l.time(l.len() - 1) * 0.8;
            let chi = sample::vector(&mut rng, &l, None).unwrap();
            let a = multi_integral(&m, t, &chi).unwrap();
            let b = brute_multi_integral(&m, t, &chi).unwrap();
            assert!(a.sub(&b).unwrap().max_abs() < 1e-13);
            let ea = multi_integral_matrix(&m, t).unwrap();
            assert!((&ea - &dense_multi_integral(&m, t).unwrap()).max_abs() < 1e-13);
        }
    }
}

#[test]
fn single_precision_multi_integral_matches_brute() {
    let mut rng = sample::rng(6);
    for l in lattices::<f32>(6, 1) {
        let m = sample::multi_integrand(&mut rng, &l, 3, true).unwrap();
        let chi = sample::vector(&mut rng, &l, None).unwrap();
        let a = multi_integral(&m, 100.0, &chi).unwrap();
        let b = brute_multi_integral(&m, 100.0, &chi).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-4);
    }
}

#[test]
fn embedded_single_integrals_agree() {
    let mut rng = sample::rng(8);
    for l in lattices::<f64>(8, 1) {
        let d: KernelQuadruple<f64> = sample::kernel(&mut rng, &l).unwrap();
        let chi = sample::vector(&mut rng, &l, None).unwrap();
        let t = l.time(l.len() - 1) + 1.0;
        let single = qs_integral(&d, t, &chi).unwrap();
        let multi = multi_integral(&embed_single(&d).unwrap(), t, &chi).unwrap();
        assert!(single.sub(&multi).unwrap().max_abs() < 1e-13);
    }
}
