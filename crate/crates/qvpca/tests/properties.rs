//! Property tests for the algebraic invariants of the linear-algebra and
//! quadratic-variation layers.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qvpca::{
    eigh_descending, gram_schmidt, pca_split, qv_quadratic_form, realized_qv, subspace_distance,
    InnerProduct, MultiPath, QvMatrix, SubspaceBasis,
};

const DIM: usize = 8;

fn unit_vector(v: Vec<f64>) -> DVector<f64> {
    let x = DVector::from_vec(v);
    let n = x.norm();
    if n > 1e-6 {
        x / n
    } else {
        let mut e = DVector::zeros(DIM);
        e[0] = 1.0;
        e
    }
}

fn entries() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

fn vectors(count: usize) -> impl Strategy<Value = Vec<DVector<f64>>> {
    proptest::collection::vec(proptest::collection::vec(entries(), DIM), count)
        .prop_map(|vs| vs.into_iter().map(unit_vector).collect())
}

/// Relative Gram determinant of a unit-vector family; 1 for orthonormal
/// input, near 0 for almost dependent input.
fn conditioning(vs: &[DVector<f64>]) -> f64 {
    let d = vs.len();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = vs[i].dot(&vs[j]);
        }
    }
    g.determinant()
}

fn basis(dim: usize) -> impl Strategy<Value = SubspaceBasis> {
    vectors(dim).prop_filter_map("well-conditioned family", |vs| {
        if conditioning(&vs) < 1e-3 {
            return None;
        }
        SubspaceBasis::new(vs, InnerProduct::Euclidean).ok()
    })
}

fn symmetric_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(entries(), n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms_on_random_subspace_families(
        a in basis(2), b in basis(3), c in basis(2)
    ) {
        let dab = subspace_distance(&a, &b).unwrap();
        let dba = subspace_distance(&b, &a).unwrap();
        let dac = subspace_distance(&a, &c).unwrap();
        let dbc = subspace_distance(&b, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&dab));
        prop_assert!((dab - dba).abs() < 1e-10);
        prop_assert!(subspace_distance(&a, &a).unwrap() < 1e-8);
        // Triangle inequality with roundoff slack.
        prop_assert!(dac <= dab + dbc + 1e-8);
    }

    #[test]
    fn basis_invariance_under_recombination(
        vs in vectors(3),
        coeffs in proptest::collection::vec(-1.0f64..1.0, 9)
    ) {
        let ip = InnerProduct::Euclidean;
        prop_assume!(conditioning(&vs) > 1e-3);
        let base = match SubspaceBasis::new(vs.clone(), ip.clone()) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let r = DMatrix::from_vec(3, 3, coeffs);
        // Keep the recombination well-conditioned.
        let sv = r.clone().svd(false, false).singular_values;
        prop_assume!(sv.iter().cloned().fold(f64::INFINITY, f64::min) > 0.1);
        let mixed: Vec<DVector<f64>> = (0..3)
            .map(|i| {
                let mut acc = DVector::zeros(DIM);
                for j in 0..3 {
                    acc += &vs[j] * r[(i, j)];
                }
                acc
            })
            .collect();
        let mixed = match SubspaceBasis::new(mixed, ip) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        prop_assert!(subspace_distance(&base, &mixed).unwrap() < 1e-8);
    }

    #[test]
    fn gram_schmidt_commutes_with_orthogonal_maps(
        vs in vectors(4),
        seed in symmetric_matrix(DIM)
    ) {
        // Orthogonal map from the eigenvectors of a random symmetric matrix.
        let t = eigh_descending(&seed).unwrap().vectors;
        let ip = InnerProduct::Euclidean;
        let direct = match gram_schmidt(&vs, &ip) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let mapped: Vec<DVector<f64>> = vs.iter().map(|v| &t * v).collect();
        let gs_mapped = gram_schmidt(&mapped, &ip).unwrap();
        for (w, tau) in gs_mapped.vectors.iter().zip(direct.vectors.iter()) {
            prop_assert!((w - &t * tau).norm() < 1e-9);
        }
    }

    #[test]
    fn eigh_reconstructs_the_matrix(a in symmetric_matrix(5)) {
        let e = eigh_descending(&a).unwrap();
        let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        prop_assert!((recon - &a).norm() <= 1e-8 * a.norm().max(1e-12));
        // Orthonormality of the eigenvector matrix.
        let q = &e.vectors * e.vectors.transpose();
        prop_assert!((q - DMatrix::identity(5, 5)).norm() < 1e-9);
    }

    #[test]
    fn weyl_eigenvalue_stability(a in symmetric_matrix(5), b in symmetric_matrix(5)) {
        // max_j |lambda_j(A) - lambda_j(B)| <= ||A - B|| in spectral norm.
        let ea = eigh_descending(&a).unwrap();
        let eb = eigh_descending(&b).unwrap();
        let diff = &a - &b;
        let spectral = eigh_descending(&(&diff * diff.transpose()))
            .unwrap()
            .values[0]
            .max(0.0)
            .sqrt();
        for j in 0..5 {
            prop_assert!((ea.values[j] - eb.values[j]).abs() <= spectral + 1e-10);
        }
    }

    #[test]
    fn quadratic_form_bounded_by_top_eigenvalue(
        incs in proptest::collection::vec(entries(), 60),
        probe in proptest::collection::vec(entries(), 4)
    ) {
        // Path with 15 increments in dimension 4.
        let mut values = DMatrix::zeros(16, 4);
        for k in 0..15 {
            for j in 0..4 {
                values[(k + 1, j)] = values[(k, j)] + incs[4 * k + j];
            }
        }
        let t = DVector::from_fn(16, |i, _| i as f64);
        let path = MultiPath::new(t, values).unwrap();
        let q = realized_qv(&path).unwrap();
        let u = unit_vector_4(probe);
        let form = qv_quadratic_form(&u, &q).unwrap();
        prop_assert!(form <= q.eig.values[0] + 1e-12 * q.trace().max(1.0));
        prop_assert!(form >= -1e-10 * q.trace().max(1.0));
    }

    #[test]
    fn split_components_are_qv_orthogonal(
        incs in proptest::collection::vec(entries(), 90)
    ) {
        let mut values = DMatrix::zeros(31, 3);
        for k in 0..30 {
            for j in 0..3 {
                values[(k + 1, j)] = values[(k, j)] + incs[3 * k + j];
            }
        }
        let t = DVector::from_fn(31, |i, _| i as f64);
        let path = MultiPath::new(t, values).unwrap();
        let split = pca_split(&path, 0.5).unwrap();
        let qj = realized_qv(&split.j_paths).unwrap();
        let scale = split.qv.trace().max(1e-12);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    prop_assert!(qj.matrix[(i, j)].abs() < 1e-8 * scale);
                }
            }
        }
        // Energy conservation under the rotation.
        prop_assert!((qj.trace() - split.qv.trace()).abs() < 1e-10 * scale);
    }
}

fn unit_vector_4(v: Vec<f64>) -> DVector<f64> {
    let x = DVector::from_vec(v);
    let n = x.norm();
    if n > 1e-6 {
        x / n
    } else {
        let mut e = DVector::zeros(4);
        e[0] = 1.0;
        e
    }
}

/// The variational characterization at fixed dimension: a dense sample of
/// unit vectors approaches the top eigenvalue from below.
#[test]
fn top_eigenvalue_is_attained_by_unit_vectors() {
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20);
    let mut values = DMatrix::zeros(101, 3);
    for k in 0..100 {
        for j in 0..3 {
            values[(k + 1, j)] = values[(k, j)] + qvpca::standard_normal(&mut rng) * 0.1;
        }
    }
    let t = DVector::from_fn(101, |i, _| i as f64);
    let q = realized_qv(&MultiPath::new(t, values).unwrap()).unwrap();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let v = DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let n = v.norm();
        if n < 1e-9 {
            continue;
        }
        let u = v / n;
        let form = qv_quadratic_form(&u, &q).unwrap();
        assert!(form <= q.eig.values[0] + 1e-12 * q.trace());
        best = best.max(form);
    }
    assert!(
        best >= q.eig.values[0] * 0.99,
        "sampled maximum {best} vs top eigenvalue {}",
        q.eig.values[0]
    );
}

/// Rank detection distinguishes the spot-rank supremum from the rank of
/// the integrated matrix: with two disjointly supported volatility bumps
/// the spot rank never exceeds one while the integrated matrix has rank
/// two, with exactly computable entries.
#[test]
fn spot_rank_versus_integrated_rank_fixture() {
    let n = 4000usize;
    let dt = 2.0 / n as f64;
    let f = |s: f64| if (0.0..=1.0).contains(&s) { s * (1.0 - s) } else { 0.0 };
    let mut integrated: DMatrix<f64> = DMatrix::zeros(2, 2);
    let mut sup_spot_rank = 0usize;
    for k in 0..n {
        let s = k as f64 * dt;
        let c11 = f(s).powi(2);
        let c22 = f(s - 1.0).powi(2);
        let spot_rank = [c11, c22].iter().filter(|v| **v > 1e-14).count();
        sup_spot_rank = sup_spot_rank.max(spot_rank);
        integrated[(0, 0)] += c11 * dt;
        integrated[(1, 1)] += c22 * dt;
    }
    assert_eq!(sup_spot_rank, 1);
    // int_0^1 s^2 (1-s)^2 ds = 1/30.
    assert!((integrated[(0, 0)] - 1.0 / 30.0).abs() < 1e-3);
    assert!((integrated[(1, 1)] - 1.0 / 30.0).abs() < 1e-3);
    let q = QvMatrix::from_matrix(integrated, 2.0).unwrap();
    assert_eq!(qvpca::rank_estimate(&q, qvpca::default_rank_eps(n)).unwrap(), 2);
}
