use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ppmc_core::family::{rigid_match, rotate_form};
use ppmc_core::flags::{
    a3_residual, bracket_grading_residual, canonical_unitary, grade, random_complex_structure, random_orthogonal,
    split_two_complex_structures,
};
use ppmc_core::linalg::{standard_j, RMat, RVec};
use ppmc_core::local::Form2;
use ppmc_core::{Exec, Status};

fn severity(s: Status) -> u8 {
    match s {
        Status::Pass => 0,
        Status::Inconclusive => 1,
        Status::Fail => 2,
        Status::Skipped => 3,
    }
}

fn random_form(d: usize, n: usize, seed: u64) -> Form2<RVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(d * d * n, &mut rng);
    let col = q.column(0).into_owned();
    // symmetric in the two slots
    Form2::from_fn(d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        RVec::from_fn(n, |k, _| col[(a * d + b) * n + k])
    })
}

fn form_distance(a: &Form2<RVec>, b: &Form2<RVec>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn classification_is_monotone(a in 0.0..1.0f64, b in 0.0..1.0f64, tol in 1e-9..1e-2f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(severity(Status::classify(lo, tol)) <= severity(Status::classify(hi, tol)));
    }

    #[test]
    fn rotation_of_forms_composes(seed in any::<u64>(), m in 1usize..3, t1 in -3.0..3.0f64, t2 in -3.0..3.0f64) {
        let d = 2 * m;
        let j = standard_j(d);
        let alpha = random_form(d, 3, seed);
        let once = rotate_form(&alpha, &j, t1 + t2);
        let twice = rotate_form(&rotate_form(&alpha, &j, t1), &j, t2);
        prop_assert!(form_distance(&once, &twice) < 1e-12);
        let half_turn = rotate_form(&alpha, &j, t1 + std::f64::consts::PI);
        prop_assert!(form_distance(&half_turn, &rotate_form(&alpha, &j, t1)) < 1e-12);
    }

    #[test]
    fn complex_structure_split_reassembles(seed in any::<u64>(), m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * m;
        let j = random_complex_structure(d, &mut rng);
        let jt = random_complex_structure(d, &mut rng);
        let split = split_two_complex_structures(&j, &jt).unwrap();
        prop_assert!(split.reconstruction < 1e-8, "reconstruction {}", split.reconstruction);
        prop_assert!(split.la_identities < 1e-10);
        prop_assert!(split.block_identities < 1e-8);
        let dims: usize = split.blocks.iter().map(|b| b.basis.ncols()).sum();
        prop_assert_eq!(dims, d);
    }

    #[test]
    fn procrustes_recovers_rigid_motions(seed in any::<u64>(), reflect in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let mut q = random_orthogonal(n, &mut rng);
        if reflect != (q.determinant() < 0.0) {
            q.column_mut(0).neg_mut();
        }
        let a: Vec<RVec> = (0..12)
            .map(|k| random_orthogonal(n, &mut rng).column(0) * (1.0 + k as f64))
            .collect();
        let t = RVec::from_fn(n, |k, _| k as f64 - 2.0);
        let b: Vec<RVec> = a.iter().map(|x| &q * x + &t).collect();
        let m = rigid_match(&a, &b).unwrap();
        prop_assert!(m.rms < 1e-10);
        prop_assert_eq!(m.reflection, reflect);
        prop_assert!((m.rotation - &q).amax() < 1e-9);
    }

    #[test]
    fn execution_strategies_agree(xs in proptest::collection::vec(-1e3..1e3f64, 0..200)) {
        let f = |x: &f64| (x.sin() * x).mul_add(2.0, 1.0);
        prop_assert_eq!(Exec::Parallel.map(&xs, f), Exec::Sequential.map(&xs, f));
    }

    #[test]
    fn unitary_canonical_elements_grade_consistently(dims in proptest::collection::vec(1usize..3, 2..4), l0 in -2.0..2.0f64) {
        let ce = canonical_unitary(&dims, None, l0).unwrap();
        let gr = grade(&ce).unwrap();
        prop_assert!(a3_residual(&ce, &gr) < 1e-10);
        prop_assert!(bracket_grading_residual(&gr) < 1e-10);
    }
}

#[test]
fn random_orthogonal_is_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let q: RMat = random_orthogonal(6, &mut rng);
    assert!((q.transpose() * &q - RMat::identity(6, 6)).amax() < 1e-12);
}
