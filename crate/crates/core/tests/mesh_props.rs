use bads::linalg::dot;
use bads::mesh::{generate_directions, mesh_size_for, poll_candidates, update_poll_size, DirectionSet, MeshState, StepOutcome};
use bads::points::PointSet;
use bads::ProblemSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Every sampled vector must have a strictly positive inner product with
/// some direction, which is necessary for a positive spanning set.
fn spans(dirs: &DirectionSet, samples: usize, rng: &mut ChaCha8Rng) -> bool {
    let dim = dirs.directions[0].len();
    (0..samples).all(|_| {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        dirs.directions.iter().any(|d| dot(d, &v) > 0.0)
    })
}

#[test]
fn direction_sets_span_positively() {
    for dim in [1, 2, 5, 10, 20] {
        for seed in 0..10 {
            let dirs = generate_directions(dim, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(dirs.len(), 2 * dim);
            assert!(spans(&dirs, 10_000, &mut ChaCha8Rng::seed_from_u64(1000 + seed)), "D={dim} seed={seed}");
        }
    }
}

#[test]
fn two_dimensional_basis_is_orthonormal() {
    let dirs = generate_directions(2, &mut ChaCha8Rng::seed_from_u64(3));
    let q = &dirs.directions[..2];
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot(&q[i], &q[j]) - expected).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn poll_size_tracks_success_balance(steps in proptest::collection::vec(any::<bool>(), 0..60)) {
        let init = 0.25;
        let mut state = MeshState::new(init, f64::MAX);
        let (mut s, mut f) = (0i32, 0i32);
        for success in steps {
            let outcome = if success { s += 1; StepOutcome::Success } else { f += 1; StepOutcome::Failure };
            state = update_poll_size(state, outcome);
            prop_assert_eq!(state.mesh_size(), state.poll_size().min(state.poll_size() * state.poll_size()));
        }
        prop_assert_eq!(state.poll_size(), init * 2f64.powi(s - f));
        prop_assert_eq!(state.mesh_size(), mesh_size_for(state.poll_size()));
    }

    #[test]
    fn poll_candidates_are_fresh_and_in_bounds(
        seed in any::<u64>(),
        inc in proptest::collection::vec(0.0f64..=1.0, 3),
        k in 0i32..12,
    ) {
        let space = ProblemSpec::new(|_: &[f64]| 0.0, vec![0.0; 3], vec![-1.0; 3], vec![1.0; 3])
            .validate()
            .unwrap()
            .space()
            .clone();
        let state = MeshState::new(2f64.powi(-k), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = PointSet::new();
        seen.insert(&inc);
        for _ in 0..3 {
            let dirs = generate_directions(3, &mut rng);
            let cands = poll_candidates(&inc, &state, &dirs, &space, &seen);
            for c in &cands {
                prop_assert!(!seen.contains(c));
                prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
                seen.insert(c);
            }
        }
    }
}
