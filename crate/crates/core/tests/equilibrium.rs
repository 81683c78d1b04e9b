use nalgebra::DMatrix;
use powergame::dynamics::{iterate, verify_nash, IterationOptions, Schedule, Status};
use powergame::games::{sir_balanced_ne_mf, utility_bpj, BalancedNe, MatrixGame};
use powergame::receivers::{sir_mf, RandomSpreadingMf};
use powergame::{EfficiencyModel, Game, Objective, PowerGame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 128;
const NOISE: f64 = 0.01;

fn mf_game(gains: &[f64], p_max: f64) -> PowerGame {
    PowerGame::new(
        Box::new(RandomSpreadingMf::new(gains.to_vec(), N, NOISE)),
        Objective::BitsPerJoule,
        EfficiencyModel::default(),
        vec![1e4; gains.len()],
        p_max,
    )
    .unwrap()
}

fn tight() -> IterationOptions {
    IterationOptions {
        tol: 1e-13,
        ..IterationOptions::default()
    }
}

fn random_gains(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| 0.05 + rng.random::<f64>() * 0.5).collect()
}

#[test]
fn single_user_converges_immediately() {
    let game = mf_game(&[0.1], 1.0);
    let r = iterate(&game, &DMatrix::zeros(1, 1), &IterationOptions::default());
    assert_eq!(r.status, Status::Converged);
    assert!(r.iterations <= 2);
    let gs = game.gamma_star().unwrap();
    assert!((r.state.powers[(0, 0)] - gs * NOISE / 0.1).abs() < 1e-15);
}

#[test]
fn ten_users_reach_closed_form() {
    let gains: Vec<f64> = (1..=10).map(|i| 0.4 * i as f64).collect();
    let game = mf_game(&gains, 1.0);
    let gs = game.gamma_star().unwrap();
    let closed = match sir_balanced_ne_mf(&gains, N, NOISE, 1.0, gs).unwrap() {
        BalancedNe::Interior { powers, .. } => powers,
        other => panic!("{other:?}"),
    };
    let mut r = iterate(&game, &DMatrix::zeros(10, 1), &tight());
    assert_eq!(r.status, Status::Converged);
    for k in 0..10 {
        assert!((r.state.powers[(k, 0)] - closed[k]).abs() < 1e-8 * closed[k]);
        assert!((r.state.sirs[(k, 0)] - gs).abs() < 1e-9 * gs);
    }
    assert!(r.verify(&game, 1000, 1e-9).verified);
}

#[test]
fn twenty_one_users_saturate() {
    let game = mf_game(&[0.1; 21], 1.0);
    let r = iterate(&game, &DMatrix::zeros(21, 1), &IterationOptions::default());
    assert_eq!(r.status, Status::InfeasibleAllMaxPower);
    assert!(r.state.powers.iter().all(|&p| p == 1.0));
}

#[test]
fn all_max_power_is_not_an_equilibrium_when_feasible() {
    let gains = [0.1, 0.2, 0.3];
    let game = mf_game(&gains, 1.0);
    let check = verify_nash(&game, &DMatrix::from_element(3, 1, 1.0), 1000, 1e-9);
    assert!(!check.verified);
    assert!(check.worst_gain > 0.0);
}

#[test]
fn balanced_ne_survives_unilateral_deviations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gains = random_gains(&mut rng, 12);
    let f = EfficiencyModel::default();
    let gs = f.gamma_star().unwrap();
    let ne = sir_balanced_ne_mf(&gains, N, NOISE, 1.0, gs).unwrap();
    let p = ne.powers().to_vec();
    let sirs = sir_mf(&p, &gains, N, NOISE);
    for g in &sirs {
        assert!((g - gs).abs() < 1e-9 * gs);
    }
    let base: Vec<f64> = (0..12).map(|k| utility_bpj(1e4, sirs[k], p[k], &f)).collect();
    for _ in 0..1000 {
        let k = rng.random_range(0..12);
        let mut q = p.clone();
        q[k] = rng.random::<f64>();
        let g = sir_mf(&q, &gains, N, NOISE);
        assert!(utility_bpj(1e4, g[k], q[k], &f) <= base[k] * (1.0 + 1e-12));
    }
}

#[test]
fn iterates_are_monotone_from_both_ends() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let k = rng.random_range(2..=15);
        let gains = random_gains(&mut rng, k);
        let game = mf_game(&gains, 1.0);
        let one_sweep = IterationOptions {
            max_iters: 1,
            ..tight()
        };
        let mut up = DMatrix::zeros(k, 1);
        let mut down = DMatrix::from_element(k, 1, 1.0);
        for _ in 0..200 {
            let next_up = iterate(&game, &up, &one_sweep).state.powers;
            let next_down = iterate(&game, &down, &one_sweep).state.powers;
            for i in 0..k {
                assert!(next_up[(i, 0)] >= up[(i, 0)] * (1.0 - 1e-14));
                assert!(next_down[(i, 0)] <= down[(i, 0)] * (1.0 + 1e-14));
            }
            up = next_up;
            down = next_down;
        }
        let from_zero = iterate(&game, &DMatrix::zeros(k, 1), &tight());
        let from_max = iterate(&game, &DMatrix::from_element(k, 1, 1.0), &tight());
        assert_eq!(from_zero.status, Status::Converged);
        assert_eq!(from_max.status, Status::Converged);
        for i in 0..k {
            let (a, b) = (from_zero.state.powers[(i, 0)], from_max.state.powers[(i, 0)]);
            assert!((a - b).abs() < 1e-8 * a);
        }
    }
}

#[test]
fn schedules_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let k = rng.random_range(2..=18);
        let gains = random_gains(&mut rng, k);
        let game = mf_game(&gains, 1.0);
        let gs = iterate(&game, &DMatrix::zeros(k, 1), &tight());
        let jacobi = iterate(
            &game,
            &DMatrix::zeros(k, 1),
            &IterationOptions {
                schedule: Schedule::Jacobi,
                ..tight()
            },
        );
        assert_eq!(jacobi.status, Status::Converged);
        for i in 0..k {
            let (a, b) = (gs.state.powers[(i, 0)], jacobi.state.powers[(i, 0)]);
            assert!((a - b).abs() < 1e-8 * a);
        }
    }
}

#[test]
fn iteration_is_deterministic() {
    let gains = [0.1, 0.25, 0.4, 0.33];
    let game = mf_game(&gains, 1.0);
    let a = iterate(&game, &DMatrix::zeros(4, 1), &IterationOptions::default());
    let b = iterate(&game, &DMatrix::zeros(4, 1), &IterationOptions::default());
    assert_eq!(a, b);
}

#[test]
fn joint_power_reduction_helps_everyone() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let f = EfficiencyModel::default();
    let gs = f.gamma_star().unwrap();
    for _ in 0..50 {
        let k = rng.random_range(2..=18);
        let gains = random_gains(&mut rng, k);
        let p = sir_balanced_ne_mf(&gains, N, NOISE, 1.0, gs).unwrap().powers().to_vec();
        let scaled: Vec<f64> = p.iter().map(|x| 0.99 * x).collect();
        let before = sir_mf(&p, &gains, N, NOISE);
        let after = sir_mf(&scaled, &gains, N, NOISE);
        for i in 0..k {
            let u0 = utility_bpj(1e4, before[i], p[i], &f);
            let u1 = utility_bpj(1e4, after[i], scaled[i], &f);
            assert!(u1 > u0, "user {i}: {u1} <= {u0}");
        }
    }
}

#[test]
fn objectives_reach_verified_equilibria() {
    let gains = [0.1, 0.2, 0.15, 0.3];
    let objectives = [
        Objective::Priced {
            prices: vec![1e3; 4],
        },
        Objective::LogPriced {
            weights: vec![1.0; 4],
            prices: vec![2.0; 4],
        },
        Objective::SirCost {
            power_costs: vec![0.5; 4],
            sir_costs: vec![1.0; 4],
            targets: vec![5.0; 4],
        },
    ];
    for objective in objectives {
        let name = objective.name();
        let game = mf_game(&gains, 1.0).with_objective(objective).unwrap();
        let mut r = iterate(&game, &DMatrix::zeros(4, 1), &tight());
        assert_eq!(r.status, Status::Converged, "{name}");
        let check = r.verify(&game, 2000, 1e-9);
        assert!(check.verified, "{name}: {check:?}");
    }
}

#[test]
fn matrix_game_deviation_check() {
    let pd = MatrixGame::prisoners_dilemma();
    assert!(pd.is_nash((0, 0)));
    assert!(pd.deviation_gain((0, 0)) <= 0.0);
    assert!(!pd.is_nash((1, 1)));
    assert_eq!(pd.deviation_gain((1, 1)), 1.0);
}

#[test]
fn game_trait_exposes_payoffs() {
    let game = mf_game(&[0.1, 0.2], 1.0);
    let p = DMatrix::from_column_slice(2, 1, &[0.3, 0.4]);
    let rows = vec![vec![0.3], vec![0.5]];
    let dev = game.deviation_payoffs(0, &p, &rows);
    assert_eq!(dev[0], game.payoff(0, &p));
    let mut q = p.clone();
    q[(0, 0)] = 0.5;
    assert_eq!(dev[1], game.payoff(0, &q));
}
