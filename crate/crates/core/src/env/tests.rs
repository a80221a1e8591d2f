use super::*;
use crate::solver::{init_conduction, init_random_flow, ProbeGrid, Solver, SolverConfig, WallProfile};

fn cfg_with(n: usize) -> EnvConfig {
    EnvConfig { n_segments: n, ..EnvConfig::default() }
}

fn small_solver() -> SolverConfig {
    SolverConfig { nx: 20, ny: 17, dt: 0.01, ..SolverConfig::default() }
}

#[test]
fn action_pipeline_examples() {
    assert_eq!(process_actions(&[0.3; 10], &cfg_with(10)).unwrap(), vec![0.0; 10]);
    assert_eq!(process_actions(&[1.0, -1.0], &cfg_with(2)).unwrap(), vec![0.75, -0.75]);
    assert_eq!(process_actions(&[0.4, 0.0, -0.4, 0.0], &cfg_with(4)).unwrap(), vec![0.4, 0.0, -0.4, 0.0]);
    assert!(matches!(process_actions(&[1.5, 0.0], &cfg_with(2)), Err(EnvError::Precondition(_))));
    assert!(matches!(process_actions(&[0.0], &cfg_with(2)), Err(EnvError::Precondition(_))));
}

#[test]
fn clamped_mean_is_reported() {
    let p = process_actions_detailed(&[1.0, -0.2, -0.2, -0.2, -0.2], &cfg_with(5)).unwrap();
    assert!(p.centered.iter().sum::<f64>().abs() < 1e-12);
    assert_eq!(p.offsets[0], 0.75);
    assert!((post_clamp_mean(&p.offsets) - (0.75 - 0.96) / 5.0).abs() < 1e-12);
}

#[test]
fn reward_examples() {
    let p = RewardParams { scale: 1.0, offset: 0.0, beta: 0.0 };
    assert_eq!(reward(2.0, 7.0, &p), -2.0);
    let p = RewardParams { scale: 1.0, offset: 2.5, beta: 0.0015 };
    assert!(reward(2.5, 2.5, &p).abs() < 1e-15);
    let p = RewardParams { scale: 1.0, offset: 2.5, beta: 1.0 };
    assert_eq!(reward(1.0, 2.0, &p), reward(9.0, 2.0, &p));
    let p = RewardParams { scale: 2.0, offset: 2.5, beta: 0.3 };
    assert!(reward(2.0, 2.0, &p) > reward(2.1, 2.0, &p));
    assert!(reward(2.0, 2.0, &p) > reward(2.0, 2.1, &p));
}

#[test]
fn positional_encoding_values() {
    let lx = 2.0 * std::f64::consts::PI;
    assert_eq!(pe_value(0.0, lx, 1.0, PeForm::Periodic), 0.0);
    assert!((pe_value(lx / 4.0, lx, 1.3, PeForm::Periodic) - 1.3).abs() < 1e-15);
    for x in [0.1, 0.7, 2.0, 3.0] {
        let a = pe_value(x, lx, 1.0, PeForm::Periodic);
        let b = pe_value(lx - x, lx, 1.0, PeForm::Periodic);
        assert!((a + b).abs() < 1e-15);
    }
    assert!((pe_value(1.0, lx, 1.0, PeForm::Literal) - (1.0 / lx).sin()).abs() < 1e-15);
}

#[test]
fn injection_touches_only_temperature() {
    let cfg = small_solver();
    let probes = ProbeGrid::new(&cfg, 32).unwrap();
    let obs = probes.sample(&init_random_flow(&cfg, 1, 0.3).unwrap()).unwrap();
    let env = EnvConfig { pe_enabled: true, ..EnvConfig::default() };
    let field = positional_encoding_field(&env, probes.x_stations(), cfg.domain_width);
    let once = inject_positional_encoding(&obs, &field).unwrap();
    assert_eq!(once.channel(1), obs.channel(1));
    assert_eq!(once.channel(2), obs.channel(2));
    let twice = inject_positional_encoding(&once, &field).unwrap();
    for i in 0..field.len() {
        assert!((twice.channel(0)[i] - once.channel(0)[i] - field[i]).abs() < 1e-15);
    }
    let zero = EnvConfig { pe_amplitude: 0.0, ..env };
    let field0 = positional_encoding_field(&zero, probes.x_stations(), cfg.domain_width);
    assert_eq!(inject_positional_encoding(&obs, &field0).unwrap(), obs);
    let reversed: Vec<f64> = field.chunks(32).flat_map(|r| r.iter().rev().map(|v| -v).collect::<Vec<_>>()).collect();
    for (a, b) in field.iter().zip(&reversed) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn recentering_is_a_permutation() {
    let cfg = small_solver();
    let probes = ProbeGrid::new(&cfg, 32).unwrap();
    let obs = probes.sample(&init_random_flow(&cfg, 2, 0.3).unwrap()).unwrap();
    assert_eq!(recenter(&obs, 0, 1).unwrap(), obs);
    let shifts: Vec<isize> = (0..10).map(|i| recenter_shift(i, 10, 32)).collect();
    assert_eq!(shifts, vec![-14, -11, -8, -5, -2, 2, 5, 8, 11, 14]);
    for i in 0..10 {
        let view = recenter(&obs, i, 10).unwrap();
        assert_eq!(view.rolled(-recenter_shift(i, 10, 32)), obs);
        let mut a = view.data.clone();
        let mut b = obs.data.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
    assert!(matches!(recenter(&obs, 10, 10), Err(EnvError::Precondition(_))));
}

#[test]
fn recentering_is_mirror_consistent() {
    let cfg = small_solver();
    let probes = ProbeGrid::new(&cfg, 32).unwrap();
    let s = init_random_flow(&cfg, 3, 0.3).unwrap();
    let obs = probes.sample(&s).unwrap();
    let mirrored = probes.sample(&s.mirrored()).unwrap();
    for i in 0..10 {
        let a = recenter(&mirrored, i, 10).unwrap();
        let b = recenter(&obs, 9 - i, 10).unwrap().reversed([1.0, -1.0, 1.0]);
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn aligned_columns_give_exact_translation_compatibility() {
    let cfg = SolverConfig { nx: 30, ..small_solver() };
    let probes = ProbeGrid::new(&cfg, 30).unwrap();
    let s = init_random_flow(&cfg, 4, 0.3).unwrap();
    let obs = probes.sample(&s).unwrap();
    for k in [1isize, 3, 7] {
        let shifted = probes.sample(&s.translated(k, 10).unwrap()).unwrap();
        for i in 0..10 {
            let j = (i as isize + k).rem_euclid(10) as usize;
            let a = recenter(&shifted, j, 10).unwrap();
            let b = recenter(&obs, i, 10).unwrap();
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }
    for i in 0..10 {
        for k in 0..10 {
            let drift = recenter_shift((i + k) % 10, 10, 32) - recenter_shift(i, 10, 32);
            let ideal = 3.2 * k as f64 - if i + k >= 10 { 32.0 } else { 0.0 };
            assert!((drift as f64 - ideal).abs() <= 1.0);
        }
    }
}

fn small_env(env: EnvConfig) -> MarlEnv {
    let cfg = small_solver();
    let start = init_random_flow(&cfg, 5, 0.2).unwrap();
    MarlEnv::new(&cfg, &env, start, 2.0).unwrap()
}

#[test]
fn episode_produces_one_view_per_agent_and_finishes() {
    let mut env = small_env(EnvConfig { action_duration: 0.01, ..EnvConfig::default() });
    let views = env.reset().unwrap();
    assert_eq!(views.len(), 10);
    let mut done_at = None;
    for t in 1..=200 {
        let out = env.step(&[0.0; 10]).unwrap();
        assert_eq!(out.views.len(), 10);
        if out.done {
            done_at = Some(t);
            break;
        }
    }
    assert_eq!(done_at, Some(200));
    assert!(matches!(env.step(&[0.0; 10]), Err(EnvError::Inactive(_))));
}

#[test]
fn zero_actions_follow_the_uncontrolled_flow() {
    let mut env = small_env(EnvConfig { action_duration: 0.05, actions_per_episode: 3, ..EnvConfig::default() });
    let start = env.state().clone();
    env.reset().unwrap();
    for _ in 0..3 {
        env.step(&[0.0; 10]).unwrap();
    }
    let solver = Solver::new(&small_solver()).unwrap();
    let expected = solver.advance(&start, &WallProfile::uniform(10), 0.15).unwrap();
    assert_eq!(env.state().temperature, expected.temperature);
    assert_eq!(env.state().u, expected.u);
}

#[test]
fn resets_are_identical_and_rewards_use_unencoded_nusselt() {
    let mut env = small_env(EnvConfig { action_duration: 0.05, pe_enabled: true, ..EnvConfig::default() });
    let a = env.reset().unwrap();
    env.step(&[0.5; 10]).unwrap();
    let b = env.reset().unwrap();
    assert_eq!(a, b);
    assert_eq!(env.state().time, 0.0);
    let out = env.step(&[0.2, -0.2, 0.0, 0.0, 0.1, -0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let p = env.reward_params();
    for v in &out.views {
        assert_eq!(v.reward, reward(out.nu_global, out.nu_local[v.agent], &p));
    }
    let mut plain = small_env(EnvConfig { action_duration: 0.05, ..EnvConfig::default() });
    plain.reset().unwrap();
    let out2 = plain.step(&[0.2, -0.2, 0.0, 0.0, 0.1, -0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(out.nu_global, out2.nu_global);
    assert_eq!(out.views[3].reward, out2.views[3].reward);
}

#[test]
fn start_state_nusselt_matches_snapshot() {
    let cfg = small_solver();
    let start = init_conduction(&cfg);
    let env = MarlEnv::new(&cfg, &EnvConfig::default(), start.clone(), 1.0).unwrap();
    let solver = Solver::new(&cfg).unwrap();
    assert_eq!(env.solver().nusselt_global(env.state()), solver.nusselt_global(&start));
}
