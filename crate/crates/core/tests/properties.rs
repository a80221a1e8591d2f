use proptest::prelude::*;
use rbcflow_core::env::{process_actions_detailed, recenter_shift, EnvConfig, PeForm};
use rbcflow_core::grad::{Graph, Tensor};
use rbcflow_core::lab::ExperimentConfig;
use rbcflow_core::nets::{FlipMode, TrunkKind};
use rbcflow_core::ppo::{compute_gae, EpisodeSummary, PpoHyper, RolloutBuffer, Transition};
use rbcflow_core::solver::GlobalObservation;

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (1e3f64..1e6, 0.1f64..10.0, 8usize..40, 17usize..40, 1e-4f64..0.05),
        (1usize..16, 1usize..300, 0.01f64..5.0, 0.0f64..1.0, prop::option::of(0.5f64..5.0), any::<bool>(), any::<bool>()),
        (prop_oneof![Just(TrunkKind::Fc), Just(TrunkKind::GiNn), Just(TrunkKind::GiCnn)], 1usize..600, any::<bool>()),
        (0.01f64..0.5, 0.5f64..0.999, 0.0f64..1.0, prop::option::of(0.001f64..0.1)),
        (prop::collection::vec(0u64..1000, 1..4), 1usize..500, 1.0f64..100.0),
    )
        .prop_map(|(s, e, n, p, r)| {
            let mut c = ExperimentConfig::default();
            c.solver.rayleigh = s.0;
            c.solver.prandtl = s.1;
            c.solver.nx = 2 * s.2;
            c.solver.ny = s.3;
            c.solver.dt = s.4;
            c.env.n_segments = e.0;
            c.env.actions_per_episode = e.1;
            c.env.action_duration = e.2;
            c.env.beta = e.3;
            c.env.reward_offset = e.4;
            c.env.pe_enabled = e.5;
            c.env.pe_form = if e.6 { PeForm::Periodic } else { PeForm::Literal };
            c.network.trunk = n.0;
            c.network.hidden_width = n.1;
            c.network.flip_mode = if n.2 { FlipMode::Physical } else { FlipMode::Naive };
            c.ppo.clip_epsilon = p.0;
            c.ppo.gamma = p.1;
            c.ppo.gae_lambda = p.2;
            c.ppo.target_kl = p.3;
            c.run.seeds = r.0;
            c.run.episodes = r.1;
            c.run.baseline_horizon = 2.0 * r.2;
            c.run.baseline_average_window = r.2;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip(cfg in config()) {
        prop_assume!(cfg.validate().is_ok());
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn reverse_width_is_an_involution(c in 1usize..4, h in 1usize..6, w in 1usize..9, seed in any::<u64>()) {
        let data: Vec<f64> = (0..c * h * w).map(|i| ((i as u64 ^ seed) % 97) as f64 - 48.5).collect();
        let signs: Vec<f64> = (0..c).map(|i| if (seed >> i) & 1 == 0 { 1.0 } else { -1.0 }).collect();
        let g = Graph::new();
        let x = g.constant(Tensor::new(&[c, h, w], data.clone()).unwrap());
        let twice = x.reverse_width(&signs).unwrap().reverse_width(&signs).unwrap().value();
        prop_assert_eq!(twice.data(), &data[..]);
    }

    #[test]
    fn observation_flip_is_an_involution(columns in 3usize..12, seed in any::<u64>()) {
        let data: Vec<f64> = (0..24 * columns).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 500.0 - 1.0).collect();
        let obs = GlobalObservation::from_data(columns, data).unwrap();
        for mode in [FlipMode::Physical, FlipMode::Naive] {
            let back = rbcflow_core::nets::flip_observation(&rbcflow_core::nets::flip_observation(&obs, mode), mode);
            prop_assert_eq!(&back, &obs);
        }
    }

    #[test]
    fn action_pipeline_centres_and_bounds(raw in prop::collection::vec(-1.0f64..=1.0, 1..20), limit in 0.05f64..1.5) {
        let cfg = EnvConfig { n_segments: raw.len(), clamp_limit: limit, ..EnvConfig::default() };
        let p = process_actions_detailed(&raw, &cfg).unwrap();
        prop_assert!(p.centered.iter().sum::<f64>().abs() / raw.len() as f64 <= 1e-12);
        prop_assert!(p.offsets.iter().all(|v| v.abs() <= limit));
        for (c, o) in p.centered.iter().zip(&p.offsets) {
            if c.abs() <= limit {
                prop_assert_eq!(c, o);
            }
        }
    }

    #[test]
    fn recentering_shifts_each_segment_to_the_middle(segments in 1usize..12, per in 1usize..6) {
        let columns = segments * per;
        for agent in 0..segments {
            let shift = recenter_shift(agent, segments, columns);
            let centre = (columns as f64) * (agent as f64 + 0.5) / segments as f64;
            let moved = (centre - shift as f64).rem_euclid(columns as f64);
            prop_assert!((moved - columns as f64 / 2.0).abs() <= 1.0, "agent {agent}: {moved}");
        }
    }

    #[test]
    fn gae_vanishes_on_the_value_fixed_point(c in -2.0f64..2.0, gamma in 0.5f64..0.99, lambda in 0.0f64..1.0, len in 1usize..40) {
        let hyper = PpoHyper { gamma, gae_lambda: lambda, ..PpoHyper::default() };
        let v = c / (1.0 - gamma);
        let mut b = RolloutBuffer::new(1);
        b.transitions = (0..len)
            .map(|t| Transition {
                agent: 0,
                step: t,
                observation: GlobalObservation::zeros(1),
                action: 0.0,
                sample: 0.0,
                log_prob: 0.0,
                reward: c,
                value: v,
                advantage: 0.0,
                ret: 0.0,
            })
            .collect();
        b.episodes.push(EpisodeSummary { start: 0, steps: len, bootstrap: vec![v], blow_up: false, mean_nu: 0.0, final_nu: 0.0, mean_reward: 0.0 });
        compute_gae(&mut b, &hyper).unwrap();
        prop_assert!(b.transitions.iter().all(|t| t.advantage.abs() < 1e-10));
    }
}
