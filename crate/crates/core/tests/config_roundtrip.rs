use deskbench::config::ScenarioConfig;
use deskbench::envs::{MacsConfig, SocialNavScenario};
use deskbench::record::Task;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn macs_scenario_survives_toml(
        seeds in prop::collection::vec(any::<u64>(), 1..5),
        episodes in 1u32..50,
        frame_every in 0u64..10,
        n_agents in 2usize..8,
        sensor_cm in 50.0f64..2000.0,
        local_ratio in 0.0f64..=1.0,
        greedy in any::<bool>(),
    ) {
        let mut cfg = ScenarioConfig::new(Task::Macs, if greedy { "greedy" } else { "random" });
        cfg.seeds = seeds;
        cfg.episodes = episodes;
        cfg.frame_every = frame_every;
        cfg.macs = Some(MacsConfig {
            n_agents,
            n_coop: 2,
            sensor_range: sensor_cm / 100.0,
            local_ratio,
            ..MacsConfig::default()
        });
        let text = cfg.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn socialnav_scenario_survives_toml(n_peds in 0usize..60, radius in 8.0f64..30.0, t_max in 10.0f64..200.0) {
        let mut cfg = ScenarioConfig::new(Task::Socialnav, "mppi");
        cfg.socialnav = Some(SocialNavScenario {
            n_pedestrians: n_peds,
            arena_radius: radius,
            min_start_goal_dist: radius,
            t_max_wall: t_max,
            ..SocialNavScenario::default()
        });
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn sensor_range_is_written_in_centimeters() {
    let mut cfg = ScenarioConfig::new(Task::Macs, "random");
    cfg.macs = Some(MacsConfig { sensor_range: 2.5, ..MacsConfig::default() });
    let text = cfg.to_toml().unwrap();
    assert!(text.contains("sensor_range = 250.0"), "{text}");
}
