use uansim::des::SimTime;
use uansim::env::{DataCollectEnv, NUM_ACTIONS};
use uansim::error::EnvError;
use uansim::scenario::Scenario;
use uansim::trace::TraceEvent;

fn bundled() -> DataCollectEnv {
    DataCollectEnv::load("datacollect3x25").unwrap()
}

/// Two agents 1 km apart and one sensor far out of collection range.
fn quiet_pair() -> DataCollectEnv {
    let text = r#"
        seed = 4
        duration = 5000.0
        [env]
        agents = [10, 11]
        sensors = [1]
        step_duration = 4.0
        horizon = 20
        collection_range = 50.0
        [[nodes]]
        id = 1
        position = [0.0, 10000.0, 100.0]
        [[nodes]]
        id = 10
        position = [0.0, 0.0, 50.0]
        [[nodes]]
        id = 11
        position = [1000.0, 0.0, 50.0]
    "#;
    DataCollectEnv::new(Scenario::from_toml_str(text).unwrap()).unwrap()
}

#[test]
fn specs_describe_the_bundled_layout() {
    let env = bundled();
    let obs = env.observation_spec();
    assert_eq!(obs.len(), 41);
    assert_eq!(obs.agents, vec![101, 102, 103]);
    assert_eq!(&obs.names[..4], &["self.x", "self.y", "self.z", "self.collected"]);
    assert_eq!(obs.names[9], "peer0.mask");
    assert_eq!(obs.names[15], "peer1.mask");
    assert_eq!(obs.names[16], "sensor1.buffer");
    let act = env.action_spec();
    assert_eq!(act.n, NUM_ACTIONS);
    assert_eq!(act.names.len(), 9);
    assert_eq!(act.names[0], "hover");
}

#[test]
fn reset_masks_every_peer() {
    let mut env = bundled();
    let obs = env.reset(None).unwrap();
    assert_eq!(obs.time, SimTime::ZERO);
    assert_eq!(obs.agents.len(), 3);
    for a in &obs.agents {
        assert_eq!(a.values.len(), 41);
        for k in 0..2 {
            assert!(a.peer_masked(k));
            assert!(a.peer_age(k).is_none());
            assert!(a.sources[k].is_none());
        }
        assert!(a.values[16..].iter().all(|&b| b == 4.0));
    }
}

#[test]
fn schema_violations_are_rejected() {
    let mut env = bundled();
    assert!(matches!(env.step(&[0, 0, 0]), Err(EnvError::Schema(_))));
    env.reset(None).unwrap();
    assert!(matches!(env.step(&[0, 0]), Err(EnvError::Schema(_))));
    assert!(matches!(env.step(&[0, 0, 0, 0]), Err(EnvError::Schema(_))));
    assert!(matches!(env.step(&[0, 9, 0]), Err(EnvError::Schema(_))));
    assert_eq!(env.steps(), 0, "rejected steps must not advance");
    env.step(&[0, 8, 1]).unwrap();
    env.close();
    assert!(matches!(env.step(&[0, 0, 0]), Err(EnvError::Closed)));
    assert!(matches!(env.reset(None), Err(EnvError::Closed)));
}

#[test]
fn horizon_ends_the_episode() {
    let mut env = quiet_pair();
    env.reset(None).unwrap();
    for k in 1..=20 {
        let r = env.step(&[0, 0]).unwrap();
        assert_eq!(r.done, k == 20);
    }
    assert!(matches!(env.step(&[0, 0]), Err(EnvError::Done)));
    env.reset(None).unwrap();
    assert!(env.step(&[0, 0]).is_ok());
}

#[test]
fn clock_advances_exactly_one_step_per_call() {
    let mut env = bundled();
    env.reset(Some(3)).unwrap();
    let step = SimTime::from_secs(env.params().step_duration).unwrap();
    for k in 1..=40u64 {
        let r = env.step(&[k as usize % 9, 0, 3]).unwrap();
        assert_eq!(r.observation.time.as_nanos(), k * step.as_nanos());
        assert_eq!(env.now(), Some(r.observation.time));
    }
}

#[test]
fn reset_replays_the_episode() {
    let mut env = bundled();
    let actions = |k: usize| [k % 9, (k * 5) % 9, (k * 7 + 2) % 9];
    let mut run = |seed| {
        let mut out = vec![env.reset(Some(seed)).unwrap()];
        for k in 0..30 {
            let r = env.step(&actions(k)).unwrap();
            out.push(r.observation);
        }
        out
    };
    let a = run(5);
    let b = run(5);
    let c = run(6);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn peer_features_come_from_received_replies() {
    let mut env = bundled();
    env.set_trace(true);
    env.reset(None).unwrap();
    let mut seen = Vec::new();
    for k in 0..60 {
        let r = env.step(&[k % 9, 0, (k + 4) % 9]).unwrap();
        for (a, obs) in r.observation.agents.iter().enumerate() {
            for (k, src) in obs.sources.iter().enumerate() {
                if let Some(v) = src {
                    assert!(v.measured_at <= r.observation.time);
                    let base = 4 + 6 * k;
                    assert_eq!(obs.values[base], v.position.x);
                    assert_eq!(obs.values[base + 3], v.collected);
                    seen.push((a, r.observation.time, *v));
                }
            }
        }
    }
    assert!(!seen.is_empty(), "no peer was ever observed");
    let net = env.network().unwrap();
    let trace = net.trace().records();
    let agents = [101u16, 102, 103];
    for (a, t, v) in seen {
        let delivered = trace
            .iter()
            .any(|r| r.event == TraceEvent::Deliver && r.node == agents[a] && r.uid == v.uid && r.t <= t.as_secs());
        assert!(delivered, "agent {} used reply {} it never received", agents[a], v.uid);
        let ok = trace.iter().find(|r| r.event == TraceEvent::RxOk && r.node == agents[a] && r.uid == v.uid).unwrap();
        let sent = trace.iter().find(|r| r.event == TraceEvent::TxStart && r.uid == v.uid).unwrap();
        assert_eq!(ok.peer, Some(sent.node));
        assert!(v.measured_at.as_secs() <= sent.t + 1e-9);
    }
}

#[test]
fn collected_data_matches_deliveries() {
    let mut env = bundled();
    env.set_trace(true);
    env.reset(None).unwrap();
    let mut total = 0u64;
    let mut last = None;
    for k in 0..80 {
        let r = env.step(&[(k / 10) % 9, 0, 2]).unwrap();
        total += r.info.collected.iter().sum::<u64>();
        for (rew, (c, d)) in r.rewards.iter().zip(r.info.collected.iter().zip(&r.info.distance)) {
            assert!((rew - (*c as f64 - 0.001 * d)).abs() < 1e-12);
        }
        last = Some(r);
    }
    let last = last.unwrap();
    let trace = env.network().unwrap().trace().records();
    let from_sensor: std::collections::HashSet<u64> =
        trace.iter().filter(|r| r.event == TraceEvent::TxStart && r.node <= 25).map(|r| r.uid).collect();
    let data = trace
        .iter()
        .filter(|r| r.event == TraceEvent::Deliver && r.node > 100 && from_sensor.contains(&r.uid))
        .count() as u64;
    assert!(total > 0);
    assert_eq!(total, data);
    let own: f64 = last.observation.agents.iter().map(|a| a.values[3]).sum();
    assert_eq!(own, total as f64);
}

#[test]
fn hovering_out_of_range_earns_nothing() {
    let mut env = quiet_pair();
    let start = env.reset(None).unwrap();
    let mut heard = false;
    for _ in 0..10 {
        let r = env.step(&[0, 0]).unwrap();
        assert_eq!(r.rewards, vec![0.0, 0.0]);
        assert_eq!(r.info.remaining, 4);
        for (a, b) in r.observation.agents.iter().zip(&start.agents) {
            assert_eq!(a.values[..3], b.values[..3]);
        }
        heard |= r.observation.agents.iter().any(|a| !a.peer_masked(0));
    }
    assert!(heard, "1 km peers never heard each other");
}

#[test]
fn moving_east_covers_speed_times_step() {
    let mut env = quiet_pair();
    let start = env.reset(None).unwrap();
    let r = env.step(&[1, 5]).unwrap();
    let east = r.observation.agents[0].values[0] - start.agents[0].values[0];
    let west = r.observation.agents[1].values[0] - start.agents[1].values[0];
    assert!((east - 8.0).abs() < 1e-9, "{east}");
    assert!((west + 8.0).abs() < 1e-9, "{west}");
    assert_eq!(r.info.distance, vec![8.0, 8.0]);
    assert!((r.rewards[0] + 0.008).abs() < 1e-12);
}

#[test]
fn invalid_env_config_is_reported() {
    let bad = r#"
        duration = 100.0
        [env]
        agents = [10]
        step_duration = 2.0
        request_jitter = 3.0
        [[nodes]]
        id = 10
        position = [0.0, 0.0, 0.0]
    "#;
    let open = |text: &str| -> Result<DataCollectEnv, String> {
        let s = Scenario::from_toml_str(text).map_err(|e| e.to_string())?;
        DataCollectEnv::new(s).map_err(|e| e.to_string())
    };
    let err = open(bad).err().unwrap();
    assert!(err.contains("env.request_jitter"), "{err}");
    let unknown = "duration = 100.0\n[env]\nagents = [99]\n[[nodes]]\nid = 1\nposition = [0.0, 0.0, 0.0]\n";
    assert!(open(unknown).is_err());
}
