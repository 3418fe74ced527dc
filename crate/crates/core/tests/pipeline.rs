use fishpair::abc::{self, AbcConfig};
use fishpair::dli::{Architecture, DliModel};
use fishpair::engine::{self, RolloutConfig};
use fishpair::ingest;
use fishpair::metrics::{compare_batteries, Battery, MetricsConfig};
use fishpair::{ArenaSpec, Exec, Trajectory};

fn short_lags() -> MetricsConfig {
    MetricsConfig {
        max_lag: 5.0,
        ..MetricsConfig::default()
    }
}

#[test]
fn abc_csv_round_trip_keeps_the_battery() {
    let cfg = AbcConfig::default();
    let (traj, _) = abc::simulate_trajectory(2_000, &cfg, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    traj.write_csv_file(&path).unwrap();
    let back = Trajectory::read_csv_file(&path, cfg.arena).unwrap();
    assert_eq!(back.segments.len(), 1);
    assert_eq!(back.total_frames(), 2_000);

    let m = short_lags();
    let a = Battery::compute(&traj, &m, Exec::Sequential).unwrap();
    let b = Battery::compute(&back, &m, Exec::Parallel).unwrap();
    assert_eq!(a.report(), b.report());
    for (name, v) in compare_batteries(&a, &b, m.max_lag).unwrap() {
        assert!(v.abs() < 1e-9, "{name} = {v}");
    }
}

#[test]
fn split_partitions_chunks_and_normalizes_reversibly() {
    let cfg = AbcConfig::default();
    let (traj, _) = abc::simulate_trajectory(5_000, &cfg, 3).unwrap();
    let chunks = traj.chunked(250).segments;
    let n = chunks.len();
    let split = ingest::split(chunks.clone(), ingest::SPLIT_FRACTIONS, 4).unwrap();
    assert_eq!(split.train.len() + split.validation.len() + split.test.len(), n);
    assert!(!split.test.is_empty());

    let norm = ingest::normalize(&split.train, cfg.arena.radius).unwrap();
    for (a, b) in norm.denormalize().iter().zip(&split.train) {
        for (pa, pb) in a.agents.iter().zip(&b.agents) {
            for (u, v) in pa.iter().zip(pb) {
                assert!((u.x - v.x).abs() < 1e-12 && (u.y - v.y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn untrained_rollouts_stay_in_the_tank_and_feed_the_battery() {
    let arena = ArenaSpec::default();
    let model = DliModel::new(Architecture::Dli, 8, &arena, 1);
    let cfgs: Vec<RolloutConfig> = (0..2)
        .map(|seed| RolloutConfig {
            arena,
            steps: 400,
            seed,
            ..RolloutConfig::default()
        })
        .collect();
    let seq = engine::rollout_many(&model, &cfgs, Exec::Sequential);
    let par = engine::rollout_many(&model, &cfgs, Exec::Parallel);
    for (s, p) in seq.into_iter().zip(par) {
        let (ts, _) = s.unwrap();
        let (tp, _) = p.unwrap();
        assert_eq!(ts, tp);
        for seg in &ts.segments {
            for agent in &seg.agents {
                assert!(agent.iter().all(|u| arena.contains(*u)));
            }
        }
        Battery::compute(&ts, &short_lags(), Exec::Parallel).unwrap();
    }
}
