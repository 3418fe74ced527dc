//! Closed-loop rollouts of a trained interaction model.
//!
//! Every tick, each agent builds its state windows against the others,
//! receives a Gaussian acceleration prediction, samples it, and integrates.
//! All predictions in a tick read only pre-tick states, and each agent draws
//! from its own random stream.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dli::{build_state_vector, DliModel, GaussianAccelPrediction, HISTORY, STATE_WIDTH};
use crate::error::EngineError;
use crate::exec::Exec;
use crate::geometry::{AgentState, ArenaSpec, SystemState, Vec2};
use crate::rng::{self, StreamRng};
use crate::trajectory::{Segment, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Containment {
    #[default]
    Reflect,
    Clamp,
}

impl std::str::FromStr for Containment {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, EngineError> {
        match s {
            "reflect" => Ok(Containment::Reflect),
            "clamp" => Ok(Containment::Clamp),
            _ => Err(EngineError::Config(format!(
                "unknown containment policy {s:?} (expected reflect or clamp)"
            ))),
        }
    }
}

impl std::fmt::Display for Containment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Containment::Reflect => "reflect",
            Containment::Clamp => "clamp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub arena: ArenaSpec,
    pub steps: usize,
    pub agents: usize,
    pub seed: u64,
    pub containment: Containment,
    /// Use `sigma_x` for the y noise term, as literally written in the model
    /// definition.
    pub strict_paper_noise: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            arena: ArenaSpec::default(),
            steps: 500_000,
            agents: 2,
            seed: 0,
            containment: Containment::Reflect,
            strict_paper_noise: false,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.steps == 0 {
            return Err(EngineError::Config("steps must be positive".into()));
        }
        if self.agents < 2 {
            return Err(EngineError::Config(format!(
                "need at least 2 agents, got {}",
                self.agents
            )));
        }
        self.arena
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))
    }
}

/// Last `HISTORY` positions and velocities of one agent, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRolloutState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl AgentRolloutState {
    pub fn position(&self) -> Vec2 {
        *self.positions.last().unwrap()
    }

    pub fn velocity(&self) -> Vec2 {
        *self.velocities.last().unwrap()
    }

    fn push(&mut self, u: Vec2, v: Vec2) {
        self.positions.remove(0);
        self.positions.push(u);
        self.velocities.remove(0);
        self.velocities.push(v);
    }
}

pub const INIT_CLEARANCE: f64 = 2.0;
pub const INIT_SPEED: (f64, f64) = (5.0, 15.0);

/// Straight five-frame start at least `INIT_CLEARANCE` cm from the wall.
pub fn init_agent(arena: &ArenaSpec, rng: &mut StreamRng) -> AgentRolloutState {
    let limit = arena.radius - INIT_CLEARANCE;
    loop {
        let r = limit * rng.random::<f64>().sqrt();
        let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let speed = rng.random_range(INIT_SPEED.0..=INIT_SPEED.1);
        let u0 = Vec2::from_angle(a) * r;
        let v = Vec2::from_angle(heading) * speed;
        let positions: Vec<Vec2> = (0..HISTORY).map(|k| u0 + v * (k as f64 * arena.dt)).collect();
        if positions.iter().all(|p| p.norm() <= limit) {
            return AgentRolloutState {
                positions,
                velocities: vec![v; HISTORY],
            };
        }
    }
}

/// One independent stream per agent.
pub fn agent_streams(seed: u64, n: usize) -> Vec<StreamRng> {
    (0..n).map(|a| rng::stream(seed, "rollout", a as u64)).collect()
}

pub fn init_agents(cfg: &RolloutConfig, streams: &mut [StreamRng]) -> Vec<AgentRolloutState> {
    streams.iter_mut().map(|r| init_agent(&cfg.arena, r)).collect()
}

pub fn sample_acceleration<R: Rng + ?Sized>(
    pred: &GaussianAccelPrediction,
    rng: &mut R,
    strict_paper_noise: bool,
) -> Vec2 {
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    let sy = if strict_paper_noise {
        pred.sigma.x
    } else {
        pred.sigma.y
    };
    Vec2::new(pred.mu.x + pred.sigma.x * gx, pred.mu.y + sy * gy)
}

/// Velocity first, then position with the new velocity.
pub fn integrate(u: Vec2, v: Vec2, a: Vec2, dt: f64) -> (Vec2, Vec2) {
    let v1 = v + a * dt;
    (u + v1 * dt, v1)
}

/// Keeps `u` inside the arena; returns whether a correction was applied.
pub fn contain(u: Vec2, v: Vec2, arena: &ArenaSpec, policy: Containment) -> (Vec2, Vec2, bool) {
    let r = u.norm();
    if r <= arena.radius {
        return (u, v, false);
    }
    let n = u / r;
    let vr = v.dot(n);
    match policy {
        Containment::Reflect => {
            // mirror the overshoot back inside; guard against huge overshoots
            let r_new = (2.0 * arena.radius - r).clamp(0.0, arena.radius);
            let v_new = if vr > 0.0 { v - n * (2.0 * vr) } else { v };
            (n * r_new, v_new, true)
        }
        Containment::Clamp => {
            let v_new = if vr > 0.0 { v - n * vr } else { v };
            (n * (arena.radius - 1e-6), v_new, true)
        }
    }
}

/// Per-rollout intervention counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RolloutLog {
    pub containment_per_agent: Vec<usize>,
}

impl RolloutLog {
    pub fn total(&self) -> usize {
        self.containment_per_agent.iter().sum()
    }
}

fn system_state(arena: &ArenaSpec, a: &AgentRolloutState, b: &AgentRolloutState, k: usize) -> SystemState {
    SystemState::new(
        AgentState::new(arena, a.positions[k], a.velocities[k]),
        AgentState::new(arena, b.positions[k], b.velocities[k]),
    )
}

/// Combines the neighbor predictions of one focal agent: the two largest
/// mean accelerations are summed and their deviations averaged.
pub fn combine_top2(preds: &[GaussianAccelPrediction]) -> GaussianAccelPrediction {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].mu.norm().total_cmp(&preds[a].mu.norm()).then(a.cmp(&b)));
    let top = &order[..order.len().min(2)];
    if top.len() == 1 {
        return preds[top[0]];
    }
    let (p, q) = (preds[top[0]], preds[top[1]]);
    GaussianAccelPrediction {
        mu: p.mu + q.mu,
        sigma: (p.sigma + q.sigma) * 0.5,
    }
}

/// Predictions for every (focal, neighbor) pair, focal-major.
fn predict_all(
    model: &DliModel,
    arena: &ArenaSpec,
    agents: &[AgentRolloutState],
    rows: &mut Vec<f64>,
) -> Result<Vec<GaussianAccelPrediction>, EngineError> {
    let n = agents.len();
    let w = model.window();
    rows.clear();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for k in HISTORY - w..HISTORY {
                let s = system_state(arena, &agents[i], &agents[j], k);
                rows.extend_from_slice(&build_state_vector(&s, model.radius)?);
            }
        }
    }
    debug_assert_eq!(rows.len(), n * (n - 1) * w * STATE_WIDTH);
    Ok(model.predict_rows(rows, n * (n - 1))?)
}

/// Rollout with any number of agents; two agents reduce to the pair model.
pub fn rollout_group(model: &DliModel, cfg: &RolloutConfig) -> Result<(Trajectory, RolloutLog), EngineError> {
    cfg.validate()?;
    let n = cfg.agents;
    let arena = cfg.arena;
    let mut streams = agent_streams(cfg.seed, n);
    let mut agents = init_agents(cfg, &mut streams);
    let mut out: Vec<Vec<Vec2>> = vec![Vec::with_capacity(cfg.steps); n];
    let mut log = RolloutLog {
        containment_per_agent: vec![0; n],
    };
    let mut rows = Vec::new();
    for tick in 0..cfg.steps {
        let preds = predict_all(model, &arena, &agents, &mut rows)?;
        let mut next = Vec::with_capacity(n);
        for (i, stream) in streams.iter_mut().enumerate() {
            let p = combine_top2(&preds[i * (n - 1)..(i + 1) * (n - 1)]);
            let a = sample_acceleration(&p, stream, cfg.strict_paper_noise);
            let (u, v) = integrate(agents[i].position(), agents[i].velocity(), a, arena.dt);
            let (u, v, hit) = contain(u, v, &arena, cfg.containment);
            if !(u.is_finite() && v.is_finite()) {
                return Err(EngineError::NonFinite {
                    last_good: tick.saturating_sub(1),
                });
            }
            log.containment_per_agent[i] += hit as usize;
            next.push((u, v));
        }
        for (i, (u, v)) in next.into_iter().enumerate() {
            agents[i].push(u, v);
            out[i].push(u);
        }
    }
    Ok((Trajectory::new(arena, vec![Segment::new(0.0, out)]), log))
}

pub fn rollout_pair(model: &DliModel, cfg: &RolloutConfig) -> Result<(Trajectory, RolloutLog), EngineError> {
    if cfg.agents != 2 {
        return Err(EngineError::Config(format!(
            "pair rollout needs 2 agents, got {}",
            cfg.agents
        )));
    }
    rollout_group(model, cfg)
}

/// Independent rollouts, one per config, in input order.
pub fn rollout_many(
    model: &DliModel,
    cfgs: &[RolloutConfig],
    exec: Exec,
) -> Vec<Result<(Trajectory, RolloutLog), EngineError>> {
    exec.map(cfgs, |c| rollout_group(model, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dli::Architecture;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn arena() -> ArenaSpec {
        ArenaSpec::default()
    }

    #[test]
    fn integrate_examples() {
        let (u, v) = integrate(Vec2::new(1.0, 1.0), Vec2::ZERO, Vec2::new(1.0, 0.0), 0.12);
        assert_abs_diff_eq!(v.x, 0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(u.x - 1.0, 0.0144, epsilon = 1e-15);
        assert_eq!(v.y, 0.0);
        let v0 = Vec2::new(3.0, -2.0);
        let (u, _) = integrate(Vec2::ZERO, v0, Vec2::ZERO, 0.12);
        assert_eq!(u, v0 * 0.12);
        let (u1, v1) = integrate(Vec2::ZERO, v0, Vec2::ZERO, 0.12);
        let (u2, _) = integrate(u1, v1, Vec2::ZERO, 0.12);
        let (u3, _) = integrate(Vec2::ZERO, v0, Vec2::ZERO, 0.24);
        assert_abs_diff_eq!(u2.x, u3.x, epsilon = 1e-15);
        assert_abs_diff_eq!(u2.y, u3.y, epsilon = 1e-15);
    }

    #[test]
    fn containment_examples() {
        let a = arena();
        let inside = (Vec2::new(3.0, 4.0), Vec2::new(1.0, 1.0));
        assert_eq!(contain(inside.0, inside.1, &a, Containment::Reflect), (inside.0, inside.1, false));
        let (u, v, hit) = contain(Vec2::new(26.0, 0.0), Vec2::new(5.0, 2.0), &a, Containment::Reflect);
        assert!(hit);
        assert_abs_diff_eq!(u.x, 24.0, epsilon = 1e-12);
        assert_eq!(v, Vec2::new(-5.0, 2.0));
        let (u, v, _) = contain(Vec2::new(0.0, 30.0), Vec2::new(1.0, 4.0), &a, Containment::Clamp);
        assert_eq!(u.norm(), 25.0 - 1e-6);
        assert_eq!(v, Vec2::new(1.0, 0.0));
        assert!("sticky".parse::<Containment>().is_err());
        assert_eq!("clamp".parse::<Containment>().unwrap(), Containment::Clamp);
    }

    #[test]
    fn sampling_statistics() {
        let p = GaussianAccelPrediction { mu: Vec2::ZERO, sigma: Vec2::new(1.0, 1.0) };
        let mut r = StreamRng::seed_from_u64(3);
        let n = 100_000;
        let draws: Vec<Vec2> = (0..n).map(|_| sample_acceleration(&p, &mut r, false)).collect();
        for c in [|v: &Vec2| v.x, |v: &Vec2| v.y] {
            let m = draws.iter().map(c).sum::<f64>() / n as f64;
            let s = (draws.iter().map(|v| (c(v) - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(m.abs() < 0.02 && (s - 1.0).abs() < 0.02, "{m} {s}");
        }
        let tiny = GaussianAccelPrediction { mu: Vec2::new(2.0, -1.0), sigma: Vec2::new(1e-300, 1e-300) };
        let a = sample_acceleration(&tiny, &mut r, false);
        assert_abs_diff_eq!(a.x, 2.0);
        assert_abs_diff_eq!(a.y, -1.0);
        let mut r1 = StreamRng::seed_from_u64(4);
        let mut r2 = StreamRng::seed_from_u64(4);
        assert_eq!(sample_acceleration(&p, &mut r1, false), sample_acceleration(&p, &mut r2, false));
    }

    #[test]
    fn strict_noise_changes_only_the_y_term() {
        let p = GaussianAccelPrediction { mu: Vec2::new(1.0, 2.0), sigma: Vec2::new(0.5, 3.0) };
        let mut r1 = StreamRng::seed_from_u64(4);
        let mut r2 = StreamRng::seed_from_u64(4);
        let a = sample_acceleration(&p, &mut r1, false);
        let b = sample_acceleration(&p, &mut r2, true);
        assert_eq!(a.x, b.x);
        assert_abs_diff_eq!((a.y - 2.0) / 3.0, (b.y - 2.0) / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn initialization_is_seeded_and_clear_of_the_wall() {
        let cfg = RolloutConfig { agents: 2, ..Default::default() };
        let a = init_agents(&cfg, &mut agent_streams(7, 2));
        let b = init_agents(&cfg, &mut agent_streams(7, 2));
        assert_eq!(a, b);
        for _ in 0..200 {
            let s = init_agent(&cfg.arena, &mut StreamRng::seed_from_u64(rand::random()));
            assert_eq!(s.positions.len(), 5);
            assert!(s.positions.iter().all(|p| cfg.arena.wall_distance(*p) >= 2.0));
            let speed = s.velocity().norm();
            assert!((5.0..=15.0 + 1e-12).contains(&speed));
            for k in 1..5 {
                let d = (s.positions[k] - s.positions[k - 1]) / cfg.arena.dt;
                assert!((d - s.velocities[k]).norm() < 1e-9);
            }
        }
        // adding agents leaves existing streams untouched
        let five = init_agents(&RolloutConfig { agents: 5, ..cfg }, &mut agent_streams(7, 5));
        assert_eq!(&five[..2], &a[..]);
    }

    #[test]
    fn top2_combination() {
        let g = |x: f64, y: f64| GaussianAccelPrediction { mu: Vec2::new(x, y), sigma: Vec2::new(x.abs() + 1.0, 1.0) };
        let c = combine_top2(&[g(5.0, 0.0), g(0.0, 1.0)]);
        assert!((4.0..=6.0).contains(&c.mu.norm()));
        let c = combine_top2(&[g(0.1, 0.0), g(5.0, 0.0), g(-3.0, 0.0), g(0.0, 0.5)]);
        assert_eq!(c.mu, Vec2::new(2.0, 0.0));
        assert_eq!(c.sigma, Vec2::new(5.0, 1.0));
        assert_eq!(combine_top2(&[g(1.0, 1.0)]), g(1.0, 1.0));
    }

    fn small_model() -> DliModel {
        let mut m = DliModel::new(Architecture::Dli, 8, &arena(), 3);
        // keep the untrained noise modest so rollouts stay well-behaved
        if let crate::neural::Layer::Dense(d) = m.net.layers.last_mut().unwrap() {
            d.weight.fill(0.0);
            d.bias.fill(0.0);
            d.bias[2] = -2.0;
            d.bias[3] = -2.0;
        }
        m
    }

    #[test]
    fn rollouts_are_reproducible_and_contained() {
        let m = small_model();
        for policy in [Containment::Reflect, Containment::Clamp] {
            let cfg = RolloutConfig { steps: 400, seed: 11, containment: policy, ..Default::default() };
            let (t, log) = rollout_pair(&m, &cfg).unwrap();
            assert_eq!(t.total_frames(), 400);
            assert!(t.segments[0].agents.iter().flatten().all(|u| u.norm() <= 25.0));
            let (t2, log2) = rollout_pair(&m, &cfg).unwrap();
            assert_eq!(t, t2);
            assert_eq!(log, log2);
        }
        assert!(rollout_pair(&m, &RolloutConfig { steps: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn group_of_two_equals_pair_and_strict_flag_is_isolated() {
        let m = small_model();
        let cfg = RolloutConfig { steps: 50, seed: 2, ..Default::default() };
        let (a, _) = rollout_pair(&m, &cfg).unwrap();
        let (b, _) = rollout_group(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = rollout_group(&m, &RolloutConfig { strict_paper_noise: true, ..cfg }).unwrap();
        // sigma_x == sigma_y for this head, so the literal noise term coincides
        assert_eq!(a, c);
    }

    #[test]
    fn group_rollout_runs() {
        let m = small_model();
        let cfg = RolloutConfig { steps: 100, agents: 5, seed: 4, ..Default::default() };
        let (t, log) = rollout_group(&m, &cfg).unwrap();
        assert_eq!(t.n_agents(), 5);
        assert_eq!(log.containment_per_agent.len(), 5);
        let many = rollout_many(&m, &[cfg, cfg], Exec::Parallel);
        assert_eq!(many[0].as_ref().unwrap().0, t);
        assert_eq!(many[1].as_ref().unwrap().0, t);
    }
}
