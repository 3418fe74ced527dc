//! Burst-and-coast kick-event simulator for a pair of agents.
//!
//! Each agent lives on its own timeline of kicks. At a kick the agent picks
//! a heading change from wall, social and noise terms, then glides in a
//! straight line for a sampled length and duration. The pair is advanced in
//! global time order: the agent whose glide ends first decides next, seeing
//! its neighbor interpolated along the neighbor's current glide.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::AbcError;
use crate::geometry::{wrap_deg, ArenaSpec, Vec2};
use crate::rng::{self, StreamRng};
use crate::trajectory::{Segment, Trajectory};

/// Heading-change redraws before falling back to a wall reflection.
const CONTAINMENT_ATTEMPTS: usize = 50;

/// One kick decision.
///
/// The agent sits at `position` with heading `heading` at time `t`, turns by
/// `dphi`, and glides `length` cm along the new heading over `tau` s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickEvent {
    pub t: f64,
    pub heading: f64,
    pub position: Vec2,
    pub tau: f64,
    pub length: f64,
    pub dphi: f64,
}

impl KickEvent {
    /// Heading during the glide that follows this kick, degrees.
    pub fn glide_heading(&self) -> f64 {
        wrap_deg(self.heading + self.dphi)
    }

    pub fn end_time(&self) -> f64 {
        self.t + self.tau
    }

    pub fn end_position(&self) -> Vec2 {
        self.position + Vec2::from_angle(self.glide_heading().to_radians()) * self.length
    }

    /// Position at `t` within the glide, uniform progress along the segment.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let s = ((t - self.t) / self.tau).clamp(0.0, 1.0);
        self.position.lerp(self.end_position(), s)
    }
}

/// Ordered kicks of one agent.
pub type Timeline = Vec<KickEvent>;

/// Wall, social and noise parameters. Strengths and the noise deviation are
/// in degrees, ranges in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionParams {
    pub wall_strength: f64,
    pub wall_range: f64,
    /// Counterclockwise bias of the wall response.
    pub asymmetry: f64,
    pub attraction_strength: f64,
    pub attraction_equilibrium: f64,
    pub attraction_range: f64,
    pub alignment_strength: f64,
    pub alignment_range: f64,
    pub noise_sd: f64,
}

impl Default for InteractionParams {
    fn default() -> Self {
        Self {
            wall_strength: 30.0,
            wall_range: 6.0,
            asymmetry: 0.1,
            attraction_strength: 60.0,
            attraction_equilibrium: 3.0,
            attraction_range: 40.0,
            alignment_strength: 30.0,
            alignment_range: 40.0,
            noise_sd: 20.0,
        }
    }
}

impl InteractionParams {
    pub fn validate(&self) -> Result<(), AbcError> {
        let non_negative = [
            ("wall_strength", self.wall_strength),
            ("attraction_strength", self.attraction_strength),
            ("alignment_strength", self.alignment_strength),
            ("noise_sd", self.noise_sd),
            ("attraction_equilibrium", self.attraction_equilibrium),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(AbcError::Param { name, value });
            }
        }
        let positive = [
            ("wall_range", self.wall_range),
            ("attraction_range", self.attraction_range),
            ("alignment_range", self.alignment_range),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AbcError::Param { name, value });
            }
        }
        if !self.asymmetry.is_finite() {
            return Err(AbcError::Param {
                name: "asymmetry",
                value: self.asymmetry,
            });
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, AbcError> {
        let p: Self = toml::from_str(s).map_err(|e| AbcError::KickTable(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, AbcError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| AbcError::KickTable(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat struct serializes")
    }

    /// Wall term in degrees for wall distance `r_w` (cm) and incidence `theta_w` (degrees).
    pub fn wall_turn(&self, r_w: f64, theta_w: f64) -> f64 {
        let th = theta_w.to_radians();
        let reach = (-(r_w / self.wall_range).powi(2)).exp();
        self.wall_strength * reach * (th.sin() + self.asymmetry * 0.5 * (1.0 + th.cos()))
    }

    /// Attraction plus alignment in degrees.
    pub fn social_turn(&self, d: f64, psi: f64, phi_ij: f64) -> f64 {
        let (psi, phi) = (psi.to_radians(), phi_ij.to_radians());
        let f_att = (d - self.attraction_equilibrium) / self.attraction_range
            * (-(d / self.attraction_range).powi(2)).exp();
        let f_ali = (-(d / self.alignment_range).powi(2)).exp();
        self.attraction_strength * f_att * psi.sin() * (1.0 + phi.cos()) / 2.0
            + self.alignment_strength * f_ali * phi.sin()
    }
}

/// What the focal agent sees of its neighbor at the decision instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborView {
    pub position: Vec2,
    /// Glide heading, degrees.
    pub heading: f64,
}

/// Deterministic part of the heading change, degrees.
pub fn deterministic_turn(
    arena: &ArenaSpec,
    position: Vec2,
    heading: f64,
    neighbor: Option<NeighborView>,
    params: &InteractionParams,
) -> f64 {
    let mut dphi = 0.0;
    if position.norm_sq() > 0.0 {
        let r_w = arena.wall_distance(position);
        let theta_w = wrap_deg(heading - position.angle().to_degrees());
        dphi += params.wall_turn(r_w, theta_w);
    }
    if let Some(n) = neighbor {
        let rel = n.position - position;
        if rel.norm_sq() > 0.0 {
            let psi = wrap_deg(rel.angle().to_degrees() - heading);
            let phi_ij = wrap_deg(n.heading - heading);
            dphi += params.social_turn(rel.norm(), psi, phi_ij);
        }
    }
    dphi
}

/// Full heading change: wall + social + Gaussian noise, degrees.
pub fn heading_change<R: Rng + ?Sized>(
    arena: &ArenaSpec,
    position: Vec2,
    heading: f64,
    neighbor: Option<NeighborView>,
    params: &InteractionParams,
    rng: &mut R,
) -> f64 {
    let mut dphi = deterministic_turn(arena, position, heading, neighbor, params);
    if params.noise_sd > 0.0 {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        dphi += params.noise_sd * g;
    }
    dphi
}

/// `min + Gamma(shape, scale)` with the scale chosen to hit `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedGamma {
    pub min: f64,
    pub mean: f64,
    pub shape: f64,
}

impl ShiftedGamma {
    fn sampler(&self) -> Result<Gamma<f64>, AbcError> {
        Gamma::new(self.shape, (self.mean - self.min) / self.shape).map_err(|e| {
            AbcError::KickTable(format!("bad shifted gamma {self:?}: {e}"))
        })
    }
}

/// Source of `(length, duration)` pairs for kicks.
#[derive(Debug, Clone)]
pub enum KickDistributions {
    Parametric {
        length: ShiftedGamma,
        tau: ShiftedGamma,
    },
    Empirical {
        table: Vec<(f64, f64)>,
        weights: WeightedIndex<f64>,
    },
}

impl Default for KickDistributions {
    fn default() -> Self {
        KickDistributions::Parametric {
            length: ShiftedGamma {
                min: 1.0,
                mean: 7.0,
                shape: 4.0,
            },
            tau: ShiftedGamma {
                min: 0.1,
                mean: 0.5,
                shape: 4.0,
            },
        }
    }
}

impl KickDistributions {
    /// Table of `l_cm,tau_s,weight` rows.
    pub fn from_table(rows: Vec<(f64, f64, f64)>) -> Result<Self, AbcError> {
        if rows.is_empty() {
            return Err(AbcError::KickTable("no rows".into()));
        }
        for &(l, tau, w) in &rows {
            if !(l > 0.0 && tau > 0.0 && w >= 0.0) {
                return Err(AbcError::KickTable(format!(
                    "row ({l}, {tau}, {w}) needs l > 0, tau > 0, weight >= 0"
                )));
            }
        }
        let weights = WeightedIndex::new(rows.iter().map(|r| r.2))
            .map_err(|e| AbcError::KickTable(e.to_string()))?;
        Ok(KickDistributions::Empirical {
            table: rows.iter().map(|r| (r.0, r.1)).collect(),
            weights,
        })
    }

    pub fn load_table(path: &Path) -> Result<Self, AbcError> {
        #[derive(Deserialize)]
        struct Row {
            l_cm: f64,
            tau_s: f64,
            weight: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| AbcError::KickTable(format!("{}: {e}", path.display())))?;
        let rows = reader
            .deserialize::<Row>()
            .map(|r| {
                r.map(|r| (r.l_cm, r.tau_s, r.weight))
                    .map_err(|e| AbcError::KickTable(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_table(rows)
    }

    pub fn validate(&self) -> Result<(), AbcError> {
        if let KickDistributions::Parametric { length, tau } = self {
            for g in [length, tau] {
                if !(g.min > 0.0 && g.mean > g.min && g.shape > 0.0) {
                    return Err(AbcError::KickTable(format!("bad shifted gamma {g:?}")));
                }
                g.sampler()?;
            }
        }
        Ok(())
    }

    /// Draws `(length cm, duration s)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            KickDistributions::Parametric { length, tau } => {
                let l = length.min + length.sampler().unwrap().sample(rng);
                let t = tau.min + tau.sampler().unwrap().sample(rng);
                (l, t)
            }
            KickDistributions::Empirical { table, weights } => table[weights.sample(rng)],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            KickDistributions::Parametric { length, tau } => format!(
                "parametric length(min={}, mean={}, shape={}) tau(min={}, mean={}, shape={})",
                length.min, length.mean, length.shape, tau.min, tau.mean, tau.shape
            ),
            KickDistributions::Empirical { table, .. } => {
                format!("empirical table with {} rows", table.len())
            }
        }
    }
}

/// Pair simulation settings.
#[derive(Debug, Clone, Default)]
pub struct AbcConfig {
    pub arena: ArenaSpec,
    pub params: InteractionParams,
    pub kicks: KickDistributions,
}

/// Counts of containment fallbacks during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContainmentLog {
    pub redraws: usize,
    pub reflections: usize,
    pub shortened: usize,
}

/// Both kick timelines of a simulated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTimelines {
    pub agents: [Timeline; 2],
    pub duration: f64,
}

/// Context handed to [`step_kick`].
struct Kicker<'a> {
    cfg: &'a AbcConfig,
    log: ContainmentLog,
}

impl Kicker<'_> {
    /// Decides the kick at `(t, position, heading)` and returns the event.
    fn decide(
        &mut self,
        t: f64,
        position: Vec2,
        heading: f64,
        neighbor: Option<NeighborView>,
        rng: &mut StreamRng,
    ) -> KickEvent {
        let arena = &self.cfg.arena;
        let (mut length, tau) = self.cfg.kicks.sample(rng);
        let mut dphi = 0.0;
        let mut inside = false;
        for attempt in 0..CONTAINMENT_ATTEMPTS {
            dphi = heading_change(arena, position, heading, neighbor, &self.cfg.params, rng);
            let end = position + Vec2::from_angle((heading + dphi).to_radians()) * length;
            if arena.contains(end) {
                inside = true;
                self.log.redraws += attempt;
                break;
            }
        }
        if !inside {
            self.log.redraws += CONTAINMENT_ATTEMPTS;
            self.log.reflections += 1;
            let mut e = Vec2::from_angle((heading + dphi).to_radians());
            let r = position.norm();
            if r > 0.0 {
                let n = position / r;
                let en = e.dot(n);
                if en > 0.0 {
                    e -= n * (2.0 * en);
                }
            }
            dphi = wrap_deg(e.angle().to_degrees() - heading);
            let e = Vec2::from_angle((heading + dphi).to_radians());
            if !arena.contains(position + e * length) {
                // chord length along e to the wall
                let ue = position.dot(e);
                let reach = -ue + (ue * ue + arena.radius.powi(2) - position.norm_sq()).max(0.0).sqrt();
                length = (0.99 * reach).max(f64::MIN_POSITIVE);
                self.log.shortened += 1;
            }
        }
        KickEvent {
            t,
            heading,
            position,
            tau,
            length,
            dphi: wrap_deg(dphi),
        }
    }
}

/// Appends the next kick to `own`, seeing `other` at the kick instant.
pub fn step_kick(
    own: &mut Timeline,
    other: &Timeline,
    cfg: &AbcConfig,
    rng: &mut StreamRng,
) -> KickEvent {
    let mut k = Kicker {
        cfg,
        log: ContainmentLog::default(),
    };
    step_with(&mut k, own, other, rng)
}

fn step_with(
    k: &mut Kicker<'_>,
    own: &mut Timeline,
    other: &Timeline,
    rng: &mut StreamRng,
) -> KickEvent {
    let last = own.last().expect("timeline has an initial kick");
    let t = last.end_time();
    let neighbor = other
        .iter()
        .rev()
        .find(|e| e.t <= t)
        .map(|e| NeighborView {
            position: e.position_at(t),
            heading: e.glide_heading(),
        });
    let ev = k.decide(t, last.end_position(), last.glide_heading(), neighbor, rng);
    own.push(ev);
    ev
}

/// Random start inside the tank at least `clearance` cm from the wall.
fn initial_state(arena: &ArenaSpec, clearance: f64, rng: &mut StreamRng) -> (Vec2, f64) {
    let r_max = (arena.radius - clearance).max(0.0);
    let r = r_max * rng.random::<f64>().sqrt();
    let a = rng.random_range(-180.0..180.0f64);
    let heading = rng.random_range(-180.0..180.0f64);
    (Vec2::from_angle(a.to_radians()) * r, heading)
}

/// Simulates a pair for `duration` s. Both timelines cover `[0, duration]`.
pub fn simulate(duration: f64, cfg: &AbcConfig, seed: u64) -> Result<PairTimelines, AbcError> {
    simulate_logged(duration, cfg, seed).map(|(t, _)| t)
}

pub fn simulate_logged(
    duration: f64,
    cfg: &AbcConfig,
    seed: u64,
) -> Result<(PairTimelines, ContainmentLog), AbcError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(AbcError::Duration(duration));
    }
    cfg.params.validate()?;
    cfg.kicks.validate()?;
    let mut rngs = [rng::stream(seed, "abc", 0), rng::stream(seed, "abc", 1)];
    let mut kicker = Kicker {
        cfg,
        log: ContainmentLog::default(),
    };

    let starts = [
        initial_state(&cfg.arena, 2.0, &mut rngs[0]),
        initial_state(&cfg.arena, 2.0, &mut rngs[1]),
    ];
    let mut agents: [Timeline; 2] = [Vec::new(), Vec::new()];
    for a in 0..2 {
        let (u, h) = starts[a];
        let (u_o, h_o) = starts[1 - a];
        let view = Some(NeighborView {
            position: u_o,
            heading: h_o,
        });
        let ev = kicker.decide(0.0, u, h, view, &mut rngs[a]);
        agents[a].push(ev);
    }

    loop {
        let ends = [
            agents[0].last().unwrap().end_time(),
            agents[1].last().unwrap().end_time(),
        ];
        let a = if ends[1] < ends[0] { 1 } else { 0 };
        if ends[a] > duration {
            break;
        }
        let (first, second) = agents.split_at_mut(1);
        let (own, other) = if a == 0 {
            (&mut first[0], &second[0])
        } else {
            (&mut second[0], &first[0])
        };
        step_with(&mut kicker, own, other, &mut rngs[a]);
    }
    Ok((PairTimelines { agents, duration }, kicker.log))
}

/// Number of whole ticks of length `dt` in `duration`.
pub fn tick_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize
}

/// Samples both glides at `t_k = k dt` for `k < n_ticks`.
pub fn resample_events(
    timelines: &PairTimelines,
    arena: &ArenaSpec,
    n_ticks: usize,
) -> Result<Trajectory, AbcError> {
    let dt = arena.dt;
    let mut agents = Vec::with_capacity(2);
    for tl in &timelines.agents {
        let start = tl.first().map_or(0.0, |e| e.t);
        let end = tl.last().map_or(0.0, |e| e.end_time());
        let mut out = Vec::with_capacity(n_ticks);
        let mut idx = 0;
        for k in 0..n_ticks {
            let t = k as f64 * dt;
            if t < start || t > end {
                return Err(AbcError::OutOfSpan { t, start, end });
            }
            while idx + 1 < tl.len() && tl[idx + 1].t <= t {
                idx += 1;
            }
            out.push(tl[idx].position_at(t));
        }
        agents.push(out);
    }
    Ok(Trajectory::new(*arena, vec![Segment::new(0.0, agents)]))
}

/// Simulates `n_ticks` ticks and returns the uniformly sampled trajectory.
pub fn simulate_trajectory(
    n_ticks: usize,
    cfg: &AbcConfig,
    seed: u64,
) -> Result<(Trajectory, ContainmentLog), AbcError> {
    let duration = n_ticks as f64 * cfg.arena.dt;
    let (tl, log) = simulate_logged(duration, cfg, seed)?;
    Ok((resample_events(&tl, &cfg.arena, n_ticks)?, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn quiet() -> InteractionParams {
        InteractionParams {
            noise_sd: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn isolated_agent_at_center_does_not_turn() {
        let arena = ArenaSpec::default();
        let mut rng = StreamRng::seed_from_u64(1);
        let d = heading_change(&arena, Vec2::ZERO, 37.0, None, &quiet(), &mut rng);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn wall_turn_points_away_from_wall() {
        // brute-force scan of the wall kernel: heading near the wall with an
        // outward component always turns toward the tangent, never into the wall
        let p = quiet();
        for r_w in [0.5, 1.0, 3.0] {
            assert!(p.wall_turn(r_w, 0.0) > 0.0);
            for k in 1..90 {
                let th = k as f64;
                assert!(p.wall_turn(r_w, th) > 0.0, "theta {th}");
                let sym = InteractionParams { asymmetry: 0.0, ..p };
                assert!(sym.wall_turn(r_w, -th) < 0.0, "theta {}", -th);
            }
        }
        // at r_w = 1 cm with theta_w = 0 the turn is nonzero and counterclockwise
        let arena = ArenaSpec::default();
        let mut rng = StreamRng::seed_from_u64(1);
        let d = heading_change(&arena, Vec2::new(24.0, 0.0), 0.0, None, &p, &mut rng);
        assert!(d > 0.0);
    }

    #[test]
    fn mirror_symmetry_without_asymmetry() {
        let p = InteractionParams {
            asymmetry: 0.0,
            ..quiet()
        };
        let mut rng = StreamRng::seed_from_u64(5);
        for _ in 0..10_000 {
            let r_w = rng.random_range(0.0..25.0);
            let th = rng.random_range(-180.0..180.0);
            let d = rng.random_range(0.0..50.0);
            let psi = rng.random_range(-180.0..180.0);
            let phi = rng.random_range(-180.0..180.0);
            let a = p.wall_turn(r_w, th) + p.social_turn(d, psi, phi);
            let b = p.wall_turn(r_w, -th) + p.social_turn(d, -psi, -phi);
            assert!((a + b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn kick_geometry_examples() {
        let ev = KickEvent {
            t: 1.0,
            heading: 0.0,
            position: Vec2::ZERO,
            tau: 0.5,
            length: 7.0,
            dphi: 90.0,
        };
        let end = ev.end_position();
        assert_abs_diff_eq!(end.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.y, 7.0, epsilon = 1e-12);
        assert_eq!(ev.end_time(), 1.5);
        let straight = KickEvent { dphi: 0.0, ..ev };
        assert_abs_diff_eq!(straight.end_position().x, 7.0);
    }

    #[test]
    fn step_kick_appends_consistently() {
        let cfg = AbcConfig::default();
        let tl = simulate(5.0, &cfg, 3).unwrap();
        let mut own = tl.agents[0].clone();
        let other = tl.agents[1].clone();
        let mut rng = StreamRng::seed_from_u64(9);
        let before = *own.last().unwrap();
        let ev = step_kick(&mut own, &other, &cfg, &mut rng);
        assert_eq!(ev.t, before.end_time());
        assert_eq!(ev.position, before.end_position());
        assert_eq!(own.len(), tl.agents[0].len() + 1);
    }

    #[test]
    fn kick_counts_follow_renewal_rate() {
        let cfg = AbcConfig::default();
        let tl = simulate(60.0, &cfg, 11).unwrap();
        for a in &tl.agents {
            let n = a.len() as f64;
            assert!((84.0..=156.0).contains(&n), "{n} kicks");
        }
    }

    #[test]
    fn short_run_has_only_the_initial_kick() {
        let cfg = AbcConfig::default();
        let tl = simulate(0.1, &cfg, 1).unwrap();
        assert_eq!(tl.agents[0].len(), 1);
        assert_eq!(tl.agents[1].len(), 1);
        assert!(simulate(0.0, &cfg, 1).is_err());
    }

    #[test]
    fn timelines_are_consistent_and_contained() {
        let cfg = AbcConfig::default();
        let tl = simulate(600.0, &cfg, 21).unwrap();
        for a in &tl.agents {
            for w in a.windows(2) {
                assert_eq!(w[1].t, w[0].t + w[0].tau);
                assert!(w[1].t > w[0].t);
                assert!(((w[1].position - w[0].position).norm() - w[0].length).abs() < 1e-9);
                assert_eq!(w[1].position, w[0].end_position());
            }
            for e in a {
                assert!(e.tau > 0.0 && e.length > 0.0);
                assert!(e.position.norm() <= cfg.arena.radius);
                assert!(e.end_position().norm() <= cfg.arena.radius + 1e-9);
            }
            assert!(a.last().unwrap().end_time() >= tl.duration);
        }
        assert_eq!(tl, simulate(600.0, &cfg, 21).unwrap());
    }

    #[test]
    fn resampling_interpolates_glides() {
        let ev = KickEvent {
            t: 0.0,
            heading: 0.0,
            position: Vec2::ZERO,
            tau: 0.7,
            length: 7.0,
            dphi: 0.0,
        };
        assert_abs_diff_eq!(ev.position_at(0.35).x, 3.5, epsilon = 1e-12);
        let tl = PairTimelines {
            agents: [vec![ev, KickEvent { t: 0.7, position: ev.end_position(), ..ev }], vec![ev, KickEvent { t: 0.7, position: ev.end_position(), ..ev }]],
            duration: 1.2,
        };
        let arena = ArenaSpec::new(25.0, 3.5, 0.35).unwrap();
        let traj = resample_events(&tl, &arena, 4).unwrap();
        let p = &traj.segments[0].agents[0];
        assert_abs_diff_eq!(p[1].x, 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2].x, 7.0, epsilon = 1e-12);
        assert!(matches!(
            resample_events(&tl, &arena, 6),
            Err(AbcError::OutOfSpan { .. })
        ));
        // tick exactly at a kick time sits on the kick endpoint
        let arena = ArenaSpec::new(25.0, 3.5, 0.7).unwrap();
        let traj = resample_events(&tl, &arena, 2).unwrap();
        assert_abs_diff_eq!(traj.segments[0].agents[0][1].x, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn tick_count_of_long_run() {
        let dt = 0.12;
        assert_eq!(tick_count(500_000.0 * dt, dt), 500_000);
        assert_eq!(tick_count(16.0 * 3600.0 + 2400.0 + 0.01, dt), 500_000);
    }

    #[test]
    fn empirical_table_sampling() {
        let k = KickDistributions::from_table(vec![(7.0, 0.5, 1.0), (3.0, 0.2, 0.0)]).unwrap();
        let mut rng = StreamRng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(k.sample(&mut rng), (7.0, 0.5));
        }
        assert!(KickDistributions::from_table(vec![]).is_err());
        assert!(KickDistributions::from_table(vec![(-1.0, 0.5, 1.0)]).is_err());
    }

    #[test]
    fn parametric_means() {
        let k = KickDistributions::default();
        let mut rng = StreamRng::seed_from_u64(2);
        let n = 100_000;
        let (mut sl, mut st) = (0.0, 0.0);
        for _ in 0..n {
            let (l, t) = k.sample(&mut rng);
            assert!(l >= 1.0 && t >= 0.1);
            sl += l;
            st += t;
        }
        assert!((sl / n as f64 - 7.0).abs() < 0.1);
        assert!((st / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn params_file_round_trip() {
        let p = InteractionParams::default();
        let back = InteractionParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
        assert!(InteractionParams::from_toml_str("wall_range = -1.0").is_err());
        assert!(InteractionParams::from_toml_str("bogus = 1.0").is_err());
    }
}
