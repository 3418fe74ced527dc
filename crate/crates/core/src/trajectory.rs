//! Uniformly sampled multi-agent trajectories and the shared CSV schema.
//!
//! Every producer in the crate (ingest, the kick-event simulator and the
//! network rollouts) writes the same `t,agent,x,y` layout so that one
//! validation path serves all of them. Segment breaks are encoded as gaps in
//! `t`.

use std::io::Write;
use std::path::Path;

use crate::error::IngestError;
use crate::geometry::{AgentState, ArenaSpec, SystemState, Vec2};

/// Contiguous, gap-free stretch of frames shared by all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Time of frame 0 in s.
    pub start_time: f64,
    /// `agents[a][k]` is the position of agent `a` at frame `k`, in cm.
    pub agents: Vec<Vec<Vec2>>,
}

impl Segment {
    pub fn new(start_time: f64, agents: Vec<Vec<Vec2>>) -> Self {
        debug_assert!(agents.windows(2).all(|w| w[0].len() == w[1].len()));
        Self { start_time, agents }
    }

    pub fn len(&self) -> usize {
        self.agents.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn time(&self, frame: usize, dt: f64) -> f64 {
        self.start_time + frame as f64 * dt
    }

    /// Backward-difference velocity; frame 0 has none.
    pub fn velocity(&self, agent: usize, frame: usize, dt: f64) -> Option<Vec2> {
        if frame == 0 || frame >= self.len() {
            return None;
        }
        let p = &self.agents[agent];
        Some((p[frame] - p[frame - 1]) / dt)
    }

    /// Agent state at `frame` (needs `frame >= 1`).
    pub fn agent_state(&self, arena: &ArenaSpec, agent: usize, frame: usize) -> Option<AgentState> {
        let v = self.velocity(agent, frame, arena.dt)?;
        Some(AgentState::new(arena, self.agents[agent][frame], v))
    }

    pub fn system_state(
        &self,
        arena: &ArenaSpec,
        focal: usize,
        neighbor: usize,
        frame: usize,
    ) -> Option<SystemState> {
        Some(SystemState::new(
            self.agent_state(arena, focal, frame)?,
            self.agent_state(arena, neighbor, frame)?,
        ))
    }

    /// Frames `[from, to)` as a new segment.
    pub fn slice(&self, from: usize, to: usize, dt: f64) -> Segment {
        Segment {
            start_time: self.time(from, dt),
            agents: self.agents.iter().map(|p| p[from..to].to_vec()).collect(),
        }
    }
}

/// A set of segments sampled at `arena.dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub arena: ArenaSpec,
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn new(arena: ArenaSpec, segments: Vec<Segment>) -> Self {
        Self { arena, segments }
    }

    pub fn dt(&self) -> f64 {
        self.arena.dt
    }

    pub fn n_agents(&self) -> usize {
        self.segments.first().map_or(0, Segment::n_agents)
    }

    pub fn total_frames(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    /// Cuts every segment into pieces of at most `max_frames` frames.
    pub fn chunked(&self, max_frames: usize) -> Trajectory {
        assert!(max_frames > 0);
        let dt = self.dt();
        let segments = self
            .segments
            .iter()
            .flat_map(|s| {
                (0..s.len())
                    .step_by(max_frames)
                    .map(move |from| s.slice(from, (from + max_frames).min(s.len()), dt))
            })
            .collect();
        Trajectory::new(self.arena, segments)
    }

    /// Writes the `t,agent,x,y` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "t,agent,x,y")?;
        let dt = self.dt();
        for seg in &self.segments {
            for k in 0..seg.len() {
                let t = seg.time(k, dt);
                for (a, p) in seg.agents.iter().enumerate() {
                    writeln!(w, "{},{},{},{}", t, a, p[k].x, p[k].y)?;
                }
            }
        }
        w.flush()
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), IngestError> {
        let file = std::fs::File::create(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a trajectory CSV; frames missing for any agent break segments.
    pub fn read_csv_file(path: &Path, arena: ArenaSpec) -> Result<Trajectory, IngestError> {
        let raw = crate::ingest::load_with_rate(path, Some(1.0 / arena.dt))?;
        Ok(raw.into_trajectory(arena))
    }

    pub fn all_positions_finite(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.agents.iter().all(|p| p.iter().all(|u| u.is_finite())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dt: f64, speed: f64) -> Segment {
        let a = (0..n).map(|k| Vec2::new(k as f64 * dt * speed, 0.0)).collect();
        let b = (0..n).map(|k| Vec2::new(k as f64 * dt * speed, 1.0)).collect();
        Segment::new(0.0, vec![a, b])
    }

    #[test]
    fn backward_velocity() {
        let s = line(4, 0.12, 10.0);
        assert!(s.velocity(0, 0, 0.12).is_none());
        let v = s.velocity(0, 2, 0.12).unwrap();
        assert!((v.x - 10.0).abs() < 1e-12 && v.y == 0.0);
    }

    #[test]
    fn chunking_preserves_frames() {
        let t = Trajectory::new(ArenaSpec::default(), vec![line(25, 0.12, 1.0)]);
        let c = t.chunked(10);
        assert_eq!(c.segments.len(), 3);
        assert_eq!(c.total_frames(), 25);
        assert!((c.segments[1].start_time - 1.2).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_keeps_segments() {
        let arena = ArenaSpec::default();
        let mut s2 = line(5, 0.12, 3.0);
        s2.start_time = 12.0;
        let t = Trajectory::new(arena, vec![line(6, 0.12, 3.0), s2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv_file(&path).unwrap();
        let back = Trajectory::read_csv_file(&path, arena).unwrap();
        assert_eq!(back.segments.len(), 2);
        assert_eq!(back.segments[0].len(), 6);
        assert_eq!(back.segments[1].len(), 5);
        for (a, b) in t.segments.iter().zip(&back.segments) {
            assert_eq!(a.agents, b.agents);
        }
    }
}
