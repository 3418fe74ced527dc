//! Loading and cleaning of tracked trajectories.
//!
//! The cleaning pipeline runs in a fixed order: inactivity excision, leap
//! removal, gap filling, resampling, then a final check at the output rate.
//! Normalization and the train/validation/test split act on the cleaned
//! segments.
//!
//! Frame accounting is done in source-frame slots. For every run,
//! `input = output + removed_inactive + removed_leap + boundary_dropped + decimated`.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::exec::Exec;
use crate::geometry::{ArenaSpec, Vec2};
use crate::rng;
use crate::trajectory::{Segment, Trajectory};

/// Source frame rate of the reference recordings, Hz.
pub const SOURCE_FRAME_RATE: f64 = 25.0;
/// Inactivity threshold in body lengths per second.
pub const MIN_SPEED_BL: f64 = 1.0;
/// Largest plausible displacement between consecutive frames, in body lengths.
pub const MAX_LEAP_BL: f64 = 1.5;
/// Longest run of missing source frames that is interpolated rather than split.
pub const MAX_GAP_FRAMES: usize = 5;
/// Default train/validation/test fractions.
pub const SPLIT_FRACTIONS: [f64; 3] = [0.8, 0.15, 0.05];

/// One recorded run on a uniform frame grid; `None` marks a missing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub run_id: String,
    pub species: String,
    /// Seconds between grid frames.
    pub step: f64,
    /// Recorded time of each frame, `NaN` where no row exists.
    pub times: Vec<f64>,
    /// `positions[agent][frame]` in cm.
    pub positions: Vec<Vec<Option<Vec2>>>,
}

impl RawTrajectory {
    pub fn frame_rate(&self) -> f64 {
        1.0 / self.step
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn duration(&self) -> f64 {
        self.n_frames() as f64 * self.step
    }

    fn frame_time(&self, k: usize) -> f64 {
        if self.times[k].is_finite() {
            self.times[k]
        } else {
            let first = self.times.iter().position(|t| t.is_finite()).unwrap_or(0);
            self.times[first] + (k as f64 - first as f64) * self.step
        }
    }

    /// Splits at every frame where some agent has no sample.
    pub fn into_trajectory(self, arena: ArenaSpec) -> Trajectory {
        let n = self.n_frames();
        let complete: Vec<bool> = (0..n)
            .map(|k| self.positions.iter().all(|p| p[k].is_some()))
            .collect();
        let segments = runs(&complete)
            .into_iter()
            .map(|(from, to)| {
                let agents = self
                    .positions
                    .iter()
                    .map(|p| p[from..to].iter().map(|u| u.unwrap()).collect())
                    .collect();
                Segment::new(self.frame_time(from), agents)
            })
            .collect();
        Trajectory::new(arena, segments)
    }
}

/// Maximal `[from, to)` runs of `true`.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len()));
    }
    out
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    agent: usize,
    x: f64,
    y: f64,
}

/// Loads one run, inferring the frame step from the median time increment.
pub fn load(path: &Path) -> Result<RawTrajectory, IngestError> {
    load_with_step(path, None)
}

/// Loads one run with an optional known frame rate in Hz.
pub fn load_with_rate(path: &Path, rate: Option<f64>) -> Result<RawTrajectory, IngestError> {
    load_with_step(path, rate.map(|r| 1.0 / r))
}

pub fn load_with_step(path: &Path, step: Option<f64>) -> Result<RawTrajectory, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: u64, message: String| IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(IngestError::Empty(path.to_path_buf()));
    }
    for col in ["t", "agent", "x", "y"] {
        if !headers.iter().any(|h| h == col) {
            return Err(parse_err(1, format!("missing column `{col}`")));
        }
    }

    let mut rows: Vec<(u64, Row)> = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        if !row.t.is_finite() {
            return Err(parse_err(line, format!("non-finite time {}", row.t)));
        }
        if row.t < prev_t {
            return Err(IngestError::NonMonotonic {
                path: path.to_path_buf(),
                line,
                t: row.t,
                prev: prev_t,
            });
        }
        prev_t = row.t;
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(IngestError::Empty(path.to_path_buf()));
    }

    let t0 = rows[0].1.t;
    let step = match step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(IngestError::Config(format!("invalid frame step {s}"))),
        None => infer_step(rows.iter().map(|(_, r)| r.t)).unwrap_or(1.0 / SOURCE_FRAME_RATE),
    };
    let n_agents = rows.iter().map(|(_, r)| r.agent).max().unwrap() + 1;
    let last = ((rows.last().unwrap().1.t - t0) / step).round() as usize;
    let mut times = vec![f64::NAN; last + 1];
    let mut positions = vec![vec![None; last + 1]; n_agents];
    for (line, r) in rows {
        let k = ((r.t - t0) / step).round() as usize;
        if positions[r.agent][k].is_some() {
            return Err(parse_err(
                line,
                format!("duplicate sample for agent {} at t = {}", r.agent, r.t),
            ));
        }
        if times[k].is_nan() {
            times[k] = r.t;
        }
        let u = Vec2::new(r.x, r.y);
        positions[r.agent][k] = u.is_finite().then_some(u);
    }

    Ok(RawTrajectory {
        run_id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        species: "unknown".into(),
        step,
        times,
        positions,
    })
}

fn infer_step(times: impl Iterator<Item = f64>) -> Option<f64> {
    let mut prev: Option<f64> = None;
    let mut diffs = Vec::new();
    for t in times {
        if let Some(p) = prev {
            if t > p {
                diffs.push(t - p);
            }
        }
        prev = Some(t);
    }
    if diffs.is_empty() {
        return None;
    }
    diffs.sort_by(f64::total_cmp);
    Some(diffs[diffs.len() / 2])
}

/// Loads every `*.csv` in `dir`, sorted by file name.
pub fn load_dir(dir: &Path, step: Option<f64>) -> Result<Vec<RawTrajectory>, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(IngestError::Empty(dir.to_path_buf()));
    }
    let runs = paths
        .iter()
        .map(|p| load_with_step(p, step))
        .collect::<Result<Vec<_>, _>>()?;
    let rate = runs[0].frame_rate();
    for r in &runs[1..] {
        if (r.frame_rate() - rate).abs() > 1e-6 * rate {
            return Err(IngestError::FrameRateMismatch(rate, r.frame_rate()));
        }
    }
    Ok(runs)
}

/// Sample status in the cleaning table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Valid(Vec2),
    /// No usable sample; eligible for interpolation.
    Missing { leap: bool },
    /// Removed for inactivity; always a segment break.
    Excised,
}

impl Slot {
    fn position(self) -> Option<Vec2> {
        match self {
            Slot::Valid(u) => Some(u),
            _ => None,
        }
    }
}

/// Working table of one run during cleaning: `slots[agent][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTable {
    pub step: f64,
    pub times: Vec<f64>,
    pub slots: Vec<Vec<Slot>>,
    raw: Vec<Vec<Option<Vec2>>>,
}

impl FrameTable {
    pub fn from_raw(raw: &RawTrajectory) -> Self {
        let slots = raw
            .positions
            .iter()
            .map(|p| {
                p.iter()
                    .map(|u| u.map_or(Slot::Missing { leap: false }, Slot::Valid))
                    .collect()
            })
            .collect();
        let first = raw.times.iter().position(|t| t.is_finite()).unwrap_or(0);
        let t_first = raw.times.get(first).copied().unwrap_or(0.0);
        let times = (0..raw.n_frames())
            .map(|k| {
                if raw.times[k].is_finite() {
                    raw.times[k]
                } else {
                    t_first + (k as f64 - first as f64) * raw.step
                }
            })
            .collect();
        Self {
            step: raw.step,
            times,
            slots,
            raw: raw.positions.clone(),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    fn frame_complete(&self, k: usize) -> bool {
        self.slots.iter().all(|s| matches!(s[k], Slot::Valid(_)))
    }

    /// Maximal runs of frames where every agent is valid.
    pub fn segments(&self) -> Vec<Segment> {
        let mask: Vec<bool> = (0..self.n_frames()).map(|k| self.frame_complete(k)).collect();
        runs(&mask)
            .into_iter()
            .map(|(from, to)| {
                let agents = self
                    .slots
                    .iter()
                    .map(|s| s[from..to].iter().map(|x| x.position().unwrap()).collect())
                    .collect();
                Segment::new(self.times[from], agents)
            })
            .collect()
    }
}

/// Excises every frame at which some agent swims slower than `MIN_SPEED_BL`
/// body lengths per second. Returns the number of frames excised.
pub fn remove_inactive(table: &mut FrameTable, body_length: f64) -> usize {
    let threshold = MIN_SPEED_BL * body_length;
    let mut removed = 0;
    for k in 1..table.n_frames() {
        let inactive = table.raw.iter().any(|p| match (p[k - 1], p[k]) {
            (Some(a), Some(b)) => (b - a).norm() / table.step < threshold,
            _ => false,
        });
        if inactive {
            for s in table.slots.iter_mut() {
                s[k] = Slot::Excised;
            }
            removed += 1;
        }
    }
    removed
}

/// Marks samples that jump more than `MAX_LEAP_BL` body lengths per elapsed
/// frame away from the last accepted sample as missing. Returns the number of
/// frames with at least one such sample.
pub fn remove_leaps(table: &mut FrameTable, body_length: f64) -> usize {
    let limit = MAX_LEAP_BL * body_length;
    let n = table.n_frames();
    let mut flagged = vec![false; n];
    for (raw, slots) in table.raw.iter().zip(table.slots.iter_mut()) {
        let mut last: Option<(usize, Vec2)> = None;
        for k in 0..n {
            let Some(u) = raw[k] else { continue };
            let ok = last.is_none_or(|(j, p)| (u - p).norm() <= limit * (k - j) as f64);
            if ok {
                last = Some((k, u));
            } else if slots[k] != Slot::Excised {
                slots[k] = Slot::Missing { leap: true };
                flagged[k] = true;
            }
        }
    }
    flagged.iter().filter(|&&f| f).count()
}

/// Linearly interpolates interior runs of missing samples no longer than
/// `max_gap` frames. Longer runs are left missing and later split the
/// segment. Returns the number of samples filled.
pub fn fill_gaps(table: &mut FrameTable, max_gap: usize) -> usize {
    let mut filled = 0;
    for slots in table.slots.iter_mut() {
        let n = slots.len();
        let mut k = 0;
        while k < n {
            if !matches!(slots[k], Slot::Missing { .. }) {
                k += 1;
                continue;
            }
            let start = k;
            while k < n && matches!(slots[k], Slot::Missing { .. }) {
                k += 1;
            }
            let len = k - start;
            let before = start.checked_sub(1).and_then(|j| slots[j].position());
            let after = slots.get(k).and_then(|s| s.position());
            if let (Some(a), Some(b)) = (before, after) {
                if len <= max_gap {
                    for (i, slot) in slots[start..k].iter_mut().enumerate() {
                        let t = (i + 1) as f64 / (len + 1) as f64;
                        *slot = Slot::Valid(a.lerp(b, t));
                    }
                    filled += len;
                }
            }
        }
    }
    filled
}

/// Keeps every `target / source` frame of each segment, starting at frame 0.
pub fn resample(
    segments: &[Segment],
    source_step: f64,
    target_step: f64,
) -> Result<Vec<Segment>, IngestError> {
    let ratio = resample_ratio(source_step, target_step)?;
    Ok(segments
        .iter()
        .map(|s| Segment {
            start_time: s.start_time,
            agents: s
                .agents
                .iter()
                .map(|p| p.iter().step_by(ratio).copied().collect())
                .collect(),
        })
        .collect())
}

pub fn resample_ratio(source_step: f64, target_step: f64) -> Result<usize, IngestError> {
    let bad = || IngestError::ResampleRatio {
        target: target_step,
        source_step,
    };
    if !(source_step > 0.0 && target_step > 0.0) {
        return Err(bad());
    }
    let r = target_step / source_step;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 {
        return Err(bad());
    }
    Ok(n as usize)
}

/// Frame fates for one or more runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_frames: usize,
    pub output_frames: usize,
    pub removed_inactive: usize,
    pub removed_leap: usize,
    pub boundary_dropped: usize,
    pub decimated: usize,
    /// Samples interpolated (informational; they are part of the output).
    pub gap_filled: usize,
}

impl Provenance {
    pub fn balanced(&self) -> bool {
        self.input_frames
            == self.output_frames
                + self.removed_inactive
                + self.removed_leap
                + self.boundary_dropped
                + self.decimated
    }

    pub fn merge(&mut self, o: &Provenance) {
        self.input_frames += o.input_frames;
        self.output_frames += o.output_frames;
        self.removed_inactive += o.removed_inactive;
        self.removed_leap += o.removed_leap;
        self.boundary_dropped += o.boundary_dropped;
        self.decimated += o.decimated;
        self.gap_filled += o.gap_filled;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    pub arena: ArenaSpec,
    pub max_gap: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            arena: ArenaSpec::default(),
            max_gap: MAX_GAP_FRAMES,
        }
    }
}

/// Cleaned runs with their accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    pub arena: ArenaSpec,
    pub segments: Vec<Segment>,
    pub provenance: Provenance,
}

impl CleanDataset {
    pub fn into_trajectory(self) -> Trajectory {
        Trajectory::new(self.arena, self.segments)
    }
}

/// Full cleaning pipeline for one run.
pub fn clean_run(raw: &RawTrajectory, cfg: &CleanConfig) -> Result<CleanDataset, IngestError> {
    let bl = cfg.arena.body_length;
    resample_ratio(raw.step, cfg.arena.dt)?;
    let mut table = FrameTable::from_raw(raw);
    let mut prov = Provenance {
        input_frames: table.n_frames(),
        ..Default::default()
    };

    let inactive = remove_inactive(&mut table, bl);
    remove_leaps(&mut table, bl);
    prov.gap_filled = fill_gaps(&mut table, cfg.max_gap);

    // Attribute every frame that did not survive to exactly one cause.
    for k in 0..table.n_frames() {
        let col = table.slots.iter().map(|s| s[k]);
        if table.slots.iter().any(|s| s[k] == Slot::Excised) {
            continue;
        }
        if col.clone().any(|s| s == Slot::Missing { leap: true }) {
            prov.removed_leap += 1;
        } else if col.clone().any(|s| matches!(s, Slot::Missing { .. })) {
            prov.boundary_dropped += 1;
        }
    }
    prov.removed_inactive = inactive;

    let mut segments = Vec::new();
    for seg in table.segments() {
        let kept = resample(std::slice::from_ref(&seg), raw.step, cfg.arena.dt)?
            .pop()
            .unwrap();
        prov.decimated += seg.len() - kept.len();
        segments.extend(verify_output(kept, &cfg.arena, &mut prov));
    }
    prov.output_frames = segments.iter().map(Segment::len).sum();
    debug_assert!(prov.balanced(), "{prov:?}");
    Ok(CleanDataset {
        arena: cfg.arena,
        segments,
        provenance: prov,
    })
}

/// Splits a resampled segment wherever the output-rate speed or displacement
/// leaves the admissible band, and drops pieces shorter than two frames.
fn verify_output(seg: Segment, arena: &ArenaSpec, prov: &mut Provenance) -> Vec<Segment> {
    let bl = arena.body_length;
    let n = seg.len();
    let mut keep = vec![true; n];
    for k in 1..n {
        let mut leap = false;
        let mut slow = false;
        for p in &seg.agents {
            let disp = (p[k] - p[k - 1]).norm();
            leap |= disp > MAX_LEAP_BL * bl;
            slow |= disp / arena.dt < MIN_SPEED_BL * bl;
        }
        if leap {
            prov.removed_leap += 1;
            keep[k] = false;
        } else if slow {
            prov.removed_inactive += 1;
            keep[k] = false;
        }
    }
    let mut out = Vec::new();
    for (from, to) in runs(&keep) {
        if to - from < 2 {
            prov.boundary_dropped += to - from;
        } else {
            out.push(seg.slice(from, to, arena.dt));
        }
    }
    out
}

/// Cleans every run; runs are independent and may be processed in parallel.
pub fn clean_runs(
    raws: &[RawTrajectory],
    cfg: &CleanConfig,
    exec: Exec,
) -> Result<CleanDataset, IngestError> {
    let cleaned = exec.map(raws, |r| clean_run(r, cfg));
    let mut out = CleanDataset {
        arena: cfg.arena,
        segments: Vec::new(),
        provenance: Provenance::default(),
    };
    for c in cleaned {
        let c = c?;
        out.segments.extend(c.segments);
        out.provenance.merge(&c.provenance);
    }
    Ok(out)
}

/// Positions mapped to the unit disk by dividing by the tank radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub scale: f64,
    pub segments: Vec<Segment>,
}

impl NormalizedDataset {
    pub fn denormalize(&self) -> Vec<Segment> {
        map_positions(&self.segments, |u| u * self.scale)
    }
}

fn map_positions(segments: &[Segment], f: impl Fn(Vec2) -> Vec2) -> Vec<Segment> {
    segments
        .iter()
        .map(|s| Segment {
            start_time: s.start_time,
            agents: s.agents.iter().map(|p| p.iter().map(|&u| f(u)).collect()).collect(),
        })
        .collect()
}

pub fn normalize(segments: &[Segment], radius: f64) -> Result<NormalizedDataset, IngestError> {
    let mut offending = Vec::new();
    for (si, s) in segments.iter().enumerate() {
        for p in &s.agents {
            for (k, u) in p.iter().enumerate() {
                if u.norm() > radius {
                    offending.push((si, k, u.norm()));
                }
            }
        }
    }
    if let Some(&(segment, frame, norm)) = offending.first() {
        return Err(IngestError::OutOfArena {
            count: offending.len(),
            segment,
            frame,
            norm,
        });
    }
    Ok(NormalizedDataset {
        scale: radius,
        segments: map_positions(segments, |u| u / radius),
    })
}

/// Train / validation / test partition by whole segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<Segment>,
    pub validation: Vec<Segment>,
    pub test: Vec<Segment>,
}

/// Assigns whole segments to the three sets after a seeded shuffle. A segment
/// lands in the set whose cumulative frame-fraction interval contains the
/// segment's midpoint.
pub fn split(segments: Vec<Segment>, fractions: [f64; 3], seed: u64) -> Result<Split, IngestError> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(IngestError::BadFractions(fractions));
    }
    let n_segments = segments.len();
    let mut order: Vec<usize> = (0..n_segments).collect();
    order.shuffle(&mut rng::stream(seed, "ingest.split", 0));
    let total: usize = segments.iter().map(Segment::len).sum();
    let bounds = [fractions[0], fractions[0] + fractions[1]];

    let mut slots: Vec<Option<Segment>> = segments.into_iter().map(Some).collect();
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    let mut acc = 0usize;
    for i in order {
        let seg = slots[i].take().unwrap();
        let mid = (acc as f64 + seg.len() as f64 / 2.0) / total.max(1) as f64;
        acc += seg.len();
        if mid < bounds[0] {
            out.train.push(seg);
        } else if mid < bounds[1] {
            out.validation.push(seg);
        } else {
            out.test.push(seg);
        }
    }
    for (set, name, f) in [
        (&out.train, "train", fractions[0]),
        (&out.validation, "validation", fractions[1]),
        (&out.test, "test", fractions[2]),
    ] {
        if f > 0.0 && set.is_empty() {
            return Err(IngestError::TooSmall {
                segments: n_segments,
                set: name,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    const STEP: f64 = 0.04;
    const BL: f64 = 3.5;

    /// Two agents on parallel lines at `speed` cm/s.
    fn raw_lines(n: usize, speed: f64) -> RawTrajectory {
        let p = |y: f64| {
            (0..n)
                .map(|k| Some(Vec2::new(-20.0 + k as f64 * STEP * speed, y)))
                .collect::<Vec<_>>()
        };
        RawTrajectory {
            run_id: "r".into(),
            species: "test".into(),
            step: STEP,
            times: (0..n).map(|k| k as f64 * STEP).collect(),
            positions: vec![p(0.0), p(2.0)],
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_ten_seconds() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("t,agent,x,y\n");
        for k in 0..250 {
            for a in 0..2 {
                body.push_str(&format!("{},{},{},{}\n", k as f64 * 0.04, a, a as f64, 0.1 * k as f64));
            }
        }
        let raw = load(&write(dir.path(), "run.csv", &body)).unwrap();
        assert_eq!(raw.n_agents(), 2);
        assert_eq!(raw.n_frames(), 250);
        assert!((raw.frame_rate() - 25.0).abs() < 1e-9);
        assert!((raw.duration() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let no_agent = write(dir.path(), "a.csv", "t,x,y\n0,1,2\n");
        assert!(matches!(load(&no_agent), Err(IngestError::Parse { line: 1, .. })));
        let empty = write(dir.path(), "b.csv", "");
        assert!(matches!(load(&empty), Err(IngestError::Empty(_))));
        let header_only = write(dir.path(), "c.csv", "t,agent,x,y\n");
        assert!(matches!(load(&header_only), Err(IngestError::Empty(_))));
        let bad = write(dir.path(), "d.csv", "t,agent,x,y\n0,0,1,1\n0.04,0,oops,1\n");
        match load(&bad) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let backwards = write(dir.path(), "e.csv", "t,agent,x,y\n0.08,0,1,1\n0.04,0,1,1\n");
        assert!(matches!(load(&backwards), Err(IngestError::NonMonotonic { line: 3, .. })));
    }

    #[test]
    fn inactive_examples() {
        let raw = raw_lines(300, 2.0 * BL);
        let mut t = FrameTable::from_raw(&raw);
        assert_eq!(remove_inactive(&mut t, BL), 0);
        assert_eq!(t.segments().len(), 1);

        // agent 0 holds still from frame 99 on, so frames 100..=200 have zero speed
        let mut raw = raw_lines(300, 2.0 * BL);
        let hold = raw.positions[0][99];
        for k in 100..=200 {
            raw.positions[0][k] = hold;
        }
        // resume with the same per-frame displacement it had before
        for k in 201..300 {
            raw.positions[0][k] = Some(hold.unwrap() + Vec2::new((k - 200) as f64 * STEP * 2.0 * BL, 0.0));
        }
        let mut t = FrameTable::from_raw(&raw);
        assert_eq!(remove_inactive(&mut t, BL), 101);
        let segs = t.segments();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].len(), 100);
        assert_eq!(segs[1].len(), 99);

        let raw = raw_lines(50, 0.5 * BL);
        let mut t = FrameTable::from_raw(&raw);
        remove_inactive(&mut t, BL);
        assert!(t.segments().iter().all(|s| s.len() <= 1));
    }

    #[test]
    fn leap_threshold() {
        for (jump, removed) in [(5.26, 1), (5.24, 0)] {
            let mut raw = raw_lines(10, 0.5 / STEP);
            for k in 5..10 {
                let u = raw.positions[0][k].unwrap();
                raw.positions[0][k] = Some(u + Vec2::new(jump - 0.5, 0.0));
            }
            let mut t = FrameTable::from_raw(&raw);
            assert_eq!(remove_leaps(&mut t, BL), removed, "jump {jump}");
        }
        let raw = raw_lines(30, 0.5 / STEP);
        let mut t = FrameTable::from_raw(&raw);
        assert_eq!(remove_leaps(&mut t, BL), 0);
    }

    #[test]
    fn gap_fill_examples() {
        let mut raw = raw_lines(3, 1.0);
        raw.positions[0] = vec![Some(Vec2::new(0.0, 0.0)), None, Some(Vec2::new(2.0, 0.0))];
        let mut t = FrameTable::from_raw(&raw);
        assert_eq!(fill_gaps(&mut t, 5), 1);
        assert_eq!(t.slots[0][1], Slot::Valid(Vec2::new(1.0, 0.0)));

        let mut raw = raw_lines(8, 10.0);
        for k in 2..5 {
            raw.positions[0][k] = None;
        }
        let mut t = FrameTable::from_raw(&raw);
        assert_eq!(fill_gaps(&mut t, 2), 0);
        assert_eq!(t.segments().len(), 2);

        let raw = raw_lines(8, 10.0);
        let mut t = FrameTable::from_raw(&raw);
        let before = t.clone();
        assert_eq!(fill_gaps(&mut t, 5), 0);
        assert_eq!(t, before);
    }

    #[test]
    fn resample_examples() {
        let seg = |n: usize| Segment::new(0.0, vec![(0..n).map(|k| Vec2::new(k as f64, 0.0)).collect()]);
        let out = resample(&[seg(9)], 0.04, 0.12).unwrap();
        assert_eq!(out[0].len(), 3);
        assert_eq!(out[0].agents[0][1], Vec2::new(3.0, 0.0));
        assert_eq!(resample(&[seg(1)], 0.04, 0.12).unwrap()[0].len(), 1);
        assert!(matches!(
            resample(&[seg(9)], 0.04, 0.10),
            Err(IngestError::ResampleRatio { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let s = Segment::new(
            0.0,
            vec![vec![Vec2::new(25.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(-12.5, 12.5)]],
        );
        let n = normalize(std::slice::from_ref(&s), 25.0).unwrap();
        assert_eq!(
            n.segments[0].agents[0],
            vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(-0.5, 0.5)]
        );
        let back = n.denormalize();
        for (a, b) in back[0].agents[0].iter().zip(&s.agents[0]) {
            assert!((*a - *b).norm() < 1e-9);
        }
        let out = Segment::new(0.0, vec![vec![Vec2::new(26.0, 0.0)]]);
        assert!(matches!(
            normalize(&[out], 25.0),
            Err(IngestError::OutOfArena { count: 1, .. })
        ));
    }

    fn equal_segments(n: usize) -> Vec<Segment> {
        (0..n)
            .map(|i| Segment::new(i as f64 * 100.0, vec![vec![Vec2::ZERO; 10]]))
            .collect()
    }

    #[test]
    fn split_examples() {
        let s = split(equal_segments(100), SPLIT_FRACTIONS, 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 15, 5));
        let s = split(equal_segments(10), [1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(s.train.len(), 10);
        assert!(matches!(
            split(equal_segments(10), [0.5, 0.5, 0.5], 3),
            Err(IngestError::BadFractions(_))
        ));
        assert!(matches!(
            split(equal_segments(2), SPLIT_FRACTIONS, 3),
            Err(IngestError::TooSmall { .. })
        ));
        let a = split(equal_segments(40), SPLIT_FRACTIONS, 9).unwrap();
        let b = split(equal_segments(40), SPLIT_FRACTIONS, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_output_respects_thresholds() {
        // noisy circular swimming with a frozen stretch, dropouts and a tracking glitch
        let n = 3000;
        let mut positions = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
        for k in 0..n {
            let t = k as f64 * STEP;
            for (a, p) in positions.iter_mut().enumerate() {
                let w = 0.5 + 0.1 * a as f64;
                let r = 18.0 + 2.0 * (0.3 * t).sin();
                p.push(Some(Vec2::new(r * (w * t).cos(), r * (w * t).sin())));
            }
        }
        for k in 500..650 {
            positions[1][k] = positions[1][499];
        }
        for k in [900, 901, 1500, 1501, 1502, 1503, 1504, 1505, 1506, 1507] {
            positions[0][k] = None;
        }
        positions[0][2000] = Some(Vec2::new(0.0, 0.0));
        for k in 2001..2006 {
            positions[0][k] = None;
        }
        let raw = RawTrajectory {
            run_id: "synthetic".into(),
            species: "test".into(),
            step: STEP,
            times: (0..n).map(|k| k as f64 * STEP).collect(),
            positions,
        };
        let out = clean_run(&raw, &CleanConfig::default()).unwrap();
        assert!(out.provenance.balanced(), "{:?}", out.provenance);
        assert!(out.provenance.removed_inactive > 0);
        assert!(out.provenance.removed_leap > 0);
        assert!(out.provenance.gap_filled >= 2);
        let arena = ArenaSpec::default();
        for s in &out.segments {
            assert!(s.len() >= 2);
            for p in &s.agents {
                for k in 1..s.len() {
                    let d = (p[k] - p[k - 1]).norm();
                    assert!(d <= MAX_LEAP_BL * arena.body_length);
                    assert!(d / arena.dt >= MIN_SPEED_BL * arena.body_length);
                }
            }
        }
        let again = clean_run(&raw, &CleanConfig::default()).unwrap();
        assert_eq!(out, again);
    }
}
