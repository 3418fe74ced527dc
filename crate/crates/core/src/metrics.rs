//! Observable battery: instantaneous PDFs with leader/follower splits,
//! temporal correlation functions, summary statistics, and comparisons.
//!
//! Velocities are backward differences, so frame 0 of every segment carries
//! no sample. Everything is accumulated per segment and merged in segment
//! order.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::exec::Exec;
use crate::geometry::{geometric_leader, wrap_deg, ArenaSpec, PairIndex, Vec2};
use crate::trajectory::{Segment, Trajectory};

/// Uniform-bin histogram. Values outside `[lo, hi]` are counted in
/// `outside` and excluded from the density.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<f64>,
    pub outside: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, MetricsError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo && bins > 0) {
            return Err(MetricsError::BadRange { lo, hi, bins });
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0.0; bins],
            outside: 0,
        })
    }

    fn from_bins(b: &Bins) -> Self {
        Self::new(b.lo, b.hi, b.bins).expect("validated bins")
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn add(&mut self, x: f64) {
        if !(x >= self.lo && x <= self.hi) {
            self.outside += 1;
            return;
        }
        let k = (((x - self.lo) / self.width()) as usize).min(self.bins() - 1);
        self.counts[k] += 1.0;
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn density(&self) -> Vec<f64> {
        let n = self.total();
        let w = self.width();
        self.counts
            .iter()
            .map(|c| if n > 0.0 { c / (n * w) } else { 0.0 })
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    pub fn same_edges(&self, other: &Histogram) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.bins() == other.bins()
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), MetricsError> {
        if !self.same_edges(other) {
            return Err(MetricsError::EdgeMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(())
    }
}

/// Total-variation distance between the two densities, in `[0, 1]`.
pub fn compare(a: &Histogram, b: &Histogram) -> Result<f64, MetricsError> {
    if !a.same_edges(b) {
        return Err(MetricsError::EdgeMismatch);
    }
    let w = a.width();
    let tv: f64 = a
        .density()
        .iter()
        .zip(b.density())
        .map(|(p, q)| (p - q).abs() * w)
        .sum();
    Ok((0.5 * tv).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub speed: Bins,
    pub wall_distance: Bins,
    pub angle: Bins,
    pub distance: Bins,
    /// Largest correlation lag, s.
    pub max_lag: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            speed: Bins { lo: 0.0, hi: 35.0, bins: 70 },
            wall_distance: Bins { lo: 0.0, hi: 25.0, bins: 50 },
            angle: Bins { lo: -180.0, hi: 180.0, bins: 72 },
            distance: Bins { lo: 0.0, hi: 50.0, bins: 100 },
            max_lag: 25.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for b in [self.speed, self.wall_distance, self.angle, self.distance] {
            Histogram::new(b.lo, b.hi, b.bins)?;
        }
        if !(self.max_lag >= 0.0 && self.max_lag.is_finite()) {
            return Err(MetricsError::BadRange {
                lo: 0.0,
                hi: self.max_lag,
                bins: 0,
            });
        }
        Ok(())
    }

    pub fn max_lag_frames(&self, dt: f64) -> usize {
        (self.max_lag / dt + 1e-9).floor() as usize
    }
}

/// Mean and standard deviation from running sums.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn add(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n > 0.0 {
            self.sum / self.n
        } else {
            f64::NAN
        }
    }

    pub fn second_moment(&self) -> f64 {
        if self.n > 0.0 {
            self.sum_sq / self.n
        } else {
            f64::NAN
        }
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0).sqrt()
    }
}

/// Histogram plus moments, overall and split by role.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub all: Histogram,
    pub leader: Option<Histogram>,
    pub follower: Option<Histogram>,
    pub moments: [Moments; 3],
}

impl Observable {
    fn new(b: &Bins, roles: bool) -> Self {
        let h = Histogram::from_bins(b);
        Self {
            leader: roles.then(|| h.clone()),
            follower: roles.then(|| h.clone()),
            all: h,
            moments: [Moments::default(); 3],
        }
    }

    fn add(&mut self, x: f64, leader: Option<bool>) {
        self.all.add(x);
        self.moments[0].add(x);
        match leader {
            Some(true) => {
                if let Some(h) = self.leader.as_mut() {
                    h.add(x);
                }
                self.moments[1].add(x);
            }
            Some(false) => {
                if let Some(h) = self.follower.as_mut() {
                    h.add(x);
                }
                self.moments[2].add(x);
            }
            None => {}
        }
    }

    fn merge(&mut self, o: &Observable) {
        self.all.merge(&o.all).expect("same config");
        if let (Some(a), Some(b)) = (self.leader.as_mut(), o.leader.as_ref()) {
            a.merge(b).expect("same config");
        }
        if let (Some(a), Some(b)) = (self.follower.as_mut(), o.follower.as_ref()) {
            a.merge(b).expect("same config");
        }
        for (a, b) in self.moments.iter_mut().zip(&o.moments) {
            a.merge(b);
        }
    }

    pub fn has_roles(&self) -> bool {
        self.leader.is_some()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.all.density();
        match (&self.leader, &self.follower) {
            (Some(l), Some(f)) => {
                w.write_record(["bin_center", "density", "density_leader", "density_follower"])?;
                let (dl, df) = (l.density(), f.density());
                for (k, c) in self.all.centers().iter().enumerate() {
                    w.write_record([c, &d[k], &dl[k], &df[k]].map(|x| x.to_string()))?;
                }
            }
            _ => {
                w.write_record(["bin_center", "density"])?;
                for (c, v) in self.all.centers().iter().zip(&d) {
                    w.write_record([c.to_string(), v.to_string()])?;
                }
            }
        }
        w.flush()
    }
}

/// Names of the six instantaneous observables, in report order.
pub const PDF_NAMES: [&str; 6] = [
    "speed",
    "wall_distance",
    "incidence",
    "distance",
    "relative_heading",
    "viewing_angle",
];

/// The six instantaneous observables. The collective ones are `None` for
/// trajectories that are not pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantPdfs {
    pub speed: Observable,
    pub wall_distance: Observable,
    pub incidence: Observable,
    pub distance: Option<Observable>,
    pub relative_heading: Option<Observable>,
    pub viewing_angle: Option<Observable>,
    /// Frames contributing per agent.
    pub frames: usize,
}

impl InstantPdfs {
    fn empty(cfg: &MetricsConfig, pair: bool) -> Self {
        Self {
            speed: Observable::new(&cfg.speed, pair),
            wall_distance: Observable::new(&cfg.wall_distance, pair),
            incidence: Observable::new(&cfg.angle, pair),
            distance: pair.then(|| Observable::new(&cfg.distance, false)),
            relative_heading: pair.then(|| Observable::new(&cfg.angle, false)),
            viewing_angle: pair.then(|| Observable::new(&cfg.angle, true)),
            frames: 0,
        }
    }

    fn merge(&mut self, o: &InstantPdfs) {
        self.speed.merge(&o.speed);
        self.wall_distance.merge(&o.wall_distance);
        self.incidence.merge(&o.incidence);
        for (a, b) in [
            (&mut self.distance, &o.distance),
            (&mut self.relative_heading, &o.relative_heading),
            (&mut self.viewing_angle, &o.viewing_angle),
        ] {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.merge(b);
            }
        }
        self.frames += o.frames;
    }

    pub fn get(&self, name: &str) -> Option<&Observable> {
        match name {
            "speed" => Some(&self.speed),
            "wall_distance" => Some(&self.wall_distance),
            "incidence" => Some(&self.incidence),
            "distance" => self.distance.as_ref(),
            "relative_heading" => self.relative_heading.as_ref(),
            "viewing_angle" => self.viewing_angle.as_ref(),
            _ => None,
        }
    }
}

fn angle_deg(v: Vec2) -> Option<f64> {
    (v.norm_sq() > 0.0).then(|| v.angle().to_degrees())
}

fn segment_pdfs(seg: &Segment, arena: &ArenaSpec, cfg: &MetricsConfig, pair: bool) -> InstantPdfs {
    let mut p = InstantPdfs::empty(cfg, pair);
    let dt = arena.dt;
    let n_agents = seg.n_agents();
    for k in 1..seg.len() {
        p.frames += 1;
        let pos: Vec<Vec2> = (0..n_agents).map(|a| seg.agents[a][k]).collect();
        let vel: Vec<Vec2> = (0..n_agents).map(|a| seg.velocity(a, k, dt).unwrap()).collect();
        let heads: Vec<Option<f64>> = vel.iter().map(|v| angle_deg(*v)).collect();

        let mut leader_of = vec![None; n_agents];
        if pair {
            let d = (pos[1] - pos[0]).norm();
            let psi = |i: usize, j: usize| -> Option<f64> {
                let h = heads[i]?;
                let bearing = angle_deg(pos[j] - pos[i])?;
                Some(wrap_deg(bearing - h))
            };
            let (pij, pji) = (psi(0, 1), psi(1, 0));
            // ties and undefined bearings resolve to the first agent
            let leader = match (pij, pji) {
                (Some(a), Some(b)) => geometric_leader(a, b),
                _ => PairIndex::I,
            };
            leader_of = vec![Some(leader == PairIndex::I), Some(leader == PairIndex::J)];
            p.distance.as_mut().unwrap().add(d, None);
            if let (Some(hi), Some(hj)) = (heads[0], heads[1]) {
                let rh = p.relative_heading.as_mut().unwrap();
                rh.add(wrap_deg(hj - hi), None);
                rh.add(wrap_deg(hi - hj), None);
            }
            let va = p.viewing_angle.as_mut().unwrap();
            if let Some(x) = pij {
                va.add(x, leader_of[0]);
            }
            if let Some(x) = pji {
                va.add(x, leader_of[1]);
            }
        }
        for a in 0..n_agents {
            let role = leader_of[a];
            p.speed.add(vel[a].norm(), role);
            p.wall_distance.add(arena.wall_distance(pos[a]), role);
            if let (Some(h), Some(normal)) = (heads[a], angle_deg(pos[a])) {
                p.incidence.add(wrap_deg(h - normal), role);
            }
        }
    }
    p
}

/// PDFs of every observable. Collective observables need exactly two agents.
pub fn instantaneous_pdfs(
    traj: &Trajectory,
    cfg: &MetricsConfig,
    exec: Exec,
) -> Result<InstantPdfs, MetricsError> {
    if traj.n_agents() != 2 {
        return Err(MetricsError::NotAPair(traj.n_agents()));
    }
    pdfs_inner(traj, cfg, exec, true)
}

/// Speed, wall distance and incidence only; any number of agents.
pub fn individual_pdfs(
    traj: &Trajectory,
    cfg: &MetricsConfig,
    exec: Exec,
) -> Result<InstantPdfs, MetricsError> {
    pdfs_inner(traj, cfg, exec, false)
}

fn pdfs_inner(
    traj: &Trajectory,
    cfg: &MetricsConfig,
    exec: Exec,
    pair: bool,
) -> Result<InstantPdfs, MetricsError> {
    cfg.validate()?;
    let parts = exec.map(&traj.segments, |s| segment_pdfs(s, &traj.arena, cfg, pair));
    let mut out = InstantPdfs::empty(cfg, pair);
    for p in &parts {
        out.merge(p);
    }
    Ok(out)
}

/// Correlation values on the lag grid `k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub dt: f64,
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

impl CorrelationCurve {
    pub fn lag_seconds(&self, i: usize) -> f64 {
        self.lags[i] as f64 * self.dt
    }

    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags.iter().position(|&l| l == lag).map(|i| self.values[i])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag_s", "value", "count"])?;
        for i in 0..self.lags.len() {
            w.write_record([
                self.lag_seconds(i).to_string(),
                self.values[i].to_string(),
                self.counts[i].to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Mean absolute difference over the common lags up to `max_lag_s`.
pub fn curve_gap(a: &CorrelationCurve, b: &CorrelationCurve, max_lag_s: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &lag) in a.lags.iter().enumerate() {
        if a.lag_seconds(i) > max_lag_s + 1e-9 {
            break;
        }
        if let Some(v) = b.value_at(lag) {
            sum += (a.values[i] - v).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correlation {
    /// Mean-squared displacement.
    Msd,
    /// Velocity autocorrelation.
    Velocity,
    /// Autocorrelation of the wall incidence angle.
    Incidence,
}

fn segment_sums(
    seg: &Segment,
    arena: &ArenaSpec,
    kind: Correlation,
    max_lag: usize,
) -> (Vec<f64>, Vec<u64>) {
    let mut sums = vec![0.0; max_lag + 1];
    let mut counts = vec![0u64; max_lag + 1];
    let n = seg.len();
    if n < 2 {
        return (sums, counts);
    }
    for a in 0..seg.n_agents() {
        let pos = &seg.agents[a][1..];
        let vel: Vec<Vec2> = (1..n).map(|k| seg.velocity(a, k, arena.dt).unwrap()).collect();
        match kind {
            Correlation::Msd => {
                for lag in 0..=max_lag.min(pos.len() - 1) {
                    for t in 0..pos.len() - lag {
                        sums[lag] += (pos[t + lag] - pos[t]).norm_sq();
                    }
                    counts[lag] += (pos.len() - lag) as u64;
                }
            }
            Correlation::Velocity => {
                for lag in 0..=max_lag.min(vel.len() - 1) {
                    for t in 0..vel.len() - lag {
                        sums[lag] += vel[t + lag].dot(vel[t]);
                    }
                    counts[lag] += (vel.len() - lag) as u64;
                }
            }
            Correlation::Incidence => {
                let theta: Vec<Option<f64>> = pos
                    .iter()
                    .zip(&vel)
                    .map(|(u, v)| {
                        let h = angle_deg(*v)?;
                        let nrm = angle_deg(*u)?;
                        Some((h - nrm).to_radians())
                    })
                    .collect();
                for lag in 0..=max_lag.min(theta.len() - 1) {
                    for t in 0..theta.len() - lag {
                        if let (Some(x), Some(y)) = (theta[t], theta[t + lag]) {
                            sums[lag] += (y - x).cos();
                            counts[lag] += 1;
                        }
                    }
                }
            }
        }
    }
    (sums, counts)
}

/// Averages over every reference time, agent and segment.
pub fn correlation(
    traj: &Trajectory,
    kind: Correlation,
    max_lag_s: f64,
    exec: Exec,
) -> Result<CorrelationCurve, MetricsError> {
    let dt = traj.dt();
    let max_lag = (max_lag_s / dt + 1e-9).floor() as usize;
    let longest = traj.segments.iter().map(|s| s.len().saturating_sub(1)).max().unwrap_or(0);
    if longest <= max_lag {
        return Err(MetricsError::EmptyCurve(max_lag));
    }
    let parts = exec.map(&traj.segments, |s| segment_sums(s, &traj.arena, kind, max_lag));
    let mut sums = vec![0.0; max_lag + 1];
    let mut counts = vec![0u64; max_lag + 1];
    for (s, c) in &parts {
        for k in 0..=max_lag {
            sums[k] += s[k];
            counts[k] += c[k];
        }
    }
    let mut curve = CorrelationCurve {
        dt,
        lags: Vec::new(),
        values: Vec::new(),
        counts: Vec::new(),
    };
    for k in 0..=max_lag {
        if counts[k] > 0 {
            curve.lags.push(k);
            curve.values.push(sums[k] / counts[k] as f64);
            curve.counts.push(counts[k]);
        }
    }
    if curve.lags.is_empty() {
        return Err(MetricsError::EmptyCurve(max_lag));
    }
    Ok(curve)
}

pub fn msd(traj: &Trajectory, max_lag_s: f64, exec: Exec) -> Result<CorrelationCurve, MetricsError> {
    correlation(traj, Correlation::Msd, max_lag_s, exec)
}

pub fn velocity_autocorrelation(
    traj: &Trajectory,
    max_lag_s: f64,
    exec: Exec,
) -> Result<CorrelationCurve, MetricsError> {
    correlation(traj, Correlation::Velocity, max_lag_s, exec)
}

pub fn incidence_autocorrelation(
    traj: &Trajectory,
    max_lag_s: f64,
    exec: Exec,
) -> Result<CorrelationCurve, MetricsError> {
    correlation(traj, Correlation::Incidence, max_lag_s, exec)
}

/// Mean over frames and agents of the distance to the nearest other agent.
pub fn mean_nearest_neighbor_distance(traj: &Trajectory) -> Option<f64> {
    let mut m = Moments::default();
    for seg in &traj.segments {
        let n = seg.n_agents();
        if n < 2 {
            return None;
        }
        for k in 0..seg.len() {
            for i in 0..n {
                let d = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (seg.agents[i][k] - seg.agents[j][k]).norm())
                    .fold(f64::INFINITY, f64::min);
                m.add(d);
            }
        }
    }
    (m.n > 0.0).then(|| m.mean())
}

/// Mean and standard deviation of one observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl From<&Moments> for Stat {
    fn from(m: &Moments) -> Self {
        Stat {
            mean: m.mean(),
            std: m.std(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: &'static str,
    pub pair: Stat,
    pub leader: Option<Stat>,
    pub follower: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub frames: usize,
    pub rows: Vec<SummaryRow>,
}

impl SummaryStats {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub fn summary(pdfs: &InstantPdfs) -> SummaryStats {
    let rows = PDF_NAMES
        .iter()
        .filter_map(|name| {
            let o = pdfs.get(name)?;
            Some(SummaryRow {
                name,
                pair: Stat::from(&o.moments[0]),
                leader: o.has_roles().then(|| Stat::from(&o.moments[1])),
                follower: o.has_roles().then(|| Stat::from(&o.moments[2])),
            })
        })
        .collect();
    SummaryStats {
        frames: pdfs.frames,
        rows,
    }
}

/// Everything computed for one trajectory.
#[derive(Debug, Clone)]
pub struct Battery {
    pub pdfs: InstantPdfs,
    pub msd: CorrelationCurve,
    pub vacf: CorrelationCurve,
    pub incidence: CorrelationCurve,
    pub summary: SummaryStats,
    pub nearest_neighbor: Option<f64>,
}

pub const CURVE_NAMES: [&str; 3] = ["msd", "vacf", "incidence_autocorr"];

impl Battery {
    pub fn compute(traj: &Trajectory, cfg: &MetricsConfig, exec: Exec) -> Result<Battery, MetricsError> {
        let pdfs = if traj.n_agents() == 2 {
            instantaneous_pdfs(traj, cfg, exec)?
        } else {
            individual_pdfs(traj, cfg, exec)?
        };
        let summary = summary(&pdfs);
        Ok(Battery {
            msd: msd(traj, cfg.max_lag, exec)?,
            vacf: velocity_autocorrelation(traj, cfg.max_lag, exec)?,
            incidence: incidence_autocorrelation(traj, cfg.max_lag, exec)?,
            nearest_neighbor: mean_nearest_neighbor_distance(traj),
            summary,
            pdfs,
        })
    }

    pub fn curve(&self, name: &str) -> Option<&CorrelationCurve> {
        match name {
            "msd" => Some(&self.msd),
            "vacf" => Some(&self.vacf),
            "incidence_autocorr" => Some(&self.incidence),
            _ => None,
        }
    }

    /// Key-value report of the summary table.
    pub fn report(&self) -> String {
        let mut s = String::new();
        writeln!(s, "frames = {}", self.summary.frames).unwrap();
        for r in &self.summary.rows {
            writeln!(s, "{}.mean = {}", r.name, r.pair.mean).unwrap();
            writeln!(s, "{}.std = {}", r.name, r.pair.std).unwrap();
            for (role, st) in [("leader", r.leader), ("follower", r.follower)] {
                if let Some(st) = st {
                    writeln!(s, "{}.{role}.mean = {}", r.name, st.mean).unwrap();
                    writeln!(s, "{}.{role}.std = {}", r.name, st.std).unwrap();
                }
            }
        }
        if let Some(d) = self.nearest_neighbor {
            writeln!(s, "nearest_neighbor.mean = {d}").unwrap();
        }
        s
    }
}

/// Per-observable distances between two batteries: total variation for the
/// PDFs, mean absolute gap over lags up to `max_lag_s` for the curves.
pub fn compare_batteries(a: &Battery, b: &Battery, max_lag_s: f64) -> Result<Vec<(String, f64)>, MetricsError> {
    let mut out = Vec::new();
    for name in PDF_NAMES {
        if let (Some(x), Some(y)) = (a.pdfs.get(name), b.pdfs.get(name)) {
            out.push((format!("{name}.tv"), compare(&x.all, &y.all)?));
        }
    }
    for name in CURVE_NAMES {
        if let Some(g) = curve_gap(a.curve(name).unwrap(), b.curve(name).unwrap(), max_lag_s) {
            out.push((format!("{name}.mean_abs_gap"), g));
        }
    }
    Ok(out)
}
