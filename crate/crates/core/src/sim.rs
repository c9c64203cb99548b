//! Monte Carlo road simulator.
//!
//! A trial drops Poisson traffic on a ring road, marks transmitters with
//! carrier-sense thinning, tags the transmitter nearest the middle of the
//! road and measures the SINR of its broadcast at every other vehicle.
//! Blockage is counted geometrically per link, interference is summed over
//! every other active transmitter, and nothing is averaged analytically.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::noise_power;
use crate::channel::{received_power_k, LinkGeometry, MAX_BLOCKER_ROW};
use crate::error::{Error, Result};
use crate::scenario::{BlockerRule, Lane, Scenario, Thinning, LANE_COUNT};
use crate::units::linear_to_db;

/// Number of strongest receivers per trial pooled into the SINR CDF.
pub const TOP_SINR_COUNT: usize = 100;

const STREAM_DROP: u64 = 0x6472_6f70;
const STREAM_MAC: u64 = 0x006d_6163;

/// Along-road displacement substituted for two vehicles at the same spot
/// on the same lane.
const COINCIDENT_DY: f64 = 1e-3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent child seed number `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vehicle {
    pub lane: Lane,
    pub y: f64,
    pub tall: bool,
    pub wants_tx: bool,
    pub primary_tx: bool,
    pub concurrent_tx: bool,
}

impl Vehicle {
    pub fn new(lane: Lane, y: f64, tall: bool) -> Self {
        Vehicle {
            lane,
            y,
            tall,
            wants_tx: false,
            primary_tx: false,
            concurrent_tx: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.primary_tx || self.concurrent_tx
    }
}

/// One road realization on a ring of circumference `road_length`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleDrop {
    pub vehicles: Vec<Vehicle>,
    pub road_length: f64,
    pub rng_seed: u64,
}

impl VehicleDrop {
    pub fn from_vehicles(vehicles: Vec<Vehicle>, road_length: f64) -> Result<Self> {
        check_road_length(road_length)?;
        if let Some(v) = vehicles.iter().find(|v| !(0.0..road_length).contains(&v.y)) {
            return Err(Error::domain(format!(
                "vehicle at y = {} is off the road [0, {road_length})",
                v.y
            )));
        }
        Ok(VehicleDrop {
            vehicles,
            road_length,
            rng_seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Shortest signed ring displacement from `from` to `to`, in
    /// `[-L/2, L/2)`.
    pub fn wrapped_dy(&self, from: f64, to: f64) -> f64 {
        let l = self.road_length;
        (to - from + l / 2.0).rem_euclid(l) - l / 2.0
    }

    pub fn lane_count(&self, lane: Lane) -> usize {
        self.vehicles.iter().filter(|v| v.lane == lane).count()
    }

    pub fn primaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.primary_tx)
            .map(|(i, _)| i)
    }

    fn distance(&self, scenario: &Scenario, a: usize, b: usize) -> f64 {
        let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
        scenario
            .road
            .lane_offset(va.lane, vb.lane)
            .hypot(self.wrapped_dy(va.y, vb.y))
    }
}

fn check_road_length(road_length: f64) -> Result<()> {
    if road_length > 0.0 && road_length.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "road length must be > 0, got {road_length}"
        )))
    }
}

/// Poisson traffic on each lane, uniform positions, independent truck
/// marks. Overlapping vehicles are allowed unless `sim.min_gap_m` > 0.
pub fn drop_vehicles(scenario: &Scenario, road_length: f64, seed: u64) -> Result<VehicleDrop> {
    check_road_length(road_length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_tall = scenario.road.tall_fraction;
    let mut vehicles = Vec::new();
    for lane in Lane::ALL {
        let mean = scenario.road.density(lane) * road_length;
        let n = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::domain(format!("lane {lane} traffic: {e}")))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let mut lane_vehicles: Vec<Vehicle> = (0..n)
            .map(|_| {
                let y = rng.random::<f64>() * road_length;
                let tall = rng.random::<f64>() < r_tall;
                Vehicle::new(lane, y, tall)
            })
            .collect();
        lane_vehicles.sort_by(|a, b| a.y.total_cmp(&b.y));
        if scenario.sim.min_gap_m > 0.0 {
            enforce_gap(scenario, &mut lane_vehicles);
        }
        vehicles.extend(lane_vehicles);
    }
    Ok(VehicleDrop {
        vehicles,
        road_length,
        rng_seed: seed,
    })
}

fn enforce_gap(scenario: &Scenario, lane: &mut Vec<Vehicle>) {
    let len = |v: &Vehicle| {
        if v.tall {
            scenario.tall.length
        } else {
            scenario.passenger.length
        }
    };
    let mut kept: Vec<Vehicle> = Vec::with_capacity(lane.len());
    for v in lane.drain(..) {
        match kept.last() {
            Some(prev) if v.y - prev.y < scenario.sim.min_gap_m + (len(prev) + len(&v)) / 2.0 => {}
            _ => kept.push(v),
        }
    }
    *lane = kept;
}

/// Marks transmitters. Each vehicle contends with probability `p_t`, and
/// carrier sensing keeps a contender as primary transmitter according to
/// `sim.thinning`, using independent uniform marks as priorities.
/// Separately, each vehicle transmits concurrently with probability `p_c`.
pub fn select_transmitters(mut drop: VehicleDrop, scenario: &Scenario, seed: u64) -> VehicleDrop {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p_t, p_c) = scenario.transmit_probabilities();
    let mut contenders: Vec<(f64, usize)> = Vec::new();
    for (i, v) in drop.vehicles.iter_mut().enumerate() {
        v.wants_tx = rng.random::<f64>() < p_t;
        let mark = rng.random::<f64>();
        v.concurrent_tx = rng.random::<f64>() < p_c;
        v.primary_tx = false;
        if v.wants_tx {
            contenders.push((mark, i));
        }
    }
    contenders.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let r_e = scenario.radio.carrier_sense_range_m;
    let mut kept: Vec<usize> = Vec::new();
    for (rank, &(_, i)) in contenders.iter().enumerate() {
        let silenced = match scenario.sim.thinning {
            Thinning::Sequential => kept.iter().any(|&j| drop.distance(scenario, i, j) < r_e),
            Thinning::MaternII => contenders[..rank]
                .iter()
                .any(|&(_, j)| drop.distance(scenario, i, j) < r_e),
        };
        if !silenced {
            kept.push(i);
        }
    }
    for i in kept {
        drop.vehicles[i].primary_tx = true;
    }
    drop
}

/// Tall vehicles per lane, sorted by position, for blocker queries.
#[derive(Debug, Clone)]
pub struct BlockerIndex {
    lanes: [Vec<(f64, usize)>; LANE_COUNT],
    road_length: f64,
}

impl BlockerIndex {
    pub fn new(drop: &VehicleDrop) -> Self {
        let mut lanes: [Vec<(f64, usize)>; LANE_COUNT] = Default::default();
        for (i, v) in drop.vehicles.iter().enumerate() {
            if v.tall {
                lanes[v.lane.zero_based()].push((v.y, i));
            }
        }
        for l in &mut lanes {
            l.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        BlockerIndex {
            lanes,
            road_length: drop.road_length,
        }
    }

    /// Calls `f(center, index)` for every tall vehicle on `lane` whose
    /// center, unwrapped to the nearest copy, lies in `[a, b]`.
    fn visit(&self, lane: usize, a: f64, b: f64, mut f: impl FnMut(f64, usize)) {
        if a > b {
            return;
        }
        let l = self.road_length;
        let list = &self.lanes[lane];
        for shift in [-l, 0.0, l] {
            let (lo, hi) = (a - shift, b - shift);
            if hi < 0.0 || lo >= l {
                continue;
            }
            let start = list.partition_point(|&(c, _)| c < lo);
            for &(c, i) in list[start..].iter().take_while(|&&(c, _)| c <= hi) {
                f(c + shift, i);
            }
        }
    }

    /// Tall vehicles cutting the link from `tx` to `rx`, excluding the
    /// endpoints. Zero when both endpoints are tall.
    pub fn count(&self, scenario: &Scenario, drop: &VehicleDrop, tx: usize, rx: usize) -> usize {
        let (vt, vr) = (&drop.vehicles[tx], &drop.vehicles[rx]);
        if vt.tall && vr.tall {
            return 0;
        }
        let yt = vt.y;
        let yr = yt + drop.wrapped_dy(vt.y, vr.y);
        let (lt, lr) = (vt.lane.zero_based(), vr.lane.zero_based());
        let w = scenario.road.lane_width;
        let (l2, w2) = (scenario.tall.length, scenario.tall.width);
        let (xt, xr) = (lt as f64 * w, lr as f64 * w);
        let mut n = 0;
        let mut tally = |_: f64, i: usize| {
            if i != tx && i != rx {
                n += 1;
            }
        };
        match scenario.sim.blocker_rule {
            BlockerRule::Analytic if lt == lr => {
                let (lo, hi) = (yt.min(yr), yt.max(yr));
                self.visit(lt, lo + l2 / 2.0, hi - l2 / 2.0, &mut tally);
            }
            BlockerRule::Analytic => {
                let dy = yr - yt;
                let y_at = |x: f64| yt + dy * (x - xt) / (xr - xt);
                let toward_rx = |x_from: f64, x_to: f64| {
                    let (a, b) = (y_at(x_from), y_at(x_to));
                    (a.min(b), a.max(b))
                };
                let half = w2 / 2.0 * (xr - xt).signum();
                let (a, b) = toward_rx(xt, xt + half);
                self.visit(lt, a, b, &mut tally);
                let (a, b) = toward_rx(xr, xr - half);
                self.visit(lr, a, b, &mut tally);
                for m in lt.min(lr) + 1..lt.max(lr) {
                    let xm = m as f64 * w;
                    let (a, b) = toward_rx(xm - w2 / 2.0, xm + w2 / 2.0);
                    self.visit(m, a - l2 / 2.0, b + l2 / 2.0, &mut tally);
                }
            }
            BlockerRule::Footprint => {
                let (lo, hi) = (yt.min(yr) - l2 / 2.0, yt.max(yr) + l2 / 2.0);
                for m in lt.min(lr)..=lt.max(lr) {
                    let xm = m as f64 * w;
                    self.visit(m, lo, hi, |c, i| {
                        let rect = [xm - w2 / 2.0, xm + w2 / 2.0, c - l2 / 2.0, c + l2 / 2.0];
                        if segment_hits_rect((xt, yt), (xr, yr), rect) {
                            tally(c, i);
                        }
                    });
                }
            }
        }
        n
    }
}

/// Closed segment vs axis-aligned rectangle `[x0, x1, y0, y1]`
/// (Liang–Barsky clipping).
pub fn segment_hits_rect(p: (f64, f64), q: (f64, f64), rect: [f64; 4]) -> bool {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (den, num) in [
        (-dx, p.0 - rect[0]),
        (dx, rect[1] - p.0),
        (-dy, p.1 - rect[2]),
        (dy, rect[3] - p.1),
    ] {
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
        } else {
            let t = num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Blocker count for a single link. Builds a throwaway index; use
/// [`BlockerIndex`] when evaluating many links on one drop.
pub fn count_los_blockers(
    drop: &VehicleDrop,
    tx: usize,
    rx: usize,
    scenario: &Scenario,
) -> Result<usize> {
    if tx == rx {
        return Err(Error::domain("a link needs two distinct vehicles"));
    }
    if tx >= drop.len() || rx >= drop.len() {
        return Err(Error::domain("vehicle index out of range"));
    }
    Ok(BlockerIndex::new(drop).count(scenario, drop, tx, rx))
}

/// Received power in mW from vehicle `tx` at vehicle `rx`, with the path
/// loss row picked by the geometric blocker count (two or more share the
/// last row).
pub fn link_power(
    scenario: &Scenario,
    drop: &VehicleDrop,
    index: &BlockerIndex,
    tx: usize,
    rx: usize,
) -> Result<f64> {
    let (vt, vr) = (&drop.vehicles[tx], &drop.vehicles[rx]);
    let dx = scenario.road.lane_offset(vt.lane, vr.lane);
    let mut dy = drop.wrapped_dy(vt.y, vr.y);
    if dx == 0.0 && dy == 0.0 {
        dy = COINCIDENT_DY;
    }
    let geom = LinkGeometry::new(dx, dy)?;
    let k = index.count(scenario, drop, tx, rx).min(MAX_BLOCKER_ROW);
    received_power_k(scenario, k, &geom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    /// Receivers whose SINR meets the threshold.
    pub covered_count: usize,
    /// SINR in dB at every receiver, in vehicle order.
    pub sinr_samples: Vec<f64>,
    /// Primary transmitters per meter, over every drop the trial made.
    pub transmitter_density: f64,
    pub primaries: usize,
    /// Drops made before one had a primary transmitter.
    pub attempts: u32,
    pub vehicles: usize,
}

impl TrialStats {
    /// The strongest [`TOP_SINR_COUNT`] SINRs, descending.
    pub fn top_sinr(&self) -> Vec<f64> {
        let mut v = self.sinr_samples.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v.truncate(TOP_SINR_COUNT);
        v
    }
}

/// Primary transmitter closest to the middle of the road.
pub fn tagged_transmitter(drop: &VehicleDrop) -> Option<usize> {
    let mid = drop.road_length / 2.0;
    drop.primaries().min_by(|&a, &b| {
        let da = (drop.vehicles[a].y - mid).abs();
        let db = (drop.vehicles[b].y - mid).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    })
}

/// SINR of the tagged transmitter's broadcast at every vehicle that is not
/// transmitting itself. Returns `(covered_count, sinr_samples)`.
pub fn evaluate_drop(
    scenario: &Scenario,
    drop: &VehicleDrop,
    tagged: usize,
) -> Result<(usize, Vec<f64>)> {
    let index = BlockerIndex::new(drop);
    let noise = noise_power(&scenario.radio);
    let interferers: Vec<usize> = (0..drop.len())
        .filter(|&j| j != tagged && drop.vehicles[j].is_active())
        .collect();
    let mut sinrs = Vec::with_capacity(drop.len());
    let mut covered = 0;
    for r in 0..drop.len() {
        if r == tagged || drop.vehicles[r].is_active() {
            continue;
        }
        let signal = link_power(scenario, drop, &index, tagged, r)?;
        let mut interference = 0.0;
        for &j in &interferers {
            interference += link_power(scenario, drop, &index, j, r)?;
        }
        let sinr = linear_to_db(signal / (noise + interference));
        if sinr >= scenario.radio.sinr_threshold_db {
            covered += 1;
        }
        sinrs.push(sinr);
    }
    Ok((covered, sinrs))
}

/// One trial: drop, thin, and evaluate, redrawing up to
/// `sim.max_retries` times until a drop has a primary transmitter.
pub fn trial_coverage(scenario: &Scenario, road_length: f64, seed: u64) -> Result<TrialStats> {
    check_road_length(road_length)?;
    let mut primaries = 0usize;
    for attempt in 0..scenario.sim.max_retries {
        let attempt_seed = derive_seed(seed, attempt as u64);
        let drop = drop_vehicles(
            scenario,
            road_length,
            derive_seed(attempt_seed, STREAM_DROP),
        )?;
        let drop = select_transmitters(drop, scenario, derive_seed(attempt_seed, STREAM_MAC));
        primaries += drop.primaries().count();
        if let Some(tagged) = tagged_transmitter(&drop) {
            let (covered_count, sinr_samples) = evaluate_drop(scenario, &drop, tagged)?;
            let attempts = attempt + 1;
            return Ok(TrialStats {
                covered_count,
                sinr_samples,
                transmitter_density: primaries as f64 / (attempts as f64 * road_length),
                primaries,
                attempts,
                vehicles: drop.len(),
            });
        }
    }
    Err(Error::NoTransmitter {
        attempts: scenario.sim.max_retries,
    })
}

/// Runs `trials` independent trials in parallel. Trial `i` uses seed
/// `derive_seed(base_seed, i)`; results come back in trial order.
pub fn run_trials(
    scenario: &Scenario,
    trials: usize,
    road_length: f64,
    base_seed: u64,
) -> Result<Vec<TrialStats>> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    (0..trials)
        .into_par_iter()
        .map(|i| trial_coverage(scenario, road_length, derive_seed(base_seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub trials: usize,
    pub mean_covered: f64,
    /// Sample standard deviation of the covered count (0 for one trial).
    pub sd_covered: f64,
    pub standard_error: f64,
    pub ci95: (f64, f64),
    /// Pooled per-trial top SINRs, ascending.
    pub top_sinr: Vec<f64>,
    /// Primary transmitters per meter, pooled over all drops.
    pub transmitter_density: f64,
}

impl CampaignSummary {
    pub fn from_trials(stats: &[TrialStats], road_length: f64) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::domain("cannot summarize zero trials"));
        }
        let n = stats.len() as f64;
        let mean = stats.iter().map(|t| t.covered_count as f64).sum::<f64>() / n;
        let sd = if stats.len() > 1 {
            let ss: f64 = stats
                .iter()
                .map(|t| (t.covered_count as f64 - mean).powi(2))
                .sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let se = sd / n.sqrt();
        let mut top: Vec<f64> = stats.iter().flat_map(|t| t.top_sinr()).collect();
        top.sort_by(f64::total_cmp);
        let primaries: usize = stats.iter().map(|t| t.primaries).sum();
        let drops: u64 = stats.iter().map(|t| t.attempts as u64).sum();
        Ok(CampaignSummary {
            trials: stats.len(),
            mean_covered: mean,
            sd_covered: sd,
            standard_error: se,
            ci95: (mean - 1.96 * se, mean + 1.96 * se),
            top_sinr: top,
            transmitter_density: primaries as f64 / (drops as f64 * road_length),
        })
    }
}

pub fn run_campaign(
    scenario: &Scenario,
    trials: usize,
    road_length: f64,
    base_seed: u64,
) -> Result<CampaignSummary> {
    let stats = run_trials(scenario, trials, road_length, base_seed)?;
    CampaignSummary::from_trials(&stats, road_length)
}

/// Writes one JSON object per trial.
pub fn write_records<W: Write>(mut out: W, stats: &[TrialStats]) -> std::io::Result<()> {
    for (i, t) in stats.iter().enumerate() {
        #[derive(Serialize)]
        struct Record<'a> {
            trial: usize,
            #[serde(flatten)]
            stats: &'a TrialStats,
        }
        serde_json::to_writer(&mut out, &Record { trial: i, stats: t })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Empirical CDF of `samples` evaluated at each point of `grid`.
pub fn ecdf(samples: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    grid.iter()
        .map(|&x| sorted.partition_point(|&s| s <= x) as f64 / n)
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
