//! Closed-form SINR and broadcast coverage.
//!
//! Received power is blended over blockage states (no blocker / one
//! blocker). Interference comes from two lattices of interferers: primary
//! ones spaced by carrier sensing, `r_E + 1/(p_t Σλ)` apart, and secondary
//! ones that slipped through carrier sensing, `1/(p_c Σλ)` apart. Each
//! interferer's power is averaged over the three lane offsets it can sit
//! at. The resulting noise-plus-interference level fixes a threshold
//! power, which is inverted into a reach per lane pair and combined into
//! the expected number of covered receivers.

use crate::blockage::blocker_count_distribution;
use crate::channel::{lobe_membership, received_power_through, AntennaRole, LinkGeometry, Lobe};
use crate::error::{Error, Result};
use crate::scenario::{CoverageWeighting, Lane, RadioParams, Scenario, LANE_COUNT};
use crate::units::{db_to_linear, dbm_to_mw, linear_to_db};

/// Probability that transmitter and receiver are 0, 1 or 2 lanes apart
/// when both pick one of three lanes uniformly.
pub const LANE_OFFSET_WEIGHTS: [f64; LANE_COUNT] = [1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0];

/// Bisection resolution of the coverage reach.
pub const REACH_TOLERANCE_M: f64 = 0.01;
/// Smallest along-road distance probed by the inversion.
pub const MIN_PROBE_DISTANCE_M: f64 = 1.0;
/// Upper end of the inversion bracket.
pub const MAX_REACH_M: f64 = 2000.0;
/// Hard cap on interference series length.
pub const SERIES_MAX_TERMS: usize = 10_000;
/// Bound on the discarded tail of an interference series, relative to the
/// retained sum.
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-12;

const MONOTONE_PROBES: usize = 64;

pub fn noise_power_dbm(radio: &RadioParams) -> f64 {
    -174.0 + 10.0 * radio.bandwidth_hz.log10() + radio.noise_figure_db
}

/// Thermal noise over the channel bandwidth, mW.
pub fn noise_power(radio: &RadioParams) -> f64 {
    dbm_to_mw(noise_power_dbm(radio))
}

fn blended_power(
    scenario: &Scenario,
    tx: Lane,
    rx: Lane,
    geom: &LinkGeometry,
    lobe: Option<Lobe>,
) -> Result<f64> {
    let blockage = blocker_count_distribution(scenario, tx, rx, geom.dy)?;
    let lobe = lobe
        .unwrap_or_else(|| lobe_membership(&scenario.antenna, geom, AntennaRole::TransmitterFront));
    let clear = received_power_through(scenario, 0, geom, lobe)?;
    let one = received_power_through(scenario, 1, geom, lobe)?;
    Ok(blockage.p_b0 * clear + blockage.p_b1 * one)
}

/// Blockage-weighted received power (no blocker or one blocker) from a
/// transmitter on `tx` to a receiver on `rx`, mW. Links with two or more
/// blockers are treated as lost.
pub fn mean_received_power(
    scenario: &Scenario,
    tx: Lane,
    rx: Lane,
    geom: &LinkGeometry,
) -> Result<f64> {
    blended_power(scenario, tx, rx, geom, None)
}

fn lane_pairs(separation: usize) -> impl Iterator<Item = (Lane, Lane)> {
    Lane::ALL
        .into_iter()
        .flat_map(|a| Lane::ALL.into_iter().map(move |b| (a, b)))
        .filter(move |(a, b)| a.separation(*b) == separation)
}

/// Power from an interferer `separation` lanes away. Interferers are not
/// tied to lane indices, so the pair with the least blockage (most power)
/// is used.
fn interferer_power_at_offset(scenario: &Scenario, separation: usize, dy: f64) -> Result<f64> {
    let geom = LinkGeometry::new(separation as f64 * scenario.road.lane_width, dy)?;
    let mut best: f64 = 0.0;
    for (a, b) in lane_pairs(separation) {
        best = best.max(mean_received_power(scenario, a, b, &geom)?);
    }
    Ok(best)
}

/// Interference from one interferer at Euclidean distance `distance`,
/// averaged over the same-lane, adjacent-lane and two-lane placements.
/// Placements that cannot reach `distance` (distance not exceeding the
/// lane offset) contribute nothing.
pub fn lane_averaged_interferer_power(scenario: &Scenario, distance: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::domain(format!(
            "interferer distance must be > 0, got {distance}"
        )));
    }
    let w = scenario.road.lane_width;
    let mut total = 0.0;
    for (separation, weight) in LANE_OFFSET_WEIGHTS.iter().enumerate() {
        let dx = separation as f64 * w;
        if distance <= dx {
            continue;
        }
        let dy = (distance * distance - dx * dx).sqrt();
        total += weight * interferer_power_at_offset(scenario, separation, dy)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
}

impl SeriesSum {
    pub const ZERO: SeriesSum = SeriesSum {
        value: 0.0,
        terms: 0,
    };
}

/// Distance beyond which every lane placement has entered its final lobe,
/// so interferer power decreases monotonically with distance.
fn lobe_settling_distance(scenario: &Scenario) -> f64 {
    let far = (LANE_COUNT - 1) as f64 * scenario.road.lane_width;
    let half = scenario
        .antenna
        .half_angle()
        .min(std::f64::consts::FRAC_PI_2);
    far / half.sin()
}

/// `Σ_{k≥1} I_r(start + k·spacing)`.
///
/// Once lobes have settled, each further step multiplies every term by at
/// most `10^(-a·spacing/10000)` (the atmospheric loss over one spacing,
/// with `a` in dB/km), which bounds the remaining tail by a geometric
/// series. Summation stops when that bound drops below
/// [`SERIES_TAIL_TOLERANCE`] of the running sum.
pub fn interference_series(scenario: &Scenario, start: f64, spacing: f64) -> Result<SeriesSum> {
    if !(start >= 0.0) {
        return Err(Error::domain(format!(
            "series offset must be >= 0, got {start}"
        )));
    }
    if spacing.is_infinite() {
        return Ok(SeriesSum::ZERO);
    }
    if !(spacing > 0.0) {
        return Err(Error::domain(format!(
            "interferer spacing must be > 0, got {spacing}"
        )));
    }
    let ratio = db_to_linear(-scenario.path_loss.atmospheric_db_per_km * spacing / 1000.0);
    let tail_factor = ratio / (1.0 - ratio);
    let settled = lobe_settling_distance(scenario);
    let mut sum = 0.0;
    for k in 1..=SERIES_MAX_TERMS {
        let l = start + k as f64 * spacing;
        let term = lane_averaged_interferer_power(scenario, l)?;
        sum += term;
        if l >= settled && term * tail_factor <= SERIES_TAIL_TOLERANCE * sum {
            return Ok(SeriesSum {
                value: sum,
                terms: k,
            });
        }
    }
    Err(Error::Convergence {
        tolerance: SERIES_TAIL_TOLERANCE,
        terms: SERIES_MAX_TERMS,
    })
}

/// Mean spacing between carrier-sense-separated transmitters.
pub fn primary_spacing(scenario: &Scenario) -> f64 {
    let (p_t, _) = scenario.transmit_probabilities();
    scenario.radio.carrier_sense_range_m + 1.0 / (p_t * scenario.road.total_density())
}

/// Transmitters per meter of road implied by [`primary_spacing`].
pub fn transmitter_density(scenario: &Scenario) -> f64 {
    1.0 / primary_spacing(scenario)
}

/// Interference from transmitters spaced out by carrier sensing, at a
/// receiver `link_distance` from its transmitter.
pub fn primary_interference(scenario: &Scenario, link_distance: f64) -> Result<SeriesSum> {
    if !(link_distance >= 0.0) {
        return Err(Error::domain(format!(
            "link distance must be >= 0, got {link_distance}"
        )));
    }
    interference_series(scenario, link_distance, primary_spacing(scenario))
}

/// Interference from concurrent transmitters that carrier sensing missed.
pub fn secondary_interference(scenario: &Scenario) -> Result<SeriesSum> {
    let (_, p_c) = scenario.transmit_probabilities();
    let rate = p_c * scenario.road.total_density();
    if rate == 0.0 {
        return Ok(SeriesSum::ZERO);
    }
    interference_series(scenario, 0.0, 1.0 / rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceBudget {
    /// mW
    pub noise: f64,
    pub primary_interference: f64,
    pub secondary_interference: f64,
    /// Minimum received power meeting the SINR threshold, mW.
    pub threshold_power: f64,
    pub primary_terms: usize,
    pub secondary_terms: usize,
}

impl InterferenceBudget {
    pub fn terms_used(&self) -> usize {
        self.primary_terms + self.secondary_terms
    }

    pub fn noise_plus_interference(&self) -> f64 {
        self.noise + self.primary_interference + self.secondary_interference
    }
}

/// Noise, both interference series and the resulting threshold power for a
/// receiver `link_distance` from its transmitter.
pub fn threshold_power(scenario: &Scenario, link_distance: f64) -> Result<InterferenceBudget> {
    let noise = noise_power(&scenario.radio);
    let primary = primary_interference(scenario, link_distance)?;
    let secondary = secondary_interference(scenario)?;
    let gamma = db_to_linear(scenario.radio.sinr_threshold_db);
    Ok(InterferenceBudget {
        noise,
        primary_interference: primary.value,
        secondary_interference: secondary.value,
        threshold_power: (noise + primary.value + secondary.value) * gamma,
        primary_terms: primary.terms,
        secondary_terms: secondary.terms,
    })
}

/// Received power along the road for a fixed lane pair. Off the road
/// axis the curve has two branches: side-lobe coupling until the receiver
/// enters the main cone, main-lobe coupling after. Each branch decreases
/// with distance; the jump between them does not.
struct PowerProfile<'a> {
    scenario: &'a Scenario,
    tx: Lane,
    rx: Lane,
    dx: f64,
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    from: f64,
    to: f64,
    lobe: Lobe,
}

impl<'a> PowerProfile<'a> {
    fn new(scenario: &'a Scenario, tx: Lane, rx: Lane) -> Self {
        PowerProfile {
            scenario,
            tx,
            rx,
            dx: scenario.road.lane_offset(tx, rx),
        }
    }

    fn power(&self, dy: f64, lobe: Lobe) -> Result<f64> {
        blended_power(
            self.scenario,
            self.tx,
            self.rx,
            &LinkGeometry::new(self.dx, dy)?,
            Some(lobe),
        )
    }

    fn branches(&self) -> Vec<Branch> {
        let whole = |lobe| {
            vec![Branch {
                from: MIN_PROBE_DISTANCE_M,
                to: MAX_REACH_M,
                lobe,
            }]
        };
        match self.scenario.antenna.cone_entry(self.dx) {
            None => whole(Lobe::Main),
            Some(e) if e <= MIN_PROBE_DISTANCE_M => whole(Lobe::Main),
            Some(e) if e >= MAX_REACH_M => whole(Lobe::Side),
            Some(e) => vec![
                Branch {
                    from: MIN_PROBE_DISTANCE_M,
                    to: e,
                    lobe: Lobe::Side,
                },
                Branch {
                    from: e,
                    to: MAX_REACH_M,
                    lobe: Lobe::Main,
                },
            ],
        }
    }

    fn check_monotone(&self, b: &Branch) -> Result<()> {
        let mut last = f64::INFINITY;
        for i in 0..=MONOTONE_PROBES {
            let dy = b.from + (b.to - b.from) * i as f64 / MONOTONE_PROBES as f64;
            let p = self.power(dy, b.lobe)?;
            if p > last * (1.0 + 1e-12) {
                return Err(Error::NonMonotone {
                    from: b.from,
                    to: b.to,
                });
            }
            last = p;
        }
        Ok(())
    }

    /// Largest `dy` in the branch whose power meets `threshold`.
    fn reach_in(&self, b: &Branch, threshold: f64) -> Result<Option<f64>> {
        self.check_monotone(b)?;
        if self.power(b.from, b.lobe)? < threshold {
            return Ok(None);
        }
        if self.power(b.to, b.lobe)? >= threshold {
            return Ok(Some(b.to));
        }
        let (mut lo, mut hi) = (b.from, b.to);
        while hi - lo > REACH_TOLERANCE_M {
            let mid = 0.5 * (lo + hi);
            if self.power(mid, b.lobe)? >= threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "threshold power must be > 0, got {threshold}"
        )))
    }
}

/// Farthest along-road distance at which a receiver on `rx` still gets at
/// least `threshold` mW from a transmitter on `tx`. Zero when no distance
/// qualifies.
pub fn coverage_reach(scenario: &Scenario, threshold: f64, tx: Lane, rx: Lane) -> Result<f64> {
    check_threshold(threshold)?;
    let profile = PowerProfile::new(scenario, tx, rx);
    for b in profile.branches().iter().rev() {
        if let Some(r) = profile.reach_in(b, threshold)? {
            return Ok(r);
        }
    }
    Ok(0.0)
}

/// Length of road ahead of the transmitter over which a receiver on `rx`
/// gets at least `threshold` mW. Equals [`coverage_reach`] unless
/// narrow-beam side-lobe gaps leave part of that stretch uncovered.
pub fn covered_length(scenario: &Scenario, threshold: f64, tx: Lane, rx: Lane) -> Result<f64> {
    check_threshold(threshold)?;
    let profile = PowerProfile::new(scenario, tx, rx);
    let mut total = 0.0;
    for (i, b) in profile.branches().iter().enumerate() {
        if let Some(r) = profile.reach_in(b, threshold)? {
            let start = if i == 0 { 0.0 } else { b.from };
            total += r - start;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub budget: InterferenceBudget,
    /// Farthest covered receiver, indexed `[tx lane][rx lane]`, meters.
    pub reach: [[f64; LANE_COUNT]; LANE_COUNT],
    /// Covered stretch of road, indexed like `reach`, meters.
    pub covered: [[f64; LANE_COUNT]; LANE_COUNT],
    /// Expected number of receivers meeting the SINR threshold.
    pub expected_receivers: f64,
}

impl CoverageResult {
    /// Mean reach over the lane pairs at each offset 0, W, 2W.
    pub fn reach_by_offset(&self) -> [f64; LANE_COUNT] {
        let mut out = [0.0; LANE_COUNT];
        for (sep, slot) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = lane_pairs(sep)
                .map(|(a, b)| self.reach[a.zero_based()][b.zero_based()])
                .collect();
            *slot = vals.iter().sum::<f64>() / vals.len() as f64;
        }
        out
    }
}

/// Expected broadcast coverage for a given threshold power.
pub fn coverage_for_budget(
    scenario: &Scenario,
    budget: InterferenceBudget,
) -> Result<CoverageResult> {
    let threshold = budget.threshold_power;
    let mut reach = [[0.0; LANE_COUNT]; LANE_COUNT];
    let mut covered = [[0.0; LANE_COUNT]; LANE_COUNT];
    let mut expected = 0.0;
    for tx in Lane::ALL {
        for rx in Lane::ALL {
            let (i, j) = (tx.zero_based(), rx.zero_based());
            reach[i][j] = coverage_reach(scenario, threshold, tx, rx)?;
            covered[i][j] = covered_length(scenario, threshold, tx, rx)?;
            let weight = match scenario.analysis.coverage_weighting {
                CoverageWeighting::TransmitterLane => scenario.road.density(tx),
                CoverageWeighting::ReceiverLane => scenario.road.density(rx),
            };
            expected += weight * covered[i][j] / LANE_COUNT as f64;
        }
    }
    Ok(CoverageResult {
        budget,
        reach,
        covered,
        expected_receivers: expected,
    })
}

/// Expected number of receivers covered by one broadcast. The threshold
/// power is computed once with interferers as close as carrier sensing
/// allows (zero transmitter-receiver offset in the primary series).
pub fn expected_coverage(scenario: &Scenario) -> Result<CoverageResult> {
    let budget = threshold_power(scenario, 0.0)?;
    coverage_for_budget(scenario, budget)
}

/// Mean SINR in dB of a link, against noise plus both interference series.
pub fn sinr_at(scenario: &Scenario, geom: &LinkGeometry, tx: Lane, rx: Lane) -> Result<f64> {
    let signal = mean_received_power(scenario, tx, rx, geom)?;
    let budget = threshold_power(scenario, geom.distance())?;
    Ok(linear_to_db(signal / budget.noise_plus_interference()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::received_power_k;
    use crate::units::mw_to_dbm;
    use approx::assert_abs_diff_eq;

    fn lane(i: usize) -> Lane {
        Lane::new(i).unwrap()
    }

    fn geom(dx: f64, dy: f64) -> LinkGeometry {
        LinkGeometry::new(dx, dy).unwrap()
    }

    fn no_trucks() -> Scenario {
        let mut s = Scenario::default();
        s.road.tall_fraction = 0.0;
        s
    }

    #[test]
    fn noise_examples() {
        let r = RadioParams::default();
        assert_abs_diff_eq!(noise_power_dbm(&r), -94.990, epsilon = 1e-3);
        let r1 = RadioParams {
            bandwidth_hz: 1.0,
            noise_figure_db: 0.0,
            ..RadioParams::default()
        };
        assert_abs_diff_eq!(noise_power_dbm(&r1), -174.0, epsilon = 1e-12);
        let r40 = RadioParams {
            bandwidth_hz: 40e6,
            ..RadioParams::default()
        };
        assert_abs_diff_eq!(
            noise_power_dbm(&r40) - noise_power_dbm(&r),
            10.0 * 2f64.log10(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mean_power_without_trucks_is_clear_power() {
        let s = no_trucks();
        for (dx, dy) in [(0.0, 30.0), (3.2, 80.0), (6.4, 10.0)] {
            let g = geom(dx, dy);
            let tx = lane(1);
            let rx = lane(1 + (dx / 3.2).round() as usize);
            assert_eq!(
                mean_received_power(&s, tx, rx, &g).unwrap(),
                received_power_k(&s, 0, &g).unwrap()
            );
        }
    }

    #[test]
    fn mean_power_blends_blockage_states() {
        let s = Scenario::default();
        let g = geom(0.0, 50.0);
        let b = blocker_count_distribution(&s, lane(2), lane(2), 50.0).unwrap();
        let expected = b.p_b0 * received_power_k(&s, 0, &g).unwrap()
            + b.p_b1 * received_power_k(&s, 1, &g).unwrap();
        let got = mean_received_power(&s, lane(2), lane(2), &g).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = expected * 1e-14);
        assert_abs_diff_eq!(b.p_b0, 0.6938, epsilon = 1e-4);
        let far = mean_received_power(&s, lane(2), lane(2), &geom(0.0, 1900.0)).unwrap();
        assert!(far < got * 1e-3);
    }

    #[test]
    fn lane_average_brute_force() {
        let s = Scenario::default();
        let l: f64 = 100.0;
        let w = 3.2;
        let best = |sep: usize, dy: f64| -> f64 {
            let mut m: f64 = 0.0;
            for a in 1..=3usize {
                for b in 1..=3usize {
                    if a.abs_diff(b) == sep {
                        let p =
                            mean_received_power(&s, lane(a), lane(b), &geom(sep as f64 * w, dy))
                                .unwrap();
                        m = m.max(p);
                    }
                }
            }
            m
        };
        let expected = best(0, l) / 3.0
            + 4.0 / 9.0 * best(1, (l * l - w * w).sqrt())
            + 2.0 / 9.0 * best(2, (l * l - 4.0 * w * w).sqrt());
        let got = lane_averaged_interferer_power(&s, l).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = expected * 1e-14);

        // closer than one lane width: only the same-lane placement survives
        let close = lane_averaged_interferer_power(&s, 2.0).unwrap();
        assert_abs_diff_eq!(close, best(0, 2.0) / 3.0, epsilon = close * 1e-14);

        let sum: f64 = LANE_OFFSET_WEIGHTS.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
        assert!(lane_averaged_interferer_power(&s, 0.0).is_err());
    }

    #[test]
    fn primary_interference_defaults() {
        let s = Scenario::default();
        // first interferer at 20 + 50 + 1/(1e-3 * 0.30) m
        let spacing = primary_spacing(&s);
        assert_abs_diff_eq!(spacing, 50.0 + 1.0 / 3.0e-4, epsilon = 1e-9);
        let io = primary_interference(&s, 20.0).unwrap();
        let first = lane_averaged_interferer_power(&s, 20.0 + spacing).unwrap();
        assert!(io.terms >= 1);
        assert!(
            (io.value - first) / io.value < 1e-3,
            "term 1 should dominate"
        );
        assert!(io.value < noise_power(&s.radio) * 1e-6);
    }

    #[test]
    fn interference_vanishes_without_transmitters() {
        let mut s = Scenario::default();
        s.mac.p_t = Some(0.0);
        s.mac.p_c = Some(0.0);
        assert_eq!(primary_interference(&s, 10.0).unwrap(), SeriesSum::ZERO);
        assert_eq!(secondary_interference(&s).unwrap(), SeriesSum::ZERO);
    }

    #[test]
    fn secondary_with_fallback_is_negligible() {
        let s = Scenario::default();
        let ic = secondary_interference(&s).unwrap();
        assert!(ic.value < 1e-300 || ic.value / noise_power(&s.radio) < 1e-30);
    }

    #[test]
    fn series_terms_decay_after_settling() {
        let mut s = Scenario::default();
        s.mac.p_c = Some(0.01);
        let spacing = 1.0 / (0.01 * s.road.total_density());
        assert_abs_diff_eq!(spacing, 333.333, epsilon = 1e-3);
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let t = lane_averaged_interferer_power(&s, k as f64 * spacing).unwrap();
            assert!(t < last);
            last = t;
        }
        let brute: f64 = (1..=1000)
            .map(|k| lane_averaged_interferer_power(&s, k as f64 * spacing).unwrap())
            .sum();
        let ic = secondary_interference(&s).unwrap();
        assert!((ic.value - brute).abs() <= 1e-9 * brute);
    }

    #[test]
    fn series_cap_reports_convergence_failure() {
        let mut s = Scenario::default();
        s.mac.p_c = Some(1.0);
        s.road.lane_densities = [2.0, 2.0, 2.0];
        let err = secondary_interference(&s).unwrap_err();
        assert!(matches!(
            err,
            Error::Convergence {
                terms: SERIES_MAX_TERMS,
                ..
            }
        ));
    }

    #[test]
    fn threshold_examples() {
        let mut s = Scenario::default();
        s.mac.p_t = Some(0.0);
        s.mac.p_c = Some(0.0);
        let b = threshold_power(&s, 0.0).unwrap();
        assert_abs_diff_eq!(
            b.threshold_power,
            b.noise * 199.526_231_496_888,
            epsilon = b.noise * 1e-9
        );
        s.radio.sinr_threshold_db = 0.0;
        let b = threshold_power(&s, 0.0).unwrap();
        assert_eq!(b.threshold_power, b.noise);

        let d = threshold_power(&Scenario::default(), 0.0).unwrap();
        assert!(d.terms_used() >= 1);
        let n = noise_power(&Scenario::default().radio);
        assert_abs_diff_eq!(
            d.threshold_power,
            (n + d.primary_interference + d.secondary_interference) * db_to_linear(23.0),
            epsilon = d.threshold_power * 1e-14
        );
    }

    #[test]
    fn reach_round_trip_and_degenerate() {
        let s = no_trucks();
        let th = mean_received_power(&s, lane(2), lane(2), &geom(0.0, 100.0)).unwrap();
        let r = coverage_reach(&s, th, lane(2), lane(2)).unwrap();
        assert!((r - 100.0).abs() <= REACH_TOLERANCE_M, "{r}");

        let near =
            mean_received_power(&s, lane(2), lane(2), &geom(0.0, MIN_PROBE_DISTANCE_M)).unwrap();
        assert_eq!(
            coverage_reach(&s, near * 2.0, lane(2), lane(2)).unwrap(),
            0.0
        );
        assert_eq!(
            covered_length(&s, near * 2.0, lane(2), lane(2)).unwrap(),
            0.0
        );
        assert!(coverage_reach(&s, 0.0, lane(1), lane(1)).is_err());

        let tiny = 1e-30;
        assert_eq!(
            coverage_reach(&s, tiny, lane(1), lane(1)).unwrap(),
            MAX_REACH_M
        );
    }

    #[test]
    fn reach_residual_is_slope_bounded() {
        let s = no_trucks();
        for th_dbm in [-60.0, -70.0, -75.0, -80.0] {
            let th = dbm_to_mw(th_dbm);
            let d = coverage_reach(&s, th, lane(1), lane(1)).unwrap();
            let p = |y: f64| mean_received_power(&s, lane(1), lane(1), &geom(0.0, y)).unwrap();
            let slope = (p(d) - p(d + REACH_TOLERANCE_M)) / REACH_TOLERANCE_M;
            assert!((p(d) - th).abs() <= slope * REACH_TOLERANCE_M * (1.0 + 1e-9));
        }
    }

    #[test]
    fn narrow_beam_leaves_a_side_lobe_gap() {
        let s = no_trucks().with_beamwidth(10.0);
        let budget = threshold_power(&s, 0.0).unwrap();
        let (a, c) = (lane(1), lane(3));
        let reach = coverage_reach(&s, budget.threshold_power, a, c).unwrap();
        let covered = covered_length(&s, budget.threshold_power, a, c).unwrap();
        let entry = s.antenna.cone_entry(6.4).unwrap();
        assert!(reach > entry);
        assert!(covered < reach);
        // on the road axis there is no gap
        let r0 = coverage_reach(&s, budget.threshold_power, a, a).unwrap();
        let c0 = covered_length(&s, budget.threshold_power, a, a).unwrap();
        assert_eq!(r0, c0);
    }

    #[test]
    fn empty_road_has_no_coverage() {
        let mut s = Scenario::default();
        s.road.lane_densities = [0.0; 3];
        assert_eq!(expected_coverage(&s).unwrap().expected_receivers, 0.0);
    }

    #[test]
    fn symmetric_density_closed_form() {
        let mut s = no_trucks();
        s.road.lane_densities = [0.1; 3];
        let c = expected_coverage(&s).unwrap();
        let by = {
            let mut out = [0.0; 3];
            for (sep, slot) in out.iter_mut().enumerate() {
                let v: Vec<f64> = lane_pairs(sep)
                    .map(|(a, b)| c.covered[a.zero_based()][b.zero_based()])
                    .collect();
                assert!(
                    v.iter().all(|x| *x == v[0]),
                    "no trucks: lane pairs at equal offset agree"
                );
                *slot = v[0];
            }
            out
        };
        let closed = 0.1 * (by[0] + 4.0 / 3.0 * by[1] + 2.0 / 3.0 * by[2]);
        assert_abs_diff_eq!(c.expected_receivers, closed, epsilon = 1e-12);
    }

    #[test]
    fn receiver_weighting_switch() {
        let mut s = Scenario::default();
        s.road.lane_densities = [0.02, 0.1, 0.3];
        let tx = expected_coverage(&s).unwrap();
        s.analysis.coverage_weighting = CoverageWeighting::ReceiverLane;
        let rx = expected_coverage(&s).unwrap();
        let manual: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| s.road.lane_densities[j] * rx.covered[i][j] / 3.0)
            .sum();
        assert_abs_diff_eq!(rx.expected_receivers, manual, epsilon = 1e-12);
        assert!(tx.expected_receivers > 0.0);
    }

    #[test]
    fn coverage_monotone_in_density_without_trucks() {
        let base = no_trucks();
        let e0 = expected_coverage(&base).unwrap().expected_receivers;
        for lane_idx in 0..3 {
            let mut s = base.clone();
            s.road.lane_densities[lane_idx] += 0.05;
            assert!(expected_coverage(&s).unwrap().expected_receivers >= e0);
        }
    }

    #[test]
    fn sinr_examples() {
        let mut s = no_trucks();
        s.mac.p_t = Some(0.0);
        s.mac.p_c = Some(0.0);
        let g = geom(0.0, 100.0);
        let sinr = sinr_at(&s, &g, lane(1), lane(1)).unwrap();
        let snr = mw_to_dbm(received_power_k(&s, 0, &g).unwrap()) - noise_power_dbm(&s.radio);
        assert_abs_diff_eq!(sinr, snr, epsilon = 1e-9);
        assert_abs_diff_eq!(sinr, -65.14 + 94.99, epsilon = 0.01);
        // default MAC: interference is far below the noise floor
        let with_mac = sinr_at(&no_trucks(), &g, lane(1), lane(1)).unwrap();
        assert!(sinr - with_mac < 1e-3);
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let v = sinr_at(&s, &geom(0.0, i as f64 * 5.0), lane(2), lane(2)).unwrap();
            assert!(v <= last);
            last = v;
        }
    }
}
