//! Closed-form blockage: the Poisson law of the number of trucks/buses
//! cutting a link, and the resulting unblocked / one-blocker probabilities.
//!
//! Trucks on lane `i` form a Poisson process of intensity
//! `r_tall * λ_i`. For a link between different lanes, a truck on either
//! endpoint lane blocks when its center falls in a window of length
//! `d_L1 = (w2/2)(dy/dx)`, and a truck on a lane in between when it falls
//! in `d_L2 = w2 (dy/dx) + l2`. On a shared lane the window is `dy - l2`.
//! The total count is Poisson with the summed mean.

use crate::channel::LinkGeometry;
use crate::error::{Error, Result};
use crate::scenario::{Lane, Scenario, VehicleClass};

/// Window on an endpoint's own lane where a truck center blocks the link.
pub fn blocker_window_same_side(geom: &LinkGeometry, tall: &VehicleClass) -> Result<f64> {
    check_cross_lane(geom)?;
    Ok(tall.width / 2.0 * (geom.dy / geom.dx))
}

/// Window on a lane strictly between the endpoints.
pub fn blocker_window_between(geom: &LinkGeometry, tall: &VehicleClass) -> Result<f64> {
    check_cross_lane(geom)?;
    Ok(tall.width * (geom.dy / geom.dx) + tall.length)
}

fn check_cross_lane(geom: &LinkGeometry) -> Result<()> {
    if !(geom.dx > 0.0) {
        return Err(Error::domain(
            "blocker windows need a cross-lane link (dx > 0)",
        ));
    }
    if !(geom.dy > 0.0) {
        return Err(Error::domain(
            "blocker windows need the receiver ahead (dy > 0)",
        ));
    }
    Ok(())
}

#[inline]
pub fn poisson_pmf(mean: f64, k: u32) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    // log-space keeps large k finite
    let ln = k as f64 * mean.ln() - mean - ln_factorial(k);
    ln.exp()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockerDistribution {
    /// Poisson mean of the number of trucks/buses between the endpoints.
    pub mean: f64,
    /// No truck between the endpoints.
    pub p0: f64,
    /// Exactly one truck between the endpoints.
    pub p1: f64,
    /// Link unblocked: no truck in between, or both endpoints are trucks
    /// whose rooftop antennas clear the blockers.
    pub p_b0: f64,
    /// Link blocked by exactly one truck.
    pub p_b1: f64,
}

impl BlockerDistribution {
    pub fn from_mean(mean: f64, tall_fraction: f64) -> Self {
        let p0 = (-mean).exp();
        let p1 = mean * p0;
        let both_tall = tall_fraction * tall_fraction;
        BlockerDistribution {
            mean,
            p0,
            p1,
            p_b0: p0 + (1.0 - p0) * both_tall,
            p_b1: p1 * (1.0 - both_tall),
        }
    }

    /// Probability of exactly `k` trucks between the endpoints.
    pub fn pmf(&self, k: u32) -> f64 {
        poisson_pmf(self.mean, k)
    }
}

/// Poisson mean of the blocker count on a link from `tx` to `rx` with
/// along-road displacement `dy`.
pub fn blocker_mean(scenario: &Scenario, tx: Lane, rx: Lane, dy: f64) -> Result<f64> {
    if !(dy > 0.0 && dy.is_finite()) {
        return Err(Error::domain(format!(
            "along-road displacement must be > 0, got {dy}"
        )));
    }
    let road = &scenario.road;
    let r_tall = road.tall_fraction;
    if tx == rx {
        let window = (dy - scenario.tall.length).max(0.0);
        return Ok(r_tall * window * road.density(tx));
    }
    let geom = LinkGeometry::new(road.lane_offset(tx, rx), dy)?;
    let own =
        blocker_window_same_side(&geom, &scenario.tall)? * (road.density(tx) + road.density(rx));
    let between_density: f64 = tx.between(rx).map(|l| road.density(l)).sum();
    let between = if between_density > 0.0 {
        blocker_window_between(&geom, &scenario.tall)? * between_density
    } else {
        0.0
    };
    Ok(r_tall * (own + between))
}

pub fn blocker_count_distribution(
    scenario: &Scenario,
    tx: Lane,
    rx: Lane,
    dy: f64,
) -> Result<BlockerDistribution> {
    let mean = blocker_mean(scenario, tx, rx, dy)?;
    Ok(BlockerDistribution::from_mean(
        mean,
        scenario.road.tall_fraction,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lane(i: usize) -> Lane {
        Lane::new(i).unwrap()
    }

    fn geom(dx: f64, dy: f64) -> LinkGeometry {
        LinkGeometry::new(dx, dy).unwrap()
    }

    #[test]
    fn window_examples() {
        let t = VehicleClass::TRUCK;
        assert_abs_diff_eq!(
            blocker_window_same_side(&geom(3.2, 50.0), &t).unwrap(),
            20.3125,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            blocker_window_same_side(&geom(7.0, 7.0), &t).unwrap(),
            1.3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            blocker_window_same_side(&geom(6.4, 50.0), &t).unwrap(),
            10.15625,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            blocker_window_between(&geom(6.4, 50.0), &t).unwrap(),
            33.3125,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            blocker_window_between(&geom(6.4, 100.0), &t).unwrap(),
            53.625,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            blocker_window_between(&geom(6.4, 1e-9), &t).unwrap(),
            13.0,
            epsilon = 1e-8
        );
        assert!(blocker_window_same_side(&geom(0.0, 10.0), &t).is_err());
        assert!(blocker_window_between(&geom(0.0, 10.0), &t).is_err());
    }

    #[test]
    fn no_trucks_no_blockage() {
        let mut s = Scenario::default();
        s.road.tall_fraction = 0.0;
        for (a, b) in [(1, 1), (1, 2), (1, 3), (3, 2)] {
            let d = blocker_count_distribution(&s, lane(a), lane(b), 80.0).unwrap();
            assert_eq!(d.p_b0, 1.0);
            assert_eq!(d.p_b1, 0.0);
        }
    }

    #[test]
    fn same_lane_example() {
        // intermediate traffic, middle lane: 0.1 * (50 - 13) * 0.10 = 0.37
        let s = Scenario::default();
        let d = blocker_count_distribution(&s, lane(2), lane(2), 50.0).unwrap();
        assert_abs_diff_eq!(d.mean, 0.37, epsilon = 1e-12);
        assert_abs_diff_eq!(d.p0, (-0.37f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.p0, 0.6907, epsilon = 1e-4);
        assert_abs_diff_eq!(d.p_b0, 0.6938, epsilon = 1e-4);
        assert_abs_diff_eq!(d.p_b1, 0.37 * (-0.37f64).exp() * 0.99, epsilon = 1e-15);
    }

    #[test]
    fn same_lane_too_short_for_a_truck() {
        let s = Scenario::default();
        for dy in [0.5, 5.0, 13.0] {
            let d = blocker_count_distribution(&s, lane(1), lane(1), dy).unwrap();
            assert_eq!(d.mean, 0.0);
            assert_eq!(d.p_b0, 1.0);
        }
    }

    #[test]
    fn cross_lane_means() {
        let s = Scenario::default();
        let lam = s.road.lane_densities;
        // adjacent lanes: no lane in between
        let m = blocker_mean(&s, lane(1), lane(2), 50.0).unwrap();
        assert_abs_diff_eq!(m, 0.1 * 20.3125 * (lam[0] + lam[1]), epsilon = 1e-14);
        // two-lane separation: own lanes plus lane 2
        let m = blocker_mean(&s, lane(3), lane(1), 50.0).unwrap();
        assert_abs_diff_eq!(
            m,
            0.1 * (10.15625 * (lam[0] + lam[2]) + 33.3125 * lam[1]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn invalid_arguments() {
        let s = Scenario::default();
        assert!(blocker_mean(&s, lane(1), lane(1), 0.0).is_err());
        assert!(blocker_mean(&s, lane(1), lane(2), -3.0).is_err());
    }

    #[test]
    fn pmf_normalizes() {
        for mean in [0.0, 0.37, 2.5, 10.0] {
            let total: f64 = (0..=50).map(|k| poisson_pmf(mean, k)).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn unblocked_probability_non_increasing() {
        let s = Scenario::default();
        for (a, b) in [(1, 1), (2, 2), (1, 2), (2, 3), (1, 3)] {
            let mut last = f64::INFINITY;
            for i in 1..=400 {
                let dy = i as f64 * 0.5;
                let p = blocker_count_distribution(&s, lane(a), lane(b), dy)
                    .unwrap()
                    .p_b0;
                assert!(p <= last + 1e-15, "lanes {a}->{b} dy {dy}");
                last = p;
            }
        }
    }

    /// Explicit convolution of the own-lane and between-lane Poisson laws,
    /// written independently of the summed-mean shortcut.
    fn convolved_pmf(s: &Scenario, tx: Lane, rx: Lane, dy: f64, k: u32) -> f64 {
        let r = s.road.tall_fraction;
        let lam = s.road.lane_densities;
        let dx = (tx.index() as f64 - rx.index() as f64).abs() * s.road.lane_width;
        let d_l1 = s.tall.width / 2.0 * dy / dx;
        let d_l2 = s.tall.width * dy / dx + s.tall.length;
        let (lo, hi) = (tx.index().min(rx.index()), tx.index().max(rx.index()));
        let between: f64 = (lo + 1..hi).map(|i| lam[i - 1]).sum();
        let m1 = r * d_l1 * (lam[tx.index() - 1] + lam[rx.index() - 1]);
        let m2 = r * d_l2 * between;
        let pois = |m: f64, n: u32| -> f64 {
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            m.powi(n as i32) / fact * (-m).exp()
        };
        (0..=k).map(|i| pois(m1, i) * pois(m2, k - i)).sum()
    }

    #[test]
    fn convolution_identity() {
        let mut s = Scenario::default();
        s.road.tall_fraction = 0.3;
        for (a, b) in [(1, 2), (2, 3), (1, 3), (3, 1)] {
            for i in 1..=25 {
                let dy = i as f64 * 8.0;
                let d = blocker_count_distribution(&s, lane(a), lane(b), dy).unwrap();
                for k in 0..=10 {
                    let oracle = convolved_pmf(&s, lane(a), lane(b), dy, k);
                    assert!((d.pmf(k) - oracle).abs() <= 1e-12, "{a}->{b} dy {dy} k {k}");
                }
            }
        }
    }
}
