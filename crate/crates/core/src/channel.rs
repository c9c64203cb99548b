//! Physical-layer primitives: blocker-dependent log-distance path loss,
//! cone-plus-sphere antenna gains, lobe membership and per-blocker-count
//! received power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::units::{db_to_linear, dbm_to_mw};

/// Highest blocker count with its own path-loss row.
pub const MAX_BLOCKER_ROW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossRow {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Loss at 1 m, dB.
    pub beta_db: f64,
}

/// Per-blocker-count path-loss parameters for 0, 1 and 2 blockers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossTable {
    pub rows: [PathLossRow; 3],
    pub atmospheric_db_per_km: f64,
}

impl Default for PathLossTable {
    fn default() -> Self {
        PathLossTable {
            rows: [
                PathLossRow {
                    alpha: 1.77,
                    beta_db: 70.0,
                },
                PathLossRow {
                    alpha: 1.71,
                    beta_db: 78.6,
                },
                PathLossRow {
                    alpha: 0.635,
                    beta_db: 115.0,
                },
            ],
            atmospheric_db_per_km: 15.0,
        }
    }
}

impl PathLossTable {
    pub(crate) fn validate(&self) -> Result<()> {
        for (k, row) in self.rows.iter().enumerate() {
            if !(row.alpha.is_finite() && row.alpha > 0.0) {
                return Err(Error::invalid(
                    format!("path_loss.rows[{k}].alpha"),
                    "must be > 0",
                ));
            }
            if !row.beta_db.is_finite() {
                return Err(Error::invalid(
                    format!("path_loss.rows[{k}].beta_db"),
                    "must be finite",
                ));
            }
        }
        if !self.rows.windows(2).all(|w| w[0].beta_db < w[1].beta_db) {
            return Err(Error::invalid(
                "path_loss.rows",
                "beta_db must strictly increase with the blocker count",
            ));
        }
        if !(self.atmospheric_db_per_km.is_finite() && self.atmospheric_db_per_km > 0.0) {
            return Err(Error::invalid(
                "path_loss.atmospheric_db_per_km",
                "must be > 0",
            ));
        }
        Ok(())
    }

    fn row(&self, blockers: usize) -> Result<&PathLossRow> {
        self.rows.get(blockers).ok_or_else(|| {
            Error::domain(format!(
                "no path-loss row for {blockers} blockers (0, 1 or 2)"
            ))
        })
    }
}

/// Cone-plus-sphere antenna: a conical main lobe of full angle
/// `beamwidth_deg` with gain G1 and an isotropic sphere of gain
/// G2 = `side_main_ratio` * G1 elsewhere. The gains are normalized so the
/// total radiated power does not depend on the beamwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaPattern {
    pub beamwidth_deg: f64,
    pub side_main_ratio: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            beamwidth_deg: 30.0,
            side_main_ratio: 0.1,
        }
    }
}

impl AntennaPattern {
    pub fn new(beamwidth_deg: f64, side_main_ratio: f64) -> Result<Self> {
        let p = AntennaPattern {
            beamwidth_deg,
            side_main_ratio,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return Err(Error::domain(format!(
                "beamwidth must be in (0, 360] degrees, got {}",
                self.beamwidth_deg
            )));
        }
        if !(self.side_main_ratio > 0.0 && self.side_main_ratio <= 1.0) {
            return Err(Error::domain(format!(
                "side/main lobe ratio must be in (0, 1], got {}",
                self.side_main_ratio
            )));
        }
        Ok(())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Domain(msg) if msg.starts_with("beamwidth") => {
                Error::invalid("antenna.beamwidth_deg", msg)
            }
            Error::Domain(msg) => Error::invalid("antenna.side_main_ratio", msg),
            other => other,
        })
    }

    /// Main-lobe half angle in radians.
    pub fn half_angle(&self) -> f64 {
        (self.beamwidth_deg / 2.0).to_radians()
    }

    /// `(G1, G2)`, linear.
    pub fn gains(&self) -> (f64, f64) {
        let c = self.half_angle().cos();
        let k = self.side_main_ratio;
        let g1 = 2.0 / (1.0 - c + k * (1.0 + c));
        (g1, k * g1)
    }

    pub fn main_gain(&self) -> f64 {
        self.gains().0
    }

    pub fn side_gain(&self) -> f64 {
        self.gains().1
    }

    pub fn gain(&self, lobe: Lobe) -> f64 {
        match lobe {
            Lobe::Main => self.main_gain(),
            Lobe::Side => self.side_gain(),
        }
    }

    /// Along-road displacement at which a forward link with cross-road
    /// offset `dx` enters the main cone. `None` when every forward
    /// displacement is already inside it (`dx == 0`, or a cone of 180
    /// degrees or wider).
    pub fn cone_entry(&self, dx: f64) -> Option<f64> {
        let half = self.half_angle();
        if dx <= 0.0 || half >= std::f64::consts::FRAC_PI_2 {
            None
        } else {
            Some(dx / half.tan())
        }
    }
}

/// `(G1, G2)` of the cone-plus-sphere pattern.
pub fn antenna_gains(beamwidth_deg: f64, side_main_ratio: f64) -> Result<(f64, f64)> {
    Ok(AntennaPattern::new(beamwidth_deg, side_main_ratio)?.gains())
}

/// Relative placement of a receiver with respect to a transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Cross-road displacement, >= 0.
    pub dx: f64,
    /// Along-road displacement, positive when the receiver is ahead.
    pub dy: f64,
}

impl LinkGeometry {
    pub fn new(dx: f64, dy: f64) -> Result<Self> {
        if !(dx.is_finite() && dy.is_finite()) {
            return Err(Error::domain("link displacement must be finite"));
        }
        if dx < 0.0 {
            return Err(Error::domain(format!(
                "cross-road displacement must be >= 0, got {dx}"
            )));
        }
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::domain(
                "transmitter and receiver coincide (zero distance)",
            ));
        }
        Ok(LinkGeometry { dx, dy })
    }

    pub fn distance(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Angle between the forward road axis and the link, in `[0, π]`.
    pub fn off_axis_angle(&self) -> f64 {
        self.dx.atan2(self.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lobe {
    Main,
    Side,
}

/// Which antenna of a vehicle serves the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AntennaRole {
    /// Transmitters radiate from the forward-facing antenna.
    TransmitterFront,
    /// Receivers listen on the rearward-facing antenna.
    ReceiverRear,
}

/// Lobe through which a link leaves (or enters) an antenna.
///
/// The front antenna points along +y and the receiver's rear antenna
/// along -y, so with `dy` measured from transmitter to receiver both ends
/// see the same off-boresight angle `atan2(dx, dy)`. The cone is closed:
/// an angle of exactly α/2 is in the main lobe.
pub fn lobe_membership(pattern: &AntennaPattern, geom: &LinkGeometry, role: AntennaRole) -> Lobe {
    let theta = match role {
        AntennaRole::TransmitterFront | AntennaRole::ReceiverRear => geom.off_axis_angle(),
    };
    // A relative slack absorbs rounding when a geometry sits on the cone edge.
    if theta <= pattern.half_angle() * (1.0 + 1e-12) {
        Lobe::Main
    } else {
        Lobe::Side
    }
}

/// Path loss in dB across a link with `blockers` blockers.
pub fn path_loss_db(table: &PathLossTable, blockers: usize, geom: &LinkGeometry) -> Result<f64> {
    let row = table.row(blockers)?;
    let d = geom.distance();
    if !(d > 0.0) {
        return Err(Error::domain("path loss requires a positive distance"));
    }
    Ok(path_loss_db_at(row, table.atmospheric_db_per_km, d))
}

#[inline]
pub(crate) fn path_loss_db_at(row: &PathLossRow, atmospheric_db_per_km: f64, d: f64) -> f64 {
    10.0 * row.alpha * d.log10() + row.beta_db + atmospheric_db_per_km * d / 1000.0
}

/// Received power in mW over a link with `blockers` blockers, with both
/// ends' lobes chosen from the geometry.
pub fn received_power_k(scenario: &Scenario, blockers: usize, geom: &LinkGeometry) -> Result<f64> {
    let lobe = lobe_membership(&scenario.antenna, geom, AntennaRole::TransmitterFront);
    received_power_through(scenario, blockers, geom, lobe)
}

/// Received power with the lobe pair forced, for evaluating one branch of
/// the piecewise power curve.
pub(crate) fn received_power_through(
    scenario: &Scenario,
    blockers: usize,
    geom: &LinkGeometry,
    lobe: Lobe,
) -> Result<f64> {
    let pl = path_loss_db(&scenario.path_loss, blockers, geom)?;
    let g = scenario.antenna.gain(lobe);
    Ok(dbm_to_mw(scenario.radio.tx_power_dbm) * g * g / db_to_linear(pl))
}
