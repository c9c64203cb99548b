//! Scenario parameters: road and traffic, vehicle classes, radio, MAC,
//! antenna and path-loss tables, plus the knobs of the analysis and the
//! simulator.
//!
//! Scenarios are read from TOML documents whose sections mirror the type
//! tree. Every key is optional and falls back to the highway defaults
//! (60 GHz, 23 dBm, 30 degree beams, three 3.2 m lanes, 10 % trucks).
//! Unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{AntennaPattern, PathLossTable};
use crate::error::{Error, Result};

/// Number of lanes the closed-form lane weights are written for.
pub const LANE_COUNT: usize = 3;

/// Environment variable consulted by the CLI for a default config path.
pub const CONFIG_ENV: &str = "MMV2V_CONFIG";

/// A lane index, 1-based, in `1..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Lane(u8);

impl Lane {
    pub const ALL: [Lane; LANE_COUNT] = [Lane(1), Lane(2), Lane(3)];

    pub fn new(index: usize) -> Result<Self> {
        if (1..=LANE_COUNT).contains(&index) {
            Ok(Lane(index as u8))
        } else {
            Err(Error::domain(format!(
                "lane index must be in 1..=3, got {index}"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position, for indexing density arrays.
    pub fn zero_based(self) -> usize {
        self.0 as usize - 1
    }

    /// Number of lanes between `self` and `other` (0 for the same lane).
    pub fn separation(self, other: Lane) -> usize {
        self.0.abs_diff(other.0) as usize
    }

    /// Lanes strictly between `self` and `other`.
    pub fn between(self, other: Lane) -> impl Iterator<Item = Lane> {
        let (lo, hi) = if self.0 <= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        (lo + 1..hi).map(Lane)
    }
}

impl TryFrom<usize> for Lane {
    type Error = Error;
    fn try_from(v: usize) -> Result<Self> {
        Lane::new(v)
    }
}

impl From<Lane> for usize {
    fn from(l: Lane) -> usize {
        l.index()
    }
}

impl fmt::Display for Lane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleClass {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub antenna_height: f64,
}

impl VehicleClass {
    pub const PASSENGER: VehicleClass = VehicleClass {
        length: 5.0,
        width: 2.0,
        height: 1.6,
        antenna_height: 1.6,
    };

    pub const TRUCK: VehicleClass = VehicleClass {
        length: 13.0,
        width: 2.6,
        height: 3.0,
        antenna_height: 3.0,
    };

    fn validate(&self, section: &str) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("antenna_height", self.antenna_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    format!("{section}.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Table of per-lane densities for the three traffic conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DensityRow {
    Low,
    Intermediate,
    High,
}

impl DensityRow {
    pub const ALL: [DensityRow; 3] = [DensityRow::Low, DensityRow::Intermediate, DensityRow::High];

    /// Vehicles per meter on lanes 1, 2, 3.
    pub fn densities(self) -> [f64; LANE_COUNT] {
        match self {
            DensityRow::Low => [0.05, 0.07, 0.10],
            DensityRow::Intermediate => [0.07, 0.10, 0.13],
            DensityRow::High => [0.09, 0.13, 0.17],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DensityRow::Low => "low",
            DensityRow::Intermediate => "intermediate",
            DensityRow::High => "high",
        }
    }
}

impl fmt::Display for DensityRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DensityRow {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "sparse" => Ok(DensityRow::Low),
            "intermediate" | "mid" | "medium" => Ok(DensityRow::Intermediate),
            "high" | "dense" => Ok(DensityRow::High),
            other => Err(Error::domain(format!(
                "unknown density row `{other}` (expected low, intermediate or high)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadModel {
    /// Lane width W in meters.
    pub lane_width: f64,
    pub lane_count: usize,
    /// Vehicles per meter on lanes 1, 2, 3.
    pub lane_densities: [f64; LANE_COUNT],
    /// Fraction of trucks/buses among all vehicles.
    pub tall_fraction: f64,
}

impl Default for RoadModel {
    fn default() -> Self {
        RoadModel {
            lane_width: 3.2,
            lane_count: LANE_COUNT,
            lane_densities: DensityRow::Intermediate.densities(),
            tall_fraction: 0.1,
        }
    }
}

impl RoadModel {
    pub fn density(&self, lane: Lane) -> f64 {
        self.lane_densities[lane.zero_based()]
    }

    pub fn total_density(&self) -> f64 {
        self.lane_densities.iter().sum()
    }

    /// Cross-road center-to-center displacement between two lanes.
    pub fn lane_offset(&self, a: Lane, b: Lane) -> f64 {
        a.separation(b) as f64 * self.lane_width
    }

    fn validate(&self) -> Result<()> {
        if !(self.lane_width.is_finite() && self.lane_width > 0.0) {
            return Err(Error::invalid(
                "road.lane_width",
                format!("must be > 0, got {}", self.lane_width),
            ));
        }
        if self.lane_count != LANE_COUNT {
            return Err(Error::invalid(
                "road.lane_count",
                format!(
                    "only {LANE_COUNT} lanes are supported, got {}",
                    self.lane_count
                ),
            ));
        }
        for (i, &d) in self.lane_densities.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::invalid(
                    "road.lane_densities",
                    format!("lane {} density must be >= 0, got {d}", i + 1),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.tall_fraction) {
            return Err(Error::invalid(
                "road.tall_fraction",
                format!("must be in [0, 1], got {}", self.tall_fraction),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    /// Carrier frequency. Descriptive only: the atmospheric term of the
    /// path-loss model is the 60 GHz value regardless.
    pub frequency_ghz: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub sinr_threshold_db: f64,
    pub carrier_sense_range_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            frequency_ghz: 60.0,
            tx_power_dbm: 23.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 6.0,
            sinr_threshold_db: 23.0,
            carrier_sense_range_m: 50.0,
        }
    }
}

impl RadioParams {
    fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::invalid(
                "radio.bandwidth_hz",
                format!("must be > 0, got {}", self.bandwidth_hz),
            ));
        }
        if !(self.carrier_sense_range_m.is_finite() && self.carrier_sense_range_m >= 0.0) {
            return Err(Error::invalid(
                "radio.carrier_sense_range_m",
                format!("must be >= 0, got {}", self.carrier_sense_range_m),
            ));
        }
        for (name, v) in [
            ("radio.tx_power_dbm", self.tx_power_dbm),
            ("radio.noise_figure_db", self.noise_figure_db),
            ("radio.sinr_threshold_db", self.sinr_threshold_db),
            ("radio.frequency_ghz", self.frequency_ghz),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    pub packet_interval_s: f64,
    pub tx_latency_s: f64,
    pub packet_length_bytes: u32,
    pub symbol_duration_s: f64,
    /// Probability that a node transmits at a given instant. When absent,
    /// [`default_mac_probabilities`] supplies it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_t: Option<f64>,
    /// Probability of a concurrent transmission within carrier-sense range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_c: Option<f64>,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            packet_interval_s: 0.1,
            tx_latency_s: 100e-6,
            packet_length_bytes: 200,
            symbol_duration_s: 6.4e-6,
            p_t: None,
            p_c: None,
        }
    }
}

impl MacParams {
    fn validate(&self) -> Result<()> {
        if !(self.packet_interval_s.is_finite() && self.packet_interval_s > 0.0) {
            return Err(Error::invalid("mac.packet_interval_s", "must be > 0"));
        }
        if !(self.tx_latency_s.is_finite() && self.tx_latency_s > 0.0) {
            return Err(Error::invalid("mac.tx_latency_s", "must be > 0"));
        }
        if self.tx_latency_s > self.packet_interval_s {
            return Err(Error::invalid(
                "mac.tx_latency_s",
                "must not exceed mac.packet_interval_s",
            ));
        }
        for (name, p) in [("mac.p_t", self.p_t), ("mac.p_c", self.p_c)] {
            if let Some(p) = p {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(
                        name,
                        format!("must be a probability, got {p}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Fallback transmit probabilities when none are configured.
///
/// `p_t` is the channel occupancy of one node, latency over interval,
/// ignoring backoff. `p_c` treats two nodes as independently picking the
/// same instant, `p_t²`. Both are first-order estimates meant to be
/// replaced by values from a proper MAC model when available.
pub fn default_mac_probabilities(mac: &MacParams) -> Result<(f64, f64)> {
    if !(mac.packet_interval_s > 0.0 && mac.tx_latency_s > 0.0) {
        return Err(Error::domain(
            "packet interval and transmission latency must be > 0",
        ));
    }
    let p_t = (mac.tx_latency_s / mac.packet_interval_s).min(1.0);
    Ok((p_t, p_t * p_t))
}

/// How the closed-form coverage weights each lane's receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageWeighting {
    /// Multiply each transmitter-lane group by the transmitter lane's
    /// density, exactly as the closed form is usually written.
    #[default]
    TransmitterLane,
    /// Multiply each receiver by its own lane's density.
    ReceiverLane,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub coverage_weighting: CoverageWeighting,
}

/// Carrier-sense thinning rule used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Thinning {
    /// A contender transmits unless an already-transmitting vehicle with a
    /// smaller mark lies within carrier-sense range.
    #[default]
    Sequential,
    /// Classic Matérn type II: a contender is silenced by any contender
    /// with a smaller mark within range, whether or not that one transmits.
    #[serde(rename = "matern-ii")]
    MaternII,
}

/// Which tall vehicles count as blockers of a link in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockerRule {
    /// Placement windows of the closed-form model: on the endpoints' own
    /// lanes a truck blocks when its center falls where the link runs over
    /// that lane's truck body strip; on lanes in between, when its body
    /// rectangle intersects the link; on a shared lane, when its body fits
    /// entirely between the endpoints.
    #[default]
    Analytic,
    /// Exact rectangle-segment intersection on every lane.
    Footprint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub road_length_m: f64,
    pub thinning: Thinning,
    pub blocker_rule: BlockerRule,
    /// Minimum bumper-to-bumper gap enforced per lane; 0 keeps the pure
    /// Poisson drop.
    pub min_gap_m: f64,
    pub max_retries: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            road_length_m: 2000.0,
            thinning: Thinning::default(),
            blocker_rule: BlockerRule::default(),
            min_gap_m: 0.0,
            max_retries: 1000,
        }
    }
}

impl SimParams {
    fn validate(&self) -> Result<()> {
        if !(self.road_length_m.is_finite() && self.road_length_m > 0.0) {
            return Err(Error::invalid("sim.road_length_m", "must be > 0"));
        }
        if !(self.min_gap_m.is_finite() && self.min_gap_m >= 0.0) {
            return Err(Error::invalid("sim.min_gap_m", "must be >= 0"));
        }
        if self.max_retries == 0 {
            return Err(Error::invalid("sim.max_retries", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub road: RoadModel,
    pub passenger: VehicleClass,
    pub tall: VehicleClass,
    pub radio: RadioParams,
    pub mac: MacParams,
    pub antenna: AntennaPattern,
    pub path_loss: PathLossTable,
    pub analysis: AnalysisOptions,
    pub sim: SimParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            road: RoadModel::default(),
            passenger: VehicleClass::PASSENGER,
            tall: VehicleClass::TRUCK,
            radio: RadioParams::default(),
            mac: MacParams::default(),
            antenna: AntennaPattern::default(),
            path_loss: PathLossTable::default(),
            analysis: AnalysisOptions::default(),
            sim: SimParams::default(),
        }
    }
}

impl Scenario {
    /// Parse and validate a scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_with_overrides::<&str>(text, &[])
    }

    /// Parse a document, apply `section.key=value` overrides, and validate.
    ///
    /// Override values are parsed as TOML values; anything that does not
    /// parse (e.g. `sequential`) is taken as a bare string.
    pub fn from_toml_str_with_overrides<S: AsRef<str>>(
        text: &str,
        overrides: &[S],
    ) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        // Layer the document over the defaults so partially specified
        // sections (e.g. only `tall.height`) keep their other fields.
        let mut doc: toml::Table = toml::from_str(&Scenario::default().to_toml_string())
            .expect("default scenario round-trips through TOML");
        merge(&mut doc, user);
        for o in overrides {
            apply_override(&mut doc, o.as_ref())?;
        }
        let scenario: Scenario = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.passenger.validate("passenger")?;
        self.tall.validate("tall")?;
        self.radio.validate()?;
        self.mac.validate()?;
        self.antenna.validate()?;
        self.path_loss.validate()?;
        self.sim.validate()?;
        if self.tall.height <= self.passenger.antenna_height {
            return Err(Error::invalid(
                "tall.height",
                format!(
                    "trucks ({} m) must be taller than passenger antennas ({} m) for blockage to exist",
                    self.tall.height, self.passenger.antenna_height
                ),
            ));
        }
        Ok(())
    }

    /// Effective `(p_t, p_c)`: configured values, else the fallbacks.
    pub fn transmit_probabilities(&self) -> (f64, f64) {
        let (pt, pc) = default_mac_probabilities(&self.mac).unwrap_or((0.0, 0.0));
        (self.mac.p_t.unwrap_or(pt), self.mac.p_c.unwrap_or(pc))
    }

    pub fn with_density_row(mut self, row: DensityRow) -> Self {
        self.road.lane_densities = row.densities();
        self
    }

    pub fn with_beamwidth(mut self, beamwidth_deg: f64) -> Self {
        self.antenna.beamwidth_deg = beamwidth_deg;
        self
    }
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Parse(format!(
            "override `{spec}` is not of the form section.key=value"
        ))
    })?;
    let path = path.trim();
    let raw = raw.trim();
    let value = parse_override_value(raw);
    let mut keys: Vec<&str> = path.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Parse(format!(
            "override key `{path}` has an empty segment"
        )));
    }
    let last = keys.pop().expect("split yields at least one segment");
    let mut table = doc;
    for key in keys {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override `{path}`: `{key}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_table_defaults() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s.radio.tx_power_dbm, 23.0);
        assert_eq!(s.antenna.beamwidth_deg, 30.0);
        assert_eq!(s.antenna.side_main_ratio, 0.1);
        assert_eq!(s.radio.carrier_sense_range_m, 50.0);
        assert_eq!(s.road.lane_width, 3.2);
        assert_eq!(s.road.tall_fraction, 0.1);
        assert_eq!(s.radio.bandwidth_hz, 20e6);
        assert_eq!(s.radio.noise_figure_db, 6.0);
        assert_eq!(s.passenger, VehicleClass::PASSENGER);
        assert_eq!(s.tall, VehicleClass::TRUCK);
        assert_eq!(s.path_loss.rows[1].alpha, 1.71);
        assert_eq!(s.path_loss.rows[2].beta_db, 115.0);
        assert_eq!(s, Scenario::default());
    }

    #[test]
    fn tall_fraction_out_of_range_names_field() {
        let err =
            Scenario::from_toml_str_with_overrides("", &["road.tall_fraction=1.5"]).unwrap_err();
        match err {
            Error::Invalid { field, .. } => assert_eq!(field, "road.tall_fraction"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn density_override() {
        let s =
            Scenario::from_toml_str_with_overrides("", &["road.lane_densities=[0.07, 0.10, 0.13]"])
                .unwrap();
        assert_eq!(s.road.lane_densities, DensityRow::Intermediate.densities());
        let s = Scenario::from_toml_str("[road]\nlane_densities = [0.09, 0.13, 0.17]\n").unwrap();
        assert_eq!(s.road.lane_densities, DensityRow::High.densities());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Scenario::from_toml_str("[road]\nlanes = 4\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            Scenario::from_toml_str("[bogus]\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            Scenario::from_toml_str("road = ["),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn lane_count_enforced() {
        let err = Scenario::from_toml_str("[road]\nlane_count = 4\n").unwrap_err();
        assert!(matches!(err, Error::Invalid { ref field, .. } if field == "road.lane_count"));
    }

    #[test]
    fn trucks_must_overtop_passenger_antennas() {
        let err = Scenario::from_toml_str_with_overrides("", &["tall.height=1.5"]).unwrap_err();
        assert!(err.is_validation(), "{err:?}");
        assert!(matches!(err, Error::Invalid { ref field, .. } if field == "tall.height"));
    }

    #[test]
    fn string_overrides() {
        let s = Scenario::from_toml_str_with_overrides(
            "",
            &["sim.thinning=matern-ii", "sim.blocker_rule=\"footprint\""],
        )
        .unwrap();
        assert_eq!(s.sim.thinning, Thinning::MaternII);
        assert_eq!(s.sim.blocker_rule, BlockerRule::Footprint);
        assert!(Scenario::from_toml_str_with_overrides("", &["radio"]).is_err());
        assert!(Scenario::from_toml_str_with_overrides("", &["radio.tx_power_dbm.x=1"]).is_err());
    }

    #[test]
    fn mac_fallbacks() {
        let (pt, pc) = default_mac_probabilities(&MacParams::default()).unwrap();
        assert!((pt - 1.0e-3).abs() < 1e-15);
        assert!((pc - 1.0e-6).abs() < 1e-18);
        let saturated = MacParams {
            packet_interval_s: 0.02,
            tx_latency_s: 0.02,
            ..MacParams::default()
        };
        assert_eq!(default_mac_probabilities(&saturated).unwrap().0, 1.0);

        let s = Scenario::from_toml_str_with_overrides("", &["mac.p_t=0.2"]).unwrap();
        assert_eq!(s.transmit_probabilities(), (0.2, 1.0e-6));
    }

    #[test]
    fn lanes() {
        assert!(Lane::new(0).is_err());
        assert!(Lane::new(4).is_err());
        let (a, c) = (Lane::new(1).unwrap(), Lane::new(3).unwrap());
        assert_eq!(a.separation(c), 2);
        assert_eq!(
            a.between(c).collect::<Vec<_>>(),
            vec![Lane::new(2).unwrap()]
        );
        assert_eq!(c.between(a).count(), 1);
        assert_eq!(a.between(a).count(), 0);
    }
}
