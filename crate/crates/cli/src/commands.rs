//! The experiments behind each subcommand. Every command first computes
//! typed results, then renders them as a [`Table`].

use clap::ValueEnum;
use rayon::prelude::*;

use mmv2v_core::analysis::{self, expected_coverage, transmitter_density};
use mmv2v_core::blockage::blocker_count_distribution;
use mmv2v_core::channel::{path_loss_db, LinkGeometry};
use mmv2v_core::sim::{self, ecdf, CampaignSummary, TrialStats};
use mmv2v_core::{DensityRow, Lane, Scenario};

use crate::error::{CliError, CliResult};
use crate::output::{num, Schema, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Engine {
    #[default]
    Analytic,
    Simulation,
    Both,
}

impl Engine {
    pub fn analytic(self) -> bool {
        matches!(self, Engine::Analytic | Engine::Both)
    }

    pub fn simulation(self) -> bool {
        matches!(self, Engine::Simulation | Engine::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Simulation => "simulation",
            Engine::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub trials: usize,
    pub engine: Engine,
}

impl RunOptions {
    fn check(&self) -> CliResult<()> {
        if self.engine.simulation() && self.trials == 0 {
            return Err(CliError::config("simulation needs --trials >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParameter {
    Beamwidth,
    CarrierSenseRange,
    DensityRow,
    SinrThreshold,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Beamwidth => "beamwidth",
            SweepParameter::CarrierSenseRange => "carrier_sense_range",
            SweepParameter::DensityRow => "density_row",
            SweepParameter::SinrThreshold => "sinr_threshold",
        }
    }
}

/// What to sweep. For [`SweepParameter::DensityRow`] the swept values are
/// the rows themselves and `values` is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub rows: Vec<DensityRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Swept value; for density-row sweeps the row index 0, 1, 2.
    pub value: f64,
    pub row: DensityRow,
    pub scenario: Scenario,
}

impl SweepSpec {
    pub fn points(&self, base: &Scenario) -> CliResult<Vec<SweepPoint>> {
        if self.rows.is_empty() {
            return Err(CliError::config("no density rows to sweep"));
        }
        let mut out = Vec::new();
        if self.parameter == SweepParameter::DensityRow {
            for &row in &self.rows {
                out.push(SweepPoint {
                    value: DensityRow::ALL.iter().position(|r| *r == row).unwrap_or(0) as f64,
                    row,
                    scenario: base.clone().with_density_row(row),
                });
            }
            return Ok(out);
        }
        if self.values.is_empty() {
            return Err(CliError::config("no sweep values"));
        }
        for &row in &self.rows {
            for &v in &self.values {
                let mut s = base.clone().with_density_row(row);
                match self.parameter {
                    SweepParameter::Beamwidth => s.antenna.beamwidth_deg = v,
                    SweepParameter::CarrierSenseRange => s.radio.carrier_sense_range_m = v,
                    SweepParameter::SinrThreshold => s.radio.sinr_threshold_db = v,
                    SweepParameter::DensityRow => unreachable!(),
                }
                s.validate()?;
                out.push(SweepPoint {
                    value: v,
                    row,
                    scenario: s,
                });
            }
        }
        Ok(out)
    }
}

fn value_label(parameter: SweepParameter, p: &SweepPoint) -> String {
    match parameter {
        SweepParameter::DensityRow => p.row.name().to_string(),
        _ => num(p.value),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOutcome {
    pub point: SweepPoint,
    pub analytic: Option<f64>,
    pub simulated: Option<CampaignSummary>,
}

fn campaign(s: &Scenario, opts: &RunOptions) -> CliResult<CampaignSummary> {
    // Every sweep point reuses the same seed so that points differ only
    // through the swept parameter.
    Ok(sim::run_campaign(
        s,
        opts.trials,
        s.sim.road_length_m,
        opts.seed,
    )?)
}

pub fn coverage_sweep(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &RunOptions,
) -> CliResult<Vec<CoverageOutcome>> {
    opts.check()?;
    spec.points(base)?
        .into_par_iter()
        .map(|point| {
            let analytic = if opts.engine.analytic() {
                Some(expected_coverage(&point.scenario)?.expected_receivers)
            } else {
                None
            };
            let simulated = if opts.engine.simulation() {
                Some(campaign(&point.scenario, opts)?)
            } else {
                None
            };
            Ok(CoverageOutcome {
                point,
                analytic,
                simulated,
            })
        })
        .collect()
}

fn sim_columns(prefix: &str) -> [String; 5] {
    ["mean", "sd", "se", "ci_low", "ci_high"].map(|c| format!("{prefix}_{c}"))
}

fn sim_cells(c: &CampaignSummary) -> Vec<String> {
    vec![
        num(c.mean_covered),
        num(c.sd_covered),
        num(c.standard_error),
        num(c.ci95.0),
        num(c.ci95.1),
    ]
}

fn base_table(schema: Schema, scenario: &Scenario, opts: &RunOptions, header: &[String]) -> Table {
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t =
        Table::new(schema, scenario.to_toml_string(), &header).meta("engine", opts.engine.name());
    if opts.engine.simulation() {
        t = t.meta("seed", opts.seed).meta("trials", opts.trials);
    }
    t
}

pub fn coverage_table(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &RunOptions,
    outcomes: &[CoverageOutcome],
) -> Table {
    let mut header: Vec<String> = ["parameter", "value", "density_row"]
        .map(String::from)
        .to_vec();
    if opts.engine.analytic() {
        header.push("expected_receivers".into());
    }
    if opts.engine.simulation() {
        header.extend(sim_columns("sim"));
    }
    let mut t = base_table(Schema::CoverageSweep, base, opts, &header);
    for o in outcomes {
        let mut row = vec![
            spec.parameter.name().to_string(),
            value_label(spec.parameter, &o.point),
            o.point.row.name().to_string(),
        ];
        if let Some(a) = o.analytic {
            row.push(num(a));
        }
        if let Some(c) = &o.simulated {
            row.extend(sim_cells(c));
        }
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsOutcome {
    pub range_m: f64,
    pub row: DensityRow,
    /// `(coverage, transmitter density)` from the closed form.
    pub analytic: Option<(f64, f64)>,
    pub simulated: Option<CampaignSummary>,
}

impl CsOutcome {
    /// Covered receivers per meter of road from the closed form.
    pub fn analytic_per_meter(&self) -> Option<f64> {
        self.analytic.map(|(c, d)| c * d)
    }

    pub fn simulated_per_meter(&self) -> Option<f64> {
        self.simulated
            .as_ref()
            .map(|c| c.mean_covered * c.transmitter_density)
    }
}

pub fn cs_sweep(
    base: &Scenario,
    ranges: &[f64],
    rows: &[DensityRow],
    opts: &RunOptions,
) -> CliResult<Vec<CsOutcome>> {
    opts.check()?;
    let spec = SweepSpec {
        parameter: SweepParameter::CarrierSenseRange,
        values: ranges.to_vec(),
        rows: rows.to_vec(),
    };
    if ranges.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::config("carrier-sense ranges must be > 0"));
    }
    spec.points(base)?
        .into_par_iter()
        .map(|p| {
            let analytic = if opts.engine.analytic() {
                let c = expected_coverage(&p.scenario)?.expected_receivers;
                Some((c, transmitter_density(&p.scenario)))
            } else {
                None
            };
            let simulated = if opts.engine.simulation() {
                Some(campaign(&p.scenario, opts)?)
            } else {
                None
            };
            Ok(CsOutcome {
                range_m: p.value,
                row: p.row,
                analytic,
                simulated,
            })
        })
        .collect()
}

pub fn cs_table(base: &Scenario, opts: &RunOptions, outcomes: &[CsOutcome]) -> Table {
    let mut header: Vec<String> = vec!["carrier_sense_range_m".into(), "density_row".into()];
    if opts.engine.analytic() {
        header.extend(
            [
                "analytic_coverage",
                "analytic_tx_density",
                "analytic_per_meter",
            ]
            .map(String::from),
        );
    }
    if opts.engine.simulation() {
        header.extend(
            ["sim_coverage", "sim_se", "sim_tx_density", "sim_per_meter"].map(String::from),
        );
    }
    let mut t = base_table(Schema::CsSweep, base, opts, &header);
    for o in outcomes {
        let mut row = vec![num(o.range_m), o.row.name().to_string()];
        if let Some((c, d)) = o.analytic {
            row.extend([num(c), num(d), num(c * d)]);
        }
        if let Some(s) = &o.simulated {
            row.extend([
                num(s.mean_covered),
                num(s.standard_error),
                num(s.transmitter_density),
                num(s.mean_covered * s.transmitter_density),
            ]);
        }
        t.push(row);
    }
    t
}

/// Pooled top-SINR samples per beamwidth, simulated.
pub fn sinr_cdf(
    base: &Scenario,
    beamwidths: &[f64],
    opts: &RunOptions,
) -> CliResult<Vec<(f64, CampaignSummary)>> {
    if opts.trials == 0 {
        return Err(CliError::config("sinr-cdf needs --trials >= 1"));
    }
    if beamwidths.is_empty() {
        return Err(CliError::config("no beamwidths given"));
    }
    beamwidths
        .par_iter()
        .map(|&bw| {
            let s = base.clone().with_beamwidth(bw);
            s.validate()?;
            Ok((
                bw,
                sim::run_campaign(&s, opts.trials, s.sim.road_length_m, opts.seed)?,
            ))
        })
        .collect()
}

pub fn sinr_cdf_table(
    base: &Scenario,
    opts: &RunOptions,
    grid: &[f64],
    curves: &[(f64, CampaignSummary)],
) -> Table {
    let opts = RunOptions {
        engine: Engine::Simulation,
        ..*opts
    };
    let header: Vec<String> = ["beamwidth_deg", "sinr_db", "cdf"]
        .map(String::from)
        .to_vec();
    let mut t = base_table(Schema::SinrCdf, base, &opts, &header);
    for (bw, c) in curves {
        for (x, f) in grid.iter().zip(ecdf(&c.top_sinr, grid)) {
            t.push(vec![num(*bw), num(*x), num(f)]);
        }
    }
    t
}

/// Extra path loss of one and two blockers, and unblocked / one-blocker
/// probabilities for same-lane, adjacent-lane and two-lane links, against
/// along-road distance.
pub fn blockage_curve(scenario: &Scenario, distances: &[f64]) -> CliResult<Table> {
    if distances.is_empty() || distances.iter().any(|d| !(*d > 0.0)) {
        return Err(CliError::config("distances must be non-empty and positive"));
    }
    let header: Vec<String> = [
        "distance_m",
        "delta_k1_db",
        "delta_k2_db",
        "p_b0_same",
        "p_b1_same",
        "p_b0_adjacent",
        "p_b1_adjacent",
        "p_b0_two",
        "p_b1_two",
    ]
    .map(String::from)
    .to_vec();
    let opts = RunOptions {
        seed: 0,
        trials: 0,
        engine: Engine::Analytic,
    };
    let mut t = base_table(Schema::BlockageCurve, scenario, &opts, &header);
    let lane = |i| Lane::new(i).expect("lanes 1..=3 exist");
    for &d in distances {
        let g = LinkGeometry::new(0.0, d)?;
        let pl = |k| path_loss_db(&scenario.path_loss, k, &g);
        let (p0, p1, p2) = (pl(0)?, pl(1)?, pl(2)?);
        let mut row = vec![num(d), num(p1 - p0), num(p2 - p0)];
        for (a, b) in [(2, 2), (1, 2), (1, 3)] {
            let dist = blocker_count_distribution(scenario, lane(a), lane(b), d)?;
            row.extend([num(dist.p_b0), num(dist.p_b1)]);
        }
        t.push(row);
    }
    Ok(t)
}

/// A single simulation campaign with the analytic expectation alongside.
pub fn simulate(scenario: &Scenario, opts: &RunOptions) -> CliResult<(Table, Vec<TrialStats>)> {
    if opts.trials == 0 {
        return Err(CliError::config("simulate needs --trials >= 1"));
    }
    let road = scenario.sim.road_length_m;
    let stats = sim::run_trials(scenario, opts.trials, road, opts.seed)?;
    let summary = CampaignSummary::from_trials(&stats, road)?;
    let analytic = analysis::expected_coverage(scenario)?.expected_receivers;
    let opts = RunOptions {
        engine: Engine::Both,
        ..*opts
    };
    let mut header: Vec<String> = vec!["trials".into()];
    header.extend(sim_columns("sim"));
    header.extend(
        [
            "sim_tx_density",
            "expected_receivers",
            "analytic_tx_density",
        ]
        .map(String::from),
    );
    let mut t = base_table(Schema::Simulate, scenario, &opts, &header);
    let mut row = vec![summary.trials.to_string()];
    row.extend(sim_cells(&summary));
    row.extend([
        num(summary.transmitter_density),
        num(analytic),
        num(transmitter_density(scenario)),
    ]);
    t.push(row);
    Ok((t, stats))
}
