//! Broadcast coverage of directional mmWave links between vehicles on a
//! multi-lane highway, with truck/bus blockage and carrier-sense MAC
//! interference. Closed-form analysis lives in [`analysis`], the Monte
//! Carlo counterpart in [`sim`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod blockage;
pub mod channel;
pub mod error;
pub mod scenario;
pub mod sim;
pub mod units;

pub use analysis::{
    expected_coverage, sinr_at, threshold_power, CoverageResult, InterferenceBudget, SeriesSum,
};
pub use blockage::BlockerDistribution;
pub use channel::{AntennaPattern, LinkGeometry, Lobe, PathLossRow, PathLossTable};
pub use error::{Error, Result};
pub use scenario::{
    AnalysisOptions, BlockerRule, CoverageWeighting, DensityRow, Lane, MacParams, RadioParams,
    RoadModel, Scenario, SimParams, Thinning, VehicleClass,
};
pub use sim::{run_campaign, CampaignSummary, TrialStats};
