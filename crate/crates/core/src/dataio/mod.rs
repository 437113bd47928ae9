//! Household load-curve ingestion and synthetic data generation.

pub(crate) mod csv;
mod synth;

use std::collections::BTreeMap;

pub use self::csv::{read_csv_dataset, read_household_csv, write_dataset, write_household_csv, SchemaKind};
pub use self::synth::{
    generate_synthetic, generate_synthetic_detailed, ApplianceModel, BackgroundModel, Signature, SynthConfig,
    SyntheticHouse,
};

use crate::error::{Error, Result};
use crate::series::{Label, TimeSeries};

/// Base grid every sub-minute source is averaged onto at ingestion.
pub const BASE_INTERVAL_S: u32 = 60;

/// Name of the survey-label sidecar inside a dataset directory.
pub const SURVEY_FILE: &str = "survey.csv";

/// One household: its aggregate curve plus appliance ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    source_id: String,
    aggregate: TimeSeries,
    appliance_channels: BTreeMap<String, TimeSeries>,
    survey_labels: BTreeMap<String, Label>,
}

impl HouseholdRecord {
    pub fn new(
        aggregate: TimeSeries,
        appliance_channels: BTreeMap<String, TimeSeries>,
        survey_labels: BTreeMap<String, Label>,
    ) -> Result<Self> {
        let source_id = aggregate.source_id().to_string();
        if appliance_channels.is_empty() && survey_labels.is_empty() {
            return Err(Error::validation(format!(
                "household {source_id} has neither appliance channels nor survey labels"
            )));
        }
        for (name, ch) in &appliance_channels {
            if ch.start() != aggregate.start()
                || ch.interval_s() != aggregate.interval_s()
                || ch.len() != aggregate.len()
            {
                return Err(Error::validation(format!(
                    "household {source_id}: channel '{name}' is not aligned with the aggregate"
                )));
            }
        }
        if let Some((name, l)) = survey_labels.iter().find(|(_, l)| **l > 1) {
            return Err(Error::validation(format!(
                "household {source_id}: survey label for '{name}' must be 0 or 1, got {l}"
            )));
        }
        Ok(Self { source_id, aggregate, appliance_channels, survey_labels })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn aggregate(&self) -> &TimeSeries {
        &self.aggregate
    }

    pub fn appliance_channels(&self) -> &BTreeMap<String, TimeSeries> {
        &self.appliance_channels
    }

    pub fn channel(&self, appliance: &str) -> Option<&TimeSeries> {
        self.appliance_channels.get(appliance)
    }

    pub fn survey_labels(&self) -> &BTreeMap<String, Label> {
        &self.survey_labels
    }

    pub fn survey_label(&self, appliance: &str) -> Option<Label> {
        self.survey_labels.get(appliance).copied()
    }

    /// Appliance names known to this household from either source.
    pub fn appliances(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .appliance_channels
            .keys()
            .chain(self.survey_labels.keys())
            .map(String::as_str)
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }
}
