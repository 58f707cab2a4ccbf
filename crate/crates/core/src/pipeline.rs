//! Per-checkpoint analysis: FE probe on the full features, optional probes on
//! the main and residual components, optional LogME.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{read_ftrx, CheckpointRecord, FeatureMatrix};
use crate::logme::logme_score;
use crate::probe::{train_probe, train_probe_with, PerBatchComponent, ProbeConfig, ProbeResult};
use crate::ranking::CheckpointMeasurement;
use crate::spectral::{split_components, Component, SvdScope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub threshold: f64,
    pub scope: SvdScope,
}

/// Which split LogME is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Train,
    Test,
}

impl std::str::FromStr for FeatureSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(FeatureSource::Train),
            "test" => Ok(FeatureSource::Test),
            other => Err(Error::invalid(format!("unknown feature source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub probe: ProbeConfig,
    pub split: Option<SplitOptions>,
    pub logme: Option<FeatureSource>,
}

/// Main/residual components of a train/test pair, decomposed on the full
/// training matrix with the test rows projected onto its basis.
#[derive(Debug, Clone)]
pub struct ComponentFeatures {
    pub main_train: FeatureMatrix,
    pub residual_train: FeatureMatrix,
    pub main_test: FeatureMatrix,
    pub residual_test: FeatureMatrix,
    pub k: usize,
    pub energy_ratio: f64,
    pub sigma: Vec<f64>,
}

pub fn split_train_test(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    threshold: f64,
) -> Result<ComponentFeatures> {
    if train.d() != test.d() {
        return Err(Error::invalid(format!(
            "train has d = {}, test has d = {}",
            train.d(),
            test.d()
        )));
    }
    let split = split_components(&train.to_dmatrix(), threshold)?;
    let (main_test, residual_test) = split.project(&test.to_dmatrix())?;
    Ok(ComponentFeatures {
        main_train: train.with_values(&split.main)?,
        residual_train: train.with_values(&split.residual)?,
        main_test: test.with_values(&main_test)?,
        residual_test: test.with_values(&residual_test)?,
        k: split.k,
        energy_ratio: split.energy_ratio,
        sigma: split.factors.sigma,
    })
}

/// Probe for a single component under the given split options.
pub fn probe_component(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    cfg: &ProbeConfig,
    component: Component,
    split: SplitOptions,
) -> Result<ProbeResult> {
    match (component, split.scope) {
        (Component::Full, _) => train_probe(train, Some(test), cfg),
        (_, SvdScope::Batch) => train_probe_with(
            train,
            Some(test),
            cfg,
            &PerBatchComponent {
                component,
                threshold: split.threshold,
            },
        ),
        (_, SvdScope::Full) => {
            let parts = split_train_test(train, test, split.threshold)?;
            if component == Component::Main {
                train_probe(&parts.main_train, Some(&parts.main_test), cfg)
            } else {
                train_probe(&parts.residual_train, Some(&parts.residual_test), cfg)
            }
        }
    }
}

/// Runs the analysis and folds any failure into the measurement's `error`,
/// keeping whatever succeeded before it.
pub fn analyze_checkpoint(rec: &CheckpointRecord, opts: &AnalysisOptions) -> CheckpointMeasurement {
    let mut m = CheckpointMeasurement {
        epoch: rec.epoch,
        ..Default::default()
    };
    if let Err(e) = fill_measurement(rec, opts, &mut m) {
        m.error = Some(e.to_string());
    }
    m
}

fn fill_measurement(
    rec: &CheckpointRecord,
    opts: &AnalysisOptions,
    m: &mut CheckpointMeasurement,
) -> Result<()> {
    let train = read_ftrx(&rec.train_features)?;
    let test = read_ftrx(&rec.test_features)?;

    let fe = train_probe(&train, Some(&test), &opts.probe)?;
    m.fe_accuracy = fe.test_accuracy;

    if let Some(split) = opts.split {
        match split.scope {
            SvdScope::Full => {
                let parts = split_train_test(&train, &test, split.threshold)?;
                m.k = Some(parts.k);
                m.energy_ratio = Some(parts.energy_ratio);
                let main = train_probe(&parts.main_train, Some(&parts.main_test), &opts.probe)?;
                m.main_accuracy = main.test_accuracy;
                let resid =
                    train_probe(&parts.residual_train, Some(&parts.residual_test), &opts.probe)?;
                m.residual_accuracy = resid.test_accuracy;
            }
            SvdScope::Batch => {
                // rank of the whole training matrix, reported for reference
                let whole = split_components(&train.to_dmatrix(), split.threshold)?;
                m.k = Some(whole.k);
                m.energy_ratio = Some(whole.energy_ratio);
                m.main_accuracy =
                    probe_component(&train, &test, &opts.probe, Component::Main, split)?
                        .test_accuracy;
                m.residual_accuracy =
                    probe_component(&train, &test, &opts.probe, Component::Residual, split)?
                        .test_accuracy;
            }
        }
    }

    if let Some(source) = opts.logme {
        let f = match source {
            FeatureSource::Train => &train,
            FeatureSource::Test => &test,
        };
        m.logme = Some(logme_score(f)?.score);
    }
    Ok(())
}
