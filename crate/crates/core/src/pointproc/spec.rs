//! Process specification files.
//!
//! ```json
//! {"type": "mixed", "tau": {"kind": "binomial", "params": {"n": 4, "p": 0.5}},
//!  "partition": [0.2, 0.3]}
//! {"type": "mixed", "tau": [0.1, 0.4, 0.5], "partition": [0.5]}
//! {"type": "dpp", "kernel": [[0.5, 0.3], [0.3, 0.5]], "cells": [0, 1]}
//! ```

use serde::{Deserialize, Deserializer, Serialize};

use super::{DppModel, MixedSampledProcess, PartitionModel, PointProcess};
use crate::discrete_laws::{
    class_q_pmf, geometric_truncated, poisson_binomial, poisson_truncated, Pmf, Truncation,
    DEFAULT_MASS_FLOOR,
};
use crate::error::{Error, Result};

/// Count law: a bare pmf array or a named family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TauSpec {
    Pmf(Vec<f64>),
    Named(NamedTau),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedTau {
    Fixed { n: usize },
    Uniform { n: usize },
    Binomial { n: usize, p: f64 },
    Poisson { lambda: f64 },
    Geometric { p: f64 },
    PoissonBinomial { ps: Vec<f64> },
    ClassQ { lambda: f64, ps: Vec<f64> },
    Pmf { probs: Vec<f64> },
}

impl<'de> Deserialize<'de> for TauSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        if v.is_array() {
            serde_json::from_value(v).map(TauSpec::Pmf).map_err(serde::de::Error::custom)
        } else {
            serde_json::from_value(v).map(TauSpec::Named).map_err(serde::de::Error::custom)
        }
    }
}

impl TauSpec {
    pub fn build(&self, mass_floor: f64) -> Result<(Pmf, Truncation)> {
        let exact = |p: Pmf| {
            let t = Truncation::exact(p.bound());
            (p, t)
        };
        Ok(match self {
            TauSpec::Pmf(probs) | TauSpec::Named(NamedTau::Pmf { probs }) => exact(Pmf::new(probs.clone())?),
            TauSpec::Named(t) => match t {
                NamedTau::Fixed { n } => exact(Pmf::point_mass(*n)),
                NamedTau::Uniform { n } => exact(Pmf::uniform(*n)),
                NamedTau::Binomial { n, p } => exact(Pmf::binomial(*n, *p)?),
                NamedTau::Poisson { lambda } => poisson_truncated(*lambda, mass_floor)?,
                NamedTau::Geometric { p } => geometric_truncated(*p, mass_floor)?,
                NamedTau::PoissonBinomial { ps } => exact(poisson_binomial(ps)?),
                NamedTau::ClassQ { lambda, ps } => class_q_pmf(*lambda, ps, mass_floor)?,
                NamedTau::Pmf { .. } => unreachable!(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessSpec {
    Mixed {
        tau: TauSpec,
        partition: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_floor: Option<f64>,
    },
    Dpp {
        kernel: Vec<Vec<f64>>,
        /// Cell label per ground point; `null` for untracked points.
        /// Defaults to one cell per point.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cells: Option<Vec<Option<usize>>>,
    },
}

impl ProcessSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("process spec: {e}")))
    }

    pub fn build(&self) -> Result<PointProcess> {
        match self {
            ProcessSpec::Mixed { tau, partition, mass_floor } => {
                let floor = mass_floor.unwrap_or(DEFAULT_MASS_FLOOR);
                let (pmf, t) = tau.build(floor)?;
                Ok(PointProcess::Mixed(MixedSampledProcess::with_truncation(
                    pmf,
                    t,
                    PartitionModel::new(partition.clone())?,
                )))
            }
            ProcessSpec::Dpp { kernel, cells } => {
                let cells = cells.clone().unwrap_or_else(|| (0..kernel.len()).map(Some).collect());
                Ok(PointProcess::Dpp(DppModel::new(kernel.clone(), cells)?))
            }
        }
    }
}
