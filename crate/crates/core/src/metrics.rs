//! Integration factors: IIF, DGF, DTC and per-pair MIF, as exact ratios of
//! entity counts.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{Embodiment, Identifier, Model, SubsystemKind, TwinPair};
use crate::validate::{is_mirrored, ValidatedModel};

/// `numerator / denominator`, unreduced. A zero denominator means the
/// factor is undefined for the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio { numerator, denominator }
    }

    pub fn is_defined(&self) -> bool {
        self.denominator != 0
    }

    /// Exact comparison by value; `None` if either side is undefined.
    pub fn cmp_value(&self, other: &Ratio) -> Option<Ordering> {
        if !self.is_defined() || !other.is_defined() {
            return None;
        }
        let lhs = self.numerator as u128 * other.denominator as u128;
        let rhs = other.numerator as u128 * self.denominator as u128;
        Some(lhs.cmp(&rhs))
    }

    pub fn value(&self) -> Option<f64> {
        self.is_defined().then(|| self.numerator as f64 / self.denominator as f64)
    }

    /// Value rounded half-up to two decimals, e.g. `0.71`.
    pub fn decimal(&self) -> Option<String> {
        if !self.is_defined() {
            return None;
        }
        let (n, d) = (self.numerator as u128, self.denominator as u128);
        let hundredths = (200 * n + d) / (2 * d);
        Some(format!("{}.{:02}", hundredths / 100, hundredths % 100))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal() {
            Some(dec) => write!(f, "{}/{} (= {dec})", self.numerator, self.denominator),
            None => f.write_str("n/a"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Ratio", 5)?;
        s.serialize_field("numerator", &self.numerator)?;
        s.serialize_field("denominator", &self.denominator)?;
        s.serialize_field("defined", &self.is_defined())?;
        s.serialize_field("value", &self.value())?;
        s.serialize_field("display", &self.to_string())?;
        s.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MirrorFactor {
    pub label: String,
    pub sim: Identifier,
    pub phy: Identifier,
    pub ratio: Ratio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorSet {
    pub iif: Ratio,
    pub dgf: Ratio,
    pub dtc: Ratio,
    /// One entry per layer-0 twin pair, in declaration order.
    pub mif: Vec<MirrorFactor>,
}

impl FactorSet {
    pub fn mif_for(&self, label: &str) -> Option<Ratio> {
        self.mif.iter().find(|m| m.label == label).map(|m| m.ratio)
    }

    /// `(name, ratio)` for every factor, MIF entries named `MIF_<label>`.
    pub fn entries(&self) -> Vec<(String, Ratio)> {
        let mut out = vec![
            ("IIF".to_string(), self.iif),
            ("DGF".to_string(), self.dgf),
            ("DTC".to_string(), self.dtc),
        ];
        out.extend(self.mif.iter().map(|m| (format!("MIF_{}", m.label), m.ratio)));
        out
    }

    pub fn has_undefined(&self) -> bool {
        self.entries().iter().any(|(_, r)| !r.is_defined())
    }
}

impl fmt::Display for FactorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, ratio) in self.entries() {
            writeln!(f, "{name} = {ratio}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("`{sim} <-> {phy}` is not a top-level twin pair of this model")]
    UnknownPair { sim: Identifier, phy: Identifier },
}

fn count(model: &Model, pred: impl Fn(SubsystemKind) -> bool) -> u64 {
    model.subsystems().iter().filter(|s| pred(s.kind)).count() as u64
}

pub fn compute_iif(model: &ValidatedModel) -> Ratio {
    Ratio::new(
        count(model, |k| k == SubsystemKind::ContHyb),
        count(model, SubsystemKind::is_controller),
    )
}

pub fn compute_dgf(model: &ValidatedModel) -> Ratio {
    let governed = model
        .subsystems()
        .iter()
        .filter(|s| s.kind.is_real())
        .filter(|s| {
            model.agents_referencing(s.id.as_str()).any(|a| {
                model
                    .cont_subsys_of(a.id.as_str())
                    .is_ok_and(|c| c.kind == SubsystemKind::ContHyb)
            })
        })
        .count() as u64;
    Ratio::new(governed, count(model, SubsystemKind::is_real))
}

pub fn compute_dtc(model: &ValidatedModel) -> Ratio {
    let physical: Vec<_> = model.agents().iter().filter(|a| a.kind == Embodiment::Physical).collect();
    let mirrored = physical.iter().filter(|a| is_mirrored(model, a.id.as_str())).count() as u64;
    Ratio::new(mirrored, physical.len() as u64)
}

/// Hybrid share among the distinct controllers of the pair's simulated side.
pub fn compute_mif(model: &ValidatedModel, pair: &TwinPair) -> Result<Ratio, MetricsError> {
    let known = model
        .top_level_pairs()
        .any(|p| p.sim == pair.sim && p.phy == pair.phy);
    if !known {
        return Err(MetricsError::UnknownPair {
            sim: pair.sim.clone(),
            phy: pair.phy.clone(),
        });
    }
    let mut seen = HashSet::new();
    let (mut hybrid, mut total) = (0, 0);
    for agent in model.leaf_agents(pair.sim.as_str()).unwrap_or_default() {
        if let Ok(c) = model.cont_subsys_of(agent.id.as_str()) {
            if seen.insert(&c.id) {
                total += 1;
                if c.kind == SubsystemKind::ContHyb {
                    hybrid += 1;
                }
            }
        }
    }
    Ok(Ratio::new(hybrid, total))
}

pub fn compute_all(model: &ValidatedModel) -> FactorSet {
    FactorSet {
        iif: compute_iif(model),
        dgf: compute_dgf(model),
        dtc: compute_dtc(model),
        mif: model
            .top_level_pairs()
            .map(|p| MirrorFactor {
                label: p.label.clone(),
                sim: p.sim.clone(),
                phy: p.phy.clone(),
                ratio: compute_mif(model, p).expect("top-level pair"),
            })
            .collect(),
    }
}
