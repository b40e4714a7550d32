//! Requirement-driven structure scaffolding, deployment setup enumeration
//! and the functional configuration count.

use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    Embodiment, GroupKind, Identifier, Model, ModelError, Requirement, RequirementRole, SubsystemKind, TwinPair,
};
use crate::validate::{functional_sources, ValidatedModel};
use crate::Configuration;

/// Upper bound on the number of setups `enumerate_setups` will materialise.
pub const MAX_SETUPS: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("scaffolding needs a requirements-only model, but this one already declares structure")]
    HasStructure,
    #[error("part requirement `{0}` neither derives from nor satisfies any functional requirement")]
    UnsatisfiedPart(Identifier),
    #[error("part requirement `{0}` has no realising agent, group or twin pair")]
    UnrealizedPart(Identifier),
    #[error("model has no selectable part requirements")]
    NoParts,
    #[error("setup product has {0} elements, more than the limit of {MAX_SETUPS}")]
    TooManySetups(u128),
    #[error("2^{0} functional configurations do not fit in 128 bits")]
    CountOverflow(u32),
    #[error("generated model is invalid: {0:?}")]
    Model(Vec<ModelError>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaffoldResult {
    pub model: Model,
    /// Generated structural element → requirement it was generated from.
    pub provenance: IndexMap<Identifier, Identifier>,
}

fn name(base: &Identifier, suffix: &str) -> Identifier {
    Identifier::new(format!("{base}{suffix}")).expect("suffix keeps the identifier valid")
}

/// Part requirement whose functional sources are all computational.
pub fn is_computational_part(model: &Model, part: &Requirement) -> bool {
    if part.role != RequirementRole::PartHybrid {
        return false;
    }
    let sources = functional_sources(model, part.id.as_str());
    !sources.is_empty()
        && sources
            .iter()
            .all(|s| model.requirement(s.as_str()).map(|r| r.role) == Some(RequirementRole::FunctionalComputational))
}

/// Generates the structure for a requirements-only model: one agent (or a
/// digital/physical twin pair) per part requirement and a world-mirror
/// group for exogenous agents.
pub fn scaffold(model: &Model) -> Result<ScaffoldResult, ComposeError> {
    if model.has_structure() {
        return Err(ComposeError::HasStructure);
    }
    let mut b = model.to_builder();
    let mut provenance = IndexMap::new();
    for r in model.requirements().iter().filter(|r| r.role.is_part()) {
        if functional_sources(model, r.id.as_str()).is_empty() {
            return Err(ComposeError::UnsatisfiedPart(r.id.clone()));
        }
        let cont = name(&r.id, "_Cont");
        b.subsystem(cont.clone(), SubsystemKind::ContHyb);
        provenance.insert(cont.clone(), r.id.clone());
        let mut agent = |suffix: &str, kind: Embodiment, b: &mut crate::ModelBuilder| {
            let id = name(&r.id, suffix);
            b.agent(id.clone(), kind, vec![cont.clone()]);
            provenance.insert(id.clone(), r.id.clone());
            id
        };
        match r.role {
            RequirementRole::PartPhysical => {
                agent("_Phy", Embodiment::Physical, &mut b);
            }
            RequirementRole::PartSimulated => {
                agent("_Sim", Embodiment::Simulated, &mut b);
            }
            _ if is_computational_part(model, r) => {
                agent("_Hyb", Embodiment::Hybrid, &mut b);
            }
            _ => {
                let sim = agent("_Sim", Embodiment::Simulated, &mut b);
                let phy = agent("_Phy", Embodiment::Physical, &mut b);
                let (dt, pt) = (name(&r.id, "_DTgrp"), name(&r.id, "_PTgrp"));
                b.group(dt.clone(), GroupKind::MirrorSim, vec![sim]);
                b.group(pt.clone(), GroupKind::MirrorPhy, vec![phy]);
                b.mirror(dt.clone(), pt.clone());
                provenance.insert(dt, r.id.clone());
                provenance.insert(pt, r.id.clone());
            }
        }
    }
    let exogenous: Vec<_> = model
        .requirements()
        .iter()
        .filter(|r| r.role == RequirementRole::ExogAgent)
        .collect();
    if !exogenous.is_empty() {
        let mut members = Vec::new();
        for e in exogenous {
            let (cont, sim) = (name(&e.id, "_Cont"), name(&e.id, "_Sim"));
            b.subsystem(cont.clone(), SubsystemKind::ContSim);
            b.agent(sim.clone(), Embodiment::Simulated, vec![cont.clone()]);
            b.manage(sim.clone(), e.id.clone());
            provenance.insert(cont, e.id.clone());
            provenance.insert(sim.clone(), e.id.clone());
            members.push(sim);
        }
        b.group(Identifier::new("WorldSync").expect("valid"), GroupKind::WorldMirror, members);
    }
    let model = b.build().map_err(ComposeError::Model)?;
    Ok(ScaffoldResult { model, provenance })
}

/// Number of functional configurations: `2^n` over functional requirements
/// resolved optional.
pub fn functional_config_count(model: &Model) -> Result<u128, ComposeError> {
    let n = model
        .requirements()
        .iter()
        .filter(|r| r.role.is_functional() && r.config.explicit() == Some(Configuration::Optional))
        .count() as u32;
    1u128.checked_shl(n).filter(|_| n < 128).ok_or(ComposeError::CountOverflow(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Phy,
    Sim,
    Absent,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Phy => "phy",
            Selection::Sim => "sim",
            Selection::Absent => "absent",
        })
    }
}

/// The structure realising a part requirement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Realization {
    Pair { sim: Identifier, phy: Identifier },
    Element(Identifier),
}

impl Realization {
    fn member(&self, selection: Selection) -> Option<&Identifier> {
        match (self, selection) {
            (Realization::Pair { phy, .. }, Selection::Phy) => Some(phy),
            (Realization::Pair { sim, .. }, Selection::Sim) => Some(sim),
            (Realization::Element(id), Selection::Phy | Selection::Sim) => Some(id),
            (_, Selection::Absent) => None,
        }
    }

    /// Whether `element` is, or sits inside, this realisation.
    pub fn covers(&self, model: &Model, element: &str) -> bool {
        let within = |group: &Identifier| {
            group == element
                || model.group_contains_group(group.as_str(), element)
                || model
                    .leaf_agents(group.as_str())
                    .is_ok_and(|agents| agents.iter().any(|a| a.id == element))
        };
        match self {
            Realization::Pair { sim, phy } => within(sim) || within(phy),
            Realization::Element(id) => {
                id == element || (model.group(id.as_str()).is_some() && within(id))
            }
        }
    }
}

/// Finds the structure realising `part`: the top-level twin pair labelled
/// with the part's name, or an agent/group named `<part>_Phy`, `<part>Phy`
/// (physical), `<part>_Sim`, `<part>Sim` (simulated), `<part>_Hyb`,
/// `<part>Hyb` (computational hybrid).
pub fn realization(model: &Model, part: &Requirement) -> Option<Realization> {
    let suffixes: &[&str] = match part.role {
        RequirementRole::PartPhysical => &["_Phy", "Phy"],
        RequirementRole::PartSimulated => &["_Sim", "Sim"],
        RequirementRole::PartHybrid if is_computational_part(model, part) => &["_Hyb", "Hyb"],
        RequirementRole::PartHybrid => {
            return model
                .top_level_pairs()
                .find(|p: &&TwinPair| p.label == part.id.as_str())
                .map(|p| Realization::Pair {
                    sim: p.sim.clone(),
                    phy: p.phy.clone(),
                });
        }
        _ => return None,
    };
    suffixes
        .iter()
        .map(|s| format!("{}{s}", part.id))
        .find(|id| model.agent(id).is_some() || model.group(id).is_some())
        .and_then(|id| Identifier::new(id).ok())
        .map(Realization::Element)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Setup {
    pub name: String,
    pub members: Vec<Identifier>,
    pub selections: IndexMap<Identifier, Selection>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SetupPlan {
    /// Selectable parts with their legal options, in declaration order.
    pub parts: Vec<(Identifier, Vec<Selection>)>,
    pub setups: Vec<Setup>,
}

/// Legal selections for a part requirement, in enumeration order.
pub fn options_for(model: &Model, part: &Requirement, config: Configuration) -> Vec<Selection> {
    let mut options = match part.role {
        RequirementRole::PartHybrid if is_computational_part(model, part) => return Vec::new(),
        RequirementRole::PartHybrid => vec![Selection::Phy, Selection::Sim],
        RequirementRole::PartPhysical => vec![Selection::Phy],
        RequirementRole::PartSimulated => vec![Selection::Sim],
        _ => return Vec::new(),
    };
    if config == Configuration::Optional {
        options.push(Selection::Absent);
    }
    options
}

/// Cartesian product of per-part selections. Computational hybrid agents
/// outside every mirror group join every setup; world-mirror groups join
/// setups with at least one simulated selection.
pub fn enumerate_setups(model: &ValidatedModel) -> Result<SetupPlan, ComposeError> {
    let mut parts = Vec::new();
    let mut realized = Vec::new();
    for r in model.requirements().iter().filter(|r| r.role.is_part()) {
        let config = model.resolved_config()[&r.id];
        let options = options_for(model, r, config);
        if options.is_empty() {
            continue;
        }
        let target = realization(model, r).ok_or_else(|| ComposeError::UnrealizedPart(r.id.clone()))?;
        parts.push((r.id.clone(), options));
        realized.push(target);
    }
    if parts.is_empty() {
        return Err(ComposeError::NoParts);
    }
    let total = parts
        .iter()
        .try_fold(1u128, |acc, (_, o)| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if total > MAX_SETUPS {
        return Err(ComposeError::TooManySetups(total));
    }

    let mirror_groups: Vec<_> = model
        .groups()
        .iter()
        .filter(|g| matches!(g.kind, GroupKind::MirrorSim | GroupKind::MirrorPhy))
        .collect();
    let always: Vec<Identifier> = model
        .agents()
        .iter()
        .filter(|a| a.kind == Embodiment::Hybrid)
        .filter(|a| {
            !mirror_groups.iter().any(|g| {
                model
                    .leaf_agents(g.id.as_str())
                    .is_ok_and(|leaves| leaves.iter().any(|l| l.id == a.id))
            })
        })
        .map(|a| a.id.clone())
        .collect();
    let world: Vec<Identifier> = model
        .groups()
        .iter()
        .filter(|g| g.kind == GroupKind::WorldMirror)
        .map(|g| g.id.clone())
        .collect();

    let mut setups = Vec::with_capacity(total as usize);
    let mut digits = vec![0usize; parts.len()];
    loop {
        let mut selections = IndexMap::new();
        let mut members = Vec::new();
        for (i, (part, options)) in parts.iter().enumerate() {
            let choice = options[digits[i]];
            selections.insert(part.clone(), choice);
            if let Some(m) = realized[i].member(choice) {
                if !members.contains(m) {
                    members.push(m.clone());
                }
            }
        }
        for a in &always {
            if !members.contains(a) {
                members.push(a.clone());
            }
        }
        if selections.values().any(|s| *s == Selection::Sim) {
            members.extend(world.iter().cloned());
        }
        let name = selections
            .iter()
            .map(|(p, s)| format!("{p}={s}"))
            .collect::<Vec<_>>()
            .join(",");
        setups.push(Setup { name, members, selections });

        // odometer step, last part varies fastest
        let mut i = parts.len();
        loop {
            if i == 0 {
                return Ok(SetupPlan { parts, setups });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < parts[i].1.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}
