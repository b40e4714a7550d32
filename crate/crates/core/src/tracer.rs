//! Backward tracing from a structural element to the requirements it serves.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::composer::realization;
use crate::model::{Category, Identifier, Model, RelationKind};
use crate::validate::{functional_sources, ValidatedModel};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("no entity named `{0}`")]
    NotFound(String),
    #[error("`{id}` is a {category}; only agents and subsystems can be traced")]
    NotStructural { id: Identifier, category: Category },
}

/// One piece of evidence linking an element to a requirement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "via", rename_all = "camelCase")]
pub enum TraceChain {
    /// `element <- allocate <- hardware [-> relation -> functional]`
    Allocation {
        element: Identifier,
        hardware: Identifier,
        relation: Option<RelationKind>,
        functional: Option<Identifier>,
    },
    /// `element <- realizes <- part -> relation -> functional`
    Realization {
        element: Identifier,
        part: Identifier,
        relation: RelationKind,
        functional: Identifier,
    },
}

impl fmt::Display for TraceChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceChain::Allocation {
                element,
                hardware,
                relation,
                functional,
            } => {
                write!(f, "{element} <- allocate <- {hardware}")?;
                if let (Some(rel), Some(fun)) = (relation, functional) {
                    write!(f, " -> {rel} -> {fun}")?;
                }
                Ok(())
            }
            TraceChain::Realization {
                element,
                part,
                relation,
                functional,
            } => write!(f, "{element} <- realizes <- {part} -> {relation} -> {functional}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceResult {
    pub element: Identifier,
    pub hardware_reqs: Vec<Identifier>,
    pub part_reqs: Vec<Identifier>,
    pub functional_reqs: Vec<Identifier>,
    pub chains: Vec<TraceChain>,
}

fn in_declaration_order(model: &Model, mut ids: Vec<Identifier>) -> Vec<Identifier> {
    ids.sort_by_key(|id| model.declaration_rank(id.as_str()));
    ids.dedup();
    ids
}

/// Collects allocations targeting `element` (or, for an agent, any subsystem
/// it references) and follows them to functional requirements, together with
/// the functional requirements of the part the element realises.
pub fn trace(model: &ValidatedModel, element: &str) -> Result<TraceResult, TraceError> {
    let entity = model.resolve(element).map_err(|_| TraceError::NotFound(element.to_string()))?;
    let id = entity.id().clone();
    let mut targets = vec![id.clone()];
    match entity.category() {
        Category::Agent => {
            let agent = model.agent(element).expect("agent");
            targets.extend(agent.subsystems.iter().cloned());
        }
        Category::Subsystem => {}
        category => return Err(TraceError::NotStructural { id, category }),
    }

    let mut chains = Vec::new();
    let mut hardware = Vec::new();
    let mut parts = Vec::new();
    let mut functional = Vec::new();
    for target in &targets {
        for al in model.allocations().iter().filter(|al| &al.target == target) {
            hardware.push(al.hardware.clone());
            let hw = model.requirement(al.hardware.as_str()).expect("allocation source is a requirement");
            let mut linked = false;
            for rel in &hw.relations {
                let is_functional = model
                    .requirement(rel.target.as_str())
                    .is_some_and(|r| r.role.is_functional());
                if matches!(rel.kind, RelationKind::Satisfies | RelationKind::Derives) && is_functional {
                    linked = true;
                    functional.push(rel.target.clone());
                    chains.push(TraceChain::Allocation {
                        element: target.clone(),
                        hardware: al.hardware.clone(),
                        relation: Some(rel.kind),
                        functional: Some(rel.target.clone()),
                    });
                }
            }
            if !linked {
                chains.push(TraceChain::Allocation {
                    element: target.clone(),
                    hardware: al.hardware.clone(),
                    relation: None,
                    functional: None,
                });
            }
        }
    }

    if entity.category() == Category::Agent {
        for part in model.requirements().iter().filter(|r| r.role.is_part()) {
            if !realization(model, part).is_some_and(|r| r.covers(model, element)) {
                continue;
            }
            parts.push(part.id.clone());
            for fun in functional_sources(model, part.id.as_str()) {
                let relation = part
                    .relations
                    .iter()
                    .find(|rel| rel.target == fun)
                    .map_or(RelationKind::Refines, |rel| rel.kind);
                functional.push(fun.clone());
                chains.push(TraceChain::Realization {
                    element: id.clone(),
                    part: part.id.clone(),
                    relation,
                    functional: fun,
                });
            }
        }
    }

    Ok(TraceResult {
        element: id,
        hardware_reqs: in_declaration_order(model, hardware),
        part_reqs: in_declaration_order(model, parts),
        functional_reqs: in_declaration_order(model, functional),
        chains,
    })
}
