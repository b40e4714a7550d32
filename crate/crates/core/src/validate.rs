//! Well-formedness rules over a parsed [`Model`] and configurational
//! inheritance between requirements.
//!
//! | code | rule |
//! |------|------|
//! | E001 | agent references no control subsystem, or more than one |
//! | E002 | physical agent references a simulated-embodiment subsystem |
//! | E003 | simulated agent references a physical-embodiment subsystem |
//! | E004 | hybrid agent references anything but a single hybrid controller |
//! | E005 | mirror endpoints are not (mirror_sim, mirror_phy), or a group sits in two mirrors |
//! | E006 | functional requirement satisfied by no part requirement |
//! | E007 | part requirement whose explicit configuration contradicts its inherited one |
//! | E008 | bad manage-link, or world-mirror member without one |
//! | E009 | allocation source is not a hardware requirement |
//! | E010 | mirror group holds an agent of the opposite embodiment, or none of its own |
//! | E011 | requirement lies on a `refines` cycle |
//! | W101 | physical agent not inside any mirrored physical group |
//! | W102 | embodiment-specific controller present |
//! | W103 | twin pair whose sides share no hybrid controller |
//! | W104 | real subsystem driven only by embodiment-specific controllers |
//! | W105 | functional requirement without configuration (defaults to obligatory) |

use std::collections::HashSet;
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::Serialize;
use thiserror::Error;

use crate::diagnostic::Severity;
use crate::model::{
    ConfigTag, Configuration, Embodiment, GroupKind, Identifier, Model, RelationKind, RequirementRole,
    SubsystemKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleDiagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub subject: Identifier,
    pub message: String,
}

impl RuleDiagnostic {
    fn error(code: &'static str, subject: &Identifier, message: impl Into<String>) -> Self {
        RuleDiagnostic {
            severity: Severity::Error,
            code,
            subject: subject.clone(),
            message: message.into(),
        }
    }

    fn warning(code: &'static str, subject: &Identifier, message: impl Into<String>) -> Self {
        RuleDiagnostic {
            severity: Severity::Warning,
            code,
            subject: subject.clone(),
            message: message.into(),
        }
    }
}

impl fmt::Display for RuleDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}] {}", self.severity, self.code, self.subject, self.message)
    }
}

/// Resolved configuration of every part and functional requirement, in
/// requirement declaration order.
pub type ConfigMap = IndexMap<Identifier, Configuration>;

/// A model with no error-severity diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedModel {
    model: Model,
    resolved_config: ConfigMap,
    warnings: Vec<RuleDiagnostic>,
}

impl ValidatedModel {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn resolved_config(&self) -> &ConfigMap {
        &self.resolved_config
    }

    pub fn warnings(&self) -> &[RuleDiagnostic] {
        &self.warnings
    }

    pub fn into_model(self) -> Model {
        self.model
    }
}

impl std::ops::Deref for ValidatedModel {
    type Target = Model;

    fn deref(&self) -> &Model {
        &self.model
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("model has {} validation error(s)", self.error_count())]
pub struct ValidationFailure {
    pub diagnostics: Vec<RuleDiagnostic>,
}

impl ValidationFailure {
    pub fn error_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error).count()
    }
}

/// Runs the whole rule catalog. On success the warnings travel with the
/// [`ValidatedModel`]; on failure every diagnostic is returned.
pub fn validate(model: &Model) -> Result<ValidatedModel, ValidationFailure> {
    let (resolved_config, diagnostics) = run_rules(model);
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return Err(ValidationFailure { diagnostics });
    }
    Ok(ValidatedModel {
        model: model.clone(),
        resolved_config,
        warnings: diagnostics,
    })
}

/// All diagnostics for `model`, ordered by code and subject declaration order.
pub fn diagnose(model: &Model) -> Vec<RuleDiagnostic> {
    run_rules(model).1
}

/// Inherited configuration for every part and functional requirement.
/// Fails with the E007/E011 diagnostics when inheritance is contradictory
/// or cyclic.
pub fn resolve_config(model: &Model) -> Result<ConfigMap, Vec<RuleDiagnostic>> {
    let mut diags = Vec::new();
    let map = config_rules(model, &mut diags);
    diags.retain(|d| d.severity == Severity::Error);
    if diags.is_empty() {
        Ok(map)
    } else {
        sort(model, &mut diags);
        Err(diags)
    }
}

/// Functional requirements a requirement inherits from: the functional
/// targets of its `derives`/`satisfies` relations, plus everything reached
/// through `refines` chains. Cycle-safe.
pub fn functional_sources(model: &Model, requirement: &str) -> Vec<Identifier> {
    let mut out = IndexSet::new();
    let mut seen = HashSet::new();
    collect_sources(model, requirement, &mut out, &mut seen);
    out.into_iter().collect()
}

fn collect_sources(model: &Model, id: &str, out: &mut IndexSet<Identifier>, seen: &mut HashSet<String>) {
    if !seen.insert(id.to_string()) {
        return;
    }
    let Some(r) = model.requirement(id) else { return };
    for rel in &r.relations {
        let Some(target) = model.requirement(rel.target.as_str()) else { continue };
        match rel.kind {
            RelationKind::Derives | RelationKind::Satisfies if target.role.is_functional() => {
                out.insert(target.id.clone());
            }
            RelationKind::Refines if target.role.is_functional() => {
                out.insert(target.id.clone());
            }
            RelationKind::Refines => collect_sources(model, target.id.as_str(), out, seen),
            _ => {}
        }
    }
}

fn run_rules(model: &Model) -> (ConfigMap, Vec<RuleDiagnostic>) {
    let mut diags = Vec::new();
    agent_rules(model, &mut diags);
    mirror_rules(model, &mut diags);
    let config = config_rules(model, &mut diags);
    satisfaction_rule(model, &mut diags);
    link_rules(model, &mut diags);
    coverage_rules(model, &mut diags);
    sort(model, &mut diags);
    (config, diags)
}

fn sort(model: &Model, diags: &mut [RuleDiagnostic]) {
    diags.sort_by_key(|d| (d.code, model.declaration_rank(d.subject.as_str())));
}

fn agent_rules(model: &Model, diags: &mut Vec<RuleDiagnostic>) {
    for a in model.agents() {
        let subs: Vec<_> = model.referenced_subsystems(a).collect();
        let controllers = subs.iter().filter(|s| s.kind.is_controller()).count();
        if controllers != 1 {
            diags.push(RuleDiagnostic::error(
                "E001",
                &a.id,
                format!("agent references {controllers} control subsystems; exactly one is required"),
            ));
        }
        match a.kind {
            Embodiment::Physical => {
                for s in subs.iter().filter(|s| s.kind.embodiment() == Embodiment::Simulated) {
                    diags.push(RuleDiagnostic::error(
                        "E002",
                        &a.id,
                        format!("physical agent references simulated subsystem `{}`", s.id),
                    ));
                }
            }
            Embodiment::Simulated => {
                for s in subs.iter().filter(|s| s.kind.embodiment() == Embodiment::Physical) {
                    diags.push(RuleDiagnostic::error(
                        "E003",
                        &a.id,
                        format!("simulated agent references physical subsystem `{}`", s.id),
                    ));
                }
            }
            Embodiment::Hybrid => {
                for s in subs.iter().filter(|s| s.kind != SubsystemKind::ContHyb) {
                    diags.push(RuleDiagnostic::error(
                        "E004",
                        &a.id,
                        format!(
                            "hybrid agent may only reference a hybrid controller, but references `{}` ({})",
                            s.id,
                            s.kind.keywords()
                        ),
                    ));
                }
            }
        }
    }
}

fn mirror_rules(model: &Model, diags: &mut Vec<RuleDiagnostic>) {
    let mut sides_seen: HashSet<&str> = HashSet::new();
    for p in model.twin_pairs() {
        for (side, expected) in [(&p.sim, GroupKind::MirrorSim), (&p.phy, GroupKind::MirrorPhy)] {
            let kind = model.group(side.as_str()).map(|g| g.kind);
            if kind != Some(expected) {
                diags.push(RuleDiagnostic::error(
                    "E005",
                    side,
                    format!("mirror side must be a {} group", expected.keyword()),
                ));
            }
            if !sides_seen.insert(side.as_str()) {
                diags.push(RuleDiagnostic::error("E005", side, "group takes part in more than one mirror"));
            }
        }
    }
    for g in model.groups() {
        let (own, opposite) = match g.kind {
            GroupKind::MirrorPhy => (Embodiment::Physical, Embodiment::Simulated),
            GroupKind::MirrorSim => (Embodiment::Simulated, Embodiment::Physical),
            _ => continue,
        };
        let Ok(leaves) = model.leaf_agents(g.id.as_str()) else { continue };
        for a in leaves.iter().filter(|a| a.kind == opposite) {
            diags.push(RuleDiagnostic::error(
                "E010",
                &g.id,
                format!("{} group contains {} agent `{}`", g.kind.keyword(), opposite, a.id),
            ));
        }
        if !leaves.iter().any(|a| a.kind == own) {
            diags.push(RuleDiagnostic::error(
                "E010",
                &g.id,
                format!("{} group contains no {} agent", g.kind.keyword(), own),
            ));
        }
    }
}

fn on_refines_cycle(model: &Model, start: &Identifier) -> bool {
    let mut stack: Vec<&Identifier> = vec![start];
    let mut seen = HashSet::new();
    while let Some(id) = stack.pop() {
        let Some(r) = model.requirement(id.as_str()) else { continue };
        for rel in r.relations.iter().filter(|rel| rel.kind == RelationKind::Refines) {
            if rel.target == *start {
                return true;
            }
            if seen.insert(rel.target.as_str()) {
                stack.push(&rel.target);
            }
        }
    }
    false
}

fn config_rules(model: &Model, diags: &mut Vec<RuleDiagnostic>) -> ConfigMap {
    for r in model.requirements() {
        if on_refines_cycle(model, &r.id) {
            diags.push(RuleDiagnostic::error("E011", &r.id, "requirement lies on a `refines` cycle"));
        }
    }
    let functional = |r: &crate::model::Requirement| match r.config.explicit() {
        Some(c) => c,
        None => Configuration::Obligatory,
    };
    let mut map = ConfigMap::new();
    for r in model.requirements() {
        if r.role.is_functional() {
            if r.config == ConfigTag::Unset {
                diags.push(RuleDiagnostic::warning(
                    "W105",
                    &r.id,
                    "functional requirement has no configurational stereotype; treated as obligatory",
                ));
            }
            map.insert(r.id.clone(), functional(r));
        } else if r.role.is_part() {
            let sources = functional_sources(model, r.id.as_str());
            let derived = if sources.is_empty() {
                None
            } else if sources
                .iter()
                .filter_map(|s| model.requirement(s.as_str()))
                .any(|s| functional(s) == Configuration::Obligatory)
            {
                Some(Configuration::Obligatory)
            } else {
                Some(Configuration::Optional)
            };
            let resolved = match (r.config.explicit(), derived) {
                (Some(explicit), Some(derived)) if explicit != derived => {
                    diags.push(RuleDiagnostic::error(
                        "E007",
                        &r.id,
                        format!("declared {explicit}, but the functional requirements it derives from make it {derived}"),
                    ));
                    explicit
                }
                (Some(explicit), _) => explicit,
                (None, Some(derived)) => derived,
                (None, None) => Configuration::Obligatory,
            };
            map.insert(r.id.clone(), resolved);
        }
    }
    map
}

fn satisfaction_rule(model: &Model, diags: &mut Vec<RuleDiagnostic>) {
    // Directly satisfied functionals, then close over functionals that derive
    // from or refine an already-satisfied one.
    let mut satisfied: HashSet<Identifier> = model
        .requirements()
        .iter()
        .filter(|r| r.role.is_part())
        .flat_map(|r| functional_sources(model, r.id.as_str()))
        .collect();
    loop {
        let mut grew = false;
        for r in model.requirements().iter().filter(|r| r.role.is_functional()) {
            if satisfied.contains(&r.id) {
                continue;
            }
            let via_child = model.requirements().iter().any(|c| {
                c.role.is_functional()
                    && satisfied.contains(&c.id)
                    && c.relations.iter().any(|rel| {
                        matches!(rel.kind, RelationKind::Derives | RelationKind::Refines) && rel.target == r.id
                    })
            });
            if via_child {
                satisfied.insert(r.id.clone());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    for r in model.requirements().iter().filter(|r| r.role.is_functional()) {
        if !satisfied.contains(&r.id) {
            diags.push(RuleDiagnostic::error(
                "E006",
                &r.id,
                "functional requirement is not satisfied by any part requirement",
            ));
        }
    }
}

fn link_rules(model: &Model, diags: &mut Vec<RuleDiagnostic>) {
    for l in model.manage_links() {
        if model.agent(l.agent.as_str()).map(|a| a.kind) != Some(Embodiment::Simulated) {
            diags.push(RuleDiagnostic::error("E008", &l.agent, "only simulated agents may manage exogenous agents"));
        }
        if model.requirement(l.requirement.as_str()).map(|r| r.role) != Some(RequirementRole::ExogAgent) {
            diags.push(RuleDiagnostic::error(
                "E008",
                &l.agent,
                format!("manage-link target `{}` is not an exogenous-agent requirement", l.requirement),
            ));
        }
    }
    for g in model.groups().iter().filter(|g| g.kind == GroupKind::WorldMirror) {
        for m in &g.members {
            if !model.manage_links().iter().any(|l| &l.agent == m) {
                diags.push(RuleDiagnostic::error(
                    "E008",
                    m,
                    format!("member of world-mirror group `{}` manages no exogenous agent", g.id),
                ));
            }
        }
    }
    for al in model.allocations() {
        if model.requirement(al.hardware.as_str()).map(|r| r.role) != Some(RequirementRole::Hardware) {
            diags.push(RuleDiagnostic::error(
                "E009",
                &al.hardware,
                format!("allocation to `{}` must come from a hardware requirement", al.target),
            ));
        }
    }
}

/// Controllers (hybrid only) referenced by the leaf agents of a group.
fn hybrid_controllers(model: &Model, group: &str) -> IndexSet<Identifier> {
    model
        .leaf_agents(group)
        .unwrap_or_default()
        .into_iter()
        .flat_map(|a| model.referenced_subsystems(a))
        .filter(|s| s.kind == SubsystemKind::ContHyb)
        .map(|s| s.id.clone())
        .collect()
}

/// Whether the physical agent sits inside the physical side of some pair.
pub(crate) fn is_mirrored(model: &Model, agent: &str) -> bool {
    model.twin_pairs().iter().any(|p| {
        model.group(p.phy.as_str()).is_some_and(|g| g.kind == GroupKind::MirrorPhy)
            && model
                .leaf_agents(p.phy.as_str())
                .is_ok_and(|leaves| leaves.iter().any(|a| a.id == agent))
    })
}

/// Real subsystems referenced only by agents whose controller is
/// embodiment-specific.
pub(crate) fn specific_driver_sites(model: &Model) -> Vec<(&Identifier, Vec<&Identifier>)> {
    model
        .subsystems()
        .iter()
        .filter(|s| s.kind.is_real())
        .filter_map(|s| {
            let agents: Vec<_> = model.agents_referencing(s.id.as_str()).collect();
            let all_specific = !agents.is_empty()
                && agents.iter().all(|a| {
                    model
                        .cont_subsys_of(a.id.as_str())
                        .is_ok_and(|c| c.kind.is_embodiment_specific_controller())
                });
            all_specific.then(|| (&s.id, agents.iter().map(|a| &a.id).collect()))
        })
        .collect()
}

fn coverage_rules(model: &Model, diags: &mut Vec<RuleDiagnostic>) {
    for a in model.agents().iter().filter(|a| a.kind == Embodiment::Physical) {
        if !is_mirrored(model, a.id.as_str()) {
            diags.push(RuleDiagnostic::warning(
                "W101",
                &a.id,
                "physical agent is not mirrored by a digital twin",
            ));
        }
    }
    for s in model.subsystems().iter().filter(|s| s.kind.is_embodiment_specific_controller()) {
        diags.push(RuleDiagnostic::warning(
            "W102",
            &s.id,
            format!("{} controller lowers controller integrity; consider a hybrid controller", s.kind.keywords()),
        ));
    }
    for p in model.twin_pairs() {
        let sim = hybrid_controllers(model, p.sim.as_str());
        let phy = hybrid_controllers(model, p.phy.as_str());
        if sim.intersection(&phy).next().is_none() {
            diags.push(RuleDiagnostic::warning(
                "W103",
                &p.sim,
                format!("twin pair {} shares no hybrid controller between its sides", p.label),
            ));
        }
    }
    for (sub, agents) in specific_driver_sites(model) {
        let names: Vec<_> = agents.iter().map(|a| a.as_str()).collect();
        diags.push(RuleDiagnostic::warning(
            "W104",
            sub,
            format!(
                "real subsystem is driven only through embodiment-specific controllers (agents: {})",
                names.join(", ")
            ),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn model(structure: &str, requirements: &str) -> Model {
        let src = format!("model \"t\" {{ requirements {{ {requirements} }} structure {{ {structure} }} }}");
        let out = parse(&src, "t");
        out.model.unwrap_or_else(|| panic!("{:#?}", out.diagnostics))
    }

    #[test]
    fn subject_ordering_follows_declaration() {
        let m = model(
            "subsystem C1 : cont physical; subsystem C0 : cont simulated;
             agent B : physical { uses C1; } agent A : simulated { uses C0; }",
            "",
        );
        let d = diagnose(&m);
        let rendered: Vec<String> = d.iter().map(|d| format!("{} {}", d.code, d.subject)).collect();
        assert_eq!(rendered, vec!["W101 B", "W102 C1", "W102 C0"]);
    }

    #[test]
    fn diagnostics_render_in_text_form() {
        let m = model("subsystem C : cont hybrid; agent H : hybrid { uses C; owns subsystem R : real_rec physical; }", "");
        let d = diagnose(&m);
        assert_eq!(
            d[0].to_string(),
            "error E004 [H] hybrid agent may only reference a hybrid controller, but references `H.R` (real_rec physical)"
        );
    }

    #[test]
    fn multi_source_config_prefers_obligatory() {
        for order in [["Fo", "Fp"], ["Fp", "Fo"]] {
            let reqs = format!(
                "req Fo : functional embodied obligatory; req Fp : functional embodied optional;
                 req P : part physical {{ derives {}; derives {}; }}",
                order[0], order[1]
            );
            let m = model("", &reqs);
            assert_eq!(resolve_config(&m).unwrap()["P"], Configuration::Obligatory);
        }
    }

    #[test]
    fn refines_chains_carry_sources() {
        let m = model(
            "",
            "req F : functional embodied optional;
             req Base : part physical { derives F; }
             req Special : part physical { refines Base; }",
        );
        let c = resolve_config(&m).unwrap();
        assert_eq!(c["Special"], Configuration::Optional);
        assert_eq!(functional_sources(&m, "Special"), vec![Identifier::new("F").unwrap()]);
    }

    #[test]
    fn refines_cycle_is_reported() {
        let m = model(
            "",
            "req F : functional embodied; req A : part physical { derives F; refines B; }
             req B : part physical { refines A; }",
        );
        let err = resolve_config(&m).unwrap_err();
        let codes: Vec<_> = err.iter().map(|d| (d.code, d.subject.as_str())).collect();
        assert_eq!(codes, vec![("E011", "A"), ("E011", "B")]);
    }

    #[test]
    fn satisfaction_is_inherited_from_refining_functionals() {
        let m = model(
            "",
            "req Top : functional embodied obligatory;
             req Sub : functional embodied obligatory { refines Top; }
             req P : part physical { satisfies Sub; }",
        );
        assert!(diagnose(&m).is_empty());
    }

    #[test]
    fn validation_is_idempotent() {
        let m = model(
            "subsystem C : cont physical; agent A : physical { uses C; }",
            "req F : functional embodied;",
        );
        let first = diagnose(&m);
        assert_eq!(first, diagnose(&m));
        let v = validate(&m).unwrap_err();
        assert_eq!(v.diagnostics, first);
    }
}
