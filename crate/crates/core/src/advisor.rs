//! Factor-improvement findings and what-if edit scripts.

use std::collections::HashSet;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::metrics::{compute_all, FactorSet, Ratio};
use crate::model::{
    Category, Embodiment, GroupKind, Identifier, Model, ModelBuilder, Subsystem, SubsystemKind,
};
use crate::validate::{is_mirrored, specific_driver_sites, validate, RuleDiagnostic, ValidatedModel};

/// A single structural edit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Edit {
    /// Reclassify a ContPhy/ContSim controller as ContHyb.
    MakeHybrid(Identifier),
    /// Replace two controllers by one new global ContHyb.
    MergeCont { a: Identifier, b: Identifier, new: Identifier },
    /// Mirror two groups. Agents are wrapped into singleton `<id>__grp`
    /// groups; when `phy` is a physical agent, `sim` may be a fresh name for
    /// a generated simulated counterpart.
    AddTwin { sim: Identifier, phy: Identifier },
    /// New hybrid agent on an existing ContHyb, added to both sides of the
    /// twin pair that uses the controller.
    ExtractHyb { new: Identifier, cont: Identifier },
    /// Delete an entity and every reference to it.
    Remove(Identifier),
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edit::MakeHybrid(id) => write!(f, "make_hybrid {id}"),
            Edit::MergeCont { a, b, new } => write!(f, "merge_cont {a} {b} {new}"),
            Edit::AddTwin { sim, phy } => write!(f, "add_twin {sim} {phy}"),
            Edit::ExtractHyb { new, cont } => write!(f, "extract_hyb {new} {cont}"),
            Edit::Remove(id) => write!(f, "remove {id}"),
        }
    }
}

impl Serialize for Edit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("edit script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Parses an edit script: one edit per line, `#` starts a comment.
pub fn parse_edit_script(text: &str) -> Result<Vec<Edit>, ScriptError> {
    let mut edits = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&command, args)) = words.split_first() else { continue };
        let err = |message: String| ScriptError { line: i + 1, message };
        let arity = match command {
            "make_hybrid" | "remove" => 1,
            "add_twin" | "extract_hyb" => 2,
            "merge_cont" => 3,
            other => return Err(err(format!("unknown edit `{other}`"))),
        };
        if args.len() != arity {
            return Err(err(format!("`{command}` takes {arity} argument(s), got {}", args.len())));
        }
        let ids = args
            .iter()
            .map(|a| Identifier::new(*a).map_err(|e| err(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut ids = ids.into_iter();
        let mut next = || ids.next().expect("arity checked");
        edits.push(match command {
            "make_hybrid" => Edit::MakeHybrid(next()),
            "remove" => Edit::Remove(next()),
            "add_twin" => Edit::AddTwin { sim: next(), phy: next() },
            "extract_hyb" => Edit::ExtractHyb { new: next(), cont: next() },
            _ => Edit::MergeCont { a: next(), b: next(), new: next() },
        });
    }
    Ok(edits)
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum WhatIfError {
    #[error("edit {index} (`{edit}`): {reason}")]
    EditPreconditionFailed { index: usize, edit: Edit, reason: String },
    #[error("edit {index} (`{edit}`) leaves the model invalid")]
    ResultInvalid {
        index: usize,
        edit: Edit,
        diagnostics: Vec<RuleDiagnostic>,
    },
}

fn fresh(model: &Model, id: &Identifier) -> Result<(), String> {
    if model.contains(id.as_str()) {
        Err(format!("`{id}` is already declared"))
    } else {
        Ok(())
    }
}

fn controller<'m>(model: &'m Model, id: &Identifier) -> Result<&'m Subsystem, String> {
    let s = model
        .subsystem(id.as_str())
        .ok_or_else(|| format!("`{id}` is not a subsystem of this model"))?;
    if !s.kind.is_controller() {
        return Err(format!("`{id}` is not a control subsystem"));
    }
    Ok(s)
}

/// Removes the declarations in `ids` and every reference to them.
fn purge(b: &mut ModelBuilder, ids: &HashSet<Identifier>) {
    b.requirements.retain(|r| !ids.contains(&r.id));
    for r in &mut b.requirements {
        r.relations.retain(|rel| !ids.contains(&rel.target));
    }
    b.subsystems.retain(|s| !ids.contains(&s.id));
    b.agents.retain(|a| !ids.contains(&a.id));
    for a in &mut b.agents {
        a.subsystems.retain(|s| !ids.contains(s));
    }
    b.groups.retain(|g| !ids.contains(&g.id));
    for g in &mut b.groups {
        g.members.retain(|m| !ids.contains(m));
    }
    b.mirrors.retain(|(s, p)| !ids.contains(s) && !ids.contains(p));
    b.allocations
        .retain(|al| !ids.contains(&al.hardware) && !ids.contains(&al.target));
    b.manage_links
        .retain(|l| !ids.contains(&l.agent) && !ids.contains(&l.requirement));
}

fn twin_group(model: &Model, b: &mut ModelBuilder, id: &Identifier, kind: GroupKind) -> Result<Identifier, String> {
    if model.group(id.as_str()).is_some() {
        return Ok(id.clone());
    }
    let group = Identifier::new(format!("{id}__grp")).map_err(|e| e.to_string())?;
    fresh(model, &group)?;
    b.group(group.clone(), kind, vec![id.clone()]);
    Ok(group)
}

/// Applies one edit, returning the rebuilt (not yet validated) model.
pub fn apply_edit(model: &Model, edit: &Edit) -> Result<Model, String> {
    let mut b = model.to_builder();
    match edit {
        Edit::MakeHybrid(id) => {
            let s = controller(model, id)?;
            if s.kind == SubsystemKind::ContHyb {
                return Err(format!("`{id}` is already a hybrid controller"));
            }
            let target = b.subsystems.iter_mut().find(|s| &s.id == id).expect("present");
            target.kind = SubsystemKind::ContHyb;
        }
        Edit::MergeCont { a, b: other, new } => {
            controller(model, a)?;
            controller(model, other)?;
            if a == other {
                return Err("cannot merge a controller with itself".into());
            }
            fresh(model, new)?;
            if new.qualifier().is_some() {
                return Err(format!("merged controller `{new}` must be a global (unqualified) name"));
            }
            if let Some(agent) = model
                .agents()
                .iter()
                .find(|ag| ag.subsystems.contains(a) && ag.subsystems.contains(other))
            {
                return Err(format!("agent `{}` references both controllers", agent.id));
            }
            b.subsystems.retain(|s| &s.id != a && &s.id != other);
            b.subsystem(new.clone(), SubsystemKind::ContHyb);
            for ag in &mut b.agents {
                for s in &mut ag.subsystems {
                    if s == a || s == other {
                        *s = new.clone();
                    }
                }
            }
            for al in &mut b.allocations {
                if &al.target == a || &al.target == other {
                    al.target = new.clone();
                }
            }
        }
        Edit::AddTwin { sim, phy } => {
            let phy_agent = model.agent(phy.as_str());
            let phy_group = model.group(phy.as_str());
            if phy_agent.is_none() && phy_group.is_none() {
                return Err(format!("`{phy}` is not an agent or group"));
            }
            if !model.contains(sim.as_str()) {
                let Some(pa) = phy_agent.filter(|pa| pa.kind == Embodiment::Physical) else {
                    return Err(format!("`{sim}` is undeclared and `{phy}` is not a physical agent"));
                };
                if sim.qualifier().is_some() {
                    return Err(format!("new agent `{sim}` must have an unqualified name"));
                }
                let cont = model.cont_subsys_of(pa.id.as_str()).map_err(|e| e.to_string())?;
                if cont.kind == SubsystemKind::ContHyb {
                    b.agent(sim.clone(), Embodiment::Simulated, vec![cont.id.clone()]);
                } else {
                    b.agent(sim.clone(), Embodiment::Simulated, vec![]);
                    let local = Identifier::qualified(sim, "Cont").map_err(|e| e.to_string())?;
                    fresh(model, &local)?;
                    b.owned_subsystem(sim, "Cont", SubsystemKind::ContSim)
                        .map_err(|e| e.to_string())?;
                }
            } else if model.agent(sim.as_str()).is_none() && model.group(sim.as_str()).is_none() {
                return Err(format!("`{sim}` is not an agent or group"));
            }
            let sim_group = twin_group(model, &mut b, sim, GroupKind::MirrorSim)?;
            let phy_group = twin_group(model, &mut b, phy, GroupKind::MirrorPhy)?;
            for g in [&sim_group, &phy_group] {
                if model.pair_of_group(g.as_str()).is_some() {
                    return Err(format!("`{g}` is already part of a twin pair"));
                }
            }
            b.mirror(sim_group, phy_group);
        }
        Edit::ExtractHyb { new, cont } => {
            let s = controller(model, cont)?;
            if s.kind != SubsystemKind::ContHyb {
                return Err(format!("`{cont}` is not a hybrid controller"));
            }
            fresh(model, new)?;
            if new.qualifier().is_some() {
                return Err(format!("new agent `{new}` must have an unqualified name"));
            }
            let uses = |group: &Identifier| {
                model
                    .leaf_agents(group.as_str())
                    .unwrap_or_default()
                    .iter()
                    .any(|a| a.subsystems.contains(cont))
            };
            let pair = model
                .twin_pairs()
                .iter()
                .find(|p| uses(&p.sim) || uses(&p.phy))
                .ok_or_else(|| format!("`{cont}` is not used inside any twin pair"))?;
            b.agent(new.clone(), Embodiment::Hybrid, vec![cont.clone()]);
            for g in &mut b.groups {
                if g.id == pair.sim || g.id == pair.phy {
                    g.members.push(new.clone());
                }
            }
        }
        Edit::Remove(id) => {
            let entity = model.resolve(id.as_str()).map_err(|e| e.to_string())?;
            let mut ids: HashSet<Identifier> = HashSet::from([id.clone()]);
            if entity.category() == Category::Agent {
                ids.extend(
                    model
                        .subsystems()
                        .iter()
                        .filter(|s| s.owner.as_ref() == Some(id))
                        .map(|s| s.id.clone()),
                );
            }
            purge(&mut b, &ids);
        }
    }
    b.build().map_err(|errors| {
        errors
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EditOutcome {
    pub edit: Edit,
    pub factors: FactorSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeltaReport {
    pub before: FactorSet,
    pub after: FactorSet,
    pub per_edit: Vec<EditOutcome>,
}

impl fmt::Display for DeltaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.per_edit.iter().enumerate() {
            writeln!(f, "edit {}: {}", i + 1, step.edit)?;
        }
        let after = self.after.entries();
        for (name, before) in self.before.entries() {
            match after.iter().find(|(n, _)| *n == name) {
                Some((_, now)) => writeln!(f, "{name}: {before} -> {now}")?,
                None => writeln!(f, "{name}: {before} -> removed")?,
            }
        }
        for (name, now) in &after {
            if !self.before.entries().iter().any(|(n, _)| n == name) {
                writeln!(f, "{name}: new -> {now}")?;
            }
        }
        Ok(())
    }
}

/// Applies `script` left to right, re-validating and re-evaluating after
/// every edit. The input model is left untouched.
pub fn apply_what_if(model: &ValidatedModel, script: &[Edit]) -> Result<(DeltaReport, ValidatedModel), WhatIfError> {
    let before = compute_all(model);
    let mut current = model.clone();
    let mut per_edit = Vec::with_capacity(script.len());
    for (index, edit) in script.iter().enumerate() {
        let next = apply_edit(&current, edit).map_err(|reason| WhatIfError::EditPreconditionFailed {
            index,
            edit: edit.clone(),
            reason,
        })?;
        current = validate(&next).map_err(|failure| WhatIfError::ResultInvalid {
            index,
            edit: edit.clone(),
            diagnostics: failure.diagnostics,
        })?;
        per_edit.push(EditOutcome {
            edit: edit.clone(),
            factors: compute_all(&current),
        });
    }
    let after = per_edit.last().map_or_else(|| before.clone(), |e| e.factors.clone());
    Ok((DeltaReport { before, after, per_edit }, current))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Factor {
    #[serde(rename = "IIF")]
    Iif,
    #[serde(rename = "DGF")]
    Dgf,
    #[serde(rename = "DTC")]
    Dtc,
    #[serde(rename = "MIF")]
    Mif,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::Iif => "IIF",
            Factor::Dgf => "DGF",
            Factor::Dtc => "DTC",
            Factor::Mif => "MIF",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Action {
    ReclassifyAsHybrid,
    MergeControllers,
    ExtractHybridAgent,
    AddTwinPair,
    RedesignDriverInterface,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub factor: Factor,
    pub subject: Identifier,
    pub action: Action,
    pub rationale: String,
    /// Second entity involved, e.g. the other controller of a merge.
    pub partner: Option<Identifier>,
    /// Label of the twin pair concerned.
    pub pair: Option<String>,
    /// The edit that carries out the advice.
    pub edit: Edit,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}] {} (edit: {})", self.factor, self.action, self.subject, self.rationale, self.edit)
    }
}

/// `base`, or `base2`, `base3`, … whichever is not yet declared.
fn unique(model: &Model, base: &str, taken: &HashSet<String>) -> Identifier {
    let free = |s: &str| !model.contains(s) && !taken.contains(s);
    let name = if free(base) {
        base.to_string()
    } else {
        (2..).map(|n| format!("{base}{n}")).find(|s| free(s)).expect("unbounded")
    };
    Identifier::new(name).expect("derived from valid identifiers")
}

fn base_name(label: &str, fallback: &Identifier) -> String {
    if Identifier::new(label).is_ok_and(|l| l.qualifier().is_none()) {
        label.to_string()
    } else {
        fallback.to_string()
    }
}

fn side_controllers<'m>(model: &'m Model, group: &Identifier, kind: SubsystemKind) -> Vec<&'m Identifier> {
    let mut out: Vec<&Identifier> = Vec::new();
    for a in model.leaf_agents(group.as_str()).unwrap_or_default() {
        if let Ok(c) = model.cont_subsys_of(a.id.as_str()) {
            if c.kind == kind && !out.contains(&&c.id) {
                out.push(&c.id);
            }
        }
    }
    out
}

/// Every candidate finding, before verification.
fn candidates(model: &ValidatedModel) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut consumed: HashSet<&Identifier> = HashSet::new();
    let mut taken = HashSet::new();

    for p in model.top_level_pairs() {
        let sims = side_controllers(model, &p.sim, SubsystemKind::ContSim);
        let phys = side_controllers(model, &p.phy, SubsystemKind::ContPhy);
        for (s, q) in sims.into_iter().zip(phys) {
            if consumed.contains(s) || consumed.contains(q) {
                continue;
            }
            consumed.insert(s);
            consumed.insert(q);
            let new = unique(model, &format!("{}Cont", base_name(&p.label, &p.sim)), &taken);
            taken.insert(new.to_string());
            findings.push(Finding {
                factor: Factor::Mif,
                subject: s.clone(),
                action: Action::MergeControllers,
                rationale: format!(
                    "W102/W103: twin pair {} runs `{s}` (cont simulated) and `{q}` (cont physical); \
                     extract their common part into one shared hybrid controller",
                    p.label
                ),
                partner: Some(q.clone()),
                pair: Some(p.label.clone()),
                edit: Edit::MergeCont {
                    a: s.clone(),
                    b: q.clone(),
                    new,
                },
            });
        }
    }

    for s in model.subsystems() {
        if s.kind.is_embodiment_specific_controller() && !consumed.contains(&s.id) {
            findings.push(Finding {
                factor: Factor::Iif,
                subject: s.id.clone(),
                action: Action::ReclassifyAsHybrid,
                rationale: format!(
                    "W102: {} controller; make it embodiment-independent",
                    s.kind.keywords()
                ),
                partner: None,
                pair: None,
                edit: Edit::MakeHybrid(s.id.clone()),
            });
        }
    }

    for p in model.top_level_pairs() {
        let sim = side_controllers(model, &p.sim, SubsystemKind::ContHyb);
        let phy = side_controllers(model, &p.phy, SubsystemKind::ContHyb);
        let sim_only = sim.iter().filter(|c| !phy.contains(c));
        let phy_only: Vec<_> = phy.iter().filter(|c| !sim.contains(c)).collect();
        for (s, q) in sim_only.zip(phy_only) {
            let new = unique(model, &format!("{}Hyb", s.local()), &taken);
            taken.insert(new.to_string());
            findings.push(Finding {
                factor: Factor::Mif,
                subject: (*s).clone(),
                action: Action::ExtractHybridAgent,
                rationale: format!(
                    "twin pair {} uses distinct hybrid controllers `{s}` and `{q}` on its two sides; \
                     share the common computation through a hybrid agent (may also affect IIF)",
                    p.label
                ),
                partner: Some((**q).clone()),
                pair: Some(p.label.clone()),
                edit: Edit::ExtractHyb {
                    new,
                    cont: (*s).clone(),
                },
            });
        }
    }

    for a in model.agents().iter().filter(|a| a.kind == Embodiment::Physical) {
        if is_mirrored(model, a.id.as_str()) {
            continue;
        }
        let twin = unique(model, &format!("{}_DT", a.id), &taken);
        taken.insert(twin.to_string());
        findings.push(Finding {
            factor: Factor::Dtc,
            subject: a.id.clone(),
            action: Action::AddTwinPair,
            rationale: "W101: physical agent has no digital twin; mirroring it extends simulation-based testing"
                .into(),
            partner: None,
            pair: None,
            edit: Edit::AddTwin {
                sim: twin,
                phy: a.id.clone(),
            },
        });
    }

    for (sub, agents) in specific_driver_sites(model) {
        let agent = agents[0];
        let cont = model.cont_subsys_of(agent.as_str()).expect("site agents have a controller");
        findings.push(Finding {
            factor: Factor::Dgf,
            subject: sub.clone(),
            action: Action::RedesignDriverInterface,
            rationale: format!(
                "W104: hardware interface is driven through embodiment-specific controller `{}`",
                cont.id
            ),
            partner: Some(cont.id.clone()),
            pair: None,
            edit: Edit::MakeHybrid(cont.id.clone()),
        });
    }
    findings
}

fn target_factor(factors: &FactorSet, finding: &Finding) -> Option<Ratio> {
    match finding.factor {
        Factor::Iif => Some(factors.iif),
        Factor::Dgf => Some(factors.dgf),
        Factor::Dtc => Some(factors.dtc),
        Factor::Mif => finding.pair.as_deref().and_then(|l| factors.mif_for(l)),
    }
}

/// Findings whose canonical edit applies cleanly and does not lower the
/// factor it targets, in emission order.
pub fn advise(model: &ValidatedModel) -> Vec<Finding> {
    let before = compute_all(model);
    candidates(model)
        .into_iter()
        .filter(|finding| {
            let Ok((report, _)) = apply_what_if(model, std::slice::from_ref(&finding.edit)) else {
                return false;
            };
            match (target_factor(&before, finding), target_factor(&report.after, finding)) {
                (Some(b), Some(a)) if b.is_defined() => {
                    a.cmp_value(&b).is_some_and(|o| o != std::cmp::Ordering::Less)
                }
                (Some(_), Some(_)) => true,
                _ => false,
            }
        })
        .collect()
}
