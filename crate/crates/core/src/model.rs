//! Typed entity graph for simulated-physical system architectures.
//!
//! A [`Model`] holds a requirement graph and a structure graph (subsystems,
//! agents, agent groups) together with the cross-links between them: twin
//! pairs, allocations and manage-links. Models are immutable; every change goes
//! through a [`ModelBuilder`], which enforces namespace uniqueness, referential
//! integrity and acyclic group membership.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Entity name. Either a bare token (`RobotIf`) or, for subsystems declared
/// inline inside an agent, the owner-qualified form (`TiagoPhy.Lidar`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Identifier(String);

fn is_valid_segment(segment: &str) -> bool {
    let mut chars = segment.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Identifier {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        let segments: Vec<&str> = text.split('.').collect();
        if segments.len() > 2 || !segments.iter().all(|s| is_valid_segment(s)) {
            return Err(ModelError::InvalidIdentifier(text));
        }
        Ok(Identifier(text))
    }

    /// `owner.local`, the name under which an inline-owned subsystem is registered.
    pub fn qualified(owner: &Identifier, local: &str) -> Result<Self, ModelError> {
        if owner.qualifier().is_some() {
            return Err(ModelError::InvalidIdentifier(format!("{owner}.{local}")));
        }
        Identifier::new(format!("{owner}.{local}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn qualifier(&self) -> Option<&str> {
        self.0.split_once('.').map(|(q, _)| q)
    }

    pub fn local(&self) -> &str {
        self.0.split_once('.').map_or(&self.0, |(_, l)| l)
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Identifier {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Identifier::new(s)
    }
}

impl std::borrow::Borrow<str> for Identifier {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Identifier {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Identifier {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// The world(s) an agent or subsystem interacts with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Embodiment {
    Physical,
    Simulated,
    Hybrid,
}

pub type AgentKind = Embodiment;

impl Embodiment {
    pub fn keyword(self) -> &'static str {
        match self {
            Embodiment::Physical => "physical",
            Embodiment::Simulated => "simulated",
            Embodiment::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Embodiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RequirementRole {
    FunctionalEmbodied,
    FunctionalComputational,
    PartPhysical,
    PartSimulated,
    PartHybrid,
    Hardware,
    ExogAgent,
}

impl RequirementRole {
    pub fn is_functional(self) -> bool {
        matches!(
            self,
            RequirementRole::FunctionalEmbodied | RequirementRole::FunctionalComputational
        )
    }

    /// Part requirements proper; hardware requirements are not included.
    pub fn is_part(self) -> bool {
        matches!(
            self,
            RequirementRole::PartPhysical | RequirementRole::PartSimulated | RequirementRole::PartHybrid
        )
    }

    pub fn keywords(self) -> &'static str {
        match self {
            RequirementRole::FunctionalEmbodied => "functional embodied",
            RequirementRole::FunctionalComputational => "functional computational",
            RequirementRole::PartPhysical => "part physical",
            RequirementRole::PartSimulated => "part simulated",
            RequirementRole::PartHybrid => "part hybrid",
            RequirementRole::Hardware => "hardware",
            RequirementRole::ExogAgent => "exogenous",
        }
    }
}

/// Configurational stereotype as written in the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Default)]
pub enum ConfigTag {
    Obligatory,
    Optional,
    #[default]
    Unset,
}

/// Configurational stereotype after inheritance has been resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Obligatory,
    Optional,
}

impl ConfigTag {
    pub fn explicit(self) -> Option<Configuration> {
        match self {
            ConfigTag::Obligatory => Some(Configuration::Obligatory),
            ConfigTag::Optional => Some(Configuration::Optional),
            ConfigTag::Unset => None,
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Configuration::Obligatory => "obligatory",
            Configuration::Optional => "optional",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Derives,
    Satisfies,
    Verifies,
    Refines,
}

impl RelationKind {
    pub fn keyword(self) -> &'static str {
        match self {
            RelationKind::Derives => "derives",
            RelationKind::Satisfies => "satisfies",
            RelationKind::Verifies => "verifies",
            RelationKind::Refines => "refines",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub kind: RelationKind,
    pub target: Identifier,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub id: Identifier,
    pub role: RequirementRole,
    pub config: ConfigTag,
    pub relations: Vec<Relation>,
}

impl Requirement {
    pub fn new(id: Identifier, role: RequirementRole, config: ConfigTag) -> Self {
        Requirement {
            id,
            role,
            config,
            relations: Vec::new(),
        }
    }

    pub fn with_relation(mut self, kind: RelationKind, target: Identifier) -> Self {
        self.relations.push(Relation { kind, target });
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SubsystemKind {
    ContPhy,
    ContSim,
    ContHyb,
    VirtRecPhy,
    VirtRecSim,
    VirtEffPhy,
    VirtEffSim,
    RealRecPhy,
    RealRecSim,
    RealEffPhy,
    RealEffSim,
}

impl SubsystemKind {
    pub const ALL: [SubsystemKind; 11] = [
        SubsystemKind::ContPhy,
        SubsystemKind::ContSim,
        SubsystemKind::ContHyb,
        SubsystemKind::VirtRecPhy,
        SubsystemKind::VirtRecSim,
        SubsystemKind::VirtEffPhy,
        SubsystemKind::VirtEffSim,
        SubsystemKind::RealRecPhy,
        SubsystemKind::RealRecSim,
        SubsystemKind::RealEffPhy,
        SubsystemKind::RealEffSim,
    ];

    pub fn is_controller(self) -> bool {
        matches!(self, SubsystemKind::ContPhy | SubsystemKind::ContSim | SubsystemKind::ContHyb)
    }

    pub fn is_real(self) -> bool {
        matches!(
            self,
            SubsystemKind::RealRecPhy
                | SubsystemKind::RealRecSim
                | SubsystemKind::RealEffPhy
                | SubsystemKind::RealEffSim
        )
    }

    pub fn is_virtual(self) -> bool {
        matches!(
            self,
            SubsystemKind::VirtRecPhy
                | SubsystemKind::VirtRecSim
                | SubsystemKind::VirtEffPhy
                | SubsystemKind::VirtEffSim
        )
    }

    /// Controllers that are tied to a single embodiment.
    pub fn is_embodiment_specific_controller(self) -> bool {
        matches!(self, SubsystemKind::ContPhy | SubsystemKind::ContSim)
    }

    pub fn embodiment(self) -> Embodiment {
        use SubsystemKind::*;
        match self {
            ContHyb => Embodiment::Hybrid,
            ContPhy | VirtRecPhy | VirtEffPhy | RealRecPhy | RealEffPhy => Embodiment::Physical,
            ContSim | VirtRecSim | VirtEffSim | RealRecSim | RealEffSim => Embodiment::Simulated,
        }
    }

    /// The two DSL keywords, e.g. `real_rec physical`.
    pub fn keywords(self) -> &'static str {
        use SubsystemKind::*;
        match self {
            ContPhy => "cont physical",
            ContSim => "cont simulated",
            ContHyb => "cont hybrid",
            VirtRecPhy => "virt_rec physical",
            VirtRecSim => "virt_rec simulated",
            VirtEffPhy => "virt_eff physical",
            VirtEffSim => "virt_eff simulated",
            RealRecPhy => "real_rec physical",
            RealRecSim => "real_rec simulated",
            RealEffPhy => "real_eff physical",
            RealEffSim => "real_eff simulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    pub id: Identifier,
    pub kind: SubsystemKind,
    /// Set for subsystems declared inline (`owns`) inside an agent.
    pub owner: Option<Identifier>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agent {
    pub id: Identifier,
    pub kind: AgentKind,
    pub subsystems: Vec<Identifier>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GroupKind {
    Plain,
    WorldMirror,
    MirrorPhy,
    MirrorSim,
    Setup,
}

impl GroupKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GroupKind::Plain => "agents",
            GroupKind::WorldMirror => "world_mirror",
            GroupKind::MirrorPhy => "mirror_phy",
            GroupKind::MirrorSim => "mirror_sim",
            GroupKind::Setup => "setup",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentGroup {
    pub id: Identifier,
    pub kind: GroupKind,
    pub members: Vec<Identifier>,
}

/// Mirror relationship between a digital twin (simulated side) and its
/// physical twin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TwinPair {
    pub sim: Identifier,
    pub phy: Identifier,
    /// 0 for top-level pairs; nested pairs inside decomposed groups are deeper.
    pub layer: u32,
    /// Display name, derived from the common prefix of the two group names.
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub hardware: Identifier,
    pub target: Identifier,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManageLink {
    pub agent: Identifier,
    pub requirement: Identifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Requirement,
    Subsystem,
    Agent,
    Group,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Requirement => "requirement",
            Category::Subsystem => "subsystem",
            Category::Agent => "agent",
            Category::Group => "group",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity<'m> {
    Requirement(&'m Requirement),
    Subsystem(&'m Subsystem),
    Agent(&'m Agent),
    Group(&'m AgentGroup),
}

impl Entity<'_> {
    pub fn category(&self) -> Category {
        match self {
            Entity::Requirement(_) => Category::Requirement,
            Entity::Subsystem(_) => Category::Subsystem,
            Entity::Agent(_) => Category::Agent,
            Entity::Group(_) => Category::Group,
        }
    }

    pub fn id(&self) -> &Identifier {
        match self {
            Entity::Requirement(r) => &r.id,
            Entity::Subsystem(s) => &s.id,
            Entity::Agent(a) => &a.id,
            Entity::Group(g) => &g.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate identifier `{id}`")]
    DuplicateIdentifier { id: Identifier },
    #[error("`{subject}` references undeclared `{target}`")]
    DanglingReference { subject: Identifier, target: Identifier },
    #[error("`{subject}` references `{target}`, which is a {found}; expected {expected}")]
    WrongCategory {
        subject: Identifier,
        target: Identifier,
        found: Category,
        expected: &'static str,
    },
    #[error("owned subsystem `{subsystem}` is not referenced by its owner `{owner}`")]
    OrphanOwnedSubsystem { subsystem: Identifier, owner: Identifier },
    #[error("group membership cycle through `{group}`")]
    MembershipCycle { group: Identifier },
    #[error("exogenous-agent requirement `{requirement}` cannot carry a configurational stereotype")]
    ExogenousWithConfig { requirement: Identifier },
    #[error("`{requirement}` {kind} `{target}`, but that relation must target a functional requirement")]
    InvalidRelationTarget {
        requirement: Identifier,
        kind: RelationKind,
        target: Identifier,
    },
    #[error("no entity named `{0}`")]
    NotFound(String),
    #[error("agent `{agent}` references no control subsystem")]
    NoController { agent: Identifier },
    #[error("agent `{agent}` references more than one control subsystem")]
    MultipleControllers { agent: Identifier },
    #[error("`{0}` is not an agent")]
    NotAnAgent(Identifier),
    #[error("`{0}` is not a group")]
    NotAGroup(Identifier),
}

impl ModelError {
    /// The declaring entity an error is about, when there is one.
    pub fn subject(&self) -> Option<&Identifier> {
        match self {
            ModelError::DuplicateIdentifier { id } => Some(id),
            ModelError::DanglingReference { subject, .. }
            | ModelError::WrongCategory { subject, .. } => Some(subject),
            ModelError::OrphanOwnedSubsystem { subsystem, .. } => Some(subsystem),
            ModelError::MembershipCycle { group } => Some(group),
            ModelError::ExogenousWithConfig { requirement }
            | ModelError::InvalidRelationTarget { requirement, .. } => Some(requirement),
            ModelError::NoController { agent } | ModelError::MultipleControllers { agent } => {
                Some(agent)
            }
            ModelError::NotAnAgent(id) | ModelError::NotAGroup(id) => Some(id),
            ModelError::InvalidIdentifier(_) | ModelError::NotFound(_) => None,
        }
    }

    /// The referenced entity, for reference errors.
    pub fn target(&self) -> Option<&Identifier> {
        match self {
            ModelError::DanglingReference { target, .. }
            | ModelError::WrongCategory { target, .. }
            | ModelError::InvalidRelationTarget { target, .. } => Some(target),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot {
    category: Category,
    position: usize,
}

/// A referentially intact SPSys model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    name: String,
    requirements: Vec<Requirement>,
    subsystems: Vec<Subsystem>,
    agents: Vec<Agent>,
    groups: Vec<AgentGroup>,
    twin_pairs: Vec<TwinPair>,
    allocations: Vec<Allocation>,
    manage_links: Vec<ManageLink>,
    index: HashMap<Identifier, Slot>,
}

impl Model {
    pub fn empty(name: impl Into<String>) -> Model {
        ModelBuilder::new(name).build().expect("an empty model is always valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn requirements(&self) -> &[Requirement] {
        &self.requirements
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn groups(&self) -> &[AgentGroup] {
        &self.groups
    }

    pub fn twin_pairs(&self) -> &[TwinPair] {
        &self.twin_pairs
    }

    /// Twin pairs at layer 0, in declaration order.
    pub fn top_level_pairs(&self) -> impl Iterator<Item = &TwinPair> {
        self.twin_pairs.iter().filter(|p| p.layer == 0)
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    pub fn manage_links(&self) -> &[ManageLink] {
        &self.manage_links
    }

    pub fn has_structure(&self) -> bool {
        !(self.subsystems.is_empty()
            && self.agents.is_empty()
            && self.groups.is_empty()
            && self.twin_pairs.is_empty()
            && self.allocations.is_empty()
            && self.manage_links.is_empty())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn category_of(&self, id: &str) -> Option<Category> {
        self.index.get(id).map(|s| s.category)
    }

    /// Looks up an entity of any category.
    pub fn resolve(&self, id: &str) -> Result<Entity<'_>, ModelError> {
        let slot = self
            .index
            .get(id)
            .ok_or_else(|| ModelError::NotFound(id.to_string()))?;
        Ok(match slot.category {
            Category::Requirement => Entity::Requirement(&self.requirements[slot.position]),
            Category::Subsystem => Entity::Subsystem(&self.subsystems[slot.position]),
            Category::Agent => Entity::Agent(&self.agents[slot.position]),
            Category::Group => Entity::Group(&self.groups[slot.position]),
        })
    }

    fn lookup(&self, id: &str, category: Category) -> Option<usize> {
        self.index
            .get(id)
            .filter(|s| s.category == category)
            .map(|s| s.position)
    }

    pub fn requirement(&self, id: &str) -> Option<&Requirement> {
        self.lookup(id, Category::Requirement).map(|i| &self.requirements[i])
    }

    pub fn subsystem(&self, id: &str) -> Option<&Subsystem> {
        self.lookup(id, Category::Subsystem).map(|i| &self.subsystems[i])
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.lookup(id, Category::Agent).map(|i| &self.agents[i])
    }

    pub fn group(&self, id: &str) -> Option<&AgentGroup> {
        self.lookup(id, Category::Group).map(|i| &self.groups[i])
    }

    /// Position of an entity within its category, the canonical ordering key.
    pub fn declaration_rank(&self, id: &str) -> Option<(Category, usize)> {
        self.index.get(id).map(|s| (s.category, s.position))
    }

    /// All agents reachable through group membership, deduplicated and in
    /// agent declaration order.
    pub fn leaf_agents(&self, group: &str) -> Result<Vec<&Agent>, ModelError> {
        let root = self
            .group(group)
            .ok_or_else(|| match self.index.contains_key(group) {
                true => ModelError::NotAGroup(self.resolve(group).unwrap().id().clone()),
                false => ModelError::NotFound(group.to_string()),
            })?;
        let mut agents = HashSet::new();
        let mut visited = HashSet::new();
        let mut on_path = HashSet::new();
        self.collect_leaves(root, &mut agents, &mut visited, &mut on_path)?;
        let mut positions: Vec<usize> = agents.into_iter().collect();
        positions.sort_unstable();
        Ok(positions.into_iter().map(|i| &self.agents[i]).collect())
    }

    fn collect_leaves<'a>(
        &'a self,
        group: &'a AgentGroup,
        agents: &mut HashSet<usize>,
        visited: &mut HashSet<&'a str>,
        on_path: &mut HashSet<&'a str>,
    ) -> Result<(), ModelError> {
        if on_path.contains(group.id.as_str()) {
            return Err(ModelError::MembershipCycle {
                group: group.id.clone(),
            });
        }
        if !visited.insert(group.id.as_str()) {
            return Ok(());
        }
        on_path.insert(group.id.as_str());
        for member in &group.members {
            if let Some(i) = self.lookup(member.as_str(), Category::Agent) {
                agents.insert(i);
            } else if let Some(i) = self.lookup(member.as_str(), Category::Group) {
                self.collect_leaves(&self.groups[i], agents, visited, on_path)?;
            }
        }
        on_path.remove(group.id.as_str());
        Ok(())
    }

    /// Whether `outer` transitively contains group `inner` (strictly).
    pub fn group_contains_group(&self, outer: &str, inner: &str) -> bool {
        let mut stack = vec![outer];
        let mut seen = HashSet::new();
        while let Some(current) = stack.pop() {
            if !seen.insert(current) {
                continue;
            }
            if let Some(g) = self.group(current) {
                for m in &g.members {
                    if m.as_str() == inner {
                        return true;
                    }
                    if self.group(m.as_str()).is_some() {
                        stack.push(m.as_str());
                    }
                }
            }
        }
        false
    }

    /// The unique control subsystem referenced by `agent`.
    pub fn cont_subsys_of(&self, agent: &str) -> Result<&Subsystem, ModelError> {
        let a = self.agent(agent).ok_or_else(|| match self.index.contains_key(agent) {
            true => ModelError::NotAnAgent(self.resolve(agent).unwrap().id().clone()),
            false => ModelError::NotFound(agent.to_string()),
        })?;
        let mut controllers = self.referenced_subsystems(a).filter(|s| s.kind.is_controller());
        let first = controllers.next().ok_or_else(|| ModelError::NoController {
            agent: a.id.clone(),
        })?;
        if controllers.next().is_some() {
            return Err(ModelError::MultipleControllers { agent: a.id.clone() });
        }
        Ok(first)
    }

    pub fn referenced_subsystems<'a>(&'a self, agent: &'a Agent) -> impl Iterator<Item = &'a Subsystem> + 'a {
        agent
            .subsystems
            .iter()
            .filter_map(move |id| self.subsystem(id.as_str()))
    }

    /// Agents referencing subsystem `id`, in declaration order.
    pub fn agents_referencing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Agent> + 'a {
        self.agents
            .iter()
            .filter(move |a| a.subsystems.iter().any(|s| s.as_str() == id))
    }

    /// Twin pair with `group` as one of its sides.
    pub fn pair_of_group(&self, group: &str) -> Option<&TwinPair> {
        self.twin_pairs
            .iter()
            .find(|p| p.sim.as_str() == group || p.phy.as_str() == group)
    }

    /// Manage-links whose agent is a direct member of `group`.
    pub fn group_manage_links<'a>(&'a self, group: &'a AgentGroup) -> impl Iterator<Item = &'a ManageLink> + 'a {
        self.manage_links
            .iter()
            .filter(move |l| group.members.contains(&l.agent))
    }

    pub fn to_builder(&self) -> ModelBuilder {
        ModelBuilder {
            name: self.name.clone(),
            requirements: self.requirements.clone(),
            subsystems: self.subsystems.clone(),
            agents: self.agents.clone(),
            groups: self.groups.clone(),
            mirrors: self
                .twin_pairs
                .iter()
                .map(|p| (p.sim.clone(), p.phy.clone()))
                .collect(),
            allocations: self.allocations.clone(),
            manage_links: self.manage_links.clone(),
        }
    }
}

/// Mutable staging area for a [`Model`].
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub subsystems: Vec<Subsystem>,
    pub agents: Vec<Agent>,
    pub groups: Vec<AgentGroup>,
    /// (sim side, phy side)
    pub mirrors: Vec<(Identifier, Identifier)>,
    pub allocations: Vec<Allocation>,
    pub manage_links: Vec<ManageLink>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ModelBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn requirement(&mut self, requirement: Requirement) -> &mut Self {
        self.requirements.push(requirement);
        self
    }

    pub fn subsystem(&mut self, id: Identifier, kind: SubsystemKind) -> &mut Self {
        self.subsystems.push(Subsystem { id, kind, owner: None });
        self
    }

    /// Registers `owner.local` and adds it to the owner's references.
    pub fn owned_subsystem(&mut self, owner: &Identifier, local: &str, kind: SubsystemKind) -> Result<Identifier, ModelError> {
        let id = Identifier::qualified(owner, local)?;
        self.subsystems.push(Subsystem {
            id: id.clone(),
            kind,
            owner: Some(owner.clone()),
        });
        if let Some(agent) = self.agents.iter_mut().find(|a| &a.id == owner) {
            agent.subsystems.push(id.clone());
        }
        Ok(id)
    }

    pub fn agent(&mut self, id: Identifier, kind: AgentKind, subsystems: Vec<Identifier>) -> &mut Self {
        self.agents.push(Agent { id, kind, subsystems });
        self
    }

    pub fn group(&mut self, id: Identifier, kind: GroupKind, members: Vec<Identifier>) -> &mut Self {
        self.groups.push(AgentGroup { id, kind, members });
        self
    }

    pub fn mirror(&mut self, sim: Identifier, phy: Identifier) -> &mut Self {
        self.mirrors.push((sim, phy));
        self
    }

    pub fn allocate(&mut self, hardware: Identifier, target: Identifier) -> &mut Self {
        self.allocations.push(Allocation { hardware, target });
        self
    }

    pub fn manage(&mut self, agent: Identifier, requirement: Identifier) -> &mut Self {
        self.manage_links.push(ManageLink { agent, requirement });
        self
    }

    /// Checks every construction invariant and freezes the model. All
    /// violations are reported, in declaration order.
    pub fn build(&self) -> Result<Model, Vec<ModelError>> {
        let mut errors = Vec::new();
        let mut index: HashMap<Identifier, Slot> = HashMap::new();

        // Owned subsystems sort after globals, grouped by owner in agent order.
        let owner_rank = |s: &Subsystem| -> (usize, usize) {
            let owner = s.owner.as_ref().expect("owned");
            self.agents
                .iter()
                .position(|a| &a.id == owner)
                .map(|ai| {
                    let refs = &self.agents[ai].subsystems;
                    (ai, refs.iter().position(|r| r == &s.id).unwrap_or(usize::MAX))
                })
                .unwrap_or((usize::MAX, usize::MAX))
        };
        let mut owned: Vec<&Subsystem> = self.subsystems.iter().filter(|s| s.owner.is_some()).collect();
        owned.sort_by_key(|s| owner_rank(s));
        let subsystems: Vec<Subsystem> = self
            .subsystems
            .iter()
            .filter(|s| s.owner.is_none())
            .chain(owned)
            .cloned()
            .collect();
        for s in &subsystems {
            if let Some(owner) = &s.owner {
                if owner_rank(s).1 == usize::MAX {
                    errors.push(ModelError::OrphanOwnedSubsystem {
                        subsystem: s.id.clone(),
                        owner: owner.clone(),
                    });
                }
            }
        }

        let mut register = |id: &Identifier, category: Category, position: usize, errors: &mut Vec<ModelError>| {
            if index.contains_key(id) {
                errors.push(ModelError::DuplicateIdentifier { id: id.clone() });
            } else {
                index.insert(id.clone(), Slot { category, position });
            }
        };
        for (i, r) in self.requirements.iter().enumerate() {
            register(&r.id, Category::Requirement, i, &mut errors);
        }
        for (i, s) in subsystems.iter().enumerate() {
            register(&s.id, Category::Subsystem, i, &mut errors);
        }
        for (i, a) in self.agents.iter().enumerate() {
            register(&a.id, Category::Agent, i, &mut errors);
        }
        for (i, g) in self.groups.iter().enumerate() {
            register(&g.id, Category::Group, i, &mut errors);
        }
        let category = |id: &Identifier| index.get(id).map(|s| s.category);

        let check = |subject: &Identifier, target: &Identifier, allowed: &[Category], expected: &'static str, errors: &mut Vec<ModelError>| -> bool {
            match category(target) {
                None => {
                    errors.push(ModelError::DanglingReference {
                        subject: subject.clone(),
                        target: target.clone(),
                    });
                    false
                }
                Some(found) if !allowed.contains(&found) => {
                    errors.push(ModelError::WrongCategory {
                        subject: subject.clone(),
                        target: target.clone(),
                        found,
                        expected,
                    });
                    false
                }
                Some(_) => true,
            }
        };

        let mut invariant_errors = Vec::new();
        for r in &self.requirements {
            if r.role == RequirementRole::ExogAgent && r.config != ConfigTag::Unset {
                invariant_errors.push(ModelError::ExogenousWithConfig {
                    requirement: r.id.clone(),
                });
            }
            for rel in &r.relations {
                if !check(&r.id, &rel.target, &[Category::Requirement], "a requirement", &mut errors) {
                    continue;
                }
                let restricted = (r.role.is_part() || r.role == RequirementRole::Hardware)
                    && rel.kind != RelationKind::Refines;
                if restricted {
                    let target_role = self
                        .requirements
                        .iter()
                        .find(|t| t.id == rel.target)
                        .map(|t| t.role);
                    if !target_role.is_some_and(RequirementRole::is_functional) {
                        invariant_errors.push(ModelError::InvalidRelationTarget {
                            requirement: r.id.clone(),
                            kind: rel.kind,
                            target: rel.target.clone(),
                        });
                    }
                }
            }
        }
        for a in &self.agents {
            for s in &a.subsystems {
                check(&a.id, s, &[Category::Subsystem], "a subsystem", &mut errors);
            }
        }
        for g in &self.groups {
            for m in &g.members {
                check(&g.id, m, &[Category::Agent, Category::Group], "an agent or group", &mut errors);
            }
        }
        for (sim, phy) in &self.mirrors {
            check(sim, sim, &[Category::Group], "a group", &mut errors);
            check(sim, phy, &[Category::Group], "a group", &mut errors);
        }
        for l in &self.manage_links {
            check(&l.agent, &l.agent, &[Category::Agent], "an agent", &mut errors);
            check(&l.agent, &l.requirement, &[Category::Requirement], "a requirement", &mut errors);
        }
        for al in &self.allocations {
            check(&al.hardware, &al.hardware, &[Category::Requirement], "a requirement", &mut errors);
            check(
                &al.hardware,
                &al.target,
                &[Category::Agent, Category::Subsystem],
                "an agent or subsystem",
                &mut errors,
            );
        }

        if !errors.is_empty() {
            return Err(errors);
        }
        errors = invariant_errors;

        let dedup = |ids: &[Identifier]| {
            let mut seen = HashSet::new();
            ids.iter().filter(|i| seen.insert((*i).clone())).cloned().collect::<Vec<_>>()
        };
        let agents = self
            .agents
            .iter()
            .map(|a| Agent {
                subsystems: dedup(&a.subsystems),
                ..a.clone()
            })
            .collect();
        let groups = self
            .groups
            .iter()
            .map(|g| AgentGroup {
                members: dedup(&g.members),
                ..g.clone()
            })
            .collect();

        let mut model = Model {
            name: self.name.clone(),
            requirements: self.requirements.clone(),
            subsystems,
            agents,
            groups,
            twin_pairs: Vec::new(),
            allocations: self.allocations.clone(),
            manage_links: self.manage_links.clone(),
            index,
        };

        for g in &model.groups {
            if let Err(e) = model.leaf_agents(g.id.as_str()) {
                errors.push(e);
                break;
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        model.twin_pairs = assign_layers(&model, &self.mirrors);
        Ok(model)
    }
}

/// Common prefix of the two side names with trailing underscores removed.
fn pair_label(sim: &str, phy: &str) -> Option<String> {
    let prefix: String = sim
        .chars()
        .zip(phy.chars())
        .take_while(|(a, b)| a == b)
        .map(|(a, _)| a)
        .collect();
    let trimmed = prefix.trim_end_matches('_');
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

fn assign_layers(model: &Model, mirrors: &[(Identifier, Identifier)]) -> Vec<TwinPair> {
    let mut used_labels = HashSet::new();
    mirrors
        .iter()
        .enumerate()
        .map(|(i, (sim, phy))| {
            let layer = mirrors
                .iter()
                .enumerate()
                .filter(|(j, (osim, ophy))| {
                    *j != i
                        && (model.group_contains_group(osim.as_str(), sim.as_str())
                            || model.group_contains_group(ophy.as_str(), phy.as_str()))
                })
                .count() as u32;
            let label = match pair_label(sim.as_str(), phy.as_str()) {
                Some(l) if !used_labels.contains(&l) => l,
                _ => format!("{sim}<->{phy}"),
            };
            used_labels.insert(label.clone());
            TwinPair {
                sim: sim.clone(),
                phy: phy.clone(),
                layer,
                label,
            }
        })
        .collect()
}
