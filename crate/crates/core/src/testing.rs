//! Seeded random models and brute-force reference computations for tests.
//!
//! The oracle deliberately avoids the model's query helpers (leaf agents,
//! controller lookup, pair layers) and recomputes everything from the raw
//! declaration lists.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    ConfigTag, Embodiment, GroupKind, Identifier, Model, ModelBuilder, RelationKind, Requirement, RequirementRole,
    SubsystemKind,
};

/// Upper bound on requirements + subsystems + agents + groups.
pub const MAX_ENTITIES: usize = 20;

fn id(s: impl Into<String>) -> Identifier {
    Identifier::new(s).expect("generated identifier")
}

struct Gen {
    rng: ChaCha8Rng,
    b: ModelBuilder,
    entities: usize,
    controllers: Vec<(Identifier, SubsystemKind)>,
    drivers: Vec<(Identifier, SubsystemKind)>,
    next: usize,
}

impl Gen {
    fn room(&self, n: usize) -> bool {
        self.entities + n <= MAX_ENTITIES
    }

    fn fresh(&mut self, prefix: &str) -> Identifier {
        self.next += 1;
        id(format!("{prefix}{}", self.next))
    }

    fn requirements(&mut self) {
        let functionals = self.rng.gen_range(0..=3);
        for _ in 0..functionals {
            let f = self.fresh("F");
            let role = *[RequirementRole::FunctionalEmbodied, RequirementRole::FunctionalComputational]
                .choose(&mut self.rng)
                .unwrap();
            let config = *[ConfigTag::Obligatory, ConfigTag::Optional, ConfigTag::Unset]
                .choose(&mut self.rng)
                .unwrap();
            self.b.requirement(Requirement::new(f.clone(), role, config));
            let part_role = *[RequirementRole::PartPhysical, RequirementRole::PartSimulated, RequirementRole::PartHybrid]
                .choose(&mut self.rng)
                .unwrap();
            let derived = match config {
                ConfigTag::Optional => ConfigTag::Optional,
                _ => ConfigTag::Obligatory,
            };
            let part_config = if self.rng.gen_bool(0.5) { derived } else { ConfigTag::Unset };
            let kind = *[RelationKind::Satisfies, RelationKind::Derives].choose(&mut self.rng).unwrap();
            let p = self.fresh("P");
            self.b
                .requirement(Requirement::new(p, part_role, part_config).with_relation(kind, f));
            self.entities += 2;
        }
        if functionals > 0 && self.rng.gen_bool(0.5) {
            let target = self.b.requirements[0].id.clone();
            let hw = self.fresh("Hw");
            self.b.requirement(
                Requirement::new(hw, RequirementRole::Hardware, ConfigTag::Unset)
                    .with_relation(RelationKind::Satisfies, target),
            );
            self.entities += 1;
        }
        if self.rng.gen_bool(0.3) {
            let x = self.fresh("X");
            self.b.requirement(Requirement::new(x, RequirementRole::ExogAgent, ConfigTag::Unset));
            self.entities += 1;
        }
    }

    fn controller_for(&mut self, kind: Embodiment) -> Option<Identifier> {
        let allowed: &[SubsystemKind] = match kind {
            Embodiment::Physical => &[SubsystemKind::ContPhy, SubsystemKind::ContHyb],
            Embodiment::Simulated => &[SubsystemKind::ContSim, SubsystemKind::ContHyb],
            Embodiment::Hybrid => &[SubsystemKind::ContHyb],
        };
        let reusable: Vec<_> = self
            .controllers
            .iter()
            .filter(|(_, k)| allowed.contains(k))
            .map(|(i, _)| i.clone())
            .collect();
        if !reusable.is_empty() && (self.rng.gen_bool(0.4) || !self.room(2)) {
            return reusable.choose(&mut self.rng).cloned();
        }
        if !self.room(2) {
            return None;
        }
        let c = self.fresh("C");
        let k = *allowed.choose(&mut self.rng).unwrap();
        self.b.subsystem(c.clone(), k);
        self.controllers.push((c.clone(), k));
        self.entities += 1;
        Some(c)
    }

    fn driver_kinds(embodiment: Embodiment) -> [SubsystemKind; 4] {
        use SubsystemKind::*;
        match embodiment {
            Embodiment::Physical => [VirtRecPhy, VirtEffPhy, RealRecPhy, RealEffPhy],
            _ => [VirtRecSim, VirtEffSim, RealRecSim, RealEffSim],
        }
    }

    fn agents(&mut self) -> Vec<(Identifier, Embodiment)> {
        let mut out = Vec::new();
        let wanted = self.rng.gen_range(0..=5);
        for _ in 0..wanted {
            if !self.room(1) {
                break;
            }
            let kind = *[Embodiment::Physical, Embodiment::Simulated, Embodiment::Hybrid]
                .choose(&mut self.rng)
                .unwrap();
            let Some(cont) = self.controller_for(kind) else { break };
            let a = self.fresh("A");
            self.b.agent(a.clone(), kind, vec![cont]);
            self.entities += 1;
            if kind != Embodiment::Hybrid {
                let drivers = self.rng.gen_range(0..=2);
                for _ in 0..drivers {
                    if !self.room(1) {
                        break;
                    }
                    let kinds = Self::driver_kinds(kind);
                    let shareable: Vec<_> = self
                        .drivers
                        .iter()
                        .filter(|(_, k)| kinds.contains(k))
                        .map(|(i, _)| i.clone())
                        .collect();
                    let agent = self.b.agents.iter_mut().find(|x| x.id == a).unwrap();
                    if !shareable.is_empty() && self.rng.gen_bool(0.3) {
                        let d = shareable.choose(&mut self.rng).unwrap().clone();
                        if !agent.subsystems.contains(&d) {
                            agent.subsystems.push(d);
                        }
                        continue;
                    }
                    let k = *kinds.choose(&mut self.rng).unwrap();
                    self.next += 1;
                    let local = format!("D{}", self.next);
                    if self.rng.gen_bool(0.5) {
                        let d = self.b.owned_subsystem(&a, &local, k).unwrap();
                        self.drivers.push((d, k));
                    } else {
                        let d = id(local);
                        self.b.subsystem(d.clone(), k);
                        self.b.agents.iter_mut().find(|x| x.id == a).unwrap().subsystems.push(d.clone());
                        self.drivers.push((d, k));
                    }
                    self.entities += 1;
                }
            }
            out.push((a, kind));
        }
        if self.room(1) && self.rng.gen_bool(0.3) {
            let k = *SubsystemKind::ALL[3..].choose(&mut self.rng).unwrap();
            let d = self.fresh("U");
            self.b.subsystem(d, k);
            self.entities += 1;
        }
        out
    }

    fn groups(&mut self, agents: &[(Identifier, Embodiment)]) {
        let of = |k: Embodiment| -> Vec<Identifier> {
            agents.iter().filter(|(_, e)| *e == k).map(|(i, _)| i.clone()).collect()
        };
        let mut sims = of(Embodiment::Simulated);
        let mut phys = of(Embodiment::Physical);
        let hybrids = of(Embodiment::Hybrid);
        sims.shuffle(&mut self.rng);
        phys.shuffle(&mut self.rng);
        let mut pairs = Vec::new();
        while let (Some(s), Some(p)) = (sims.last().cloned(), phys.last().cloned()) {
            if !self.room(2) || !self.rng.gen_bool(0.7) {
                break;
            }
            sims.pop();
            phys.pop();
            let (dt, pt) = (self.fresh("DT"), self.fresh("PT"));
            let mut dt_members = vec![s];
            let mut pt_members = vec![p];
            if let Some(h) = hybrids.choose(&mut self.rng) {
                if self.rng.gen_bool(0.5) {
                    dt_members.push(h.clone());
                    if self.rng.gen_bool(0.5) {
                        pt_members.push(h.clone());
                    }
                }
            }
            self.b.group(dt.clone(), GroupKind::MirrorSim, dt_members);
            self.b.group(pt.clone(), GroupKind::MirrorPhy, pt_members);
            self.b.mirror(dt.clone(), pt.clone());
            self.entities += 2;
            pairs.push((dt, pt));
        }
        if let Some((dt, pt)) = pairs.first().cloned() {
            if self.room(2) && self.rng.gen_bool(0.3) {
                let (odt, opt) = (self.fresh("DT"), self.fresh("PT"));
                self.b.group(odt.clone(), GroupKind::MirrorSim, vec![dt]);
                self.b.group(opt.clone(), GroupKind::MirrorPhy, vec![pt]);
                self.b.mirror(odt, opt);
                self.entities += 2;
            }
        }
        if self.room(1) && !agents.is_empty() && self.rng.gen_bool(0.3) {
            let g = self.fresh("G");
            let mut members: Vec<Identifier> = agents
                .iter()
                .filter(|_| self.rng.gen_bool(0.5))
                .map(|(i, _)| i.clone())
                .collect();
            if let Some((dt, _)) = pairs.first() {
                members.push(dt.clone());
            }
            self.b.group(g, GroupKind::Plain, members);
            self.entities += 1;
        }
    }

    fn links(&mut self) {
        let exog: Vec<_> = self
            .b
            .requirements
            .iter()
            .filter(|r| r.role == RequirementRole::ExogAgent)
            .map(|r| r.id.clone())
            .collect();
        if let Some(x) = exog.first() {
            if self.room(2) {
                let cont = self.controller_for(Embodiment::Simulated);
                if let Some(cont) = cont.filter(|_| self.room(2)) {
                    let w = self.fresh("W");
                    self.b.agent(w.clone(), Embodiment::Simulated, vec![cont]);
                    self.b.manage(w.clone(), x.clone());
                    let g = self.fresh("World");
                    self.b.group(g, GroupKind::WorldMirror, vec![w]);
                    self.entities += 2;
                }
            }
        }
        let hardware: Vec<_> = self
            .b
            .requirements
            .iter()
            .filter(|r| r.role == RequirementRole::Hardware)
            .map(|r| r.id.clone())
            .collect();
        for hw in hardware {
            let mut targets: Vec<Identifier> = self.b.subsystems.iter().map(|s| s.id.clone()).collect();
            targets.extend(self.b.agents.iter().map(|a| a.id.clone()));
            if let Some(t) = targets.choose(&mut self.rng) {
                self.b.allocate(hw, t.clone());
            }
        }
    }
}

/// A pseudo-random model that passes validation, with at most
/// [`MAX_ENTITIES`] entities. Identical seeds give identical models.
pub fn random_valid_model(seed: u64) -> Model {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        b: ModelBuilder::new(format!("random {seed}")),
        entities: 0,
        controllers: Vec::new(),
        drivers: Vec::new(),
        next: 0,
    };
    g.requirements();
    let agents = g.agents();
    g.groups(&agents);
    g.links();
    g.b.build().expect("generator emits referentially intact models")
}

/// A requirements-only model with between one and `max_parts` part
/// requirements, each satisfying its own functional requirement.
pub fn random_requirements(seed: u64, max_parts: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::new(format!("requirements {seed}"));
    let parts = rng.gen_range(1..=max_parts.max(1));
    for i in 0..parts {
        let f = id(format!("F{i}"));
        let role = *[RequirementRole::FunctionalEmbodied, RequirementRole::FunctionalComputational]
            .choose(&mut rng)
            .unwrap();
        let config = *[ConfigTag::Obligatory, ConfigTag::Optional].choose(&mut rng).unwrap();
        b.requirement(Requirement::new(f.clone(), role, config));
        let part_role = *[RequirementRole::PartPhysical, RequirementRole::PartSimulated, RequirementRole::PartHybrid]
            .choose(&mut rng)
            .unwrap();
        b.requirement(
            Requirement::new(id(format!("Part{i}")), part_role, ConfigTag::Unset)
                .with_relation(RelationKind::Satisfies, f),
        );
    }
    if rng.gen_bool(0.3) {
        b.requirement(Requirement::new(id("Visitors"), RequirementRole::ExogAgent, ConfigTag::Unset));
    }
    b.build().expect("valid requirement graph")
}

pub mod oracle {
    //! Independent recounts by naive traversal of the declaration lists.

    use crate::model::{Embodiment, GroupKind, Identifier, Model, RequirementRole, SubsystemKind};

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct Counts {
        pub iif: (u64, u64),
        pub dgf: (u64, u64),
        pub dtc: (u64, u64),
        /// (sim group, phy group, hybrid, total) per top-level pair.
        pub mif: Vec<(Identifier, Identifier, u64, u64)>,
    }

    fn kind_of(model: &Model, id: &Identifier) -> Option<SubsystemKind> {
        model.subsystems().iter().find(|s| &s.id == id).map(|s| s.kind)
    }

    fn controller_of(model: &Model, agent: &Identifier) -> Option<(Identifier, SubsystemKind)> {
        let a = model.agents().iter().find(|a| &a.id == agent)?;
        let mut found = None;
        for s in &a.subsystems {
            if let Some(k) = kind_of(model, s) {
                if matches!(k, SubsystemKind::ContPhy | SubsystemKind::ContSim | SubsystemKind::ContHyb) {
                    found = Some((s.clone(), k));
                }
            }
        }
        found
    }

    /// Every id reachable from `group` via membership, by fixed-point iteration.
    fn closure(model: &Model, group: &Identifier) -> Vec<Identifier> {
        let mut reached = vec![group.clone()];
        loop {
            let mut added = false;
            for g in model.groups() {
                if reached.contains(&g.id) {
                    for m in &g.members {
                        if !reached.contains(m) {
                            reached.push(m.clone());
                            added = true;
                        }
                    }
                }
            }
            if !added {
                return reached;
            }
        }
    }

    pub fn factors(model: &Model) -> Counts {
        let mut iif = (0, 0);
        let mut dgf = (0, 0);
        for s in model.subsystems() {
            match s.kind {
                SubsystemKind::ContHyb => {
                    iif.0 += 1;
                    iif.1 += 1;
                }
                SubsystemKind::ContPhy | SubsystemKind::ContSim => iif.1 += 1,
                SubsystemKind::RealRecPhy
                | SubsystemKind::RealRecSim
                | SubsystemKind::RealEffPhy
                | SubsystemKind::RealEffSim => {
                    dgf.1 += 1;
                    let governed = model.agents().iter().any(|a| {
                        a.subsystems.contains(&s.id)
                            && controller_of(model, &a.id).is_some_and(|(_, k)| k == SubsystemKind::ContHyb)
                    });
                    if governed {
                        dgf.0 += 1;
                    }
                }
                _ => {}
            }
        }

        let pairs = model.twin_pairs();
        let mut dtc = (0, 0);
        for a in model.agents().iter().filter(|a| a.kind == Embodiment::Physical) {
            dtc.1 += 1;
            let mirrored = pairs.iter().any(|p| {
                model.groups().iter().any(|g| g.id == p.phy && g.kind == GroupKind::MirrorPhy)
                    && closure(model, &p.phy).contains(&a.id)
            });
            if mirrored {
                dtc.0 += 1;
            }
        }

        let mut mif = Vec::new();
        for p in pairs {
            let nested = pairs.iter().any(|o| {
                (o.sim != p.sim && closure(model, &o.sim).contains(&p.sim))
                    || (o.phy != p.phy && closure(model, &o.phy).contains(&p.phy))
            });
            if nested {
                continue;
            }
            let mut seen: Vec<Identifier> = Vec::new();
            let (mut h, mut t) = (0, 0);
            for member in closure(model, &p.sim) {
                if let Some((c, k)) = controller_of(model, &member) {
                    if !seen.contains(&c) {
                        seen.push(c);
                        t += 1;
                        if k == SubsystemKind::ContHyb {
                            h += 1;
                        }
                    }
                }
            }
            mif.push((p.sim.clone(), p.phy.clone(), h, t));
        }
        Counts { iif, dgf, dtc, mif }
    }

    /// Setup names by filtering all `3^k` assignments over
    /// (phy, sim, absent) for the selectable parts.
    pub fn setup_names(model: &Model, optional: impl Fn(&Identifier) -> bool) -> Vec<String> {
        let computational = |part: &crate::model::Requirement| {
            let targets: Vec<_> = part
                .relations
                .iter()
                .filter_map(|r| model.requirements().iter().find(|q| q.id == r.target))
                .filter(|q| q.role.is_functional())
                .collect();
            !targets.is_empty() && targets.iter().all(|q| q.role == RequirementRole::FunctionalComputational)
        };
        let parts: Vec<_> = model
            .requirements()
            .iter()
            .filter(|r| match r.role {
                RequirementRole::PartPhysical | RequirementRole::PartSimulated => true,
                RequirementRole::PartHybrid => !computational(r),
                _ => false,
            })
            .collect();
        let alphabet = ["phy", "sim", "absent"];
        let mut names = Vec::new();
        let total = 3usize.pow(parts.len() as u32);
        for code in 0..total {
            let mut digits = Vec::with_capacity(parts.len());
            let mut rest = code;
            for _ in 0..parts.len() {
                digits.push(rest % 3);
                rest /= 3;
            }
            digits.reverse();
            let legal = parts.iter().zip(&digits).all(|(p, &d)| match alphabet[d] {
                "phy" => matches!(p.role, RequirementRole::PartPhysical | RequirementRole::PartHybrid),
                "sim" => matches!(p.role, RequirementRole::PartSimulated | RequirementRole::PartHybrid),
                _ => optional(&p.id),
            });
            if legal {
                let name: Vec<String> = parts
                    .iter()
                    .zip(&digits)
                    .map(|(p, &d)| format!("{}={}", p.id, alphabet[d]))
                    .collect();
                names.push(name.join(","));
            }
        }
        names
    }
}

/// Directory holding the bundled `.spsys` fixtures.
pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

/// A validator rule fixture pair read from `fixtures/rules`.
#[derive(Clone, Debug)]
pub struct RuleCase {
    pub code: String,
    /// Subject the triggering fixture must report.
    pub subject: String,
    pub trigger: String,
    pub clean: String,
}

/// One case per `<CODE>.spsys` / `<CODE>_clean.spsys` pair, sorted by code.
/// The first line of the triggering file reads `// expect <CODE> <subject>`.
pub fn rule_cases() -> Vec<RuleCase> {
    let dir = fixtures_dir().join("rules");
    let mut cases = Vec::new();
    for entry in std::fs::read_dir(&dir).expect("rule fixture directory") {
        let path = entry.expect("directory entry").path();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if stem.ends_with("_clean") || path.extension().is_none_or(|e| e != "spsys") {
            continue;
        }
        let trigger = std::fs::read_to_string(&path).expect("trigger fixture");
        let clean = std::fs::read_to_string(dir.join(format!("{stem}_clean.spsys"))).expect("clean fixture");
        let header: Vec<_> = trigger.lines().next().unwrap_or_default().split_whitespace().collect();
        assert!(header.len() == 4 && header[1] == "expect" && header[2] == stem, "bad header in {stem}");
        cases.push(RuleCase {
            code: stem,
            subject: header[3].to_string(),
            trigger,
            clean,
        });
    }
    cases.sort_by(|a, b| a.code.cmp(&b.code));
    cases
}
