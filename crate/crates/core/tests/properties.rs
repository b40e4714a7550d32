use proptest::prelude::*;
use spsys_core::advisor::{advise, apply_edit, apply_what_if, Edit, Factor};
use spsys_core::composer::{enumerate_setups, functional_config_count, scaffold};
use spsys_core::metrics::{compute_all, FactorSet, Ratio};
use spsys_core::testing::{oracle, random_requirements, random_valid_model};
use spsys_core::tracer::trace;
use spsys_core::{
    parse, serialize, validate, Configuration, ConfigTag, Identifier, Model, Requirement, RequirementRole,
    SubsystemKind,
};
use std::cmp::Ordering;

fn id(s: &str) -> Identifier {
    Identifier::new(s).unwrap()
}

fn fixtures() -> Vec<Model> {
    ["incare_requirements.spsys", "incare_early.spsys", "incare_final.spsys"]
        .iter()
        .map(|name| {
            let text = std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
            parse(&text, name).model.unwrap()
        })
        .collect()
}

fn in_unit_range(r: &Ratio) -> bool {
    !r.is_defined() || r.numerator <= r.denominator
}

fn not_lower(after: &Ratio, before: &Ratio) -> bool {
    !before.is_defined() || after.cmp_value(before).is_some_and(|o| o != Ordering::Less)
}

fn mif_not_lower(after: &FactorSet, before: &FactorSet) -> bool {
    before.mif.iter().all(|b| match after.mif_for(&b.label) {
        Some(a) => not_lower(&a, &b.ratio),
        None => true,
    })
}

#[test]
fn fixtures_round_trip() {
    for m in fixtures() {
        let text = serialize(&m);
        let again = parse(&text, "again").model.unwrap();
        assert_eq!(again, m);
        assert_eq!(serialize(&again), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_models_validate(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let entities = m.requirements().len() + m.subsystems().len() + m.agents().len() + m.groups().len();
        prop_assert!(entities <= spsys_core::testing::MAX_ENTITIES);
        prop_assert!(validate(&m).is_ok(), "{:?}", validate(&m).err());
        prop_assert_eq!(random_valid_model(seed), m);
    }

    #[test]
    fn serialize_round_trip(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let text = serialize(&m);
        let out = parse(&text, "gen");
        prop_assert!(out.diagnostics.iter().all(|d| d.severity != spsys_core::Severity::Error), "{:?}\n{}", out.diagnostics, text);
        let again = out.model.unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert_eq!(serialize(&again), text);
    }

    #[test]
    fn factors_match_oracle(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let v = validate(&m).unwrap();
        let f = compute_all(&v);
        let o = oracle::factors(&m);
        prop_assert_eq!((f.iif.numerator, f.iif.denominator), o.iif);
        prop_assert_eq!((f.dgf.numerator, f.dgf.denominator), o.dgf);
        prop_assert_eq!((f.dtc.numerator, f.dtc.denominator), o.dtc);
        let got: Vec<_> = f.mif.iter().map(|x| (x.sim.clone(), x.phy.clone(), x.ratio.numerator, x.ratio.denominator)).collect();
        prop_assert_eq!(got, o.mif);
        for (_, r) in f.entries() {
            prop_assert!(in_unit_range(&r));
        }
    }

    #[test]
    fn make_hybrid_raises_integration(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let target = m.subsystems().iter().find(|s| matches!(s.kind, SubsystemKind::ContPhy | SubsystemKind::ContSim));
        if let Some(c) = target {
            let before = compute_all(&validate(&m).unwrap());
            let edited = apply_edit(&m, &Edit::MakeHybrid(c.id.clone())).unwrap();
            let after = compute_all(&validate(&edited).unwrap());
            prop_assert_eq!(after.iif.cmp_value(&before.iif), Some(Ordering::Greater));
            prop_assert!(not_lower(&after.dgf, &before.dgf));
            prop_assert!(mif_not_lower(&after, &before));
        }
    }

    #[test]
    fn merging_controllers_raises_integration(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let phy = m.subsystems().iter().find(|s| s.kind == SubsystemKind::ContPhy);
        let sim = m.subsystems().iter().find(|s| s.kind == SubsystemKind::ContSim);
        if let (Some(a), Some(b)) = (phy, sim) {
            let before = compute_all(&validate(&m).unwrap());
            let edit = Edit::MergeCont { a: a.id.clone(), b: b.id.clone(), new: id("MergedCont") };
            let edited = apply_edit(&m, &edit).unwrap();
            let after = compute_all(&validate(&edited).unwrap());
            prop_assert_eq!(after.iif.cmp_value(&before.iif), Some(Ordering::Greater));
            prop_assert!(not_lower(&after.dgf, &before.dgf));
        }
    }

    #[test]
    fn virtual_subsystems_do_not_move_factors(seed in any::<u64>(), pick in 0usize..4) {
        let m = random_valid_model(seed);
        let before = compute_all(&validate(&m).unwrap());
        let mut b = m.to_builder();
        let kind = [SubsystemKind::VirtRecPhy, SubsystemKind::VirtEffPhy, SubsystemKind::VirtRecSim, SubsystemKind::VirtEffSim][pick];
        b.subsystem(id("ExtraVirtual"), kind);
        if let Some(agent) = b.agents.iter_mut().find(|a| a.kind.to_string() != "hybrid") {
            agent.subsystems.push(id("ExtraVirtual"));
        }
        let grown = b.build().unwrap();
        if let Ok(v) = validate(&grown) {
            prop_assert_eq!(compute_all(&v), before);
        }
    }

    #[test]
    fn allocations_only_add_trace_entries(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let v = validate(&m).unwrap();
        let Some(agent) = m.agents().first() else { return Ok(()) };
        let before = trace(&v, agent.id.as_str()).unwrap();
        let mut b = m.to_builder();
        b.requirement(Requirement::new(id("HwExtra"), RequirementRole::Hardware, ConfigTag::Unset));
        b.allocate(id("HwExtra"), agent.id.clone());
        let v2 = validate(&b.build().unwrap()).unwrap();
        let after = trace(&v2, agent.id.as_str()).unwrap();
        for h in &before.hardware_reqs {
            prop_assert!(after.hardware_reqs.contains(h));
        }
        for f in &before.functional_reqs {
            prop_assert!(after.functional_reqs.contains(f));
        }
        prop_assert!(after.hardware_reqs.iter().any(|h| h == "HwExtra"));
    }

    #[test]
    fn scaffolds_validate_and_enumerate_like_brute_force(seed in any::<u64>()) {
        let reqs = random_requirements(seed, 4);
        let s = scaffold(&reqs).unwrap();
        let v = validate(&s.model);
        prop_assert!(v.is_ok(), "{:?}\n{}", v.as_ref().err(), serialize(&s.model));
        let v = v.unwrap();
        let cfg = v.resolved_config().clone();
        let expected = oracle::setup_names(&s.model, |p| cfg.get(p) == Some(&Configuration::Optional));
        if expected == vec![String::new()] {
            prop_assert_eq!(enumerate_setups(&v), Err(spsys_core::composer::ComposeError::NoParts));
            return Ok(());
        }
        let plan = enumerate_setups(&v).unwrap();
        let product: usize = plan.parts.iter().map(|(_, o)| o.len()).product();
        prop_assert_eq!(plan.setups.len(), product);
        let names: Vec<_> = plan.setups.iter().map(|x| x.name.clone()).collect();
        prop_assert_eq!(names, expected);
    }

    #[test]
    fn obligatory_requirements_keep_config_count(seed in any::<u64>(), extra in 1usize..4) {
        let reqs = random_requirements(seed, 4);
        let before = functional_config_count(&reqs).unwrap();
        let mut b = reqs.to_builder();
        for i in 0..extra {
            b.requirement(Requirement::new(id(&format!("Always{i}")), RequirementRole::FunctionalEmbodied, ConfigTag::Obligatory));
        }
        prop_assert_eq!(functional_config_count(&b.build().unwrap()).unwrap(), before);
    }

    #[test]
    fn findings_never_lower_their_factor(seed in any::<u64>()) {
        let m = random_valid_model(seed);
        let v = validate(&m).unwrap();
        for finding in advise(&v) {
            check_finding(&v, &finding.edit, finding.factor, finding.pair.as_deref())?;
        }
    }
}

fn check_finding(
    v: &spsys_core::ValidatedModel,
    edit: &Edit,
    factor: Factor,
    pair: Option<&str>,
) -> Result<(), TestCaseError> {
    let (report, _) = apply_what_if(v, std::slice::from_ref(edit)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (b, a) = (&report.before, &report.after);
    let ok = match factor {
        Factor::Iif => not_lower(&a.iif, &b.iif),
        Factor::Dgf => not_lower(&a.dgf, &b.dgf),
        Factor::Dtc => not_lower(&a.dtc, &b.dtc),
        Factor::Mif => match pair.and_then(|p| b.mif_for(p).zip(a.mif_for(p))) {
            Some((before, after)) => not_lower(&after, &before),
            None => true,
        },
    };
    prop_assert!(ok, "{edit} lowers {factor:?}");
    Ok(())
}

#[test]
fn findings_on_fixtures_are_sound() {
    for m in fixtures() {
        let v = validate(&m).unwrap();
        for f in advise(&v) {
            check_finding(&v, &f.edit, f.factor, f.pair.as_deref()).unwrap();
        }
    }
}

#[test]
fn config_count_small_cases() {
    for n in 0..=3u32 {
        let mut b = spsys_core::ModelBuilder::new("n");
        for i in 0..n {
            b.requirement(Requirement::new(id(&format!("Opt{i}")), RequirementRole::FunctionalEmbodied, ConfigTag::Optional));
        }
        b.requirement(Requirement::new(id("Base"), RequirementRole::FunctionalEmbodied, ConfigTag::Obligatory));
        assert_eq!(functional_config_count(&b.build().unwrap()).unwrap(), 1u128 << n);
    }
}
