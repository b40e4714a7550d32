//! Acceptance criteria AC1 to AC8, one `[PASS]`/`[FAIL]` line each.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use serde_json::Value;
use spsys_core::advisor::{apply_edit, Edit};
use spsys_core::composer::enumerate_setups;
use spsys_core::testing::{fixtures_dir, oracle, random_valid_model, rule_cases, MAX_ENTITIES};
use spsys_core::{compute_all, diagnose, parse, serialize, validate, Configuration, Embodiment, Model, SubsystemKind};

const FACTOR_BUDGET: Duration = Duration::from_secs(1);
const PROPERTY_BUDGET: Duration = Duration::from_secs(30);
const RANDOM_MODELS: u64 = 100;

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

struct Run {
    code: Option<i32>,
    stdout: String,
    stderr: String,
}

fn spsys(args: &[&str]) -> Run {
    let o = Command::new(env!("CARGO_BIN_EXE_spsys"))
        .args(args)
        .env("SPSYS_NO_COLOR", "1")
        .output()
        .expect("spsys binary runs");
    Run {
        code: o.status.code(),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn json_of(args: &[&str]) -> Result<Value, String> {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let run = spsys(&full);
    serde_json::from_str(&run.stdout).map_err(|e| format!("invalid JSON from {args:?}: {e}"))
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn load(path: &Path) -> Result<Model, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let out = parse(&text, &path.display().to_string());
    out.model.ok_or_else(|| format!("{} does not parse", path.display()))
}

fn ratio(v: &Value) -> (u64, u64, String) {
    (
        v["numerator"].as_u64().unwrap_or(u64::MAX),
        v["denominator"].as_u64().unwrap_or(u64::MAX),
        v["display"].as_str().unwrap_or_default().to_string(),
    )
}

fn mif<'a>(factors: &'a Value, label: &str) -> Option<&'a Value> {
    factors["mif"].as_array()?.iter().find(|m| m["label"] == label).map(|m| &m["ratio"])
}

fn expect_ratio(factors: &Value, name: &str, value: Option<&Value>, n: u64, d: u64, shown: &str) -> Result<(), String> {
    let (gn, gd, display) = ratio(value.ok_or(format!("{name} missing"))?);
    ensure(
        gn == n && gd == d && display.contains(shown),
        format!("{name} = {display}, expected {n}/{d} ({shown}) in {factors}"),
    )
}

fn ac1() -> Check {
    let start = Instant::now();
    let doc = json_of(&["eval", fixture("incare_early.spsys").to_str().unwrap()])?;
    let elapsed = start.elapsed();
    let f = &doc["factors"];
    expect_ratio(f, "IIF", Some(&f["iif"]), 5, 7, "0.71")?;
    expect_ratio(f, "DGF", Some(&f["dgf"]), 20, 22, "0.91")?;
    expect_ratio(f, "DTC", Some(&f["dtc"]), 2, 3, "0.67")?;
    expect_ratio(f, "MIF_Robot", mif(f, "Robot"), 3, 3, "1.00")?;
    expect_ratio(f, "MIF_FallDetector", mif(f, "FallDetector"), 0, 1, "0.00")?;
    ensure(elapsed < FACTOR_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("IIF 5/7, DGF 20/22, DTC 2/3, MIF 1 and 0 in {} ms", elapsed.as_millis()))
}

fn ac2() -> Check {
    let start = Instant::now();
    let doc = json_of(&["eval", fixture("incare_final.spsys").to_str().unwrap()])?;
    let elapsed = start.elapsed();
    let f = &doc["factors"];
    expect_ratio(f, "IIF", Some(&f["iif"]), 6, 6, "1.00")?;
    expect_ratio(f, "DGF", Some(&f["dgf"]), 22, 22, "1.00")?;
    expect_ratio(f, "DTC", Some(&f["dtc"]), 2, 3, "0.67")?;
    expect_ratio(f, "MIF_Robot", mif(f, "Robot"), 3, 3, "1.00")?;
    expect_ratio(f, "MIF_FallDetector", mif(f, "FallDetector"), 1, 1, "1.00")?;
    ensure(elapsed < FACTOR_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("IIF 1, DGF 1, DTC 2/3, both MIF 1 in {} ms", elapsed.as_millis()))
}

fn ac3() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = dir.path().join("merge.edits");
    std::fs::write(&script, "merge_cont FallDetectorSim.Cont FallDetectorPhy.Cont FallDetectorCont\n")
        .map_err(|e| e.to_string())?;
    let doc = json_of(&[
        "whatif",
        fixture("incare_early.spsys").to_str().unwrap(),
        "--edits",
        script.to_str().unwrap(),
    ])?;
    let target = json_of(&["eval", fixture("incare_final.spsys").to_str().unwrap()])?;
    ensure(doc["status"] == "ok", format!("whatif status {}", doc["status"]))?;
    ensure(
        doc["whatif"]["after"] == target["factors"],
        format!("after {} differs from final {}", doc["whatif"]["after"], target["factors"]),
    )?;
    Ok("merge_cont on the early fixture yields the final FactorSet".into())
}

fn ac4() -> Check {
    let run = spsys(&["setups", fixture("incare_final.spsys").to_str().unwrap()]);
    ensure(run.code == Some(0), format!("exit {:?}: {}", run.code, run.stderr))?;
    let names: Vec<_> = run.stdout.lines().map(|l| l.split(':').next().unwrap_or_default()).collect();
    let mut expected = Vec::new();
    for robot in ["phy", "sim"] {
        for fall in ["phy", "sim", "absent"] {
            expected.push(format!("Robot={robot},FallDetector={fall},SmartHome=phy"));
        }
    }
    ensure(names == expected, format!("rows {names:?}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scaffolded = dir.path().join("scaffold.spsys");
    let gen = spsys(&[
        "scaffold",
        fixture("incare_requirements.spsys").to_str().unwrap(),
        "-o",
        scaffolded.to_str().unwrap(),
    ]);
    ensure(gen.code == Some(0), "scaffold failed")?;
    let mut compared = 0;
    for path in [fixture("incare_early.spsys"), fixture("incare_final.spsys"), scaffolded] {
        let model = load(&path)?;
        let v = validate(&model).map_err(|e| format!("{}: {} errors", path.display(), e.error_count()))?;
        let plan = enumerate_setups(&v).map_err(|e| e.to_string())?;
        if plan.parts.len() > 4 {
            continue;
        }
        let cfg = v.resolved_config().clone();
        let brute = oracle::setup_names(&model, |p| cfg.get(p) == Some(&Configuration::Optional));
        let got: Vec<_> = plan.setups.iter().map(|s| s.name.clone()).collect();
        ensure(got == brute, format!("{}: {got:?} vs oracle {brute:?}", path.display()))?;
        compared += 1;
    }
    Ok(format!("6 setups in product order; oracle agrees on {compared} fixtures"))
}

fn ac5() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for n in 0..=3u32 {
        let mut reqs = String::from("    req Base : functional embodied obligatory;\n    req BasePart : part physical { satisfies Base; }\n");
        for i in 0..n {
            reqs.push_str(&format!(
                "    req Opt{i} : functional embodied optional;\n    req OptPart{i} : part physical {{ satisfies Opt{i}; }}\n"
            ));
        }
        let path = dir.path().join(format!("n{n}.spsys"));
        std::fs::write(&path, format!("model \"n{n}\" {{\n  requirements {{\n{reqs}  }}\n  structure {{}}\n}}\n"))
            .map_err(|e| e.to_string())?;
        let doc = json_of(&["setups", "--functional", path.to_str().unwrap()])?;
        let count = &doc["functionalConfigurations"]["count"];
        ensure(count.as_str() == Some((1u64 << n).to_string().as_str()), format!("n = {n}: count {count}"))?;
    }
    Ok("2^n for n = 0, 1, 2, 3".into())
}

fn ac6() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("scaffold.spsys");
    let run = spsys(&[
        "scaffold",
        fixture("incare_requirements.spsys").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    ensure(run.code == Some(0), format!("scaffold exit {:?}: {}", run.code, run.stderr))?;
    let model = load(&out)?;
    let pairs = model.twin_pairs().len();
    let in_pair = |agent: &str| {
        model
            .twin_pairs()
            .iter()
            .any(|p| model.group(p.phy.as_str()).is_some_and(|g| g.members.iter().any(|m| m.as_str() == agent)))
    };
    let standalone_physical = model
        .agents()
        .iter()
        .filter(|a| a.kind == Embodiment::Physical && !in_pair(a.id.as_str()))
        .count();
    let hybrid = model.agents().iter().filter(|a| a.kind == Embodiment::Hybrid).count();
    ensure(
        (pairs, standalone_physical, hybrid) == (2, 1, 3),
        format!("{pairs} pairs, {standalone_physical} physical, {hybrid} hybrid"),
    )?;
    let check = json_of(&["check", out.to_str().unwrap()])?;
    ensure(check["check"]["errors"] == 0, format!("check: {}", check["check"]))?;
    Ok("2 twin pairs, 1 physical agent, 3 hybrid agents; check reports 0 errors".into())
}

fn entity_count(m: &Model) -> usize {
    m.requirements().len() + m.subsystems().len() + m.agents().len() + m.groups().len()
}

fn ac7() -> Check {
    let start = Instant::now();
    let mut hybridised = 0;
    for seed in 0..RANDOM_MODELS {
        let m = random_valid_model(seed);
        ensure(entity_count(&m) <= MAX_ENTITIES, format!("seed {seed}: {} entities", entity_count(&m)))?;
        let v = validate(&m).map_err(|_| format!("seed {seed}: generated model invalid"))?;
        let f = compute_all(&v);
        for (name, r) in f.entries() {
            ensure(!r.is_defined() || r.numerator <= r.denominator, format!("seed {seed}: {name} = {r}"))?;
        }
        let o = oracle::factors(&m);
        let got_mif: Vec<_> = f
            .mif
            .iter()
            .map(|x| (x.sim.clone(), x.phy.clone(), x.ratio.numerator, x.ratio.denominator))
            .collect();
        ensure(
            (f.iif.numerator, f.iif.denominator) == o.iif
                && (f.dgf.numerator, f.dgf.denominator) == o.dgf
                && (f.dtc.numerator, f.dtc.denominator) == o.dtc
                && got_mif == o.mif,
            format!("seed {seed}: metrics {f} disagree with oracle {o:?}"),
        )?;
        if let Some(c) = m
            .subsystems()
            .iter()
            .find(|s| matches!(s.kind, SubsystemKind::ContPhy | SubsystemKind::ContSim))
        {
            let edited = apply_edit(&m, &Edit::MakeHybrid(c.id.clone())).map_err(|e| format!("seed {seed}: {e}"))?;
            let after = compute_all(&validate(&edited).map_err(|_| format!("seed {seed}: make_hybrid invalid"))?);
            ensure(
                after.iif.cmp_value(&f.iif) == Some(std::cmp::Ordering::Greater),
                format!("seed {seed}: IIF {} -> {}", f.iif, after.iif),
            )?;
            hybridised += 1;
        }
        round_trip(&m).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    for name in ["incare_requirements.spsys", "incare_early.spsys", "incare_final.spsys", "broken.spsys"] {
        round_trip(&load(&fixture(name))?).map_err(|e| format!("{name}: {e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < PROPERTY_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "{RANDOM_MODELS} random models, {hybridised} make_hybrid edits, fixtures round-trip, {} ms",
        elapsed.as_millis()
    ))
}

fn round_trip(m: &Model) -> Result<(), String> {
    let text = serialize(m);
    let again = parse(&text, "round-trip").model.ok_or("serialized text does not parse")?;
    ensure(&again == m, "round trip changes the model")?;
    ensure(serialize(&again) == text, "serialize is not a fixed point")
}

fn ac8() -> Check {
    let cases = rule_cases();
    for case in &cases {
        let trigger = parse(&case.trigger, "trigger").model.ok_or(format!("{} trigger does not parse", case.code))?;
        let clean = parse(&case.clean, "clean").model.ok_or(format!("{} clean does not parse", case.code))?;
        ensure(
            diagnose(&trigger).iter().any(|d| d.code == case.code && d.subject.as_str() == case.subject),
            format!("{} not raised", case.code),
        )?;
        ensure(diagnose(&clean).iter().all(|d| d.code != case.code), format!("{} raised on clean sibling", case.code))?;
    }
    ensure(cases.len() == 16, format!("{} rule fixtures", cases.len()))?;
    let run = spsys(&["check", fixture("incare_final.spsys").to_str().unwrap()]);
    let lines: Vec<_> = run.stderr.lines().collect();
    ensure(
        run.code == Some(0) && lines.len() == 1 && lines[0].starts_with("warning W101 [SmartHomePhy]"),
        format!("check incare_final: exit {:?}, {lines:?}", run.code),
    )?;
    Ok("16 codes triggered and absent on siblings; final fixture warns only W101 SmartHomePhy".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1", "early iteration factors", ac1),
        ("AC2", "final iteration factors", ac2),
        ("AC3", "what-if replay", ac3),
        ("AC4", "setup enumeration", ac4),
        ("AC5", "functional configuration count", ac5),
        ("AC6", "scaffold reproduction", ac6),
        ("AC7", "property suite", ac7),
        ("AC8", "validator catalog", ac8),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {id} {title}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {id} {title}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
