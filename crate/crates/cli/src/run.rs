use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use spsys_core::advisor::{advise, apply_what_if, parse_edit_script, Finding, WhatIfError};
use spsys_core::composer::{enumerate_setups, functional_config_count, scaffold, Setup};
use spsys_core::tracer::trace;
use spsys_core::{compute_all, diagnose, parse, serialize, validate, Configuration, FactorSet, Model, Severity, ValidatedModel};

use crate::cli::Command;
use crate::report::{Diag, Output, Status};

/// Early exit carrying the status to report.
struct Stop(Status);

type Step<T> = Result<T, Stop>;

fn fail(out: &mut Output, status: Status, message: impl Into<String>) -> Stop {
    out.envelope.error = Some(message.into());
    Stop(status)
}

fn read(out: &mut Output, path: &Path) -> Step<String> {
    let bytes = std::fs::read(path).map_err(|e| fail(out, Status::UsageError, format!("cannot read {}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| fail(out, Status::UsageError, format!("{} is not valid UTF-8", path.display())))
}

fn load(out: &mut Output, path: &Path) -> Step<Model> {
    let text = read(out, path)?;
    out.envelope.input_digest = Some(hex::encode(Sha256::digest(text.as_bytes())));
    let file_name = path.display().to_string();
    let parsed = parse(&text, &file_name);
    out.envelope.diagnostics.extend(parsed.diagnostics.iter().map(Diag::from));
    match parsed.model {
        Some(model) => {
            out.envelope.model_name = Some(model.name().to_string());
            Ok(model)
        }
        None => Err(Stop(Status::ParseError)),
    }
}

fn validated(out: &mut Output, model: &Model) -> Step<ValidatedModel> {
    match validate(model) {
        Ok(v) => {
            out.envelope.diagnostics.extend(v.warnings().iter().map(Diag::from));
            Ok(v)
        }
        Err(failure) => {
            out.envelope.diagnostics.extend(failure.diagnostics.iter().map(Diag::from));
            Err(Stop(Status::ValidationError))
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckSummary {
    valid: bool,
    errors: usize,
    warnings: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FunctionalConfigurations {
    optional_functions: Vec<String>,
    count: String,
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn check_text(name: &str, summary: &CheckSummary) -> String {
    format!(
        "model \"{name}\": {}, {}\n",
        plural(summary.errors, "error"),
        plural(summary.warnings, "warning")
    )
}

fn setups_text(setups: &[Setup]) -> String {
    let mut s = String::new();
    for setup in setups {
        let members: Vec<_> = setup.members.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(s, "{}: {}", setup.name, members.join(" "));
    }
    s
}

fn functional(model: &ValidatedModel) -> Step<FunctionalConfigurations> {
    let optional_functions = model
        .requirements()
        .iter()
        .filter(|r| r.role.is_functional() && model.resolved_config().get(&r.id) == Some(&Configuration::Optional))
        .map(|r| r.id.to_string())
        .collect();
    let count = functional_config_count(model).map_err(|_| Stop(Status::ValidationError))?;
    Ok(FunctionalConfigurations {
        optional_functions,
        count: count.to_string(),
    })
}

fn functional_text(f: &FunctionalConfigurations) -> String {
    format!("functional configurations: {} (2^{})\n", f.count, f.optional_functions.len())
}

fn findings_text(findings: &[Finding]) -> String {
    let mut s = String::new();
    for f in findings {
        let _ = writeln!(s, "{f}");
    }
    s
}

fn undefined(factors: &FactorSet) -> bool {
    factors.has_undefined()
}

fn check(out: &mut Output, file: &Path) -> Step<bool> {
    let model = load(out, file)?;
    let diags = diagnose(&model);
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    let summary = CheckSummary {
        valid: errors == 0,
        errors,
        warnings: diags.len() - errors,
    };
    out.envelope.diagnostics.extend(diags.iter().map(Diag::from));
    out.text = check_text(model.name(), &summary);
    out.put("check", &summary);
    if errors > 0 {
        return Err(Stop(Status::ValidationError));
    }
    Ok(false)
}

fn eval(out: &mut Output, file: &Path) -> Step<bool> {
    let model = load(out, file)?;
    let model = validated(out, &model)?;
    let factors = compute_all(&model);
    out.text = factors.to_string();
    out.put("factors", &factors);
    Ok(undefined(&factors))
}

fn setups(out: &mut Output, file: &Path, only_functional: bool) -> Step<bool> {
    let model = load(out, file)?;
    let model = validated(out, &model)?;
    if only_functional {
        let f = functional(&model)?;
        out.text = functional_text(&f);
        out.put("functionalConfigurations", &f);
    } else {
        let plan = enumerate_setups(&model).map_err(|e| fail(out, Status::ValidationError, e.to_string()))?;
        out.text = setups_text(&plan.setups);
        out.put("setups", &plan.setups);
    }
    Ok(false)
}

fn trace_cmd(out: &mut Output, file: &Path, element: &str) -> Step<bool> {
    let model = load(out, file)?;
    let model = validated(out, &model)?;
    let t = trace(&model, element).map_err(|e| fail(out, Status::UsageError, e.to_string()))?;
    let list = |ids: &[spsys_core::Identifier]| ids.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "element: {}", t.element);
    let _ = writeln!(s, "hardware: {}", list(&t.hardware_reqs));
    let _ = writeln!(s, "parts: {}", list(&t.part_reqs));
    let _ = writeln!(s, "functional: {}", list(&t.functional_reqs));
    for chain in &t.chains {
        let _ = writeln!(s, "  {chain}");
    }
    out.text = s;
    out.put("trace", &t);
    Ok(false)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ScaffoldSummary {
    output: String,
    twin_pairs: usize,
    agents: usize,
    groups: usize,
    provenance: serde_json::Value,
}

fn scaffold_cmd(out: &mut Output, file: &Path, output: &Path) -> Step<bool> {
    let requirements = load(out, file)?;
    let requirements = validated(out, &requirements)?;
    let result = scaffold(&requirements).map_err(|e| fail(out, Status::ValidationError, e.to_string()))?;
    let text = serialize(&result.model);
    let generated = validate(&result.model).map_err(|f| {
        out.envelope.diagnostics.extend(f.diagnostics.iter().map(Diag::from));
        fail(out, Status::ValidationError, "scaffolded model does not validate")
    })?;
    out.envelope.diagnostics.extend(generated.warnings().iter().map(Diag::from));
    std::fs::write(output, &text).map_err(|e| fail(out, Status::UsageError, format!("cannot write {}: {e}", output.display())))?;

    let summary = ScaffoldSummary {
        output: output.display().to_string(),
        twin_pairs: result.model.twin_pairs().len(),
        agents: result.model.agents().len(),
        groups: result.model.groups().len(),
        provenance: serde_json::to_value(&result.provenance).expect("provenance serializes"),
    };
    let mut s = String::new();
    for (element, req) in &result.provenance {
        let _ = writeln!(s, "{element} <- {req}");
    }
    let _ = writeln!(
        s,
        "wrote {}: {}, {}, {}",
        summary.output,
        plural(summary.agents, "agent"),
        plural(summary.groups, "group"),
        plural(summary.twin_pairs, "twin pair")
    );
    out.text = s;
    out.put("scaffold", &summary);
    Ok(false)
}

fn whatif(out: &mut Output, file: &Path, edits: &Path) -> Step<bool> {
    let model = load(out, file)?;
    let model = validated(out, &model)?;
    let script_text = read(out, edits)?;
    let script = parse_edit_script(&script_text).map_err(|e| fail(out, Status::ParseError, e.to_string()))?;
    match apply_what_if(&model, &script) {
        Ok((report, result)) => {
            out.envelope.diagnostics.retain(|d| d.severity != Severity::Warning);
            out.envelope.diagnostics.extend(result.warnings().iter().map(Diag::from));
            out.text = report.to_string();
            out.put("whatif", &report);
            Ok(undefined(&report.after))
        }
        Err(e) => {
            if let WhatIfError::ResultInvalid { diagnostics, .. } = &e {
                out.envelope.diagnostics.extend(diagnostics.iter().map(Diag::from));
            }
            Err(fail(out, Status::ValidationError, e.to_string()))
        }
    }
}

fn report(out: &mut Output, file: &Path) -> Step<bool> {
    let parsed = load(out, file)?;
    let model = validated(out, &parsed)?;
    let warnings = out.envelope.diagnostics.iter().filter(|d| d.severity == Severity::Warning).count();
    let summary = CheckSummary {
        valid: true,
        errors: 0,
        warnings,
    };
    let factors = compute_all(&model);
    let functional = functional(&model)?;
    let findings = advise(&model);

    let mut s = check_text(model.name(), &summary);
    s.push_str("\n[factors]\n");
    s.push_str(&factors.to_string());
    s.push_str("\n[setups]\n");
    out.put("check", &summary);
    out.put("factors", &factors);
    match enumerate_setups(&model) {
        Ok(plan) => {
            s.push_str(&setups_text(&plan.setups));
            out.put("setups", &plan.setups);
        }
        Err(e) => {
            let _ = writeln!(s, "unavailable: {e}");
            out.put("setups", serde_json::Value::Null);
        }
    }
    s.push_str("\n[functional]\n");
    s.push_str(&functional_text(&functional));
    s.push_str("\n[findings]\n");
    s.push_str(&findings_text(&findings));
    out.put("functionalConfigurations", &functional);
    out.put("findings", &findings);
    out.text = s;

    Ok(undefined(&factors))
}

/// Runs one subcommand; the returned output carries its final status.
pub fn execute(command: &Command, strict: bool) -> Output {
    let mut out = Output::new(command.name());
    let result = match command {
        Command::Check { file } => check(&mut out, file),
        Command::Eval { file } => eval(&mut out, file),
        Command::Setups { file, functional } => setups(&mut out, file, *functional),
        Command::Trace { file, element } => trace_cmd(&mut out, file, element),
        Command::Scaffold { file, output } => scaffold_cmd(&mut out, file, output),
        Command::Whatif { file, edits } => whatif(&mut out, file, edits),
        Command::Report { file, .. } => report(&mut out, file),
    };
    out.envelope.status = match result {
        Err(Stop(status)) => status,
        Ok(has_undefined) if strict && (has_undefined || out.has_warnings()) => {
            if has_undefined {
                out.envelope.error = Some("undefined factor in strict mode".into());
            } else {
                out.envelope.error = Some("warnings in strict mode".into());
            }
            Status::StrictFailure
        }
        Ok(_) => Status::Ok,
    };
    if let Command::Report { output: Some(dir), .. } = command {
        if out.envelope.input_digest.is_some() {
            write_report(&mut out, dir);
        }
    }
    out
}

fn write_report(out: &mut Output, dir: &Path) {
    let written = std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join("report.txt"), &out.text))
        .and_then(|_| std::fs::write(dir.join("report.json"), out.json()));
    if let Err(e) = written {
        out.envelope.error = Some(format!("cannot write report to {}: {e}", dir.display()));
        out.envelope.status = Status::UsageError;
    }
}
