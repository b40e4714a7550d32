use std::fmt::Write;

use crate::model::{ConfigTag, Model};

/// Renders a model in canonical form: two-space indentation, LF line
/// endings, declarations in model order. Parsing the output yields an equal
/// model, and serializing that model again yields identical text.
pub fn serialize(model: &Model) -> String {
    let mut out = String::new();
    let name = model.name().replace('\\', "\\\\").replace('"', "\\\"");
    let _ = writeln!(out, "model \"{name}\" {{");

    if model.requirements().is_empty() {
        out.push_str("  requirements {}\n");
    } else {
        out.push_str("  requirements {\n");
        for r in model.requirements() {
            let _ = write!(out, "    req {} : {}", r.id, r.role.keywords());
            match r.config {
                ConfigTag::Obligatory => out.push_str(" obligatory"),
                ConfigTag::Optional => out.push_str(" optional"),
                ConfigTag::Unset => {}
            }
            if r.relations.is_empty() {
                out.push_str(";\n");
            } else {
                out.push_str(" {\n");
                for rel in &r.relations {
                    let _ = writeln!(out, "      {} {};", rel.kind, rel.target);
                }
                out.push_str("    }\n");
            }
        }
        out.push_str("  }\n");
    }

    if !model.has_structure() {
        out.push_str("  structure {}\n}\n");
        return out;
    }
    out.push_str("  structure {\n");
    for s in model.subsystems().iter().filter(|s| s.owner.is_none()) {
        let _ = writeln!(out, "    subsystem {} : {};", s.id, s.kind.keywords());
    }
    for a in model.agents() {
        if a.subsystems.is_empty() {
            let _ = writeln!(out, "    agent {} : {} {{}}", a.id, a.kind);
            continue;
        }
        let _ = writeln!(out, "    agent {} : {} {{", a.id, a.kind);
        for id in &a.subsystems {
            match model.subsystem(id.as_str()) {
                Some(s) if s.owner.as_ref() == Some(&a.id) => {
                    let _ = writeln!(out, "      owns subsystem {} : {};", id.local(), s.kind.keywords());
                }
                _ => {
                    let _ = writeln!(out, "      uses {id};");
                }
            }
        }
        out.push_str("    }\n");
    }
    for g in model.groups() {
        if g.members.is_empty() {
            let _ = writeln!(out, "    group {} : {} {{}}", g.id, g.kind.keyword());
            continue;
        }
        let _ = writeln!(out, "    group {} : {} {{", g.id, g.kind.keyword());
        for m in &g.members {
            let _ = writeln!(out, "      member {m};");
        }
        out.push_str("    }\n");
    }
    for p in model.twin_pairs() {
        let _ = writeln!(out, "    mirror {} <-> {};", p.sim, p.phy);
    }
    for l in model.manage_links() {
        let _ = writeln!(out, "    manage {} -> {};", l.agent, l.requirement);
    }
    for al in model.allocations() {
        let _ = writeln!(out, "    allocate {} -> {};", al.hardware, al.target);
    }
    out.push_str("  }\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn empty_model_layout() {
        assert_eq!(
            serialize(&Model::empty("m")),
            "model \"m\" {\n  requirements {}\n  structure {}\n}\n"
        );
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let src = r#"model "rt \"q\"" {
          requirements {
            req Nav : functional embodied obligatory;
            req Robot : part hybrid { satisfies Nav; }
            req Hw : hardware { satisfies Nav; };
            req Humans : exogenous
          }
          structure {
            agent TiagoSim : simulated { uses RobotIf; owns subsystem Cam : real_rec simulated; }
            agent TiagoPhy : physical { owns subsystem Lidar : real_rec physical; uses RobotIf; }
            agent Talker : hybrid { uses RobotIf; }
            subsystem RobotIf : cont hybrid;
            group Empty : agents {}
            twin TiagoSim <-> TiagoPhy;
            manage TiagoSim -> Humans;
            allocate Hw -> TiagoPhy.Lidar;
          }
        }"#;
        let m1 = parse(src, "rt").model.unwrap();
        let text1 = serialize(&m1);
        let m2 = parse(&text1, "rt").model.unwrap();
        assert_eq!(m1, m2);
        assert_eq!(text1, serialize(&m2));
        assert!(text1.contains("owns subsystem Lidar : real_rec physical;"));
        assert!(text1.contains("mirror TiagoSim__grp <-> TiagoPhy__grp;"));
    }
}
