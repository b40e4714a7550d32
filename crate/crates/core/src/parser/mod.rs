//! `.spsys` text format: recursive-descent parser with span diagnostics and
//! a canonical serializer.
//!
//! Parsing is total. Syntax errors are recovered at `;` and `}` boundaries so
//! one pass reports every independent problem; a [`Model`] is returned only
//! when no error-severity diagnostic was produced.

mod lexer;
mod serialize;

use std::collections::HashMap;

use crate::diagnostic::{ParseDiagnostic, Severity, SourceSpan};
use crate::model::{
    Category, ConfigTag, Embodiment, GroupKind, Identifier, Model, ModelBuilder, ModelError,
    RelationKind, Requirement, RequirementRole, Subsystem, SubsystemKind,
};
use lexer::{Token, TokenKind};

pub use serialize::serialize;

#[derive(Clone, Debug)]
pub struct ParseOutcome {
    pub model: Option<Model>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParseOutcome {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

/// Parses `.spsys` source text. `file_name` is only used in spans.
pub fn parse(source: &str, file_name: &str) -> ParseOutcome {
    let (tokens, mut diagnostics) = lexer::tokenize(source, file_name);
    let mut parser = Parser {
        tokens,
        pos: 0,
        file: file_name,
        diags: Vec::new(),
    };
    let ast = parser.model();
    diagnostics.append(&mut parser.diags);
    let model = ast.and_then(|ast| {
        let mut lower = Lowering::new(file_name);
        let model = lower.run(ast);
        diagnostics.append(&mut lower.diags);
        model
    });
    diagnostics.sort_by_key(|d| d.span.start());
    let failed = diagnostics.iter().any(|d| d.severity == Severity::Error);
    ParseOutcome {
        model: if failed { None } else { model },
        diagnostics,
    }
}

#[derive(Clone, Debug)]
struct Name {
    text: String,
    span: SourceSpan,
}

#[derive(Debug)]
struct ReqDecl {
    id: Name,
    role: RequirementRole,
    config: ConfigTag,
    relations: Vec<(RelationKind, Name)>,
}

#[derive(Debug)]
enum AgentItem {
    Uses(Name),
    Owns(Name, SubsystemKind),
}

#[derive(Debug)]
enum StructDecl {
    Subsystem(Name, SubsystemKind),
    Agent(Name, Embodiment, Vec<AgentItem>),
    Group(Name, GroupKind, Vec<Name>),
    Mirror(Name, Name, SourceSpan),
    Twin(Name, Name, SourceSpan),
    Manage(Name, Name),
    Allocate(Name, Name),
}

#[derive(Debug)]
struct Ast {
    name: String,
    requirements: Vec<ReqDecl>,
    structure: Vec<StructDecl>,
}

struct Parser<'f> {
    tokens: Vec<Token>,
    pos: usize,
    file: &'f str,
    diags: Vec<ParseDiagnostic>,
}

/// Marker for a failed production; the diagnostic is already recorded.
struct Failed;

type PResult<T> = Result<T, Failed>;

impl Parser<'_> {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn token(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn span_of(&self, t: &Token) -> SourceSpan {
        SourceSpan::new(self.file, t.start, t.end)
    }

    fn error_here(&mut self, code: &'static str, message: String) -> Failed {
        let span = self.span_of(self.token());
        self.diags.push(ParseDiagnostic::at(Severity::Error, code, message, span));
        Failed
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if *self.peek() == kind {
            Ok(self.bump())
        } else {
            let found = self.peek().describe();
            Err(self.error_here("P010", format!("expected {}, found {found}", kind.describe())))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.at_keyword(kw) {
            Ok(self.bump())
        } else {
            let found = self.peek().describe();
            Err(self.error_here("P010", format!("expected `{kw}`, found {found}")))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            TokenKind::Ident(text) => {
                let t = self.bump();
                Ok(Name {
                    text,
                    span: self.span_of(&t),
                })
            }
            other => Err(self.error_here("P010", format!("expected identifier, found {}", other.describe()))),
        }
    }

    /// `IDENT ("." IDENT)?`
    fn reference(&mut self) -> PResult<Name> {
        let mut name = self.ident()?;
        if *self.peek() == TokenKind::Dot {
            self.bump();
            let local = self.ident()?;
            name.text = format!("{}.{}", name.text, local.text);
            name.span.end_line = local.span.end_line;
            name.span.end_col = local.span.end_col;
        }
        Ok(name)
    }

    /// Reads a stereotype keyword, reporting P020 for an identifier that is not
    /// in `allowed`.
    fn stereotype<T: Copy>(&mut self, what: &str, allowed: &[(&str, T)]) -> PResult<T> {
        match self.peek().clone() {
            TokenKind::Ident(word) => {
                if let Some((_, v)) = allowed.iter().find(|(k, _)| *k == word) {
                    self.bump();
                    Ok(*v)
                } else {
                    let options: Vec<&str> = allowed.iter().map(|(k, _)| *k).collect();
                    Err(self.error_here(
                        "P020",
                        format!("unknown {what} `{word}` (expected one of: {})", options.join(", ")),
                    ))
                }
            }
            other => Err(self.error_here("P010", format!("expected {what}, found {}", other.describe()))),
        }
    }

    /// Skips to the end of the current declaration: past a `;` or a balanced
    /// `{ … }` block, or up to (not past) a `}` closing the enclosing block.
    fn synchronize(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                TokenKind::Eof => return,
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        if *self.peek() == TokenKind::Semi {
                            self.bump();
                        }
                        return;
                    }
                }
                TokenKind::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn model(&mut self) -> Option<Ast> {
        let header = (|| -> PResult<String> {
            self.expect_keyword("model")?;
            let name = match self.peek().clone() {
                TokenKind::Str(s) => {
                    self.bump();
                    s
                }
                other => {
                    return Err(self.error_here("P010", format!("expected model name string, found {}", other.describe())))
                }
            };
            self.expect(TokenKind::LBrace)?;
            Ok(name)
        })();
        let name = header.ok()?;

        let requirements = self.section("requirements", Self::req_decl);
        let structure = self.section("structure", Self::struct_decl);
        let closed = self.expect(TokenKind::RBrace).is_ok();
        if closed && *self.peek() != TokenKind::Eof {
            let found = self.peek().describe();
            self.error_here("P010", format!("unexpected {found} after end of model"));
        }
        Some(Ast {
            name,
            requirements: requirements.unwrap_or_default(),
            structure: structure.unwrap_or_default(),
        })
    }

    fn section<T>(&mut self, keyword: &str, mut item: impl FnMut(&mut Self) -> PResult<T>) -> Option<Vec<T>> {
        if self.expect_keyword(keyword).is_err() || self.expect(TokenKind::LBrace).is_err() {
            self.synchronize();
            return None;
        }
        let mut items = Vec::new();
        loop {
            match self.peek() {
                TokenKind::RBrace => {
                    self.bump();
                    return Some(items);
                }
                TokenKind::Eof => {
                    self.error_here("P010", format!("unclosed `{keyword}` block"));
                    return Some(items);
                }
                _ => match item(self) {
                    Ok(v) => items.push(v),
                    Err(Failed) => self.synchronize(),
                },
            }
        }
    }

    fn req_decl(&mut self) -> PResult<ReqDecl> {
        self.expect_keyword("req")?;
        let id = self.ident()?;
        self.expect(TokenKind::Colon)?;
        let role = match self.stereotype(
            "requirement stereotype",
            &[
                ("functional", 0u8),
                ("part", 1),
                ("hardware", 2),
                ("exogenous", 3),
            ],
        )? {
            0 => self.stereotype(
                "functional requirement kind",
                &[
                    ("embodied", RequirementRole::FunctionalEmbodied),
                    ("computational", RequirementRole::FunctionalComputational),
                ],
            )?,
            1 => self.stereotype(
                "part requirement embodiment",
                &[
                    ("physical", RequirementRole::PartPhysical),
                    ("simulated", RequirementRole::PartSimulated),
                    ("hybrid", RequirementRole::PartHybrid),
                ],
            )?,
            2 => RequirementRole::Hardware,
            _ => RequirementRole::ExogAgent,
        };
        let config = match self.peek() {
            TokenKind::Ident(w) if w != "req" => self.stereotype(
                "configurational stereotype",
                &[("obligatory", ConfigTag::Obligatory), ("optional", ConfigTag::Optional)],
            )?,
            _ => ConfigTag::Unset,
        };
        let mut relations = Vec::new();
        if *self.peek() == TokenKind::LBrace {
            self.bump();
            while *self.peek() != TokenKind::RBrace {
                if *self.peek() == TokenKind::Eof {
                    return Err(self.error_here("P010", "unclosed requirement body".into()));
                }
                let kind = self.stereotype(
                    "requirement relation",
                    &[
                        ("derives", RelationKind::Derives),
                        ("satisfies", RelationKind::Satisfies),
                        ("verifies", RelationKind::Verifies),
                        ("refines", RelationKind::Refines),
                    ],
                );
                let rel = kind.and_then(|k| {
                    let target = self.ident()?;
                    self.expect(TokenKind::Semi)?;
                    Ok((k, target))
                });
                match rel {
                    Ok(r) => relations.push(r),
                    Err(Failed) => self.synchronize(),
                }
            }
            self.bump();
        }
        if *self.peek() == TokenKind::Semi {
            self.bump();
        }
        Ok(ReqDecl {
            id,
            role,
            config,
            relations,
        })
    }

    fn subsystem_tail(&mut self) -> PResult<(Name, SubsystemKind)> {
        self.expect_keyword("subsystem")?;
        let id = self.ident()?;
        self.expect(TokenKind::Colon)?;
        use SubsystemKind::*;
        let layer = self.stereotype(
            "subsystem kind",
            &[("cont", 0u8), ("virt_rec", 1), ("virt_eff", 2), ("real_rec", 3), ("real_eff", 4)],
        )?;
        let kind = if layer == 0 {
            self.stereotype(
                "embodiment",
                &[("physical", ContPhy), ("simulated", ContSim), ("hybrid", ContHyb)],
            )?
        } else {
            let (phy, sim) = match layer {
                1 => (VirtRecPhy, VirtRecSim),
                2 => (VirtEffPhy, VirtEffSim),
                3 => (RealRecPhy, RealRecSim),
                _ => (RealEffPhy, RealEffSim),
            };
            self.stereotype("embodiment", &[("physical", phy), ("simulated", sim)])?
        };
        self.expect(TokenKind::Semi)?;
        Ok((id, kind))
    }

    fn arrow_pair(&mut self, arrow: TokenKind) -> PResult<(Name, Name)> {
        let a = self.reference()?;
        self.expect(arrow)?;
        let b = self.reference()?;
        self.expect(TokenKind::Semi)?;
        Ok((a, b))
    }

    fn struct_decl(&mut self) -> PResult<StructDecl> {
        let keyword = match self.peek().clone() {
            TokenKind::Ident(k) => k,
            other => {
                return Err(self.error_here("P010", format!("expected structure declaration, found {}", other.describe())))
            }
        };
        let start = self.token().start;
        match keyword.as_str() {
            "subsystem" => {
                let (id, kind) = self.subsystem_tail()?;
                Ok(StructDecl::Subsystem(id, kind))
            }
            "agent" => {
                self.bump();
                let id = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let kind = self.stereotype(
                    "agent embodiment",
                    &[
                        ("physical", Embodiment::Physical),
                        ("simulated", Embodiment::Simulated),
                        ("hybrid", Embodiment::Hybrid),
                    ],
                )?;
                self.expect(TokenKind::LBrace)?;
                let mut items = Vec::new();
                loop {
                    let item = match self.peek() {
                        TokenKind::RBrace => {
                            self.bump();
                            break;
                        }
                        TokenKind::Eof => return Err(self.error_here("P010", "unclosed agent body".into())),
                        _ if self.at_keyword("uses") => {
                            self.bump();
                            self.reference().and_then(|r| {
                                self.expect(TokenKind::Semi)?;
                                Ok(AgentItem::Uses(r))
                            })
                        }
                        _ if self.at_keyword("owns") => {
                            self.bump();
                            self.subsystem_tail().map(|(n, k)| AgentItem::Owns(n, k))
                        }
                        other => {
                            let found = other.describe();
                            Err(self.error_here("P010", format!("expected `uses` or `owns`, found {found}")))
                        }
                    };
                    match item {
                        Ok(i) => items.push(i),
                        Err(Failed) => self.synchronize(),
                    }
                }
                Ok(StructDecl::Agent(id, kind, items))
            }
            "group" => {
                self.bump();
                let id = self.ident()?;
                self.expect(TokenKind::Colon)?;
                let kind = self.stereotype(
                    "group kind",
                    &[
                        ("agents", GroupKind::Plain),
                        ("world_mirror", GroupKind::WorldMirror),
                        ("mirror_phy", GroupKind::MirrorPhy),
                        ("mirror_sim", GroupKind::MirrorSim),
                        ("setup", GroupKind::Setup),
                    ],
                )?;
                self.expect(TokenKind::LBrace)?;
                let mut members = Vec::new();
                loop {
                    match self.peek() {
                        TokenKind::RBrace => {
                            self.bump();
                            break;
                        }
                        TokenKind::Eof => return Err(self.error_here("P010", "unclosed group body".into())),
                        _ => {}
                    }
                    let member = self.expect_keyword("member").and_then(|_| {
                        let r = self.reference()?;
                        self.expect(TokenKind::Semi)?;
                        Ok(r)
                    });
                    match member {
                        Ok(m) => members.push(m),
                        Err(Failed) => self.synchronize(),
                    }
                }
                Ok(StructDecl::Group(id, kind, members))
            }
            "mirror" | "twin" => {
                self.bump();
                let (a, b) = self.arrow_pair(TokenKind::BiArrow)?;
                let end = self.tokens[self.pos.saturating_sub(1)].end;
                let span = SourceSpan::new(self.file, start, end);
                Ok(if keyword == "mirror" {
                    StructDecl::Mirror(a, b, span)
                } else {
                    StructDecl::Twin(a, b, span)
                })
            }
            "manage" => {
                self.bump();
                let (a, r) = self.arrow_pair(TokenKind::Arrow)?;
                Ok(StructDecl::Manage(a, r))
            }
            "allocate" => {
                self.bump();
                let (h, t) = self.arrow_pair(TokenKind::Arrow)?;
                Ok(StructDecl::Allocate(h, t))
            }
            other => Err(self.error_here("P010", format!("expected structure declaration, found `{other}`"))),
        }
    }
}

/// Name resolution and model construction over a syntactically complete AST.
struct Lowering<'f> {
    file: &'f str,
    diags: Vec<ParseDiagnostic>,
    declared: HashMap<String, (Category, SourceSpan)>,
    /// (subject, target) → spans of the target token, in source order.
    ref_spans: HashMap<(String, String), Vec<SourceSpan>>,
    agent_kinds: HashMap<String, Embodiment>,
    group_kinds: HashMap<String, GroupKind>,
}

impl<'f> Lowering<'f> {
    fn new(file: &'f str) -> Self {
        Lowering {
            file,
            diags: Vec::new(),
            declared: HashMap::new(),
            ref_spans: HashMap::new(),
            agent_kinds: HashMap::new(),
            group_kinds: HashMap::new(),
        }
    }

    fn error(&mut self, code: &'static str, message: String, span: SourceSpan) {
        self.diags.push(ParseDiagnostic::at(Severity::Error, code, message, span));
    }

    /// Registers a declaration; false (after reporting P101) on a duplicate.
    fn declare(&mut self, text: &str, category: Category, span: &SourceSpan) -> bool {
        if let Some((_, first)) = self.declared.get(text) {
            let message = format!(
                "duplicate identifier `{text}` (first declared at {}:{})",
                first.start_line, first.start_col
            );
            self.error("P101", message, span.clone());
            return false;
        }
        self.declared.insert(text.to_string(), (category, span.clone()));
        true
    }

    /// Checks a reference; reports P100/P102 and returns None when unusable.
    fn resolve(&mut self, subject: &str, name: &Name, allowed: &[Category], expected: &str) -> Option<Identifier> {
        match self.declared.get(&name.text) {
            None => {
                self.error("P100", format!("undeclared identifier `{}`", name.text), name.span.clone());
                None
            }
            Some((category, _)) if !allowed.contains(category) => {
                let message = format!("`{}` is a {category}; expected {expected}", name.text);
                self.error("P102", message, name.span.clone());
                None
            }
            Some(_) => {
                self.ref_spans
                    .entry((subject.to_string(), name.text.clone()))
                    .or_default()
                    .push(name.span.clone());
                Identifier::new(name.text.clone()).ok()
            }
        }
    }

    fn identifier(&mut self, name: &Name) -> Option<Identifier> {
        match Identifier::new(name.text.clone()) {
            Ok(id) => Some(id),
            Err(e) => {
                self.error("P010", e.to_string(), name.span.clone());
                None
            }
        }
    }

    fn run(&mut self, ast: Ast) -> Option<Model> {
        let mut builder = ModelBuilder::new(ast.name);

        // Pass 1: declarations.
        let mut live_reqs = Vec::new();
        for r in &ast.requirements {
            if self.declare(&r.id.text, Category::Requirement, &r.id.span) {
                live_reqs.push(r);
            }
        }
        let mut live_structure = Vec::new();
        for decl in &ast.structure {
            let keep = match decl {
                StructDecl::Subsystem(id, _) => self.declare(&id.text, Category::Subsystem, &id.span),
                StructDecl::Agent(id, kind, items) => {
                    let ok = self.declare(&id.text, Category::Agent, &id.span);
                    if ok {
                        self.agent_kinds.insert(id.text.clone(), *kind);
                        for item in items {
                            if let AgentItem::Owns(local, _) = item {
                                let qualified = format!("{}.{}", id.text, local.text);
                                self.declare(&qualified, Category::Subsystem, &local.span);
                            }
                        }
                    }
                    ok
                }
                StructDecl::Group(id, kind, _) => {
                    let ok = self.declare(&id.text, Category::Group, &id.span);
                    if ok {
                        self.group_kinds.insert(id.text.clone(), *kind);
                    }
                    ok
                }
                _ => true,
            };
            if keep {
                live_structure.push(decl);
            }
        }

        // Twin sugar expands into implicit singleton groups.
        let mut implicit_groups = Vec::new();
        let mut mirrors = Vec::new();
        for decl in &live_structure {
            match decl {
                StructDecl::Twin(a, b, span) => {
                    if let Some((sim, phy)) = self.twin_endpoints(a, b, span) {
                        let sim_group = format!("{sim}__grp");
                        let phy_group = format!("{phy}__grp");
                        let ok_sim = self.declare(&sim_group, Category::Group, span);
                        let ok_phy = self.declare(&phy_group, Category::Group, span);
                        if ok_sim && ok_phy {
                            self.group_kinds.insert(sim_group.clone(), GroupKind::MirrorSim);
                            self.group_kinds.insert(phy_group.clone(), GroupKind::MirrorPhy);
                            implicit_groups.push((sim_group.clone(), GroupKind::MirrorSim, sim));
                            implicit_groups.push((phy_group.clone(), GroupKind::MirrorPhy, phy));
                            mirrors.push((sim_group, phy_group, span.clone()));
                        }
                    }
                }
                StructDecl::Mirror(a, b, span) => {
                    let sim = self.resolve(&a.text, a, &[Category::Group], "a group");
                    let phy = self.resolve(&a.text, b, &[Category::Group], "a group");
                    if let (Some(sim), Some(phy)) = (sim, phy) {
                        let reversed = self.group_kinds.get(sim.as_str()) == Some(&GroupKind::MirrorPhy)
                            && self.group_kinds.get(phy.as_str()) == Some(&GroupKind::MirrorSim);
                        if reversed {
                            self.diags.push(ParseDiagnostic::at(
                                Severity::Warning,
                                "P200",
                                format!("mirror declared physical side first; read as `mirror {phy} <-> {sim};`"),
                                span.clone(),
                            ));
                            mirrors.push((phy.to_string(), sim.to_string(), span.clone()));
                        } else {
                            mirrors.push((sim.to_string(), phy.to_string(), span.clone()));
                        }
                    }
                }
                _ => {}
            }
        }

        // Pass 2: references.
        for r in live_reqs {
            let Some(id) = self.identifier(&r.id) else { continue };
            let mut req = Requirement::new(id, r.role, r.config);
            for (kind, target) in &r.relations {
                if let Some(t) = self.resolve(&r.id.text, target, &[Category::Requirement], "a requirement") {
                    req.relations.push(crate::model::Relation { kind: *kind, target: t });
                }
            }
            builder.requirement(req);
        }
        for decl in &live_structure {
            match decl {
                StructDecl::Subsystem(id, kind) => {
                    if let Some(id) = self.identifier(id) {
                        builder.subsystem(id, *kind);
                    }
                }
                StructDecl::Agent(id, kind, items) => {
                    let Some(agent_id) = self.identifier(id) else { continue };
                    let mut refs = Vec::new();
                    let mut owned = Vec::new();
                    for item in items {
                        match item {
                            AgentItem::Uses(target) => {
                                if let Some(t) = self.resolve(&id.text, target, &[Category::Subsystem], "a subsystem") {
                                    refs.push(t);
                                }
                            }
                            AgentItem::Owns(local, sub_kind) => {
                                let qualified = format!("{}.{}", id.text, local.text);
                                // duplicates were reported in pass 1
                                let first = self.declared.get(&qualified).is_some_and(|(_, s)| *s == local.span);
                                if !first {
                                    continue;
                                }
                                match Identifier::qualified(&agent_id, &local.text) {
                                    Ok(q) => {
                                        refs.push(q.clone());
                                        owned.push(Subsystem {
                                            id: q,
                                            kind: *sub_kind,
                                            owner: Some(agent_id.clone()),
                                        });
                                    }
                                    Err(e) => self.error("P010", e.to_string(), local.span.clone()),
                                }
                            }
                        }
                    }
                    builder.agent(agent_id, *kind, refs);
                    builder.subsystems.extend(owned);
                }
                StructDecl::Group(id, kind, members) => {
                    let Some(group_id) = self.identifier(id) else { continue };
                    let resolved = members
                        .iter()
                        .filter_map(|m| {
                            self.resolve(&id.text, m, &[Category::Agent, Category::Group], "an agent or group")
                        })
                        .collect();
                    builder.group(group_id, *kind, resolved);
                }
                StructDecl::Manage(agent, req) => {
                    let a = self.resolve(&agent.text, agent, &[Category::Agent], "an agent");
                    let r = self.resolve(&agent.text, req, &[Category::Requirement], "a requirement");
                    if let (Some(a), Some(r)) = (a, r) {
                        builder.manage(a, r);
                    }
                }
                StructDecl::Allocate(hw, target) => {
                    let h = self.resolve(&hw.text, hw, &[Category::Requirement], "a requirement");
                    let t = self.resolve(
                        &hw.text,
                        target,
                        &[Category::Agent, Category::Subsystem],
                        "an agent or subsystem",
                    );
                    if let (Some(h), Some(t)) = (h, t) {
                        builder.allocate(h, t);
                    }
                }
                StructDecl::Mirror(..) | StructDecl::Twin(..) => {}
            }
        }
        for (group, kind, agent) in implicit_groups {
            builder.group(Identifier::new(group).ok()?, kind, vec![agent]);
        }
        for (sim, phy, _) in &mirrors {
            builder.mirror(Identifier::new(sim.clone()).ok()?, Identifier::new(phy.clone()).ok()?);
        }

        match builder.build() {
            Ok(model) => Some(model),
            Err(errors) => {
                for e in errors {
                    self.report_model_error(&e);
                }
                None
            }
        }
    }

    fn twin_endpoints(&mut self, a: &Name, b: &Name, span: &SourceSpan) -> Option<(Identifier, Identifier)> {
        let first = self.resolve(&a.text, a, &[Category::Agent], "an agent");
        let second = self.resolve(&a.text, b, &[Category::Agent], "an agent");
        let (first, second) = (first?, second?);
        let kinds = (
            self.agent_kinds.get(first.as_str()).copied(),
            self.agent_kinds.get(second.as_str()).copied(),
        );
        match kinds {
            (Some(Embodiment::Simulated), Some(Embodiment::Physical)) => Some((first, second)),
            (Some(Embodiment::Physical), Some(Embodiment::Simulated)) => {
                self.diags.push(ParseDiagnostic::at(
                    Severity::Warning,
                    "P200",
                    format!("twin declared physical agent first; read as `twin {second} <-> {first};`"),
                    span.clone(),
                ));
                Some((second, first))
            }
            _ => {
                self.error(
                    "P102",
                    format!("twin `{first} <-> {second}` must relate one simulated and one physical agent"),
                    span.clone(),
                );
                None
            }
        }
    }

    fn report_model_error(&mut self, error: &ModelError) {
        let code = match error {
            ModelError::DanglingReference { .. } => "P100",
            ModelError::DuplicateIdentifier { .. } => "P101",
            ModelError::WrongCategory { .. } | ModelError::OrphanOwnedSubsystem { .. } => "P102",
            ModelError::ExogenousWithConfig { .. } | ModelError::InvalidRelationTarget { .. } => "P103",
            ModelError::MembershipCycle { .. } => "P104",
            _ => "P010",
        };
        let subject = error.subject().map(|s| s.to_string());
        let target = error.target().map(|t| t.to_string());
        let span = subject
            .as_ref()
            .zip(target.as_ref())
            .and_then(|(s, t)| self.ref_spans.get_mut(&(s.clone(), t.clone())))
            .and_then(|spans| (!spans.is_empty()).then(|| spans.remove(0)))
            .or_else(|| subject.as_ref().and_then(|s| self.declared.get(s)).map(|(_, sp)| sp.clone()))
            .unwrap_or_else(|| {
                let p = crate::diagnostic::Position { line: 1, col: 1 };
                SourceSpan::new(self.file, p, p)
            });
        self.error(code, error.to_string(), span);
    }
}
