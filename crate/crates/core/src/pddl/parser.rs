//! Parser for the supported PDDL fragment.
//!
//! Parsing reports three classes of diagnostics: `pddl.lex` (bad
//! characters), `pddl.syntax` (malformed structure; reported one at a
//! time) and `pddl.semantic` (undeclared names, arity mismatches,
//! unsupported constructs, missing requirement flags; collected).
//!
//! A problem can be parsed against its domain, which enables
//! declaration and arity checking, or standalone, which checks shape
//! and groundness only.

use std::collections::BTreeSet;

use crate::diag::{self, Diagnostic};
use crate::pddl::ast::*;
use crate::pddl::lexer::{lex, Tok, Token};

#[derive(Debug, Clone)]
enum Sexpr {
    List(Vec<Sexpr>, u32, u32),
    Sym(String, u32, u32),
    Var(String, u32, u32),
    Num(f64, u32, u32),
    Kw(String, u32, u32),
}

impl Sexpr {
    fn pos(&self) -> (u32, u32) {
        match self {
            Sexpr::List(_, l, c)
            | Sexpr::Sym(_, l, c)
            | Sexpr::Var(_, l, c)
            | Sexpr::Num(_, l, c)
            | Sexpr::Kw(_, l, c) => (*l, *c),
        }
    }

    fn describe(&self) -> String {
        match self {
            Sexpr::List(..) => "a list".into(),
            Sexpr::Sym(s, ..) => format!("`{s}`"),
            Sexpr::Var(v, ..) => format!("`{v}`"),
            Sexpr::Num(n, ..) => format!("the number {n}"),
            Sexpr::Kw(k, ..) => format!("`:{k}`"),
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexpr::Sym(s, ..) => Some(s),
            _ => None,
        }
    }
}

fn syntax(pos: (u32, u32), message: impl Into<String>) -> Diagnostic {
    Diagnostic::error("pddl.syntax", message).at_position(pos.0, pos.1)
}

fn semantic(diags: &mut Vec<Diagnostic>, pos: (u32, u32), message: impl Into<String>) {
    diags.push(Diagnostic::error("pddl.semantic", message).at_position(pos.0, pos.1));
}

fn read_sexprs(tokens: &[Token]) -> Result<Vec<Sexpr>, Diagnostic> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        out.push(read_one(tokens, &mut i)?);
    }
    Ok(out)
}

fn read_one(tokens: &[Token], i: &mut usize) -> Result<Sexpr, Diagnostic> {
    let t = &tokens[*i];
    *i += 1;
    match &t.tok {
        Tok::LParen => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*i) {
                    None => {
                        return Err(syntax(
                            (t.line, t.column),
                            "this `(` is never closed",
                        ))
                    }
                    Some(tok) if tok.tok == Tok::RParen => {
                        *i += 1;
                        return Ok(Sexpr::List(items, t.line, t.column));
                    }
                    Some(_) => items.push(read_one(tokens, i)?),
                }
            }
        }
        Tok::RParen => Err(syntax((t.line, t.column), "unmatched `)`")),
        Tok::Sym(s) => Ok(Sexpr::Sym(s.clone(), t.line, t.column)),
        Tok::Var(v) => Ok(Sexpr::Var(v.clone(), t.line, t.column)),
        Tok::Num(n) => Ok(Sexpr::Num(*n, t.line, t.column)),
        Tok::Kw(k) => Ok(Sexpr::Kw(k.clone(), t.line, t.column)),
    }
}

fn expect_name(sx: &Sexpr, what: &str) -> Result<PddlName, Diagnostic> {
    match sx.sym().and_then(|s| PddlName::new(s).ok()) {
        Some(n) => Ok(n),
        None => Err(syntax(
            sx.pos(),
            format!("expected a name for {what}, found {}", sx.describe()),
        )),
    }
}

fn object_name() -> PddlName {
    PddlName::new(TYPE_OBJECT).expect("object is a valid name")
}

#[derive(Clone, Copy)]
enum EntryMode {
    Variables,
    Names,
}

fn parse_typed_list(items: &[Sexpr], mode: EntryMode) -> Result<Vec<TypedEntry>, Diagnostic> {
    let mut pending: Vec<String> = Vec::new();
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        if items[i].sym() == Some("-") {
            if pending.is_empty() {
                return Err(syntax(items[i].pos(), "`-` must follow at least one entry"));
            }
            let ty_sx = items.get(i + 1).ok_or_else(|| {
                syntax(items[i].pos(), "expected a type name after `-`")
            })?;
            let ty = expect_name(ty_sx, "a type")?;
            for name in pending.drain(..) {
                out.push(TypedEntry::new(name, ty.clone()));
            }
            i += 2;
            continue;
        }
        let entry = match (mode, &items[i]) {
            (EntryMode::Variables, Sexpr::Var(v, ..)) => v.clone(),
            (EntryMode::Variables, other) => {
                return Err(syntax(
                    other.pos(),
                    format!("expected a `?variable`, found {}", other.describe()),
                ))
            }
            (EntryMode::Names, other) => expect_name(other, "an entry")?.as_str().to_string(),
        };
        pending.push(entry);
        i += 1;
    }
    let object = object_name();
    for name in pending {
        out.push(TypedEntry::new(name, object.clone()));
    }
    Ok(out)
}

fn check_unique_entries(
    entries: &[TypedEntry],
    pos: (u32, u32),
    what: &str,
    diags: &mut Vec<Diagnostic>,
) {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for e in entries {
        if !seen.insert(e.name.to_ascii_lowercase()) {
            semantic(diags, pos, format!("duplicate {what} `{}`", e.name));
        }
    }
}

/// Declarations visible while parsing condition and effect bodies.
struct Scope<'a> {
    domain: Option<&'a PddlDomain>,
    /// `Some` inside an action: terms must be these variables.
    /// `None` inside a problem: terms must be ground object names.
    params: Option<&'a [TypedEntry]>,
    /// Objects of the problem being parsed, for groundness checks.
    objects: Option<&'a [TypedEntry]>,
}

impl Scope<'_> {
    fn check_term(&self, term: &Sexpr, diags: &mut Vec<Diagnostic>) -> Option<Term> {
        match term {
            Sexpr::Var(v, ..) => {
                match self.params {
                    Some(params) => {
                        if !params.iter().any(|p| p.name.eq_ignore_ascii_case(v)) {
                            semantic(diags, term.pos(), format!("`{v}` is not a parameter"));
                        }
                    }
                    None => semantic(
                        diags,
                        term.pos(),
                        format!("`{v}` is a variable, but this position must be ground"),
                    ),
                }
                Some(Term::Variable(v.clone()))
            }
            Sexpr::Sym(s, ..) => match PddlName::new(s) {
                Ok(name) => {
                    if self.params.is_some() {
                        semantic(
                            diags,
                            term.pos(),
                            format!("`{s}` is a constant; action bodies may only use parameters"),
                        );
                    } else if let Some(objects) = self.objects {
                        if !objects.iter().any(|o| o.name.eq_ignore_ascii_case(s)) {
                            semantic(diags, term.pos(), format!("object `{s}` is not declared"));
                        }
                    }
                    Some(Term::Constant(name))
                }
                Err(_) => {
                    semantic(diags, term.pos(), format!("`{s}` is not a valid term"));
                    None
                }
            },
            other => {
                semantic(
                    diags,
                    other.pos(),
                    format!("expected a term, found {}", other.describe()),
                );
                None
            }
        }
    }

    fn check_predicate_use(
        &self,
        name: &PddlName,
        arity: usize,
        pos: (u32, u32),
        diags: &mut Vec<Diagnostic>,
    ) {
        if let Some(domain) = self.domain {
            match domain.predicate(name) {
                None => semantic(diags, pos, format!("predicate `{name}` is not declared")),
                Some(decl) if decl.params.len() != arity => semantic(
                    diags,
                    pos,
                    format!(
                        "predicate `{name}` expects {} arguments, found {arity}",
                        decl.params.len()
                    ),
                ),
                Some(_) => {}
            }
        }
    }

    fn check_function_use(
        &self,
        name: &PddlName,
        arity: usize,
        pos: (u32, u32),
        diags: &mut Vec<Diagnostic>,
    ) {
        if let Some(domain) = self.domain {
            match domain.function(name) {
                None => semantic(diags, pos, format!("function `{name}` is not declared")),
                Some(decl) if decl.params.len() != arity => semantic(
                    diags,
                    pos,
                    format!(
                        "function `{name}` expects {} arguments, found {arity}",
                        decl.params.len()
                    ),
                ),
                Some(_) => {}
            }
        }
    }
}

const UNSUPPORTED_CONNECTIVES: &[&str] = &[
    "or", "imply", "exists", "forall", "when", "preference", "either",
];

fn parse_atom(
    items: &[Sexpr],
    pos: (u32, u32),
    scope: &Scope,
    diags: &mut Vec<Diagnostic>,
) -> Result<Atom, Diagnostic> {
    let head = items
        .first()
        .ok_or_else(|| syntax(pos, "expected a predicate name, found `()`"))?;
    let predicate = expect_name(head, "a predicate")?;
    let terms: Vec<Term> = items[1..]
        .iter()
        .filter_map(|t| scope.check_term(t, diags))
        .collect();
    scope.check_predicate_use(&predicate, items.len() - 1, head.pos(), diags);
    Ok(Atom { predicate, terms })
}

fn parse_condition(
    sx: &Sexpr,
    scope: &Scope,
    diags: &mut Vec<Diagnostic>,
) -> Result<Condition, Diagnostic> {
    let items = match sx {
        Sexpr::List(items, ..) => items,
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected a condition, found {}", other.describe()),
            ))
        }
    };
    let head = items
        .first()
        .ok_or_else(|| syntax(sx.pos(), "expected a condition, found `()`"))?;
    match head.sym().map(str::to_ascii_lowercase).as_deref() {
        Some("and") => {
            let mut parts = Vec::new();
            for part in &items[1..] {
                parts.push(parse_condition(part, scope, diags)?);
            }
            Ok(Condition::And(parts))
        }
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(sx.pos(), "`not` takes exactly one condition"));
            }
            match &items[1] {
                Sexpr::List(inner, l, c)
                    if !matches!(
                        inner.first().and_then(Sexpr::sym).map(str::to_ascii_lowercase).as_deref(),
                        Some("and") | Some("not")
                    ) =>
                {
                    Ok(Condition::Not(parse_atom(inner, (*l, *c), scope, diags)?))
                }
                other => {
                    semantic(
                        diags,
                        other.pos(),
                        "only atoms may be negated in this fragment",
                    );
                    Ok(Condition::And(Vec::new()))
                }
            }
        }
        Some(s) if UNSUPPORTED_CONNECTIVES.contains(&s) => {
            semantic(
                diags,
                head.pos(),
                format!("`{s}` conditions are not part of this fragment"),
            );
            Ok(Condition::And(Vec::new()))
        }
        _ => Ok(Condition::Atom(parse_atom(items, sx.pos(), scope, diags)?)),
    }
}

fn parse_function_term(
    sx: &Sexpr,
    scope: &Scope,
    diags: &mut Vec<Diagnostic>,
) -> Result<FunctionTerm, Diagnostic> {
    let items = match sx {
        Sexpr::List(items, ..) => items,
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected a function term, found {}", other.describe()),
            ))
        }
    };
    let head = items
        .first()
        .ok_or_else(|| syntax(sx.pos(), "expected a function name, found `()`"))?;
    let function = expect_name(head, "a function")?;
    let terms: Vec<Term> = items[1..]
        .iter()
        .filter_map(|t| scope.check_term(t, diags))
        .collect();
    scope.check_function_use(&function, items.len() - 1, head.pos(), diags);
    Ok(FunctionTerm { function, terms })
}

fn parse_effect(
    sx: &Sexpr,
    scope: &Scope,
    diags: &mut Vec<Diagnostic>,
) -> Result<Effect, Diagnostic> {
    let items = match sx {
        Sexpr::List(items, ..) => items,
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected an effect, found {}", other.describe()),
            ))
        }
    };
    let head = items
        .first()
        .ok_or_else(|| syntax(sx.pos(), "expected an effect, found `()`"))?;
    match head.sym().map(str::to_ascii_lowercase).as_deref() {
        Some("and") => {
            let mut parts = Vec::new();
            for part in &items[1..] {
                parts.push(parse_effect(part, scope, diags)?);
            }
            Ok(Effect::And(parts))
        }
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(sx.pos(), "`not` takes exactly one atom"));
            }
            match &items[1] {
                Sexpr::List(inner, l, c)
                    if !matches!(
                        inner.first().and_then(Sexpr::sym).map(str::to_ascii_lowercase).as_deref(),
                        Some("and") | Some("not")
                    ) =>
                {
                    Ok(Effect::Delete(parse_atom(inner, (*l, *c), scope, diags)?))
                }
                other => {
                    semantic(
                        diags,
                        other.pos(),
                        "only atoms may be deleted",
                    );
                    Ok(Effect::And(Vec::new()))
                }
            }
        }
        Some("increase") => {
            if items.len() != 3 {
                return Err(syntax(
                    sx.pos(),
                    "`increase` takes a function term and an amount",
                ));
            }
            let target = parse_function_term(&items[1], scope, diags)?;
            if target.function != PddlName::new(FN_TOTAL_COST).unwrap() {
                semantic(
                    diags,
                    items[1].pos(),
                    format!(
                        "only `({FN_TOTAL_COST})` may be increased, not `{}`",
                        target.function
                    ),
                );
            }
            let amount = match &items[2] {
                Sexpr::Num(n, ..) => NumericExpr::Literal(*n),
                list @ Sexpr::List(..) => {
                    NumericExpr::Function(parse_function_term(list, scope, diags)?)
                }
                other => {
                    return Err(syntax(
                        other.pos(),
                        format!(
                            "expected a number or function term, found {}",
                            other.describe()
                        ),
                    ))
                }
            };
            Ok(Effect::Increase { target, amount })
        }
        Some(s) if UNSUPPORTED_CONNECTIVES.contains(&s) || s == "assign" || s == "decrease"
            || s == "scale-up" || s == "scale-down" =>
        {
            semantic(
                diags,
                head.pos(),
                format!("`{s}` effects are not part of this fragment"),
            );
            Ok(Effect::And(Vec::new()))
        }
        _ => Ok(Effect::Add(parse_atom(items, sx.pos(), scope, diags)?)),
    }
}

/// Splits `(define (<kind> <name>) <sections>...)` into the name and
/// the section lists.
fn define_form<'a>(
    forms: &'a [Sexpr],
    kind: &str,
) -> Result<(PddlName, &'a [Sexpr]), Diagnostic> {
    if forms.is_empty() {
        return Err(syntax((1, 1), format!("expected a `(define ({kind} ...))` form")));
    }
    if forms.len() > 1 {
        return Err(syntax(
            forms[1].pos(),
            "expected a single `(define ...)` form",
        ));
    }
    let items = match &forms[0] {
        Sexpr::List(items, ..) => items,
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected `(define ...)`, found {}", other.describe()),
            ))
        }
    };
    match items.first() {
        Some(sx) if sx.sym().map(|s| s.eq_ignore_ascii_case("define")) == Some(true) => {}
        _ => {
            return Err(syntax(
                forms[0].pos(),
                format!("expected `(define ({kind} ...))`"),
            ))
        }
    }
    let head = items
        .get(1)
        .ok_or_else(|| syntax(forms[0].pos(), format!("expected `({kind} <name>)`")))?;
    let name = match head {
        Sexpr::List(head_items, ..)
            if head_items.len() == 2
                && head_items[0].sym().map(|s| s.eq_ignore_ascii_case(kind)) == Some(true) =>
        {
            expect_name(&head_items[1], &format!("the {kind}"))?
        }
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected `({kind} <name>)`, found {}", other.describe()),
            ))
        }
    };
    Ok((name, &items[2..]))
}

/// Keyword, body, and position of one `(:keyword ...)` section.
type SectionParts<'a> = (&'a str, &'a [Sexpr], (u32, u32));

fn section_parts(sx: &Sexpr) -> Result<SectionParts<'_>, Diagnostic> {
    let items = match sx {
        Sexpr::List(items, ..) => items,
        other => {
            return Err(syntax(
                other.pos(),
                format!("expected a `(:section ...)`, found {}", other.describe()),
            ))
        }
    };
    match items.first() {
        Some(Sexpr::Kw(kw, ..)) => Ok((kw, &items[1..], sx.pos())),
        _ => Err(syntax(
            sx.pos(),
            "expected a section starting with a `:keyword`",
        )),
    }
}

fn parse_requirement_flags(
    body: &[Sexpr],
    reqs: &mut BTreeSet<Requirement>,
    diags: &mut Vec<Diagnostic>,
) -> Result<(), Diagnostic> {
    for flag in body {
        match flag {
            Sexpr::Kw(kw, l, c) => match kw.as_str() {
                "typing" => {
                    reqs.insert(Requirement::Typing);
                }
                "action-costs" => {
                    reqs.insert(Requirement::ActionCosts);
                }
                "negative-preconditions" => {
                    reqs.insert(Requirement::NegativePreconditions);
                }
                // `:strips` names the base fragment; nothing to record.
                "strips" => {}
                other => semantic(
                    diags,
                    (*l, *c),
                    format!("requirement `:{other}` is not supported"),
                ),
            },
            other => {
                return Err(syntax(
                    other.pos(),
                    format!("expected a `:requirement` flag, found {}", other.describe()),
                ))
            }
        }
    }
    Ok(())
}

pub fn parse_domain(text: &str) -> Result<PddlDomain, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    match parse_domain_inner(text, &mut diags) {
        Ok(domain) if diags.is_empty() => Ok(domain),
        Ok(_) => {
            diag::sort_canonical(&mut diags);
            Err(diags)
        }
        Err(e) => {
            diags.push(e);
            diag::sort_canonical(&mut diags);
            Err(diags)
        }
    }
}

fn parse_domain_inner(
    text: &str,
    diags: &mut Vec<Diagnostic>,
) -> Result<PddlDomain, Diagnostic> {
    let tokens = lex(text)?;
    let forms = read_sexprs(&tokens)?;
    let (name, sections) = define_form(&forms, "domain")?;

    let mut domain = PddlDomain {
        name,
        requirements: BTreeSet::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
    };

    // Declarations first, then actions, so that section order in the
    // file does not matter.
    let mut action_sections: Vec<(&[Sexpr], (u32, u32))> = Vec::new();
    let mut decl_sections: Vec<(&str, &[Sexpr], (u32, u32))> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for section in sections {
        let (kw, body, pos) = section_parts(section)?;
        match kw {
            "action" => action_sections.push((body, pos)),
            "requirements" | "types" | "predicates" | "functions" => {
                if seen.insert(kw) {
                    decl_sections.push((kw, body, pos));
                } else {
                    semantic(diags, pos, format!("duplicate `(:{kw} ...)` section"));
                }
            }
            other => {
                semantic(
                    diags,
                    pos,
                    format!("section `(:{other} ...)` is not part of this fragment"),
                );
            }
        }
    }

    for &(kw, body, pos) in &decl_sections {
        match kw {
            "requirements" => parse_requirement_flags(body, &mut domain.requirements, diags)?,
            "types" => parse_types_section(body, pos, &mut domain, diags)?,
            _ => {}
        }
    }
    for &(kw, body, _) in &decl_sections {
        match kw {
            "predicates" => {
                for (name, params) in parse_signature_section(body, &domain.types, diags)? {
                    domain.predicates.push(PredicateDecl { name, params });
                }
            }
            "functions" => {
                for (name, params) in parse_signature_section(body, &domain.types, diags)? {
                    domain.functions.push(FunctionDecl { name, params });
                }
            }
            _ => {}
        }
    }
    check_duplicate_decls(&domain, diags);

    for (body, pos) in action_sections {
        let action = parse_action(body, pos, &domain, diags)?;
        if domain.action(&action.name).is_some() {
            semantic(diags, pos, format!("duplicate action `{}`", action.name));
        }
        domain.actions.push(action);
    }

    for missing in infer_requirements(&domain).difference(&domain.requirements) {
        semantic(
            diags,
            (1, 1),
            format!(
                "domain uses features of `{}` but does not declare it",
                missing.keyword()
            ),
        );
    }

    Ok(domain)
}

fn parse_types_section(
    body: &[Sexpr],
    pos: (u32, u32),
    domain: &mut PddlDomain,
    diags: &mut Vec<Diagnostic>,
) -> Result<(), Diagnostic> {
    let entries = parse_typed_list(body, EntryMode::Names)?;
    let object = object_name();
    for entry in entries {
        let name = PddlName::new(&entry.name).expect("typed list entries are names");
        if name == object {
            semantic(diags, pos, "`object` is built in and cannot be redeclared");
            continue;
        }
        if domain.types.iter().any(|t| t.name == name) {
            semantic(diags, pos, format!("duplicate type `{name}`"));
            continue;
        }
        domain.types.push(TypeDecl {
            name,
            parent: entry.ty,
        });
    }
    for decl in &domain.types {
        if !domain.type_declared(&decl.parent) {
            semantic(
                diags,
                pos,
                format!(
                    "type `{}` has undeclared parent `{}`",
                    decl.name, decl.parent
                ),
            );
        }
    }
    // Walk parent chains; revisiting a type means a cycle.
    for decl in &domain.types {
        let mut visited: BTreeSet<PddlName> = BTreeSet::new();
        let mut current = decl.name.clone();
        while let Some(d) = domain.types.iter().find(|t| t.name == current) {
            if !visited.insert(current.clone()) {
                semantic(
                    diags,
                    pos,
                    format!("type `{}` is part of a parent cycle", decl.name),
                );
                break;
            }
            current = d.parent.clone();
        }
    }
    Ok(())
}

fn type_known(types: &[TypeDecl], name: &PddlName) -> bool {
    name == &TYPE_OBJECT || types.iter().any(|t| &t.name == name)
}

fn parse_signature_section(
    body: &[Sexpr],
    types: &[TypeDecl],
    diags: &mut Vec<Diagnostic>,
) -> Result<Vec<(PddlName, Vec<TypedEntry>)>, Diagnostic> {
    let mut out = Vec::new();
    for item in body {
        let decl = match item {
            Sexpr::List(items, ..) => items,
            other => {
                return Err(syntax(
                    other.pos(),
                    format!("expected a `(name ...)` declaration, found {}", other.describe()),
                ))
            }
        };
        let head = decl
            .first()
            .ok_or_else(|| syntax(item.pos(), "expected a declaration, found `()`"))?;
        let name = expect_name(head, "a declaration")?;
        let params = parse_typed_list(&decl[1..], EntryMode::Variables)?;
        check_unique_entries(&params, item.pos(), "parameter", diags);
        for param in &params {
            if !type_known(types, &param.ty) {
                semantic(
                    diags,
                    item.pos(),
                    format!("parameter `{}` has undeclared type `{}`", param.name, param.ty),
                );
            }
        }
        out.push((name, params));
    }
    Ok(out)
}

fn check_duplicate_decls(domain: &PddlDomain, diags: &mut Vec<Diagnostic>) {
    let mut seen: BTreeSet<PddlName> = BTreeSet::new();
    for p in &domain.predicates {
        if !seen.insert(p.name.clone()) {
            semantic(diags, (1, 1), format!("duplicate predicate `{}`", p.name));
        }
    }
    let mut seen: BTreeSet<PddlName> = BTreeSet::new();
    for f in &domain.functions {
        if !seen.insert(f.name.clone()) {
            semantic(diags, (1, 1), format!("duplicate function `{}`", f.name));
        }
    }
}

fn parse_action(
    body: &[Sexpr],
    pos: (u32, u32),
    domain: &PddlDomain,
    diags: &mut Vec<Diagnostic>,
) -> Result<ActionDef, Diagnostic> {
    let head = body
        .first()
        .ok_or_else(|| syntax(pos, "expected an action name"))?;
    let name = expect_name(head, "an action")?;

    let mut params: Option<Vec<TypedEntry>> = None;
    let mut precondition_sx: Option<&Sexpr> = None;
    let mut effect_sx: Option<&Sexpr> = None;
    let mut i = 1;
    while i < body.len() {
        let kw = match &body[i] {
            Sexpr::Kw(kw, ..) => kw.clone(),
            other => {
                return Err(syntax(
                    other.pos(),
                    format!("expected `:parameters`, `:precondition` or `:effect`, found {}", other.describe()),
                ))
            }
        };
        let value = body.get(i + 1).ok_or_else(|| {
            syntax(body[i].pos(), format!("`:{kw}` is missing its value"))
        })?;
        match kw.as_str() {
            "parameters" => {
                let items = match value {
                    Sexpr::List(items, ..) => items,
                    other => {
                        return Err(syntax(
                            other.pos(),
                            format!("`:parameters` takes a list, found {}", other.describe()),
                        ))
                    }
                };
                let entries = parse_typed_list(items, EntryMode::Variables)?;
                check_unique_entries(&entries, value.pos(), "parameter", diags);
                for entry in &entries {
                    if !domain.type_declared(&entry.ty) {
                        semantic(
                            diags,
                            value.pos(),
                            format!(
                                "parameter `{}` has undeclared type `{}`",
                                entry.name, entry.ty
                            ),
                        );
                    }
                }
                params = Some(entries);
            }
            "precondition" => precondition_sx = Some(value),
            "effect" => effect_sx = Some(value),
            other => semantic(
                diags,
                body[i].pos(),
                format!("`:{other}` is not part of this fragment"),
            ),
        }
        i += 2;
    }

    let params = params.ok_or_else(|| {
        syntax(pos, format!("action `{name}` is missing `:parameters`"))
    })?;
    let scope = Scope {
        domain: Some(domain),
        params: Some(&params),
        objects: None,
    };

    // `()` stands for an omitted precondition or effect.
    let precondition = match precondition_sx {
        None => None,
        Some(Sexpr::List(v, ..)) if v.is_empty() => None,
        Some(sx) => Some(parse_condition(sx, &scope, diags)?),
    };
    let effect = match effect_sx {
        None => None,
        Some(Sexpr::List(v, ..)) if v.is_empty() => None,
        Some(sx) => Some(parse_effect(sx, &scope, diags)?),
    };

    Ok(ActionDef {
        name,
        params,
        precondition,
        effect,
    })
}

pub fn parse_problem(text: &str, domain: &PddlDomain) -> Result<PddlProblem, Vec<Diagnostic>> {
    parse_problem_with(text, Some(domain))
}

/// Parses a problem without its domain: shape and groundness are
/// checked, declarations and arities are not.
pub fn parse_problem_standalone(text: &str) -> Result<PddlProblem, Vec<Diagnostic>> {
    parse_problem_with(text, None)
}

fn parse_problem_with(
    text: &str,
    domain: Option<&PddlDomain>,
) -> Result<PddlProblem, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    match parse_problem_inner(text, domain, &mut diags) {
        Ok(problem) if diags.is_empty() => Ok(problem),
        Ok(_) => {
            diag::sort_canonical(&mut diags);
            Err(diags)
        }
        Err(e) => {
            diags.push(e);
            diag::sort_canonical(&mut diags);
            Err(diags)
        }
    }
}

fn parse_problem_inner(
    text: &str,
    domain: Option<&PddlDomain>,
    diags: &mut Vec<Diagnostic>,
) -> Result<PddlProblem, Diagnostic> {
    let tokens = lex(text)?;
    let forms = read_sexprs(&tokens)?;
    let (name, sections) = define_form(&forms, "problem")?;

    let mut domain_ref: Option<(PddlName, (u32, u32))> = None;
    let mut objects: Vec<TypedEntry> = Vec::new();
    let mut init_section: Option<&[Sexpr]> = None;
    let mut goal_section: Option<(&[Sexpr], (u32, u32))> = None;
    let mut metric_section: Option<(&[Sexpr], (u32, u32))> = None;
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for section in sections {
        let (kw, body, pos) = section_parts(section)?;
        if !seen.insert(kw.to_string()) {
            semantic(diags, pos, format!("duplicate `(:{kw} ...)` section"));
            continue;
        }
        match kw {
            "domain" => {
                let sx = match body {
                    [one] => one,
                    _ => return Err(syntax(pos, "`(:domain ...)` takes exactly one name")),
                };
                domain_ref = Some((expect_name(sx, "the domain")?, pos));
            }
            "objects" => {
                objects = parse_typed_list(body, EntryMode::Names)?;
                check_unique_entries(&objects, pos, "object", diags);
                if let Some(d) = domain {
                    for o in &objects {
                        if !d.type_declared(&o.ty) {
                            semantic(
                                diags,
                                pos,
                                format!("object `{}` has undeclared type `{}`", o.name, o.ty),
                            );
                        }
                    }
                }
            }
            "init" => init_section = Some(body),
            "goal" => goal_section = Some((body, pos)),
            "metric" => metric_section = Some((body, pos)),
            // A problem may restate requirement flags; they carry no
            // information beyond the domain's, so validate and drop.
            "requirements" => {
                let mut ignored = BTreeSet::new();
                parse_requirement_flags(body, &mut ignored, diags)?;
            }
            other => semantic(
                diags,
                pos,
                format!("section `(:{other} ...)` is not part of this fragment"),
            ),
        }
    }

    let domain_name = match domain_ref {
        Some((n, pos)) => {
            if let Some(d) = domain {
                if n != d.name {
                    semantic(
                        diags,
                        pos,
                        format!(
                            "problem references domain `{n}` but was parsed against `{}`",
                            d.name
                        ),
                    );
                }
            }
            n
        }
        None => return Err(syntax((1, 1), "problem is missing `(:domain ...)`")),
    };

    let scope = Scope {
        domain,
        params: None,
        objects: Some(&objects),
    };

    let mut init = Vec::new();
    let mut init_values: Vec<FunctionInit> = Vec::new();
    for item in init_section.unwrap_or(&[]) {
        let items = match item {
            Sexpr::List(items, ..) => items,
            other => {
                return Err(syntax(
                    other.pos(),
                    format!("expected an init entry, found {}", other.describe()),
                ))
            }
        };
        if items.first().and_then(Sexpr::sym) == Some("=") {
            if items.len() != 3 {
                return Err(syntax(
                    item.pos(),
                    "`=` takes a function term and a number",
                ));
            }
            let function = parse_function_term(&items[1], &scope, diags)?;
            let value = match &items[2] {
                Sexpr::Num(n, ..) => *n,
                other => {
                    return Err(syntax(
                        other.pos(),
                        format!("expected a number, found {}", other.describe()),
                    ))
                }
            };
            if let Some(previous) = init_values.iter().find(|v| v.function == function) {
                if previous.value != value {
                    semantic(
                        diags,
                        item.pos(),
                        format!(
                            "conflicting init values for `{}`: {} and {}",
                            function.function, previous.value, value
                        ),
                    );
                }
            }
            init_values.push(FunctionInit { function, value });
        } else if items.first().and_then(Sexpr::sym).map(str::to_ascii_lowercase).as_deref()
            == Some("not")
        {
            semantic(
                diags,
                item.pos(),
                "init lists true atoms only; everything else is false",
            );
        } else {
            init.push(parse_atom(items, item.pos(), &scope, diags)?);
        }
    }

    let goal = match goal_section {
        Some(([gd], _)) => parse_condition(gd, &scope, diags)?,
        Some((_, pos)) => return Err(syntax(pos, "`(:goal ...)` takes exactly one condition")),
        None => return Err(syntax((1, 1), "problem is missing `(:goal ...)`")),
    };

    let metric = match metric_section {
        Some(([direction, target], pos)) => {
            if direction.sym().map(|s| s.eq_ignore_ascii_case("minimize")) != Some(true) {
                semantic(
                    diags,
                    direction.pos(),
                    "only `minimize` metrics are supported",
                );
            }
            let target = parse_function_term(target, &scope, diags)?;
            if target.function != PddlName::new(FN_TOTAL_COST).unwrap() {
                semantic(
                    diags,
                    pos,
                    format!("only `({FN_TOTAL_COST})` may be minimized"),
                );
            }
            Some(target)
        }
        Some((_, pos)) => {
            return Err(syntax(
                pos,
                "`(:metric ...)` takes a direction and a function term",
            ))
        }
        None => None,
    };

    Ok(PddlProblem {
        name,
        domain: domain_name,
        objects,
        init,
        init_values,
        goal,
        metric,
    })
}
