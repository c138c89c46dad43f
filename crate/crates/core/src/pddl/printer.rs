//! Canonical PDDL printing.
//!
//! The layout is fixed so that generated files are reproducible
//! byte for byte: four-space indent, one declaration per line,
//! conjunctions broken across lines, the closing paren of `define` on
//! its own line. Parsing a printed file yields the printed AST back.

use crate::pddl::ast::*;

const INDENT: &str = "    ";

/// Formats a PDDL number: integral values print without a fraction.
pub fn fmt_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

/// `?p - part ?t - tool`; a trailing run of `object`-typed entries
/// prints bare, earlier ones keep their `- object` so following typed
/// entries cannot capture them.
fn typed_list_per_entry(entries: &[TypedEntry]) -> String {
    let tail = bare_tail_start(entries);
    let mut parts = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if i < tail {
            parts.push(format!("{} - {}", e.name, e.ty));
        } else {
            parts.push(e.name.clone());
        }
    }
    parts.join(" ")
}

/// `r1 r2 - Rivet` lines: consecutive entries of the same type are
/// grouped, one group per line.
fn typed_list_grouped(entries: &[TypedEntry]) -> Vec<String> {
    let tail = bare_tail_start(entries);
    let mut lines: Vec<String> = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let mut j = i + 1;
        while j < entries.len() && entries[j].ty == entries[i].ty {
            j += 1;
        }
        let names: Vec<&str> = entries[i..j].iter().map(|e| e.name.as_str()).collect();
        if i >= tail {
            lines.push(names.join(" "));
        } else {
            lines.push(format!("{} - {}", names.join(" "), entries[i].ty));
        }
        i = j;
    }
    lines
}

/// First index of the maximal trailing run of `object`-typed entries.
fn bare_tail_start(entries: &[TypedEntry]) -> usize {
    let object = PddlName::new(TYPE_OBJECT).expect("object is a valid name");
    let mut tail = entries.len();
    while tail > 0 && entries[tail - 1].ty == object {
        tail -= 1;
    }
    tail
}

fn atom(a: &Atom) -> String {
    let mut s = format!("({}", a.predicate);
    for t in &a.terms {
        s.push(' ');
        s.push_str(t.text());
    }
    s.push(')');
    s
}

fn function_term(f: &FunctionTerm) -> String {
    let mut s = format!("({}", f.function);
    for t in &f.terms {
        s.push(' ');
        s.push_str(t.text());
    }
    s.push(')');
    s
}

fn condition(c: &Condition, depth: usize) -> String {
    match c {
        Condition::Atom(a) => atom(a),
        Condition::Not(a) => format!("(not {})", atom(a)),
        Condition::And(parts) if parts.is_empty() => "(and)".into(),
        Condition::And(parts) => {
            let body: Vec<String> = parts
                .iter()
                .map(|p| format!("{}{}", pad(depth + 1), condition(p, depth + 1)))
                .collect();
            format!("(and\n{})", body.join("\n"))
        }
    }
}

fn effect(e: &Effect, depth: usize) -> String {
    match e {
        Effect::Add(a) => atom(a),
        Effect::Delete(a) => format!("(not {})", atom(a)),
        Effect::Increase { target, amount } => {
            let amount = match amount {
                NumericExpr::Literal(v) => fmt_number(*v),
                NumericExpr::Function(f) => function_term(f),
            };
            format!("(increase {} {})", function_term(target), amount)
        }
        Effect::And(parts) if parts.is_empty() => "(and)".into(),
        Effect::And(parts) => {
            let body: Vec<String> = parts
                .iter()
                .map(|p| format!("{}{}", pad(depth + 1), effect(p, depth + 1)))
                .collect();
            format!("(and\n{})", body.join("\n"))
        }
    }
}

/// Prints one action block at domain indentation, without a trailing
/// newline.
pub fn print_action(a: &ActionDef) -> String {
    let mut s = format!("{}(:action {}\n", pad(1), a.name);
    s.push_str(&format!(
        "{}:parameters ({})\n",
        pad(2),
        typed_list_per_entry(&a.params)
    ));
    if let Some(pre) = &a.precondition {
        s.push_str(&format!("{}:precondition {}\n", pad(2), condition(pre, 2)));
    }
    if let Some(eff) = &a.effect {
        s.push_str(&format!("{}:effect {}\n", pad(2), effect(eff, 2)));
    }
    // Close the action on the last body line.
    s.truncate(s.trim_end_matches('\n').len());
    s.push(')');
    s
}

fn section(header: &str, body_lines: &[String]) -> String {
    if body_lines.is_empty() {
        format!("{}({header})", pad(1))
    } else {
        let body: Vec<String> = body_lines
            .iter()
            .map(|l| format!("{}{l}", pad(2)))
            .collect();
        format!("{}({header}\n{})", pad(1), body.join("\n"))
    }
}

pub fn print_domain(d: &PddlDomain) -> String {
    let mut sections: Vec<String> = Vec::new();

    if !d.requirements.is_empty() {
        let flags: Vec<&str> = d.requirements.iter().map(|r| r.keyword()).collect();
        sections.push(format!("{}(:requirements {})", pad(1), flags.join(" ")));
    }
    if !d.types.is_empty() {
        let entries: Vec<TypedEntry> = d
            .types
            .iter()
            .map(|t| TypedEntry::new(t.name.as_str(), t.parent.clone()))
            .collect();
        // Parents print explicitly: `part tool - object`.
        let lines = typed_list_grouped_explicit(&entries);
        sections.push(section(":types", &lines));
    }
    if !d.predicates.is_empty() {
        let lines: Vec<String> = d
            .predicates
            .iter()
            .map(|p| signature_line(&p.name, &p.params))
            .collect();
        sections.push(section(":predicates", &lines));
    }
    if !d.functions.is_empty() {
        let lines: Vec<String> = d
            .functions
            .iter()
            .map(|f| signature_line(&f.name, &f.params))
            .collect();
        sections.push(section(":functions", &lines));
    }
    for a in &d.actions {
        sections.push(print_action(a));
    }

    let mut out = format!("(define (domain {})\n", d.name);
    out.push_str(&sections.join("\n"));
    out.push_str("\n)\n");
    out
}

/// Like `typed_list_grouped` but never drops the type annotation;
/// used for `:types`, where the parent is the information.
fn typed_list_grouped_explicit(entries: &[TypedEntry]) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let mut j = i + 1;
        while j < entries.len() && entries[j].ty == entries[i].ty {
            j += 1;
        }
        let names: Vec<&str> = entries[i..j].iter().map(|e| e.name.as_str()).collect();
        lines.push(format!("{} - {}", names.join(" "), entries[i].ty));
        i = j;
    }
    lines
}

fn signature_line(name: &PddlName, params: &[TypedEntry]) -> String {
    if params.is_empty() {
        format!("({name})")
    } else {
        format!("({name} {})", typed_list_per_entry(params))
    }
}

pub fn print_problem(p: &PddlProblem) -> String {
    let mut sections: Vec<String> = Vec::new();

    sections.push(format!("{}(:domain {})", pad(1), p.domain));
    sections.push(section(":objects", &typed_list_grouped(&p.objects)));

    let mut init_lines: Vec<String> = p.init.iter().map(atom).collect();
    for v in &p.init_values {
        init_lines.push(format!(
            "(= {} {})",
            function_term(&v.function),
            fmt_number(v.value)
        ));
    }
    sections.push(section(":init", &init_lines));

    sections.push(format!("{}(:goal {})", pad(1), condition(&p.goal, 1)));

    if let Some(metric) = &p.metric {
        sections.push(format!(
            "{}(:metric minimize {})",
            pad(1),
            function_term(metric)
        ));
    }

    let mut out = format!("(define (problem {})\n", p.name);
    out.push_str(&sections.join("\n"));
    out.push_str("\n)\n");
    out
}
