//! Deterministic CSV reports. Every checked inequality is emitted with
//! both sides rendered exactly, so a report can be audited line by line
//! without rerunning anything.

use famlab_core::rat::{self, Rat};

/// A CSV table with a fixed header; rows are appended in program order,
/// which is deterministic for every runner.
pub struct Csv {
    lines: Vec<String>,
}

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            lines: vec![header.iter().map(|h| escape(h)).collect::<Vec<_>>().join(",")],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines
            .push(fields.iter().map(|f| escape(f)).collect::<Vec<_>>().join(","));
    }

    pub fn finish(self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// One exact comparison with its verdict.
pub fn check_row(name: &str, lhs: &Rat, relation: &str, rhs: &Rat, pass: bool) -> Vec<String> {
    vec![
        name.to_string(),
        rat::format(lhs),
        relation.to_string(),
        rat::format(rhs),
        if pass { "pass" } else { "fail" }.to_string(),
    ]
}
