use std::fmt::Write as _;

use super::{CifDocument, Item};

fn needs_quotes(v: &str) -> bool {
    if v.is_empty() {
        return true;
    }
    let lower = v.to_ascii_lowercase();
    v.chars().any(char::is_whitespace)
        || v.starts_with(['_', '#', '$', '\'', '"', '[', ']', ';'])
        || lower.starts_with("data_")
        || lower.starts_with("save_")
        || lower == "loop_"
        || lower == "stop_"
        || lower == "global_"
}

pub(crate) fn format_value(v: &str) -> String {
    if v.contains('\n') {
        return format!("\n;\n{v}\n;");
    }
    if !needs_quotes(v) {
        return v.to_string();
    }
    if !v.contains("' ") && !v.ends_with('\'') {
        format!("'{v}'")
    } else if !v.contains("\" ") && !v.ends_with('"') {
        format!("\"{v}\"")
    } else {
        format!("\n;\n{v}\n;")
    }
}

/// Serializes a document. Output depends only on the document contents.
pub fn write_document(doc: &CifDocument) -> String {
    let mut out = String::new();
    for block in &doc.blocks {
        let _ = writeln!(out, "data_{}", block.name);
        for item in &block.items {
            match item {
                Item::Pair { tag, value } => {
                    let _ = writeln!(out, "{tag} {}", format_value(value));
                }
                Item::Loop(lp) => {
                    out.push_str("loop_\n");
                    for t in &lp.tags {
                        let _ = writeln!(out, "{t}");
                    }
                    for row in &lp.rows {
                        let line: Vec<String> = row.iter().map(|v| format_value(v)).collect();
                        let _ = writeln!(out, "{}", line.join(" "));
                    }
                }
            }
        }
    }
    out
}
