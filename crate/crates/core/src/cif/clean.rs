use std::fmt;

use super::extract::{interpret_symbol, parse_numeric};
use super::{is_missing, parse, tags, CifDocument, DataBlock, Item, LoopTable};
use crate::elements::ElementTable;

/// Repair rules, in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    LoopArity,
    EmptyNumeric,
    UnclosedParen,
    Precision,
    SymbolCase,
    NoMetal,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::LoopArity => "R1-loop-arity",
            RuleId::EmptyNumeric => "R2-empty-numeric",
            RuleId::UnclosedParen => "R3-unclosed-paren",
            RuleId::Precision => "R4-precision",
            RuleId::SymbolCase => "R5-symbol-case",
            RuleId::NoMetal => "R6-no-metal",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectionReason {
    MissingSection,
    UnfixableSyntax,
    NoMetalInterpretable,
    Other,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionReason::MissingSection => "MissingSection",
            RejectionReason::UnfixableSyntax => "UnfixableSyntax",
            RejectionReason::NoMetalInterpretable => "NoMetalInterpretable",
            RejectionReason::Other => "Other",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    pub rule: RuleId,
    pub location: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CleanReport {
    pub source_id: String,
    pub fixes: Vec<Fix>,
    pub rejected: bool,
    pub rejection_reason: Option<RejectionReason>,
    pub detail: String,
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

impl CleanReport {
    fn reject(&mut self, reason: RejectionReason, detail: impl Into<String>) {
        self.rejected = true;
        self.rejection_reason = Some(reason);
        self.detail = detail.into();
    }

    /// One line per fix: `rule TAB location TAB before TAB after`, followed
    /// by a `REJECT` line when the document was rejected.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.fixes {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                f.rule,
                escape(&f.location),
                escape(&f.before),
                escape(&f.after)
            ));
        }
        if let Some(reason) = self.rejection_reason {
            out.push_str(&format!("REJECT\t{}\t{}\t{}\n", escape(&self.source_id), reason, escape(&self.detail)));
        }
        out
    }
}

struct Cleaner<'a> {
    report: &'a mut CleanReport,
}

impl Cleaner<'_> {
    fn log(&mut self, rule: RuleId, location: String, before: &str, after: &str) {
        self.report.fixes.push(Fix {
            rule,
            location,
            before: before.to_string(),
            after: after.to_string(),
        });
    }
}

fn loop_loc(block: &str, lp: &LoopTable) -> String {
    format!("{block}:loop[{}]", lp.tags[0])
}

fn repair_arity(cl: &mut Cleaner, block: &str, lp: &mut LoopTable) {
    let width = lp.tags.len();
    if lp.rows.iter().all(|r| r.len() == width) {
        return;
    }
    let loc = loop_loc(block, lp);
    let rows = std::mem::take(&mut lp.rows);
    let mut out = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let row = &rows[i];
        let row_loc = format!("{loc}:row {}", i + 1);
        if row.len() == width {
            out.push(row.clone());
            i += 1;
        } else if row.len() > width {
            let kept = row[..width].to_vec();
            cl.log(RuleId::LoopArity, row_loc, &row.join(" "), &kept.join(" "));
            out.push(kept);
            i += 1;
        } else {
            // A row broken over several lines is glued back together.
            let mut merged = row.clone();
            let mut j = i + 1;
            while merged.len() < width && j < rows.len() && merged.len() + rows[j].len() <= width {
                merged.extend(rows[j].iter().cloned());
                j += 1;
            }
            if merged.len() == width && j > i + 1 {
                let before: Vec<String> = rows[i..j].iter().map(|r| r.join(" ")).collect();
                cl.log(RuleId::LoopArity, row_loc, &before.join(" | "), &merged.join(" "));
                out.push(merged);
                i = j;
            } else {
                let mut padded = row.clone();
                padded.resize(width, "?".to_string());
                cl.log(RuleId::LoopArity, row_loc, &row.join(" "), &padded.join(" "));
                out.push(padded);
                i += 1;
            }
        }
    }
    lp.rows = out;
}

fn numeric_tag(tag: &str) -> bool {
    let t = tag.to_ascii_lowercase();
    ["_fract_", "_cartn_", "_u_iso", "_b_iso", "_aniso_u_", "_aniso_b_"]
        .iter()
        .any(|k| t.contains(k))
}

fn fill_empty_numeric(cl: &mut Cleaner, block: &str, lp: &mut LoopTable) {
    let loc = loop_loc(block, lp);
    for c in 0..lp.tags.len() {
        let tag = &lp.tags[c];
        if tag.eq_ignore_ascii_case(tags::OCCUPANCY) {
            continue;
        }
        let present: Vec<&str> = lp
            .rows
            .iter()
            .map(|r| r[c].as_str())
            .filter(|v| !is_missing(v))
            .collect();
        let numeric = numeric_tag(tag)
            || (!present.is_empty() && present.iter().all(|v| parse_numeric(v).is_some()));
        if !numeric {
            continue;
        }
        for (r, row) in lp.rows.iter_mut().enumerate() {
            if is_missing(&row[c]) {
                let before = std::mem::replace(&mut row[c], "0".to_string());
                cl.log(
                    RuleId::EmptyNumeric,
                    format!("{loc}:row {}:{}", r + 1, lp.tags[c]),
                    &before,
                    "0",
                );
            }
        }
    }
}

fn close_paren(v: &str) -> Option<String> {
    let open = v.find('(')?;
    if v.contains(')') || v[open + 1..].contains('(') {
        return None;
    }
    let digits = &v[open + 1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    v[..open].parse::<f64>().ok()?;
    Some(format!("{v})"))
}

/// Rewrites a short decimal that sits on a third/sixth/ninth/twelfth to five
/// decimals of the exact fraction.
fn boost_precision(v: &str) -> Option<String> {
    if v.contains('(') {
        return None;
    }
    let dot = v.find('.')?;
    let decimals = v.len() - dot - 1;
    if !(2..5).contains(&decimals) || !v[dot + 1..].bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let x: f64 = v.parse().ok()?;
    let tol = 5.0 * 10f64.powi(-(decimals as i32 + 1)) + 1e-12;
    let mut best: Option<(f64, f64)> = None;
    for n in [3i64, 6, 9, 12] {
        let k = (x * n as f64).round() as i64;
        let g = gcd(k.abs(), n);
        if (n / g) % 3 != 0 {
            continue;
        }
        let frac = k as f64 / n as f64;
        let err = (x - frac).abs();
        if err <= tol && best.is_none_or(|(_, e)| err < e - 1e-15) {
            best = Some((frac, err));
        }
    }
    let (frac, _) = best?;
    let out = format!("{frac:.5}");
    (out != v).then_some(out)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

fn title_case_symbol(v: &str, table: &ElementTable) -> Option<String> {
    let b = v.as_bytes();
    if b.len() < 2 || !b[0].is_ascii_uppercase() || !b[1].is_ascii_uppercase() {
        return None;
    }
    if b.get(2).is_some_and(u8::is_ascii_alphabetic) {
        return None;
    }
    let sym = format!("{}{}", b[0] as char, (b[1] as char).to_ascii_lowercase());
    table
        .contains_symbol(&sym)
        .then(|| format!("{sym}{}", &v[2..]))
}

fn structure_block(doc: &CifDocument) -> Option<&DataBlock> {
    doc.blocks
        .iter()
        .find(|b| b.find_loop(&tags::FRACT).is_some())
        .or_else(|| doc.blocks.first())
}

fn missing_section(block: Option<&DataBlock>) -> Option<String> {
    let Some(block) = block else {
        return Some("data_ block".into());
    };
    for tag in tags::CELL {
        match block.get_any(&[tag]) {
            Some(v) if parse_numeric(v).is_some() => {}
            _ => return Some(tag.to_string()),
        }
    }
    let has_sg = block
        .get_any(&tags::SG_NUMBER)
        .or_else(|| block.get_any(&tags::SG_SYMBOL))
        .is_some_and(|v| !is_missing(v))
        || block.find_loop(&tags::SYMOPS).is_some();
    if !has_sg {
        return Some("spacegroup (number, symbol or operator loop)".into());
    }
    let Some(lp) = block.find_loop(&tags::FRACT) else {
        return Some("_atom_site loop".into());
    };
    for tag in tags::FRACT {
        if lp.column(tag).is_none() {
            return Some(tag.to_string());
        }
    }
    if lp.column(tags::LABEL).is_none() && lp.column(tags::TYPE_SYMBOL).is_none() {
        return Some(tags::TYPE_SYMBOL.to_string());
    }
    if lp.rows.is_empty() {
        return Some("_atom_site rows".into());
    }
    None
}

fn site_elements(block: &DataBlock, table: &ElementTable) -> Vec<String> {
    let Some(lp) = block.find_loop(&tags::FRACT) else {
        return Vec::new();
    };
    let type_col = lp.column(tags::TYPE_SYMBOL);
    let label_col = lp.column(tags::LABEL);
    lp.rows
        .iter()
        .filter_map(|row| {
            let raw = type_col
                .map(|c| row[c].as_str())
                .filter(|v| !is_missing(v))
                .or_else(|| label_col.map(|c| row[c].as_str()))?;
            interpret_symbol(raw, table)
        })
        .collect()
}

/// Applies the repair rules in order and reports every change.
///
/// Rules: (1) loop-row arity, (2) empty numeric cells set to 0, (3) unclosed
/// uncertainty parentheses, (4) precision of coordinates on thirds, sixths,
/// ninths and twelfths, (5) all-caps two-letter symbols, (6) rejection when
/// no metal can be read from the sites. Missing required sections also
/// reject the document.
pub fn clean(doc: &CifDocument) -> (CifDocument, CleanReport) {
    let table = ElementTable::builtin();
    let mut out = doc.clone();
    let mut report = CleanReport {
        source_id: doc.source_id.clone(),
        ..Default::default()
    };
    let mut cl = Cleaner {
        report: &mut report,
    };

    for block in &mut out.blocks {
        let name = block.name.clone();
        for item in &mut block.items {
            if let Item::Loop(lp) = item {
                repair_arity(&mut cl, &name, lp);
            }
        }
        for item in &mut block.items {
            if let Item::Loop(lp) = item {
                fill_empty_numeric(&mut cl, &name, lp);
            }
        }
        for item in &mut block.items {
            match item {
                Item::Pair { tag, value } => {
                    if let Some(fixed) = close_paren(value) {
                        cl.log(RuleId::UnclosedParen, format!("{name}:{tag}"), value, &fixed);
                        *value = fixed;
                    }
                }
                Item::Loop(lp) => {
                    let loc = loop_loc(&name, lp);
                    for (r, row) in lp.rows.iter_mut().enumerate() {
                        for (c, v) in row.iter_mut().enumerate() {
                            if let Some(fixed) = close_paren(v) {
                                cl.log(
                                    RuleId::UnclosedParen,
                                    format!("{loc}:row {}:{}", r + 1, lp.tags[c]),
                                    v,
                                    &fixed,
                                );
                                *v = fixed;
                            }
                        }
                    }
                }
            }
        }
        for item in &mut block.items {
            if let Item::Loop(lp) = item {
                let loc = loop_loc(&name, lp);
                let cols: Vec<usize> = tags::FRACT.iter().filter_map(|t| lp.column(t)).collect();
                for (r, row) in lp.rows.iter_mut().enumerate() {
                    for &c in &cols {
                        if let Some(fixed) = boost_precision(&row[c]) {
                            cl.log(
                                RuleId::Precision,
                                format!("{loc}:row {}:{}", r + 1, lp.tags[c]),
                                &row[c],
                                &fixed,
                            );
                            row[c] = fixed;
                        }
                    }
                }
            }
        }
        for item in &mut block.items {
            if let Item::Loop(lp) = item {
                let loc = loop_loc(&name, lp);
                let cols: Vec<usize> = [tags::TYPE_SYMBOL, tags::LABEL]
                    .iter()
                    .filter_map(|t| lp.column(t))
                    .collect();
                for (r, row) in lp.rows.iter_mut().enumerate() {
                    for &c in &cols {
                        if let Some(fixed) = title_case_symbol(&row[c], table) {
                            cl.log(
                                RuleId::SymbolCase,
                                format!("{loc}:row {}:{}", r + 1, lp.tags[c]),
                                &row[c],
                                &fixed,
                            );
                            row[c] = fixed;
                        }
                    }
                }
            }
        }
    }

    let block = structure_block(&out);
    if let Some(what) = missing_section(block) {
        report.reject(RejectionReason::MissingSection, what);
    } else if let Some(block) = block {
        let elements = site_elements(block, table);
        let has_metal = elements
            .iter()
            .any(|s| table.lookup(s.as_str()).is_ok_and(|e| e.is_metal));
        if !has_metal {
            let mut uniq = elements.clone();
            uniq.sort();
            uniq.dedup();
            report.reject(
                RejectionReason::NoMetalInterpretable,
                format!("sites read as [{}]", uniq.join(" ")),
            );
        }
    }
    (out, report)
}

/// Parses and cleans raw bytes. Unparseable input is reported as rejected.
pub fn clean_bytes(bytes: &[u8], source_id: &str) -> (Option<CifDocument>, CleanReport) {
    match parse(bytes, source_id) {
        Ok(doc) => {
            let (doc, report) = clean(&doc);
            (Some(doc), report)
        }
        Err(e) => {
            let mut report = CleanReport {
                source_id: source_id.to_string(),
                ..Default::default()
            };
            report.reject(RejectionReason::UnfixableSyntax, e.to_string());
            (None, report)
        }
    }
}
