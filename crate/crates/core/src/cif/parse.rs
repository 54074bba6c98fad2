use super::{CifDocument, CifError, DataBlock, Item, LoopTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Data,
    Loop,
    Tag,
    Value,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    text: String,
    line: usize,
    offset: usize,
}

fn syntax(offset: usize, msg: impl Into<String>) -> CifError {
    CifError::Syntax {
        offset,
        msg: msg.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, CifError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = true;
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c == b';' && line_start {
            // Text field: runs until a line that starts with ';'.
            let close = src[i + 1..]
                .find("\n;")
                .map(|p| p + i + 1)
                .ok_or_else(|| syntax(start, "unterminated text field"))?;
            let mut text = src[i + 1..close].to_string();
            if text.starts_with('\n') {
                text.remove(0);
            }
            let text = text.trim_end_matches('\r').to_string();
            out.push(Token {
                kind: Kind::Value,
                text,
                line,
                offset: start,
            });
            line += src[start..close + 1].matches('\n').count();
            i = close + 2;
            line_start = false;
            continue;
        }
        line_start = false;
        if c == b'\'' || c == b'"' {
            let mut k = i + 1;
            loop {
                if k >= b.len() || b[k] == b'\n' {
                    return Err(syntax(start, "unterminated quoted string"));
                }
                if b[k] == c && (k + 1 == b.len() || b[k + 1].is_ascii_whitespace()) {
                    break;
                }
                k += 1;
            }
            out.push(Token {
                kind: Kind::Value,
                text: src[i + 1..k].to_string(),
                line,
                offset: start,
            });
            i = k + 1;
            continue;
        }
        while i < b.len() && !b[i].is_ascii_whitespace() {
            i += 1;
        }
        let word = &src[start..i];
        let lower = word.to_ascii_lowercase();
        let (kind, text) = if word.starts_with('_') {
            (Kind::Tag, word.to_string())
        } else if lower.starts_with("data_") {
            (Kind::Data, word[5..].to_string())
        } else if lower == "loop_" {
            (Kind::Loop, String::new())
        } else if lower.starts_with("save_") || lower.starts_with("global_") || lower == "stop_" {
            return Err(syntax(start, format!("unsupported construct `{word}`")));
        } else {
            (Kind::Value, word.to_string())
        };
        out.push(Token {
            kind,
            text,
            line,
            offset: start,
        });
    }
    Ok(out)
}

/// Groups loop values into rows.
///
/// Well-formed loops are chunked by width. When the value count is not a
/// multiple of the width, each physical line becomes its own row so that the
/// arity repair rule can see the damage.
fn group_rows(width: usize, values: Vec<(usize, String)>) -> (Vec<Vec<String>>, bool) {
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut last_line = None;
    for (line, v) in &values {
        if last_line != Some(*line) {
            lines.push(Vec::new());
            last_line = Some(*line);
        }
        lines.last_mut().unwrap().push(v.clone());
    }
    if lines.iter().all(|l| l.len() % width == 0) {
        let rows = lines
            .into_iter()
            .flat_map(|l| l.chunks(width).map(<[String]>::to_vec).collect::<Vec<_>>())
            .collect();
        return (rows, true);
    }
    if values.len() % width == 0 {
        let flat: Vec<String> = values.into_iter().map(|(_, v)| v).collect();
        return (flat.chunks(width).map(<[String]>::to_vec).collect(), true);
    }
    (lines, false)
}

/// Tokenizes a CIF file into blocks, tagged items and loop tables.
pub fn parse(bytes: &[u8], source_id: impl Into<String>) -> Result<CifDocument, CifError> {
    let src = String::from_utf8_lossy(bytes);
    let tokens = tokenize(&src)?;
    let mut blocks: Vec<DataBlock> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        match tok.kind {
            Kind::Data => {
                blocks.push(DataBlock {
                    name: tok.text.clone(),
                    items: Vec::new(),
                });
                i += 1;
            }
            Kind::Tag => {
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| syntax(tok.offset, "tag before any data_ block"))?;
                let tag = tok.text.clone();
                let mut value = "?".to_string();
                i += 1;
                if i < tokens.len() && tokens[i].kind == Kind::Value {
                    value = tokens[i].text.clone();
                    let line = tokens[i].line;
                    i += 1;
                    // Unquoted multi-word values on the tag's line are joined.
                    while i < tokens.len() && tokens[i].kind == Kind::Value && tokens[i].line == line {
                        value.push(' ');
                        value.push_str(&tokens[i].text);
                        i += 1;
                    }
                }
                block.items.push(Item::Pair { tag, value });
            }
            Kind::Loop => {
                let loop_offset = tok.offset;
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| syntax(loop_offset, "loop_ before any data_ block"))?;
                i += 1;
                let mut tags = Vec::new();
                while i < tokens.len() && tokens[i].kind == Kind::Tag {
                    tags.push(tokens[i].text.clone());
                    i += 1;
                }
                if tags.is_empty() {
                    return Err(syntax(loop_offset, "loop_ without tags"));
                }
                let mut values = Vec::new();
                while i < tokens.len() && tokens[i].kind == Kind::Value {
                    values.push((tokens[i].line, tokens[i].text.clone()));
                    i += 1;
                }
                let width = tags.len();
                let (rows, regular) = group_rows(width, values);
                if !regular && i == tokens.len() && !src.ends_with('\n') {
                    return Err(syntax(src.len(), "file ends inside a loop"));
                }
                block.items.push(Item::Loop(LoopTable { tags, rows }));
            }
            Kind::Value => {
                return Err(syntax(tok.offset, format!("unexpected value `{}`", tok.text)));
            }
        }
    }
    Ok(CifDocument {
        source_id: source_id.into(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tag_document() {
        let doc = parse(b"data_x\n_cell_length_a 4.0\n", "t").unwrap();
        assert_eq!(doc.blocks.len(), 1);
        assert_eq!(
            doc.blocks[0].items,
            vec![Item::Pair {
                tag: "_cell_length_a".into(),
                value: "4.0".into()
            }]
        );
    }

    #[test]
    fn well_formed_loop() {
        let doc = parse(b"data_x\nloop_\n_a\n_b\n_c\n1 2 3\n4 5 6\n", "t").unwrap();
        let Item::Loop(lp) = &doc.blocks[0].items[0] else {
            panic!("expected loop")
        };
        assert_eq!(lp.tags.len(), 3);
        assert_eq!(lp.rows, vec![vec!["1", "2", "3"], vec!["4", "5", "6"]]);
    }

    #[test]
    fn loop_rows_may_span_lines() {
        let doc = parse(b"data_x\nloop_\n_a\n_b\n1\n2\n3 4\n", "t").unwrap();
        let lp = doc.blocks[0].loops().next().unwrap();
        assert_eq!(lp.rows, vec![vec!["1", "2"], vec!["3", "4"]]);
    }

    #[test]
    fn truncated_loop_is_a_syntax_error() {
        let err = parse(b"data_x\nloop_\n_a\n_b\n_c\n1 2 3\n4 5", "t").unwrap_err();
        assert!(matches!(err, CifError::Syntax { offset: 31, .. }), "{err:?}");
    }

    #[test]
    fn short_row_with_newline_is_kept_for_repair() {
        let doc = parse(b"data_x\nloop_\n_a\n_b\n_c\n1 2 3\n4 5\n", "t").unwrap();
        let lp = doc.blocks[0].loops().next().unwrap();
        assert_eq!(lp.rows, vec![vec!["1", "2", "3"], vec!["4", "5"]]);
    }

    #[test]
    fn quotes_comments_and_text_fields() {
        let src = b"# header\ndata_q\n_name 'rock salt' # trailing\n_note\n;\nline one\nline two\n;\n_sym \"P m -3 m\"\n_it's x\n";
        let doc = parse(src, "t").unwrap();
        let blk = &doc.blocks[0];
        assert_eq!(blk.get("_name"), Some("rock salt"));
        assert_eq!(blk.get("_note"), Some("line one\nline two"));
        assert_eq!(blk.get("_sym"), Some("P m -3 m"));
        assert_eq!(blk.get("_it's"), Some("x"));
    }

    #[test]
    fn embedded_quote_does_not_close() {
        let doc = parse(b"data_q\n_a 'O'Neil x'\n", "t").unwrap();
        assert_eq!(doc.blocks[0].get("_a"), Some("O'Neil x"));
    }

    #[test]
    fn unterminated_constructs() {
        assert!(matches!(
            parse(b"data_q\n_a 'open\n", "t"),
            Err(CifError::Syntax { offset: 10, .. })
        ));
        assert!(matches!(
            parse(b"data_q\n_a\n;\nnever closed\n", "t"),
            Err(CifError::Syntax { .. })
        ));
        assert!(matches!(parse(b"_a 1\n", "t"), Err(CifError::Syntax { offset: 0, .. })));
        assert!(matches!(
            parse(b"data_q\nloop_\n1 2\n", "t"),
            Err(CifError::Syntax { .. })
        ));
    }

    #[test]
    fn tag_without_value_reads_as_unknown() {
        let doc = parse(b"data_q\n_a\n_b 2\n", "t").unwrap();
        assert_eq!(doc.blocks[0].get("_a"), Some("?"));
        assert_eq!(doc.blocks[0].get("_b"), Some("2"));
    }

    #[test]
    fn multiple_blocks() {
        let doc = parse(b"data_a\n_x 1\ndata_b\n_x 2\n", "t").unwrap();
        assert_eq!(doc.blocks.len(), 2);
        assert_eq!(doc.blocks[1].name, "b");
    }
}
