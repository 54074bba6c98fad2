use crate::cif::{tags, write_document, CifDocument, DataBlock, Item, LoopTable, UnitCell};

use super::SpacegroupTable;

fn num(x: f64) -> String {
    let s = format!("{x:.5}");
    if s == "-0.00000" {
        "0.00000".to_string()
    } else {
        s
    }
}

fn coord(x: f64) -> String {
    let s = num(x);
    if s == "1.00000" {
        "0.00000".to_string()
    } else {
        s
    }
}

fn pair(tag: &str, value: String) -> Item {
    Item::Pair {
        tag: tag.to_string(),
        value,
    }
}

/// Serializes a cell as a CIF readable by [`crate::cif::parse`].
///
/// Numerals carry five decimals. The operator loop holds the cell's own
/// operators, or the table's when the cell has none.
pub fn write_cif(cell: &UnitCell) -> Vec<u8> {
    let mut items = Vec::new();
    if let Some(t) = &cell.crystal_type {
        items.push(pair(tags::CRYSTAL_TYPE, t.clone()));
    }
    for (tag, v) in tags::CELL.iter().zip(cell.params()) {
        items.push(pair(tag, num(v)));
    }
    items.push(pair(tags::SG_NUMBER[0], cell.spacegroup_number.to_string()));
    items.push(pair(tags::SG_SYMBOL[0], cell.spacegroup_symbol.clone()));

    let ops: Vec<String> = if cell.symops.is_empty() {
        SpacegroupTable::builtin()
            .ops(cell.spacegroup_number)
            .unwrap_or_default()
            .iter()
            .map(ToString::to_string)
            .collect()
    } else {
        cell.symops.iter().map(ToString::to_string).collect()
    };
    items.push(Item::Loop(LoopTable {
        tags: vec![tags::SYMOPS[0].to_string()],
        rows: ops.into_iter().map(|o| vec![o]).collect(),
    }));

    let mut site_tags = vec![tags::LABEL, tags::TYPE_SYMBOL];
    site_tags.extend(tags::FRACT);
    site_tags.push(tags::OCCUPANCY);
    items.push(Item::Loop(LoopTable {
        tags: site_tags.into_iter().map(String::from).collect(),
        rows: cell
            .sites
            .iter()
            .map(|s| {
                vec![
                    s.label.clone(),
                    s.element.clone(),
                    coord(s.frac[0]),
                    coord(s.frac[1]),
                    coord(s.frac[2]),
                    num(s.occupancy),
                ]
            })
            .collect(),
    }));

    let doc = CifDocument {
        source_id: cell.name.clone(),
        blocks: vec![DataBlock {
            name: cell.name.clone(),
            items,
        }],
    };
    write_document(&doc).into_bytes()
}
