//! Random triclinic cells and the geometric checks run on them.

use std::collections::BTreeSet;

use chiliforge::cif::{Site, UnitCell};
use chiliforge::debye::ScatteringSet;
use chiliforge::elements::{interaction_radius, ElementTable};
use chiliforge::nanogen::{
    assemble_graph, build_edges, build_supercell, center_cloud, cut_nanoparticle, replication_counts,
};
use proptest::prelude::*;

const METALS: [&str; 6] = ["Cu", "Mg", "Zn", "Fe", "Na", "Al"];
const NONMETALS: [&str; 3] = ["O", "S", "N"];

#[derive(Debug, Clone)]
pub struct Case {
    pub cell: UnitCell,
    pub diameter: f64,
    /// Two radii, `radii[0] <= radii[1] <= diameter / 2`.
    pub radii: [f64; 2],
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    let lengths = prop::array::uniform3(2.5f64..8.0);
    let angles = prop::array::uniform3(75.0f64..105.0);
    let sites = prop::collection::vec((0usize..9, prop::array::uniform3(0.0f64..1.0)), 1..5);
    (lengths, angles, sites, 6.0f64..16.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(
        |(l, ang, sites, diameter, u, v)| {
            let sites = sites
                .into_iter()
                .enumerate()
                .map(|(k, (e, frac))| {
                    // The first site is always a metal.
                    let element = if k == 0 || e < 6 { METALS[e % 6] } else { NONMETALS[e - 6] };
                    Site {
                        label: format!("{element}{k}"),
                        element: element.to_string(),
                        frac,
                        occupancy: 1.0,
                    }
                })
                .collect();
            let half = diameter / 2.0;
            let (r0, r1) = if u < v { (u, v) } else { (v, u) };
            Case {
                cell: UnitCell {
                    name: "random".into(),
                    crystal_type: None,
                    a: l[0],
                    b: l[1],
                    c: l[2],
                    alpha: ang[0],
                    beta: ang[1],
                    gamma: ang[2],
                    spacegroup_number: 1,
                    spacegroup_symbol: "P 1".into(),
                    sites,
                    symops: Vec::new(),
                },
                diameter,
                radii: [half * r0.max(0.05), half * r1.max(0.05)],
            }
        },
    )
}

fn d(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// (a) extent, (b) monotonicity, (c) edge symmetry and distances,
/// (d) boundary inclusivity.
pub fn check_case(c: &Case) -> Result<(), String> {
    let table = ElementTable::builtin();
    let cell = &c.cell;

    let n = replication_counts(cell, c.diameter, 64).map_err(|e| e.to_string())?;
    for (k, len) in [cell.a, cell.b, cell.c].into_iter().enumerate() {
        if (n[k] as f64) * len < c.diameter + 5.0 {
            return Err(format!("axis {k}: {} x {len} < {} + 5", n[k], c.diameter));
        }
    }
    let block = build_supercell(cell, c.diameter, table, 64).map_err(|e| e.to_string())?;
    if block.len() != n[0] * n[1] * n[2] * cell.sites.len() {
        return Err("block atom count".into());
    }
    let cloud = center_cloud(&block).map_err(|e| e.to_string())?;
    let edges = build_edges(&cloud);

    let [r0, r1] = c.radii;
    let small = cut_nanoparticle(&cloud, &edges, r0).map_err(|e| e.to_string())?;
    let large = cut_nanoparticle(&cloud, &edges, r1).map_err(|e| e.to_string())?;
    let large_set: BTreeSet<usize> = large.iter().copied().collect();
    if !small.iter().all(|i| large_set.contains(i)) {
        return Err(format!("cut({r0}) not within cut({r1})"));
    }

    // Edges among the large particle, checked against a direct search.
    let radii: Vec<f64> = large
        .iter()
        .map(|&i| interaction_radius(table.lookup(cloud.element(i).symbol.as_str()).unwrap()).unwrap())
        .collect();
    let g = assemble_graph("g", cell, &cloud, &large, &edges, ScatteringSet::empty(), table)
        .map_err(|e| e.to_string())?;
    let got: BTreeSet<[i64; 2]> = g.edge_index.iter().copied().collect();
    if got.len() != g.edge_index.len() {
        return Err("duplicate edge".into());
    }
    for (e, &w) in g.edge_index.iter().zip(&g.edge_attr) {
        let [i, j] = *e;
        if i == j || !got.contains(&[j, i]) {
            return Err(format!("edge {i}->{j} without reverse"));
        }
        let r = d(g.pos_abs[i as usize], g.pos_abs[j as usize]);
        if (r - w).abs() > 1e-9 {
            return Err(format!("edge {i}->{j}: attribute {w} vs distance {r}"));
        }
    }
    if !edges.fallback {
        let mut want = BTreeSet::new();
        for a in 0..large.len() {
            for b in 0..large.len() {
                if a != b && d(g.pos_abs[a], g.pos_abs[b]) <= radii[a] + radii[b] {
                    want.insert([a as i64, b as i64]);
                }
            }
        }
        if want != got {
            return Err(format!("edge set differs: {} expected, {} found", want.len(), got.len()));
        }
    }

    // An atom exactly at the cut radius is inside.
    for i in 0..cloud.len() {
        let r = cloud.origin_distances[i];
        if r > 0.5 && r < c.diameter / 2.0 {
            let idx = cut_nanoparticle(&cloud, &edges, r).map_err(|e| e.to_string())?;
            if idx.binary_search(&i).is_err() {
                return Err(format!("atom {i} at exactly R = {r} excluded"));
            }
            break;
        }
    }
    Ok(())
}
