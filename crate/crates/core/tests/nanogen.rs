mod common;

use chiliforge::cif::{Site, UnitCell};
use chiliforge::crystal::{expand_symmetry, SpacegroupTable};
use chiliforge::debye::ScatteringSet;
use chiliforge::elements::ElementTable;
use chiliforge::nanogen::*;
use common::geometry::{case_strategy, check_case};
use proptest::prelude::*;

fn cubic(a: f64, sg: u16, sites: &[(&str, [f64; 3])]) -> UnitCell {
    let cell = UnitCell {
        name: "c".into(),
        crystal_type: None,
        a,
        b: a,
        c: a,
        alpha: 90.0,
        beta: 90.0,
        gamma: 90.0,
        spacegroup_number: sg,
        spacegroup_symbol: String::new(),
        sites: sites
            .iter()
            .enumerate()
            .map(|(k, (e, f))| Site {
                label: format!("{e}{k}"),
                element: e.to_string(),
                frac: *f,
                occupancy: 1.0,
            })
            .collect(),
        symops: Vec::new(),
    };
    expand_symmetry(&cell, SpacegroupTable::builtin()).unwrap()
}

fn rock_salt(a: f64) -> UnitCell {
    cubic(a, 225, &[("Mg", [0.0; 3]), ("O", [0.5; 3])])
}

#[test]
fn replication_examples() {
    assert_eq!(replication_counts(&rock_salt(4.0), 50.0, 64).unwrap(), [14, 14, 14]);
    assert_eq!(replication_counts(&rock_salt(55.0), 50.0, 64).unwrap(), [1, 1, 1]);
    let block = build_supercell(&rock_salt(4.0), 50.0, ElementTable::builtin(), 64).unwrap();
    assert_eq!(block.len(), 8 * 14 * 14 * 14);
    assert!(matches!(
        replication_counts(&rock_salt(0.5), 50.0, 64),
        Err(NanogenError::CellTooLarge { needed: 110, cap: 64, .. })
    ));
}

#[test]
fn centering_puts_a_metal_at_the_origin() {
    let block = build_supercell(&rock_salt(4.2), 20.0, ElementTable::builtin(), 64).unwrap();
    let c = center_cloud(&block).unwrap();
    let origin = (0..c.len()).find(|&i| c.positions[i] == [0.0; 3]).unwrap();
    assert!(c.is_metal(origin));
    // n = ceil(25 / 4.2) = 6; the block centre 3a sits on a Mg site.
    assert!((c.center[0] - 0.0).abs() < 1e-9 && (c.center[2] - 0.0).abs() < 1e-9);
}

#[test]
fn oxygen_only_cloud_has_no_center() {
    let cell = cubic(4.0, 221, &[("O", [0.0; 3])]);
    let block = build_supercell(&cell, 10.0, ElementTable::builtin(), 64).unwrap();
    assert_eq!(center_cloud(&block).unwrap_err(), NanogenError::NoMetalAtom);
}

#[test]
fn rock_salt_first_shell() {
    // Interaction radii 1.25 × Slater: Mg 1.875 Å, O 0.75 Å. At a = 4.2 Å the
    // six O at 2.1 Å (threshold 2.625) and twelve Mg at 2.97 Å (threshold
    // 3.75) are bonded; the six Mg at 4.2 Å are not.
    let table = ElementTable::builtin();
    let block = build_supercell(&rock_salt(4.2), 10.0, table, 64).unwrap();
    let c = center_cloud(&block).unwrap();
    let edges = build_edges(&c);
    assert!(!edges.fallback);
    let origin = (0..c.len()).find(|&i| c.origin_distances[i] == 0.0).unwrap();
    assert!((c.interaction_radii[origin] - 1.875).abs() < 1e-12);
    let neighbours: Vec<(bool, f64)> = edges
        .pairs
        .iter()
        .zip(&edges.distances)
        .filter(|(p, _)| p.contains(&origin))
        .map(|(p, &d)| (c.is_metal(if p[0] == origin { p[1] } else { p[0] }), d))
        .collect();
    let oxygens = neighbours.iter().filter(|(m, d)| !m && (d - 2.1).abs() < 1e-9).count();
    let metals = neighbours.iter().filter(|(m, d)| *m && (d - 4.2 / 2f64.sqrt()).abs() < 1e-9).count();
    assert_eq!((oxygens, metals, neighbours.len()), (6, 12, 18));
}

#[test]
fn particle_grows_with_radius() {
    let table = ElementTable::builtin();
    let block = build_supercell(&rock_salt(4.2), 30.0, table, 64).unwrap();
    let c = center_cloud(&block).unwrap();
    let e = build_edges(&c);
    let mut last = 0;
    for r in [2.0, 5.0, 8.0, 11.0, 14.0] {
        let n = cut_nanoparticle(&c, &e, r).unwrap().len();
        assert!(n >= last);
        last = n;
    }
}

#[test]
fn two_atom_graph() {
    let table = ElementTable::builtin();
    let cell = cubic(6.0, 1, &[("Cu", [0.0; 3]), ("O", [1.9 / 6.0, 0.0, 0.0])]);
    let block = build_supercell(&cell, 2.0, table, 64).unwrap();
    let c = center_cloud(&block).unwrap();
    let e = build_edges(&c);
    let idx = cut_nanoparticle(&c, &e, 0.1).unwrap();
    assert_eq!(idx.len(), 2, "the bonded oxygen joins the core metal");
    let g = assemble_graph("pair", &cell, &c, &idx, &e, ScatteringSet::empty(), table).unwrap();
    assert_eq!(g.x.len(), 2);
    assert_eq!(g.edge_index, vec![[0, 1], [1, 0]]);
    assert!((g.edge_attr[0] - 1.9).abs() < 1e-9);
    assert!((g.y.np_size - 1.9).abs() < 1e-9);
    assert_eq!(g.y.atomic_species, vec![8, 29]);
    assert_eq!((g.y.n_atoms, g.y.n_bonds), (2, 2));
    assert_eq!(g.y.crystal_system_number, 1);
    assert_eq!(g.y.unit_cell_n_atoms, 2);
    assert_eq!(g.y.unit_cell_edge_index, vec![[0, 1], [1, 0]]);
    assert_eq!((g.x[0][0], g.x[1][0]), (29.0, 8.0));
}

#[test]
fn empty_cut_is_an_error() {
    let table = ElementTable::builtin();
    let block = build_supercell(&rock_salt(4.2), 10.0, table, 64).unwrap();
    let c = center_cloud(&block).unwrap();
    let e = build_edges(&c);
    // The origin metal is inside at radius 0.
    assert!(!cut_nanoparticle(&c, &e, 0.0).unwrap().is_empty());
    assert!(matches!(cut_nanoparticle(&c, &e, -1.0), Err(NanogenError::EmptyParticle(_))));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn geometry_rules_hold_on_random_cells(case in case_strategy()) {
        if let Err(msg) = check_case(&case) {
            prop_assert!(false, "{}", msg);
        }
    }
}
