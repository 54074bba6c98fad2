use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{crystal_system_of, expand_symmetry, CrystalError, CrystalSystem, SpacegroupTable};
use crate::cif::{Site, UnitCell};
use crate::elements::{ElementError, ElementRecord, ElementTable};

const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellParam {
    A,
    B,
    C,
    Alpha,
    Beta,
    Gamma,
}

impl CellParam {
    pub const ALL: [CellParam; 6] = [
        CellParam::A,
        CellParam::B,
        CellParam::C,
        CellParam::Alpha,
        CellParam::Beta,
        CellParam::Gamma,
    ];

    /// Parameters left free by the lattice constraints of `system`.
    /// Trigonal cells use hexagonal axes.
    pub fn free_for(system: CrystalSystem) -> &'static [CellParam] {
        use CellParam::*;
        match system {
            CrystalSystem::Cubic => &[A],
            CrystalSystem::Tetragonal | CrystalSystem::Hexagonal | CrystalSystem::Trigonal => &[A, C],
            CrystalSystem::Orthorhombic => &[A, B, C],
            CrystalSystem::Monoclinic => &[A, B, C, Beta],
            CrystalSystem::Triclinic => &CellParam::ALL,
        }
    }
}

impl fmt::Display for CellParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellParam::A => "a",
            CellParam::B => "b",
            CellParam::C => "c",
            CellParam::Alpha => "alpha",
            CellParam::Beta => "beta",
            CellParam::Gamma => "gamma",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Least-squares line through `(x, y)` points.
pub fn fit_line(points: &[(f64, f64)], what: &str) -> Result<LinearFit, CrystalError> {
    if points.len() < 2 {
        return Err(CrystalError::TooFewObservations(what.to_string()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-12 * n * (1.0 + mx * mx) {
        return Err(CrystalError::DegenerateFit(what.to_string()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// A measured cell of a known compound.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Sum of the Slater radii of the compound's distinct elements (Å).
    pub radius_sum: f64,
    pub values: BTreeMap<CellParam, f64>,
}

impl Observation {
    pub fn from_elements(
        elements: &[String],
        values: BTreeMap<CellParam, f64>,
        table: &ElementTable,
    ) -> Result<Self, CrystalError> {
        let mut radius_sum = 0.0;
        for e in elements {
            let rec = table.lookup(e.as_str())?;
            if rec.slater_radius <= 0.0 {
                return Err(ElementError::MissingRadius(e.clone()).into());
            }
            radius_sum += rec.slater_radius;
        }
        Ok(Self { radius_sum, values })
    }
}

/// Fits every free parameter of `system` against the radius sum.
pub fn fit_cell_params(
    observations: &[Observation],
    system: CrystalSystem,
) -> Result<BTreeMap<CellParam, LinearFit>, CrystalError> {
    CellParam::free_for(system)
        .iter()
        .map(|&p| {
            let pts: Vec<(f64, f64)> = observations
                .iter()
                .filter_map(|o| o.values.get(&p).map(|&v| (o.radius_sum, v)))
                .collect();
            Ok((p, fit_line(&pts, &p.to_string())?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteRole {
    Metal,
    Oxygen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSite {
    pub role: SiteRole,
    pub frac: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalTypeTemplate {
    pub name: String,
    pub spacegroup_number: u16,
    pub sites: Vec<TemplateSite>,
    pub fit_coeffs: BTreeMap<CellParam, LinearFit>,
}

impl CrystalTypeTemplate {
    pub fn system(&self) -> CrystalSystem {
        crystal_system_of(self.spacegroup_number as i64).expect("validated spacegroup")
    }

    pub fn validate(&self) -> Result<(), CrystalError> {
        let system = crystal_system_of(self.spacegroup_number as i64)?;
        let has = |r| self.sites.iter().any(|s| s.role == r);
        if !has(SiteRole::Metal) || !has(SiteRole::Oxygen) {
            return Err(CrystalError::Config(format!(
                "{}: needs at least one metal and one oxygen site",
                self.name
            )));
        }
        for p in CellParam::free_for(system) {
            if !self.fit_coeffs.contains_key(p) {
                return Err(CrystalError::Config(format!("{}: no fit for {p}", self.name)));
            }
        }
        Ok(())
    }

    /// Cell parameters `[a, b, c, alpha, beta, gamma]` at radius sum `r`.
    pub fn cell_params(&self, r: f64) -> [f64; 6] {
        let f = |p: CellParam| self.fit_coeffs.get(&p).map(|l| l.eval(r));
        let a = f(CellParam::A).unwrap_or(0.0);
        match self.system() {
            CrystalSystem::Cubic => [a, a, a, 90.0, 90.0, 90.0],
            CrystalSystem::Tetragonal => [a, a, f(CellParam::C).unwrap_or(0.0), 90.0, 90.0, 90.0],
            CrystalSystem::Hexagonal | CrystalSystem::Trigonal => {
                [a, a, f(CellParam::C).unwrap_or(0.0), 90.0, 90.0, 120.0]
            }
            CrystalSystem::Orthorhombic => [
                a,
                f(CellParam::B).unwrap_or(0.0),
                f(CellParam::C).unwrap_or(0.0),
                90.0,
                90.0,
                90.0,
            ],
            CrystalSystem::Monoclinic => [
                a,
                f(CellParam::B).unwrap_or(0.0),
                f(CellParam::C).unwrap_or(0.0),
                90.0,
                f(CellParam::Beta).unwrap_or(90.0),
                90.0,
            ],
            CrystalSystem::Triclinic => CellParam::ALL.map(|p| f(p).unwrap_or(0.0)),
        }
    }

    /// File-name friendly form of the template name.
    pub fn slug(&self) -> String {
        self.name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservation {
    #[allow(dead_code)]
    formula: Option<String>,
    elements: Vec<String>,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    name: String,
    spacegroup: u16,
    sites: Vec<TemplateSite>,
    #[serde(default)]
    fit: BTreeMap<CellParam, LinearFit>,
    #[serde(default)]
    observation: Vec<RawObservation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    template: Vec<RawTemplate>,
}

/// An ordered collection of templates loaded from a TOML file.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub templates: Vec<CrystalTypeTemplate>,
}

impl TemplateSet {
    /// The twelve shipped structure types, fitted on their bundled observations.
    pub fn builtin() -> &'static TemplateSet {
        static SET: OnceLock<TemplateSet> = OnceLock::new();
        SET.get_or_init(|| {
            TemplateSet::parse(BUILTIN_TEMPLATES, ElementTable::builtin()).expect("builtin templates")
        })
    }

    pub fn load(path: &Path, table: &ElementTable) -> Result<Self, CrystalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CrystalError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, table)
    }

    /// Explicit `fit` entries override fits derived from `observation` entries.
    pub fn parse(text: &str, table: &ElementTable) -> Result<Self, CrystalError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| CrystalError::Config(e.to_string()))?;
        let mut templates = Vec::with_capacity(raw.template.len());
        for rt in raw.template {
            let system = crystal_system_of(rt.spacegroup as i64)?;
            let needs_fit = CellParam::free_for(system)
                .iter()
                .any(|p| !rt.fit.contains_key(p));
            let mut fit_coeffs = if needs_fit {
                let obs = rt
                    .observation
                    .iter()
                    .map(|o| {
                        let values: BTreeMap<CellParam, f64> = CellParam::ALL
                            .into_iter()
                            .zip([o.a, o.b, o.c, o.alpha, o.beta, o.gamma])
                            .filter_map(|(p, v)| v.map(|v| (p, v)))
                            .collect();
                        Observation::from_elements(&o.elements, values, table)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                fit_cell_params(&obs, system).map_err(|e| match e {
                    CrystalError::DegenerateFit(p) => CrystalError::DegenerateFit(format!("{} {p}", rt.name)),
                    CrystalError::TooFewObservations(p) => {
                        CrystalError::TooFewObservations(format!("{} {p}", rt.name))
                    }
                    other => other,
                })?
            } else {
                BTreeMap::new()
            };
            fit_coeffs.extend(rt.fit);
            let t = CrystalTypeTemplate {
                name: rt.name,
                spacegroup_number: rt.spacegroup,
                sites: rt.sites,
                fit_coeffs,
            };
            t.validate()?;
            if templates.iter().any(|o: &CrystalTypeTemplate| o.name == t.name) {
                return Err(CrystalError::Config(format!("duplicate template {}", t.name)));
            }
            templates.push(t);
        }
        Ok(Self { templates })
    }

    pub fn get(&self, name: &str) -> Option<&CrystalTypeTemplate> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Builds the expanded unit cell of `t` for one metal/oxygen pair.
pub fn instantiate_template(
    t: &CrystalTypeTemplate,
    metal: &ElementRecord,
    oxygen: &ElementRecord,
) -> Result<UnitCell, CrystalError> {
    t.validate()?;
    if !metal.is_metal {
        return Err(CrystalError::NotMetal(metal.symbol.clone()));
    }
    for e in [metal, oxygen] {
        if e.slater_radius <= 0.0 {
            return Err(ElementError::MissingRadius(e.symbol.clone()).into());
        }
    }
    let r = metal.slater_radius + oxygen.slater_radius;
    let [a, b, c, alpha, beta, gamma] = t.cell_params(r);
    let table = SpacegroupTable::builtin();
    let mut counts = [0usize; 2];
    let sites = t
        .sites
        .iter()
        .map(|s| {
            let (element, k) = match s.role {
                SiteRole::Metal => (&metal.symbol, 0),
                SiteRole::Oxygen => (&oxygen.symbol, 1),
            };
            counts[k] += 1;
            Site {
                label: format!("{element}{}", counts[k]),
                element: element.clone(),
                frac: s.frac,
                occupancy: 1.0,
            }
        })
        .collect();
    let cell = UnitCell {
        name: format!("{}_{}{}", t.slug(), metal.symbol, oxygen.symbol),
        crystal_type: Some(t.name.clone()),
        a,
        b,
        c,
        alpha,
        beta,
        gamma,
        spacegroup_number: t.spacegroup_number,
        spacegroup_symbol: table
            .symbol(t.spacegroup_number)
            .ok_or(CrystalError::InvalidSpacegroup(t.spacegroup_number as i64))?
            .to_string(),
        sites,
        symops: Vec::new(),
    };
    expand_symmetry(&cell, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(r: f64, a: f64) -> Observation {
        Observation {
            radius_sum: r,
            values: BTreeMap::from([(CellParam::A, a)]),
        }
    }

    #[test]
    fn two_point_fit() {
        let f = fit_cell_params(&[obs(2.0, 4.0), obs(3.0, 5.0)], CrystalSystem::Cubic).unwrap();
        let l = f[&CellParam::A];
        assert!((l.slope - 1.0).abs() < 1e-12 && (l.intercept - 2.0).abs() < 1e-12);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn collinear_points_match_two_point_fit() {
        let two = fit_cell_params(&[obs(2.0, 4.0), obs(3.0, 5.0)], CrystalSystem::Cubic).unwrap();
        let three = fit_cell_params(&[obs(2.0, 4.0), obs(2.5, 4.5), obs(3.0, 5.0)], CrystalSystem::Cubic).unwrap();
        let (a, b) = (two[&CellParam::A], three[&CellParam::A]);
        assert!((a.slope - b.slope).abs() < 1e-12 && (a.intercept - b.intercept).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_short_fits() {
        assert!(matches!(
            fit_cell_params(&[obs(2.0, 4.0), obs(2.0, 4.2)], CrystalSystem::Cubic),
            Err(CrystalError::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_cell_params(&[obs(2.0, 4.0)], CrystalSystem::Cubic),
            Err(CrystalError::TooFewObservations(_))
        ));
        // Hexagonal needs c as well.
        assert!(fit_cell_params(&[obs(2.0, 4.0), obs(3.0, 5.0)], CrystalSystem::Hexagonal).is_err());
    }

    fn unit_template() -> CrystalTypeTemplate {
        CrystalTypeTemplate {
            name: "rock salt".into(),
            spacegroup_number: 225,
            sites: vec![
                TemplateSite { role: SiteRole::Metal, frac: [0.0; 3] },
                TemplateSite { role: SiteRole::Oxygen, frac: [0.5; 3] },
            ],
            fit_coeffs: BTreeMap::from([(CellParam::A, LinearFit { slope: 1.0, intercept: 2.0 })]),
        }
    }

    #[test]
    fn linear_evaluation_for_copper_oxide() {
        let t = ElementTable::builtin();
        let (cu, o) = (t.lookup("Cu").unwrap(), t.lookup("O").unwrap());
        assert!((cu.slater_radius + o.slater_radius - 1.95).abs() < 1e-12);
        let cell = instantiate_template(&unit_template(), cu, o).unwrap();
        assert!((cell.a - 3.95).abs() < 1e-12);
        assert_eq!(cell.params()[1..], [3.95, 3.95, 90.0, 90.0, 90.0]);
        assert_eq!(cell.sites.len(), 8);
        assert_eq!(instantiate_template(&unit_template(), cu, o).unwrap(), cell);
    }

    #[test]
    fn rejects_non_metal_and_missing_roles() {
        let t = ElementTable::builtin();
        let o = t.lookup("O").unwrap();
        assert!(matches!(
            instantiate_template(&unit_template(), o, o),
            Err(CrystalError::NotMetal(_))
        ));
        let mut bad = unit_template();
        bad.sites.retain(|s| s.role == SiteRole::Metal);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn explicit_fit_overrides_observations() {
        let text = r#"
[[template]]
name = "x"
spacegroup = 221
sites = [{ role = "metal", frac = [0, 0, 0] }, { role = "oxygen", frac = [0.5, 0.5, 0.5] }]
fit.a = { slope = 1.0, intercept = 2.0 }
"#;
        let set = TemplateSet::parse(text, ElementTable::builtin()).unwrap();
        assert_eq!(set.templates[0].fit_coeffs[&CellParam::A].intercept, 2.0);
        let missing = text.replace("fit.a = { slope = 1.0, intercept = 2.0 }", "");
        assert!(TemplateSet::parse(&missing, ElementTable::builtin()).is_err());
    }
}
