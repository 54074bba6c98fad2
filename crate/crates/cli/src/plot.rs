//! Static SVG figures: dataset histograms and per-graph scattering curves.

use std::path::{Path, PathBuf};

use chiliforge::crystal::CrystalSystem;
use chiliforge::dataset::DatasetStats;
use chiliforge::nanogen::NanoparticleGraph;
use plotters::prelude::*;

type PlotResult<T> = Result<T, String>;

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("plot: {e:?}")
}

/// Bar chart with one labelled bar per category.
fn bars(path: &Path, title: &str, x_desc: &str, labels: &[String], counts: &[u64]) -> PlotResult<()> {
    let root = SVGBackend::new(path, (900, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64 * 1.1;
    let n = labels.len().max(1);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(if labels.iter().any(|l| l.len() > 6) { 110 } else { 40 })
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..n as f64, 0f64..top)
        .map_err(err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n * 2 + 1)
        .x_label_formatter(&|x| {
            let k = x.floor() as usize;
            if (x - k as f64 - 0.5).abs() < 1e-6 && k < labels.len() {
                labels[k].clone()
            } else {
                String::new()
            }
        })
        .x_desc(x_desc)
        .y_desc("graphs")
        .draw()
        .map_err(err)?;
    chart
        .draw_series(counts.iter().enumerate().map(|(k, &c)| {
            Rectangle::new([(k as f64 + 0.1, 0.0), (k as f64 + 0.9, c as f64)], BLUE.mix(0.7).filled())
        }))
        .map_err(err)?;
    root.present().map_err(err)
}

/// Crystal-system, unique-element, size and crystal-type histograms.
pub fn histograms(s: &DatasetStats, out: &Path) -> PlotResult<Vec<PathBuf>> {
    let mut written = Vec::new();

    let p = out.join("crystal_system.svg");
    let labels: Vec<String> = CrystalSystem::ALL.iter().map(|c| c.name().to_string()).collect();
    bars(&p, "Crystal systems", "crystal system", &labels, &s.crystal_system)?;
    written.push(p);

    let p = out.join("unique_elements.svg");
    let (labels, counts): (Vec<String>, Vec<u64>) =
        s.unique_elements.iter().map(|(k, v)| (k.to_string(), *v)).unzip();
    bars(&p, "Unique elements per particle", "elements", &labels, &counts)?;
    written.push(p);

    let p = out.join("np_size.svg");
    let labels: Vec<String> = s.np_size.edges.iter().map(|e| format!("{e}")).collect();
    bars(&p, "Particle size", "largest interatomic distance (Å), bin start", &labels, &s.np_size.counts)?;
    written.push(p);

    let p = out.join("crystal_type.svg");
    let (labels, counts): (Vec<String>, Vec<u64>) =
        s.crystal_type.iter().map(|(k, v)| (k.clone(), *v)).unzip();
    bars(&p, "Crystal types", "", &labels, &counts)?;
    written.push(p);
    Ok(written)
}

/// The six curves of one graph on a 3 × 2 grid.
pub fn curves(g: &NanoparticleGraph, out: &Path) -> PlotResult<PathBuf> {
    let path = out.join(format!("{}_curves.svg", g.id));
    draw_curves(g, &path)?;
    Ok(path)
}

fn draw_curves(g: &NanoparticleGraph, path: &Path) -> PlotResult<()> {
    let root = SVGBackend::new(path, (1200, 1200)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let panels = root.split_evenly((3, 2));
    for (area, c) in panels.iter().zip(g.y.scattering.curves()) {
        if c.grid.is_empty() {
            continue;
        }
        let (x0, x1) = (c.grid[0], c.grid[c.grid.len() - 1]);
        let lo = c.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-12);
        let mut chart = ChartBuilder::on(area)
            .caption(format!("{} {}", g.id, c.kind.name()), ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(36)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, (lo - pad)..(hi + pad))
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_desc(if c.kind.is_pdf() { "r (Å)" } else { "Q (1/Å)" })
            .draw()
            .map_err(err)?;
        chart
            .draw_series(LineSeries::new(
                c.grid.iter().copied().zip(c.values.iter().copied()),
                &RED,
            ))
            .map_err(err)?;
    }
    root.present().map_err(err)
}
