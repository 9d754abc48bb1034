use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use plotters::prelude::*;
use qel_core::config::RunConfig;
use qel_core::diagnostics::DiagnosticsRecord;
use qel_core::series::read_series;

use crate::commands::output_dir;
use crate::Outcome;

type Lines<'a> = Vec<(&'a str, Vec<f64>)>;

const COLORS: [RGBColor; 5] = [BLUE, RED, GREEN, MAGENTA, BLACK];

/// One line chart with several named series over `t`.
fn line_chart(path: &Path, title: &str, t: &[f64], lines: &[(&str, Vec<f64>)]) -> Result<()> {
    let finite = |v: &f64| v.is_finite();
    let ys: Vec<f64> = lines
        .iter()
        .flat_map(|(_, v)| v.iter().copied().filter(finite))
        .collect();
    let (mut lo, mut hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(lo.is_finite() && hi.is_finite()) {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo <= 1e-300 + 1e-12 * hi.abs() {
        let pad = 0.5 * hi.abs().max(1e-12);
        lo -= pad;
        hi += pad;
    }
    let (t0, mut t1) = (t[0], *t.last().expect("nonempty"));
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d(t0..t1, lo..hi)
        .map_err(|e| anyhow!("{e}"))?;
    chart.configure_mesh().x_desc("t").draw().map_err(|e| anyhow!("{e}"))?;
    for (k, (name, v)) in lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts = t.iter().zip(v).filter(|(_, y)| y.is_finite()).map(|(a, b)| (*a, *b));
        chart
            .draw_series(LineSeries::new(pts, &color))
            .map_err(|e| anyhow!("{e}"))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    if lines.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| anyhow!("{e}"))?;
    }
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

/// Write the Q, C, E-component and 1/Q plots of a series into `dir`.
pub fn write_plots(records: &[DiagnosticsRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let col = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let plots: [(&str, &str, Lines); 4] = [
        ("q.svg", "full score Q(t)", vec![("Q", col(|r| r.q))]),
        ("c.svg", "jet amplitude C(t)", vec![("C", col(|r| r.c))]),
        (
            "e_components.svg",
            "master error components",
            vec![
                ("delta_jet", col(|r| r.delta_jet)),
                ("mu", col(|r| r.mu)),
                ("Rprof", col(|r| r.rprof)),
                ("rho", col(|r| r.rho)),
                ("eps_strain", col(|r| r.eps_strain)),
            ],
        ),
        ("inv_q.svg", "1/Q(t)", vec![("1/Q", col(|r| 1.0 / r.q))]),
    ];
    let mut out = Vec::new();
    for (file, title, lines) in plots {
        let path = dir.join(file);
        line_chart(&path, title, &t, &lines).with_context(|| format!("plotting {}", path.display()))?;
        out.push(path);
    }
    Ok(out)
}

pub fn report(cfg: &RunConfig, series: Option<&Path>) -> Result<Outcome> {
    let dir = output_dir(cfg)?;
    let path = series.map(Path::to_path_buf).unwrap_or_else(|| dir.join("series.csv"));
    let records = read_series(&path).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        return Err(anyhow!("{} holds no records", path.display()));
    }
    for p in write_plots(&records, &dir)? {
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Pass)
}
