use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use crate::output::Columns;

const SIZE: (u32, u32) = (960, 540);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(23, 190, 207),
];

/// Draws the named columns of `cols` against `t` into one SVG file.
pub fn plot_columns(cols: &Columns, names: &[String], title: &str, path: &Path) -> Result<()> {
    let t = cols.get("t").ok_or_else(|| anyhow!("CSV has no `t` column"))?;
    let series: Vec<(&str, &[f64])> = names.iter().filter_map(|n| cols.get(n).map(|c| (n.as_str(), c))).collect();
    if t.is_empty() || series.is_empty() {
        return Ok(());
    }
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo >= hi {
        (lo, hi) = (lo - 1.0, lo + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    let (t0, t1) = (t[0], t[t.len() - 1].max(t[0] + f64::EPSILON));

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e:?}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(t0..t1, (lo - pad)..(hi + pad))
        .map_err(|e| anyhow!("{e:?}"))?;
    chart.configure_mesh().x_desc("t (s)").draw().map_err(|e| anyhow!("{e:?}"))?;
    for (k, (name, c)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(t.iter().copied().zip(c.iter().copied()), color))
            .map_err(|e| anyhow!("{e:?}"))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e:?}"))?;
    root.present().map_err(|e| anyhow!("{e:?}"))?;
    Ok(())
}

/// Power, amplitude and frequency plots of a time-series CSV. Returns the
/// files written.
pub fn plot_timeseries(csv: &Path, dir: &Path) -> Result<Vec<PathBuf>> {
    let cols = Columns::read(csv)?;
    let n = cols.names.iter().filter(|c| c.starts_with("p_")).count();
    let per = |prefixes: &[&str]| -> Vec<String> {
        (1..=n).flat_map(|j| prefixes.iter().map(move |p| format!("{p}_{j}"))).collect()
    };
    let plots = [
        ("power.svg", "Active and reactive power", per(&["p", "q"])),
        ("amplitude.svg", "Voltage amplitude", per(&["v_p"])),
        ("frequency.svg", "Angular frequency", per(&["omega"])),
    ];
    let mut written = Vec::new();
    for (file, title, names) in plots {
        let path = dir.join(file);
        plot_columns(&cols, &names, title, &path)?;
        written.push(path);
    }
    Ok(written)
}
