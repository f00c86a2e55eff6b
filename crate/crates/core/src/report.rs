//! Summaries and SVG plots of a run directory, rebuilt from its manifest and CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::scenario::Manifest;

/// What [`report`] produced.
#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub text: String,
    pub plots: Vec<PathBuf>,
    pub passed: bool,
}

/// A CSV read back as strings and numbers.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub raw: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let headers = rd.headers()?.iter().map(str::to_string).collect();
        let mut raw = Vec::new();
        for rec in rd.records() {
            raw.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, raw })
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.raw.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }

    /// The raw text of `column` in the first row whose `key` column equals `value`.
    pub fn lookup(&self, key: &str, value: &str, column: &str) -> Option<&str> {
        let (k, c) = (self.index(key)?, self.index(column)?);
        self.raw.iter().find(|r| r[k] == value).map(|r| r[c].as_str())
    }
}

fn plot_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Format(format!("plot rendering failed: {e:?}"))
}

/// Writes `summary.txt` into `dir` and, when `plots` is set, SVG plots into `dir/plots`.
pub fn report(dir: &Path, plots: bool) -> Result<ReportSummary> {
    let manifest = Manifest::read(dir)?;
    let mut text = format!(
        "scenario {}  seed {}  overall {}\n{:>10}  {:<24}  {:<28}  {:>14}  {:>14}  status\n",
        manifest.scenario,
        manifest.seed,
        if manifest.passed { "PASS" } else { "FAIL" },
        "resolution",
        "analysis",
        "flag",
        "value",
        "tolerance"
    );
    for (res, g) in manifest.gates() {
        let res = res.map_or("all".to_string(), |r| r.to_string());
        text.push_str(&format!(
            "{:>10}  {:<24}  {:<28}  {:>14.6e}  {:>14.6e}  {}\n",
            res,
            g.analysis,
            g.flag,
            g.value,
            g.tolerance,
            if g.passed { "pass" } else { "FAIL" }
        ));
    }
    fs::write(dir.join("summary.txt"), &text)?;
    let mut out = Vec::new();
    if plots {
        let pdir = dir.join("plots");
        fs::create_dir_all(&pdir)?;
        for run in &manifest.runs {
            out.extend(plot_run(&dir.join(&run.directory), &pdir, run.resolution)?);
        }
    }
    Ok(ReportSummary { text, plots: out, passed: manifest.passed })
}

fn plot_run(rdir: &Path, pdir: &Path, n: usize) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let exists = |f: &str| rdir.join(f).exists();
    if exists("trajectory.csv") {
        let t = CsvTable::read(&rdir.join("trajectory.csv"))?;
        let p = pdir.join(format!("n{n}_perturbation.svg"));
        loglog(&p, &format!("sup |g - gbar|, n = {n}"), "t", &t.column("t").unwrap_or_default(), &[(
            "sup_perturbation".into(),
            t.column("sup_perturbation").unwrap_or_default(),
            None,
        )])?;
        out.push(p);
    }
    if exists("smoothing_rates_norms.csv") {
        let t = CsvTable::read(&rdir.join("smoothing_rates_norms.csv"))?;
        let fits = CsvTable::read(&rdir.join("smoothing_rates_fits.csv"))?;
        let ts = t.column("t").unwrap_or_default();
        let series: Vec<_> = t
            .headers
            .iter()
            .filter(|h| h.starts_with("grad"))
            .map(|h| (h.clone(), t.column(h).unwrap_or_default(), fit_of(&fits, h)))
            .collect();
        let p = pdir.join(format!("n{n}_smoothing_rates.svg"));
        loglog(&p, &format!("sup |grad^k h|, n = {n}"), "t", &ts, &series)?;
        out.push(p);
    }
    if exists("drift_drift.csv") {
        let t = CsvTable::read(&rdir.join("drift_drift.csv"))?;
        let fits = CsvTable::read(&rdir.join("drift_fits.csv"))?;
        let p = pdir.join(format!("n{n}_drift.svg"));
        loglog(&p, &format!("gauge drift, n = {n}"), "sqrt(t2) - sqrt(t1)", &t.column("sqrt_gap").unwrap_or_default(), &[(
            "drift".into(),
            t.column("drift").unwrap_or_default(),
            fit_of(&fits, "drift"),
        )])?;
        out.push(p);
    }
    if exists("perturbation_stability_sup_difference.csv") {
        let t = CsvTable::read(&rdir.join("perturbation_stability_sup_difference.csv"))?;
        let fits = CsvTable::read(&rdir.join("perturbation_stability_fits.csv"))?;
        let series: Vec<_> = t
            .headers
            .iter()
            .filter(|h| h.starts_with("s_c"))
            .map(|h| {
                let fit = fit_of(&fits, &format!("omega_c{}", &h[3..]));
                (h.clone(), t.column(h).unwrap_or_default(), fit)
            })
            .collect();
        let p = pdir.join(format!("n{n}_perturbation_stability.svg"));
        loglog(&p, &format!("sup over shrinking balls of |R' - R''|, n = {n}"), "t", &t.column("t").unwrap_or_default(), &series)?;
        out.push(p);
    }
    if exists("beta_weak_matrix.csv") {
        let t = CsvTable::read(&rdir.join("beta_weak_matrix.csv"))?;
        let p = pdir.join(format!("n{n}_beta_weak.svg"));
        heatmap(&p, &format!("m(C, t), n = {n}"), &t)?;
        out.push(p);
    }
    for (file, title, cols) in [
        ("max_principle_bounds.csv", "min R and the kappa bound", &["min_r", "kappa_bound"][..]),
        ("rigidity_defect.csv", "flat defect of the pulled-back flow", &["defect"][..]),
        ("ricci_residual_residual.csv", "Ricci flow residual", &["residual", "residual_high"][..]),
    ] {
        if exists(file) {
            let t = CsvTable::read(&rdir.join(file))?;
            let series: Vec<_> =
                cols.iter().filter_map(|c| t.column(c).map(|v| (c.to_string(), v))).collect();
            let p = pdir.join(format!("n{n}_{}", file.replace(".csv", ".svg")));
            lines(&p, &format!("{title}, n = {n}"), &t.column("t").unwrap_or_default(), &series)?;
            out.push(p);
        }
    }
    Ok(out)
}

/// A fitted power law `c x^s`, with the slope kept as the text found in the fits CSV.
#[derive(Debug, Clone)]
pub struct FitLine {
    pub slope_text: String,
    pub slope: f64,
    pub coefficient: f64,
}

fn fit_of(fits: &CsvTable, name: &str) -> Option<FitLine> {
    let s = fits.lookup("name", name, "slope")?;
    let c = fits.lookup("name", name, "coefficient")?;
    Some(FitLine { slope_text: s.to_string(), slope: s.parse().ok()?, coefficient: c.parse().ok()? })
}

fn positive_range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    (lo <= hi).then(|| if lo == hi { (lo * 0.5, hi * 2.0) } else { (lo, hi) })
}

fn finite_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn empty_plot(path: &Path, title: &str) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    root.titled(&format!("{title} (no positive data)"), ("sans-serif", 18)).map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Log-log plot of each series against `xs`, with dashed fitted lines and their slopes.
pub fn loglog(path: &Path, title: &str, xlabel: &str, xs: &[f64], series: &[(String, Vec<f64>, Option<FitLine>)]) -> Result<()> {
    let Some(xr) = positive_range(xs.iter().copied()) else { return empty_plot(path, title) };
    let Some(yr) = positive_range(series.iter().flat_map(|s| s.1.iter().copied())) else {
        return empty_plot(path, title);
    };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((xr.0..xr.1).log_scale(), (yr.0 * 0.8..yr.1 * 1.25).log_scale())
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(xlabel).x_label_formatter(&|v| format!("{v:.1e}")).y_label_formatter(&|v| format!("{v:.1e}")).draw().map_err(plot_err)?;
    for (i, (name, ys, fit)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64)> =
            xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite()).map(|(x, y)| (*x, *y)).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart.draw_series(pts.iter().map(|p| Circle::new(*p, 3, color.filled()))).map_err(plot_err)?;
        if let Some(f) = fit {
            let line: Vec<(f64, f64)> =
                pts.iter().map(|(x, _)| (*x, f.coefficient * x.powf(f.slope))).filter(|(_, y)| *y > 0.0).collect();
            chart.draw_series(DashedLineSeries::new(line, 6, 4, color.stroke_width(1))).map_err(plot_err)?;
            root.draw(&Text::new(
                format!("{name} slope = {}", f.slope_text),
                (90, 40 + 18 * i as i32),
                ("sans-serif", 14).into_font().color(&color),
            ))
            .map_err(plot_err)?;
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).position(SeriesLabelPosition::LowerRight).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Linear plot of each series against `xs`.
pub fn lines(path: &Path, title: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> Result<()> {
    let xr = finite_range(xs.iter().copied());
    let yr = finite_range(series.iter().flat_map(|s| s.1.iter().copied()));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t").y_label_formatter(&|v| format!("{v:.2e}")).draw().map_err(plot_err)?;
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| y.is_finite()).map(|(x, y)| (*x, *y)).collect();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Heatmap of `min_r` over stored-time index and `C`; masked cells stay grey.
pub fn heatmap(path: &Path, title: &str, t: &CsvTable) -> Result<()> {
    let (ts, cs, vals) = (t.column("t").unwrap_or_default(), t.column("C").unwrap_or_default(), t.column("min_r").unwrap_or_default());
    let mut times: Vec<f64> = ts.clone();
    times.dedup();
    let mut c_vals: Vec<f64> = cs.clone();
    c_vals.sort_by(f64::total_cmp);
    c_vals.dedup();
    let (lo, hi) = finite_range(vals.iter().copied());
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..times.len().max(1) as f64, 0.0..c_vals.len().max(1) as f64)
        .map_err(plot_err)?;
    chart.configure_mesh().disable_mesh().x_desc("stored time index").y_desc("C index").draw().map_err(plot_err)?;
    let cells = ts.iter().zip(&cs).zip(&vals).filter_map(|((t, c), v)| {
        let i = times.iter().position(|x| x == t)? as f64;
        let j = c_vals.iter().position(|x| x == c)? as f64;
        let color = if v.is_finite() {
            let s = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            HSLColor(0.66 * (1.0 - s), 0.8, 0.5).to_rgba()
        } else {
            RGBAColor(200, 200, 200, 1.0)
        };
        Some(Rectangle::new([(i, j), (i + 1.0, j + 1.0)], color.filled()))
    });
    chart.draw_series(cells).map_err(plot_err)?;
    root.draw(&Text::new(format!("blue = {lo:.3e}, red = {hi:.3e}"), (80, 30), ("sans-serif", 13))).map_err(plot_err)?;
    root.present().map_err(plot_err)
}
