//! Plot output for finished runs: gnuplot scripts over the run's CSV files and
//! standalone SVG figures.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use vortexloc::blob::{read_snapshot_csv, SnapshotManifest};
use vortexloc::diagnostics::SweepResult;
use vortexloc::{Point2, Vec2};

use crate::experiment::{
    MemberSummary, RunManifest, DIAGNOSTICS_FILE, MANIFEST_FILE, SNAPSHOT_INDEX_FILE, TRAJECTORY_FILE,
};

/// Exponent of the localization radius drawn around the point vortex.
const ENVELOPE_EXPONENT: f64 = 1.0 / 3.0;
const PLOT_DIR: &str = "plots";
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("missing input files: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{0} has no data rows")]
    Empty(String),
    #[error("{file}: {msg}")]
    Malformed { file: String, msg: String },
    #[error(transparent)]
    Core(#[from] vortexloc::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes plot scripts and figures for the run described by `manifest_path`
/// into its `plots/` directory and returns the written paths.
pub fn emit_plot_data(manifest_path: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let manifest_path = if manifest_path.is_dir() { manifest_path.join(MANIFEST_FILE) } else { manifest_path.to_path_buf() };
    if !manifest_path.exists() {
        return Err(PlotError::Missing(vec![manifest_path.display().to_string()]));
    }
    let manifest = RunManifest::read(&manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let missing: Vec<String> =
        manifest.outputs.iter().filter(|o| !root.join(&o.path).is_file()).map(|o| o.path.clone()).collect();
    if !missing.is_empty() {
        return Err(PlotError::Missing(missing));
    }
    if manifest.output(TRAJECTORY_FILE).is_none() {
        return Err(PlotError::Missing(vec![TRAJECTORY_FILE.to_string()]));
    }
    let ode = read_table(&root.join(TRAJECTORY_FILE))?;
    let plot_dir = root.join(PLOT_DIR);
    fs::create_dir_all(&plot_dir)?;
    let boundary = manifest.config.domain.build()?.boundary_sampler(256);
    let mut written = Vec::new();

    if manifest.members.is_empty() {
        let svg = trajectory_figure(&boundary, &ode, &[], None);
        written.push(save(&plot_dir, "trajectory.svg", &svg)?);
        written.push(save(&plot_dir, "trajectory.gp", &trajectory_script(&ode, "", None))?);
    }
    for member in &manifest.members {
        let prefix = if member.dir.is_empty() { String::new() } else { format!("{}_", member.dir) };
        let dir = root.join(&member.dir);
        let diag_path = dir.join(DIAGNOSTICS_FILE);
        let diag = read_table(&diag_path)?;
        let index: SnapshotManifest = read_json(&dir.join(SNAPSHOT_INDEX_FILE))?;
        let mut scatter = Vec::new();
        for (t, file) in index.times.iter().zip(&index.files) {
            let f = fs::File::open(dir.join(file))?;
            let rows = read_snapshot_csv(BufReader::new(f))?;
            scatter.push((*t, rows.into_iter().map(|(_, p, _)| p).collect::<Vec<_>>()));
        }
        let envelope = Envelope::from_member(member);
        let svg = trajectory_figure(&boundary, &ode, &scatter, Some(&envelope));
        written.push(save(&plot_dir, &format!("{prefix}trajectory.svg"), &svg)?);
        written.push(save(&plot_dir, &format!("{prefix}timeseries.svg"), &timeseries_figure(&diag, member.epsilon))?);
        let rel = if member.dir.is_empty() { DIAGNOSTICS_FILE.to_string() } else { format!("{}/{DIAGNOSTICS_FILE}", member.dir) };
        written.push(save(&plot_dir, &format!("{prefix}timeseries.gp"), &timeseries_script(&rel, &prefix))?);
        written.push(save(&plot_dir, &format!("{prefix}trajectory.gp"), &trajectory_script(&ode, &prefix, Some(&index)))?);
    }
    if let Some(sweep) = &manifest.sweep {
        let mut dat = String::from("# epsilon sup_center_err max_support_radius\n");
        for i in 0..sweep.epsilons.len() {
            let _ = writeln!(dat, "{} {} {}", sweep.epsilons[i], sweep.sup_center_err[i], sweep.max_support_radius[i]);
        }
        written.push(save(&plot_dir, "sweep.dat", &dat)?);
        written.push(save(&plot_dir, "loglog.svg", &loglog_figure(sweep))?);
        written.push(save(&plot_dir, "loglog.gp", &loglog_script(sweep))?);
    }
    Ok(written)
}

fn save(dir: &Path, name: &str, text: &str) -> Result<PathBuf, PlotError> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PlotError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PlotError::Malformed { file: path.display().to_string(), msg: e.to_string() })
}

/// A numeric CSV table: header names and rows.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn read_table(path: &Path) -> Result<Table, PlotError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|_| PlotError::Missing(vec![name.clone()]))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| PlotError::Malformed { file: name.clone(), msg: format!("row {}: {e}", n + 2) })?;
        if row.len() != header.len() {
            return Err(PlotError::Malformed { file: name, msg: format!("row {} has {} fields", n + 2, row.len()) });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(PlotError::Empty(name));
    }
    Ok(Table { header, rows })
}

fn vortex_paths(ode: &Table) -> Vec<Vec<Point2>> {
    let k = (ode.header.len() - 2) / 2;
    (0..k)
        .map(|i| ode.rows.iter().map(|r| Vec2::new(r[1 + 2 * i], r[2 + 2 * i])).collect())
        .collect()
}

fn position_at(path: &[Point2], times: &[f64], t: f64) -> Point2 {
    let k = times.partition_point(|s| *s < t).min(times.len() - 1);
    path[k]
}

/// Radius `C ε^α` of the localization disk drawn around the point vortex.
struct Envelope {
    radius: f64,
    label: String,
}

impl Envelope {
    fn from_member(m: &MemberSummary) -> Self {
        let r_max = m.max_support_radius.iter().cloned().fold(0.0, f64::max);
        let c = r_max / m.epsilon.powf(ENVELOPE_EXPONENT);
        Envelope { radius: c * m.epsilon.powf(ENVELOPE_EXPONENT), label: format!("C eps^(1/3), C = {c:.3}") }
    }
}

struct Canvas {
    size: f64,
    margin: f64,
    lo: Vec2,
    hi: Vec2,
    body: String,
}

impl Canvas {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        Canvas { size: 640.0, margin: 72.0, lo, hi, body: String::new() }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let span = self.size - 2.0 * self.margin;
        let x = self.margin + (p.x - self.lo.x) / (self.hi.x - self.lo.x) * span;
        let y = self.size - self.margin - (p.y - self.lo.y) / (self.hi.y - self.lo.y) * span;
        (x, y)
    }

    fn polyline(&mut self, pts: &[Vec2], color: &str, width: f64, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash} points=\"{}\"/>",
            coords.join(" ")
        );
    }

    fn dots(&mut self, pts: &[Vec2], color: &str) {
        let _ = writeln!(self.body, "<g fill=\"{color}\" fill-opacity=\"0.5\">");
        for p in pts {
            let (x, y) = self.map(*p);
            let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"0.8\"/>");
        }
        self.body.push_str("</g>\n");
    }

    fn ring(&mut self, c: Vec2, r: f64, color: &str) {
        let (x, y) = self.map(c);
        let (x1, _) = self.map(c + Vec2::new(r, 0.0));
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"3 3\"/>",
            (x1 - x).abs()
        );
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str) {
        self.colored_text(x, y, s, anchor, "#000");
    }

    fn colored_text(&mut self, x: f64, y: f64, s: &str, anchor: &str, color: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"{anchor}\">{}</text>",
            escape(s)
        );
    }

    fn frame(&mut self, xlabel: &str, ylabel: &str, xticks: &[(f64, String)], yticks: &[(f64, String)]) {
        let (m, s) = (self.margin, self.size);
        let _ = writeln!(
            self.body,
            "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{w}\" fill=\"none\" stroke=\"#444\"/>",
            w = s - 2.0 * m
        );
        for (v, label) in xticks {
            let (x, _) = self.map(Vec2::new(*v, self.lo.y));
            let _ = writeln!(self.body, "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#444\"/>", s - m, s - m + 5.0);
            self.text(x, s - m + 18.0, label, "middle");
        }
        for (v, label) in yticks {
            let (_, y) = self.map(Vec2::new(self.lo.x, *v));
            let _ = writeln!(self.body, "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{m}\" y2=\"{y:.2}\" stroke=\"#444\"/>", m - 5.0);
            self.text(m - 8.0, y + 4.0, label, "end");
        }
        self.text(s / 2.0, s - 8.0, xlabel, "middle");
        let _ = writeln!(
            self.body,
            "<text x=\"14\" y=\"{c}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {c})\">{}</text>",
            escape(ylabel),
            c = s / 2.0
        );
    }

    fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{h}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n{}</svg>\n",
            escape(title),
            self.body,
            s = self.size,
            h = self.size / 2.0
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).map(|v| (v, format!("{v:.3}"))).collect()
}

fn trajectory_figure(
    boundary: &[Point2],
    ode: &Table,
    scatter: &[(f64, Vec<Point2>)],
    envelope: Option<&Envelope>,
) -> String {
    let paths = vortex_paths(ode);
    let all = boundary.iter().chain(paths.iter().flatten()).chain(scatter.iter().flat_map(|s| s.1.iter()));
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in all {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    // square window so circles stay circular
    let half = 0.5 * (hi.x - lo.x).max(hi.y - lo.y) * 1.05;
    let mid = (lo + hi) * 0.5;
    let (lo, hi) = (mid - Vec2::new(half, half), mid + Vec2::new(half, half));
    let mut c = Canvas::new(lo, hi);
    let mut closed = boundary.to_vec();
    closed.extend(boundary.first().copied());
    c.polyline(&closed, "#000", 1.5, false);
    let times = ode.column("t").unwrap_or_default();
    for (k, (t, pts)) in scatter.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        c.dots(pts, color);
        if let Some(env) = envelope {
            for path in &paths {
                c.ring(position_at(path, &times, *t), env.radius, color);
            }
        }
    }
    for path in &paths {
        c.polyline(path, "#333", 1.0, true);
    }
    c.frame("x", "y", &linear_ticks(lo.x, hi.x), &linear_ticks(lo.y, hi.y));
    let mut title = String::from("point-vortex trajectory");
    if let Some(env) = envelope {
        title = format!("particles at {} times, rings: {}", scatter.len(), env.label);
    }
    c.finish(&title)
}

fn timeseries_figure(diag: &Table, eps: f64) -> String {
    let t = diag.column("t").unwrap_or_default();
    let series = [("dist_ode", "|m - z|"), ("R_supp", "support radius"), ("I", "inertia")];
    let t_hi = t.iter().cloned().fold(0.0, f64::max).max(1e-12);
    let mut c = Canvas::new(Vec2::new(0.0, 0.0), Vec2::new(t_hi, 1.0));
    for (k, (col, label)) in series.iter().enumerate() {
        let v = diag.column(col).unwrap_or_default();
        let max = v.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
        let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
        let pts: Vec<Vec2> = t.iter().zip(&v).map(|(t, v)| Vec2::new(*t, v * scale)).collect();
        c.polyline(&pts, PALETTE[k], 1.5, false);
        c.colored_text(c.size - c.margin - 4.0, c.size - c.margin - 16.0 * (3 - k) as f64, &format!("{label} (max {max:.3e})"), "end", PALETTE[k]);
    }
    c.frame("t", "value / max", &linear_ticks(0.0, t_hi), &linear_ticks(0.0, 1.0));
    c.finish(&format!("diagnostics, epsilon = {eps}"))
}

fn loglog_figure(sweep: &SweepResult) -> String {
    let lx: Vec<f64> = sweep.epsilons.iter().map(|e| e.log10()).collect();
    let cols = [
        ("sup |m - z|", &sweep.sup_center_err, sweep.fitted_center_slope),
        ("max support radius", &sweep.max_support_radius, sweep.fitted_support_slope),
    ];
    let ly: Vec<f64> = cols.iter().flat_map(|c| c.1.iter()).filter(|v| **v > 0.0).map(|v| v.log10()).collect();
    let pad = |lo: f64, hi: f64| {
        let d = (hi - lo).max(0.1) * 0.1;
        (lo - d, hi + d)
    };
    let (x0, x1) = pad(lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = pad(ly.iter().cloned().fold(f64::INFINITY, f64::min), ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let mut c = Canvas::new(Vec2::new(x0, y0), Vec2::new(x1, y1));
    for (k, (label, ys, slope)) in cols.iter().enumerate() {
        let pts: Vec<Vec2> =
            lx.iter().zip(ys.iter()).filter(|(_, y)| **y > 0.0).map(|(x, y)| Vec2::new(*x, y.log10())).collect();
        c.dots(&pts, PALETTE[k]);
        for p in &pts {
            c.ring(*p, (x1 - x0) * 0.01, PALETTE[k]);
        }
        let mut text = label.to_string();
        if let Some(s) = slope {
            // least-squares line through the centroid in log space
            let (mx, my) = (
                pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64,
                pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64,
            );
            let line = [Vec2::new(x0, my + s * (x0 - mx)), Vec2::new(x1, my + s * (x1 - mx))];
            c.polyline(&line, PALETTE[k], 1.0, true);
            text = format!("{label}, slope {s:.3}");
        }
        c.colored_text(c.margin + 8.0, c.margin + 16.0 * (k + 1) as f64, &text, "start", PALETTE[k]);
    }
    let ticks = |lo: f64, hi: f64| -> Vec<(f64, String)> {
        linear_ticks(lo, hi).into_iter().map(|(v, _)| (v, format!("{:.2e}", 10f64.powf(v)))).collect()
    };
    c.frame("epsilon", "observable", &ticks(x0, x1), &ticks(y0, y1));
    c.finish("localization sweep (log-log)")
}

fn trajectory_script(ode: &Table, prefix: &str, index: Option<&SnapshotManifest>) -> String {
    let k = (ode.header.len() - 2) / 2;
    let mut s = format!("set terminal svg size 640,640\nset output '{prefix}trajectory_gnuplot.svg'\nset size square\nset datafile separator ','\nset key off\n");
    s.push_str("set parametric\nset trange [0:2*pi]\n");
    let mut parts = vec!["cos(t), sin(t) with lines lc rgb '#000000'".to_string()];
    for i in 0..k {
        parts.push(format!("'../{TRAJECTORY_FILE}' every ::1 using {}:{} with lines dt 2", 2 + 2 * i, 3 + 2 * i));
    }
    if let Some(index) = index {
        let dir = prefix.trim_end_matches('_');
        for f in &index.files {
            let rel = if dir.is_empty() { format!("../{f}") } else { format!("../{dir}/{f}") };
            parts.push(format!("'{rel}' every ::1 using 2:3 with dots"));
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

fn timeseries_script(rel: &str, prefix: &str) -> String {
    format!(
        "set terminal svg size 800,480\nset output '{prefix}timeseries_gnuplot.svg'\nset datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset logscale y\nplot '../{rel}' using 1:7 with lines, '' using 1:6 with lines, '' using 1:5 with lines\n"
    )
}

fn loglog_script(sweep: &SweepResult) -> String {
    let mut s = String::from("set terminal svg size 640,480\nset output 'loglog_gnuplot.svg'\nset logscale xy\nset xlabel 'epsilon'\n");
    let mut parts = vec![
        "'sweep.dat' using 1:2 with points title 'sup |m - z|'".to_string(),
        "'sweep.dat' using 1:3 with points title 'max support radius'".to_string(),
    ];
    if let (Some(a), Some(b)) = (sweep.fitted_center_slope, sweep.fitted_support_slope) {
        let anchor = |ys: &[f64], slope: f64| {
            let n = ys.len() as f64;
            let mx = sweep.epsilons.iter().map(|e| e.ln()).sum::<f64>() / n;
            let my = ys.iter().map(|y| y.ln()).sum::<f64>() / n;
            (my - slope * mx).exp()
        };
        let _ = writeln!(s, "c1 = {}\nc2 = {}", anchor(&sweep.sup_center_err, a), anchor(&sweep.max_support_radius, b));
        parts.push(format!("c1 * x**{a} title 'slope {a:.3}'"));
        parts.push(format!("c2 * x**{b} title 'slope {b:.3}'"));
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}
