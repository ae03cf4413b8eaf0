use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kw_core::profile::Profile;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Files written by one run, in order.
pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// `<stem>.csv`, `<stem>.json` (shape sidecar) and `<stem>.svg`.
    pub fn profile(&mut self, stem: &str, profile: &Profile, title: &str) -> Result<(), CliError> {
        self.write(&format!("{stem}.csv"), &profile.to_csv())?;
        self.json(&format!("{stem}.json"), &profile.sidecar())?;
        let pts: Vec<(f64, f64)> = profile.grid.nodes().zip(profile.values.iter().copied()).collect();
        let svg = Plot::new(title, "t", "phi").series(&[pts], "#1f4e9c", false).hline(1.0).render();
        self.write(&format!("{stem}.svg"), &svg)
    }
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    params: Value,
    outputs: &[String],
    wall_time: f64,
    error: Option<&CliError>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let manifest = json!({
        "command": command,
        "params": params,
        "outputs": outputs,
        "versions": { "kw": env!("CARGO_PKG_VERSION"), "manifest": 1 },
        "wall_time": wall_time,
        "status": match error { None => "ok", Some(e) => e.status() },
        "error": error.map(|e| e.to_string()),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Minimal line plot. Series are split into separate polylines at gaps (NaN).
pub struct Plot {
    title: String,
    xlabel: String,
    ylabel: String,
    series: Vec<(Vec<Vec<(f64, f64)>>, String, bool)>,
    hlines: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const MAX_POINTS: usize = 2000;

impl Plot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Plot { title: title.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), series: Vec::new(), hlines: Vec::new() }
    }

    pub fn series(mut self, pieces: &[Vec<(f64, f64)>], color: &str, dashed: bool) -> Self {
        self.series.push((pieces.to_vec(), color.into(), dashed));
        self
    }

    /// Points with NaN ordinates become breaks.
    pub fn gapped(self, pts: &[(f64, f64)], color: &str, dashed: bool) -> Self {
        let mut pieces: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in pts {
            if y.is_finite() {
                pieces.last_mut().expect("nonempty").push((x, y));
            } else if !pieces.last().expect("nonempty").is_empty() {
                pieces.push(Vec::new());
            }
        }
        pieces.retain(|p| !p.is_empty());
        self.series(&pieces, color, dashed)
    }

    pub fn hline(mut self, y: f64) -> Self {
        self.hlines.push(y);
        self
    }

    pub fn render(&self) -> String {
        let all = self.series.iter().flat_map(|s| s.0.iter().flatten());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        for &y in &self.hlines {
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        let margin = 0.05 * (y1 - y0).max(1e-12);
        let (y0, y1) = (y0 - margin, y1 + margin);
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.ylabel)
        );
        for (v, x, y, anchor) in [
            (x0, sx(x0), H - PAD + 16.0, "start"),
            (x1, sx(x1), H - PAD + 16.0, "end"),
        ] {
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="10">{}</text>"#, tick(v));
        }
        for v in [y0, y1] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, PAD - 4.0, sy(v) + 3.0, tick(v));
        }
        for &y in &self.hlines {
            let _ = writeln!(
                s,
                r##"<line x1="{PAD}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                sy(y),
                W - PAD,
                sy(y)
            );
        }
        for (pieces, color, dashed) in &self.series {
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            for piece in pieces {
                let stride = piece.len().div_ceil(MAX_POINTS).max(1);
                let mut pts = String::new();
                for (k, &(x, y)) in piece.iter().enumerate() {
                    if k % stride == 0 || k + 1 == piece.len() {
                        let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
                    }
                }
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.trim_end());
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let r = format!("{v:.3}");
    if r == "-0.000" { "0.000".into() } else { r }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Full 17-significant-digit rendering used by every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
