//! CSV, SVG and summary output of an [`ErrorReport`].
//!
//! Numbers are printed with `{:e}` (shortest round-trip form), so files are
//! byte-identical whenever the reports are bit-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::norms::{N_NORMS, NORM_NAMES};
use super::report::{ErrorReport, StudyMode};
use crate::error::Result;

pub const ERRORS_HEADER: &str = "level,k,h,err_u_L2Linf,err_u_H1,err_th_L2Linf,err_th_H1,err_p";

pub fn errors_csv(report: &ErrorReport) -> String {
    let mut s = String::from(ERRORS_HEADER);
    s.push('\n');
    for l in &report.levels {
        let _ = write!(s, "{},{:e},{:e}", l.level, l.k, l.h);
        for e in l.errors {
            let _ = write!(s, ",{e:e}");
        }
        s.push('\n');
    }
    s
}

/// Header plus one `rates` row; the row is omitted when fewer than three
/// levels exist and left empty per column where a fit is undefined.
pub fn rates_csv(report: &ErrorReport) -> String {
    let mut s = format!("fit,{}\n", NORM_NAMES.join(","));
    if report.levels.len() >= 3 {
        s.push_str("rates");
        for r in report.rates() {
            match r {
                Some(r) => {
                    let _ = write!(s, ",{r:e}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

pub fn summary_text(report: &ErrorReport) -> String {
    let d = &report.diagnostics;
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", report.mode);
    let _ = writeln!(s, "samples = {}", report.samples);
    let _ = writeln!(s, "seed = {}", report.seed);
    let _ = writeln!(s, "reference = {}", report.reference);
    let _ = writeln!(s, "trajectories = {}", d.trajectories);
    let _ = writeln!(s, "steps = {}", d.steps);
    let _ = writeln!(s, "energy_violations = {}", d.energy_violations);
    let _ = writeln!(s, "max_energy_excess = {:e}", d.max_energy_excess);
    let _ = writeln!(s, "max_divergence = {:e}", d.max_divergence);
    let _ = writeln!(s, "path_mismatches = {} of {}", d.path_mismatches, d.path_checks);
    let _ = writeln!(s, "\nlevel  k  h(longest edge)  1/nx  errors +- MC standard error");
    for l in &report.levels {
        let _ = write!(s, "{}  {:e}  {:e}  {:e} ", l.level, l.k, l.h, l.grid_spacing);
        for i in 0..N_NORMS {
            let _ = write!(s, " {:.4e}+-{:.1e}", l.errors[i], l.std_errors[i]);
        }
        s.push('\n');
    }
    let _ = writeln!(s);
    for (name, r) in NORM_NAMES.iter().zip(report.rates()) {
        match r {
            Some(r) => {
                let _ = writeln!(s, "rate {name} = {r:.4}");
            }
            None => {
                let _ = writeln!(s, "rate {name} = undefined");
            }
        }
    }
    s
}

/// Log-log plot of one norm against `k` or `h`.
pub fn plot_svg(report: &ErrorReport, norm: usize) -> String {
    let (w, h, pad) = (480.0, 360.0, 60.0);
    let xlabel = match report.mode {
        StudyMode::Temporal => "k",
        StudyMode::Spatial => "h",
    };
    let pts: Vec<(f64, f64)> = report
        .levels
        .iter()
        .filter(|l| l.errors[norm] > 0.0)
        .map(|l| {
            let x = match report.mode {
                StudyMode::Temporal => l.k,
                StudyMode::Spatial => l.h,
            };
            (x.log2(), l.errors[norm].log2())
        })
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let title = match report.rates()[norm] {
        Some(r) => format!("{} (rate {r:.3})", NORM_NAMES[norm]),
        None => NORM_NAMES[norm].to_string(),
    };
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>", w / 2.0);
    let _ = writeln!(
        s,
        "<path d=\"M{pad} {pad} V{} H{}\" fill=\"none\" stroke=\"black\"/>",
        h - pad,
        w - pad / 2.0
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">log2 {xlabel}</text>", w / 2.0, h - 15.0);
    let _ = writeln!(s, "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 15 {})\">log2 error</text>", h / 2.0, h / 2.0);
    if !pts.is_empty() {
        let range = |f: fn(&(f64, f64)) -> f64| {
            let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
            let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
            (lo, if hi > lo { hi } else { lo + 1.0 })
        };
        let (x0, x1) = range(|p| p.0);
        let (y0, y1) = range(|p| p.1);
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 1.5 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        for t in x0 as i64..=x1 as i64 {
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{t}</text>", sx(t as f64), h - pad + 14.0);
        }
        for t in y0 as i64..=y1 as i64 {
            let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{t}</text>", pad - 4.0, sy(t as f64) + 3.0);
        }
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.1} {:.1}", if i == 0 { "M" } else { " L" }, sx(x), sy(y));
        }
        let _ = writeln!(s, "<path d=\"{d}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>");
        for &(x, y) in &pts {
            let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"steelblue\"/>", sx(x), sy(y));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `errors.csv`, `rates.csv`, `summary.txt` and one SVG per norm into
/// `out_dir` (created if missing). Returns the written paths.
pub fn emit_results(report: &ErrorReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = vec![
        ("errors.csv".to_string(), errors_csv(report)),
        ("rates.csv".to_string(), rates_csv(report)),
        ("summary.txt".to_string(), summary_text(report)),
    ];
    for (i, name) in NORM_NAMES.iter().enumerate() {
        files.push((format!("{name}.svg"), plot_svg(report, i)));
    }
    let mut paths = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::report::{LevelErrors, StudyDiagnostics};

    fn report(n: usize) -> ErrorReport {
        ErrorReport {
            mode: StudyMode::Temporal,
            levels: (0..n)
                .map(|i| {
                    let k = 2f64.powi(-(i as i32) - 4);
                    LevelErrors {
                        level: i,
                        k,
                        h: 2f64.sqrt() / 16.0,
                        grid_spacing: 1.0 / 16.0,
                        errors: [k.sqrt(), 2.0 * k.sqrt(), k, k, 0.3 * k.sqrt()],
                        std_errors: [0.0; 5],
                    }
                })
                .collect(),
            samples: 3,
            seed: 1,
            diagnostics: StudyDiagnostics::default(),
            reference: "test".into(),
        }
    }

    #[test]
    fn empty_report_has_header_only() {
        let r = report(0);
        assert_eq!(errors_csv(&r), format!("{ERRORS_HEADER}\n"));
        assert_eq!(rates_csv(&r).lines().count(), 1);
    }

    #[test]
    fn five_levels_give_five_rows_and_points() {
        let r = report(5);
        assert_eq!(errors_csv(&r).lines().count(), 6);
        let svg = plot_svg(&r, 0);
        assert_eq!(svg.matches("<circle").count(), 5);
        let rates = rates_csv(&r);
        let row: Vec<f64> = rates.lines().nth(1).unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!((row[0] - 0.5).abs() < 1e-12 && (row[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let pa = emit_results(&report(4), &a).unwrap();
        let pb = emit_results(&report(4), &b).unwrap();
        assert_eq!(pa.len(), 3 + N_NORMS);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
}
