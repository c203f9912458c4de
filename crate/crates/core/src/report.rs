//! Report emission: CSV and JSON tables plus static SVG plots, all
//! derived deterministically from a [`ReportBundle`].
//!
//! Every CSV starts with a `# config <hash>` comment and every JSON
//! document carries a `config_hash` field, so mixed outputs from
//! different runs are detectable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{DiurnalCurve, BINS};
use crate::pipeline::ReportBundle;
use crate::rhythm;
use crate::spectral;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];
}

fn hour_label(bin: usize) -> String {
    format!("{:02}:{:02}", bin / 4, (bin % 4) * 15)
}

struct Emitter<'a> {
    out_dir: &'a Path,
    hash: &'a str,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), ReportError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|source| ReportError::Write { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), ReportError> {
        let mut text = format!("# config {}\n{header}\n", self.hash);
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write(name, &text)
    }
}

/// Writes the bundle out in the requested formats and returns the paths.
pub fn emit_report(
    bundle: &ReportBundle,
    out_dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| ReportError::Write { path: out_dir.to_path_buf(), source })?;
    let mut emitter = Emitter { out_dir, hash: &bundle.config_hash, written: Vec::new() };

    emitter.write(
        "run_config.toml",
        &format!("# config {}\n{}", bundle.config_hash, bundle.config.to_toml()),
    )?;

    if formats.contains(&Format::Csv) {
        emit_csvs(bundle, &mut emitter)?;
    }
    if formats.contains(&Format::Json) {
        let mut doc = serde_json::to_value(bundle).expect("bundle serializes");
        doc.as_object_mut()
            .unwrap()
            .insert("format_version".into(), serde_json::Value::from(1));
        emitter.write("bundle.json", &serde_json::to_string_pretty(&doc).unwrap())?;
    }
    if formats.contains(&Format::Svg) {
        emit_svgs(bundle, &mut emitter)?;
    }
    Ok(emitter.written)
}

fn emit_csvs(bundle: &ReportBundle, emitter: &mut Emitter) -> Result<(), ReportError> {
    let f = |v: f64| format!("{v:.9}");

    let rows: Vec<String> = bundle
        .assignments
        .iter()
        .map(|(user, cluster)| format!("{user},{cluster}"))
        .collect();
    emitter.csv("assignments.csv", "user,cluster", &rows)?;

    if let Some(sel) = &bundle.k_selection {
        let rows: Vec<String> = sel
            .scores
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{}",
                    s.k,
                    f(s.wcss),
                    f(s.calinski_harabasz),
                    f(s.davies_bouldin),
                    f(s.dunn),
                    f(s.silhouette)
                )
            })
            .collect();
        emitter.csv(
            "index_scores.csv",
            "k,wcss,calinski_harabasz,davies_bouldin,dunn,silhouette",
            &rows,
        )?;
        let votes: Vec<String> =
            sel.votes.iter().map(|(name, k)| format!("{name},{k}")).collect();
        emitter.csv("index_votes.csv", "index,k", &votes)?;
    }

    let mut curve_rows = Vec::new();
    let mut ratio_rows = Vec::new();
    let mut category_rows = Vec::new();
    let mut window_rows = Vec::new();
    let mut spectra_rows = Vec::new();
    let mut extrema_rows = Vec::new();
    let mut susceptibility_rows = Vec::new();
    let mut dip_rows = Vec::new();
    let mut lockdown_rows = Vec::new();
    for c in &bundle.clusters {
        for b in 0..BINS {
            curve_rows.push(format!(
                "{},{},{},{},{}",
                c.name,
                hour_label(b),
                f(c.raw_curve[b]),
                f(c.gaussian_curve[b]),
                f(c.spectral_curve[b])
            ));
            ratio_rows.push(format!(
                "{},{},{},{},{}",
                c.name,
                hour_label(b),
                if c.ratio_raw.mask[b] { f(c.ratio_raw.values[b]) } else { String::new() },
                f(c.ratio_spectral.values[b]),
                u8::from(c.ratio_raw.mask[b]),
            ));
            for (cat, series) in &c.category_ratios {
                category_rows.push(format!(
                    "{},{},{},{},{}",
                    c.name,
                    hour_label(b),
                    cat,
                    if series.mask[b] { f(series.values[b]) } else { String::new() },
                    u8::from(series.mask[b]),
                ));
            }
        }
        window_rows.push(format!(
            "{},{},{},{}",
            c.name,
            f(c.wake.onset),
            f(c.wake.end),
            u8::from(c.wake.degenerate)
        ));

        let spec = spectral::dft_forward(&DiurnalCurve::new(
            c.raw_curve.clone(),
            crate::activity::CurveKind::Spectral,
        ));
        for n in 0..=spectral::MAX_HARMONIC {
            spectra_rows.push(format!(
                "{},{},{},{}",
                c.name,
                n,
                f(spec.amplitudes[n]),
                f(spec.phases[n])
            ));
        }

        for (series, extrema) in [
            ("activity", &c.activity_extrema),
            ("activity_aligned", &c.activity_extrema_aligned),
            ("ratio", &c.ratio_extrema),
        ] {
            for e in extrema {
                let past_waking = rhythm::mod_time(e.hour, -c.wake.onset);
                extrema_rows.push(format!(
                    "{},{},{:?},{},{},{}",
                    c.name,
                    series,
                    e.kind,
                    f(e.hour),
                    f(past_waking),
                    f(e.value)
                ));
            }
        }

        for &bin in &c.susceptibility_bins {
            susceptibility_rows.push(format!("{},{},{}", c.name, bin, hour_label(bin)));
        }

        for (basis, dip) in [("raw", &c.dip_raw), ("spectral", &c.dip_spectral)] {
            dip_rows.push(format!(
                "{},{},{},{}",
                c.name,
                basis,
                f(dip.statistic),
                f(dip.p_value)
            ));
        }

        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        for (measure, inout) in [
            ("posts_per_day_user", &c.lockdown.posts_per_day_user),
            ("disinformative_per_day_user", &c.lockdown.disinformative_per_day_user),
            ("disinformative_ratio", &c.lockdown.disinformative_ratio),
        ] {
            lockdown_rows.push(format!(
                "{},{},{},{},{}",
                c.name,
                measure,
                f(inout.inside),
                opt(inout.outside),
                opt(inout.delta)
            ));
        }
    }
    emitter.csv("cluster_curves.csv", "cluster,bin_start,raw,gaussian,spectral", &curve_rows)?;
    emitter.csv("ratios.csv", "cluster,bin_start,raw,spectral,unmasked", &ratio_rows)?;
    emitter.csv(
        "ratio_categories.csv",
        "cluster,bin_start,category,value,unmasked",
        &category_rows,
    )?;
    emitter.csv("windows.csv", "cluster,onset,end,degenerate", &window_rows)?;
    emitter.csv("spectra.csv", "cluster,n,amplitude,phase", &spectra_rows)?;
    emitter.csv(
        "extrema.csv",
        "cluster,series,kind,clock_hour,hours_past_waking,value",
        &extrema_rows,
    )?;
    emitter.csv("susceptibility.csv", "cluster,bin,bin_start", &susceptibility_rows)?;
    emitter.csv("stats_dip.csv", "cluster,basis,dip,p_value", &dip_rows)?;
    emitter.csv(
        "lockdown.csv",
        "cluster,measure,lockdown,no_lockdown,change",
        &lockdown_rows,
    )?;

    for c in &bundle.clusters {
        let header = std::iter::once("month".to_string())
            .chain((0..BINS).map(hour_label))
            .collect::<Vec<_>>()
            .join(",");
        let rows: Vec<String> = c
            .heatmap_months
            .iter()
            .enumerate()
            .map(|(i, month)| {
                let mut row = month.clone();
                for b in 0..BINS {
                    row.push(',');
                    if c.heatmap_mask[i][b] {
                        row.push_str(&f(c.heatmap_values[i][b]));
                    }
                }
                row
            })
            .collect();
        emitter.csv(&format!("heatmap_{}.csv", c.name), &header, &rows)?;
    }

    let rows: Vec<String> = bundle
        .mwu_pairs
        .iter()
        .map(|r| format!("{},{},{},{}", r.row_cluster, r.col_cluster, f(r.u), f(r.p_value)))
        .collect();
    emitter.csv("stats_mwu_pairs.csv", "row_cluster,col_cluster,u,p_value", &rows)?;

    let rows: Vec<String> = bundle
        .day_night
        .iter()
        .map(|r| {
            format!(
                "{},{},{:?},{},{},{},{},{},{},{}",
                r.cluster,
                r.categories,
                r.boundary,
                f(r.day_start),
                f(r.day_end),
                r.n_day,
                r.n_night,
                f(r.u),
                f(r.p_value),
                r.lower
            )
        })
        .collect();
    emitter.csv(
        "stats_day_night.csv",
        "cluster,categories,boundary,day_start,day_end,n_day,n_night,u,p_value,lower",
        &rows,
    )?;

    let rows: Vec<String> = bundle
        .spearman_rows
        .iter()
        .map(|r| {
            format!("{},{},{},{},{},{}", r.cluster, r.target, r.basis, f(r.rho), f(r.p_value), r.n)
        })
        .collect();
    emitter.csv("stats_spearman.csv", "cluster,target,basis,rho,p_value,n", &rows)?;

    let mut rows = Vec::new();
    for (name, res) in [
        ("category_by_cluster", &bundle.chi_square_category_cluster),
        ("lockdown_by_disinformative", &bundle.chi_square_lockdown),
    ] {
        if let Some(res) = res {
            rows.push(format!(
                "{},{},{},{},{}",
                name,
                f(res.statistic),
                f(res.p_value),
                res.n[0],
                res.n[1]
            ));
        }
    }
    emitter.csv("stats_chi_square.csv", "test,statistic,p_value,rows,cols", &rows)?;

    let rows: Vec<String> = bundle
        .solar_monthly
        .iter()
        .map(|(month, rise, set)| format!("{month},{},{}", f(*rise), f(*set)))
        .collect();
    emitter.csv("solar_monthly.csv", "month,sunrise,sunset", &rows)?;

    Ok(())
}

// --- SVG plotting -----------------------------------------------------

const PALETTE: [&str; 8] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn svg_header(width: u32, height: u32, hash: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<!-- config {hash} -->\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Line chart of one series per cluster over the day axis.
fn curve_plot(
    title: &str,
    series: &[(String, Vec<f64>)],
    hash: &str,
) -> String {
    let (w, h) = (860u32, 420u32);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 40.0);
    let plot_w = w as f64 - left - right;
    let plot_h = h as f64 - top - bottom;

    let mut max_v = f64::MIN;
    let mut min_v = f64::MAX;
    for (_, vals) in series {
        for v in vals {
            max_v = max_v.max(*v);
            min_v = min_v.min(*v);
        }
    }
    if !max_v.is_finite() || max_v == min_v {
        max_v = min_v + 1.0;
    }
    let pad = 0.05 * (max_v - min_v);
    let (lo, hi) = (min_v - pad, max_v + pad);

    let mut svg = svg_header(w, h, hash);
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        left
    );
    // axes and hour ticks
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for hour in (0..=24).step_by(6) {
        let x = left + plot_w * hour as f64 / 24.0;
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ccc\"/>\n\
             <text x=\"{x:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{hour:02}:00</text>\n",
            top,
            top + plot_h,
            top + plot_h + 16.0
        );
    }

    for (i, (name, vals)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for (b, v) in vals.iter().enumerate() {
            let x = left + plot_w * (b as f64 + 0.5) / BINS as f64;
            let y = top + plot_h * (1.0 - (v - lo) / (hi - lo));
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            points.trim_end()
        );
        let ly = top + 14.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{ly:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{name}</text>\n",
            left + plot_w - 130.0,
            left + plot_w - 114.0,
            ly + 9.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Month-by-bin heatmap; missing cells are grey.
fn heatmap_plot(name: &str, months: &[String], values: &[Vec<f64>], mask: &[Vec<bool>], hash: &str) -> String {
    let cell_w = 8.0;
    let cell_h = 14.0;
    let left = 70.0;
    let top = 40.0;
    let w = (left + cell_w * BINS as f64 + 20.0) as u32;
    let h = (top + cell_h * months.len() as f64 + 30.0) as u32;

    let mut max_v: f64 = 1e-12;
    for (row, m) in values.iter().zip(mask) {
        for (v, ok) in row.iter().zip(m) {
            if *ok {
                max_v = max_v.max(*v);
            }
        }
    }

    let mut svg = svg_header(w, h, hash);
    let _ = writeln!(
        svg,
        "<text x=\"{left}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">\
         disinformative ratio by month and time of day: {name}</text>"
    );
    for (i, month) in months.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{month}</text>",
            left - 6.0,
            y + cell_h - 3.0
        );
        for b in 0..BINS {
            let x = left + cell_w * b as f64;
            let fill = if mask[i][b] {
                let t = (values[i][b] / max_v).clamp(0.0, 1.0);
                let channel = (255.0 - t * 200.0) as u8;
                format!("rgb(255,{channel},{channel})")
            } else {
                "#bbbbbb".to_string()
            };
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{fill}\"/>"
            );
        }
    }
    for hour in (0..=24).step_by(6) {
        let x = left + cell_w * (hour * 4) as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{hour:02}:00</text>",
            top + cell_h * months.len() as f64 + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Clock-face summary: radial activity, wake window and susceptibility arcs.
fn clockface_plot(cluster: &crate::pipeline::ClusterReport, hash: &str) -> String {
    let size = 420.0;
    let cx = size / 2.0;
    let cy = size / 2.0 + 10.0;
    let r_max = 150.0;
    let r_base = 40.0;

    let angle_of = |hour: f64| (hour / 24.0) * std::f64::consts::TAU - std::f64::consts::FRAC_PI_2;
    let point_at = |hour: f64, r: f64| {
        let a = angle_of(hour);
        (cx + r * a.cos(), cy + r * a.sin())
    };

    let max_v = cluster.spectral_curve.iter().cloned().fold(1e-12f64, f64::max);
    let mut svg = svg_header(size as u32, size as u32 + 20, hash);
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">clock face: {}</text>",
        cluster.name
    );

    // hour ring
    let _ = writeln!(
        svg,
        "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r_max}\" fill=\"none\" stroke=\"#999\"/>"
    );
    for hour in (0..24).step_by(3) {
        let (x, y) = point_at(hour as f64, r_max + 14.0);
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{hour}</text>"
        );
    }

    // radial activity polygon
    let mut points = String::new();
    for b in 0..BINS {
        let hour = (b as f64 + 0.5) / 4.0;
        let v = cluster.spectral_curve[b].max(0.0) / max_v;
        let (x, y) = point_at(hour, r_base + v * (r_max - r_base - 10.0));
        let _ = write!(points, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(
        svg,
        "<polygon points=\"{}\" fill=\"#1f77b480\" stroke=\"#1f77b4\"/>",
        points.trim_end()
    );

    // wake window arc (grey marks the complement: prolonged wakefulness)
    let arc = |from: f64, to: f64, r: f64, color: &str, width: f64| -> String {
        let span = (to - from).rem_euclid(24.0);
        let (x0, y0) = point_at(from, r);
        let (x1, y1) = point_at(to, r);
        let large = u8::from(span > 12.0);
        format!(
            "<path d=\"M {x0:.2} {y0:.2} A {r} {r} 0 {large} 1 {x1:.2} {y1:.2}\" \
             fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n"
        )
    };
    svg.push_str(&arc(cluster.wake.end, cluster.wake.onset, r_max - 4.0, "#555555", 6.0));

    // susceptibility arcs in red on the outer ring
    for &bin in &cluster.susceptibility_bins {
        let from = bin as f64 / 4.0;
        svg.push_str(&arc(from, from + 0.25, r_max + 6.0, "#d62728", 5.0));
    }

    svg.push_str("</svg>\n");
    svg
}

fn emit_svgs(bundle: &ReportBundle, emitter: &mut Emitter) -> Result<(), ReportError> {
    let activity: Vec<(String, Vec<f64>)> = bundle
        .clusters
        .iter()
        .map(|c| (c.name.clone(), c.spectral_curve.clone()))
        .collect();
    emitter.write(
        "activity.svg",
        &curve_plot("smoothed diurnal activity", &activity, &bundle.config_hash),
    )?;

    let ratios: Vec<(String, Vec<f64>)> = bundle
        .clusters
        .iter()
        .map(|c| (c.name.clone(), c.ratio_spectral.values.clone()))
        .collect();
    emitter.write(
        "ratios.svg",
        &curve_plot("smoothed disinformative ratio", &ratios, &bundle.config_hash),
    )?;

    for c in &bundle.clusters {
        emitter.write(
            &format!("heatmap_{}.svg", c.name),
            &heatmap_plot(&c.name, &c.heatmap_months, &c.heatmap_values, &c.heatmap_mask, &bundle.config_hash),
        )?;
        emitter.write(&format!("clockface_{}.svg", c.name), &clockface_plot(c, &bundle.config_hash))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::pipeline::run_on_table;
    use crate::synth;
    use std::collections::BTreeMap;

    fn bundle() -> ReportBundle {
        let mut spec = synth::demo_spec(8, (120, 160));
        spec.populations.truncate(2);
        let (table, _) = synth::generate_table(&spec, 9).unwrap();
        let config = RunConfig {
            dip_bootstrap: 50,
            infrequent_threshold: 50,
            threads: 1,
            ..RunConfig::default()
        };
        run_on_table(table, BTreeMap::new(), &config).unwrap()
    }

    #[test]
    fn csv_only_emits_no_plots() {
        let bundle = bundle();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&bundle, dir.path(), &[Format::Csv]).unwrap();
        assert!(files.iter().all(|p| p.extension().unwrap() != "svg"));
        assert!(files.iter().any(|p| p.file_name().unwrap() == "assignments.csv"));
    }

    #[test]
    fn heatmap_dimensions_match_months_by_bins() {
        let bundle = bundle();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&bundle, dir.path(), &[Format::Csv]).unwrap();
        let c = &bundle.clusters[0];
        let text =
            std::fs::read_to_string(dir.path().join(format!("heatmap_{}.csv", c.name))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // comment + header + one row per month
        assert_eq!(lines.len(), 2 + c.heatmap_months.len());
        assert_eq!(lines[1].split(',').count(), 1 + BINS);
        for line in &lines[2..] {
            assert_eq!(line.split(',').count(), 1 + BINS);
        }
    }

    #[test]
    fn every_csv_embeds_the_config_hash() {
        let bundle = bundle();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&bundle, dir.path(), &[Format::Csv, Format::Json]).unwrap();
        for path in files {
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(
                text.contains(&bundle.config_hash),
                "{} lacks the config hash",
                path.display()
            );
        }
    }

    #[test]
    fn plots_regenerate_identically() {
        let bundle = bundle();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let files_a = emit_report(&bundle, dir_a.path(), &Format::ALL).unwrap();
        let files_b = emit_report(&bundle, dir_b.path(), &Format::ALL).unwrap();
        assert_eq!(files_a.len(), files_b.len());
        for (a, b) in files_a.iter().zip(&files_b) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(
                std::fs::read(a).unwrap(),
                std::fs::read(b).unwrap(),
                "{} differs",
                a.display()
            );
        }
    }
}
