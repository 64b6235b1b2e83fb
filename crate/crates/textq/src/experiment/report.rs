//! Sweep and comparison reports: CSV rows, a JSON envelope, and an SVG
//! line chart of AUC against corruption rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Echo of the sweep configuration, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEcho {
    pub rates: Vec<f64>,
    pub feature_modes: Vec<String>,
    pub model_kinds: Vec<String>,
    pub seed: u64,
    pub test_frac: f64,
    pub replicates: usize,
    pub top_k: usize,
    pub min_freq: usize,
    pub punct_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub rate: f64,
    pub replicate: usize,
    pub feature_mode: String,
    pub model_kind: String,
    pub roc_auc: Option<f64>,
    pub vocab_size: Option<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub config: SweepEcho,
    pub corpus_name: String,
    pub corpus_provenance: String,
    pub n_instances: usize,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(format!("serialize: {e}")))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Invalid(format!("parse report: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "rate,replicate,feature_mode,model_kind,roc_auc,vocab_size,n_train,n_test,wall_time_secs,error\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.rate,
                c.replicate,
                c.feature_mode,
                c.model_kind,
                c.roc_auc.map(|v| v.to_string()).unwrap_or_default(),
                c.vocab_size.map(|v| v.to_string()).unwrap_or_default(),
                c.n_train,
                c.n_test,
                c.wall_time_secs,
                c.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        out
    }

    /// Zeroes the timing fields, which are the only nondeterministic part
    /// of a report.
    pub fn strip_wall_times(&mut self) {
        for c in &mut self.cells {
            c.wall_time_secs = 0.0;
        }
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    /// Mean AUC over replicates for one (mode, kind) series, by rate.
    pub fn mean_auc_series(&self, feature_mode: &str, model_kind: &str) -> Vec<(f64, f64)> {
        let mut per_rate: Vec<(f64, Vec<f64>)> = Vec::new();
        for c in &self.cells {
            if c.feature_mode != feature_mode || c.model_kind != model_kind {
                continue;
            }
            let Some(auc) = c.roc_auc else { continue };
            match per_rate.iter_mut().find(|(r, _)| *r == c.rate) {
                Some((_, aucs)) => aucs.push(auc),
                None => per_rate.push((c.rate, vec![auc])),
            }
        }
        per_rate.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        per_rate
            .into_iter()
            .map(|(r, aucs)| (r, aucs.iter().sum::<f64>() / aucs.len() as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub feature_mode: String,
    pub model_kind: String,
    pub auc_original: f64,
    pub auc_corrected: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub config: SweepEcho,
    pub n_instances: usize,
}

impl CompareReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(format!("serialize: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_mode,model_kind,auc_original,auc_corrected,delta\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.feature_mode, r.model_kind, r.auc_original, r.auc_corrected, r.delta
            ));
        }
        out
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders mean AUC against corruption rate as an SVG line chart, one
/// series per (feature mode, model kind).
pub fn plot_svg(report: &SweepReport) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for mode in &report.config.feature_modes {
        for kind in &report.config.model_kinds {
            let points = report.mean_auc_series(mode, kind);
            if !points.is_empty() {
                series.push((format!("{mode}/{kind}"), points));
            }
        }
    }
    let xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|(x, _)| *x)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|(_, y)| *y)).collect();
    let x_max = xs.iter().copied().fold(0.05_f64, f64::max);
    let y_min = (ys.iter().copied().fold(1.0_f64, f64::min) - 0.05).max(0.0);
    let y_max = (ys.iter().copied().fold(0.0_f64, f64::max) + 0.02).min(1.0);
    let y_span = (y_max - y_min).max(1e-6);

    let x_of = |rate: f64| left + (rate / x_max) * plot_w;
    let y_of = |auc: f64| top + (1.0 - (auc - y_min) / y_span) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    // x ticks at the swept rates
    let mut tick_rates: Vec<f64> = report.config.rates.clone();
    tick_rates.dedup();
    for rate in &tick_rates {
        let x = x_of(*rate);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            top + plot_h,
            top + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}%</text>\n",
            top + plot_h + 20.0,
            rate * 100.0
        ));
    }
    // y ticks
    for i in 0..=4 {
        let auc = y_min + y_span * f64::from(i) / 4.0;
        let y = y_of(auc);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{left}\" y2=\"{y}\" stroke=\"black\"/>\n",
            left - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{auc:.3}</text>\n",
            left - 9.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">error rate</text>\n",
        left + plot_w / 2.0,
        height - 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">ROC-AUC</text>\n",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    ));
    // series
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", x_of(*x), y_of(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for (x, y) in points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                x_of(*x),
                y_of(*y)
            ));
        }
        // legend
        let ly = top + 14.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            left + plot_w - 150.0,
            left + plot_w - 130.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{name}</text>\n",
            left + plot_w - 125.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
