//! Model files, CSV tables, the scree SVG and plain-text reports.
//!
//! Every CSV starts with a `# generated-by catpca <command>` line followed by
//! a header row; reals are printed with six decimals.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::als::{CatpcaModel, DimensionSummary, IterationRecord, VariableQuantification};
use crate::data::ClassSummary;
use crate::error::{Error, Result};
use crate::extraction::{CommunalityTable, CriterionResult, ExtractionResult, LoadingMatrix, Spectrum};
use crate::profile::{Assignment, ProfileReport, SkewDirection};
use crate::validation::{CriterionSummary, ValidationReport};

pub const MODEL_FORMAT: &str = "catpca-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    format: String,
    version: u32,
    model: T,
}

#[derive(Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
}

/// Writes `{"format": "catpca-model", "version": 1, "model": {...}}`.
pub fn write_model<W: Write>(model: &CatpcaModel, writer: W) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model,
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

/// Reads a model file, rejecting other formats and versions before
/// looking at the payload.
pub fn read_model<R: Read>(mut reader: R) -> Result<CatpcaModel> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header: ModelHeader = serde_json::from_str(&text)?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Config(format!("not a model file (format `{}`)", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile<CatpcaModel> = serde_json::from_str(&text)?;
    Ok(file.model)
}

pub fn save_model(model: &CatpcaModel, path: &Path) -> Result<()> {
    let mut text = Vec::new();
    write_model(model, &mut text)?;
    text.push(b'\n');
    write_file(path, &text)
}

pub fn load_model(path: &Path) -> Result<CatpcaModel> {
    read_model(open(path)?)
}

pub(crate) fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| Error::Path {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Path {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| Error::Path {
        path: path.to_path_buf(),
        source,
    })
}

/// Six decimals, with negative zero printed as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// A header plus string rows, ready for CSV or text output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, command: &str) -> Result<String> {
        let mut out = format!("# generated-by catpca {command}\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        String::from_utf8(out).map_err(|e| Error::InvalidTable(e.to_string()))
    }

    /// Left-aligned columns separated by two spaces.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (c, cell) in cells.iter().enumerate() {
                if c > 0 {
                    s.push_str("  ");
                }
                let _ = write!(s, "{cell:<w$}", w = widths[c]);
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Iteration history: VAF total and increase, loss total and its two parts.
pub fn history_table(history: &[IterationRecord]) -> Table {
    let mut t = Table::new([
        "iteration",
        "vaf_total",
        "vaf_increase",
        "loss_total",
        "loss_centroid",
        "loss_restriction",
    ]);
    for r in history {
        t.push(vec![
            r.iteration.to_string(),
            fmt6(r.vaf_total),
            fmt6(r.vaf_increase),
            fmt6(r.loss_total),
            fmt6(r.loss_centroid),
            fmt6(r.loss_restriction),
        ]);
    }
    t
}

/// Model summary: per dimension alpha, eigenvalue, percent and cumulative percent.
pub fn summary_table(summary: &[DimensionSummary]) -> Table {
    let mut t = Table::new([
        "dimension",
        "cronbach_alpha",
        "eigenvalue",
        "percent_of_variance",
        "cumulative_percent",
    ]);
    for d in summary {
        t.push(vec![
            d.dimension.to_string(),
            opt6(d.cronbach_alpha),
            fmt6(d.eigenvalue),
            fmt6(d.percent),
            fmt6(d.cumulative_percent),
        ]);
    }
    t
}

fn criterion_column(r: &CriterionResult) -> &'static str {
    use crate::extraction::Criterion::*;
    match r.criterion {
        Eigenvalue => "eigenvalue_criterion",
        VarianceExplained => "variance_explained",
        ScreeKnee => "scree_knee",
        Communality => "communality",
    }
}

/// One row per dimension; each criterion column shows the cumulative
/// percent on the dimensions it retains and is blank elsewhere.
pub fn criteria_table(spectrum: &Spectrum, results: &[CriterionResult]) -> Table {
    let mut t = Table::new(
        ["dimension", "eigenvalue", "cumulative_percent"]
            .into_iter()
            .chain(results.iter().map(criterion_column)),
    );
    for (i, &eig) in spectrum.eigenvalues().iter().enumerate() {
        let d = i + 1;
        let cum = fmt6(spectrum.cumulative_percent(d));
        let mut row = vec![d.to_string(), fmt6(eig), cum.clone()];
        row.extend(results.iter().map(|r| {
            if r.retained_dimensions.contains(&d) {
                cum.clone()
            } else {
                String::new()
            }
        }));
        t.push(row);
    }
    t
}

pub fn scree_table(spectrum: &Spectrum) -> Table {
    let mut t = Table::new(["dimension", "eigenvalue"]);
    for (i, &e) in spectrum.eigenvalues().iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt6(e)]);
    }
    t
}

/// Line plot of the spectrum with the knee circled; the marker carries a
/// `data-knee` attribute naming its dimension.
pub fn scree_svg(spectrum: &Spectrum, knee: Option<usize>) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let eig = spectrum.eigenvalues();
    let p = eig.len();
    let top = eig.iter().copied().fold(0.0f64, f64::max).max(1e-12);
    let x = |d: usize| pad + (w - 2.0 * pad) * if p > 1 { (d - 1) as f64 / (p - 1) as f64 } else { 0.5 };
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v.max(0.0) / top);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"  <rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"  <line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad
    );
    let points: Vec<String> = (1..=p).map(|d| format!("{:.2},{:.2}", x(d), y(eig[d - 1]))).collect();
    let _ = writeln!(
        svg,
        r#"  <polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    for d in 1..=p {
        let _ = writeln!(
            svg,
            r#"  <circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"><title>dimension {d}: {}</title></circle>"#,
            x(d),
            y(eig[d - 1]),
            fmt6(eig[d - 1])
        );
    }
    if let Some(k) = knee.filter(|&k| k >= 1 && k <= p) {
        let _ = writeln!(
            svg,
            r#"  <circle class="knee" data-knee="{k}" cx="{:.2}" cy="{:.2}" r="8" fill="none" stroke="crimson" stroke-width="2"/>"#,
            x(k),
            y(eig[k - 1])
        );
    }
    let _ = writeln!(
        svg,
        r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">dimension</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"  <text x="14" y="{:.2}" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.2})">eigenvalue</text>"#,
        h / 2.0,
        h / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Loadings with one `dim_k` column per dimension label.
pub fn loadings_table(loadings: &LoadingMatrix) -> Table {
    let mut t = Table::new(
        std::iter::once("variable".to_string()).chain(loadings.dimensions.iter().map(|d| format!("dim_{d}"))),
    );
    for (name, row) in loadings.variables.iter().zip(&loadings.values) {
        t.push(std::iter::once(name.clone()).chain(row.iter().map(|&v| fmt6(v))).collect());
    }
    t
}

/// Squared loadings per dimension, their sum, and the pass flag.
pub fn communality_table(table: &CommunalityTable) -> Table {
    let mut t = Table::new(
        std::iter::once("variable".to_string())
            .chain(table.dimensions.iter().map(|d| format!("dim_{d}")))
            .chain(["communality".to_string(), "passes".to_string()]),
    );
    for r in &table.rows {
        t.push(
            std::iter::once(r.variable.clone())
                .chain(r.squared.iter().map(|&v| fmt6(v)))
                .chain([fmt6(r.communality), r.passes.to_string()])
                .collect(),
        );
    }
    t
}

/// One row per category (and per dimension for multiple nominal variables).
pub fn quantification_table(model: &CatpcaModel) -> Table {
    let mut t = Table::new([
        "variable",
        "level",
        "category",
        "frequency",
        "dimension",
        "quantified_value",
    ]);
    for (info, q) in model.variables.iter().zip(&model.quantifications) {
        let level = serde_json::to_value(info.level)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        match q {
            VariableQuantification::Category(c) => {
                for ((cat, f), v) in c.categories.iter().zip(&c.frequencies).zip(&c.values) {
                    t.push(vec![
                        info.name.clone(),
                        level.clone(),
                        cat.to_string(),
                        f.to_string(),
                        String::new(),
                        opt6(*v),
                    ]);
                }
            }
            VariableQuantification::Numeric {
                affine,
                values,
                frequencies,
                ..
            } => {
                for (v, f) in values.iter().zip(frequencies) {
                    t.push(vec![
                        info.name.clone(),
                        level.clone(),
                        v.to_string(),
                        f.to_string(),
                        String::new(),
                        fmt6(affine.apply(*v)),
                    ]);
                }
            }
            VariableQuantification::Multiple {
                categories,
                frequencies,
                centroids,
                ..
            } => {
                for ((cat, f), c) in categories.iter().zip(frequencies).zip(centroids) {
                    for d in 0..model.dimensions() {
                        t.push(vec![
                            info.name.clone(),
                            level.clone(),
                            cat.to_string(),
                            f.to_string(),
                            (d + 1).to_string(),
                            opt6(c.as_ref().map(|c| c[d])),
                        ]);
                    }
                }
            }
        }
    }
    t
}

/// Object scores with the source row ids.
pub fn scores_table(model: &CatpcaModel) -> Table {
    let mut t = Table::new(
        std::iter::once("row_id".to_string()).chain((1..=model.dimensions()).map(|d| format!("dim_{d}"))),
    );
    for (i, id) in model.row_ids.iter().enumerate() {
        t.push(
            std::iter::once(id.to_string())
                .chain(model.object_scores.row(i).iter().map(|&v| fmt6(v)))
                .collect(),
        );
    }
    t
}

/// Obesity class frequencies with the mode flagged.
pub fn class_table(summary: &ClassSummary) -> Table {
    let mut t = Table::new(["class", "label", "frequency", "percent", "mode"]);
    for (i, r) in summary.rows.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            r.class.label().to_string(),
            r.count.to_string(),
            fmt6(r.percent),
            r.is_mode.to_string(),
        ]);
    }
    t.push(vec![
        String::new(),
        "total".into(),
        summary.total.to_string(),
        fmt6(100.0),
        String::new(),
    ]);
    t
}

fn criterion_cells(c: &CriterionSummary) -> (String, String) {
    (
        c.dimensions.map(|d| d.to_string()).unwrap_or_default(),
        opt6(c.cumulative_percent),
    )
}

/// Side-by-side comparison: `quantity, train, test, delta`.
pub fn validation_table(report: &ValidationReport) -> Table {
    let mut t = Table::new(["quantity", "train", "test", "delta"]);
    let count = |o: Option<usize>| o.map(|n| n.to_string()).unwrap_or_default();
    t.push(vec![
        "objects".into(),
        count(report.train.n_objects),
        count(report.test.n_objects),
        String::new(),
    ]);
    t.push(vec![
        "variables".into(),
        report.train.n_variables.to_string(),
        report.test.n_variables.to_string(),
        String::new(),
    ]);
    t.push(vec![
        "retained_dimensions".into(),
        report.train.dimensions.to_string(),
        report.test.dimensions.to_string(),
        report.dimension_count_delta.to_string(),
    ]);
    t.push(vec![
        "cumulative_percent".into(),
        fmt6(report.train.cumulative_percent),
        fmt6(report.test.cumulative_percent),
        fmt6(report.vaf_percent_delta),
    ]);
    for (a, b) in report.train.criteria.iter().zip(&report.test.criteria) {
        let (ad, ac) = criterion_cells(a);
        let (bd, bc) = criterion_cells(b);
        let name = a.criterion.name();
        t.push(vec![format!("{name}_dimensions"), ad, bd, String::new()]);
        t.push(vec![format!("{name}_cumulative_percent"), ac, bc, String::new()]);
    }
    let n = report.train.leading_eigenvalues.len().max(report.test.leading_eigenvalues.len());
    for i in 0..n {
        t.push(vec![
            format!("eigenvalue_{}", i + 1),
            opt6(report.train.leading_eigenvalues.get(i).copied()),
            opt6(report.test.leading_eigenvalues.get(i).copied()),
            String::new(),
        ]);
    }
    t.push(vec!["verdict".into(), report.verdict.to_string(), String::new(), String::new()]);
    t
}

pub fn validation_text(report: &ValidationReport) -> String {
    let mut s = String::from("Split validation\n\n");
    s.push_str(&validation_table(report).to_text());
    let _ = writeln!(
        s,
        "\nTolerances: {} dimensions, {} percentage points.",
        report.tolerances.dimensions,
        fmt6(report.tolerances.vaf_percent)
    );
    let _ = writeln!(
        s,
        "Dimension delta {} and VAF delta {} (train minus test): {}.",
        report.dimension_count_delta,
        fmt6(report.vaf_percent_delta),
        report.verdict
    );
    s
}

/// Variable, component and weight, in input order.
pub fn assignment_table(assignments: &[Assignment]) -> Table {
    let mut t = Table::new(["variable", "component", "weight"]);
    for a in assignments {
        t.push(vec![a.variable.clone(), a.component.to_string(), fmt6(a.loading)]);
    }
    t
}

pub fn membership_table(report: &ProfileReport) -> Table {
    let mut t = Table::new(["component", "members", "vaf_percent"]);
    for c in &report.components {
        t.push(vec![c.component.to_string(), c.members.len().to_string(), opt6(c.vaf_percent)]);
    }
    t
}

fn direction(d: SkewDirection) -> &'static str {
    match d {
        SkewDirection::Left => "left",
        SkewDirection::Right => "right",
        SkewDirection::Symmetric => "symmetric",
    }
}

pub fn skew_table(report: &ProfileReport) -> Table {
    let mut t = Table::new(["component", "variable", "loading", "skew", "direction"]);
    for c in &report.components {
        for m in &c.members {
            let (value, dir) = match &m.skew {
                Some(s) => (fmt6(s.value), direction(s.direction).to_string()),
                None => (String::new(), String::new()),
            };
            t.push(vec![c.component.to_string(), m.variable.clone(), fmt6(m.loading), value, dir]);
        }
    }
    t
}

pub fn profile_text(report: &ProfileReport) -> String {
    let mut s = String::from("Component profiles\n");
    for c in &report.components {
        let _ = write!(s, "\nComponent {} ({} variables", c.component, c.members.len());
        if let Some(v) = c.vaf_percent {
            let _ = write!(s, ", {}% of variance", fmt6(v));
        }
        s.push_str(")\n");
        for m in &c.members {
            let _ = write!(
                s,
                "  {} loading {} ({})",
                m.variable,
                fmt6(m.loading),
                if m.is_positive() { "positive" } else { "negative" }
            );
            if let Some(k) = &m.skew {
                let _ = write!(s, ", skew {} {}", fmt6(k.value), direction(k.direction));
            }
            s.push('\n');
            for (label, value, count) in &m.categories {
                let _ = writeln!(s, "    {label:>10}  n={count:<6} q={}", opt6(*value));
            }
        }
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn extraction_text(result: &ExtractionResult) -> String {
    let mut s = String::from("Component extraction\n\n");
    for p in &result.provenance {
        let _ = writeln!(s, "- {p}");
    }
    let _ = writeln!(s, "\nSelected variables ({}):", result.selected_variables.len());
    for v in &result.selected_variables {
        let _ = writeln!(s, "  {v}");
    }
    for w in &result.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn fit_text(model: &CatpcaModel) -> String {
    let mut s = String::new();
    let last = model.history.last();
    let _ = writeln!(
        s,
        "CATPCA fit: {} objects, {} variables, {} dimensions",
        model.n_objects(),
        model.n_variables(),
        model.dimensions()
    );
    if let Some(r) = last {
        let _ = writeln!(
            s,
            "Stopped after {} iterations ({}), VAF {}",
            r.iteration,
            if model.converged { "converged" } else { "iteration limit" },
            fmt6(r.vaf_total)
        );
    }
    s.push_str("\nModel summary\n");
    s.push_str(&summary_table(&model.summary()).to_text());
    for w in &model.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
