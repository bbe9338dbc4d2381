//! Component retention: eigenvalue, variance-explained and scree-knee
//! criteria, the loading filter, and squared-loading communalities.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::als::CatpcaModel;
use crate::error::{Error, Result};

/// Default strict eigenvalue cut-off.
pub const EIGENVALUE_THRESHOLD: f64 = 1.0;
/// Default lower bound for dimensions admitted as "close to" the cut-off.
pub const NEAR_THRESHOLD: f64 = 0.85;
pub const LOADING_THRESHOLD: f64 = 0.50;
pub const LOADING_TOLERANCE: f64 = 0.04;
pub const COMMUNALITY_THRESHOLD: f64 = 0.50;

/// Eigenvalues sorted in descending order, with the number of analysed
/// variables they are expressed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n_variables: usize,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>, n_variables: usize) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if n_variables == 0 {
            return Err(Error::Config("spectrum needs a positive variable count".into()));
        }
        if let Some(i) = eigenvalues.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTable(format!("eigenvalue {} is not finite", i + 1)));
        }
        if let Some(w) = eigenvalues.windows(2).position(|w| w[1] > w[0] + 1e-9 * w[0].abs().max(1.0)) {
            return Err(Error::InvalidTable(format!(
                "eigenvalues must be sorted in descending order (dimension {} exceeds dimension {})",
                w + 2,
                w + 1
            )));
        }
        Ok(Spectrum {
            eigenvalues,
            n_variables,
        })
    }

    pub fn from_model(model: &CatpcaModel) -> Result<Self> {
        Self::new(model.eigenvalues.clone(), model.n_variables())
    }

    /// Reads the `dimension` and `eigenvalue` columns of a model-summary CSV.
    /// Other columns are ignored; `#` lines are comments.
    pub fn from_summary_csv<R: Read>(source: R, n_variables: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let header = reader.headers()?.clone();
        let column = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidTable(format!("summary has no `{name}` column")))
        };
        let (dim_col, eig_col) = (column("dimension")?, column("eigenvalue")?);
        let mut eigenvalues = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let dim: usize = record[dim_col]
                .parse()
                .map_err(|_| Error::InvalidTable(format!("bad dimension `{}`", &record[dim_col])))?;
            if dim != i + 1 {
                return Err(Error::InvalidTable(format!("expected dimension {}, found {dim}", i + 1)));
            }
            let value: f64 = record[eig_col]
                .parse()
                .map_err(|_| Error::InvalidTable(format!("bad eigenvalue `{}`", &record[eig_col])))?;
            eigenvalues.push(value);
        }
        Self::new(eigenvalues, n_variables)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `100 · Σ_{i≤k} λ_i / m`.
    pub fn cumulative_percent(&self, k: usize) -> f64 {
        100.0 * self.eigenvalues[..k].iter().sum::<f64>() / self.n_variables as f64
    }

    fn result(&self, criterion: Criterion, k: usize, parameters: BTreeMap<String, f64>) -> CriterionResult {
        CriterionResult {
            criterion,
            retained_dimensions: (1..=k).collect(),
            cumulative_vaf_percent: if k == 0 { 0.0 } else { self.cumulative_percent(k) },
            parameters,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Eigenvalue,
    VarianceExplained,
    Communality,
    ScreeKnee,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Eigenvalue => "eigenvalue",
            Criterion::VarianceExplained => "variance_explained",
            Criterion::Communality => "communality",
            Criterion::ScreeKnee => "scree_knee",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: Criterion,
    /// 1-based dimensions; always a prefix `1..=k`.
    pub retained_dimensions: Vec<usize>,
    pub cumulative_vaf_percent: f64,
    pub parameters: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl CriterionResult {
    pub fn count(&self) -> usize {
        self.retained_dimensions.len()
    }
}

/// Keeps every dimension with `λ ≥ threshold`, then the consecutive
/// dimensions that follow with `λ ≥ near_threshold`.
pub fn eigenvalue_criterion(spectrum: &Spectrum, threshold: f64, near_threshold: f64) -> Result<CriterionResult> {
    let eig = spectrum.eigenvalues();
    let strict = eig.iter().take_while(|&&v| v >= threshold).count();
    let extended = strict + eig[strict..].iter().take_while(|&&v| v >= near_threshold).count();
    let params = BTreeMap::from([
        ("threshold".to_string(), threshold),
        ("near_threshold".to_string(), near_threshold),
        ("strict_count".to_string(), strict as f64),
    ]);
    let mut result = spectrum.result(Criterion::Eigenvalue, extended, params);
    if extended == 0 {
        result
            .warnings
            .push(format!("no eigenvalue reaches {near_threshold}; nothing retained"));
    }
    Ok(result)
}

/// Smallest prefix whose cumulative `Σ λ_i / m` reaches `target_fraction`.
pub fn variance_explained_criterion(spectrum: &Spectrum, target_fraction: f64) -> Result<CriterionResult> {
    let m = spectrum.n_variables() as f64;
    let max = spectrum.eigenvalues().iter().sum::<f64>() / m;
    if !(target_fraction > 0.0) || target_fraction > max + 1e-12 {
        return Err(Error::UnreachableTarget {
            target: target_fraction,
            max,
        });
    }
    let mut total = 0.0;
    let mut k = spectrum.len();
    for (i, v) in spectrum.eigenvalues().iter().enumerate() {
        total += v;
        // A hair of slack so a target equal to the full sum is met despite rounding.
        if total / m >= target_fraction - 1e-12 {
            k = i + 1;
            break;
        }
    }
    let params = BTreeMap::from([("target_fraction".to_string(), target_fraction)]);
    Ok(spectrum.result(Criterion::VarianceExplained, k, params))
}

/// How the knee of a scree curve is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneeRule {
    /// Largest discrete second difference `λ_{k−1} − 2λ_k + λ_{k+1}`.
    #[default]
    MaxCurvature,
    /// Largest perpendicular distance to the chord from `(1, λ_1)` to `(p, λ_p)`.
    MaxDistance,
}

/// Knee of the scree curve; dimensions `1..=knee` are retained. Ties go to
/// the smallest index, and a curve with no bend gets a flatness warning.
pub fn scree_knee(spectrum: &Spectrum, rule: KneeRule) -> Result<CriterionResult> {
    let eig = spectrum.eigenvalues();
    let p = eig.len();
    if p < 3 {
        return Err(Error::SpectrumTooShort { len: p, min: 3 });
    }
    let scores: Vec<f64> = match rule {
        KneeRule::MaxCurvature => (1..p - 1).map(|i| eig[i - 1] - 2.0 * eig[i] + eig[i + 1]).collect(),
        KneeRule::MaxDistance => {
            let (x1, y1, x2, y2) = (1.0, eig[0], p as f64, eig[p - 1]);
            let norm = ((y2 - y1).powi(2) + (x2 - x1).powi(2)).sqrt();
            (1..p - 1)
                .map(|i| {
                    let (x, y) = ((i + 1) as f64, eig[i]);
                    ((y2 - y1) * x - (x2 - x1) * y + x2 * y1 - y2 * x1).abs() / norm
                })
                .collect()
        }
    };
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let knee = best + 2;
    let rule_code = match rule {
        KneeRule::MaxCurvature => 0.0,
        KneeRule::MaxDistance => 1.0,
    };
    let params = BTreeMap::from([("rule".to_string(), rule_code)]);
    let mut result = spectrum.result(Criterion::ScreeKnee, knee, params);
    let scale = eig[0].abs().max(eig[p - 1].abs()).max(1e-300);
    if scores[best] <= 1e-9 * scale {
        result
            .warnings
            .push("scree curve has no bend; knee placed at the first interior dimension".into());
    }
    Ok(result)
}

/// Loadings of the variables that carry them, over a labelled set of
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingMatrix {
    pub variables: Vec<String>,
    /// 1-based dimension labels of the columns.
    pub dimensions: Vec<usize>,
    /// `values[variable][column]`.
    pub values: Vec<Vec<f64>>,
}

impl LoadingMatrix {
    pub fn new(variables: Vec<String>, dimensions: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != variables.len() || values.iter().any(|r| r.len() != dimensions.len()) {
            return Err(Error::InvalidTable("loading matrix shape does not match its labels".into()));
        }
        Ok(LoadingMatrix {
            variables,
            dimensions,
            values,
        })
    }

    /// Loadings of a fitted model over dimensions `dims` (1-based).
    /// Multiple nominal variables have no loadings and are left out.
    pub fn from_model(model: &CatpcaModel, dims: &[usize]) -> Result<Self> {
        if let Some(&d) = dims.iter().find(|&&d| d == 0 || d > model.dimensions()) {
            return Err(Error::Config(format!(
                "dimension {d} outside the fitted 1..={}",
                model.dimensions()
            )));
        }
        let (names, rows) = model.loading_rows();
        let values = rows.iter().map(|r| dims.iter().map(|&d| r[d - 1]).collect()).collect();
        Self::new(names, dims.to_vec(), values)
    }

    /// Reads a CSV whose first column is `variable` and whose other headers
    /// are dimension labels, written either `3` or `dim_3`.
    pub fn from_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("variable") {
            return Err(Error::InvalidTable("loading table must start with a `variable` column".into()));
        }
        let dimensions = header
            .iter()
            .skip(1)
            .map(|h| {
                h.trim_start_matches("dim_")
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidTable(format!("bad dimension header `{h}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut variables = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            variables.push(record[0].to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::InvalidTable(format!("bad loading `{c}` for `{}`", &record[0])))
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        Self::new(variables, dimensions, values)
    }

    /// Keeps only the columns labelled in `dims`, in that order.
    pub fn restrict(&self, dims: &[usize]) -> Result<Self> {
        let cols = dims
            .iter()
            .map(|d| {
                self.dimensions
                    .iter()
                    .position(|x| x == d)
                    .ok_or_else(|| Error::InvalidTable(format!("no loadings for dimension {d}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        Self::new(self.variables.clone(), dims.to_vec(), values)
    }

    /// Keeps only the rows at `rows`, in that order.
    pub fn select_variables(&self, rows: &[usize]) -> Self {
        LoadingMatrix {
            variables: rows.iter().map(|&r| self.variables[r].clone()).collect(),
            dimensions: self.dimensions.clone(),
            values: rows.iter().map(|&r| self.values[r].clone()).collect(),
        }
    }
}

/// Outcome of the loading filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingFilter {
    pub threshold: f64,
    pub tolerance: f64,
    /// `(variable row, dimension label, loading)` with `|loading| ≥ threshold − tolerance`.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Rows with at least one passing loading, in input order.
    pub retained_variables: Vec<usize>,
    /// Dimension labels with at least one passing loading, in column order.
    pub retained_components: Vec<usize>,
}

/// A variable passes when some `|loading| ≥ threshold − tolerance`; a
/// component is kept when some variable passes on it.
pub fn loading_filter(loadings: &LoadingMatrix, threshold: f64, tolerance: f64) -> LoadingFilter {
    let cutoff = threshold - tolerance;
    let mut pairs = Vec::new();
    for (r, row) in loadings.values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v.abs() >= cutoff {
                pairs.push((r, loadings.dimensions[c], v));
            }
        }
    }
    let mut retained_variables: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    retained_variables.dedup();
    let retained_components = loadings
        .dimensions
        .iter()
        .copied()
        .filter(|d| pairs.iter().any(|p| p.1 == *d))
        .collect();
    LoadingFilter {
        threshold,
        tolerance,
        pairs,
        retained_variables,
        retained_components,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunalityRow {
    pub variable: String,
    /// Squared loadings, one per retained dimension.
    pub squared: Vec<f64>,
    pub communality: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunalityTable {
    pub dimensions: Vec<usize>,
    pub threshold: f64,
    pub rows: Vec<CommunalityRow>,
}

/// Squared loadings and their row sums over the dimensions of `loadings`.
pub fn communalities(loadings: &LoadingMatrix, threshold: f64) -> CommunalityTable {
    let rows = loadings
        .variables
        .iter()
        .zip(&loadings.values)
        .map(|(name, row)| {
            let squared: Vec<f64> = row.iter().map(|v| v * v).collect();
            let communality = squared.iter().sum();
            CommunalityRow {
                variable: name.clone(),
                squared,
                communality,
                passes: communality >= threshold,
            }
        })
        .collect();
    CommunalityTable {
        dimensions: loadings.dimensions.clone(),
        threshold,
        rows,
    }
}

/// Variables whose communality reaches `threshold`, in table order.
pub fn minimum_communality_criterion(table: &CommunalityTable, threshold: f64) -> Vec<String> {
    table
        .rows
        .iter()
        .filter(|r| r.communality >= threshold)
        .map(|r| r.variable.clone())
        .collect()
}

/// Dimension-count rule used by [`select_components`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum DimensionRule {
    Eigenvalue { threshold: f64, near_threshold: f64 },
    VarianceExplained { target_fraction: f64 },
    ScreeKnee { rule: KneeRule },
}

impl Default for DimensionRule {
    fn default() -> Self {
        DimensionRule::Eigenvalue {
            threshold: EIGENVALUE_THRESHOLD,
            near_threshold: NEAR_THRESHOLD,
        }
    }
}

impl DimensionRule {
    pub fn apply(&self, spectrum: &Spectrum) -> Result<CriterionResult> {
        match *self {
            DimensionRule::Eigenvalue {
                threshold,
                near_threshold,
            } => eigenvalue_criterion(spectrum, threshold, near_threshold),
            DimensionRule::VarianceExplained { target_fraction } => {
                variance_explained_criterion(spectrum, target_fraction)
            }
            DimensionRule::ScreeKnee { rule } => scree_knee(spectrum, rule),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub rule: DimensionRule,
    pub loading_threshold: f64,
    pub loading_tolerance: f64,
    pub communality_threshold: f64,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy {
            rule: DimensionRule::default(),
            loading_threshold: LOADING_THRESHOLD,
            loading_tolerance: LOADING_TOLERANCE,
            communality_threshold: COMMUNALITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub criterion: CriterionResult,
    /// Loadings over the criterion's dimensions.
    pub loadings: LoadingMatrix,
    pub filter: LoadingFilter,
    /// Over the filter's retained components, for its retained variables.
    pub communalities: CommunalityTable,
    pub selected_variables: Vec<String>,
    /// What each stage kept and removed, in order.
    pub provenance: Vec<String>,
    pub warnings: Vec<String>,
}

/// Retention rule, then loading filter, then communalities, over a spectrum
/// and the matching loadings. Retained dimensions without a loading column
/// are reported in the warnings and skipped.
pub fn extract(spectrum: &Spectrum, loadings: &LoadingMatrix, strategy: &Strategy) -> Result<ExtractionResult> {
    let criterion = strategy.rule.apply(spectrum)?;
    let mut warnings = criterion.warnings.clone();
    let mut provenance = vec![format!(
        "{} criterion kept {} of {} dimensions ({:.2}% of variance)",
        criterion.criterion.name(),
        criterion.count(),
        spectrum.len(),
        criterion.cumulative_vaf_percent
    )];
    // Loadings may have been tabulated for only some dimensions.
    let (covered, absent): (Vec<usize>, Vec<usize>) = criterion
        .retained_dimensions
        .iter()
        .partition(|d| loadings.dimensions.contains(d));
    if !absent.is_empty() {
        warnings.push(format!("no loadings supplied for retained dimensions {absent:?}"));
    }
    let retained = loadings.restrict(&covered)?;
    let filter = loading_filter(&retained, strategy.loading_threshold, strategy.loading_tolerance);
    let dropped_dims: Vec<usize> = covered
        .iter()
        .copied()
        .filter(|d| !filter.retained_components.contains(d))
        .collect();
    let dropped_vars: Vec<&str> = (0..retained.variables.len())
        .filter(|r| !filter.retained_variables.contains(r))
        .map(|r| retained.variables[r].as_str())
        .collect();
    provenance.push(format!(
        "loading filter (|a| >= {:.2}) kept components {:?}, removed {:?}; removed variables {:?}",
        strategy.loading_threshold - strategy.loading_tolerance,
        filter.retained_components,
        dropped_dims,
        dropped_vars
    ));
    let table = communalities(
        &retained
            .select_variables(&filter.retained_variables)
            .restrict(&filter.retained_components)?,
        strategy.communality_threshold,
    );
    let selected_variables = minimum_communality_criterion(&table, strategy.communality_threshold);
    let below: Vec<&str> = table
        .rows
        .iter()
        .filter(|r| !r.passes)
        .map(|r| r.variable.as_str())
        .collect();
    provenance.push(format!(
        "communality criterion (>= {:.2}) kept {} variables, removed {:?}",
        strategy.communality_threshold,
        selected_variables.len(),
        below
    ));
    if filter.retained_components.is_empty() {
        warnings.push("no component survives the loading filter".into());
    }
    Ok(ExtractionResult {
        criterion,
        loadings: retained,
        filter,
        communalities: table,
        selected_variables,
        provenance,
        warnings,
    })
}

/// [`extract`] over a fitted model's own spectrum and loadings.
pub fn select_components(model: &CatpcaModel, strategy: &Strategy) -> Result<ExtractionResult> {
    let spectrum = Spectrum::from_model(model)?;
    let dims: Vec<usize> = (1..=model.dimensions()).collect();
    let loadings = LoadingMatrix::from_model(model, &dims)?;
    let mut result = extract(&spectrum, &loadings, strategy)?;
    let multiple = model.n_variables() - loadings.variables.len();
    if multiple > 0 {
        result
            .provenance
            .insert(0, format!("{multiple} multiple nominal variables carry no loadings and were skipped"));
    }
    Ok(result)
}
