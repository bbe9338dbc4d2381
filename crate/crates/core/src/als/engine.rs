//! The alternating least squares cycle.
//!
//! Loss, per analysed variable `j` with indicator matrix `G_j`:
//!
//! ```text
//! ‖X − G_j Y_j‖² / n,   Y_j = q_j a_jᵀ (single levels)   or   Ŷ_j (multiple nominal)
//! ```
//!
//! where `Ŷ_j` are the category centroids of the object scores `X`. Each
//! step below minimises the loss over one block with the others held fixed,
//! so the variance accounted for never decreases.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::als::config::{CatpcaConfig, InitMethod, IterationRecord, StopReason};
use crate::als::model::{CatpcaModel, VariableInfo, VariableQuantification};
use crate::data::{Column, Dataset, MeasurementLevel};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, procrustes_scores, symmetric_eigen_desc};
use crate::scaling::{monotone_quantify, normalize_quantification, standardize_named, AffineMap, CategoryQuantification};

#[derive(Debug, Clone)]
enum Labels {
    Codes(Vec<i64>),
    Values(Vec<f64>),
}

/// One analysed variable in category-index form.
#[derive(Debug, Clone)]
struct Encoded {
    name: String,
    level: MeasurementLevel,
    codes: Vec<usize>,
    frequencies: Vec<usize>,
    labels: Labels,
    /// Standardized starting value per category.
    start: Vec<f64>,
    affine: Option<AffineMap>,
}

impl Encoded {
    fn k(&self) -> usize {
        self.frequencies.len()
    }

    fn single(&self) -> bool {
        self.level.has_loadings()
    }
}

fn encode(dataset: &Dataset) -> Result<Vec<Encoded>> {
    let schema = dataset.schema();
    let n = dataset.n_rows();
    let mut out = Vec::new();
    for j in schema.active_indices() {
        let spec = &schema.variables[j];
        let name = spec.name.clone();
        let enc = match dataset.column(j) {
            Column::Numeric(values) => {
                // Adding 0.0 folds -0.0 into 0.0, which total_cmp would keep apart.
                let mut distinct: Vec<f64> = values.iter().map(|v| v + 0.0).collect();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let codes: Vec<usize> = values
                    .iter()
                    .map(|v| distinct.binary_search_by(|d| d.total_cmp(&(v + 0.0))).expect("value present"))
                    .collect();
                let mut frequencies = vec![0; distinct.len()];
                codes.iter().for_each(|&c| frequencies[c] += 1);
                let (_, affine) = standardize_named(&name, values)?;
                Encoded {
                    start: distinct.iter().map(|&v| affine.apply(v)).collect(),
                    affine: Some(affine),
                    name,
                    level: spec.level,
                    codes,
                    frequencies,
                    labels: Labels::Values(distinct),
                }
            }
            Column::Categorical(cells) => {
                let categories = spec.effective_categories();
                if categories.is_empty() {
                    return Err(Error::EmptyCategories(name));
                }
                let codes: Vec<usize> = cells
                    .iter()
                    .map(|c| categories.iter().position(|k| k == c).expect("validated at load"))
                    .collect();
                let mut frequencies = vec![0; categories.len()];
                codes.iter().for_each(|&c| frequencies[c] += 1);
                if frequencies.iter().filter(|&&f| f > 0).count() < 2 {
                    return Err(Error::degenerate(&name, "fewer than two observed categories"));
                }
                // Codes enter the starting solution as their rank in category order.
                let ranks: Vec<f64> = codes.iter().map(|&c| (c + 1) as f64).collect();
                let (_, affine) = standardize_named(&name, &ranks)?;
                Encoded {
                    start: (0..categories.len()).map(|c| affine.apply((c + 1) as f64)).collect(),
                    affine: None,
                    name,
                    level: spec.level,
                    codes,
                    frequencies,
                    labels: Labels::Codes(categories),
                }
            }
        };
        debug_assert_eq!(enc.codes.len(), n);
        out.push(enc);
    }
    if out.is_empty() {
        return Err(Error::Config("no analysed (non-passive) variables".into()));
    }
    Ok(out)
}

/// Mutable state of one fit: object scores, quantifications, loadings and
/// the centroids of the current scores.
#[derive(Debug, Clone)]
pub struct AlsState {
    vars: Vec<Encoded>,
    row_ids: Vec<usize>,
    x: DMatrix<f64>,
    /// Per variable, one value per category (0 for unobserved categories).
    quant: Vec<Vec<f64>>,
    /// Per variable, length p for single levels, empty for multiple nominal.
    loadings: Vec<Vec<f64>>,
    /// Per variable, k × p.
    centroids: Vec<DMatrix<f64>>,
    rng: ChaCha8Rng,
    completed_dims: BTreeSet<usize>,
    warnings: Vec<String>,
}

impl AlsState {
    /// Initial state per `config.init`, already rotated to principal axes.
    pub fn new(dataset: &Dataset, config: &CatpcaConfig) -> Result<Self> {
        match config.init {
            InitMethod::NumericSolution => Self::init_numeric_solution(dataset, config.dimensions, config.seed),
            InitMethod::SeededRandom => Self::init_random(dataset, config.dimensions, config.seed),
        }
    }

    fn prepare(dataset: &Dataset, p: usize, seed: u64) -> Result<(Vec<Encoded>, ChaCha8Rng)> {
        let n = dataset.n_rows();
        if n < 2 {
            return Err(Error::TooFewRows { n, min: 2 });
        }
        let vars = encode(dataset)?;
        CatpcaConfig {
            dimensions: p,
            ..Default::default()
        }
        .validate(n, vars.len())?;
        Ok((vars, ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Every variable read as numbers (categorical codes by rank), then
    /// linear PCA of their correlation matrix gives the starting scores.
    pub fn init_numeric_solution(dataset: &Dataset, p: usize, seed: u64) -> Result<Self> {
        let (vars, mut rng) = Self::prepare(dataset, p, seed)?;
        let n = dataset.n_rows();
        let m = vars.len();
        let z = DMatrix::from_fn(n, m, |i, j| vars[j].start[vars[j].codes[i]]);
        let corr = z.transpose() * &z / n as f64;
        let (values, vectors) = symmetric_eigen_desc(corr);
        let tol = 1e-10 * values[0].abs().max(1.0);
        let rank = values.iter().filter(|&&v| v > tol).count();
        let mut warnings = Vec::new();
        if p > rank {
            let msg = format!("{p} dimensions requested but the data have effective rank {rank}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let components = z * vectors.columns(0, p);
        let (x, _) = procrustes_scores(&components, None, &mut rng)?;
        let mut state = Self::from_scores(vars, dataset.row_ids().to_vec(), x, rng);
        state.warnings.extend(warnings);
        Ok(state)
    }

    fn init_random(dataset: &Dataset, p: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let (vars, mut rng) = Self::prepare(dataset, p, seed)?;
        let n = dataset.n_rows();
        let mut start = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        center_columns(&mut start);
        let (x, _) = procrustes_scores(&start, None, &mut rng)?;
        Ok(Self::from_scores(vars, dataset.row_ids().to_vec(), x, rng))
    }

    fn from_scores(vars: Vec<Encoded>, row_ids: Vec<usize>, x: DMatrix<f64>, rng: ChaCha8Rng) -> Self {
        let p = x.ncols();
        let quant = vars.iter().map(|v| v.start.clone()).collect();
        let loadings = vars
            .iter()
            .map(|v| if v.single() { vec![0.0; p] } else { Vec::new() })
            .collect();
        let centroids = vars.iter().map(|v| DMatrix::zeros(v.k(), p)).collect();
        let mut state = AlsState {
            vars,
            row_ids,
            x,
            quant,
            loadings,
            centroids,
            rng,
            completed_dims: BTreeSet::new(),
            warnings: Vec::new(),
        };
        state.refresh_centroids();
        state.update_loadings();
        state.rotate_to_principal_axes();
        state
    }

    pub fn n_objects(&self) -> usize {
        self.x.nrows()
    }

    pub fn dimensions(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn object_scores(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Loading vector of variable `j` (`None` for multiple nominal).
    pub fn loading(&self, j: usize) -> Option<&[f64]> {
        self.vars[j].single().then(|| self.loadings[j].as_slice())
    }

    /// Quantified column of a single-level variable: one value per object.
    pub fn quantified_column(&self, j: usize) -> Vec<f64> {
        self.vars[j].codes.iter().map(|&c| self.quant[j][c]).collect()
    }

    /// Category values of variable `j` in category order.
    pub fn category_values(&self, j: usize) -> &[f64] {
        &self.quant[j]
    }

    /// Category centroids of the current object scores, k × p.
    pub fn centroids(&self, j: usize) -> &DMatrix<f64> {
        &self.centroids[j]
    }

    pub fn frequencies(&self, j: usize) -> &[usize] {
        &self.vars[j].frequencies
    }

    fn refresh_centroids(&mut self) {
        let p = self.dimensions();
        for (j, var) in self.vars.iter().enumerate() {
            let mut c = DMatrix::zeros(var.k(), p);
            for (i, &code) in var.codes.iter().enumerate() {
                for s in 0..p {
                    c[(code, s)] += self.x[(i, s)];
                }
            }
            for (code, &f) in var.frequencies.iter().enumerate() {
                if f > 0 {
                    c.row_mut(code).scale_mut(1.0 / f as f64);
                }
            }
            self.centroids[j] = c;
        }
    }

    /// Least-squares object scores for the current quantifications and
    /// loadings: the centered orthonormal (`XᵀX = n·I`) matrix closest to
    /// `Σ_j G_j Y_j`.
    pub fn update_object_scores(&mut self) -> Result<()> {
        let (n, p) = self.x.shape();
        let mut target = DMatrix::zeros(n, p);
        for (j, var) in self.vars.iter().enumerate() {
            for (i, &c) in var.codes.iter().enumerate() {
                if var.single() {
                    let q = self.quant[j][c];
                    for s in 0..p {
                        target[(i, s)] += q * self.loadings[j][s];
                    }
                } else {
                    for s in 0..p {
                        target[(i, s)] += self.centroids[j][(c, s)];
                    }
                }
            }
        }
        center_columns(&mut target);
        let (x, completed) = procrustes_scores(&target, Some(&self.x), &mut self.rng)?;
        for d in completed {
            if self.completed_dims.insert(d) {
                let msg = format!("object scores were rank deficient in dimension {d}; direction completed");
                log::warn!("{msg}");
                self.warnings.push(msg);
            }
        }
        self.x = x;
        Ok(())
    }

    /// Recomputes category centroids of the current scores and, for single
    /// levels, the restricted quantifications: nominal projects the
    /// centroids on the loading direction, ordinal adds weighted monotone
    /// regression, numeric keeps the standardized values.
    pub fn update_quantifications(&mut self) {
        self.refresh_centroids();
        let p = self.dimensions();
        for (j, var) in self.vars.iter().enumerate() {
            if !var.single() || var.level == MeasurementLevel::Numeric {
                continue;
            }
            let a = &self.loadings[j];
            let aa: f64 = a.iter().map(|v| v * v).sum();
            if aa <= 1e-300 {
                continue;
            }
            let projections: Vec<f64> = (0..var.k())
                .map(|c| (0..p).map(|s| self.centroids[j][(c, s)] * a[s]).sum::<f64>() / aa)
                .collect();
            let fitted = match var.level {
                MeasurementLevel::Ordinal => monotone_quantify(&projections, &var.frequencies),
                _ => {
                    let mapping: Vec<Option<f64>> = projections.into_iter().map(Some).collect();
                    normalize_quantification(&mapping, &var.frequencies)
                }
            };
            // A degenerate fitted value set leaves the previous quantification
            // in place; it is still feasible, so the loss does not increase.
            if let Ok(values) = fitted {
                self.quant[j] = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
            }
        }
    }

    /// `a_j = Xᵀ v_j / n`, the correlations of each quantified column with
    /// the score columns.
    pub fn update_loadings(&mut self) {
        let n = self.n_objects() as f64;
        let p = self.dimensions();
        for (j, var) in self.vars.iter().enumerate() {
            if !var.single() {
                continue;
            }
            let mut a = vec![0.0; p];
            for (c, &f) in var.frequencies.iter().enumerate() {
                if f == 0 {
                    continue;
                }
                let w = f as f64 * self.quant[j][c] / n;
                for (s, a_s) in a.iter_mut().enumerate() {
                    *a_s += w * self.centroids[j][(c, s)];
                }
            }
            self.loadings[j] = a;
        }
    }

    /// p × p matrix whose trace is the VAF: `Σ a aᵀ + Σ ŶᵀDŶ/n`.
    fn vaf_matrix(&self) -> DMatrix<f64> {
        let p = self.dimensions();
        let n = self.n_objects() as f64;
        let mut m = DMatrix::zeros(p, p);
        for (j, var) in self.vars.iter().enumerate() {
            if var.single() {
                let a = DVector::from_column_slice(&self.loadings[j]);
                m += &a * a.transpose();
            } else {
                let c = &self.centroids[j];
                for (code, &f) in var.frequencies.iter().enumerate() {
                    if f > 0 {
                        let row = c.row(code);
                        m += row.transpose() * row * (f as f64 / n);
                    }
                }
            }
        }
        m
    }

    /// Rotates scores, loadings and centroids so the dimensions are
    /// uncorrelated in VAF and ordered by decreasing eigenvalue, then fixes
    /// signs so each dimension's largest-magnitude loading (or multiple
    /// nominal centroid) is positive. Leaves the loss unchanged.
    pub fn rotate_to_principal_axes(&mut self) {
        let p = self.dimensions();
        if p > 1 {
            let (_, r) = symmetric_eigen_desc(self.vaf_matrix());
            self.x = &self.x * &r;
            for (j, var) in self.vars.iter().enumerate() {
                if var.single() {
                    let a = DVector::from_column_slice(&self.loadings[j]);
                    self.loadings[j] = (r.transpose() * a).iter().copied().collect();
                }
                self.centroids[j] = &self.centroids[j] * &r;
            }
        }
        for s in 0..p {
            let mut best = 0.0f64;
            for (j, var) in self.vars.iter().enumerate() {
                if var.single() {
                    let v = self.loadings[j][s];
                    if v.abs() > best.abs() {
                        best = v;
                    }
                } else {
                    for (c, &f) in var.frequencies.iter().enumerate() {
                        let v = self.centroids[j][(c, s)];
                        if f > 0 && v.abs() > best.abs() {
                            best = v;
                        }
                    }
                }
            }
            if best < 0.0 {
                self.x.column_mut(s).neg_mut();
                for (j, var) in self.vars.iter().enumerate() {
                    if var.single() {
                        self.loadings[j][s] = -self.loadings[j][s];
                    }
                    self.centroids[j].column_mut(s).neg_mut();
                }
            }
        }
    }

    /// VAF per dimension: squared loadings plus multiple nominal
    /// discrimination measures.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.vaf_matrix();
        (0..self.dimensions()).map(|s| m[(s, s)]).collect()
    }

    /// One full ALS cycle followed by the principal-axes rotation.
    pub fn iterate(&mut self) -> Result<()> {
        self.update_object_scores()?;
        self.update_quantifications();
        self.update_loadings();
        self.rotate_to_principal_axes();
        Ok(())
    }

    /// Loss terms of the current (consistent) state.
    pub fn compute_loss(&self, iteration: usize, previous_vaf: Option<f64>) -> IterationRecord {
        let n = self.n_objects() as f64;
        let p = self.dimensions();
        let mut centroid = 0.0;
        let mut restriction = 0.0;
        for (j, var) in self.vars.iter().enumerate() {
            let c = &self.centroids[j];
            let mut explained = 0.0;
            for (code, &f) in var.frequencies.iter().enumerate() {
                if f == 0 {
                    continue;
                }
                let w = f as f64 / n;
                explained += w * c.row(code).norm_squared();
                if var.single() {
                    let q = self.quant[j][code];
                    let gap: f64 = (0..p).map(|s| (c[(code, s)] - q * self.loadings[j][s]).powi(2)).sum();
                    restriction += w * gap;
                }
            }
            centroid += p as f64 - explained;
        }
        let vaf_total: f64 = self.eigenvalues().iter().sum();
        IterationRecord {
            iteration,
            vaf_total,
            vaf_increase: previous_vaf.map_or(0.0, |v| vaf_total - v),
            loss_total: centroid + restriction,
            loss_centroid: centroid,
            loss_restriction: restriction,
        }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn into_model(self, history: Vec<IterationRecord>, stop_reason: StopReason, config: CatpcaConfig) -> CatpcaModel {
        let eigenvalues = self.eigenvalues();
        let p = self.dimensions();
        let mut variables = Vec::new();
        let mut loadings = Vec::new();
        let mut quantifications = Vec::new();
        for (j, var) in self.vars.into_iter().enumerate() {
            variables.push(VariableInfo {
                name: var.name.clone(),
                level: var.level,
            });
            loadings.push(var.single().then(|| self.loadings[j].clone()));
            let observed = |c: usize, v: f64| (var.frequencies[c] > 0).then_some(v);
            let q = match (&var.labels, var.level) {
                (Labels::Values(values), _) => VariableQuantification::Numeric {
                    variable: var.name.clone(),
                    affine: var.affine.expect("numeric variables carry their affine map"),
                    values: values.clone(),
                    frequencies: var.frequencies.clone(),
                },
                (Labels::Codes(codes), MeasurementLevel::MultipleNominal) => VariableQuantification::Multiple {
                    variable: var.name.clone(),
                    categories: codes.clone(),
                    frequencies: var.frequencies.clone(),
                    centroids: (0..var.k())
                        .map(|c| (var.frequencies[c] > 0).then(|| (0..p).map(|s| self.centroids[j][(c, s)]).collect()))
                        .collect(),
                },
                (Labels::Codes(codes), level) => VariableQuantification::Category(CategoryQuantification {
                    variable: var.name.clone(),
                    level,
                    categories: codes.clone(),
                    frequencies: var.frequencies.clone(),
                    values: (0..var.k()).map(|c| observed(c, self.quant[j][c])).collect(),
                }),
            };
            quantifications.push(q);
        }
        CatpcaModel {
            variables,
            row_ids: self.row_ids,
            object_scores: self.x,
            loadings,
            quantifications,
            eigenvalues,
            history,
            converged: stop_reason == StopReason::Converged,
            stop_reason,
            config,
            warnings: self.warnings,
        }
    }
}

/// Fits a categorical PCA by alternating least squares.
///
/// Iteration 0 is the starting solution. Iterations stop when the VAF
/// increase drops below `config.epsilon`, or after `config.max_iterations`.
pub fn fit(dataset: &Dataset, config: &CatpcaConfig) -> Result<CatpcaModel> {
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, min: 2 });
    }
    config.validate(n, dataset.schema().active_indices().len())?;
    let mut state = AlsState::new(dataset, config)?;
    let mut history = vec![state.compute_loss(0, None)];
    let mut stop = StopReason::MaxIterations;
    for iteration in 1..=config.max_iterations {
        state.iterate()?;
        let previous = history.last().expect("iteration 0 recorded").vaf_total;
        let record = state.compute_loss(iteration, Some(previous));
        history.push(record);
        if record.vaf_increase < config.epsilon {
            stop = StopReason::Converged;
            break;
        }
    }
    let last = history.last().expect("non-empty history");
    log::info!(
        "fit finished after {} iterations ({:?}), VAF {:.6}",
        last.iteration,
        stop,
        last.vaf_total
    );
    Ok(state.into_model(history, stop, *config))
}
