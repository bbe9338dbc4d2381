mod common;

use approx::assert_abs_diff_eq;
use catpca::als::{fit, AlsState, CatpcaConfig, CatpcaModel, InitMethod, StopReason, VariableQuantification};
use catpca::data::{Column, Dataset, MeasurementLevel, Schema, VariableSpec};
use common::{correlation, jacobi_eigen, Synthetic};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tight(p: usize) -> CatpcaConfig {
    CatpcaConfig {
        dimensions: p,
        max_iterations: 2000,
        epsilon: 1e-12,
        ..Default::default()
    }
}

fn assert_orthonormal(x: &DMatrix<f64>) {
    let n = x.nrows() as f64;
    let gram = x.transpose() * x;
    for r in 0..x.ncols() {
        assert!(x.column(r).sum().abs() < 1e-8, "column {r} not centered");
        for c in 0..x.ncols() {
            let expected = if r == c { n } else { 0.0 };
            assert!((gram[(r, c)] - expected).abs() < 1e-7 * n, "gram[{r},{c}] = {}", gram[(r, c)]);
        }
    }
}

/// Category centroids of the model's object scores, recomputed from the data.
fn centroids_from_data(model: &CatpcaModel, codes: &[usize], k: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let p = model.dimensions();
    let mut freq = vec![0; k];
    let mut sums = vec![vec![0.0; p]; k];
    for (i, &c) in codes.iter().enumerate() {
        freq[c] += 1;
        for s in 0..p {
            sums[c][s] += model.object_scores[(i, s)];
        }
    }
    for (c, row) in sums.iter_mut().enumerate() {
        if freq[c] > 0 {
            row.iter_mut().for_each(|v| *v /= freq[c] as f64);
        }
    }
    (freq, sums)
}

fn category_index(dataset: &Dataset, j: usize) -> (Vec<usize>, usize) {
    match dataset.column(j) {
        Column::Categorical(cells) => {
            let cats = dataset.schema().variables[j].effective_categories();
            (cells.iter().map(|c| cats.iter().position(|k| k == c).unwrap()).collect(), cats.len())
        }
        Column::Numeric(values) => {
            let mut d = values.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            (values.iter().map(|v| d.iter().position(|x| x == v).unwrap()).collect(), d.len())
        }
    }
}

fn single_values(q: &VariableQuantification) -> Vec<f64> {
    match q {
        VariableQuantification::Category(c) => c.values.iter().map(|v| v.unwrap_or(0.0)).collect(),
        VariableQuantification::Numeric { affine, values, .. } => values.iter().map(|&v| affine.apply(v)).collect(),
        VariableQuantification::Multiple { .. } => panic!("not a single quantification"),
    }
}

#[test]
fn single_numeric_variable_is_its_own_score() {
    let values = vec![1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
    let schema = Schema::new(vec![VariableSpec::new("x", MeasurementLevel::Numeric)]).unwrap();
    let data = Dataset::from_columns(schema, vec![Column::Numeric(values.clone())]).unwrap();
    let model = fit(&data, &CatpcaConfig::with_dimensions(1)).unwrap();
    let mean = values.iter().sum::<f64>() / 6.0;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0).sqrt();
    for (i, v) in values.iter().enumerate() {
        assert_abs_diff_eq!(model.object_scores[(i, 0)], (v - mean) / sd, epsilon = 1e-10);
    }
    assert_abs_diff_eq!(model.eigenvalues[0], 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(model.history.last().unwrap().loss_total, 0.0, epsilon = 1e-10);
}

#[test]
fn duplicated_variable_gives_the_same_scores() {
    let codes = vec![1, 3, 2, 2, 4, 1, 3, 4, 2, 1];
    let spec = |name: &str| VariableSpec::new(name, MeasurementLevel::Ordinal).with_categories(1..=4);
    let one = Dataset::from_columns(
        Schema::new(vec![spec("a")]).unwrap(),
        vec![Column::Categorical(codes.clone())],
    )
    .unwrap();
    let two = Dataset::from_columns(
        Schema::new(vec![spec("a"), spec("b")]).unwrap(),
        vec![Column::Categorical(codes.clone()), Column::Categorical(codes)],
    )
    .unwrap();
    let m1 = fit(&one, &CatpcaConfig::with_dimensions(1)).unwrap();
    let m2 = fit(&two, &CatpcaConfig::with_dimensions(1)).unwrap();
    for i in 0..10 {
        assert_abs_diff_eq!(m1.object_scores[(i, 0)], m2.object_scores[(i, 0)], epsilon = 1e-9);
    }
    assert_abs_diff_eq!(m2.eigenvalues[0], 2.0, epsilon = 1e-9);
}

#[test]
fn fitted_model_invariants() {
    let data = Synthetic {
        multiple_every: 5,
        m: 10,
        ..Default::default()
    }
    .build();
    let model = fit(&data, &CatpcaConfig::with_dimensions(3)).unwrap();
    assert_orthonormal(&model.object_scores);
    for a in model.loadings.iter().flatten() {
        let norm: f64 = a.iter().map(|v| v * v).sum();
        assert!(norm <= 1.0 + 1e-9, "loading norm {norm}");
        assert!(a.iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }
    for w in model.eigenvalues.windows(2) {
        assert!(w[0] >= w[1] - 1e-9, "eigenvalues not sorted: {:?}", model.eigenvalues);
    }
    for q in &model.quantifications {
        if let Some(c) = q.as_category() {
            assert_abs_diff_eq!(c.weighted_mean(), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(c.weighted_variance(), 1.0, epsilon = 1e-9);
            if c.level == MeasurementLevel::Ordinal {
                assert!(c.is_monotone(), "{} not monotone: {:?}", c.variable, c.values);
            }
        }
    }
}

#[test]
fn vaf_never_decreases_and_loss_is_conserved() {
    let data = Synthetic {
        multiple_every: 3,
        m: 9,
        ..Default::default()
    }
    .build();
    let config = CatpcaConfig {
        dimensions: 2,
        max_iterations: 60,
        epsilon: 1e-14,
        ..Default::default()
    };
    let model = fit(&data, &config).unwrap();
    let mp = (model.n_variables() * model.dimensions()) as f64;
    for rec in &model.history {
        assert_abs_diff_eq!(rec.vaf_total + rec.loss_total, mp, epsilon = 1e-8);
        assert_abs_diff_eq!(rec.loss_total, rec.loss_centroid + rec.loss_restriction, epsilon = 1e-12);
        if rec.iteration > 0 {
            assert!(rec.vaf_increase >= -1e-10, "VAF decreased at {}: {}", rec.iteration, rec.vaf_increase);
        }
    }
}

#[test]
fn restriction_loss_recomputed_from_scores() {
    let data = Synthetic::default().build();
    let model = fit(&data, &CatpcaConfig::with_dimensions(2)).unwrap();
    let n = model.n_objects() as f64;
    let mut restriction = 0.0;
    let mut centroid = 0.0;
    for j in 0..model.n_variables() {
        let (codes, k) = category_index(&data, j);
        let (freq, ys) = centroids_from_data(&model, &codes, k);
        let q = single_values(&model.quantifications[j]);
        let a = model.loadings[j].as_ref().unwrap();
        let mut explained = 0.0;
        for c in 0..k {
            let f = freq[c] as f64 / n;
            explained += f * ys[c].iter().map(|v| v * v).sum::<f64>();
            restriction += f * (0..2).map(|s| (ys[c][s] - q[c] * a[s]).powi(2)).sum::<f64>();
        }
        centroid += 2.0 - explained;
    }
    let last = model.history.last().unwrap();
    assert_abs_diff_eq!(last.loss_restriction, restriction, epsilon = 1e-9);
    assert_abs_diff_eq!(last.loss_centroid, centroid, epsilon = 1e-9);
}

#[test]
fn all_numeric_data_reproduces_linear_pca() {
    let data = Synthetic {
        numeric_every: 1,
        m: 6,
        ..Default::default()
    }
    .build();
    let columns: Vec<Vec<f64>> = data.columns().iter().map(|c| c.as_numeric().unwrap().to_vec()).collect();
    let (values, vectors) = jacobi_eigen(correlation(&columns));
    let model = fit(&data, &CatpcaConfig::with_dimensions(3)).unwrap();
    assert!(model.converged);
    // Iteration 0 is already the answer.
    assert_abs_diff_eq!(model.history[0].vaf_total, values[..3].iter().sum::<f64>(), epsilon = 1e-9);
    for s in 0..3 {
        assert_abs_diff_eq!(model.eigenvalues[s], values[s], epsilon = 1e-8);
        let sign = model.loadings.iter().zip(&vectors).map(|(a, v)| a.as_ref().unwrap()[s] * v[s]).sum::<f64>().signum();
        for (j, a) in model.loadings.iter().enumerate() {
            assert_abs_diff_eq!(a.as_ref().unwrap()[s], sign * vectors[j][s] * values[s].sqrt(), epsilon = 1e-7);
        }
    }
}

#[test]
fn all_multiple_nominal_reproduces_correspondence_analysis() {
    let mut synth = Synthetic {
        n: 40,
        m: 4,
        numeric_every: 0,
        multiple_every: 1,
        ..Default::default()
    };
    synth.strength = 0.7;
    let data = synth.build();
    let n = data.n_rows();
    // Oracle: eigenvalues of the centered sum of per-variable projectors.
    let mut s = vec![vec![0.0; n]; n];
    for j in 0..data.n_columns() {
        let (codes, k) = category_index(&data, j);
        let mut freq = vec![0usize; k];
        codes.iter().for_each(|&c| freq[c] += 1);
        for a in 0..n {
            for b in 0..n {
                if codes[a] == codes[b] {
                    s[a][b] += 1.0 / freq[codes[a]] as f64;
                }
            }
        }
    }
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| s[a][b] - data.n_columns() as f64 / n as f64).collect())
        .collect();
    let (values, _) = jacobi_eigen(centered);
    let model = fit(&data, &tight(2)).unwrap();
    assert!(model.converged, "stopped after {} iterations", model.history.len());
    for d in 0..2 {
        assert_abs_diff_eq!(model.eigenvalues[d], values[d], epsilon = 1e-5);
    }
    assert_abs_diff_eq!(model.history.last().unwrap().loss_restriction, 0.0);
}

#[test]
fn iteration_cap_reports_max_iterations() {
    let data = Synthetic::default().build();
    let config = CatpcaConfig {
        dimensions: 2,
        max_iterations: 3,
        epsilon: 1e-300,
        ..Default::default()
    };
    let model = fit(&data, &config).unwrap();
    assert!(!model.converged);
    assert_eq!(model.stop_reason, StopReason::MaxIterations);
    assert_eq!(model.history.len(), 4);
}

#[test]
fn fits_are_deterministic() {
    let data = Synthetic {
        multiple_every: 4,
        ..Default::default()
    }
    .build();
    for init in [InitMethod::NumericSolution, InitMethod::SeededRandom] {
        let config = CatpcaConfig {
            init,
            seed: 11,
            ..CatpcaConfig::with_dimensions(2)
        };
        assert_eq!(fit(&data, &config).unwrap(), fit(&data, &config).unwrap());
    }
}

#[test]
fn row_order_does_not_change_quantifications() {
    let data = Synthetic::default().build();
    let n = data.n_rows();
    let order: Vec<usize> = (0..n).map(|i| (i * 37 + 5) % n).collect();
    let shuffled = common::permute_rows(&data, &order);
    let a = fit(&data, &tight(2)).unwrap();
    let b = fit(&shuffled, &tight(2)).unwrap();
    for (qa, qb) in a.quantifications.iter().zip(&b.quantifications) {
        for (x, y) in single_values(qa).iter().zip(single_values(qb)) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
    }
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-9);
    }
}

#[test]
fn ordinal_codes_are_labels_not_values() {
    let data = Synthetic {
        numeric_every: 0,
        ..Default::default()
    }
    .build();
    let mut specs = data.schema().variables.clone();
    let mut columns = data.columns().to_vec();
    for (spec, col) in specs.iter_mut().zip(columns.iter_mut()) {
        let squared: Vec<i64> = spec.categories.iter().map(|c| c * c * 10).collect();
        spec.categories = squared;
        if let Column::Categorical(cells) = col {
            cells.iter_mut().for_each(|c| *c = *c * *c * 10);
        }
    }
    let relabelled = Dataset::from_columns(Schema::new(specs).unwrap(), columns).unwrap();
    let a = fit(&data, &tight(2)).unwrap();
    let b = fit(&relabelled, &tight(2)).unwrap();
    for (qa, qb) in a.quantifications.iter().zip(&b.quantifications) {
        for (x, y) in single_values(qa).iter().zip(single_values(qb)) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-8);
        }
    }
}

#[test]
fn state_steps_can_be_driven_by_hand() {
    let data = Synthetic::default().build();
    let config = CatpcaConfig::with_dimensions(2);
    let mut state = AlsState::new(&data, &config).unwrap();
    let before = state.compute_loss(0, None);
    state.update_object_scores().unwrap();
    assert_orthonormal(state.object_scores());
    state.update_quantifications();
    state.update_loadings();
    let unrotated: f64 = state.eigenvalues().iter().sum();
    state.rotate_to_principal_axes();
    let after = state.compute_loss(1, Some(before.vaf_total));
    assert_abs_diff_eq!(after.vaf_total, unrotated, epsilon = 1e-10);
    assert!(after.vaf_increase >= -1e-12);
    let first = fit(
        &data,
        &CatpcaConfig {
            max_iterations: 1,
            ..config
        },
    )
    .unwrap();
    assert_abs_diff_eq!(first.history[1].vaf_total, after.vaf_total, epsilon = 1e-12);
}

#[test]
fn single_category_column_is_rejected() {
    let schema = Schema::new(vec![
        VariableSpec::new("a", MeasurementLevel::Ordinal).with_categories([1, 2]),
        VariableSpec::new("b", MeasurementLevel::Ordinal).with_categories([1, 2]),
    ])
    .unwrap();
    let data = Dataset::from_columns(
        schema,
        vec![Column::Categorical(vec![1, 2, 1, 2]), Column::Categorical(vec![2, 2, 2, 2])],
    )
    .unwrap();
    let err = fit(&data, &CatpcaConfig::with_dimensions(1)).unwrap_err();
    assert!(err.to_string().contains('b'), "{err}");
}

#[test]
fn negative_zero_is_the_same_numeric_value() {
    let schema = Schema::new(vec![
        VariableSpec::new("a", MeasurementLevel::Numeric),
        VariableSpec::new("b", MeasurementLevel::Ordinal).with_categories([1, 2, 3]),
    ])
    .unwrap();
    let data = Dataset::from_columns(
        schema,
        vec![
            Column::Numeric(vec![-0.0, 0.0, 1.5, -1.5, 0.0]),
            Column::Categorical(vec![2, 2, 3, 1, 1]),
        ],
    )
    .unwrap();
    let model = fit(&data, &CatpcaConfig::with_dimensions(1)).unwrap();
    match &model.quantifications[0] {
        VariableQuantification::Numeric { values, .. } => assert_eq!(values.len(), 3),
        other => panic!("unexpected quantification {other:?}"),
    }
}

#[test]
fn too_many_dimensions_is_a_config_error() {
    let data = Synthetic::default().build();
    let err = fit(&data, &CatpcaConfig::with_dimensions(9)).unwrap_err();
    assert!(err.is_config());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_tables_keep_the_invariants(seed in 0u64..10_000, m in 3usize..7, p in 1usize..3, mult in 0usize..4) {
        let data = Synthetic { n: 30, m, seed, multiple_every: mult, strength: 0.6, ..Default::default() }.build();
        let config = CatpcaConfig { dimensions: p, max_iterations: 40, ..Default::default() };
        let model = match fit(&data, &config) {
            Ok(model) => model,
            // A generated column can collapse to one category.
            Err(e) => { prop_assert!(e.to_string().contains("categor")); return Ok(()); }
        };
        assert_orthonormal(&model.object_scores);
        let mp = (m * p) as f64;
        for rec in &model.history {
            prop_assert!((rec.vaf_total + rec.loss_total - mp).abs() < 1e-8);
            if rec.iteration > 0 {
                prop_assert!(rec.vaf_increase >= -1e-10);
            }
        }
    }
}
