#![allow(dead_code)]

use catpca::data::{Column, Dataset, MeasurementLevel, Schema, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Cyclic Jacobi eigensolver for a small symmetric matrix stored row-major.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns (`vectors[i][k]` is entry `i` of vector `k`).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (values, vectors)
}

/// Correlation matrix of numeric columns (population moments).
pub fn correlation(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = columns[0].len() as f64;
    let z: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            c.iter().map(|x| (x - mean) / sd).collect()
        })
        .collect();
    z.iter()
        .map(|a| z.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n).collect())
        .collect()
}

/// Discrete level from a latent score: cut points at standard normal quantiles.
pub fn bucket(score: f64, k: usize) -> i64 {
    let cuts: &[f64] = match k {
        2 => &[0.0],
        3 => &[-0.43, 0.43],
        4 => &[-0.67, 0.0, 0.67],
        _ => &[-0.84, -0.25, 0.25, 0.84],
    };
    1 + cuts.iter().filter(|&&c| score > c).count() as i64
}

/// Mixed-level table driven by `factors` latent factors. Variable `j` loads on
/// factor `j % factors` with weight `strength`; levels cycle through ordinal,
/// nominal, numeric (every `numeric_every`-th) and, if requested, multiple
/// nominal.
pub struct Synthetic {
    pub n: usize,
    pub m: usize,
    pub factors: usize,
    pub strength: f64,
    pub numeric_every: usize,
    pub multiple_every: usize,
    /// Cap on the number of numeric variables; 0 means no cap.
    pub max_numeric: usize,
    pub seed: u64,
}

impl Default for Synthetic {
    fn default() -> Self {
        Synthetic {
            n: 120,
            m: 8,
            factors: 2,
            strength: 0.8,
            numeric_every: 4,
            multiple_every: 0,
            max_numeric: 0,
            seed: 7,
        }
    }
}

impl Synthetic {
    pub fn build(&self) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let latent: Vec<Vec<f64>> = (0..self.n)
            .map(|_| (0..self.factors).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let noise_sd = (1.0 - self.strength * self.strength).max(0.0).sqrt();
        let mut specs = Vec::new();
        let mut columns = Vec::new();
        let mut numeric = 0;
        for j in 0..self.m {
            let scores: Vec<f64> = latent
                .iter()
                .map(|f| self.strength * f[j % self.factors] + noise_sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let name = format!("v{:02}", j + 1);
            let capped = self.max_numeric > 0 && numeric == self.max_numeric;
            if self.numeric_every > 0 && j % self.numeric_every == self.numeric_every - 1 && !capped {
                numeric += 1;
                specs.push(VariableSpec::new(name, MeasurementLevel::Numeric));
                columns.push(Column::Numeric(scores.iter().map(|s| (s * 100.0).round() / 100.0).collect()));
                continue;
            }
            let k = 3 + j % 3;
            let level = if self.multiple_every > 0 && j % self.multiple_every == self.multiple_every - 1 {
                MeasurementLevel::MultipleNominal
            } else if j % 2 == 0 {
                MeasurementLevel::Ordinal
            } else {
                MeasurementLevel::SingleNominal
            };
            specs.push(VariableSpec::new(name, level).with_categories(1..=k as i64));
            columns.push(Column::Categorical(scores.iter().map(|&s| bucket(s, k)).collect()));
        }
        Dataset::from_columns(Schema::new(specs).unwrap(), columns).unwrap()
    }
}

/// Rebuilds `dataset` with the rows in `order`.
pub fn permute_rows(dataset: &Dataset, order: &[usize]) -> Dataset {
    dataset.select_rows(order)
}
