use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub ratio: f64,
}

/// `floor(ratio * n + 0.5)`: 0.7 * 449 = 314.3 gives 314 train rows.
pub fn train_size(n: usize, ratio: f64) -> usize {
    (ratio * n as f64 + 0.5).floor() as usize
}

/// Seeded uniform random partition. Membership is drawn from a shuffled
/// index permutation; each side keeps source row order.
pub fn split_dataset(dataset: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, min: 2 });
    }
    let k = train_size(n, ratio);
    if k == 0 || k == n {
        return Err(Error::EmptyPartition { n, ratio });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at_mut(k);
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPair {
        train: dataset.select_rows(train),
        test: dataset.select_rows(test),
        seed,
        ratio,
    })
}

#[derive(Serialize)]
struct SplitManifest<'a> {
    seed: u64,
    ratio: f64,
    n_train: usize,
    n_test: usize,
    train_row_ids: &'a [usize],
    test_row_ids: &'a [usize],
}

/// Writes `train.csv`, `test.csv` and `split_manifest.toml` into `dir`.
pub fn write_split(pair: &SplitPair, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    pair.train.write_csv(BufWriter::new(File::create(dir.join("train.csv"))?))?;
    pair.test.write_csv(BufWriter::new(File::create(dir.join("test.csv"))?))?;
    let manifest = SplitManifest {
        seed: pair.seed,
        ratio: pair.ratio,
        n_train: pair.train.n_rows(),
        n_test: pair.test.n_rows(),
        train_row_ids: pair.train.row_ids(),
        test_row_ids: pair.test.row_ids(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("split_manifest.toml"), text)?;
    Ok(())
}
