use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// WHO adult obesity classes, on half-open BMI intervals (kg/m²):
/// `[30, 35)`, `[35, 40)` and `[40, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObesityClass {
    ClassI,
    ClassII,
    ClassIII,
}

impl ObesityClass {
    pub const ALL: [ObesityClass; 3] = [ObesityClass::ClassI, ObesityClass::ClassII, ObesityClass::ClassIII];

    pub fn label(self) -> &'static str {
        match self {
            ObesityClass::ClassI => "Obese - Class I",
            ObesityClass::ClassII => "Obese - Class II",
            ObesityClass::ClassIII => "Obese - Class III",
        }
    }
}

impl fmt::Display for ObesityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const OBESITY_THRESHOLD: f64 = 30.0;

/// `None` below 30 kg/m².
pub fn derive_obesity_class(bmi: f64) -> Result<Option<ObesityClass>> {
    if !bmi.is_finite() || bmi <= 0.0 {
        return Err(Error::InvalidBmi(bmi));
    }
    Ok(if bmi < OBESITY_THRESHOLD {
        None
    } else if bmi < 35.0 {
        Some(ObesityClass::ClassI)
    } else if bmi < 40.0 {
        Some(ObesityClass::ClassII)
    } else {
        Some(ObesityClass::ClassIII)
    })
}

fn bmi_values<'a>(dataset: &'a Dataset, bmi_column: &str) -> Result<&'a [f64]> {
    let (_, column) = dataset
        .column_by_name(bmi_column)
        .ok_or_else(|| Error::MissingColumn(bmi_column.to_string()))?;
    column
        .as_numeric()
        .ok_or_else(|| Error::NotNumeric(bmi_column.to_string()))
}

/// Keeps rows with BMI ≥ 30. The result may be empty; check
/// [`Dataset::is_degenerate`] before analysing it.
pub fn filter_obese(dataset: &Dataset, bmi_column: &str) -> Result<Dataset> {
    let bmi = bmi_values(dataset, bmi_column)?;
    let mut keep = Vec::new();
    for (i, &b) in bmi.iter().enumerate() {
        if derive_obesity_class(b)?.is_some() {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        log::warn!("no row has BMI >= {OBESITY_THRESHOLD}; filtered dataset is empty");
    }
    Ok(dataset.select_rows(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassFrequency {
    pub class: ObesityClass,
    pub count: usize,
    pub percent: f64,
    pub is_mode: bool,
}

/// Frequency table in class order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub rows: Vec<ClassFrequency>,
    pub total: usize,
}

impl ClassSummary {
    pub fn mode(&self) -> ObesityClass {
        self.rows.iter().find(|r| r.is_mode).expect("non-empty summary").class
    }

    pub fn get(&self, class: ObesityClass) -> &ClassFrequency {
        self.rows.iter().find(|r| r.class == class).expect("all classes present")
    }
}

pub fn summarize_classes(dataset: &Dataset, bmi_column: &str) -> Result<ClassSummary> {
    let bmi = bmi_values(dataset, bmi_column)?;
    if bmi.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = [0usize; 3];
    for (&b, &row) in bmi.iter().zip(dataset.row_ids()) {
        match derive_obesity_class(b)? {
            Some(c) => counts[c as usize] += 1,
            None => return Err(Error::NotObese { row, bmi: b }),
        }
    }
    let total = bmi.len();
    // First maximum wins, so ties go to the lower class.
    let mode = (0..3).fold(0, |best, i| if counts[i] > counts[best] { i } else { best });
    let rows = ObesityClass::ALL
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (&class, count))| ClassFrequency {
            class,
            count,
            percent: 100.0 * count as f64 / total as f64,
            is_mode: i == mode,
        })
        .collect();
    Ok(ClassSummary { rows, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Column;
    use crate::data::schema::{MeasurementLevel, Schema, VariableSpec};
    use proptest::prelude::*;

    fn bmi_dataset(bmi: Vec<f64>) -> Dataset {
        let n = bmi.len();
        let schema = Schema::new(vec![
            VariableSpec::new("BMI", MeasurementLevel::Numeric).passive(),
            VariableSpec::new("x", MeasurementLevel::SingleNominal).with_categories([1, 2]),
        ])
        .unwrap();
        Dataset::from_columns(
            schema,
            vec![Column::Numeric(bmi), Column::Categorical((0..n).map(|i| 1 + (i % 2) as i64).collect())],
        )
        .unwrap()
    }

    #[test]
    fn class_boundaries() {
        assert_eq!(derive_obesity_class(32.0).unwrap(), Some(ObesityClass::ClassI));
        assert_eq!(derive_obesity_class(40.0).unwrap(), Some(ObesityClass::ClassIII));
        assert_eq!(derive_obesity_class(29.9).unwrap(), None);
        assert_eq!(derive_obesity_class(30.0).unwrap(), Some(ObesityClass::ClassI));
        assert_eq!(derive_obesity_class(34.95).unwrap(), Some(ObesityClass::ClassI));
        assert_eq!(derive_obesity_class(35.0).unwrap(), Some(ObesityClass::ClassII));
        assert_eq!(derive_obesity_class(39.95).unwrap(), Some(ObesityClass::ClassII));
    }

    #[test]
    fn invalid_bmi() {
        for b in [0.0, -3.0, f64::NAN, f64::INFINITY] {
            assert!(derive_obesity_class(b).is_err());
        }
    }

    #[test]
    fn filter_keeps_boundary_and_preserves_row_ids() {
        let ds = bmi_dataset(vec![25.0, 30.0, 29.99, 41.0]);
        let f = filter_obese(&ds, "BMI").unwrap();
        assert_eq!(f.n_rows(), 2);
        assert_eq!(f.row_ids(), &[2, 4]);
        assert_eq!(f.schema(), ds.schema());
    }

    #[test]
    fn filter_all_below_threshold_is_degenerate() {
        let f = filter_obese(&bmi_dataset(vec![20.0, 25.0, 29.0]), "BMI").unwrap();
        assert_eq!(f.n_rows(), 0);
        assert!(f.is_degenerate());
    }

    #[test]
    fn filter_errors() {
        let ds = bmi_dataset(vec![31.0, 32.0]);
        assert!(matches!(filter_obese(&ds, "nope"), Err(Error::MissingColumn(_))));
        assert!(matches!(filter_obese(&ds, "x"), Err(Error::NotNumeric(_))));
    }

    #[test]
    fn single_row_summary() {
        let s = summarize_classes(&bmi_dataset(vec![36.0]), "BMI").unwrap();
        let counts: Vec<_> = s.rows.iter().map(|r| (r.count, r.percent)).collect();
        assert_eq!(counts, vec![(0, 0.0), (1, 100.0), (0, 0.0)]);
        assert_eq!(s.mode(), ObesityClass::ClassII);
    }

    #[test]
    fn summary_errors() {
        assert!(matches!(
            summarize_classes(&bmi_dataset(vec![]), "BMI"),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            summarize_classes(&bmi_dataset(vec![31.0, 22.0]), "BMI"),
            Err(Error::NotObese { row: 2, .. })
        ));
    }

    #[test]
    fn table_one_train_distribution() {
        // 187 / 85 / 42 rows as in the obese train partition.
        let mut bmi = vec![32.0; 187];
        bmi.extend(vec![37.0; 85]);
        bmi.extend(vec![45.0; 42]);
        let s = summarize_classes(&bmi_dataset(bmi), "BMI").unwrap();
        assert_eq!(s.total, 314);
        let expected = [(187, 59.56), (85, 27.07), (42, 13.37)];
        for (row, (count, pct)) in s.rows.iter().zip(expected) {
            assert_eq!(row.count, count);
            assert!((row.percent - pct).abs() <= 0.01, "{} vs {pct}", row.percent);
        }
        assert_eq!(s.mode(), ObesityClass::ClassI);
        let sum: f64 = s.rows.iter().map(|r| r.percent).sum();
        assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_sample_matches_independent_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let bmi: Vec<f64> = (0..100).map(|_| rng.random_range(30.0..50.0)).collect();
        let s = summarize_classes(&bmi_dataset(bmi.clone()), "BMI").unwrap();
        let recount = |lo: f64, hi: f64| bmi.iter().filter(|&&b| b >= lo && b < hi).count();
        let expected = [recount(30.0, 35.0), recount(35.0, 40.0), recount(40.0, f64::INFINITY)];
        for (row, count) in s.rows.iter().zip(expected) {
            assert_eq!(row.count, count);
            assert!((row.percent - count as f64).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn classes_partition_the_obese_range(bmi in 30.0f64..200.0) {
            let c = derive_obesity_class(bmi).unwrap().unwrap();
            let hits = [(30.0, 35.0), (35.0, 40.0), (40.0, f64::INFINITY)]
                .iter()
                .filter(|(lo, hi)| bmi >= *lo && bmi < *hi)
                .count();
            prop_assert_eq!(hits, 1);
            prop_assert_eq!(c as usize, [(30.0, 35.0), (35.0, 40.0), (40.0, f64::INFINITY)]
                .iter()
                .position(|(lo, hi)| bmi >= *lo && bmi < *hi)
                .unwrap());
        }

        #[test]
        fn filtering_is_idempotent(bmi in prop::collection::vec(15.0f64..60.0, 0..50)) {
            let ds = bmi_dataset(bmi);
            let once = filter_obese(&ds, "BMI").unwrap();
            let twice = filter_obese(&once, "BMI").unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
