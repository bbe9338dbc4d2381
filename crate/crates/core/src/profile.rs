//! Component profiles: which variables define each retained component and
//! how their quantified values are distributed.

use serde::{Deserialize, Serialize};

use crate::als::{CatpcaModel, VariableQuantification};
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::extraction::LoadingMatrix;

/// Below this absolute skewness a distribution counts as symmetric.
pub const SYMMETRIC_BAND: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub variable: String,
    pub component: usize,
    pub loading: f64,
}

/// Assigns each variable to the component (among `components`) where its
/// absolute loading is largest; ties go to the lowest component.
pub fn assign_variables(loadings: &LoadingMatrix, components: &[usize]) -> Result<Vec<Assignment>> {
    let mut sorted = components.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let restricted = loadings.restrict(&sorted)?;
    if sorted.is_empty() {
        return Ok(Vec::new());
    }
    Ok(restricted
        .variables
        .iter()
        .zip(&restricted.values)
        .map(|(name, row)| {
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = c;
                }
            }
            Assignment {
                variable: name.clone(),
                component: sorted[best],
                loading: row[best],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewDirection {
    Left,
    Right,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skew {
    pub direction: SkewDirection,
    pub value: f64,
    pub warning: Option<String>,
}

/// Frequency-weighted third standardized moment of a quantified variable.
/// Positive is right (a long upper tail), negative is left.
pub fn quantification_skew(values: &[f64], frequencies: &[usize]) -> Result<Skew> {
    if values.len() != frequencies.len() {
        return Err(Error::InvalidTable("values and frequencies differ in length".into()));
    }
    let pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(frequencies)
        .filter(|(_, &f)| f > 0)
        .map(|(&v, &f)| (v, f as f64))
        .collect();
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if distinct.len() < 3 {
        return Ok(Skew {
            direction: SkewDirection::Symmetric,
            value: 0.0,
            warning: Some(format!(
                "{} distinct values; skew is not meaningful",
                distinct.len()
            )),
        });
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mean = pairs.iter().map(|(v, f)| v * f).sum::<f64>() / total;
    let moment = |k: i32| pairs.iter().map(|(v, f)| f * (v - mean).powi(k)).sum::<f64>() / total;
    let value = moment(3) / moment(2).powf(1.5);
    let direction = if value.abs() < SYMMETRIC_BAND {
        SkewDirection::Symmetric
    } else if value > 0.0 {
        SkewDirection::Right
    } else {
        SkewDirection::Left
    };
    Ok(Skew {
        direction,
        value,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProfile {
    pub variable: String,
    pub loading: f64,
    /// `(category label, quantified value, count)` in category order.
    pub categories: Vec<(String, Option<f64>, usize)>,
    pub skew: Option<Skew>,
}

impl MemberProfile {
    pub fn is_positive(&self) -> bool {
        self.loading >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentProfile {
    pub component: usize,
    pub vaf_percent: Option<f64>,
    pub members: Vec<MemberProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub components: Vec<ComponentProfile>,
    pub warnings: Vec<String>,
}

impl ProfileReport {
    /// `(component, member count)` in component order.
    pub fn membership_counts(&self) -> Vec<(usize, usize)> {
        self.components.iter().map(|c| (c.component, c.members.len())).collect()
    }
}

/// Groups assignments by component, without quantification detail.
pub fn membership_report(assignments: &[Assignment], components: &[usize]) -> ProfileReport {
    let mut sorted = components.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut warnings = Vec::new();
    let components = sorted
        .into_iter()
        .map(|component| {
            let members: Vec<MemberProfile> = assignments
                .iter()
                .filter(|a| a.component == component)
                .map(|a| MemberProfile {
                    variable: a.variable.clone(),
                    loading: a.loading,
                    categories: Vec::new(),
                    skew: None,
                })
                .collect();
            if members.is_empty() {
                warnings.push(format!("component {component} has no assigned variables"));
            }
            ComponentProfile {
                component,
                vaf_percent: None,
                members,
            }
        })
        .collect();
    ProfileReport { components, warnings }
}

fn category_counts(dataset: &Dataset, name: &str, labels: &[String]) -> Option<Vec<usize>> {
    let (spec, column) = dataset.column_by_name(name)?;
    let mut counts = vec![0; labels.len()];
    match column {
        Column::Categorical(cells) => {
            let cats = spec.effective_categories();
            for c in cells {
                if let Some(i) = cats.iter().position(|k| k == c) {
                    counts[i] += 1;
                }
            }
        }
        Column::Numeric(cells) => {
            for v in cells {
                if let Some(i) = labels.iter().position(|l| *l == v.to_string()) {
                    counts[i] += 1;
                }
            }
        }
    }
    Some(counts)
}

/// Full profile: per component its members with loading sign, category
/// quantifications, category counts in `dataset` and skew direction.
pub fn profile_components(
    model: &CatpcaModel,
    assignments: &[Assignment],
    components: &[usize],
    dataset: &Dataset,
) -> Result<ProfileReport> {
    let mut report = membership_report(assignments, components);
    let m = model.n_variables() as f64;
    for comp in &mut report.components {
        comp.vaf_percent = model.eigenvalues.get(comp.component - 1).map(|l| 100.0 * l / m);
        for member in &mut comp.members {
            let j = model
                .variables
                .iter()
                .position(|v| v.name == member.variable)
                .ok_or_else(|| Error::UnknownColumn(member.variable.clone()))?;
            let (labels, values): (Vec<String>, Vec<Option<f64>>) = match &model.quantifications[j] {
                VariableQuantification::Category(q) => (
                    q.categories.iter().map(|c| c.to_string()).collect(),
                    q.values.clone(),
                ),
                VariableQuantification::Numeric { affine, values, .. } => (
                    values.iter().map(|v| v.to_string()).collect(),
                    values.iter().map(|&v| Some(affine.apply(v))).collect(),
                ),
                VariableQuantification::Multiple { .. } => continue,
            };
            let counts = category_counts(dataset, &member.variable, &labels).ok_or_else(|| {
                Error::MissingColumn(member.variable.clone())
            })?;
            let q: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
            let skew = quantification_skew(&q, &counts)?;
            if let Some(w) = &skew.warning {
                report.warnings.push(format!("{}: {w}", member.variable));
            }
            member.skew = Some(skew);
            member.categories = labels
                .into_iter()
                .zip(values)
                .zip(counts)
                .map(|((l, v), c)| (l, v, c))
                .collect();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>) -> LoadingMatrix {
        let names = (0..rows.len()).map(|i| format!("v{i}")).collect();
        let dims = (1..=rows[0].len()).collect();
        LoadingMatrix::new(names, dims, rows).unwrap()
    }

    #[test]
    fn ties_go_to_the_lowest_component() {
        let a = assign_variables(&matrix(vec![vec![0.6, -0.6, 0.1]]), &[1, 2, 3]).unwrap();
        assert_eq!(a[0].component, 1);
        let a = assign_variables(&matrix(vec![vec![0.2, -0.7, 0.7]]), &[1, 2, 3]).unwrap();
        assert_eq!((a[0].component, a[0].loading), (2, -0.7));
    }

    #[test]
    fn skew_of_a_concentrated_distribution() {
        // Standardized three-point variable with 90/5/5 mass.
        let raw = [0.0, 1.0, 2.0];
        let f = [90usize, 5, 5];
        let mean = (0.0 * 90.0 + 5.0 + 10.0) / 100.0;
        let sd = ((90.0 * mean * mean + 5.0 * (1.0 - mean) * (1.0 - mean) + 5.0 * (2.0 - mean) * (2.0 - mean)) / 100.0f64).sqrt();
        let z: Vec<f64> = raw.iter().map(|x| (x - mean) / sd).collect();
        let expected = (0..3).map(|i| f[i] as f64 * z[i].powi(3)).sum::<f64>() / 100.0;
        let s = quantification_skew(&z, &f).unwrap();
        assert!((s.value - expected).abs() < 1e-12);
        assert_eq!(s.direction, SkewDirection::Right);
        let mirrored: Vec<f64> = z.iter().map(|v| -v).collect();
        assert_eq!(quantification_skew(&mirrored, &f).unwrap().direction, SkewDirection::Left);
    }

    #[test]
    fn two_point_is_symmetric_with_warning() {
        let s = quantification_skew(&[-1.0, 1.0], &[50, 50]).unwrap();
        assert_eq!(s.direction, SkewDirection::Symmetric);
        assert!(s.warning.is_some());
    }

    #[test]
    fn empty_component_warns() {
        let a = assign_variables(&matrix(vec![vec![0.9, 0.1], vec![0.8, 0.2]]), &[1, 2]).unwrap();
        let r = membership_report(&a, &[1, 2]);
        assert_eq!(r.membership_counts(), vec![(1, 2), (2, 0)]);
        assert_eq!(r.warnings.len(), 1);
    }

    proptest! {
        #[test]
        fn assignment_ignores_column_signs(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..10), flip in 0usize..3) {
            let m = matrix(rows.clone());
            let flipped = matrix(rows.iter().map(|r| r.iter().enumerate().map(|(c, v)| if c == flip { -v } else { *v }).collect()).collect());
            let a = assign_variables(&m, &[1, 2, 3]).unwrap();
            let b = assign_variables(&flipped, &[1, 2, 3]).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.component, y.component);
                prop_assert_eq!(x.loading.abs(), y.loading.abs());
            }
            let r = membership_report(&a, &[1, 2, 3]);
            prop_assert_eq!(r.membership_counts().iter().map(|c| c.1).sum::<usize>(), rows.len());
        }

        #[test]
        fn mirroring_flips_skew(values in prop::collection::vec(-3.0f64..3.0, 3..7), freqs in prop::collection::vec(1usize..50, 7)) {
            let f = &freqs[..values.len()];
            let s = quantification_skew(&values, f).unwrap();
            let mirrored: Vec<f64> = values.iter().map(|v| -v).collect();
            let t = quantification_skew(&mirrored, f).unwrap();
            prop_assert!((s.value + t.value).abs() < 1e-9);
        }
    }
}
