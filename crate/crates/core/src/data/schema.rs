use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restriction class applied to a variable's quantification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementLevel {
    /// Linear: the standardized observed values.
    Numeric,
    /// Monotone in the declared category order.
    Ordinal,
    /// One quantification per category, any order, shared by all dimensions.
    SingleNominal,
    /// Separate centroid coordinates per dimension; no loadings.
    MultipleNominal,
}

impl MeasurementLevel {
    pub fn is_categorical(self) -> bool {
        !matches!(self, MeasurementLevel::Numeric)
    }

    /// Single-quantification levels carry a loading vector.
    pub fn has_loadings(self) -> bool {
        !matches!(self, MeasurementLevel::MultipleNominal)
    }
}

/// What to do with cells holding one of a variable's missing codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Keep the code as an extra category, ordered after the regular ones.
    #[default]
    Category,
    /// Drop the whole row at load time.
    DropRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub level: MeasurementLevel,
    #[serde(default)]
    pub categories: Vec<i64>,
    #[serde(default)]
    pub missing_codes: Vec<i64>,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default)]
    pub description: String,
    /// Passive columns are loaded (e.g. BMI for filtering) but never analysed.
    #[serde(default)]
    pub passive: bool,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, level: MeasurementLevel) -> Self {
        VariableSpec {
            name: name.into(),
            level,
            categories: Vec::new(),
            missing_codes: Vec::new(),
            missing_policy: MissingPolicy::Category,
            description: String::new(),
            passive: false,
        }
    }

    pub fn with_categories(mut self, categories: impl IntoIterator<Item = i64>) -> Self {
        self.categories = categories.into_iter().collect();
        self
    }

    pub fn with_missing(mut self, codes: impl IntoIterator<Item = i64>, policy: MissingPolicy) -> Self {
        self.missing_codes = codes.into_iter().collect();
        self.missing_policy = policy;
        self
    }

    pub fn passive(mut self) -> Self {
        self.passive = true;
        self
    }

    /// Category order used for analysis: declared categories, then missing
    /// codes kept as categories.
    pub fn effective_categories(&self) -> Vec<i64> {
        let mut out = self.categories.clone();
        if self.missing_policy == MissingPolicy::Category {
            for &code in &self.missing_codes {
                if !out.contains(&code) {
                    out.push(code);
                }
            }
        }
        out
    }

    pub fn is_missing_code(&self, code: i64) -> bool {
        self.missing_codes.contains(&code)
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Schema("variable with empty name".into()));
        }
        let mut seen = HashSet::new();
        for &c in &self.categories {
            if !seen.insert(c) {
                return Err(Error::Schema(format!(
                    "variable `{}` lists category {c} twice",
                    self.name
                )));
            }
        }
        if self.level == MeasurementLevel::Numeric && !self.categories.is_empty() {
            return Err(Error::Schema(format!(
                "numeric variable `{}` cannot declare categories",
                self.name
            )));
        }
        if self.missing_policy == MissingPolicy::DropRow {
            if let Some(c) = self.missing_codes.iter().find(|c| seen.contains(c)) {
                return Err(Error::Schema(format!(
                    "variable `{}`: missing code {c} is also a category",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "variable", default)]
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema { variables };
        schema.validate()?;
        Ok(schema)
    }

    /// Parses the TOML schema format (`[[variable]]` tables).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Path {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for v in &self.variables {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Indices of the variables that enter the analysis.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.variables.len())
            .filter(|&i| !self.variables[i].passive)
            .collect()
    }
}
