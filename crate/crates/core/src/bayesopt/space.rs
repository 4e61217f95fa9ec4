use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single coordinate of a raw configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Configuration = Vec<RawValue>;

pub fn format_config(config: &[RawValue]) -> String {
    config.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" / ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimensionKind {
    Categorical {
        levels: Vec<String>,
    },
    Numeric {
        values: Vec<f64>,
        #[serde(default)]
        unit: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimensionKind,
}

impl Dimension {
    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn numeric(name: &str, unit: &str, values: &[f64]) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Numeric {
                values: values.to_vec(),
                unit: unit.into(),
            },
        }
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            DimensionKind::Categorical { levels } => levels.len(),
            DimensionKind::Numeric { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn code(&self, level: usize) -> f64 {
        match &self.kind {
            DimensionKind::Categorical { levels } => {
                if levels.len() == 1 {
                    0.0
                } else {
                    level as f64 / (levels.len() - 1) as f64
                }
            }
            DimensionKind::Numeric { values, .. } => {
                let (lo, hi) = (values[0], values[values.len() - 1]);
                if hi == lo {
                    0.0
                } else {
                    (values[level] - lo) / (hi - lo)
                }
            }
        }
    }

    fn raw(&self, level: usize) -> RawValue {
        match &self.kind {
            DimensionKind::Categorical { levels } => RawValue::Text(levels[level].clone()),
            DimensionKind::Numeric { values, .. } => RawValue::Number(values[level]),
        }
    }

    fn level_of(&self, value: &RawValue) -> Result<usize> {
        match (&self.kind, value) {
            (DimensionKind::Categorical { levels }, RawValue::Text(s)) => {
                levels.iter().position(|l| l == s).ok_or_else(|| {
                    Error::Argument(format!(
                        "`{s}` is not a level of {} (levels: {})",
                        self.name,
                        levels.join(", ")
                    ))
                })
            }
            (DimensionKind::Numeric { values, unit }, RawValue::Number(v)) => {
                if let Some(i) = values.iter().position(|g| (g - v).abs() <= 1e-9 * g.abs().max(1.0)) {
                    return Ok(i);
                }
                let upper = values.iter().position(|g| g > v);
                let nearest: Vec<String> = match upper {
                    Some(0) => vec![values[0].to_string()],
                    Some(i) => vec![values[i - 1].to_string(), values[i].to_string()],
                    None => vec![values[values.len() - 1].to_string()],
                };
                Err(Error::Argument(format!(
                    "{v} {unit} is off the {} grid; nearest grid values: {}",
                    self.name,
                    nearest.join(", ")
                )))
            }
            (DimensionKind::Numeric { .. }, RawValue::Text(s)) => match s.trim().parse::<f64>() {
                Ok(v) => self.level_of(&RawValue::Number(v)),
                Err(_) => Err(Error::Argument(format!("{} expects a number, got `{s}`", self.name))),
            },
            (DimensionKind::Categorical { .. }, RawValue::Number(v)) => self.level_of(&RawValue::Text(v.to_string())),
        }
    }
}

/// Finite Cartesian grid over categorical and numeric dimensions.
///
/// Grid points are indexed in mixed radix with the first dimension most
/// significant; since level codes increase with level index, index order is
/// also lexicographic order of the encoded points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dimensions: Vec<Dimension>,
}

impl SearchSpace {
    /// Builds a space, sorting numeric grids ascending.
    pub fn new(mut dimensions: Vec<Dimension>) -> Result<Self> {
        for d in &mut dimensions {
            if let DimensionKind::Numeric { values, .. } = &mut d.kind {
                values.sort_by(f64::total_cmp);
            }
        }
        let space = SearchSpace { dimensions };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() {
            return Err(Error::Argument("search space has no dimensions".into()));
        }
        for d in &self.dimensions {
            if d.is_empty() {
                return Err(Error::Argument(format!("dimension {} has no levels", d.name)));
            }
            match &d.kind {
                DimensionKind::Categorical { levels } => {
                    for (i, l) in levels.iter().enumerate() {
                        if levels[..i].contains(l) {
                            return Err(Error::Argument(format!("dimension {} repeats level {l}", d.name)));
                        }
                    }
                }
                DimensionKind::Numeric { values, .. } => {
                    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::Argument(format!(
                            "dimension {} needs finite, distinct, ascending values",
                            d.name
                        )));
                    }
                }
            }
        }
        if self.grid_size() < 2 {
            return Err(Error::Argument("search space grid must hold at least 2 points".into()));
        }
        Ok(())
    }

    /// Perovskite nanowire fabrication grid with 8400 points.
    pub fn fabrication_default() -> Self {
        SearchSpace::new(vec![
            Dimension::categorical(
                "perovskite_type",
                &["MAPbCl3", "MAPbBr3", "MAPbI3", "CsPbI3", "FAPbI3", "FAPbBr3"],
            ),
            Dimension::numeric("nw_length", "um", &[0.6, 1.0, 1.2, 1.5, 1.8, 2.0, 2.5, 3.0]),
            Dimension::numeric("nw_diameter", "nm", &[10.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0]),
            Dimension::numeric("pb_ed_time", "min", &[5.0, 10.0, 15.0, 20.0, 25.0]),
            Dimension::numeric("ag_thickness", "nm", &[50.0, 100.0, 200.0, 400.0, 600.0]),
        ])
        .expect("default space is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SearchSpace = serde_json::from_str(text)?;
        SearchSpace::new(raw.dimensions)
    }

    pub fn dim(&self) -> usize {
        self.dimensions.len()
    }

    pub fn grid_size(&self) -> usize {
        self.dimensions.iter().map(Dimension::len).product()
    }

    fn levels_of_index(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.dim()];
        for (slot, d) in levels.iter_mut().zip(&self.dimensions).rev() {
            *slot = index % d.len();
            index /= d.len();
        }
        levels
    }

    fn levels_of(&self, config: &[RawValue]) -> Result<Vec<usize>> {
        if config.len() != self.dim() {
            return Err(Error::Argument(format!(
                "configuration has {} values, space has {} dimensions",
                config.len(),
                self.dim()
            )));
        }
        self.dimensions.iter().zip(config).map(|(d, v)| d.level_of(v)).collect()
    }

    /// Grid index of an on-grid configuration.
    pub fn index_of(&self, config: &[RawValue]) -> Result<usize> {
        let levels = self.levels_of(config)?;
        Ok(levels
            .iter()
            .zip(&self.dimensions)
            .fold(0, |acc, (l, d)| acc * d.len() + l))
    }

    /// Raw configuration at grid index `index`.
    pub fn point(&self, index: usize) -> Result<Configuration> {
        if index >= self.grid_size() {
            return Err(Error::Argument(format!("grid index {index} out of range")));
        }
        Ok(self
            .levels_of_index(index)
            .iter()
            .zip(&self.dimensions)
            .map(|(&l, d)| d.raw(l))
            .collect())
    }

    pub fn encode(&self, config: &[RawValue]) -> Result<Vec<f64>> {
        let levels = self.levels_of(config)?;
        Ok(levels.iter().zip(&self.dimensions).map(|(&l, d)| d.code(l)).collect())
    }

    pub fn encode_index(&self, index: usize) -> Vec<f64> {
        self.levels_of_index(index)
            .iter()
            .zip(&self.dimensions)
            .map(|(&l, d)| d.code(l))
            .collect()
    }

    pub fn decode(&self, point: &[f64]) -> Result<Configuration> {
        if point.len() != self.dim() {
            return Err(Error::Argument("encoded point has the wrong dimension".into()));
        }
        point
            .iter()
            .zip(&self.dimensions)
            .map(|(&c, d)| {
                (0..d.len())
                    .find(|&l| (d.code(l) - c).abs() <= 1e-12)
                    .map(|l| d.raw(l))
                    .ok_or_else(|| Error::Argument(format!("code {c} is not a level of {}", d.name)))
            })
            .collect()
    }

    /// All encoded grid points, row-major with `dim()` values per point.
    pub fn encoded_grid(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid_size() * self.dim());
        for i in 0..self.grid_size() {
            out.extend(self.encode_index(i));
        }
        out
    }

    /// Parses textual values (as typed on a command line) into an on-grid
    /// configuration.
    pub fn parse_config(&self, values: &[&str]) -> Result<Configuration> {
        if values.len() != self.dim() {
            return Err(Error::Argument(format!(
                "expected {} values ({}), got {}",
                self.dim(),
                self.dimensions
                    .iter()
                    .map(|d| d.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                values.len()
            )));
        }
        let config: Configuration = values.iter().map(|v| RawValue::Text(v.trim().to_string())).collect();
        let levels = self.levels_of(&config)?;
        Ok(levels.iter().zip(&self.dimensions).map(|(&l, d)| d.raw(l)).collect())
    }
}
