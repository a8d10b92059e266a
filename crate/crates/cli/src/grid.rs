//! Numeric grids for sweeps: `log:a:b:n`, `lin:a:b:n` or `v1;v2;...`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Log { from: f64, to: f64, points: usize },
    Lin { from: f64, to: f64, points: usize },
    List { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("empty grid")]
    Empty,
    #[error("bad grid value {0:?}")]
    BadNumber(String),
    #[error("grid spec {0:?} must look like log:a:b:n, lin:a:b:n or v1;v2;...")]
    BadShape(String),
    #[error("log grid bounds must be positive")]
    NonPositiveLog,
    #[error("grid values must be finite")]
    NonFinite,
}

fn number(s: &str) -> Result<f64, GridError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| GridError::BadNumber(s.to_owned()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GridError::NonFinite)
    }
}

impl Grid {
    pub fn is_log(&self) -> bool {
        matches!(self, Grid::Log { .. })
    }

    pub fn values(&self) -> Vec<f64> {
        let spaced = |from: f64, to: f64, n: usize, map: &dyn Fn(f64) -> f64| -> Vec<f64> {
            if n == 1 {
                return vec![map(from)];
            }
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        map(to)
                    } else {
                        map(from + (to - from) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        };
        match self {
            Grid::Lin { from, to, points } => spaced(*from, *to, *points, &|x| x),
            Grid::Log { from, to, points } => {
                let mut vals = spaced(from.log10(), to.log10(), *points, &|x| 10f64.powf(x));
                // keep the requested endpoints exact
                vals[0] = *from;
                if *points > 1 {
                    vals[*points - 1] = *to;
                }
                vals
            }
            Grid::List { values } => values.clone(),
        }
    }
}

impl FromStr for Grid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(GridError::Empty);
        }
        if let Some((kind, rest)) = s.split_once(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 || !(kind == "log" || kind == "lin") {
                return Err(GridError::BadShape(s.to_owned()));
            }
            let (from, to) = (number(parts[0])?, number(parts[1])?);
            let points: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| GridError::BadNumber(parts[2].to_owned()))?;
            if points == 0 {
                return Err(GridError::Empty);
            }
            return if kind == "log" {
                if from <= 0.0 || to <= 0.0 {
                    Err(GridError::NonPositiveLog)
                } else {
                    Ok(Grid::Log { from, to, points })
                }
            } else {
                Ok(Grid::Lin { from, to, points })
            };
        }
        let values = s
            .split(';')
            .filter(|v| !v.trim().is_empty())
            .map(number)
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(GridError::Empty);
        }
        Ok(Grid::List { values })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Log { from, to, points } => write!(f, "log:{from}:{to}:{points}"),
            Grid::Lin { from, to, points } => write!(f, "lin:{from}:{to}:{points}"),
            Grid::List { values } => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}
