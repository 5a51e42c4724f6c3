//! TOML market-spec files.
//!
//! ```toml
//! horizon = 1.0
//! grid-step = 0.001
//! w0 = 1.0
//! epsilon = 2.0
//!
//! [utility]
//! family = "crra-log"        # or "crra-power" (p = ...) / "cara" (a = ...)
//!
//! [[segments]]
//! end-time = 1.0
//!
//! [[segments.vertices]]
//! drift = [0.08]
//! covariance = [0.04]        # lower triangle, row-major
//! atoms = [{ z = [-0.1], w = 0.5 }]
//! ```
//!
//! Unknown fields are rejected. The covariance field holds the lower
//! triangle of Σ row-major (`d(d+1)/2` entries).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

use crate::market::{
    ConfidenceSet, DiscreteLevyMeasure, JumpAtom, LevyTriplet, MarketError, MarketSpec, TimeGrid,
    Utility,
};

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("cannot read spec file: {0}")]
    Io(#[from] std::io::Error),
    #[error("spec parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("spec field error: {0}")]
    Field(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    horizon: f64,
    #[serde(rename = "grid-step")]
    grid_step: f64,
    w0: f64,
    epsilon: f64,
    utility: UtilityFile,
    segments: Vec<SegmentFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityFile {
    family: String,
    p: Option<f64>,
    a: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    #[serde(rename = "end-time")]
    end_time: f64,
    vertices: Vec<VertexFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexFile {
    drift: Vec<f64>,
    covariance: Vec<f64>,
    #[serde(default)]
    atoms: Vec<AtomFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomFile {
    z: Vec<f64>,
    w: f64,
}

fn utility_of(file: &UtilityFile) -> Result<Utility, SpecFileError> {
    match file.family.as_str() {
        "crra-log" => {
            if file.p.is_some() || file.a.is_some() {
                return Err(SpecFileError::Field(
                    "crra-log takes no parameters".into(),
                ));
            }
            Ok(Utility::LogCrra)
        }
        "crra-power" => {
            let p = file
                .p
                .ok_or_else(|| SpecFileError::Field("crra-power requires `p`".into()))?;
            if file.a.is_some() {
                return Err(SpecFileError::Field("crra-power takes `p`, not `a`".into()));
            }
            Ok(Utility::PowerCrra { exponent: p })
        }
        "cara" => {
            let a = file
                .a
                .ok_or_else(|| SpecFileError::Field("cara requires `a`".into()))?;
            if file.p.is_some() {
                return Err(SpecFileError::Field("cara takes `a`, not `p`".into()));
            }
            Ok(Utility::Cara { risk_aversion: a })
        }
        other => Err(SpecFileError::Field(format!(
            "unknown utility family `{other}` (crra-log, crra-power, cara)"
        ))),
    }
}

fn covariance_of(lower: &[f64], dim: usize) -> Result<DMatrix<f64>, SpecFileError> {
    let expected = dim * (dim + 1) / 2;
    if lower.len() != expected {
        return Err(SpecFileError::Field(format!(
            "covariance needs {expected} lower-triangular entries for dimension {dim}, got {}",
            lower.len()
        )));
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in 0..=i {
            m[(i, j)] = lower[k];
            m[(j, i)] = lower[k];
            k += 1;
        }
    }
    Ok(m)
}

fn vertex_of(file: &VertexFile, dim: usize) -> Result<LevyTriplet, SpecFileError> {
    if file.drift.len() != dim {
        return Err(SpecFileError::Field(format!(
            "vertex drift has dimension {}, expected {dim}",
            file.drift.len()
        )));
    }
    let drift = DVector::from_vec(file.drift.clone());
    let covariance = covariance_of(&file.covariance, dim)?;
    let atoms = file
        .atoms
        .iter()
        .map(|a| {
            if a.z.len() != dim {
                return Err(SpecFileError::Field(format!(
                    "atom location has dimension {}, expected {dim}",
                    a.z.len()
                )));
            }
            Ok(JumpAtom { location: DVector::from_vec(a.z.clone()), intensity: a.w })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LevyTriplet::new(drift, covariance, DiscreteLevyMeasure::new(dim, atoms)?)?)
}

/// Parses a market spec from TOML text.
pub fn parse_market_spec(text: &str) -> Result<MarketSpec, SpecFileError> {
    let file: SpecFile = toml::from_str(text)?;
    if file.segments.is_empty() {
        return Err(SpecFileError::Field("at least one segment required".into()));
    }
    let dim = file
        .segments
        .first()
        .and_then(|s| s.vertices.first())
        .map(|v| v.drift.len())
        .ok_or_else(|| SpecFileError::Field("first segment needs a vertex".into()))?;
    if dim == 0 {
        return Err(SpecFileError::Field("drift dimension must be positive".into()));
    }

    let mut breakpoints = vec![0.0];
    let mut sets = Vec::with_capacity(file.segments.len());
    for seg in &file.segments {
        breakpoints.push(seg.end_time);
        let vertices = seg
            .vertices
            .iter()
            .map(|v| vertex_of(v, dim))
            .collect::<Result<Vec<_>, _>>()?;
        sets.push(ConfidenceSet::new(vertices, file.epsilon)?);
    }
    let last = *breakpoints.last().unwrap();
    if (last - file.horizon).abs() > 1e-12 {
        return Err(SpecFileError::Field(format!(
            "last segment ends at {last}, horizon is {}",
            file.horizon
        )));
    }
    let grid = TimeGrid::new(breakpoints, file.grid_step)?;
    let utility = utility_of(&file.utility)?;
    Ok(MarketSpec::new(grid, sets, utility, file.w0, file.epsilon)?)
}

/// Loads and parses a market spec file, optionally overriding the grid step.
pub fn load_market_spec(path: &Path, step_override: Option<f64>) -> Result<MarketSpec, SpecFileError> {
    let text = std::fs::read_to_string(path)?;
    let spec = parse_market_spec(&text)?;
    match step_override {
        None => Ok(spec),
        Some(step) => {
            let grid = TimeGrid::new(spec.grid.breakpoints().to_vec(), step)?;
            Ok(MarketSpec::new(
                grid,
                spec.segments,
                spec.utility,
                spec.initial_wealth,
                spec.metric_exponent,
            )?)
        }
    }
}
