//! Model and path documents.
//!
//! Models are JSON key/value documents with 1-based entry indices:
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "monomials": [ { "entries": [[1, 1], [1, 1]], "coeff": 0.75 } ],
//!   "diagonal_only": true,
//!   "formal": false,
//!   "atoms": [ { "point": [0.7071, 0.7071], "weight": 0.25 } ],
//!   "t": 0.5
//! }
//! ```
//!
//! Path literals carry a grid and values whose shape picks the cone:
//! numbers for scalar paths, two-element arrays for eigenvalue pairs, and
//! square nested arrays for dense PSD matrices.

use crate::model::{CovarianceSpec, ModelInstance, Monomial, SpinMeasure};
use crate::parisi::AnyPath;
use crate::paths::{MatrixPath, PairPath, ScalarPath};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MonomialDoc {
    entries: Vec<[usize; 2]>,
    coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AtomDoc {
    point: Vec<f64>,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    dimension: usize,
    monomials: Vec<MonomialDoc>,
    #[serde(default)]
    diagonal_only: Option<bool>,
    #[serde(default)]
    formal: bool,
    atoms: Vec<AtomDoc>,
    #[serde(default)]
    t: Option<f64>,
}

/// Parses a model document, validating every invariant of the underlying
/// types (index ranges, weight normalization, unit-ball support,
/// coefficient signs, dimension agreement).
pub fn parse_model_str(text: &str) -> Result<ModelInstance> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.dimension == 0 || doc.dimension > 8 {
        return Err(Error::InvalidModel(format!(
            "dimension {} outside the supported range 1..=8",
            doc.dimension
        )));
    }
    let monomials: Vec<Monomial> = doc
        .monomials
        .iter()
        .map(|m| -> Result<Monomial> {
            let entries = m
                .entries
                .iter()
                .map(|&[d, dp]| -> Result<(usize, usize)> {
                    if d == 0 || dp == 0 {
                        return Err(Error::InvalidModel(
                            "entry indices are 1-based; got 0".into(),
                        ));
                    }
                    Ok((d - 1, dp - 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Monomial {
                entries,
                coeff: m.coeff,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = CovarianceSpec::new(doc.dimension, monomials, doc.formal)?;
    if let Some(claimed) = doc.diagonal_only {
        if claimed != spec.diagonal_only() {
            return Err(Error::InvalidModel(format!(
                "diagonal_only flag is {claimed} but the monomial list says {}",
                spec.diagonal_only()
            )));
        }
    }
    let measure = SpinMeasure::new(
        doc.dimension,
        doc.atoms.into_iter().map(|a| (a.point, a.weight)).collect(),
    )?;
    let t = doc.t.unwrap_or(0.0);
    if !t.is_finite() {
        return Err(Error::InvalidModel("t must be finite".into()));
    }
    ModelInstance::new(spec, measure, t)
}

/// Serializes a model in canonical form (sorted monomials, 1-based
/// indices); `parse(serialize(m))` is the identity on canonical models.
pub fn model_to_string(model: &ModelInstance) -> String {
    let doc = ModelDoc {
        dimension: model.dimension(),
        monomials: model
            .covariance
            .monomials()
            .iter()
            .map(|m| MonomialDoc {
                entries: m.entries.iter().map(|&(d, dp)| [d + 1, dp + 1]).collect(),
                coeff: m.coeff,
            })
            .collect(),
        diagonal_only: Some(model.covariance.diagonal_only()),
        formal: model.covariance.formal(),
        atoms: model
            .measure
            .atoms()
            .iter()
            .map(|(p, w)| AtomDoc {
                point: p.clone(),
                weight: *w,
            })
            .collect(),
        t: Some(model.t),
    };
    serde_json::to_string_pretty(&doc).expect("model documents serialize")
}

/// Resolves a `--model` argument: a preset specifier or a file path.
///
/// Presets: `sk`, `potts:D`, `bp_sk:alpha`, `formal_cubic`,
/// `ising_diag:D:deg=coeff[,deg=coeff...]`.
pub fn resolve_model(arg: &str) -> Result<ModelInstance> {
    if let Some(model) = parse_preset(arg)? {
        return Ok(model);
    }
    let text = std::fs::read_to_string(arg)?;
    parse_model_str(&text)
}

fn parse_preset(arg: &str) -> Result<Option<ModelInstance>> {
    use crate::model::presets;
    let mut parts = arg.split(':');
    let head = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    let model = match head {
        "sk" => Some(presets::sk()),
        "formal_cubic" => Some(presets::formal_cubic()),
        "potts" => {
            let d: usize = rest
                .first()
                .ok_or_else(|| Error::InvalidConfig("potts:D needs a dimension".into()))?
                .parse()
                .map_err(|_| Error::InvalidConfig("potts:D needs an integer D".into()))?;
            if !(2..=8).contains(&d) {
                return Err(Error::InvalidConfig("potts dimension must be 2..=8".into()));
            }
            Some(presets::potts(d))
        }
        "bp_sk" => {
            let alpha: f64 = rest
                .first()
                .ok_or_else(|| Error::InvalidConfig("bp_sk:alpha needs a value".into()))?
                .parse()
                .map_err(|_| Error::InvalidConfig("bp_sk:alpha needs a number".into()))?;
            if !(alpha >= 0.0) {
                return Err(Error::InvalidConfig("bp_sk alpha must be >= 0".into()));
            }
            Some(presets::bp_sk(alpha))
        }
        "ising_diag" => {
            if rest.len() != 2 {
                return Err(Error::InvalidConfig(
                    "ising_diag:D:deg=coeff[,deg=coeff...] expected".into(),
                ));
            }
            let d: usize = rest[0]
                .parse()
                .map_err(|_| Error::InvalidConfig("ising_diag needs an integer D".into()))?;
            let mut coeffs = Vec::new();
            for term in rest[1].split(',') {
                let (deg, coeff) = term.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("bad ising_diag term '{term}'"))
                })?;
                let deg: usize = deg
                    .parse()
                    .map_err(|_| Error::InvalidConfig("bad degree".into()))?;
                let coeff: f64 = coeff
                    .parse()
                    .map_err(|_| Error::InvalidConfig("bad coefficient".into()))?;
                if deg == 0 || !(coeff >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "ising_diag terms need degree >= 1 and coeff >= 0".into(),
                    ));
                }
                coeffs.push((deg, coeff));
            }
            if !(1..=8).contains(&d) || coeffs.is_empty() {
                return Err(Error::InvalidConfig("bad ising_diag preset".into()));
            }
            Some(presets::ising_diag(d, &coeffs))
        }
        _ => None,
    };
    Ok(model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PathValues {
    Scalar(Vec<f64>),
    Pair(Vec<[f64; 2]>),
    Matrix(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathDoc {
    grid: Vec<f64>,
    values: PathValues,
}

/// Parses a path literal `{grid, values}`; the value shape selects the
/// cone. All step-path invariants (grid endpoints and ordering,
/// monotonicity in the cone order) are enforced.
pub fn parse_path_literal_str(text: &str) -> Result<AnyPath> {
    let doc: PathDoc = serde_json::from_str(text)?;
    if doc.grid.len() > 4096 {
        return Err(Error::InvalidPath("grid too large".into()));
    }
    for g in &doc.grid {
        if !g.is_finite() {
            return Err(Error::InvalidPath("non-finite grid point".into()));
        }
    }
    match doc.values {
        PathValues::Scalar(values) => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPath("non-finite value".into()));
            }
            Ok(AnyPath::Scalar(ScalarPath::new(doc.grid, values)?))
        }
        PathValues::Pair(values) => {
            if values.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
                return Err(Error::InvalidPath("non-finite value".into()));
            }
            Ok(AnyPath::Pair(PairPath::new(doc.grid, values)?))
        }
        PathValues::Matrix(values) => {
            let mut dense = Vec::with_capacity(values.len());
            for level in &values {
                let d = level.len();
                if d == 0 || d > 8 || level.iter().any(|row| row.len() != d) {
                    return Err(Error::InvalidPath("matrix levels must be square".into()));
                }
                let mut m = DMatrix::<f64>::zeros(d, d);
                for (i, row) in level.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            return Err(Error::InvalidPath("non-finite value".into()));
                        }
                        m[(i, j)] = v;
                    }
                }
                let sym_dev = (&m - m.transpose()).abs().max();
                if sym_dev > 1e-9 {
                    return Err(Error::InvalidPath(format!(
                        "matrix level is not symmetric (deviation {sym_dev:.3e})"
                    )));
                }
                dense.push(m);
            }
            Ok(AnyPath::Matrix(MatrixPath::new(doc.grid, dense)?))
        }
    }
}

pub fn path_to_string(path: &AnyPath) -> String {
    let doc = PathDoc {
        grid: path.grid().to_vec(),
        values: match path {
            AnyPath::Scalar(p) => PathValues::Scalar(p.values().to_vec()),
            AnyPath::Pair(p) => PathValues::Pair(p.values().to_vec()),
            AnyPath::Matrix(p) => PathValues::Matrix(
                p.values()
                    .iter()
                    .map(|m| {
                        (0..m.nrows())
                            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                            .collect()
                    })
                    .collect(),
            ),
        },
    };
    serde_json::to_string_pretty(&doc).expect("path documents serialize")
}

/// CSV sampling of a path for plotting: `u` plus one column per value
/// component, sampled on a uniform grid plus both sides of every jump.
pub fn path_to_csv(path: &AnyPath, samples: usize) -> String {
    let rows = path.value_rows();
    let n_comp = rows.first().map_or(0, |r| r.len());
    let mut out = String::from("u");
    for c in 0..n_comp {
        out.push_str(&format!(",v{}", c + 1));
    }
    out.push('\n');
    let mut us: Vec<f64> = (0..samples)
        .map(|i| i as f64 / samples as f64)
        .collect();
    for &g in path.grid() {
        if g > 0.0 && g < 1.0 {
            us.push(g - 1e-12);
            us.push(g);
        }
    }
    us.sort_by(f64::total_cmp);
    us.dedup();
    let grid = path.grid();
    for u in us {
        let level = match grid.partition_point(|&g| g <= u) {
            0 => 0,
            k => (k - 1).min(rows.len() - 1),
        };
        out.push_str(&format!("{u:.12}"));
        for v in &rows[level] {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn model_round_trip_is_canonical() {
        for model in [
            presets::sk(),
            presets::potts(3),
            presets::bp_sk(1.5),
            presets::formal_cubic(),
        ] {
            let text = model_to_string(&model);
            let back = parse_model_str(&text).unwrap();
            assert_eq!(model_to_string(&back), text);
        }
    }

    #[test]
    fn rejects_bad_models() {
        // Zero-based index.
        let bad = r#"{"dimension":1,"monomials":[{"entries":[[0,1]],"coeff":1.0}],
                      "atoms":[{"point":[1.0],"weight":1.0}]}"#;
        assert!(parse_model_str(bad).is_err());
        // Atom outside the unit ball.
        let bad = r#"{"dimension":2,"monomials":[{"entries":[[1,1]],"coeff":1.0}],
                      "atoms":[{"point":[1.0,1.0],"weight":1.0}]}"#;
        assert!(parse_model_str(bad).is_err());
        // Negative coefficient without the formal flag.
        let bad = r#"{"dimension":1,"monomials":[{"entries":[[1,1]],"coeff":-1.0}],
                      "atoms":[{"point":[1.0],"weight":1.0}]}"#;
        assert!(parse_model_str(bad).is_err());
        // Weights not normalized.
        let bad = r#"{"dimension":1,"monomials":[{"entries":[[1,1]],"coeff":1.0}],
                      "atoms":[{"point":[1.0],"weight":0.7}]}"#;
        assert!(parse_model_str(bad).is_err());
    }

    #[test]
    fn preset_specifiers() {
        assert!(resolve_model("sk").is_ok());
        assert!(resolve_model("potts:3").is_ok());
        assert!(resolve_model("bp_sk:0.5").is_ok());
        assert!(resolve_model("formal_cubic").is_ok());
        assert!(resolve_model("ising_diag:2:2=1,4=0.5").is_ok());
        assert!(resolve_model("potts:1").is_err());
        assert!(resolve_model("ising_diag:2:0=1").is_err());
    }

    #[test]
    fn path_literals_round_trip() {
        let scalar = r#"{"grid":[0.0,0.5,1.0],"values":[0.2,0.7]}"#;
        let p = parse_path_literal_str(scalar).unwrap();
        assert!(matches!(p, AnyPath::Scalar(_)));
        let again = parse_path_literal_str(&path_to_string(&p)).unwrap();
        assert_eq!(path_to_string(&p), path_to_string(&again));

        let pair = r#"{"grid":[0.0,1.0],"values":[[0.1,0.4]]}"#;
        assert!(matches!(
            parse_path_literal_str(pair).unwrap(),
            AnyPath::Pair(_)
        ));

        let matrix = r#"{"grid":[0.0,1.0],"values":[[[0.5,0.1],[0.1,0.5]]]}"#;
        assert!(matches!(
            parse_path_literal_str(matrix).unwrap(),
            AnyPath::Matrix(_)
        ));
    }

    #[test]
    fn path_literal_rejects_violations() {
        // Decreasing values.
        assert!(parse_path_literal_str(r#"{"grid":[0.0,0.5,1.0],"values":[0.7,0.2]}"#).is_err());
        // Grid not ending at 1.
        assert!(parse_path_literal_str(r#"{"grid":[0.0,0.5],"values":[0.2]}"#).is_err());
        // Asymmetric matrix level.
        assert!(parse_path_literal_str(
            r#"{"grid":[0.0,1.0],"values":[[[0.5,0.3],[0.1,0.5]]]}"#
        )
        .is_err());
        // Non-PSD increment.
        assert!(parse_path_literal_str(
            r#"{"grid":[0.0,1.0],"values":[[[1.0,2.0],[2.0,1.0]]]}"#
        )
        .is_err());
    }

    #[test]
    fn csv_export_has_jump_rows() {
        let p = parse_path_literal_str(r#"{"grid":[0.0,0.5,1.0],"values":[0.2,0.7]}"#).unwrap();
        let csv = path_to_csv(&p, 4);
        assert!(csv.starts_with("u,v1\n"));
        assert!(csv.contains("0.500000000000"));
        let rows: Vec<&str> = csv.trim().lines().collect();
        assert!(rows.len() >= 6);
    }
}
