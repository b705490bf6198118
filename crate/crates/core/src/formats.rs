//! JSON file formats: scenario, data and controllers.
//!
//! Matrices are written as row-major nested arrays. A matrix must be
//! nonempty, rectangular and finite to parse.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matops::Mat;
use crate::netgraph::NetworkGraph;
use crate::plant::{AgentModel, ExoSystem, Role, Scenario, Violation};

fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> std::result::Result<Mat, String> {
    let r = rows.len();
    if r == 0 {
        return Err("matrix has no rows".into());
    }
    let c = rows[0].len();
    if c == 0 {
        return Err("matrix has no columns".into());
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(format!(
            "matrix row {i} has {} entries, row 0 has {c}",
            row.len()
        ));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// `#[serde(with = "rows")]` for a single matrix.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let raw = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(raw).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "rows_opt")]` for an optional matrix.
pub mod rows_opt {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Mat>, D::Error> {
        match Option::<Vec<Vec<f64>>>::deserialize(d)? {
            None => Ok(None),
            Some(raw) => from_rows(raw).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoFile {
    #[serde(rename = "S", with = "rows")]
    pub s: Mat,
    #[serde(rename = "R", with = "rows")]
    pub r: Mat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub role: Role,
    #[serde(rename = "A", with = "rows")]
    pub a: Mat,
    #[serde(rename = "B", with = "rows")]
    pub b: Mat,
    #[serde(rename = "C", with = "rows")]
    pub c: Mat,
    #[serde(rename = "D", with = "rows")]
    pub d: Mat,
    #[serde(rename = "E", with = "rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Mat>,
    #[serde(rename = "F", with = "rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Mat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_leaders: usize,
    #[serde(with = "rows")]
    pub adjacency: Mat,
}

/// On-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub exosystem: ExoFile,
    pub agents: Vec<AgentFile>,
    pub graph: GraphFile,
}

/// Why a scenario file could not become a [`Scenario`].
#[derive(Debug)]
pub enum LoadError {
    /// Unreadable file, bad JSON, or malformed matrices.
    Parse(String),
    /// Well-formed document describing an inconsistent scenario.
    Structural(Vec<Violation>),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Parse(msg) => write!(f, "parse error: {msg}"),
            LoadError::Structural(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join("; "))
            }
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> std::result::Result<Self, LoadError> {
        serde_json::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))
    }

    pub fn into_scenario(self) -> std::result::Result<Scenario, LoadError> {
        let mut issues = Vec::new();
        let exo = match ExoSystem::new(self.exosystem.s, self.exosystem.r) {
            Ok(e) => Some(e),
            Err(e) => {
                issues.push(Violation::Structural {
                    agent: None,
                    detail: e.to_string(),
                });
                None
            }
        };
        let graph = match NetworkGraph::new(self.graph.n_leaders, self.graph.adjacency) {
            Ok(g) => Some(g),
            Err(e) => {
                issues.push(Violation::Structural {
                    agent: None,
                    detail: format!("graph: {e}"),
                });
                None
            }
        };
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.into_iter().enumerate() {
            let label = Some(i + 1);
            let model = match (a.role, a.e, a.f) {
                (Role::Leader, Some(e), Some(f)) => AgentModel::leader(a.a, a.b, a.c, a.d, e, f),
                (Role::Leader, _, _) => {
                    issues.push(Violation::Structural {
                        agent: label,
                        detail: "leader must supply both E and F".into(),
                    });
                    continue;
                }
                (Role::Follower, None, None) => AgentModel::follower(a.a, a.b, a.c, a.d),
                (Role::Follower, _, _) => {
                    issues.push(Violation::Structural {
                        agent: label,
                        detail: "follower must not supply E or F".into(),
                    });
                    continue;
                }
            };
            agents.push(model);
        }
        match (exo, graph) {
            (Some(exo), Some(graph)) if issues.is_empty() => Ok(Scenario { exo, agents, graph }),
            _ => Err(LoadError::Structural(issues)),
        }
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            exosystem: ExoFile {
                s: s.exo.s.clone(),
                r: s.exo.r.clone(),
            },
            agents: s
                .agents
                .iter()
                .map(|a| AgentFile {
                    role: a.role(),
                    a: a.a.clone(),
                    b: a.b.clone(),
                    c: a.c.clone(),
                    d: a.d.clone(),
                    e: a.injection.as_ref().map(|x| x.e.clone()),
                    f: a.injection.as_ref().map(|x| x.f.clone()),
                })
                .collect(),
            graph: GraphFile {
                n_leaders: s.graph.n_leaders(),
                adjacency: s.graph.adjacency().clone(),
            },
        }
    }
}

pub fn parse_scenario(text: &str) -> std::result::Result<Scenario, LoadError> {
    ScenarioFile::from_json(text)?.into_scenario()
}

pub fn load_scenario(path: &Path) -> std::result::Result<Scenario, LoadError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LoadError::Parse(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `bytes` next to `path` and renames over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_scenario, EXAMPLE_SCENARIO_JSON};
    use proptest::prelude::*;

    #[test]
    fn malformed_rows_are_parse_errors() {
        let text = EXAMPLE_SCENARIO_JSON.replace("[[-1.0, 1.0]]", "[[-1.0, 1.0], [2.0]]");
        assert!(matches!(parse_scenario(&text), Err(LoadError::Parse(_))));
        assert!(matches!(parse_scenario("{"), Err(LoadError::Parse(_))));
    }

    #[test]
    fn follower_with_e_is_structural() {
        let text = EXAMPLE_SCENARIO_JSON.replacen(
            "\"role\": \"follower\",",
            "\"role\": \"follower\", \"E\": [[1.0], [1.0]],",
            1,
        );
        match parse_scenario(&text) {
            Err(LoadError::Structural(v)) => {
                assert!(matches!(v[0], Violation::Structural { agent: Some(3), .. }))
            }
            other => panic!("expected structural error, got {other:?}"),
        }
    }

    #[test]
    fn example_scenario_roundtrips_exactly() {
        let s = example_scenario();
        let back = parse_scenario(&scenario_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn scenario_roundtrip_random_entries(vals in proptest::collection::vec(-1e6f64..1e6, 4)) {
            let mut s = example_scenario();
            s.agents[2].a = Mat::from_row_slice(2, 2, &vals);
            s.agents[0].injection.as_mut().unwrap().f[(0, 0)] = vals[0] / 3.0;
            let back = parse_scenario(&scenario_to_json(&s)).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
