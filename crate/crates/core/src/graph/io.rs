//! Dataset interchange format (schema version 1).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GraphInstance, HierarchicalGraph, Splits};
use crate::canonical::to_canonical_writer;
use crate::numeric::Tensor;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported dataset schema_version {found}, expected {expected}")]
    Version { found: u64, expected: u32 },
    #[error("invalid dataset field {field}: {reason}")]
    Invalid { field: String, reason: String },
}

// Field order is alphabetical: serde emits keys in declaration order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    hier_edges: Vec<[usize; 2]>,
    instances: Vec<InstanceRecord>,
    num_classes: usize,
    schema_version: u32,
    splits: SplitRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    generator_tag: Option<String>,
    id: usize,
    label: Option<usize>,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitRecord {
    labeled: Vec<usize>,
    test: Vec<usize>,
    unlabeled: Vec<usize>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u64>,
}

fn sorted_pairs(pairs: &[(usize, usize)]) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = pairs.iter().map(|&(u, v)| [u, v]).collect();
    out.sort_unstable();
    out
}

impl From<&HierarchicalGraph> for DatasetFile {
    fn from(h: &HierarchicalGraph) -> Self {
        DatasetFile {
            hier_edges: sorted_pairs(&h.hier_edges),
            instances: h
                .instances
                .iter()
                .map(|g| InstanceRecord {
                    edges: sorted_pairs(&g.edges),
                    features: g.features.to_rows(),
                    generator_tag: g.generator_tag.clone(),
                    id: g.id,
                    label: g.label,
                    n: g.n,
                })
                .collect(),
            num_classes: h.num_classes,
            schema_version: SCHEMA_VERSION,
            splits: SplitRecord {
                labeled: h.splits.labeled.clone(),
                test: h.splits.test.clone(),
                unlabeled: h.splits.unlabeled.clone(),
            },
        }
    }
}

fn invalid(field: String, reason: impl Into<String>) -> DatasetError {
    DatasetError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl TryFrom<DatasetFile> for HierarchicalGraph {
    type Error = DatasetError;

    fn try_from(file: DatasetFile) -> Result<Self, DatasetError> {
        let mut instances = Vec::with_capacity(file.instances.len());
        for (k, rec) in file.instances.into_iter().enumerate() {
            let field = |name: &str| format!("instances[{k}].{name}");
            for (e, &[u, v]) in rec.edges.iter().enumerate() {
                if u >= rec.n || v >= rec.n {
                    return Err(invalid(
                        format!("instances[{k}].edges[{e}]"),
                        format!("endpoint of [{u},{v}] not below n={}", rec.n),
                    ));
                }
            }
            if rec.features.len() != rec.n {
                return Err(invalid(
                    field("features"),
                    format!("{} rows for n={}", rec.features.len(), rec.n),
                ));
            }
            let features = if rec.features.is_empty() {
                Tensor::zeros(0, 0)
            } else {
                Tensor::from_rows(&rec.features)
                    .map_err(|e| invalid(field("features"), e.to_string()))?
            };
            instances.push(GraphInstance {
                id: rec.id,
                n: rec.n,
                edges: rec.edges.into_iter().map(|[u, v]| (u, v)).collect(),
                features,
                label: rec.label,
                generator_tag: rec.generator_tag,
            });
        }
        let count = instances.len();
        for (e, &[i, j]) in file.hier_edges.iter().enumerate() {
            if i >= count || j >= count {
                return Err(invalid(
                    format!("hier_edges[{e}]"),
                    format!("[{i},{j}] references a missing instance ({count} present)"),
                ));
            }
        }
        let splits = Splits {
            labeled: file.splits.labeled,
            unlabeled: file.splits.unlabeled,
            test: file.splits.test,
        };
        for (name, ids) in [
            ("labeled", &splits.labeled),
            ("unlabeled", &splits.unlabeled),
            ("test", &splits.test),
        ] {
            if let Some(&bad) = ids.iter().find(|&&i| i >= count) {
                return Err(invalid(
                    format!("splits.{name}"),
                    format!("index {bad} references a missing instance"),
                ));
            }
        }
        Ok(HierarchicalGraph {
            instances,
            hier_edges: file.hier_edges.into_iter().map(|[i, j]| (i, j)).collect(),
            num_classes: file.num_classes,
            splits,
        })
    }
}

pub fn write_dataset<W: Write>(h: &HierarchicalGraph, writer: W) -> Result<(), DatasetError> {
    to_canonical_writer(writer, &DatasetFile::from(h))?;
    Ok(())
}

pub fn read_dataset(text: &str) -> Result<HierarchicalGraph, DatasetError> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    match probe.schema_version {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => {
            return Err(DatasetError::Version {
                found,
                expected: SCHEMA_VERSION,
            })
        }
        None => return Err(invalid("schema_version".into(), "missing")),
    }
    let file: DatasetFile = serde_json::from_str(text)?;
    HierarchicalGraph::try_from(file)
}

pub fn save_dataset(h: &HierarchicalGraph, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_dataset(h, &mut buf)?;
    fs::write(path, buf).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<HierarchicalGraph, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::two_instance_graph;

    fn to_string(h: &HierarchicalGraph) -> String {
        let mut buf = Vec::new();
        write_dataset(h, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip_is_field_exact_and_byte_stable() {
        let mut h = two_instance_graph();
        h.instances[1] = h.instances[1].clone().with_tag("Path");
        h.instances[0].features.set(0, 1, 0.1 + 0.2);
        let text = to_string(&h);
        let back = read_dataset(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn keys_are_sorted() {
        let text = to_string(&two_instance_graph());
        let a = text.find("\"hier_edges\"").unwrap();
        let b = text.find("\"instances\"").unwrap();
        let c = text.find("\"num_classes\"").unwrap();
        let d = text.find("\"schema_version\"").unwrap();
        let e = text.rfind("\"splits\"").unwrap();
        assert!(a < b && b < c && c < d && d < e);
    }

    #[test]
    fn empty_instance_list_is_legal() {
        let h = HierarchicalGraph {
            instances: vec![],
            hier_edges: vec![],
            num_classes: 3,
            splits: Splits::default(),
        };
        let back = read_dataset(&to_string(&h)).unwrap();
        assert_eq!(back.num_labeled(), 0);
        assert_eq!(back.num_unlabeled(), 0);
        assert!(back.validate().is_empty());
    }

    #[test]
    fn edge_endpoint_beyond_n_is_a_parse_error() {
        let text = to_string(&two_instance_graph()).replacen("[[0,1],[1,2]]", "[[0,1],[1,3]]", 1);
        let err = read_dataset(&text).unwrap_err();
        assert!(
            matches!(&err, DatasetError::Invalid { field, .. } if field == "instances[0].edges[1]"),
            "{err}"
        );
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text = to_string(&two_instance_graph())
            .replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(
            read_dataset(&text),
            Err(DatasetError::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = read_dataset("{\"schema_version\":1,\n\"instances\": [}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = read_dataset("{\"schema_version\":1}").unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
    }
}
