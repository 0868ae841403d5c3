//! JSONL datasets: one graph object per line with optional labels.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphJson, NodeId};

/// One dataset line.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub graph: Graph,
    pub label: Option<usize>,
    pub node_labels: Option<Vec<usize>>,
    /// Labeled ordered node pairs `(u, v, label)` for edge-level tasks.
    pub pair_labels: Option<Vec<(NodeId, NodeId, usize)>>,
}

impl GraphRecord {
    pub fn unlabeled(graph: Graph) -> Self {
        Self {
            graph,
            label: None,
            node_labels: None,
            pair_labels: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    #[serde(flatten)]
    graph: GraphJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pair_labels: Option<Vec<[usize; 3]>>,
}

impl GraphRecord {
    pub fn to_json_line(&self) -> String {
        let rec = RecordJson {
            graph: GraphJson::from(&self.graph),
            label: self.label,
            node_labels: self.node_labels.clone(),
            pair_labels: self
                .pair_labels
                .as_ref()
                .map(|p| p.iter().map(|&(u, v, l)| [u, v, l]).collect()),
        };
        serde_json::to_string(&rec).expect("records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: RecordJson = serde_json::from_str(line)?;
        let graph = rec.graph.into_graph()?;
        if let Some(nl) = &rec.node_labels {
            if nl.len() != graph.num_nodes() {
                return Err(Error::Input(
                    "node_labels length differs from num_nodes".into(),
                ));
            }
        }
        if let Some(pairs) = &rec.pair_labels {
            if pairs
                .iter()
                .any(|p| p[0] >= graph.num_nodes() || p[1] >= graph.num_nodes())
            {
                return Err(Error::Input("pair label refers to a missing node".into()));
            }
        }
        Ok(Self {
            graph,
            label: rec.label,
            node_labels: rec.node_labels,
            pair_labels: rec
                .pair_labels
                .map(|p| p.into_iter().map(|[u, v, l]| (u, v, l)).collect()),
        })
    }
}

/// Reads a JSONL dataset. Blank lines are skipped; errors carry the 1-based
/// line number.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<GraphRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = GraphRecord::from_json_line(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl(mut writer: impl Write, records: &[GraphRecord]) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", r.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_labels_and_reports_bad_line() {
        let text = "{\"num_nodes\":2,\"edges\":[[0,1]],\"label\":3,\"node_labels\":[1,1]}\n\n{\"num_nodes\":2,\"edges\":[[0,7]]}\n";
        let err = read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let ok = read_jsonl(&text.as_bytes()[..text.find("\n\n").unwrap()]).unwrap();
        assert_eq!(ok[0].label, Some(3));
        assert_eq!(ok[0].node_labels, Some(vec![1, 1]));
    }

    #[test]
    fn pair_labels_round_trip() {
        let mut r = GraphRecord::unlabeled(Graph::new(3, &[(0, 1), (1, 2)]).unwrap());
        r.pair_labels = Some(vec![(0, 2, 1)]);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), vec![r]);
    }
}
