use serde::{Deserialize, Serialize};

use super::PmimeResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Directed weighted graph in node-link form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityNetwork {
    pub directed: bool,
    pub nodes: Vec<String>,
    pub edges: Vec<NetworkEdge>,
}

/// Keeps every driver → target entry strictly above `threshold`.
pub fn causality_network(result: &PmimeResult, threshold: f64) -> CausalityNetwork {
    let mut edges = Vec::new();
    for (i, row) in result.matrix.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if i != j && w > threshold {
                edges.push(NetworkEdge {
                    source: result.ids[i].clone(),
                    target: result.ids[j].clone(),
                    weight: w,
                });
            }
        }
    }
    CausalityNetwork {
        directed: true,
        nodes: result.ids.clone(),
        edges,
    }
}

impl CausalityNetwork {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn to_edge_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target", "weight"])?;
        for e in &self.edges {
            w.write_record([
                e.source.as_str(),
                e.target.as_str(),
                &format!("{:.9}", e.weight),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmime::StopRule;

    fn result(matrix: Vec<Vec<f64>>) -> PmimeResult {
        let k = matrix.len();
        PmimeResult {
            ids: (1..=k).map(|i| format!("x{i}")).collect(),
            adjacency: matrix
                .iter()
                .map(|r| r.iter().map(|&v| v > 0.0).collect())
                .collect(),
            matrix,
            embeddings: vec![],
            diagnostics: vec![],
            stop_rule: StopRule::default(),
            warnings: vec![],
        }
    }

    #[test]
    fn zero_matrix_has_no_edges() {
        let net = causality_network(&result(vec![vec![0.0; 3]; 3]), 0.0);
        assert!(net.edges.is_empty());
        assert_eq!(net.nodes.len(), 3);
    }

    #[test]
    fn single_entry_single_edge() {
        let net = causality_network(&result(vec![vec![0.0, 0.5], vec![0.0, 0.0]]), 0.0);
        assert_eq!(
            net.edges,
            vec![NetworkEdge {
                source: "x1".into(),
                target: "x2".into(),
                weight: 0.5
            }]
        );
        assert_eq!(
            net.to_edge_csv().unwrap(),
            "source,target,weight\nx1,x2,0.500000000\n"
        );
        let back: CausalityNetwork = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn threshold_is_strict() {
        let net = causality_network(&result(vec![vec![0.0, 0.5], vec![0.2, 0.0]]), 0.2);
        assert_eq!(net.edges.len(), 1);
    }
}
