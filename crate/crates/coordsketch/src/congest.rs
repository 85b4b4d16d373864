//! Delta-round neighborhood propagation of composable sketches.
//!
//! Synchronous lock-step rounds over an undirected topology: every node
//! first sketches its own dataset and sends that to all neighbors; in round
//! i it merges what arrived in round i-1 and re-sends. The last round folds
//! the node's whole chain into the merge, so after Delta rounds each node
//! holds a sketch of the union of all datasets within graph distance Delta
//! (walk parities across the chain cover every node in the ball) and can
//! Solve locally. A node's outgoing message in a round is one sketch,
//! identical for all neighbors.

use crate::comm::{CommStats, Entity};
use crate::randomness::derive_seed;
use crate::sketch::{create_sketch, merge_sketches, Dataset, Sketch, SketchError, SketchParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CongestError {
    #[error("edge ({0}, {1}) references a node out of range")]
    BadEdge(usize, usize),
    #[error("accuracy eps {eps} must be below 1/delta = {bound} for delta-round propagation")]
    EpsTooLargeForDepth { eps: f64, bound: f64 },
    #[error("merge budget t = {t} too small for delta = {delta}; need t >= delta + 1")]
    BudgetTooSmall { t: u32, delta: u32 },
    #[error("propagation failed {attempts} times on the merge guard")]
    RetriesExhausted { attempts: u32 },
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Undirected topology whose nodes hold datasets.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    datasets: Vec<Dataset>,
}

impl Graph {
    pub fn new(datasets: Vec<Dataset>, edges: &[(usize, usize)]) -> Result<Self, CongestError> {
        let n = datasets.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(CongestError::BadEdge(u, v));
            }
            if !adjacency[u].contains(&v) {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            adjacency,
            datasets,
        })
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn dataset(&self, u: usize) -> &Dataset {
        &self.datasets[u]
    }

    /// All nodes within graph distance `delta` of `u`, including `u`.
    pub fn ball(&self, u: usize, delta: u32) -> Vec<usize> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = std::collections::VecDeque::new();
        dist[u] = 0;
        queue.push_back(u);
        while let Some(v) = queue.pop_front() {
            if dist[v] == delta {
                continue;
            }
            for &w in &self.adjacency[v] {
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (0..self.len()).filter(|&v| dist[v] != u32::MAX).collect()
    }

    /// Deduplicated union of the datasets in the delta-ball of `u`.
    pub fn ball_union(&self, u: usize, delta: u32) -> Result<Dataset, SketchError> {
        Dataset::union_all(self.ball(u, delta).iter().map(|&v| &self.datasets[v]))
            .map_err(|e| match e {
                crate::sketch::DatasetError::ConformingViolation(k) => {
                    SketchError::ConformingViolation(k)
                }
                other => SketchError::BadParams(other.to_string()),
            })
    }
}

/// Failure-budget split per merge: delta' / (2s)^Delta with delta' = 1/(10s).
pub fn per_merge_delta(num_nodes: usize, delta_rounds: u32) -> f64 {
    let s = num_nodes.max(1) as f64;
    (1.0 / (10.0 * s)) * (2.0 * s).powi(-(delta_rounds as i32))
}

/// Per-node, per-round communication record.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRoundCost {
    pub node: usize,
    pub round: u32,
    /// Rows (sample entries) in the sketch sent to each neighbor.
    pub rows_sent: u64,
    /// Total words across all incident edges.
    pub words: u64,
}

#[derive(Debug)]
pub struct PropagateRun {
    /// Final per-node sketches of the delta-ball unions.
    pub sketches: Vec<Sketch>,
    pub stats: CommStats,
    pub per_round: Vec<NodeRoundCost>,
    /// How many salts were consumed before a run finished without a merge
    /// guard failure.
    pub attempts: u32,
    pub salt_used: u64,
}

impl PropagateRun {
    /// CSV rows `node,round,rows_sent,words`.
    pub fn comm_report(&self) -> String {
        let mut out = String::from("node,round,rows_sent,words\n");
        for c in &self.per_round {
            out.push_str(&format!("{},{},{},{}\n", c.node, c.round, c.rows_sent, c.words));
        }
        out
    }
}

/// Run delta rounds of sketch propagation so every node obtains a sketch
/// (and hence an embedding) of its delta-ball union. The merge guard firing
/// anywhere restarts the whole run with a fresh derived salt, bounded.
pub fn propagate(
    graph: &Graph,
    delta: u32,
    params: &SketchParams,
    t: u32,
) -> Result<PropagateRun, CongestError> {
    if delta >= 1 {
        let bound = 1.0 / delta as f64;
        if params.eps >= bound {
            return Err(CongestError::EpsTooLargeForDepth {
                eps: params.eps,
                bound,
            });
        }
    }
    if t < delta + 1 {
        return Err(CongestError::BudgetTooSmall { t, delta });
    }
    let max_attempts = 8;
    for attempt in 0..max_attempts {
        let salt = if attempt == 0 {
            params.salt
        } else {
            derive_seed(params.salt, attempt as u64)
        };
        let attempt_params = SketchParams {
            salt,
            ..params.clone()
        };
        match propagate_once(graph, delta, &attempt_params, t) {
            Ok(mut run) => {
                run.attempts = attempt + 1;
                run.salt_used = salt;
                return Ok(run);
            }
            Err(CongestError::Sketch(SketchError::Fail { .. })) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(CongestError::RetriesExhausted {
        attempts: max_attempts,
    })
}

fn propagate_once(
    graph: &Graph,
    delta: u32,
    params: &SketchParams,
    t: u32,
) -> Result<PropagateRun, CongestError> {
    let n = graph.len();
    let mut stats = CommStats::new();
    let mut per_round = Vec::new();

    // Round 0 sketches of the nodes' own data.
    let mut chains: Vec<Vec<Sketch>> = Vec::with_capacity(n);
    for u in 0..n {
        chains.push(vec![create_sketch(graph.dataset(u), t, params)?]);
    }

    // current[u] = sk(S_u^i), the sketch u most recently computed and sends.
    let mut current: Vec<Sketch> = chains.iter().map(|c| c[0].clone()).collect();

    for round in 1..=delta {
        // Charge this round's outgoing messages.
        for u in 0..n {
            let rows = current[u].total_entries() as u64;
            let deg = graph.neighbors(u).len() as u64;
            let words = current[u].message_words() * deg;
            stats.charge(Entity::Node(u), round, words);
            per_round.push(NodeRoundCost {
                node: u,
                round,
                rows_sent: rows,
                words,
            });
        }
        // Deliver and merge. In the final round each node folds its own
        // chain into the merge; the union is identical to merging the chain
        // afterwards and spends one budget level instead of two.
        let mut next: Vec<Sketch> = Vec::with_capacity(n);
        for u in 0..n {
            if graph.neighbors(u).is_empty() {
                // Isolated node: nothing ever arrives; its ball is itself
                // and its own sketch needs no merging.
                next.push(chains[u][0].clone());
                continue;
            }
            let mut inputs: Vec<Sketch> = graph
                .neighbors(u)
                .iter()
                .map(|&v| current[v].clone())
                .collect();
            if round == delta {
                inputs.extend(chains[u].iter().cloned());
            }
            let merged = merge_sketches(&inputs)?;
            next.push(merged);
        }
        for (u, sk) in next.iter().enumerate() {
            if round < delta {
                chains[u].push(sk.clone());
            }
        }
        current = next;
    }

    Ok(PropagateRun {
        sketches: current,
        stats,
        per_round,
        attempts: 1,
        salt_used: params.salt,
    })
}
