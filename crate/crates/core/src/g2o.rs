//! Reading and writing g2o pose-graph files.
//!
//! Supports `VERTEX_SE2`/`EDGE_SE2` and `VERTEX_SE3:QUAT`/`EDGE_SE3:QUAT`.
//! Edges between consecutive vertex ids are odometry and become fixed edges;
//! every other edge is a loop-closure candidate. Each edge is weighted by the
//! precision of its rotation measurement:
//!
//! * SE2: the `(θ, θ)` entry of the 3×3 information matrix;
//! * SE3: the mean of the three rotational diagonal entries of the 6×6
//!   information matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{SparsificationProblem, WeightedEdge};
use crate::rounding::BinarySelection;

pub const TAG_VERTEX_SE2: &str = "VERTEX_SE2";
pub const TAG_EDGE_SE2: &str = "EDGE_SE2";
pub const TAG_VERTEX_SE3: &str = "VERTEX_SE3:QUAT";
pub const TAG_EDGE_SE3: &str = "EDGE_SE3:QUAT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseKind {
    Se2,
    Se3,
}

impl PoseKind {
    /// Pose / measurement parameter count: `x y θ` or `x y z qx qy qz qw`.
    pub fn pose_len(self) -> usize {
        match self {
            PoseKind::Se2 => 3,
            PoseKind::Se3 => 7,
        }
    }

    pub fn info_dim(self) -> usize {
        match self {
            PoseKind::Se2 => 3,
            PoseKind::Se3 => 6,
        }
    }

    /// Length of the upper-triangular information block.
    pub fn info_len(self) -> usize {
        let d = self.info_dim();
        d * (d + 1) / 2
    }

    /// Human-readable rule used to turn an information matrix into an edge weight.
    pub fn weight_rule(self) -> &'static str {
        match self {
            PoseKind::Se2 => "se2: information(theta, theta)",
            PoseKind::Se3 => "se3: mean of rotational information diagonal (rx, ry, rz)",
        }
    }

    fn vertex_tag(self) -> &'static str {
        match self {
            PoseKind::Se2 => TAG_VERTEX_SE2,
            PoseKind::Se3 => TAG_VERTEX_SE3,
        }
    }

    fn edge_tag(self) -> &'static str {
        match self {
            PoseKind::Se2 => TAG_EDGE_SE2,
            PoseKind::Se3 => TAG_EDGE_SE3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: u64,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: u64,
    pub to: u64,
    pub measurement: Vec<f64>,
    /// Upper triangle of the information matrix, row-major.
    pub information: Vec<f64>,
}

impl Edge {
    /// Odometry edges join consecutive vertex ids.
    pub fn is_odometry(&self) -> bool {
        self.from.abs_diff(self.to) == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraphFile {
    pub kind: PoseKind,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Records with unsupported tags that were ignored while parsing.
    pub skipped_records: usize,
}

/// Index of diagonal entry `r` inside a `d×d` upper-triangular row-major block.
fn diag_index(d: usize, r: usize) -> usize {
    (0..r).map(|i| d - i).sum()
}

impl PoseGraphFile {
    /// Full symmetric information matrix of `edge`.
    pub fn information_matrix(&self, edge: &Edge) -> DMatrix<f64> {
        let d = self.kind.info_dim();
        let mut m = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                m[(i, j)] = edge.information[k];
                m[(j, i)] = edge.information[k];
                k += 1;
            }
        }
        m
    }

    /// Rotational precision `κ` of an edge.
    pub fn rotation_weight(&self, edge: &Edge) -> f64 {
        let d = self.kind.info_dim();
        match self.kind {
            PoseKind::Se2 => edge.information[diag_index(d, 2)],
            PoseKind::Se3 => {
                (3..6)
                    .map(|r| edge.information[diag_index(d, r)])
                    .sum::<f64>()
                    / 3.0
            }
        }
    }

    /// Indices into `edges` of odometry edges, in file order.
    pub fn odometry_edge_indices(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].is_odometry())
            .collect()
    }

    /// Indices into `edges` of loop-closure edges, in file order.
    pub fn candidate_edge_indices(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| !self.edges[i].is_odometry())
            .collect()
    }

    pub fn candidate_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_odometry()).count()
    }

    /// Renders the file keeping every vertex, every odometry edge and the
    /// loop closures selected by `selection` (indexed like
    /// [`candidate_edge_indices`](Self::candidate_edge_indices)).
    pub fn to_g2o_string(&self, selection: &BinarySelection) -> Result<String> {
        let candidates = self.candidate_count();
        if selection.len() != candidates {
            return Err(Error::DimensionMismatch {
                expected: candidates,
                actual: selection.len(),
            });
        }
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(self.kind.vertex_tag());
            let _ = write!(out, " {}", v.id);
            push_numbers(&mut out, &v.pose);
            out.push('\n');
        }
        let mut next_candidate = 0;
        for e in &self.edges {
            if !e.is_odometry() {
                let keep = selection.bits()[next_candidate];
                next_candidate += 1;
                if !keep {
                    continue;
                }
            }
            out.push_str(self.kind.edge_tag());
            let _ = write!(out, " {} {}", e.from, e.to);
            push_numbers(&mut out, &e.measurement);
            push_numbers(&mut out, &e.information);
            out.push('\n');
        }
        Ok(out)
    }
}

fn push_numbers(out: &mut String, values: &[f64]) {
    for v in values {
        // 17 significant digits round-trip every f64
        let _ = write!(out, " {v:.16e}");
    }
}

pub fn parse_g2o(path: impl AsRef<Path>) -> Result<PoseGraphFile> {
    let text = std::fs::read_to_string(path)?;
    parse_g2o_str(&text)
}

pub fn parse_g2o_str(text: &str) -> Result<PoseGraphFile> {
    let mut kind: Option<PoseKind> = None;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut edge_lines = Vec::new();
    let mut skipped = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let record_kind = match tag {
            TAG_VERTEX_SE2 | TAG_EDGE_SE2 => PoseKind::Se2,
            TAG_VERTEX_SE3 | TAG_EDGE_SE3 => PoseKind::Se3,
            _ => {
                skipped += 1;
                continue;
            }
        };
        match kind {
            None => kind = Some(record_kind),
            Some(k) if k != record_kind => return Err(Error::MixedDimensions { line }),
            Some(_) => {}
        }
        let fields: Vec<&str> = tokens.collect();
        let is_vertex = tag.starts_with("VERTEX");
        let ids = if is_vertex { 1 } else { 2 };
        let expected = ids
            + record_kind.pose_len()
            + if is_vertex { 0 } else { record_kind.info_len() };
        if fields.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("{tag} expects {expected} fields, found {}", fields.len()),
            });
        }
        let parse_id = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid vertex id {s:?}"),
            })
        };
        let numbers = fields[ids..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("invalid number {s:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;

        if is_vertex {
            vertices.push(Vertex {
                id: parse_id(fields[0])?,
                pose: numbers,
            });
        } else {
            let (from, to) = (parse_id(fields[0])?, parse_id(fields[1])?);
            if from == to {
                return Err(Error::Parse {
                    line,
                    message: format!("edge connects vertex {from} to itself"),
                });
            }
            let split = record_kind.pose_len();
            let information = numbers[split..].to_vec();
            let d = record_kind.info_dim();
            if let Some(r) = (0..d).find(|&r| information[diag_index(d, r)] < 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("information matrix has negative diagonal entry {r}"),
                });
            }
            edges.push(Edge {
                from,
                to,
                measurement: numbers[..split].to_vec(),
                information,
            });
            edge_lines.push(line);
        }
    }

    let mut declared = HashMap::with_capacity(vertices.len());
    for v in &vertices {
        if declared.insert(v.id, ()).is_some() {
            return Err(Error::Parse {
                line: 0,
                message: format!("vertex {} declared twice", v.id),
            });
        }
    }
    for (e, &line) in edges.iter().zip(&edge_lines) {
        for id in [e.from, e.to] {
            if !declared.contains_key(&id) {
                return Err(Error::Parse {
                    line,
                    message: format!("edge references undeclared vertex {id}"),
                });
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} unsupported g2o records");
    }

    Ok(PoseGraphFile {
        kind: kind.unwrap_or(PoseKind::Se2),
        vertices,
        edges,
        skipped_records: skipped,
    })
}

pub fn write_g2o(
    file: &PoseGraphFile,
    selection: &BinarySelection,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, file.to_g2o_string(selection)?)?;
    Ok(())
}

/// A sparsification problem built from a pose graph, with the bookkeeping
/// needed to map selections back onto file edges.
#[derive(Debug, Clone)]
pub struct PoseGraphProblem {
    pub problem: SparsificationProblem,
    /// Vertex id of each node index, ascending.
    pub node_ids: Vec<u64>,
    /// For each problem candidate, the positions in the file's candidate list
    /// it stands for (several when loop closures repeat a node pair).
    pub candidate_groups: Vec<Vec<usize>>,
}

impl PoseGraphProblem {
    /// Expands a selection over problem candidates to one over file candidates.
    pub fn file_selection(&self, selection: &BinarySelection) -> Result<BinarySelection> {
        if selection.len() != self.candidate_groups.len() {
            return Err(Error::DimensionMismatch {
                expected: self.candidate_groups.len(),
                actual: selection.len(),
            });
        }
        let total = self.candidate_groups.iter().map(Vec::len).sum();
        Ok(BinarySelection::from_indices(
            total,
            selection
                .indices()
                .flat_map(|k| self.candidate_groups[k].iter().copied()),
        ))
    }
}

/// Budget `round(fraction · m)`.
pub fn budget_from_fraction(fraction: f64, m: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidFraction(fraction));
    }
    Ok(((fraction * m as f64).round() as usize).min(m))
}

pub fn to_problem(file: &PoseGraphFile, budget_fraction: f64) -> Result<PoseGraphProblem> {
    if !(0.0..=1.0).contains(&budget_fraction) {
        return Err(Error::InvalidFraction(budget_fraction));
    }
    let mut built = to_problem_with_budget(file, 0)?;
    let k = budget_from_fraction(budget_fraction, built.problem.candidate_count())?;
    built.problem = built.problem.with_budget(k)?;
    Ok(built)
}

pub fn to_problem_with_budget(file: &PoseGraphFile, budget: usize) -> Result<PoseGraphProblem> {
    let mut node_ids: Vec<u64> = file.vertices.iter().map(|v| v.id).collect();
    node_ids.sort_unstable();
    let index: HashMap<u64, usize> = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut fixed = Vec::new();
    let mut groups: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut candidates: Vec<WeightedEdge> = Vec::new();
    let mut candidate_groups: Vec<Vec<usize>> = Vec::new();
    let mut position = 0;
    for e in &file.edges {
        let edge = WeightedEdge::new(index[&e.from], index[&e.to], file.rotation_weight(e))?;
        if e.is_odometry() {
            fixed.push(edge);
            continue;
        }
        match groups.get(&edge.key()) {
            Some(&k) => {
                candidates[k].weight += edge.weight;
                candidate_groups[k].push(position);
            }
            None => {
                groups.insert(edge.key(), candidates.len());
                candidates.push(edge);
                candidate_groups.push(vec![position]);
            }
        }
        position += 1;
    }
    let problem = SparsificationProblem::new(node_ids.len(), fixed, candidates, budget)?;
    Ok(PoseGraphProblem {
        problem,
        node_ids,
        candidate_groups,
    })
}
