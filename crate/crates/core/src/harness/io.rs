//! CSV artifacts. Reals use 17 significant digits in scientific notation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::planner::RunRecord;
use crate::tree::{Trajectory, Tree, TreeNode};

pub const EPISODES_HEADER: &[&str] = &[
    "episode",
    "iteration",
    "tree_size",
    "best_return",
    "greedy_return",
    "greedy_success",
    "value_loss",
    "policy_loss",
    "wall_ms",
];

pub const SUMMARY_HEADER: &[&str] = &["episode", "runs", "median", "q1", "q3"];

pub const RUNS_HEADER: &[&str] = &[
    "seed",
    "episodes",
    "iterations",
    "tree_size",
    "first_solution_iteration",
    "first_return",
    "final_return",
    "return_ratio",
];

pub fn fmt_real(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Rows of `path`, after checking the header equals `expected` (or starts with it when `prefix`).
fn read_rows(
    path: &Path,
    expected: &[&str],
    prefix: bool,
) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let ok = if prefix {
        header.len() >= expected.len() && header[..expected.len()] == *expected
    } else {
        header == expected
    };
    if !ok {
        return Err(schema(
            path,
            format!("unexpected header {header:?}, expected {expected:?}"),
        ));
    }
    let rows = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(
    path: &Path,
    row: &csv::StringRecord,
    i: usize,
    name: &str,
) -> Result<T> {
    row.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| schema(path, format!("bad {name} value {:?}", row.get(i))))
}

fn real(path: &Path, row: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    row.get(i)
        .and_then(parse_real)
        .ok_or_else(|| schema(path, format!("bad {name} value {:?}", row.get(i))))
}

pub fn write_episodes(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EPISODES_HEADER)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.iteration.to_string(),
            r.tree_size.to_string(),
            fmt_real(r.best_return),
            fmt_real(r.greedy_return),
            r.greedy_success.to_string(),
            fmt_real(r.value_loss),
            fmt_real(r.policy_loss),
            r.wall_ms.to_string(),
        ])?;
    }
    finish(path, w)
}

pub fn read_episodes(path: &Path) -> Result<Vec<RunRecord>> {
    let (_, rows) = read_rows(path, EPISODES_HEADER, false)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let r = RunRecord {
            episode: field(path, row, 0, "episode")?,
            iteration: field(path, row, 1, "iteration")?,
            tree_size: field(path, row, 2, "tree_size")?,
            best_return: real(path, row, 3, "best_return")?,
            greedy_return: real(path, row, 4, "greedy_return")?,
            greedy_success: field(path, row, 5, "greedy_success")?,
            value_loss: real(path, row, 6, "value_loss")?,
            policy_loss: real(path, row, 7, "policy_loss")?,
            wall_ms: field(path, row, 8, "wall_ms")?,
        };
        if r.episode != i as u64 {
            return Err(schema(
                path,
                format!("episode indices not contiguous at row {i}"),
            ));
        }
        out.push(r);
    }
    Ok(out)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// One row per node: id, parent, sample_type, trans_cost, state, action. The root has empty parent and action fields.
pub fn write_tree(path: &Path, tree: &Tree, action_dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = ["id", "parent", "sample_type", "trans_cost"]
        .into_iter()
        .map(String::from)
        .chain(numbered("s", tree.state_dim()))
        .chain(numbered("a", action_dim))
        .collect();
    w.write_record(&header)?;
    for node in tree.nodes() {
        let mut row = vec![
            node.id.to_string(),
            node.parent.map(|p| p.to_string()).unwrap_or_default(),
            node.sample_type.to_string(),
            fmt_real(node.trans_cost),
        ];
        row.extend(node.state.iter().map(|x| fmt_real(*x)));
        match &node.action {
            Some(a) => row.extend(a.iter().map(|x| fmt_real(*x))),
            None => row.extend(std::iter::repeat(String::new()).take(action_dim)),
        }
        w.write_record(&row)?;
    }
    finish(path, w)
}

fn trajectory_rows(nodes: &[TreeNode], action_dim: usize) -> Vec<Vec<String>> {
    nodes
        .iter()
        .enumerate()
        .map(|(step, node)| {
            let mut row = vec![step.to_string()];
            row.extend(node.state.iter().map(|x| fmt_real(*x)));
            match &node.action {
                Some(a) => row.extend(a.iter().map(|x| fmt_real(*x))),
                None => row.extend(std::iter::repeat(String::new()).take(action_dim)),
            }
            row.push(fmt_real(node.trans_cost));
            row
        })
        .collect()
}

/// One row per step: step, state, incoming action (empty at step 0), trans_cost.
pub fn write_trajectory(path: &Path, traj: &Trajectory, action_dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    let state_dim = traj.nodes.first().map_or(0, |n| n.state.dim());
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain(numbered("s", state_dim))
        .chain(numbered("a", action_dim))
        .chain(std::iter::once("trans_cost".to_string()))
        .collect();
    w.write_record(&header)?;
    for row in trajectory_rows(&traj.nodes, action_dim) {
        w.write_record(&row)?;
    }
    finish(path, w)
}

/// States along a trajectory file, in step order.
pub fn read_trajectory_states(path: &Path) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = read_rows(path, &["step"], true)?;
    let n_state = header
        .iter()
        .filter(|h| h.starts_with('s') && h[1..].parse::<usize>().is_ok())
        .count();
    rows.iter()
        .map(|row| (1..=n_state).map(|i| real(path, row, i, "state")).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub episode: u64,
    pub runs: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

pub fn write_summary(path: &Path, stats: &[EpisodeStat]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in stats {
        w.write_record([
            s.episode.to_string(),
            s.runs.to_string(),
            fmt_real(s.median),
            fmt_real(s.q1),
            fmt_real(s.q3),
        ])?;
    }
    finish(path, w)
}

pub fn read_summary(path: &Path) -> Result<Vec<EpisodeStat>> {
    let (_, rows) = read_rows(path, SUMMARY_HEADER, false)?;
    rows.iter()
        .map(|row| {
            Ok(EpisodeStat {
                episode: field(path, row, 0, "episode")?,
                runs: field(path, row, 1, "runs")?,
                median: real(path, row, 2, "median")?,
                q1: real(path, row, 3, "q1")?,
                q3: real(path, row, 4, "q3")?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub episodes: usize,
    pub iterations: u64,
    pub tree_size: usize,
    /// Iteration that produced the first goal-reaching node, if any.
    pub first_solution_iteration: Option<u64>,
    pub first_return: f64,
    pub final_return: f64,
}

impl RunSummary {
    /// `final / first`; below 1 when the final (negative) return is better.
    pub fn return_ratio(&self) -> f64 {
        self.final_return / self.first_return
    }
}

pub fn write_runs(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RUNS_HEADER)?;
    for r in runs {
        w.write_record([
            r.seed.to_string(),
            r.episodes.to_string(),
            r.iterations.to_string(),
            r.tree_size.to_string(),
            r.first_solution_iteration
                .map(|i| i.to_string())
                .unwrap_or_default(),
            fmt_real(r.first_return),
            fmt_real(r.final_return),
            fmt_real(r.return_ratio()),
        ])?;
    }
    finish(path, w)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunSummary>> {
    let (_, rows) = read_rows(path, RUNS_HEADER, false)?;
    rows.iter()
        .map(|row| {
            Ok(RunSummary {
                seed: field(path, row, 0, "seed")?,
                episodes: field(path, row, 1, "episodes")?,
                iterations: field(path, row, 2, "iterations")?,
                tree_size: field(path, row, 3, "tree_size")?,
                first_solution_iteration: match row.get(4) {
                    Some("") => None,
                    _ => Some(field(path, row, 4, "first_solution_iteration")?),
                },
                first_return: real(path, row, 5, "first_return")?,
                final_return: real(path, row, 6, "final_return")?,
            })
        })
        .collect()
}
