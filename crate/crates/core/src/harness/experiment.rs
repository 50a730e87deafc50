//! Seeded multi-run experiments, summary statistics and run comparison.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ExperimentConfig, Method};
use super::io::{self, EpisodeStat, RunSummary};
use crate::error::{Error, Result};
use crate::planner::{baseline_plan, qrrt_plan, PlannerResult};

/// Type 7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Per-episode median and quartiles of `best_return` over the runs that reached each episode.
pub fn episode_stats(runs: &[&[crate::planner::RunRecord]]) -> Vec<EpisodeStat> {
    let horizon = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    (0..horizon)
        .map(|e| {
            let mut v: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.get(e))
                .map(|r| r.best_return)
                .collect();
            v.sort_by(f64::total_cmp);
            EpisodeStat {
                episode: e as u64,
                runs: v.len(),
                median: quantile_sorted(&v, 0.5),
                q1: quantile_sorted(&v, 0.25),
                q3: quantile_sorted(&v, 0.75),
            }
        })
        .collect()
}

pub fn run_summary(seed: u64, result: &PlannerResult) -> RunSummary {
    RunSummary {
        seed,
        episodes: result.records.len(),
        iterations: result.iterations,
        tree_size: result.tree.len(),
        first_solution_iteration: result.end_nodes.first().map(|id| id.0 as u64),
        first_return: result
            .records
            .first()
            .map_or(f64::NEG_INFINITY, |r| r.best_return),
        final_return: result
            .records
            .last()
            .map_or(f64::NEG_INFINITY, |r| r.best_return),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub episodes: Vec<EpisodeStat>,
    pub runs: Vec<RunSummary>,
}

impl SummaryStats {
    pub fn median_final_return(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.final_return).collect::<Vec<_>>())
    }

    pub fn median_first_return(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.first_return).collect::<Vec<_>>())
    }
}

/// Runs one seed with the configured method.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<PlannerResult> {
    let system = config.build_system();
    let planner = config.planner_for(seed);
    match config.method {
        Method::Qrrt => qrrt_plan(system.as_ref(), &planner),
        Method::Baseline => baseline_plan(system.as_ref(), &planner),
    }
}

/// Writes the per-run artifacts of one planner result into `dir`.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    seed: u64,
    result: &PlannerResult,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_episodes(&dir.join("episodes.csv"), &result.records)?;
    let action_dim = config.build_system().action_dim();
    if let Some(best) = &result.best {
        io::write_trajectory(&dir.join("best_trajectory.csv"), best, action_dim)?;
    }
    if let Some(first) = &result.first_solution {
        io::write_trajectory(&dir.join("first_trajectory.csv"), first, action_dim)?;
    }
    if config.emit_tree_dump {
        io::write_tree(&dir.join("tree.csv"), &result.tree, action_dim)?;
    }
    if config.emit_checkpoints {
        result.value_net.save(&dir.join("value_net.txt"))?;
        result.policy_net.save(&dir.join("policy_net.txt"))?;
    }
    let single: &[crate::planner::RunRecord] = &result.records;
    io::write_summary(&dir.join("summary.csv"), &episode_stats(&[single]))?;
    io::write_runs(&dir.join("runs.csv"), &[run_summary(seed, result)])?;
    Ok(())
}

/// Output directory for `seed`: the output dir itself for single-seed runs.
pub fn seed_dir(config: &ExperimentConfig, seed: u64) -> PathBuf {
    if config.seeds.len() == 1 {
        config.output_dir.clone()
    } else {
        config.output_dir.join(format!("seed_{seed}"))
    }
}

/// Runs every seed, writes artifacts and the combined summary.
///
/// Seeds are spread over `config.workers` threads; each writes only its own
/// directory, so results do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SummaryStats> {
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    std::fs::write(out.join("config.txt"), config.emit())
        .map_err(|e| Error::io(out.join("config.txt"), e))?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(RunSummary, Vec<crate::planner::RunRecord>)>>>> =
        Mutex::new((0..config.seeds.len()).map(|_| None).collect());
    let workers = config.workers.min(config.seeds.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= config.seeds.len() {
                    break;
                }
                let seed = config.seeds[i];
                let outcome = run_seed(config, seed)
                    .and_then(|res| {
                        write_run(&seed_dir(config, seed), config, seed, &res)?;
                        Ok((run_summary(seed, &res), res.records))
                    })
                    .map_err(|e| Error::Seed {
                        seed,
                        source: Box::new(e),
                    });
                slots.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });

    let mut runs = Vec::new();
    let mut records = Vec::new();
    for slot in slots.into_inner().expect("no worker panicked") {
        let (summary, recs) = slot.expect("every seed ran")?;
        runs.push(summary);
        records.push(recs);
    }
    let views: Vec<&[crate::planner::RunRecord]> = records.iter().map(|r| r.as_slice()).collect();
    let stats = SummaryStats {
        episodes: episode_stats(&views),
        runs,
    };
    if config.seeds.len() > 1 {
        io::write_summary(&out.join("summary.csv"), &stats.episodes)?;
        io::write_runs(&out.join("runs.csv"), &stats.runs)?;
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub episode: u64,
    pub median_a: f64,
    pub median_b: f64,
}

impl ComparisonRow {
    pub fn difference(&self) -> f64 {
        if self.median_a == self.median_b {
            0.0
        } else {
            self.median_a - self.median_b
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// First episode from which A's median stays strictly above B's through the horizon.
    pub a_dominates_from: Option<u64>,
    pub b_dominates_from: Option<u64>,
}

fn dominance_start(rows: &[ComparisonRow], better: impl Fn(&ComparisonRow) -> bool) -> Option<u64> {
    let mut start = None;
    for row in rows.iter().rev() {
        if better(row) {
            start = Some(row.episode);
        } else {
            break;
        }
    }
    start
}

/// Pairs the per-episode medians of two run directories.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<Comparison> {
    let a = io::read_summary(&dir_a.join("summary.csv"))?;
    let b = io::read_summary(&dir_b.join("summary.csv"))?;
    if a.len() != b.len() {
        return Err(Error::Schema {
            path: dir_b.join("summary.csv"),
            message: format!("episode horizon {} differs from {}", b.len(), a.len()),
        });
    }
    let rows: Vec<ComparisonRow> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| ComparisonRow {
            episode: x.episode,
            median_a: x.median,
            median_b: y.median,
        })
        .collect();
    Ok(Comparison {
        a_dominates_from: dominance_start(&rows, |r| r.median_a > r.median_b),
        b_dominates_from: dominance_start(&rows, |r| r.median_b > r.median_a),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::RunRecord;

    #[test]
    fn type7_quartiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.75), 3.25);
        assert_eq!(quantile_sorted(&[7.0], 0.25), 7.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        let inf = [f64::NEG_INFINITY, f64::NEG_INFINITY, -1.0];
        assert_eq!(quantile_sorted(&inf, 0.25), f64::NEG_INFINITY);
    }

    fn rec(episode: u64, best_return: f64) -> RunRecord {
        RunRecord {
            episode,
            iteration: episode,
            tree_size: 1,
            best_return,
            greedy_return: f64::NEG_INFINITY,
            greedy_success: false,
            value_loss: 0.0,
            policy_loss: 0.0,
            wall_ms: 0,
        }
    }

    #[test]
    fn stats_over_unequal_runs() {
        let a = vec![rec(0, -5.0), rec(1, -4.0)];
        let b = vec![rec(0, -3.0)];
        let stats = episode_stats(&[&a, &b]);
        assert_eq!(stats.len(), 2);
        assert_eq!(stats[0].median, -4.0);
        assert_eq!(stats[0].runs, 2);
        assert_eq!(stats[1].median, -4.0);
        assert_eq!(stats[1].runs, 1);
    }

    #[test]
    fn dominance() {
        let rows: Vec<ComparisonRow> = [(-5.0, -4.0), (-3.0, -4.0), (-2.0, -4.0)]
            .iter()
            .enumerate()
            .map(|(i, (a, b))| ComparisonRow {
                episode: i as u64,
                median_a: *a,
                median_b: *b,
            })
            .collect();
        assert_eq!(dominance_start(&rows, |r| r.median_a > r.median_b), Some(1));
        assert_eq!(dominance_start(&rows, |r| r.median_b > r.median_a), None);
    }
}
