use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeMetrics, Policy, SimParams, Trace};
use super::scene::{build_scene, Scene, SceneParams};
use super::SimError;
use crate::worldgen::{generate_world, Scenario};

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn child_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix_seed(seed), |acc, p| mix_seed(acc ^ mix_seed(*p)))
}

#[derive(Debug, Clone)]
pub struct SuiteScene {
    pub scenario: Scenario,
    pub trial: usize,
    pub scene: Scene,
}

/// One scene per (scenario, trial). Worlds whose start/goal sampling fails are
/// redrawn with a fresh seed, up to `max_attempts` times.
pub fn build_suite_scenes(
    scenarios: &[Scenario],
    trials: usize,
    extent: f64,
    scene_params: &SceneParams,
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<SuiteScene>, SimError> {
    let mut out = Vec::new();
    for (si, &scenario) in scenarios.iter().enumerate() {
        for trial in 0..trials {
            let mut built = None;
            for attempt in 0..max_attempts.max(1) {
                let s = child_seed(seed, &[si as u64, trial as u64, attempt as u64]);
                let world = generate_world(scenario, extent, extent, s)?;
                match build_scene(&world, scene_params, s) {
                    Ok(scene) => {
                        built = Some(scene);
                        break;
                    }
                    Err(SimError::Infeasible(reason)) => {
                        log::debug!("scene {scenario:?}/{trial} attempt {attempt}: {reason}");
                    }
                    Err(e) => return Err(e),
                }
            }
            let scene = built.ok_or_else(|| SimError::Infeasible(format!("no feasible scene for {} trial {trial}", scenario.name())))?;
            out.push(SuiteScene { scenario, trial, scene });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub policy: String,
    pub scenario: Scenario,
    pub trial: usize,
    pub metrics: EpisodeMetrics,
    pub trace: Trace,
}

/// Runs every policy on every scene, with up to `parallelism` worker threads.
/// Records come back sorted by (policy order, scenario order, trial).
pub fn run_suite(
    scenes: &[SuiteScene],
    policies: &[Policy<'_>],
    params: &SimParams,
    seed: u64,
    parallelism: usize,
) -> Result<Vec<TrialRecord>, SimError> {
    let jobs: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..scenes.len()).map(move |s| (p, s)))
        .collect();
    let run = |&(p, s): &(usize, usize)| -> Result<TrialRecord, SimError> {
        let sc = &scenes[s];
        let episode_seed = child_seed(seed, &[sc.scenario as u64, sc.trial as u64, 0xe9]);
        let (metrics, trace) = run_episode(&sc.scene, policies[p], params, episode_seed)?;
        Ok(TrialRecord {
            policy: policies[p].name().to_string(),
            scenario: sc.scenario,
            trial: sc.trial,
            metrics,
            trace,
        })
    };
    let workers = parallelism.max(1).min(jobs.len().max(1));
    let mut results: Vec<Option<Result<TrialRecord, SimError>>> = (0..jobs.len()).map(|_| None).collect();
    if workers == 1 {
        for (slot, job) in results.iter_mut().zip(&jobs) {
            *slot = Some(run(job));
        }
    } else {
        let chunk = jobs.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (slots, js) in results.chunks_mut(chunk).zip(jobs.chunks(chunk)) {
                let run = &run;
                scope.spawn(move || {
                    for (slot, job) in slots.iter_mut().zip(js) {
                        *slot = Some(run(job));
                    }
                });
            }
        });
    }
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

pub const CSV_HEADER: &str = "policy,scenario,trial,success,time_s,length_m,exposure,cover_util";

/// Mean metrics of one (policy, scenario) group. Time and length average
/// successful trials only and are `None` when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub scenario: String,
    pub trials: usize,
    pub success_rate: f64,
    pub time_s: Option<f64>,
    pub length_m: Option<f64>,
    pub exposure: f64,
    pub cover_util: f64,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups metrics by (policy, scenario); sums run over sorted values so the
/// result does not depend on record order.
pub fn aggregate<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a EpisodeMetrics)>) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String), Vec<&EpisodeMetrics>> = BTreeMap::new();
    for (p, s, m) in rows {
        groups.entry((p.to_string(), s.to_string())).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|((policy, scenario), ms)| {
            let ok: Vec<&&EpisodeMetrics> = ms.iter().filter(|m| m.success).collect();
            let col = |f: &dyn Fn(&EpisodeMetrics) -> f64| ms.iter().map(|m| f(m)).collect::<Vec<_>>();
            AggregateRow {
                trials: ms.len(),
                success_rate: ok.len() as f64 / ms.len() as f64,
                time_s: mean(&ok.iter().map(|m| m.navigation_time).collect::<Vec<_>>()),
                length_m: mean(&ok.iter().map(|m| m.trajectory_length).collect::<Vec<_>>()),
                exposure: mean(&col(&|m| m.threat_exposure)).unwrap_or(0.0),
                cover_util: mean(&col(&|m| m.cover_utilization)).unwrap_or(0.0),
                policy,
                scenario,
            }
        })
        .collect()
}

fn fmt(v: f64) -> String {
    crate::maps::format_value(v)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt)
}

/// Per-trial rows followed by one `mean` row per (policy, scenario).
pub fn suite_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.policy,
            r.scenario.name(),
            r.trial,
            m.success as u8,
            fmt(m.navigation_time),
            fmt(m.trajectory_length),
            fmt(m.threat_exposure),
            fmt(m.cover_utilization)
        ));
    }
    for a in aggregate(records.iter().map(|r| (r.policy.as_str(), r.scenario.name(), &r.metrics))) {
        out.push_str(&format!(
            "{},{},mean,{},{},{},{},{}\n",
            a.policy,
            a.scenario,
            fmt(a.success_rate),
            fmt_opt(a.time_s),
            fmt_opt(a.length_m),
            fmt(a.exposure),
            fmt(a.cover_util)
        ));
    }
    out
}

/// Pooled per-policy means over every scenario.
pub fn policy_summary(records: &[TrialRecord]) -> Vec<AggregateRow> {
    aggregate(records.iter().map(|r| (r.policy.as_str(), "all", &r.metrics)))
}

/// For each metric, policies ordered best first (ties by name), with the pooled
/// means they were ranked on.
pub fn comparison(records: &[TrialRecord]) -> serde_json::Value {
    let summary = policy_summary(records);
    let rank = |key: &dyn Fn(&AggregateRow) -> f64, higher_better: bool| {
        let mut v: Vec<(String, f64)> = summary.iter().map(|a| (a.policy.clone(), key(a))).collect();
        v.sort_by(|a, b| {
            let o = if higher_better { b.1.total_cmp(&a.1) } else { a.1.total_cmp(&b.1) };
            o.then_with(|| a.0.cmp(&b.0))
        });
        v.into_iter().map(|(p, _)| p).collect::<Vec<_>>()
    };
    serde_json::json!({
        "summary": summary,
        "ordering": {
            "success_rate": rank(&|a| a.success_rate, true),
            "exposure": rank(&|a| a.exposure, false),
            "cover_util": rank(&|a| a.cover_util, true),
            "time_s": rank(&|a| a.time_s.unwrap_or(f64::INFINITY), false),
            "length_m": rank(&|a| a.length_m.unwrap_or(f64::INFINITY), false),
        }
    })
}
