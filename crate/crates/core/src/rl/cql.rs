use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionIndex, ActionMask, RlError, StateFeatures, NUM_ACTIONS, NUM_STATES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqlParams {
    /// Weight of the conservative regularizer.
    pub alpha: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Initial value of every table entry.
    pub init: f64,
}

impl Default for CqlParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.95,
            learning_rate: 0.05,
            batch_size: 256,
            epochs: 500,
            init: 0.0,
        }
    }
}

impl CqlParams {
    pub fn validate(&self) -> Result<(), RlError> {
        let ok = self.alpha >= 0.0
            && self.alpha.is_finite()
            && (0.0..=1.0).contains(&self.gamma)
            && self.learning_rate > 0.0
            && self.learning_rate < 1.0
            && self.batch_size > 0
            && self.init.is_finite();
        if ok {
            Ok(())
        } else {
            Err(RlError::BadParams(format!("{self:?}")))
        }
    }
}

/// A transition over plain state and action indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabularTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
}

/// Dense Q table with per-pair dataset visit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, init: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![init; num_states * num_actions],
            visits: vec![0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.num_actions + a]
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        self.visits[s * self.num_actions..(s + 1) * self.num_actions].iter().sum()
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }


    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Numerically stable log-sum-exp and softmax of one row.
pub fn log_sum_exp(row: &[f64]) -> (f64, Vec<f64>) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|q| (q - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    (m + z.ln(), exps.into_iter().map(|e| e / z).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub td_loss: f64,
    pub cql_term: f64,
}

/// One update on a batch.
///
/// Per sample the loss is `(Q(s,a) - y)^2 + alpha * (logsumexp_b Q(s,b) - Q(s,a))`
/// with the target `y = r + gamma * max_b Q(s',b)` (0 bootstrap at terminals) held
/// fixed. Every table entry touched by the batch moves by `lr` times the mean of
/// its per-sample gradients. Returns the batch means of the squared TD error and
/// of the regularizer.
pub fn cql_step(table: &mut QTable, batch: &[TabularTransition], params: &CqlParams) -> (f64, f64) {
    let na = table.num_actions;
    let mut grads: std::collections::BTreeMap<usize, (f64, u32)> = std::collections::BTreeMap::new();
    let mut td_sum = 0.0;
    let mut cql_sum = 0.0;
    for t in batch {
        let q = table.get(t.state, t.action);
        let y = if t.terminal {
            t.reward
        } else {
            t.reward + params.gamma * table.max_value(t.next_state)
        };
        let td = q - y;
        let (lse, soft) = log_sum_exp(table.row(t.state));
        td_sum += td * td;
        cql_sum += lse - q;
        for (b, p) in soft.iter().enumerate() {
            let mut g = params.alpha * p;
            if b == t.action {
                g += 2.0 * td - params.alpha;
            }
            let slot = grads.entry(t.state * na + b).or_insert((0.0, 0));
            slot.0 += g;
            slot.1 += 1;
        }
    }
    for (k, (sum, n)) in grads {
        table.values[k] -= params.learning_rate * sum / n as f64;
    }
    let n = batch.len().max(1) as f64;
    (td_sum / n, cql_sum / n)
}

/// Trains a table from `init` on the dataset. Each epoch is one pass over a fresh
/// shuffle, in batches of `batch_size`.
pub fn cql_train(
    num_states: usize,
    num_actions: usize,
    data: &[TabularTransition],
    params: &CqlParams,
    seed: u64,
) -> Result<(QTable, Vec<EpochLoss>), RlError> {
    params.validate()?;
    if data.is_empty() {
        return Err(RlError::EmptyDataset);
    }
    if let Some(t) = data
        .iter()
        .find(|t| t.state >= num_states || t.next_state >= num_states || t.action >= num_actions || !t.reward.is_finite())
    {
        return Err(RlError::BadTransition(format!("{t:?}")));
    }
    let mut table = QTable::new(num_states, num_actions, params.init);
    for t in data {
        table.visits[t.state * num_actions + t.action] += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(params.epochs);
    let mut batch = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let (mut td, mut cql) = (0.0, 0.0);
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| data[k]));
            let (a, b) = cql_step(&mut table, &batch, params);
            td += a * chunk.len() as f64;
            cql += b * chunk.len() as f64;
        }
        let n = data.len() as f64;
        log.push(EpochLoss {
            epoch,
            td_loss: td / n,
            cql_term: cql / n,
        });
    }
    Ok((table, log))
}

/// Learned action values over the discretized navigation state space.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    table: QTable,
    init: f64,
}

#[derive(Serialize, Deserialize)]
struct QEntry {
    state: [u8; 5],
    values: Vec<f64>,
    visits: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QFile {
    format: String,
    init: f64,
    params: Option<CqlParams>,
    entries: Vec<QEntry>,
}

pub const QFUNCTION_FORMAT: &str = "qfunction.v1";

impl QFunction {
    pub fn new(init: f64) -> Self {
        Self {
            table: QTable::new(NUM_STATES, NUM_ACTIONS, init),
            init,
        }
    }

    pub fn from_table(table: QTable, init: f64) -> Result<Self, RlError> {
        if table.num_states != NUM_STATES || table.num_actions != NUM_ACTIONS {
            return Err(RlError::BadParams("table shape".into()));
        }
        Ok(Self { table, init })
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn value(&self, s: &StateFeatures, a: ActionIndex) -> f64 {
        self.table.get(s.index(), a.index())
    }

    pub fn set_value(&mut self, s: &StateFeatures, a: ActionIndex, v: f64) {
        self.table.set(s.index(), a.index(), v);
    }

    pub fn state_visits(&self, s: &StateFeatures) -> u64 {
        self.table.state_visits(s.index())
    }

    /// JSON keyed by feature tuple; states left at the initial value and never
    /// visited are omitted.
    pub fn to_json(&self, params: Option<&CqlParams>) -> String {
        let entries = (0..NUM_STATES)
            .filter(|&s| self.table.state_visits(s) > 0 || self.table.row(s).iter().any(|v| *v != self.init))
            .map(|s| QEntry {
                state: StateFeatures::from_index(s).expect("index in range").to_bytes(),
                values: self.table.row(s).to_vec(),
                visits: self.table.visits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS].to_vec(),
            })
            .collect();
        let file = QFile {
            format: QFUNCTION_FORMAT.into(),
            init: self.init,
            params: params.copied(),
            entries,
        };
        serde_json::to_string_pretty(&file).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, RlError> {
        let file: QFile = serde_json::from_str(text).map_err(|e| RlError::Format(e.to_string()))?;
        if file.format != QFUNCTION_FORMAT {
            return Err(RlError::Format(format!("unknown format {:?}", file.format)));
        }
        let mut q = Self::new(file.init);
        for e in file.entries {
            let s = StateFeatures::from_bytes(e.state)
                .ok_or_else(|| RlError::Format(format!("bad state {:?}", e.state)))?
                .index();
            if e.values.len() != NUM_ACTIONS || e.visits.len() != NUM_ACTIONS {
                return Err(RlError::Format("entry must list 25 actions".into()));
            }
            if e.values.iter().any(|v| !v.is_finite()) {
                return Err(RlError::Format("non-finite value".into()));
            }
            q.table.values[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS].copy_from_slice(&e.values);
            q.table.visits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS].copy_from_slice(&e.visits);
        }
        Ok(q)
    }
}

/// Highest-valued allowed action; ties go to the lowest index.
pub fn greedy_action(q: &QFunction, state: &StateFeatures, mask: &ActionMask) -> Result<ActionIndex, RlError> {
    greedy_from_row(q.table.row(state.index()), mask)
}

pub fn greedy_from_row(row: &[f64], mask: &ActionMask) -> Result<ActionIndex, RlError> {
    let mut best: Option<(ActionIndex, f64)> = None;
    for a in mask.allowed() {
        let v = row[a.index()];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a).ok_or(RlError::NoFeasibleAction)
}
