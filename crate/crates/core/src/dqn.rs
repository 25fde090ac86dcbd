//! Feed-forward Q-network, replay memory and the DQN training loop.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{DqnAgent, EncodeScale};
use crate::determinism::{split, Stream};
use crate::engine::{EngineError, ScenarioConfig, Scenario};
use crate::eval::{DqnEval, RewardError, RewardParams};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss {loss} at update {update}")]
    NonFiniteLoss { loss: f64, update: u64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("malformed network file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense network: rectifier on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per layer, row-major `[out][in]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

const MAGIC: &[u8; 8] = b"TBSANET1";

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        assert!(sizes.iter().all(|s| *s > 0), "layer sizes must be positive");
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|n| vec![0.0; *n]).collect();
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    /// He-uniform weights, zero biases.
    pub fn random(sizes: &[usize], stream: &mut Stream) -> Self {
        let mut net = Mlp::zeros(sizes);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = stream.uniform(-bound, bound);
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// All parameters, layer by layer: weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    /// Activations of every layer, input included. Hidden entries are
    /// post-rectifier values.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let last = self.layers() - 1;
        for l in 0..self.layers() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let w = &self.weights[l];
            let mut out = self.biases[l].clone();
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &w[o * nin..(o + 1) * nin];
                *slot += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if l < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            debug_assert_eq!(out.len(), nout);
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, DqnError> {
        if x.len() != self.input_size() {
            return Err(DqnError::DimensionMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(self.activations(x).pop().expect("output layer"))
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Accumulate `scale * dQ[action]/dθ` for one input into `grads`.
    fn backprop_into(&self, x: &[f64], action: usize, scale: f64, grads: &mut Gradients) {
        let acts = self.activations(x);
        let mut delta = vec![0.0; self.output_size()];
        delta[action] = scale;
        for l in (0..self.layers()).rev() {
            let nin = self.sizes[l];
            let input = &acts[l];
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grads.biases[l][o] += d;
                let row = &mut gw[o * nin..(o + 1) * nin];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; nin];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &w[o * nin..(o + 1) * nin];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += d * wv;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<(), DqnError> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for s in &self.sizes {
            out.write_all(&(*s as u64).to_le_bytes())?;
        }
        for v in self.params() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self, DqnError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DqnError::BadFile("wrong magic or version".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        if !(2..=64).contains(&n) {
            return Err(DqnError::BadFile(format!("implausible layer count {n}")));
        }
        let mut sizes = Vec::with_capacity(n);
        let mut b8 = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut b8)?;
            let s = u64::from_le_bytes(b8) as usize;
            if s == 0 || s > 1 << 20 {
                return Err(DqnError::BadFile(format!("implausible layer size {s}")));
            }
            sizes.push(s);
        }
        let mut net = Mlp::zeros(&sizes);
        let mut flat = Vec::with_capacity(net.param_count());
        for _ in 0..net.param_count() {
            input.read_exact(&mut b8)?;
            flat.push(f64::from_le_bytes(b8));
        }
        net.set_params(&flat);
        if !net.is_finite() {
            return Err(DqnError::BadFile("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<(), DqnError> {
        let f = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(f))
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self, DqnError> {
        let f = std::fs::File::open(path)?;
        Mlp::load(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items[self.head..].iter().chain(&self.items[..self.head])
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, n: usize, stream: &mut Stream) -> Vec<usize> {
        (0..n).map(|_| stream.index(self.items.len())).collect()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnHyper {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub capacity: usize,
    /// Learning steps between target-network copies.
    pub sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Agent steps over which epsilon decays linearly.
    pub epsilon_decay_steps: u64,
    /// Transitions collected before learning starts.
    pub warmup: usize,
    pub optimizer: Optimizer,
}

impl Default for DqnHyper {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            gamma: 0.99,
            batch_size: 64,
            capacity: 10_000,
            sync_period: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            warmup: 64,
            optimizer: Optimizer::Adam,
        }
    }
}

impl DqnHyper {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |m: &str| Err(DqnError::InvalidHyper(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.capacity == 0 || self.sync_period == 0 {
            return bad("batch size, capacity and sync period must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_start) || !eps_ok(self.epsilon_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let f = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }

    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

/// Bellman targets `r + γ max_a' Q_target(s')`, with no bootstrap on
/// terminal transitions.
pub fn td_targets(target: &Mlp, batch: &[&Transition], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                t.reward
            } else {
                let q = target.forward(&t.next_state).expect("state size");
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// Mean squared error between `Q(s, a)` and fixed targets.
pub fn td_loss(net: &Mlp, batch: &[&Transition], targets: &[f64]) -> f64 {
    batch
        .iter()
        .zip(targets)
        .map(|(t, y)| {
            let q = net.forward(&t.state).expect("state size")[t.action];
            (q - y) * (q - y)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Loss and its gradient with respect to every parameter of `net`.
pub fn td_gradients(net: &Mlp, batch: &[&Transition], targets: &[f64]) -> (f64, Gradients) {
    let mut grads = net.zero_gradients();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (t, y) in batch.iter().zip(targets) {
        let q = net.forward(&t.state).expect("state size")[t.action];
        let err = q - y;
        loss += err * err;
        net.backprop_into(&t.state, t.action, 2.0 * err / n, &mut grads);
    }
    (loss / n, grads)
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, params: usize) -> Self {
        let n = if kind == Optimizer::Adam { params } else { 0 };
        Self {
            kind,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.step += 1;
        let mut k = 0;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let c1 = 1.0 - f64::powi(b1, self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - f64::powi(b2, self.step.min(i32::MAX as u64) as i32);
        let layers = net.weights.iter_mut().zip(net.biases.iter_mut());
        let glayers = grads.weights.iter().zip(&grads.biases);
        for ((w, b), (gw, gb)) in layers.zip(glayers) {
            for (p, g) in w.iter_mut().chain(b.iter_mut()).zip(gw.iter().chain(gb)) {
                match self.kind {
                    Optimizer::Sgd => *p -= lr * g,
                    Optimizer::Adam => {
                        self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
                        self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
                        let mh = self.m[k] / c1;
                        let vh = self.v[k] / c2;
                        *p -= lr * mh / (vh.sqrt() + eps);
                    }
                }
                k += 1;
            }
        }
    }
}

/// One gradient step on the mean squared TD error. Returns the loss before
/// the step.
pub fn td_update(
    net: &mut Mlp,
    target: &Mlp,
    batch: &[&Transition],
    hyper: &DqnHyper,
    opt: &mut OptimizerState,
) -> Result<f64, DqnError> {
    assert!(!batch.is_empty(), "batch must not be empty");
    let targets = td_targets(target, batch, hyper.gamma);
    let (loss, grads) = td_gradients(net, batch, &targets);
    if !loss.is_finite() {
        return Err(DqnError::NonFiniteLoss {
            loss,
            update: opt.step,
        });
    }
    opt.apply(net, &grads, hyper.learning_rate);
    if !net.is_finite() {
        return Err(DqnError::NonFiniteLoss {
            loss: f64::NAN,
            update: opt.step,
        });
    }
    Ok(loss)
}

/// Online network, target network, replay memory and schedules.
#[derive(Debug, Clone)]
pub struct Learner {
    pub online: Mlp,
    pub target: Mlp,
    pub buffer: ReplayBuffer,
    pub hyper: DqnHyper,
    opt: OptimizerState,
    stream: Stream,
    /// Agent decisions taken in training mode.
    pub steps: u64,
    /// Gradient updates applied.
    pub updates: u64,
}

impl Learner {
    pub fn new(net: Mlp, hyper: DqnHyper, stream: Stream) -> Self {
        let opt = OptimizerState::new(hyper.optimizer, net.param_count());
        Self {
            target: net.clone(),
            online: net,
            buffer: ReplayBuffer::new(hyper.capacity),
            opt,
            stream,
            hyper,
            steps: 0,
            updates: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.hyper.epsilon_at(self.steps)
    }

    pub fn tick(&mut self) {
        self.steps += 1;
    }

    pub fn push(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One learning step when enough transitions are stored.
    pub fn learn(&mut self) -> Result<Option<f64>, DqnError> {
        let need = self.hyper.warmup.max(self.hyper.batch_size.min(self.buffer.capacity()));
        if self.buffer.len() < need.max(1) {
            return Ok(None);
        }
        let idx = self.buffer.sample_indices(self.hyper.batch_size, &mut self.stream);
        let batch: Vec<&Transition> = idx.iter().map(|i| self.buffer.get(*i)).collect();
        let loss = td_update(&mut self.online, &self.target, &batch, &self.hyper, &mut self.opt)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.hyper.sync_period) {
            self.target = self.online.clone();
        }
        Ok(Some(loss))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub scenario: ScenarioConfig,
    pub hyper: DqnHyper,
    pub rewards: RewardParams,
    pub n_per_type: usize,
    /// Episode `i` runs the scenario with base seed `seed + i`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig {
                record_trace: false,
                ..ScenarioConfig::default()
            },
            hyper: DqnHyper::default(),
            rewards: RewardParams::default(),
            n_per_type: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub episode: usize,
    pub seed: u64,
    pub total_reward: f64,
    pub steps: u64,
    pub completed: usize,
    pub epsilon: f64,
    pub loss: Option<f64>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Train a fresh network for `episodes` scenarios.
pub fn train(cfg: &TrainConfig, episodes: usize) -> Result<(Mlp, Vec<EpisodeStat>), TrainError> {
    assert!(episodes >= 1, "need at least one episode");
    cfg.hyper.validate()?;
    cfg.rewards.validate()?;
    let mut init = Stream::new(split(cfg.seed, "network-init").expect("label"));
    let sizes = cfg.hyper.layer_sizes(
        DqnAgent::input_size(cfg.n_per_type),
        DqnAgent::output_size(cfg.n_per_type),
    );
    let net = Mlp::random(&sizes, &mut init);
    let mut agent: Option<DqnAgent> = None;
    let mut curve = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let seed = cfg.seed.wrapping_add(ep as u64);
        let scenario_cfg = ScenarioConfig {
            record_trace: false,
            ..cfg.scenario.clone()
        }
        .with_seed(seed);
        let mut sc = Scenario::new(&scenario_cfg)?;
        let a = agent.get_or_insert_with(|| {
            let scale = EncodeScale::for_diagonal(sc.map().diagonal());
            let mut a = DqnAgent::new(net.clone(), cfg.hyper.clone(), cfg.n_per_type, scale, split(cfg.seed, "agent").expect("label"))
                .expect("sizes come from the encoder");
            a.training = true;
            a
        });
        a.scale = EncodeScale::for_diagonal(sc.map().diagonal());
        let mut eval = DqnEval::new(cfg.rewards)?;
        let outcome = sc.run(a, &mut eval);
        curve.push(EpisodeStat {
            episode: ep,
            seed,
            total_reward: eval.total_reward,
            steps: outcome.steps,
            completed: outcome.completed,
            epsilon: a.learner.epsilon(),
            loss: a.last_loss,
        });
    }
    let net = agent.map(|a| a.learner.online).unwrap_or(net);
    Ok((net, curve))
}

pub fn write_curve_csv<W: Write>(curve: &[EpisodeStat], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "seed", "total_reward", "steps", "completed", "epsilon", "loss"])?;
    for e in curve {
        w.write_record([
            e.episode.to_string(),
            e.seed.to_string(),
            e.total_reward.to_string(),
            e.steps.to_string(),
            e.completed.to_string(),
            e.epsilon.to_string(),
            e.loss.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
