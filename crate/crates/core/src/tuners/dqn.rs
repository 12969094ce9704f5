use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split_holdout, BestValueCurve, OraclePolicy, ParamSpace, TunerError};
use crate::local_planner::NavParams;
use crate::nn::{argmax, cross_entropy, Gradients, LayerSpec, Net};
use crate::robot_sim::{run_episode, EpisodeConfig, EpisodeResult, TuneContext, TunerPolicy};
use crate::sensing::Observation;

/// Shared trunk with one Q-value head per tuned parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingQNet {
    pub trunk: Net,
    pub heads: Vec<Net>,
}

impl BranchingQNet {
    /// Adds a `dense(trunk_out, n)` head for every entry of `head_sizes`.
    pub fn new(trunk: Net, head_sizes: &[usize], seed: u64) -> Self {
        let width = trunk.output_len();
        let heads = head_sizes
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                Net::new(
                    width,
                    &[LayerSpec::Dense { outputs: n }],
                    seed.wrapping_add(1 + b as u64),
                )
                .expect("valid head")
            })
            .collect();
        BranchingQNet { trunk, heads }
    }

    /// Convolutional trunk over observations of length `input_len`.
    pub fn cnn(input_len: usize, space: &ParamSpace, seed: u64) -> Self {
        let trunk = Net::new(input_len, &Net::cnn_trunk(), seed).expect("valid trunk");
        Self::new(trunk, &space.cardinalities(), seed)
    }

    pub fn input_len(&self) -> usize {
        self.trunk.input_len
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.heads.iter().map(Net::output_len).collect()
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let h = self
            .trunk
            .forward(x)
            .expect("observation length matches the trunk");
        self.heads
            .iter()
            .map(|head| head.forward(&h).expect("head matches trunk"))
            .collect()
    }

    pub fn greedy(&self, x: &[f64]) -> Vec<usize> {
        self.q_values(x).iter().map(|q| argmax(q)).collect()
    }

    pub fn copy_from(&mut self, other: &BranchingQNet) {
        self.trunk.copy_from(&other.trunk);
        for (a, b) in self.heads.iter_mut().zip(&other.heads) {
            a.copy_from(b);
        }
    }

    fn zero_grads(&self) -> (Gradients, Vec<Gradients>) {
        (
            Gradients::zeros_like(&self.trunk),
            self.heads.iter().map(Gradients::zeros_like).collect(),
        )
    }

    /// Backpropagates per-head output gradients for one input.
    fn accumulate(
        &self,
        x: &[f64],
        upstream: &[Vec<f64>],
        grads: &mut (Gradients, Vec<Gradients>),
    ) {
        let h = self
            .trunk
            .forward(x)
            .expect("observation length matches the trunk");
        let mut gh = vec![0.0; h.len()];
        for ((head, up), g) in self.heads.iter().zip(upstream).zip(grads.1.iter_mut()) {
            if up.iter().all(|v| *v == 0.0) {
                continue;
            }
            let d = head.backward_into(&h, up, g).expect("head matches trunk");
            gh.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        self.trunk
            .backward_into(x, &gh, &mut grads.0)
            .expect("observation length matches the trunk");
    }

    fn apply(&mut self, grads: &(Gradients, Vec<Gradients>), lr: f64) {
        self.trunk.sgd_step(&grads.0, lr);
        for (head, g) in self.heads.iter_mut().zip(&grads.1) {
            head.sgd_step(g, lr);
        }
    }
}

/// Epsilon-greedy per branch: each branch independently explores with
/// probability `epsilon`, otherwise takes its argmax (lowest index on ties).
pub fn select_action<R: Rng>(
    q: &BranchingQNet,
    obs: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Vec<usize> {
    q.q_values(obs)
        .iter()
        .map(|values| {
            let explore = rng.gen::<f64>() < epsilon;
            let random = rng.gen_range(0..values.len());
            if explore {
                random
            } else {
                argmax(values)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub obs: Observation,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// FIFO ring buffer of experiences.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
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

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Up to `n` distinct experiences drawn uniformly.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        rand::seq::index::sample(rng, self.items.len(), n.min(self.items.len()))
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// One SGD step on the mean over batch and branches of the squared TD
/// error, with per-branch targets `r + gamma·max_a Q_target,b(s', a)`.
/// Returns the loss before the step.
pub fn dqn_update(
    q: &mut BranchingQNet,
    target: &BranchingQNet,
    batch: &[&Experience],
    gamma: f64,
    lr: f64,
) -> f64 {
    assert!(!batch.is_empty(), "empty batch");
    let branches = q.heads.len();
    let norm = (branches * batch.len()) as f64;
    let mut grads = q.zero_grads();
    let mut loss = 0.0;
    for e in batch {
        let x = e.obs.to_f64();
        let qs = q.q_values(&x);
        let next = if e.done {
            None
        } else {
            Some(target.q_values(&e.next_obs.to_f64()))
        };
        let upstream: Vec<Vec<f64>> = (0..branches)
            .map(|b| {
                let y = e.reward
                    + next.as_ref().map_or(0.0, |n| {
                        gamma * n[b].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    });
                let err = qs[b][e.actions[b]] - y;
                loss += err * err;
                let mut up = vec![0.0; qs[b].len()];
                up[e.actions[b]] = 2.0 * err / norm;
                up
            })
            .collect();
        q.accumulate(&x, &upstream, &mut grads);
    }
    q.apply(&grads, lr);
    loss / norm
}

/// An observation with the action indices to imitate.
#[derive(Clone, Debug, PartialEq)]
pub struct CloneSample {
    pub x: Vec<f64>,
    pub actions: Vec<usize>,
}

/// Minibatch cross-entropy fit of every head to the labelled actions;
/// returns the mean loss of the last epoch.
pub fn behavior_clone(
    q: &mut BranchingQNet,
    data: &[&CloneSample],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&CloneSample> = data.to_vec();
    let branches = q.heads.len() as f64;
    let mut last = 0.0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size.max(1)) {
            let mut grads = q.zero_grads();
            let norm = branches * chunk.len() as f64;
            for s in chunk {
                let upstream: Vec<Vec<f64>> = q
                    .q_values(&s.x)
                    .iter()
                    .zip(&s.actions)
                    .map(|(logits, &a)| {
                        let (l, g) = cross_entropy(logits, a);
                        total += l;
                        g.into_iter().map(|v| v / norm).collect()
                    })
                    .collect();
                q.accumulate(&s.x, &upstream, &mut grads);
            }
            q.apply(&grads, lr);
        }
        last = total / (branches * order.len().max(1) as f64);
    }
    last
}

/// Per-branch fraction of samples whose greedy action equals the label.
pub fn agreement(q: &BranchingQNet, data: &[&CloneSample]) -> Vec<f64> {
    let mut hits = vec![0usize; q.heads.len()];
    for s in data {
        for (b, a) in q.greedy(&s.x).into_iter().enumerate() {
            if a == s.actions[b] {
                hits[b] += 1;
            }
        }
    }
    hits.iter()
        .map(|&h| h as f64 / data.len().max(1) as f64)
        .collect()
}

/// Epsilon-greedy policy over a frozen Q-network.
#[derive(Clone, Debug)]
pub struct DqnPolicy {
    pub net: BranchingQNet,
    pub space: ParamSpace,
    pub defaults: NavParams,
    pub epsilon: f64,
}

impl TunerPolicy for DqnPolicy {
    fn tune(&self, ctx: &TuneContext<'_>, rng: &mut ChaCha8Rng) -> NavParams {
        let a = select_action(&self.net, &ctx.obs.to_f64(), self.epsilon, rng);
        self.space.decode(&a, &self.defaults)
    }

    fn name(&self) -> String {
        "dqn".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Scratch,
    WarmStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Updates between target-network syncs.
    pub target_sync: usize,
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplies every reward before it enters the replay buffer.
    pub reward_scale: f64,
    /// Share of the budget spent on cloning in warm-start mode.
    pub clone_fraction: f64,
    pub clone_epochs: usize,
    pub clone_lr: f64,
    pub clone_holdout: f64,
    /// Episodes rolled out against one network snapshot.
    pub rollout_batch: usize,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync: 500,
            lr: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            reward_scale: 1e-3,
            clone_fraction: 0.2,
            clone_epochs: 30,
            clone_lr: 1e-2,
            clone_holdout: 0.1,
            rollout_batch: 1,
            seed: 0,
        }
    }
}

impl DqnConfig {
    /// Linear anneal over the first half of the RL episodes.
    pub fn epsilon(&self, rl_episode: usize, rl_budget: usize) -> f64 {
        let half = (rl_budget as f64 / 2.0).max(1.0);
        let t = (rl_episode as f64 / half).min(1.0);
        self.epsilon_start + t * (self.epsilon_end - self.epsilon_start)
    }

    /// Cloning episodes for a warm-start budget.
    pub fn clone_episodes(&self, budget: usize) -> usize {
        ((budget as f64 * self.clone_fraction).round() as usize).min(budget)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Clone,
    Rl,
}

/// One row of the training metrics log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub phase: Phase,
    /// Undiscounted sum of unscaled rewards.
    pub episode_return: f64,
    pub success: bool,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloningReport {
    pub samples: usize,
    pub heldout: usize,
    pub final_loss: f64,
    pub train_agreement: Vec<f64>,
    pub heldout_agreement: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DqnOutcome {
    pub net: BranchingQNet,
    pub metrics: Vec<MetricsRow>,
    pub cloning: Option<CloningReport>,
    pub updates: usize,
}

/// Source of training episodes, indexed by episode number.
pub trait EpisodeSampler: Sync {
    fn episode(&self, index: usize) -> EpisodeConfig;
}

impl<F: Fn(usize) -> EpisodeConfig + Sync> EpisodeSampler for F {
    fn episode(&self, index: usize) -> EpisodeConfig {
        self(index)
    }
}

fn rollouts(
    sampler: &dyn EpisodeSampler,
    first: usize,
    n: usize,
    policy: &dyn TunerPolicy,
) -> Result<Vec<EpisodeResult>, TunerError> {
    let runs: Vec<_> = (first..first + n)
        .into_par_iter()
        .map(|i| run_episode(&sampler.episode(i), policy))
        .collect();
    runs.into_iter()
        .map(|r| r.map_err(TunerError::from))
        .collect()
}

fn experiences(r: &EpisodeResult, space: &ParamSpace, scale: f64) -> Vec<Experience> {
    r.transitions
        .iter()
        .map(|t| Experience {
            obs: r.observations[t.obs].clone(),
            actions: space.encode(&t.action),
            reward: t.reward * scale,
            next_obs: r.observations[t.next_obs].clone(),
            done: t.done,
        })
        .collect()
}

/// Trains a branching Q-network on `budget` episodes. Warm-start mode
/// first rolls out the oracle `curve` and clones its actions.
#[allow(clippy::too_many_arguments)]
pub fn train_dqn(
    sampler: &dyn EpisodeSampler,
    space: &ParamSpace,
    mode: TrainMode,
    budget: usize,
    cfg: &DqnConfig,
    curve: Option<&BestValueCurve>,
    defaults: &NavParams,
    input_len: usize,
) -> Result<DqnOutcome, TunerError> {
    let mut net = BranchingQNet::cnn(input_len, space, cfg.seed);
    let mut target = net.clone();
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd9e);
    let mut metrics = Vec::with_capacity(budget);
    let mut cloning = None;
    let mut episode = 0usize;

    if mode == TrainMode::WarmStart {
        let curve =
            curve.ok_or_else(|| TunerError::Io("warm start needs a best-value curve".into()))?;
        let n_clone = cfg.clone_episodes(budget);
        let oracle = OraclePolicy {
            curve: curve.clone(),
            defaults: *defaults,
        };
        let runs = rollouts(sampler, 0, n_clone, &oracle)?;
        let mut samples = Vec::new();
        for r in &runs {
            metrics.push(MetricsRow {
                episode,
                phase: Phase::Clone,
                episode_return: r.total_reward(),
                success: r.success,
                epsilon: 0.0,
            });
            episode += 1;
            for t in &r.transitions {
                samples.push(CloneSample {
                    x: r.observations[t.obs].to_f64(),
                    actions: space.encode(&t.action),
                });
            }
            for e in experiences(r, space, cfg.reward_scale) {
                replay.push(e);
            }
        }
        let (train, held) = split_holdout(&samples, cfg.clone_holdout, cfg.seed ^ 0xc10e);
        let final_loss = behavior_clone(
            &mut net,
            &train,
            cfg.clone_epochs,
            cfg.clone_lr,
            cfg.batch_size,
            cfg.seed,
        );
        target.copy_from(&net);
        cloning = Some(CloningReport {
            samples: samples.len(),
            heldout: held.len(),
            final_loss,
            train_agreement: agreement(&net, &train),
            heldout_agreement: agreement(&net, &held),
        });
    }

    let rl_budget = budget - episode;
    let mut updates = 0usize;
    let mut k = 0usize;
    while k < rl_budget {
        let n = cfg.rollout_batch.max(1).min(rl_budget - k);
        let epsilon = cfg.epsilon(k, rl_budget);
        let policy = DqnPolicy {
            net: net.clone(),
            space: space.clone(),
            defaults: *defaults,
            epsilon,
        };
        let runs = rollouts(sampler, episode, n, &policy)?;
        for r in &runs {
            metrics.push(MetricsRow {
                episode,
                phase: Phase::Rl,
                episode_return: r.total_reward(),
                success: r.success,
                epsilon,
            });
            episode += 1;
            for e in experiences(r, space, cfg.reward_scale) {
                replay.push(e);
                if replay.len() >= cfg.batch_size {
                    let batch = replay.sample(cfg.batch_size, &mut rng);
                    dqn_update(&mut net, &target, &batch, cfg.gamma, cfg.lr);
                    updates += 1;
                    if updates % cfg.target_sync.max(1) == 0 {
                        target.copy_from(&net);
                    }
                }
            }
        }
        k += n;
    }
    Ok(DqnOutcome {
        net,
        metrics,
        cloning,
        updates,
    })
}
