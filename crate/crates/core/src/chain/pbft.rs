use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ChainError;
use crate::ids::NodeId;

type Hash = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    Honest,
    /// Sends nothing.
    Crashed,
    /// Equivocates when enabled in [`FaultConfig`], otherwise silent.
    Byzantine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    PrePrepared,
    Prepared,
    Committed,
}

/// Vote counters keyed by (view, sequence) and digest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VoteLog {
    pub prepares: BTreeMap<(u64, u64), BTreeMap<Hash, u32>>,
    pub commits: BTreeMap<(u64, u64), BTreeMap<Hash, u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidatorState {
    pub node_id: NodeId,
    pub view: u64,
    pub phase: Phase,
    pub log: VoteLog,
    pub fault_mode: FaultMode,
    /// Digest this validator committed in its latest round.
    pub committed: Option<Hash>,
}

impl ValidatorState {
    pub fn new(node_id: NodeId, fault_mode: FaultMode) -> Self {
        ValidatorState {
            node_id,
            view: 0,
            phase: Phase::Idle,
            log: VoteLog::default(),
            fault_mode,
            committed: None,
        }
    }

    fn is_honest(&self) -> bool {
        self.fault_mode == FaultMode::Honest
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    /// Byzantine validators send the genuine digest to one half of the
    /// network and a forged one to the other; when false they stay silent.
    pub equivocate: bool,
    /// Wait before the single proposer-rotation retry.
    pub view_change_timeout_ms: f64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig {
            equivocate: true,
            view_change_timeout_ms: 2_000.0,
        }
    }
}

/// Per-message delay between validators; `None` means the message is lost.
pub trait LinkModel {
    fn sample_ms<R: Rng + ?Sized>(&self, rng: &mut R, from: NodeId, to: NodeId) -> Option<f64>;
}

/// `base · (1 ± U·jitter)` with independent loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformLink {
    pub base_ms: f64,
    pub jitter_fraction: f64,
    pub loss_probability: f64,
}

impl LinkModel for UniformLink {
    fn sample_ms<R: Rng + ?Sized>(&self, rng: &mut R, _: NodeId, _: NodeId) -> Option<f64> {
        if self.loss_probability > 0.0 && rng.random::<f64>() < self.loss_probability {
            return None;
        }
        let u: f64 = rng.random_range(-1.0..=1.0);
        Some((self.base_ms * (1.0 + u * self.jitter_fraction)).max(0.0))
    }
}

/// Simulated phase durations. `t_consensus = max(t_prepare, t_commit) + t_network`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTiming {
    pub t_prepare_ms: f64,
    pub t_commit_ms: f64,
    pub t_network_ms: f64,
    pub t_consensus_ms: f64,
}

impl ConsensusTiming {
    pub fn new(t_prepare_ms: f64, t_commit_ms: f64, t_network_ms: f64) -> Self {
        ConsensusTiming {
            t_prepare_ms,
            t_commit_ms,
            t_network_ms,
            t_consensus_ms: t_prepare_ms.max(t_commit_ms) + t_network_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    /// At least one honest validator committed.
    pub committed: bool,
    pub digest: Option<Hash>,
    pub view: u64,
    pub proposer: NodeId,
    pub timing: ConsensusTiming,
    pub message_count: u64,
    /// Per validator, the digest it committed (faulty validators: `None`).
    pub commits: Vec<Option<Hash>>,
    /// Simulated time of the last honest commit, relative to the round start.
    pub finalized_at_ms: f64,
}

/// Matching votes needed to prepare or commit: `n − f` with `f = ⌊(n−1)/3⌋`.
pub fn quorum(n: usize) -> usize {
    n - (n.saturating_sub(1)) / 3
}

fn forged(digest: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update(b"haven.equivocation.v1");
    h.update(digest);
    h.finalize().into()
}

struct Msg {
    at: f64,
    from: usize,
    digest: Hash,
}

/// Time at which `need` distinct senders' votes for `digest` have arrived,
/// never earlier than `not_before`.
fn quorum_time(inbox: &[Msg], digest: &Hash, need: usize, not_before: f64) -> Option<f64> {
    let mut first: BTreeMap<usize, f64> = BTreeMap::new();
    for m in inbox.iter().filter(|m| &m.digest == digest) {
        let e = first.entry(m.from).or_insert(m.at);
        *e = e.min(m.at);
    }
    let mut times: Vec<f64> = first.into_values().collect();
    if times.len() < need {
        return None;
    }
    times.sort_by(f64::total_cmp);
    Some(times[need - 1].max(not_before))
}

/// One three-phase agreement attempt on `block_hash` at (`view`, `sequence`).
pub fn pbft_round<L: LinkModel, R: Rng + ?Sized>(
    validators: &mut [ValidatorState],
    block_hash: &Hash,
    view: u64,
    sequence: u64,
    faults: &FaultConfig,
    rng: &mut R,
    link: &L,
) -> Result<RoundOutcome, ChainError> {
    let n = validators.len();
    if n == 0 {
        return Err(ChainError::NoValidators);
    }
    let q = quorum(n);
    let p = (view % n as u64) as usize;
    let fake = forged(block_hash);
    let half = n / 2;
    // Digest a Byzantine sender shows to node `to`.
    let byz_digest = |to: usize| if to < half { *block_hash } else { fake };
    let ids: Vec<NodeId> = validators.iter().map(|v| v.node_id).collect();
    let mode: Vec<FaultMode> = validators.iter().map(|v| v.fault_mode).collect();
    let equivocating = |i: usize| mode[i] == FaultMode::Byzantine && faults.equivocate;

    for v in validators.iter_mut() {
        v.view = view;
        v.phase = Phase::Idle;
        v.committed = None;
    }

    let mut messages = 0u64;
    let mut send =
        |rng: &mut R, from: usize, to: usize, at: f64, digest: Hash, inbox: &mut Vec<Vec<Msg>>| {
            messages += 1;
            if let Some(d) = link.sample_ms(rng, ids[from], ids[to]) {
                inbox[to].push(Msg {
                    at: at + d,
                    from,
                    digest,
                });
            }
        };

    // Pre-prepare.
    let mut pp_box: Vec<Vec<Msg>> = (0..n).map(|_| Vec::new()).collect();
    match mode[p] {
        FaultMode::Honest => {
            pp_box[p].push(Msg {
                at: 0.0,
                from: p,
                digest: *block_hash,
            });
            for j in (0..n).filter(|&j| j != p) {
                send(rng, p, j, 0.0, *block_hash, &mut pp_box);
            }
        }
        FaultMode::Byzantine if faults.equivocate => {
            for j in (0..n).filter(|&j| j != p) {
                send(rng, p, j, 0.0, byz_digest(j), &mut pp_box);
            }
        }
        _ => {}
    }
    // Honest validators accept only the first pre-prepare for this slot.
    let accepted: Vec<Option<(f64, Hash)>> = pp_box
        .iter()
        .map(|b| {
            b.iter()
                .min_by(|a, c| a.at.total_cmp(&c.at))
                .map(|m| (m.at, m.digest))
        })
        .collect();

    // Prepare.
    let mut prep_box: Vec<Vec<Msg>> = (0..n).map(|_| Vec::new()).collect();
    for i in 0..n {
        match mode[i] {
            FaultMode::Honest => {
                if let Some((t, d)) = accepted[i] {
                    prep_box[i].push(Msg {
                        at: t,
                        from: i,
                        digest: d,
                    });
                    for j in (0..n).filter(|&j| j != i) {
                        send(rng, i, j, t, d, &mut prep_box);
                    }
                }
            }
            FaultMode::Byzantine if equivocating(i) => {
                let t = accepted[i].map_or(0.0, |a| a.0);
                for j in (0..n).filter(|&j| j != i) {
                    send(rng, i, j, t, byz_digest(j), &mut prep_box);
                }
            }
            _ => {}
        }
    }
    let prepared: Vec<Option<(f64, Hash)>> = (0..n)
        .map(|i| {
            let (t, d) = accepted[i]?;
            (mode[i] == FaultMode::Honest).then_some(())?;
            quorum_time(&prep_box[i], &d, q, t).map(|tp| (tp, d))
        })
        .collect();

    // Commit.
    let mut commit_box: Vec<Vec<Msg>> = (0..n).map(|_| Vec::new()).collect();
    for i in 0..n {
        match mode[i] {
            FaultMode::Honest => {
                if let Some((t, d)) = prepared[i] {
                    commit_box[i].push(Msg {
                        at: t,
                        from: i,
                        digest: d,
                    });
                    for j in (0..n).filter(|&j| j != i) {
                        send(rng, i, j, t, d, &mut commit_box);
                    }
                }
            }
            FaultMode::Byzantine if equivocating(i) => {
                let t = accepted[i].map_or(0.0, |a| a.0);
                for j in (0..n).filter(|&j| j != i) {
                    send(rng, i, j, t, byz_digest(j), &mut commit_box);
                }
            }
            _ => {}
        }
    }
    let committed_at: Vec<Option<(f64, Hash)>> = (0..n)
        .map(|i| {
            let (tp, d) = prepared[i]?;
            quorum_time(&commit_box[i], &d, q, tp).map(|tc| (tc, d))
        })
        .collect();

    // Bookkeeping on validator state.
    for (i, v) in validators.iter_mut().enumerate() {
        let key = (view, sequence);
        let tally = |b: &[Msg]| {
            let mut m: BTreeMap<Hash, u32> = BTreeMap::new();
            for msg in b {
                *m.entry(msg.digest).or_default() += 1;
            }
            m
        };
        if v.is_honest() {
            v.log.prepares.insert(key, tally(&prep_box[i]));
            v.log.commits.insert(key, tally(&commit_box[i]));
            v.phase = if committed_at[i].is_some() {
                Phase::Committed
            } else if prepared[i].is_some() {
                Phase::Prepared
            } else if accepted[i].is_some() {
                Phase::PrePrepared
            } else {
                Phase::Idle
            };
            v.committed = committed_at[i].map(|c| c.1);
        }
    }

    let honest = |i: &usize| mode[*i] == FaultMode::Honest;
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let t_network = fold_max(
        &mut (0..n)
            .filter(honest)
            .filter_map(|i| accepted[i].map(|a| a.0)),
    );
    let t_prepare = fold_max(
        &mut (0..n)
            .filter(honest)
            .filter_map(|i| Some(prepared[i]?.0 - accepted[i]?.0)),
    );
    let t_commit = fold_max(
        &mut (0..n)
            .filter(honest)
            .filter_map(|i| Some(committed_at[i]?.0 - prepared[i]?.0)),
    );
    let finalized = fold_max(&mut committed_at.iter().flatten().map(|c| c.0));
    let commits: Vec<Option<Hash>> = committed_at.iter().map(|c| c.map(|c| c.1)).collect();
    let digest = commits.iter().flatten().next().copied();
    Ok(RoundOutcome {
        committed: digest.is_some(),
        digest,
        view,
        proposer: ids[p],
        timing: ConsensusTiming::new(t_prepare, t_commit, t_network),
        message_count: messages,
        commits,
        finalized_at_ms: finalized,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusOutcome {
    pub round: RoundOutcome,
    /// 1, or 2 when the proposer-rotation retry was needed.
    pub attempts: u32,
    pub total_messages: u64,
    pub timing: ConsensusTiming,
}

/// Runs a round at `view` and, if no honest validator commits, waits for the
/// view-change timeout and retries once under the next proposer. The wait is
/// accounted as network time.
pub fn pbft_consensus<L: LinkModel, R: Rng + ?Sized>(
    validators: &mut [ValidatorState],
    block_hash: &Hash,
    view: u64,
    sequence: u64,
    faults: &FaultConfig,
    rng: &mut R,
    link: &L,
) -> Result<ConsensusOutcome, ChainError> {
    let first = pbft_round(validators, block_hash, view, sequence, faults, rng, link)?;
    if first.committed {
        return Ok(ConsensusOutcome {
            timing: first.timing,
            total_messages: first.message_count,
            attempts: 1,
            round: first,
        });
    }
    let second = pbft_round(
        validators,
        block_hash,
        view + 1,
        sequence,
        faults,
        rng,
        link,
    )?;
    let t = second.timing;
    Ok(ConsensusOutcome {
        timing: ConsensusTiming::new(
            t.t_prepare_ms,
            t.t_commit_ms,
            t.t_network_ms + faults.view_change_timeout_ms,
        ),
        total_messages: first.message_count + second.message_count,
        attempts: 2,
        round: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn nodes(modes: &[FaultMode]) -> Vec<ValidatorState> {
        modes
            .iter()
            .enumerate()
            .map(|(i, &m)| ValidatorState::new(NodeId(i as u32), m))
            .collect()
    }

    fn link() -> UniformLink {
        UniformLink {
            base_ms: 200.0,
            jitter_fraction: 0.2,
            loss_probability: 0.0,
        }
    }

    use FaultMode::{Byzantine as B, Crashed as C, Honest as H};

    #[test]
    fn four_honest_commit_with_phase_arithmetic_messages() {
        let mut v = nodes(&[H; 4]);
        let out = pbft_round(
            &mut v,
            &[7; 32],
            0,
            1,
            &FaultConfig::default(),
            &mut seed::rng(1, &[]),
            &link(),
        )
        .unwrap();
        assert!(out.committed);
        assert_eq!(out.message_count, 3 + 2 * 4 * 3);
        assert!(out.message_count <= 3 + 2 * 16);
        assert!(v
            .iter()
            .all(|s| s.phase == Phase::Committed && s.committed == Some([7; 32])));
        assert_eq!(v[0].log.prepares[&(0, 1)][&[7; 32]], 4);
    }

    #[test]
    fn crash_tolerance_boundary() {
        let f = FaultConfig::default();
        let rng = &mut seed::rng(2, &[]);
        let out = pbft_round(&mut nodes(&[H, H, H, C]), &[1; 32], 0, 0, &f, rng, &link()).unwrap();
        assert!(out.committed);
        let out = pbft_round(&mut nodes(&[H, H, C, C]), &[1; 32], 0, 0, &f, rng, &link()).unwrap();
        assert!(!out.committed);
    }

    #[test]
    fn crashed_proposer_needs_view_change() {
        let f = FaultConfig::default();
        let mut v = nodes(&[C, H, H, H]);
        let out =
            pbft_consensus(&mut v, &[2; 32], 0, 0, &f, &mut seed::rng(3, &[]), &link()).unwrap();
        assert_eq!(out.attempts, 2);
        assert!(out.round.committed);
        assert_eq!(out.round.proposer, NodeId(1));
        assert!(out.timing.t_network_ms >= f.view_change_timeout_ms);
        let t = out.timing;
        assert_eq!(
            t.t_consensus_ms,
            t.t_prepare_ms.max(t.t_commit_ms) + t.t_network_ms
        );
    }

    #[test]
    fn quorum_sizes() {
        assert_eq!(
            (4..=10).map(quorum).collect::<Vec<_>>(),
            vec![3, 4, 5, 5, 6, 7, 7]
        );
    }

    #[test]
    fn equivocating_proposer_cannot_split_honest_nodes() {
        let f = FaultConfig::default();
        for seed in 0..50 {
            let mut v = nodes(&[B, H, H, H, H]);
            let out = pbft_round(
                &mut v,
                &[3; 32],
                0,
                0,
                &f,
                &mut seed::rng(seed, &[]),
                &link(),
            )
            .unwrap();
            let set: std::collections::BTreeSet<_> = out.commits.iter().flatten().collect();
            assert!(set.len() <= 1);
        }
    }
}
