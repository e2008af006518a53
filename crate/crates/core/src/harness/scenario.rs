//! End-to-end scenario execution.
//!
//! Tier-1 inference is independent per vehicle, so it runs up front in
//! parallel. Everything that crosses the network (threat escalation, model
//! exchange, block mining) then runs on one deterministic event engine.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::campaign::plan_campaigns;
use super::config::{ConfigError, ScenarioConfig};
use super::metrics::{
    rounds_to_converge, ChainMetrics, Confusion, ConvergencePoint, DetectionMetrics,
    FederatedMetrics, MetricsReport, NetworkMetrics, ScenarioInfo, VerdictRecord, WallClock,
};
use crate::chain::{
    assemble_block, pbft_consensus, registry_apply, should_log, verify_chain, Block, ChainError,
    CrossRegionalTracker, FaultConfig, FaultMode, ThreatEvent, ThreatRegistry, UniformLink,
    ValidatorState,
};
use crate::edge::{
    signature_digest, EdgeDetector, EdgeError, ThreatClass, ThreatLevel, ThreatSignature,
    WindowFeatures,
};
use crate::federated::{
    aggregate_round, byzantine_update, local_train, trimmed_fraction, AggregatorConfig,
    ByzantineBehavior, ByzantineKind, ClientUpdate, FederatedError, GlobalModel, LocalLoss,
    LogisticData, PrivacyAccountant, PrivacyConfig,
};
use crate::ids::{NodeId, RegionId, VehicleId};
use crate::math::Standardizer;
use crate::netsim::{
    assign_regions, ChannelModel, Delivery, Endpoint, Engine, NetError, Region, Tier,
};
use crate::seed::{self, tag, SimRng};
use crate::sensors::{
    build_corpus, generate_clean_stream, inject_attack_labeled, label_stream, make_windows,
    AttackKind, AttackScenario, LabeledWindow, SensorError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sensors: {0}")]
    Sensor(#[from] SensorError),
    #[error("tier 1: {0}")]
    Edge(#[from] EdgeError),
    #[error("tier 2: {0}")]
    Federated(#[from] FederatedError),
    #[error("tier 3: {0}")]
    Chain(#[from] ChainError),
    #[error("network: {0}")]
    Net(#[from] NetError),
}

/// Everything produced by one run.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub report: MetricsReport,
    pub wall_clock: WallClock,
    pub verdicts: Vec<VerdictRecord>,
    pub ledger: Vec<Block>,
}

/// Runs `cfg` and returns only the report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    Ok(run_scenario_full(cfg)?.report)
}

struct WindowOutcome {
    start_ms: i64,
    end_ms: i64,
    actual: bool,
    kind: Option<AttackKind>,
    predicted: bool,
    score: f64,
    confidence: f64,
    level: ThreatLevel,
    class: ThreatClass,
    digest: [u8; 32],
    latency_ms: f64,
}

struct Escalation {
    signature: ThreatSignature,
    confidence: f64,
}

enum Msg {
    /// A finished window reaches the vehicle's edge unit.
    Analyze {
        vehicle: u32,
        window: usize,
    },
    Report(Box<Escalation>),
    Forward(Box<Escalation>),
    Flush,
    BlockCommitted,
    RoundStart(u64),
    Broadcast {
        vehicle: VehicleId,
        model: Arc<GlobalModel<f64>>,
        sim_round: u64,
    },
    Upload {
        region: usize,
        sim_round: u64,
        update: ClientUpdate<f64>,
        poisoned: bool,
    },
    Deadline(u64),
}

struct FlData {
    dim: usize,
    train: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    eval: LogisticData<f64>,
}

impl FlData {
    /// Standardized window summaries of the bootstrap corpus. Every fourth
    /// window is held out for evaluation.
    fn from_corpus(corpus: &[LabeledWindow], l2: f64) -> Self {
        let rows: Vec<Vec<f64>> = corpus
            .iter()
            .map(|w| WindowFeatures::from_window(&w.window).summary.to_vec())
            .collect();
        let dim = rows.first().map_or(0, Vec::len);
        let std = Standardizer::fit(rows.iter().map(Vec::as_slice), dim);
        let (mut train, mut train_y, mut xs, mut ys) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, (row, w)) in rows.iter().zip(corpus).enumerate() {
            let y = if w.is_attack { 1.0 } else { 0.0 };
            if i % 4 == 3 {
                xs.push(std.transform(row));
                ys.push(y);
            } else {
                train.push(std.transform(row));
                train_y.push(y);
            }
        }
        FlData {
            dim: dim + 1,
            train,
            train_y,
            eval: LogisticData { xs, ys, l2 },
        }
    }

    fn local(&self, seed: u64, vehicle: VehicleId, samples: usize, l2: f64) -> LogisticData<f64> {
        let rng = &mut seed::rng(seed, &[tag::LOCAL_DATA, vehicle.0 as u64]);
        let picks: Vec<usize> = if samples <= self.train.len() {
            index::sample(rng, self.train.len(), samples).into_vec()
        } else {
            (0..samples)
                .map(|_| rng.random_range(0..self.train.len()))
                .collect()
        };
        LogisticData {
            xs: picks.iter().map(|&i| self.train[i].clone()).collect(),
            ys: picks.iter().map(|&i| self.train_y[i]).collect(),
            l2,
        }
    }
}

fn analyze_vehicle(
    cfg: &ScenarioConfig,
    detector: &EdgeDetector,
    campaigns: &[AttackScenario],
    vehicle: VehicleId,
) -> Result<Vec<WindowOutcome>, ScenarioError> {
    let stream = generate_clean_stream(cfg.seed, vehicle, cfg.duration_ms(), &cfg.fleet_profile())?;
    let mut labeled = label_stream(&stream);
    for c in campaigns
        .iter()
        .filter(|c| c.kind.is_sensor() && c.target_vehicles.contains(&vehicle))
    {
        inject_attack_labeled(&mut labeled, vehicle, c, cfg.seed, &cfg.magnitudes)?;
    }
    let windows = make_windows(&labeled, vehicle, cfg.window_len, cfg.window_len)?;
    windows
        .iter()
        .map(|w| {
            let d = detector.detect(&w.window)?;
            let v = &d.verdict;
            let end_ms =
                w.window.window_start_ms + cfg.window_len as i64 * cfg.profile.sample_period_ms;
            Ok(WindowOutcome {
                start_ms: w.window.window_start_ms,
                end_ms,
                actual: w.is_attack,
                kind: w.attack_kind,
                predicted: v.is_anomaly,
                score: v.anomaly_score,
                confidence: v.confidence,
                level: v.threat_level,
                class: d.class.unwrap_or(ThreatClass::Unknown),
                digest: if v.is_anomaly {
                    signature_digest(&d.features.summary, v.threat_level, vehicle, end_ms)
                } else {
                    [0; 32]
                },
                latency_ms: v.inference_time_us as f64 / 1000.0,
            })
        })
        .collect()
}

struct RegionState {
    region: Region,
    model: GlobalModel<f64>,
    accountant: PrivacyAccountant,
    privacy: PrivacyConfig,
    inbox: Vec<(ClientUpdate<f64>, bool)>,
    sim_round: u64,
    aggregated_rounds: u64,
}

#[derive(Default)]
struct Counters {
    reports_delivered: u64,
    tier2_latency_sum: f64,
    escalated: u64,
    logged: u64,
    tier3_latency_sum: f64,
    tier3_count: u64,
    blocks: u64,
    block_time_sum_ms: f64,
    consensus_messages: u64,
    consensus_retries: u64,
    consensus_failures: u64,
    directives: u64,
    updates_received: u64,
    updates_missing: u64,
    alarms: u64,
    jammed_rounds: u64,
    jammed_alarms: u64,
    false_alarms: u64,
    poisoned: u64,
    poisoned_flagged: u64,
    honest_updates: u64,
    honest_flagged: u64,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    outcomes: &'a [Vec<WindowOutcome>],
    campaigns: &'a [AttackScenario],
    region_of: Vec<usize>,
    regions: Vec<RegionState>,
    fl: FlData,
    local_data: Vec<LogisticData<f64>>,
    byzantine: BTreeSet<VehicleId>,
    agg: AggregatorConfig,
    jammed: BTreeSet<(usize, u64)>,
    tracker: CrossRegionalTracker,
    pending: Vec<ThreatEvent>,
    mining: Option<(Block, i64)>,
    chain: Vec<Block>,
    registry: ThreatRegistry,
    validators: Vec<ValidatorState>,
    view: u64,
    faults: FaultConfig,
    link: UniformLink,
    net_rng: SimRng,
    fl_rng: SimRng,
    consensus_rng: SimRng,
    convergence: Vec<ConvergencePoint>,
    horizon_ms: u64,
    round_ms: u64,
    c: Counters,
}

impl Sim<'_> {
    fn channel(&self, tier: Tier) -> &ChannelModel {
        let ch = &self.cfg.channels;
        match tier {
            Tier::EdgeLocal => &ch.edge_local,
            Tier::RegionalV2X => &ch.regional_v2x,
            Tier::GlobalWAN => &ch.global_wan,
        }
    }

    fn send(
        &mut self,
        eng: &mut Engine<Msg>,
        tier: Tier,
        region: usize,
        src: Endpoint,
        dst: Endpoint,
        msg: Msg,
    ) {
        let channel = self.channel(tier).clone();
        let rid = Some(RegionId(region as u32));
        let _: Delivery = eng.deliver(&channel, rid, src, dst, msg, &mut self.net_rng);
    }

    fn handle(&mut self, eng: &mut Engine<Msg>, msg: Msg) -> Result<(), ScenarioError> {
        let now = eng.now_ms();
        match msg {
            Msg::Analyze { vehicle, window } => {
                let o = &self.outcomes[vehicle as usize][window];
                if !o.predicted {
                    return Ok(());
                }
                let region = self.region_of[vehicle as usize];
                let esc = Escalation {
                    signature: ThreatSignature {
                        digest: o.digest,
                        severity: o.score,
                        threat_level: o.level,
                        attack_class: o.class,
                        vehicle_id: VehicleId(vehicle),
                        region_id: RegionId(region as u32),
                        timestamp_ms: now as i64,
                    },
                    confidence: o.confidence,
                };
                let src = Endpoint::Vehicle(VehicleId(vehicle));
                let dst = Endpoint::Coordinator(RegionId(region as u32));
                self.send(
                    eng,
                    Tier::RegionalV2X,
                    region,
                    src,
                    dst,
                    Msg::Report(Box::new(esc)),
                );
            }
            Msg::Report(esc) => {
                self.c.reports_delivered += 1;
                self.c.tier2_latency_sum += now as f64 - esc.signature.timestamp_ms as f64;
                let region = esc.signature.region_id;
                self.send(
                    eng,
                    Tier::GlobalWAN,
                    region.0 as usize,
                    Endpoint::Coordinator(region),
                    Endpoint::Global,
                    Msg::Forward(esc),
                );
            }
            Msg::Forward(esc) => {
                self.c.escalated += 1;
                let t = now as i64;
                let freq = self
                    .tracker
                    .track(&esc.signature, esc.signature.region_id, t);
                let event = ThreatEvent {
                    severity: esc.signature.severity,
                    cross_regional_frequency: freq,
                    consensus_confidence: esc.confidence,
                    observed_at_ms: t,
                    signature: esc.signature,
                };
                if should_log(&event, &self.cfg.filter) {
                    self.c.logged += 1;
                    self.pending.push(event);
                }
            }
            Msg::Flush => {
                self.tracker.evict(now as i64);
                self.start_mining(eng)?;
                let next = now + (self.cfg.validators.flush_interval_s * 1000.0).round() as u64;
                if next <= self.horizon_ms {
                    eng.schedule_at(next, Msg::Flush);
                }
            }
            Msg::BlockCommitted => {
                let (block, started) = self.mining.take().expect("a block is being mined");
                self.c.blocks += 1;
                self.c.block_time_sum_ms += now as f64 - started as f64;
                for tx in &block.transactions {
                    self.c.tier3_latency_sum += now as f64 - tx.signature.timestamp_ms as f64;
                    self.c.tier3_count += 1;
                }
                self.c.directives += registry_apply(&mut self.registry, &block).len() as u64;
                self.chain.push(block);
                self.start_mining(eng)?;
            }
            Msg::RoundStart(r) => self.round_start(eng, r),
            Msg::Broadcast {
                vehicle,
                model,
                sim_round,
            } => self.client_step(eng, vehicle, &model, sim_round)?,
            Msg::Upload {
                region,
                sim_round,
                update,
                poisoned,
            } => {
                let st = &mut self.regions[region];
                if sim_round == st.sim_round {
                    st.inbox.push((update, poisoned));
                }
            }
            Msg::Deadline(r) => self.deadline(r)?,
        }
        Ok(())
    }

    /// Seals the next block from the pending queue and runs consensus on
    /// it. The commit lands after the simulated consensus time.
    fn start_mining(&mut self, eng: &mut Engine<Msg>) -> Result<(), ScenarioError> {
        if self.mining.is_some() || self.pending.is_empty() {
            return Ok(());
        }
        let now = eng.now_ms() as i64;
        let n = self.validators.len() as u64;
        let proposer = NodeId((self.view % n) as u32);
        let block = assemble_block(
            &mut self.pending,
            self.chain.last(),
            proposer,
            now,
            self.cfg.validators.batch_size,
        )?;
        let outcome = pbft_consensus(
            &mut self.validators,
            &block.block_hash,
            self.view,
            block.index,
            &self.faults,
            &mut self.consensus_rng,
            &self.link,
        )?;
        self.c.consensus_messages += outcome.total_messages;
        self.c.consensus_retries += u64::from(outcome.attempts - 1);
        self.view = outcome.round.view;
        let delay = outcome.timing.t_consensus_ms.max(0.0).round() as u64;
        if outcome.round.committed {
            self.mining = Some((block, now));
            eng.schedule_at(eng.now_ms() + delay.max(1), Msg::BlockCommitted);
        } else {
            // Both attempts failed: return the batch and move past both views.
            self.c.consensus_failures += 1;
            self.view += 1;
            let mut back = block.transactions;
            back.append(&mut self.pending);
            self.pending = back;
        }
        Ok(())
    }

    fn round_start(&mut self, eng: &mut Engine<Msg>, r: u64) {
        for region in 0..self.regions.len() {
            let st = &mut self.regions[region];
            st.sim_round = r;
            st.inbox.clear();
            let model = Arc::new(st.model.clone());
            let coord = Endpoint::Coordinator(st.region.region_id);
            let members: Vec<VehicleId> = st.region.vehicle_ids.iter().copied().collect();
            for v in members {
                let msg = Msg::Broadcast {
                    vehicle: v,
                    model: Arc::clone(&model),
                    sim_round: r,
                };
                self.send(
                    eng,
                    Tier::RegionalV2X,
                    region,
                    coord,
                    Endpoint::Vehicle(v),
                    msg,
                );
            }
        }
        let deadline = r * self.round_ms
            + (self.cfg.federated.deadline_fraction * self.round_ms as f64).round() as u64;
        eng.schedule_at(deadline, Msg::Deadline(r));
    }

    fn poisoning(&self, vehicle: VehicleId, at_ms: i64) -> bool {
        self.campaigns
            .iter()
            .any(|c| c.kind == AttackKind::MlPoison && c.covers(vehicle, at_ms))
    }

    fn client_step(
        &mut self,
        eng: &mut Engine<Msg>,
        vehicle: VehicleId,
        model: &GlobalModel<f64>,
        sim_round: u64,
    ) -> Result<(), ScenarioError> {
        let region = self.region_of[vehicle.0 as usize];
        let data = &self.local_data[vehicle.0 as usize];
        let lr = self.cfg.federated.learning_rate;
        let round_start = (sim_round * self.round_ms) as i64;
        let (update, poisoned) = if self.byzantine.contains(&vehicle) {
            let b = self.cfg.federated.byzantine_behavior;
            (
                byzantine_update(&b, vehicle, model, data, lr, &mut self.fl_rng)?,
                false,
            )
        } else if self.poisoning(vehicle, round_start) {
            let flip = ByzantineBehavior {
                kind: ByzantineKind::LabelFlip,
                magnitude: 1.0,
            };
            (
                byzantine_update(&flip, vehicle, model, data, lr, &mut self.fl_rng)?,
                true,
            )
        } else {
            (local_train(vehicle, model, data, lr)?, false)
        };
        let dst = Endpoint::Coordinator(RegionId(region as u32));
        let msg = Msg::Upload {
            region,
            sim_round,
            update,
            poisoned,
        };
        self.send(
            eng,
            Tier::RegionalV2X,
            region,
            Endpoint::Vehicle(vehicle),
            dst,
            msg,
        );
        Ok(())
    }

    fn deadline(&mut self, r: u64) -> Result<(), ScenarioError> {
        let quorum_fraction = self.cfg.federated.quorum_fraction;
        for region in 0..self.regions.len() {
            let jammed = self.jammed.contains(&(region, r));
            let st = &mut self.regions[region];
            let members = st.region.vehicle_ids.len();
            let got = st.inbox.len();
            self.c.updates_received += got as u64;
            self.c.updates_missing += (members - got.min(members)) as u64;
            self.c.jammed_rounds += u64::from(jammed);
            // Missing-update monitor: below quorum the round is abandoned.
            if (got as f64) < quorum_fraction * members as f64 || got == 0 {
                self.c.alarms += 1;
                if jammed {
                    self.c.jammed_alarms += 1;
                } else {
                    self.c.false_alarms += 1;
                }
                continue;
            }
            let updates: Vec<ClientUpdate<f64>> = st.inbox.iter().map(|(u, _)| u.clone()).collect();
            let (next, _) = aggregate_round(
                &st.model,
                &updates,
                &self.agg,
                &st.privacy,
                &mut st.accountant,
                &mut self.fl_rng,
            )?;
            // Poisoning monitor: an update discarded in most coordinates is flagged.
            let trimmed = if updates.len() >= 3 {
                trimmed_fraction(
                    &updates.iter().map(|u| u.delta.clone()).collect::<Vec<_>>(),
                    self.agg.trim_ratio,
                )?
            } else {
                vec![0.0; updates.len()]
            };
            let byz = &self.byzantine;
            for ((u, poisoned), frac) in st.inbox.iter().zip(trimmed) {
                let flagged = frac > 0.5;
                if *poisoned {
                    self.c.poisoned += 1;
                    self.c.poisoned_flagged += u64::from(flagged);
                } else if !byz.contains(&u.vehicle_id) {
                    self.c.honest_updates += 1;
                    self.c.honest_flagged += u64::from(flagged);
                }
            }
            st.model = next;
            st.aggregated_rounds += 1;
        }
        let loss = self
            .regions
            .iter()
            .map(|s| self.fl.eval.loss(&s.model.weights))
            .sum::<f64>()
            / self.regions.len() as f64;
        self.convergence
            .push(ConvergencePoint { round: r + 1, loss });
        Ok(())
    }
}

/// Runs `cfg` end to end and returns the report plus the raw artifacts.
pub fn run_scenario_full(cfg: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    cfg.validate()?;
    let wall = Instant::now();

    // Tier-1 bootstrap: an independent pre-run, trained once per scenario.
    let train_seed = seed::derive(cfg.seed, &[tag::TRAINING]);
    let corpus = build_corpus(train_seed, &cfg.corpus, &cfg.profile, &cfg.magnitudes)?;
    let trained = crate::edge::train_base_scorers(&corpus, train_seed)?;
    let detector = EdgeDetector::from_trained(trained, cfg.detector.clone())?;
    let training_ms = wall.elapsed().as_secs_f64() * 1000.0;

    let campaigns = plan_campaigns(cfg)?;
    let regions = assign_regions(cfg.n_vehicles, cfg.n_regions);
    let mut region_of = vec![0usize; cfg.n_vehicles];
    for (i, r) in regions.iter().enumerate() {
        for v in &r.vehicle_ids {
            region_of[v.0 as usize] = i;
        }
    }

    let outcomes: Vec<Vec<WindowOutcome>> = (0..cfg.n_vehicles)
        .into_par_iter()
        .map(|v| analyze_vehicle(cfg, &detector, &campaigns, VehicleId(v as u32)))
        .collect::<Result<_, _>>()?;

    // Tier 2 setup.
    let f = &cfg.federated;
    let fl = FlData::from_corpus(&corpus, f.l2);
    let local_data: Vec<LogisticData<f64>> = (0..cfg.n_vehicles)
        .map(|v| fl.local(cfg.seed, VehicleId(v as u32), f.local_samples, f.l2))
        .collect();
    let n_byz = (f.byzantine_ratio * cfg.n_vehicles as f64).round() as usize;
    let byzantine: BTreeSet<VehicleId> = index::sample(
        &mut seed::rng(cfg.seed, &[tag::FEDERATED, 0xB7]),
        cfg.n_vehicles,
        n_byz,
    )
    .into_iter()
    .map(|v| VehicleId(v as u32))
    .collect();
    let region_states = regions
        .iter()
        .map(|r| {
            let privacy = PrivacyConfig::for_region(r.vehicle_ids.len(), f.epsilon, f.delta_fail)?;
            Ok(RegionState {
                region: r.clone(),
                model: GlobalModel::zeros(fl.dim),
                accountant: PrivacyAccountant::new(&privacy),
                privacy,
                inbox: Vec::new(),
                sim_round: 0,
                aggregated_rounds: 0,
            })
        })
        .collect::<Result<Vec<_>, FederatedError>>()?;
    let initial_loss = fl.eval.loss(&GlobalModel::zeros(fl.dim).weights);

    // Tier 3 setup.
    let v = &cfg.validators;
    let mut faulty = index::sample(
        &mut seed::rng(cfg.seed, &[tag::CONSENSUS, 0xFA]),
        v.count,
        v.crashed + v.byzantine,
    )
    .into_vec();
    faulty.sort_unstable();
    let validators: Vec<ValidatorState> = (0..v.count)
        .map(|i| {
            let mode = match faulty.iter().position(|&x| x == i) {
                Some(k) if k < v.crashed => FaultMode::Crashed,
                Some(_) => FaultMode::Byzantine,
                None => FaultMode::Honest,
            };
            ValidatorState::new(NodeId(i as u32), mode)
        })
        .collect();
    let wan = &cfg.channels.global_wan;

    let round_ms = (f.round_interval_s * 1000.0).round() as u64;
    let duration_ms = cfg.duration_ms() as u64;
    let horizon_ms = duration_ms + (cfg.drain_s * 1000.0).round() as u64;
    let n_rounds = duration_ms / round_ms;

    let mut eng: Engine<Msg> = Engine::new();
    let mut jammed = BTreeSet::new();
    let mut jam_windows = 0u64;
    for c in campaigns.iter().filter(|c| c.kind == AttackKind::CommJam) {
        let ch = &cfg.channels;
        let added = eng.apply_jam(
            c,
            &[Tier::RegionalV2X],
            regions.as_slice(),
            ch.jam_loss_boost,
            ch.jam_delay_boost_ms,
        )?;
        jam_windows += added.len() as u64;
        for j in &added {
            let region = j.region.expect("jams are regional").0 as usize;
            for r in 0..n_rounds {
                if (j.start_ms..j.end_ms).contains(&(r * round_ms)) {
                    jammed.insert((region, r));
                }
            }
        }
    }

    let mut sim = Sim {
        cfg,
        outcomes: &outcomes,
        campaigns: &campaigns,
        region_of,
        regions: region_states,
        fl,
        local_data,
        byzantine,
        agg: AggregatorConfig {
            trim_ratio: f.trim_ratio,
            learning_rate: f.learning_rate,
            round_interval_s: f.round_interval_s,
            aggregation: f.aggregation,
            weighted: f.weighted,
        },
        jammed,
        tracker: CrossRegionalTracker::new(cfg.filter.frequency_window_ms),
        pending: Vec::new(),
        mining: None,
        chain: Vec::new(),
        registry: ThreatRegistry::default(),
        validators,
        view: 0,
        faults: FaultConfig {
            equivocate: v.equivocate,
            view_change_timeout_ms: v.view_change_timeout_ms,
        },
        link: UniformLink {
            base_ms: wan.base_latency_ms,
            jitter_fraction: wan.jitter_fraction,
            loss_probability: wan.loss_probability,
        },
        net_rng: seed::rng(cfg.seed, &[tag::NETWORK]),
        fl_rng: seed::rng(cfg.seed, &[tag::FEDERATED]),
        consensus_rng: seed::rng(cfg.seed, &[tag::CONSENSUS]),
        convergence: Vec::new(),
        horizon_ms,
        round_ms,
        c: Counters::default(),
    };

    // Windows enter the edge unit in time order, vehicle by vehicle.
    let mut schedule: Vec<(i64, u32, usize)> = outcomes
        .iter()
        .enumerate()
        .flat_map(|(v, ws)| {
            ws.iter()
                .enumerate()
                .map(move |(i, w)| (w.end_ms, v as u32, i))
        })
        .collect();
    schedule.sort_unstable();
    let mut windows_due = schedule.into_iter().peekable();
    for r in 0..n_rounds {
        eng.schedule_at(r * round_ms, Msg::RoundStart(r));
    }
    let flush_ms = (v.flush_interval_s * 1000.0).round() as u64;
    eng.schedule_at(flush_ms, Msg::Flush);

    // Window arrivals are injected lazily so the queue stays small.
    loop {
        let next_window = windows_due.peek().map(|&(t, _, _)| t as u64);
        let limit = next_window.map_or(u64::MAX, |t| t.saturating_sub(1));
        while let Some(ev) = eng.pop_until(limit) {
            sim.handle(&mut eng, ev.payload)?;
        }
        let Some(t) = next_window else { break };
        while let Some(ev) = eng.pop_until(t) {
            sim.handle(&mut eng, ev.payload)?;
        }
        // Nothing is due by `t` any more, so this only advances the clock.
        eng.run_until(t, |_, _| unreachable!("all events due by t were handled"))?;
        while let Some(&(tw, vehicle, window)) = windows_due.peek() {
            if tw as u64 != t {
                break;
            }
            windows_due.next();
            let region = sim.region_of[vehicle as usize];
            let me = Endpoint::Vehicle(VehicleId(vehicle));
            sim.send(
                &mut eng,
                Tier::EdgeLocal,
                region,
                me,
                me,
                Msg::Analyze { vehicle, window },
            );
        }
    }
    // Final flush: mine whatever is still queued.
    let mut guard = 0;
    while (sim.mining.is_some() || !sim.pending.is_empty()) && guard < 100 {
        if sim.mining.is_none() {
            let failures = sim.c.consensus_failures;
            sim.start_mining(&mut eng)?;
            if sim.c.consensus_failures > failures && sim.mining.is_none() {
                guard += 1;
            }
        }
        while let Some(ev) = eng.pop_until(u64::MAX) {
            sim.handle(&mut eng, ev.payload)?;
        }
    }

    let report = build_report(
        cfg,
        &sim,
        &outcomes,
        &campaigns,
        initial_loss,
        jam_windows,
        &eng,
        n_byz,
    );
    let latencies: Vec<f64> = outcomes.iter().flatten().map(|o| o.latency_ms).collect();
    let mut wall_clock = WallClock::from_latencies(&latencies, cfg.tau_max_ms);
    wall_clock.training_ms = training_ms;
    wall_clock.total_ms = wall.elapsed().as_secs_f64() * 1000.0;
    let verdicts = outcomes
        .iter()
        .enumerate()
        .flat_map(|(v, ws)| {
            ws.iter().map(move |o| VerdictRecord {
                vehicle_id: v as u32,
                window_start_ms: o.start_ms,
                actual: o.actual,
                predicted: o.predicted,
                attack_kind: o.kind,
                anomaly_score: o.score,
                confidence: o.confidence,
            })
        })
        .collect();
    Ok(ScenarioRun {
        report,
        wall_clock,
        verdicts,
        ledger: sim.chain,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    cfg: &ScenarioConfig,
    sim: &Sim<'_>,
    outcomes: &[Vec<WindowOutcome>],
    campaigns: &[AttackScenario],
    initial_loss: f64,
    jam_windows: u64,
    eng: &Engine<Msg>,
    n_byz: usize,
) -> MetricsReport {
    let c = &sim.c;
    let mut confusion = Confusion::default();
    let mut per_kind: BTreeMap<AttackKind, (u64, u64)> = BTreeMap::new();
    for o in outcomes.iter().flatten() {
        confusion.record(o.actual, o.predicted);
        if let (true, Some(k)) = (o.actual, o.kind) {
            let e = per_kind.entry(k).or_default();
            e.0 += 1;
            e.1 += u64::from(o.predicted);
        }
    }
    let mut rates: BTreeMap<String, f64> = per_kind
        .iter()
        .map(|(k, &(n, hit))| (k.name().to_string(), ratio(hit, n)))
        .collect();
    if c.jammed_rounds > 0 {
        rates.insert(
            AttackKind::CommJam.name().into(),
            ratio(c.jammed_alarms, c.jammed_rounds),
        );
    }
    if c.poisoned > 0 {
        rates.insert(
            AttackKind::MlPoison.name().into(),
            ratio(c.poisoned_flagged, c.poisoned),
        );
    }

    let detection = DetectionMetrics::from_confusion(&confusion, cfg.alpha_min);
    let mut notes = Vec::new();
    if confusion.tp + confusion.fp == 0 {
        notes.push("no window was flagged: precision is undefined and reported as 1.0".to_string());
    }
    if confusion.tp + confusion.fn_ == 0 {
        notes.push("no attacked windows: recall is vacuously 1.0".to_string());
    }
    if detection.alpha_min_violated {
        notes.push(format!(
            "accuracy {} is below alpha_min {}",
            detection.accuracy, cfg.alpha_min
        ));
    }
    if c.false_alarms > 0 {
        notes.push(format!(
            "missing-update monitor fired {} times outside jam windows",
            c.false_alarms
        ));
    }
    if c.honest_updates > 0 {
        notes.push(format!(
            "poisoning monitor flagged {} of {} honest updates",
            c.honest_flagged, c.honest_updates
        ));
    }
    if !sim.pending.is_empty() {
        notes.push(format!(
            "{} logged events could not be committed",
            sim.pending.len()
        ));
    }

    let total_events = confusion.total();
    let net = eng.total_counters();
    let basic = sim
        .regions
        .iter()
        .map(|r| r.accountant.basic())
        .fold(0.0, f64::max);
    let advanced = sim
        .regions
        .iter()
        .map(|r| r.accountant.advanced())
        .fold(0.0, f64::max);
    let final_loss = sim.convergence.last().map_or(initial_loss, |p| p.loss);

    MetricsReport {
        scenario: ScenarioInfo {
            seed: cfg.seed,
            n_vehicles: cfg.n_vehicles,
            n_regions: cfg.n_regions,
            duration_s: cfg.duration_s,
            campaigns: campaigns.len(),
            byzantine_clients: n_byz,
            crashed_validators: cfg.validators.crashed,
        },
        detection,
        per_attack_detection_rate: rates,
        federated: FederatedMetrics {
            rounds: sim.convergence.len() as u64,
            rounds_to_converge: rounds_to_converge(&sim.convergence),
            final_loss,
            initial_loss,
            updates_received: c.updates_received,
            updates_missing: c.updates_missing,
            missing_update_alarms: c.alarms,
            poisoned_updates: c.poisoned,
            poisoned_flagged: c.poisoned_flagged,
            privacy_budget_basic: basic,
            privacy_budget_advanced: advanced,
        },
        fl_convergence: sim.convergence.clone(),
        chain: ChainMetrics {
            total_events,
            escalated_events: c.escalated,
            logged_events: c.logged,
            logged_fraction: ratio(c.logged, total_events),
            blocks_mined: c.blocks,
            ledger_valid: verify_chain(&sim.chain),
            mean_block_time_s: if c.blocks == 0 {
                0.0
            } else {
                c.block_time_sum_ms / c.blocks as f64 / 1000.0
            },
            consensus_messages: c.consensus_messages,
            consensus_retries: c.consensus_retries,
            consensus_failures: c.consensus_failures,
            directives_issued: c.directives,
            throughput_threats_per_s_per_region: c.reports_delivered as f64
                / cfg.duration_s
                / cfg.n_regions as f64,
        },
        network: NetworkMetrics {
            messages_sent: net.sent,
            messages_delivered: net.delivered,
            drop_count: net.dropped,
            jam_windows,
            tier2_latency_mean_ms: if c.reports_delivered == 0 {
                0.0
            } else {
                c.tier2_latency_sum / c.reports_delivered as f64
            },
            tier3_latency_mean_ms: if c.tier3_count == 0 {
                0.0
            } else {
                c.tier3_latency_sum / c.tier3_count as f64
            },
        },
        notes,
    }
}
