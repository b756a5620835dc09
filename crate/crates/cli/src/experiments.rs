//! Experiment runners behind the subcommands.
//!
//! Every runner computes its results first and writes them afterwards, so
//! tests can use the numbers without touching the file system. Work fans out
//! over seeds and grid points with rayon; results are collected in input
//! order, which keeps every artifact byte-identical for a given config.

use rayon::prelude::*;
use serde::Serialize;
use statrs::statistics::{Data, Median, OrderStatistics};

use relaynet::deepopt::{self, StageSnapshot, TrainOutcome};
use relaynet::linopt::{self, LinearSolution};
use relaynet::model::{RelayParams, Topology, Transfer};
use relaynet::modem::{BerReport, ReceiverKind};
use relaynet::netgen::{self, Placement, SpatialConfig};
use relaynet::sim::simulate_ber;
use relaynet::Error;

use crate::config::{ExperimentConfig, NetworkConfig};
use crate::error::{CliError, Result};
use crate::output::{self, OutputDir, SweepRow};

/// One network realization.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub topology: Topology,
    pub placement: Option<Placement>,
    /// Layer of every relay, in placement order (spatial networks only).
    pub layer_of: Vec<usize>,
    /// Direct-link network without relays.
    pub reference: Option<Topology>,
}

fn spatial_instance(config: &SpatialConfig, reference: bool) -> Result<Instance> {
    let (placement, net) = netgen::generate(config)?;
    let reference = if reference {
        let seed = netgen::fading_seed(config.seed).wrapping_add(1);
        Some(netgen::reference_topology(&placement, config, seed)?)
    } else {
        None
    };
    Ok(Instance {
        seed: config.seed,
        topology: net.topology,
        placement: Some(placement),
        layer_of: net.layer_of,
        reference,
    })
}

pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    match &cfg.network {
        NetworkConfig::Fixture(f) => Ok(Instance {
            seed,
            topology: netgen::fixture(*f),
            placement: None,
            layer_of: Vec::new(),
            reference: None,
        }),
        NetworkConfig::Spatial(s) => {
            let mut s = s.clone();
            s.seed = seed;
            spatial_instance(&s, cfg.reference)
        }
    }
}

/// Receiver scales that undo the direct-link gain of a reference network.
pub fn reference_params(topology: &Topology) -> Result<RelayParams> {
    let direct = topology
        .direct_gains
        .as_ref()
        .ok_or_else(|| CliError::Config("not a direct-link network".into()))?;
    let mut p = RelayParams::zeros(topology);
    for (scale, &g) in p.rx_scale.iter_mut().zip(direct) {
        if g == 0.0 {
            return Err(Error::InvalidInput("zero direct-link gain".into()).into());
        }
        *scale = 1.0 / g;
    }
    Ok(p)
}

/// Seed of the evaluation noise at grid point `index`. Both optimizers share
/// it, so their BER curves are compared on the same noise.
pub fn eval_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(index as u64 + 1)
}

fn evaluate(
    cfg: &ExperimentConfig,
    topology: &Topology,
    params: &RelayParams,
    kind: ReceiverKind,
    sigma2: f64,
    seed: u64,
) -> Result<BerReport> {
    Ok(simulate_ber(
        topology,
        params,
        &cfg.modulation,
        kind,
        sigma2,
        Transfer::Tanh,
        seed,
        &cfg.sim,
    )?)
}

/// Linear design at one grid point.
#[derive(Clone, Debug, Serialize)]
pub struct LinearPoint {
    pub snr_db: f64,
    pub sigma2: f64,
    pub status: String,
    pub solution: Option<LinearSolutionSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearSolutionSummary {
    pub params: RelayParams,
    pub snr: Vec<f64>,
    pub user_ber: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: f64,
    pub powers: Vec<f64>,
    pub max_rank_ratio: f64,
    #[serde(skip)]
    pub log: Vec<linopt::SweepRecord>,
}

impl From<LinearSolution> for LinearSolutionSummary {
    fn from(s: LinearSolution) -> Self {
        Self {
            params: s.params,
            snr: s.snr,
            user_ber: s.user_ber,
            zeta: s.zeta,
            eta: s.eta,
            powers: s.powers,
            max_rank_ratio: s.max_rank_ratio,
            log: s.log,
        }
    }
}

/// Solves the linear design at one noise level; an infeasible power budget
/// yields a flagged point instead of an error.
pub fn linear_point(cfg: &ExperimentConfig, topology: &Topology, seed: u64, snr_db: f64) -> Result<LinearPoint> {
    let sigma2 = cfg.sigma2(snr_db);
    match linopt::optimize(topology, &cfg.modulation, sigma2, &cfg.linear_config(seed)) {
        Ok(sol) => Ok(LinearPoint {
            snr_db,
            sigma2,
            status: "ok".into(),
            solution: Some(sol.into()),
        }),
        Err(Error::Infeasible(msg)) => {
            log::warn!("linear design infeasible at {snr_db} dB: {msg}");
            Ok(LinearPoint {
                snr_db,
                sigma2,
                status: "infeasible".into(),
                solution: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn linear_points(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vec<LinearPoint>> {
    cfg.snr_db
        .par_iter()
        .map(|&db| linear_point(cfg, &inst.topology, inst.seed, db))
        .collect()
}

/// Trains the relays for the whole grid: from the curriculum start down to
/// the noisiest grid point.
pub fn train_dr(
    cfg: &ExperimentConfig,
    topology: &Topology,
    kind: ReceiverKind,
    seed: u64,
    target_sigma2: f64,
    start_sigma2: f64,
) -> Result<TrainOutcome> {
    let mut tc = cfg.train_config();
    tc.sigma2_start = tc.sigma2_start.or(Some(start_sigma2));
    Ok(deepopt::train(topology, &cfg.modulation, target_sigma2, &tc, kind, seed)?)
}

#[derive(Clone, Debug)]
pub struct DrRun {
    pub seed: u64,
    pub kind: ReceiverKind,
    pub outcome: TrainOutcome,
}

pub fn dr_runs(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vec<DrRun>> {
    cfg.receivers
        .par_iter()
        .map(|&kind| {
            let outcome = train_dr(cfg, &inst.topology, kind, inst.seed, cfg.sigma2_max(), cfg.sigma2_start())?;
            log::info!(
                "seed {} {kind}: {} stages, stopped by {:?}",
                inst.seed,
                outcome.snapshots.len(),
                outcome.stop
            );
            Ok(DrRun {
                seed: inst.seed,
                kind,
                outcome,
            })
        })
        .collect()
}

/// Everything one seed of a sweep produced.
#[derive(Clone, Debug)]
pub struct SeedSweep {
    pub instance: Instance,
    pub linear: Vec<LinearPoint>,
    pub dr: Vec<DrRun>,
    pub rows: Vec<SweepRow>,
}

struct EvalJob<'a> {
    optimizer: &'static str,
    kind: ReceiverKind,
    idx: usize,
    topology: &'a Topology,
    params: Option<RelayParams>,
    status: String,
}

fn sweep_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedSweep> {
    let inst = build_instance(cfg, seed)?;
    let linear = if cfg.optimizer.linear() {
        linear_points(cfg, &inst)?
    } else {
        Vec::new()
    };
    let dr = if cfg.optimizer.dr() {
        dr_runs(cfg, &inst)?
    } else {
        Vec::new()
    };

    let mut jobs = Vec::new();
    for (idx, p) in linear.iter().enumerate() {
        jobs.push(EvalJob {
            optimizer: "linear",
            kind: ReceiverKind::Standard,
            idx,
            topology: &inst.topology,
            params: p.solution.as_ref().map(|s| s.params.clone()),
            status: p.status.clone(),
        });
    }
    for run in &dr {
        for (idx, &db) in cfg.snr_db.iter().enumerate() {
            jobs.push(EvalJob {
                optimizer: "dr",
                kind: run.kind,
                idx,
                topology: &inst.topology,
                params: Some(run.outcome.params_with(cfg.snapshot, cfg.sigma2(db)).clone()),
                status: "ok".into(),
            });
        }
    }
    if let Some(reference) = &inst.reference {
        let params = reference_params(reference)?;
        for idx in 0..cfg.snr_db.len() {
            jobs.push(EvalJob {
                optimizer: "reference",
                kind: ReceiverKind::Standard,
                idx,
                topology: reference,
                params: Some(params.clone()),
                status: "ok".into(),
            });
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|job| {
            let snr_db = cfg.snr_db[job.idx];
            let sigma2 = cfg.sigma2(snr_db);
            let report = match &job.params {
                Some(p) => Some(evaluate(cfg, job.topology, p, job.kind, sigma2, eval_seed(seed, job.idx))?),
                None => None,
            };
            Ok(SweepRow {
                seed,
                optimizer: job.optimizer.into(),
                receiver: job.kind.to_string(),
                snr_db,
                sigma2,
                report,
                status: job.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedSweep {
        instance: inst,
        linear,
        dr,
        rows,
    })
}

/// BER sweep over the grid for every seed.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SeedSweep>> {
    cfg.seeds.par_iter().map(|&s| sweep_seed(cfg, s)).collect()
}

fn write_instance(out: &OutputDir, inst: &Instance) -> Result<()> {
    let s = inst.seed;
    out.json(&format!("topology_seed{s}.json"), &inst.topology)?;
    if let Some(p) = &inst.placement {
        output::write_placement(out, &format!("placement_seed{s}.csv"), p, &inst.layer_of)?;
    }
    if let Some(r) = &inst.reference {
        out.json(&format!("reference_seed{s}.json"), r)?;
    }
    Ok(())
}

fn write_linear(out: &OutputDir, seed: u64, points: &[LinearPoint]) -> Result<()> {
    out.json(&format!("linear_seed{seed}.json"), &points)?;
    let log: Vec<_> = points
        .iter()
        .flat_map(|p| {
            p.solution
                .iter()
                .flat_map(move |s| s.log.iter().map(move |r| (p.snr_db, r.clone())))
        })
        .collect();
    output::write_linear_log(out, &format!("linear_log_seed{seed}.csv"), &log)
}

fn write_dr(out: &OutputDir, run: &DrRun) -> Result<()> {
    let tag = format!("seed{}_{}", run.seed, run.kind);
    output::write_train_log(out, &format!("train_{tag}.csv"), &run.outcome.state.history)?;
    let snapshots: &[StageSnapshot] = &run.outcome.snapshots;
    out.json(&format!("snapshots_{tag}.json"), &snapshots)?;
    out.json(&format!("params_{tag}.json"), &run.outcome.state.params)
}

pub fn write_sweep(cfg: &ExperimentConfig, results: &[SeedSweep], out: &OutputDir) -> Result<()> {
    for r in results {
        write_instance(out, &r.instance)?;
        if cfg.optimizer.linear() {
            write_linear(out, r.instance.seed, &r.linear)?;
        }
        for run in &r.dr {
            write_dr(out, run)?;
        }
    }
    for name in ["linear", "dr", "reference"] {
        let rows: Vec<SweepRow> = results
            .iter()
            .flat_map(|r| r.rows.iter().filter(|row| row.optimizer == name).cloned())
            .collect();
        let present = match name {
            "linear" => cfg.optimizer.linear(),
            "dr" => cfg.optimizer.dr(),
            _ => cfg.reference,
        };
        if present {
            output::write_sweep(out, &format!("sweep_{name}.csv"), &cfg.modulation, &rows)?;
        }
    }
    Ok(())
}

/// Writes topologies (and placements) of every seed.
pub fn generate(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<Instance>> {
    let instances: Vec<Instance> = cfg
        .seeds
        .par_iter()
        .map(|&s| build_instance(cfg, s))
        .collect::<Result<_>>()?;
    for inst in &instances {
        write_instance(out, inst)?;
    }
    Ok(instances)
}

/// Linear design at every grid point. Fails with the infeasibility error
/// (after writing what was solved) if any point had no feasible design.
pub fn optimize_linear(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<Vec<LinearPoint>>> {
    let all: Vec<(Instance, Vec<LinearPoint>)> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let inst = build_instance(cfg, s)?;
            let pts = linear_points(cfg, &inst)?;
            Ok((inst, pts))
        })
        .collect::<Result<_>>()?;
    for (inst, pts) in &all {
        write_instance(out, inst)?;
        write_linear(out, inst.seed, pts)?;
    }
    let bad: Vec<String> = all
        .iter()
        .flat_map(|(inst, pts)| {
            pts.iter()
                .filter(|p| p.solution.is_none())
                .map(move |p| format!("seed {} at {} dB", inst.seed, p.snr_db))
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Infeasible(format!("no feasible linear design for {}", bad.join(", "))).into());
    }
    Ok(all.into_iter().map(|(_, p)| p).collect())
}

pub fn optimize_dr(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<DrRun>> {
    let all: Vec<(Instance, Vec<DrRun>)> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let inst = build_instance(cfg, s)?;
            let runs = dr_runs(cfg, &inst)?;
            Ok((inst, runs))
        })
        .collect::<Result<_>>()?;
    let mut runs = Vec::new();
    for (inst, rs) in all {
        write_instance(out, &inst)?;
        for r in &rs {
            write_dr(out, r)?;
        }
        runs.extend(rs);
    }
    Ok(runs)
}

/// BER of one optimizer on one realization of the median study.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianRecord {
    pub relays: usize,
    pub seed: u64,
    pub optimizer: String,
    pub ber: f64,
    pub errors: u64,
    pub trials: u64,
    pub status: String,
}

impl MedianRecord {
    /// BER floored at one error, so error-free runs stay comparable on a
    /// log scale.
    pub fn floored_ber(&self) -> f64 {
        self.ber.max(1.0 / self.trials.max(1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quartiles {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut data = Data::new(values.to_vec());
    Some(Quartiles {
        median: data.median(),
        q25: data.lower_quartile(),
        q75: data.upper_quartile(),
        count: values.len(),
    })
}

#[derive(Clone, Debug)]
pub struct MedianStudy {
    pub records: Vec<MedianRecord>,
    /// `(relays, optimizer, quartiles of BER)`.
    pub summary: Vec<(usize, String, Quartiles)>,
    /// `(relays, quartiles of log10(linear BER / DR BER))`.
    pub gain: Vec<(usize, Quartiles)>,
}

fn median_realization(cfg: &ExperimentConfig, base: &SpatialConfig, relays: usize, seed: u64, snr_db: f64) -> Result<Vec<MedianRecord>> {
    let mut sc = base.clone();
    sc.relays = relays;
    sc.seed = seed;
    let inst = spatial_instance(&sc, false)?;
    let sigma2 = sc.sigma2_for_cell_edge_snr(snr_db);
    let noise_seed = eval_seed(seed, relays);
    let record = |optimizer: &str, rep: Option<BerReport>, status: &str| {
        let (ber, errors, trials) = rep.map_or((f64::NAN, 0, 0), |r| (r.worst.rate, r.worst.errors, r.worst.trials));
        MedianRecord {
            relays,
            seed,
            optimizer: optimizer.into(),
            ber,
            errors,
            trials,
            status: status.into(),
        }
    };
    let mut out = Vec::new();
    if cfg.optimizer.linear() {
        let p = linear_point(cfg, &inst.topology, seed, snr_db)?;
        let rep = match &p.solution {
            Some(s) => Some(evaluate(cfg, &inst.topology, &s.params, ReceiverKind::Standard, sigma2, noise_seed)?),
            None => None,
        };
        out.push(record("linear", rep, &p.status));
    }
    if cfg.optimizer.dr() {
        let kind = cfg.receivers[0];
        let start = sc.sigma2_for_cell_edge_snr(snr_db + cfg.curriculum_margin_db);
        let outcome = train_dr(cfg, &inst.topology, kind, seed, sigma2, start)?;
        let params = outcome.params_with(cfg.snapshot, sigma2);
        let rep = evaluate(cfg, &inst.topology, params, kind, sigma2, noise_seed)?;
        out.push(record("dr", Some(rep), "ok"));
    }
    Ok(out)
}

/// Median BER over network realizations for each relay count.
pub fn median_study(cfg: &ExperimentConfig) -> Result<MedianStudy> {
    let (base, study) = match (&cfg.network, &cfg.median) {
        (NetworkConfig::Spatial(s), Some(m)) => (s, m),
        _ => return Err(CliError::Config("median study needs a spatial network and a [median] table".into())),
    };
    let jobs: Vec<(usize, u64)> = study
        .relay_counts
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let records: Vec<MedianRecord> = jobs
        .par_iter()
        .map(|&(n, s)| median_realization(cfg, base, n, s, study.snr_db))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut summary = Vec::new();
    let mut gain = Vec::new();
    for &n in &study.relay_counts {
        for opt in ["linear", "dr"] {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.relays == n && r.optimizer == opt && r.status == "ok")
                .map(|r| r.ber)
                .collect();
            if let Some(q) = quartiles(&v) {
                summary.push((n, opt.to_string(), q));
            }
        }
        let g: Vec<f64> = cfg
            .seeds
            .iter()
            .filter_map(|&s| {
                let find = |opt: &str| {
                    records
                        .iter()
                        .find(|r| r.relays == n && r.seed == s && r.optimizer == opt && r.status == "ok")
                };
                Some(find("linear")?.floored_ber().log10() - find("dr")?.floored_ber().log10())
            })
            .collect();
        if let Some(q) = quartiles(&g) {
            gain.push((n, q));
        }
    }
    Ok(MedianStudy {
        records,
        summary,
        gain,
    })
}

pub fn write_median_study(study: &MedianStudy, out: &OutputDir) -> Result<()> {
    let mut w = out.csv("median_raw.csv")?;
    w.write_record(["relays", "seed", "optimizer", "ber_worst", "errors", "symbols", "status"])?;
    for r in &study.records {
        w.write_record([
            r.relays.to_string(),
            r.seed.to_string(),
            r.optimizer.clone(),
            output::num(r.ber),
            r.errors.to_string(),
            r.trials.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    let mut w = out.csv("median_summary.csv")?;
    w.write_record(["relays", "optimizer", "median", "q25", "q75", "count"])?;
    for (n, opt, q) in &study.summary {
        w.write_record([
            n.to_string(),
            opt.clone(),
            output::num(q.median),
            output::num(q.q25),
            output::num(q.q75),
            q.count.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = out.csv("median_gain.csv")?;
    w.write_record(["relays", "median_log10_gain", "q25", "q75", "count"])?;
    for (n, q) in &study.gain {
        w.write_record([
            n.to_string(),
            output::num(q.median),
            output::num(q.q25),
            output::num(q.q75),
            q.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Noiseless transfer functions of the optimized networks.
#[derive(Clone, Debug)]
pub struct TransferCurve {
    pub seed: u64,
    /// `linear` or `dr_<receiver>`.
    pub label: String,
    pub grid: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub params: RelayParams,
}

pub fn transfer(cfg: &ExperimentConfig) -> Result<Vec<TransferCurve>> {
    let snr_db = cfg.transfer.as_ref().map_or(cfg.snr_db[0], |t| t.snr_db);
    let sigma2 = cfg.sigma2(snr_db);
    let grid = deepopt::default_grid();
    let per_seed: Vec<Vec<TransferCurve>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = build_instance(cfg, seed)?;
            let mut curves = Vec::new();
            if cfg.optimizer.linear() {
                let p = linear_point(cfg, &inst.topology, seed, snr_db)?;
                let sol = p
                    .solution
                    .ok_or_else(|| Error::Infeasible(format!("no feasible linear design at {snr_db} dB")))?;
                curves.push(TransferCurve {
                    seed,
                    label: "linear".into(),
                    rows: deepopt::transfer_function(&inst.topology, &sol.params, &cfg.modulation, &grid)?,
                    grid: grid.clone(),
                    params: sol.params,
                });
            }
            if cfg.optimizer.dr() {
                for &kind in &cfg.receivers {
                    let outcome = train_dr(cfg, &inst.topology, kind, seed, sigma2, cfg.sigma2(snr_db + cfg.curriculum_margin_db))?;
                    let params = outcome.params_with(cfg.snapshot, sigma2);
                    curves.push(TransferCurve {
                        seed,
                        label: format!("dr_{kind}"),
                        rows: deepopt::transfer_function(&inst.topology, params, &cfg.modulation, &grid)?,
                        grid: grid.clone(),
                        params: params.clone(),
                    });
                }
            }
            Ok(curves)
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn write_transfer(curves: &[TransferCurve], out: &OutputDir) -> Result<()> {
    for c in curves {
        output::write_transfer(out, &format!("transfer_{}_seed{}.csv", c.label, c.seed), &c.grid, &c.rows)?;
    }
    Ok(())
}
