//! Monte Carlo experiments. Every experiment draws one realization per
//! trial, evaluates all sweep points on it, and emits one CSV row per
//! (trial, sweep point[, user]) followed by summary rows.

use std::path::Path;

use rand::Rng;

use super::config::{Experiment, ExperimentSpec};
use super::exec::{map_trials, trial_rng};
use crate::beamform::{tr_beams, zf_select, zf_select_links, BeamformerSet};
use crate::channel::{
    db_to_linear, dbm_to_watts, draw_channel_set, linear_to_db, perturb_cir, place_nodes, ChannelSet,
    ErrorMode, Links, ProfileCatalog, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::power::{
    build_femto_lp, cross_report, solve_centralized, solve_femto, solve_macro, solve_proposed, StepSchedule,
    SINR_SLACK,
};
use crate::robust::{
    assemble_bounds, column, proposed_upper, sample_true_channel, solve_robust, worst_case_oracle,
    worst_signal_lower, young_upper, BoundKind,
};
use crate::sinr::{mu_breakdown, tier_gains, PowerVector};

/// CSV content: header plus rows of already-formatted fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Counts gathered while running an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub rows: usize,
    /// Design evaluations that produced a feasible allocation.
    pub feasible: usize,
    /// Design evaluations attempted.
    pub attempted: usize,
    /// Evaluations that failed for numerical reasons.
    pub numerical_failures: usize,
}

impl RunStats {
    pub fn infeasible_everywhere(&self) -> bool {
        self.attempted > 0 && self.feasible == 0
    }
}

/// Result of one solver call inside a trial.
#[derive(Debug, Clone, PartialEq)]
enum Outcome<T> {
    Done(T),
    Infeasible,
    Failed,
}

impl<T> Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Done(v),
            Err(e) if e.is_infeasible() => Outcome::Infeasible,
            Err(e) => {
                log::warn!("trial evaluation failed: {e}");
                Outcome::Failed
            }
        }
    }

    fn value(&self) -> Option<&T> {
        match self {
            Outcome::Done(v) => Some(v),
            _ => None,
        }
    }

    fn flag(&self) -> String {
        match self {
            Outcome::Done(_) => "1".into(),
            Outcome::Infeasible => "0".into(),
            Outcome::Failed => "err".into(),
        }
    }
}

fn tally<T>(stats: &mut RunStats, o: &Outcome<T>, feasible: bool) {
    stats.attempted += 1;
    match o {
        Outcome::Done(_) if feasible => stats.feasible += 1,
        Outcome::Failed => stats.numerical_failures += 1,
        _ => {}
    }
}

/// Shortest round-trip float text; non-finite values become `NA`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "NA".into()
    }
}

fn param(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn median(v: &[f64]) -> Option<f64> {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return None;
    }
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

fn rate(hits: usize, total: usize) -> String {
    if total == 0 {
        "NA".into()
    } else {
        num(hits as f64 / total as f64)
    }
}

fn realize<R: Rng + ?Sized>(cfg: &ScenarioConfig, catalog: &ProfileCatalog, rng: &mut R) -> Result<ChannelSet> {
    let geometry = place_nodes(cfg, rng);
    draw_channel_set(cfg, catalog, &geometry, rng)
}

fn schedule(cfg: &ScenarioConfig) -> StepSchedule {
    StepSchedule {
        a: cfg.power.step_a,
        b: cfg.power.step_b,
        max_iter: cfg.power.max_iter,
    }
}

/// Replaces every femto link by an estimate within error factor `psi`.
fn estimate_links<R: Rng + ?Sized>(links: &Links, psi: f64, rng: &mut R) -> Result<Links> {
    links
        .iter()
        .map(|row| {
            row.iter()
                .map(|h| perturb_cir(h, psi, ErrorMode::UniformBall, rng).map(|(est, _)| est))
                .collect()
        })
        .collect()
}

/// Runs `spec` and writes its CSV.
pub fn run_experiment(spec: &ExperimentSpec, config: &ScenarioConfig) -> Result<RunStats> {
    let (table, stats) = build_table(spec, config)?;
    table.write(&spec.output_path)?;
    Ok(stats)
}

/// Runs `spec` in memory.
pub fn build_table(spec: &ExperimentSpec, config: &ScenarioConfig) -> Result<(Table, RunStats)> {
    config.validate()?;
    let catalog = config.catalog()?;
    let (table, mut stats) = match spec.experiment {
        Experiment::PowerCompare => power_compare(spec, config, &catalog),
        Experiment::MuOutage => mu_outage(spec, config, &catalog),
        Experiment::TrVsZf => tr_vs_zf(spec, config, &catalog),
        Experiment::BoundTightness => bound_tightness(spec, config, &catalog),
        Experiment::FuOutage => fu_outage(spec, config, &catalog),
        Experiment::RobustPower => robust_power(spec, config, &catalog),
    }?;
    stats.rows = table.rows.len();
    Ok((table, stats))
}

struct CompareRecord {
    centralized: Outcome<f64>,
    proposed: Outcome<(f64, usize)>,
}

fn power_compare(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let grid = spec.grid();
    let (n0, n1) = (cfg.network.macro_users, cfg.network.femto_users);
    let (p_tol, noise, sched) = (cfg.p_tol(), cfg.noise(), schedule(cfg));
    let trials = map_trials(spec.trials, |t| -> Vec<CompareRecord> {
        let mut rng = trial_rng(spec.seed, t);
        let ch = match realize(cfg, cat, &mut rng) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("trial {t}: {e}");
                return grid
                    .iter()
                    .map(|_| CompareRecord {
                        centralized: Outcome::Failed,
                        proposed: Outcome::Failed,
                    })
                    .collect();
            }
        };
        let beams = BeamformerSet::build(&ch);
        grid.iter()
            .map(|pt| {
                let gm = vec![db_to_linear(pt[0]); n0];
                let gf = vec![db_to_linear(pt[1]); n1];
                let centralized = Outcome::from(beams.as_ref().map_err(clone_err).and_then(|b| {
                    let r = solve_centralized(&ch, b, &gm, &gf, noise)?;
                    feasible_total(r.feasible, r.total_power)
                }));
                let proposed = Outcome::from(solve_proposed(&ch, &gm, &gf, p_tol, noise, &sched).and_then(|r| {
                    feasible_total(r.feasible, r.total_power).map(|p| (p, r.iterations))
                }));
                CompareRecord { centralized, proposed }
            })
            .collect()
    });

    let mut table = Table::new(&[
        "kind",
        "trial",
        "gamma_m_db",
        "gamma_f_db",
        "centralized_feasible",
        "proposed_feasible",
        "centralized_w",
        "proposed_w",
        "gap_db",
        "macro_iterations",
    ]);
    let mut stats = RunStats::default();
    for (t, recs) in trials.iter().enumerate() {
        for (pt, r) in grid.iter().zip(recs) {
            tally(&mut stats, &r.centralized, true);
            tally(&mut stats, &r.proposed, true);
            let c = r.centralized.value().copied();
            let p = r.proposed.value().map(|v| v.0);
            let gap = c.zip(p).map(|(c, p)| linear_to_db(p / c));
            table.push(vec![
                "trial".into(),
                t.to_string(),
                param(pt[0]),
                param(pt[1]),
                r.centralized.flag(),
                r.proposed.flag(),
                opt(c),
                opt(p),
                opt(gap),
                r.proposed.value().map_or("NA".into(), |v| v.1.to_string()),
            ]);
        }
    }
    for (k, pt) in grid.iter().enumerate() {
        let mut cs = Vec::new();
        let mut ps = Vec::new();
        let (mut c_ok, mut p_ok) = (0, 0);
        for recs in &trials {
            let r = &recs[k];
            let c = r.centralized.value().copied();
            let p = r.proposed.value().map(|v| v.0);
            c_ok += c.is_some() as usize;
            p_ok += p.is_some() as usize;
            if let (Some(c), Some(p)) = (c, p) {
                cs.push(c);
                ps.push(p);
            }
        }
        let (mc, mp) = (mean(&cs), mean(&ps));
        table.push(vec![
            "summary".into(),
            cs.len().to_string(),
            param(pt[0]),
            param(pt[1]),
            rate(c_ok, trials.len()),
            rate(p_ok, trials.len()),
            opt(mc),
            opt(mp),
            opt(mc.zip(mp).map(|(c, p)| linear_to_db(p / c))),
            "NA".into(),
        ]);
    }
    Ok((table, stats))
}

fn clone_err(e: &Error) -> Error {
    if let Error::Infeasible { stage, reason } = e {
        Error::Infeasible {
            stage: *stage,
            reason: reason.clone(),
        }
    } else {
        Error::Numerical(e.to_string())
    }
}

fn feasible_total(feasible: bool, total: f64) -> Result<f64> {
    if feasible {
        Ok(total)
    } else {
        Err(Error::infeasible(
            crate::error::Stage::Centralized,
            "achieved SINR below target",
        ))
    }
}

struct MuRecord {
    sinr: Outcome<Vec<f64>>,
}

fn mu_outage(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let grid = spec.grid();
    let (n0, n1) = (cfg.network.macro_users, cfg.network.femto_users);
    let (p_tol, noise, sched) = (cfg.p_tol(), cfg.noise(), schedule(cfg));
    let gf = vec![cfg.gamma_f(); n1];
    let trials = map_trials(spec.trials, |t| -> Vec<MuRecord> {
        let mut rng = trial_rng(spec.seed, t);
        let run = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<(ChannelSet, BeamformerSet, PowerVector)> {
            let ch = realize(cfg, cat, rng)?;
            let beams = BeamformerSet::build(&ch)?;
            let p1 = solve_femto(&build_femto_lp(&ch, &beams.g, &gf, p_tol, noise)?)?;
            Ok((ch, beams, p1))
        };
        let base = run(&mut rng);
        grid.iter()
            .map(|pt| {
                let sinr = match &base {
                    Err(e) => Outcome::from(Err(clone_err(e))),
                    Ok((ch, beams, p1)) => Outcome::from((|| {
                        let gm = vec![db_to_linear(pt[0]); n0];
                        let mut est = ch.clone();
                        est.h10 = estimate_links(&ch.h10, pt[1], &mut rng)?;
                        let report = cross_report(&est, &beams.g, &p1.0);
                        let zf = zf_select(ch)?;
                        let (p0, dual) = solve_macro(ch, &zf, &gm, p_tol, &report, noise, &sched)?;
                        if dual.any_cap_bound() {
                            return Err(Error::infeasible(crate::error::Stage::Macro, "cap binds"));
                        }
                        (0..n0)
                            .map(|n| mu_breakdown(ch, beams, &p0.0, &p1.0, n, noise)?.sinr())
                            .collect::<Result<Vec<_>>>()
                    })()),
                };
                MuRecord { sinr }
            })
            .collect()
    });

    let mut table = Table::new(&["kind", "trial", "gamma_m_db", "xi", "mu", "feasible", "sinr_db", "outage"]);
    let mut stats = RunStats::default();
    for (t, recs) in trials.iter().enumerate() {
        for (pt, r) in grid.iter().zip(recs) {
            tally(&mut stats, &r.sinr, true);
            let gm = db_to_linear(pt[0]);
            for n in 0..n0 {
                let s = r.sinr.value().map(|v| v[n]);
                table.push(vec![
                    "trial".into(),
                    t.to_string(),
                    param(pt[0]),
                    param(pt[1]),
                    n.to_string(),
                    r.sinr.flag(),
                    opt(s.map(linear_to_db)),
                    s.map_or("NA".into(), |s| ((s < gm - SINR_SLACK) as u8).to_string()),
                ]);
            }
        }
    }
    for (k, pt) in grid.iter().enumerate() {
        let gm = db_to_linear(pt[0]);
        let mut all = Vec::new();
        for recs in &trials {
            if let Some(v) = recs[k].sinr.value() {
                all.extend_from_slice(v);
            }
        }
        let outages = all.iter().filter(|s| **s < gm - SINR_SLACK).count();
        table.push(vec![
            "summary".into(),
            (all.len() / n0.max(1)).to_string(),
            param(pt[0]),
            param(pt[1]),
            "all".into(),
            rate(all.len() / n0.max(1), trials.len()),
            opt(mean(&all).map(linear_to_db)),
            rate(outages, all.len()),
        ]);
    }
    Ok((table, stats))
}

/// Mean FU SINR for equal per-user power `p`, with `floor` as the
/// interference-plus-noise seen beyond the femto tier.
fn mean_sinr(gains: &[crate::sinr::UserGains], p: f64, floor: f64) -> f64 {
    let s: f64 = gains
        .iter()
        .map(|g| p * g.sig / (p * g.isi + p * g.co.iter().sum::<f64>() + floor))
        .sum();
    s / gains.len() as f64
}

/// Transmit power where the ZF curve first reaches the TR curve,
/// interpolated linearly in dB.
pub fn crossover(tx_dbm: &[f64], tr_db: &[f64], zf_db: &[f64]) -> Option<f64> {
    let d: Vec<f64> = tr_db.iter().zip(zf_db).map(|(a, b)| b - a).collect();
    if d.first().is_some_and(|x| *x >= 0.0) {
        return Some(tx_dbm[0]);
    }
    (1..d.len()).find(|&k| d[k] >= 0.0).map(|k| {
        let w = -d[k - 1] / (d[k] - d[k - 1]);
        tx_dbm[k - 1] + w * (tx_dbm[k] - tx_dbm[k - 1])
    })
}

fn tr_vs_zf(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let users: Vec<usize> = spec.axis("n1").iter().map(|v| *v as usize).collect();
    let tx = spec.axis("tx_dbm").to_vec();
    let floor = cfg.p_tol() + cfg.noise();
    let mut configs = Vec::new();
    for &n1 in &users {
        let mut c = cfg.clone();
        c.network.femto_users = n1;
        c.channel.fu_distance_m = Some(cfg.channel.fu_distance_m.unwrap_or(15.0));
        c.validate()?;
        configs.push(c);
    }
    // per trial, per n1: Some((tr, zf)) mean SINRs over the tx grid
    let trials = map_trials(spec.trials, |t| -> Vec<Outcome<(Vec<f64>, Vec<f64>)>> {
        let mut rng = trial_rng(spec.seed, t);
        configs
            .iter()
            .map(|c| {
                Outcome::from((|| {
                    let ch = realize(c, cat, &mut rng)?;
                    let l = ch.taps;
                    let n1 = ch.femto_users();
                    let exact = ch.femto_antennas() * l >= (2 * l - 1) * n1;
                    let g = tr_beams(&ch.h1)?;
                    let zf = zf_select_links(&ch.h1, l, exact)?;
                    let none = Vec::new();
                    let tr_gains = tier_gains(&g, &vec![l - 1; n1], &ch.h1, &none, &none);
                    let zf_gains = tier_gains(&zf.u, &zf.alpha, &ch.h1, &none, &none);
                    let per_user = |dbm: f64| dbm_to_watts(dbm) / n1 as f64;
                    Ok((
                        tx.iter().map(|d| mean_sinr(&tr_gains, per_user(*d), floor)).collect(),
                        tx.iter().map(|d| mean_sinr(&zf_gains, per_user(*d), floor)).collect(),
                    ))
                })())
            })
            .collect()
    });

    let mut table = Table::new(&["kind", "trial", "n1", "tx_dbm", "sinr_tr_db", "sinr_zf_db"]);
    let mut stats = RunStats::default();
    for (t, recs) in trials.iter().enumerate() {
        for (u, r) in users.iter().zip(recs) {
            tally(&mut stats, r, true);
            for (k, d) in tx.iter().enumerate() {
                let v = r.value();
                table.push(vec![
                    "trial".into(),
                    t.to_string(),
                    u.to_string(),
                    param(*d),
                    opt(v.map(|v| linear_to_db(v.0[k]))),
                    opt(v.map(|v| linear_to_db(v.1[k]))),
                ]);
            }
        }
    }
    for (ui, u) in users.iter().enumerate() {
        let ok: Vec<&(Vec<f64>, Vec<f64>)> = trials.iter().filter_map(|r| r[ui].value()).collect();
        let mut tr_curve = Vec::new();
        let mut zf_curve = Vec::new();
        for (k, d) in tx.iter().enumerate() {
            let tr: Vec<f64> = ok.iter().map(|v| v.0[k]).collect();
            let zf: Vec<f64> = ok.iter().map(|v| v.1[k]).collect();
            let (mt, mz) = (mean(&tr).map(linear_to_db), mean(&zf).map(linear_to_db));
            tr_curve.push(mt.unwrap_or(f64::NAN));
            zf_curve.push(mz.unwrap_or(f64::NAN));
            table.push(vec![
                "summary".into(),
                ok.len().to_string(),
                u.to_string(),
                param(*d),
                opt(mt),
                opt(mz),
            ]);
        }
        let x = crossover(&tx, &tr_curve, &zf_curve);
        table.push(vec![
            "crossover".into(),
            ok.len().to_string(),
            u.to_string(),
            opt(x),
            "NA".into(),
            "NA".into(),
        ]);
    }
    Ok((table, stats))
}

struct BoundRecord {
    young: f64,
    proposed: f64,
    oracle_max: f64,
    signal_lower: f64,
    probe_signal: f64,
    min_signal_exact: f64,
    min_signal_probed: f64,
}

fn bound_tightness(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let psis = spec.axis("psi").to_vec();
    let n1 = cfg.network.femto_users;
    let (probes, ascent) = (cfg.robust.oracle_probes, cfg.robust.oracle_ascent);
    let trials = map_trials(spec.trials, |t| -> Outcome<Vec<Vec<BoundRecord>>> {
        let mut rng = trial_rng(spec.seed, t);
        Outcome::from((|| {
            let ch = realize(cfg, cat, &mut rng)?;
            let g = tr_beams(&ch.h1)?;
            let mut out = Vec::new();
            for &psi in &psis {
                let mut per_fu = Vec::new();
                for j in 0..n1 {
                    let (gj, hj) = (column(&g, j), column(&ch.h1, j));
                    let oracle = worst_case_oracle(&gj, &hj, psi, probes, ascent, &mut rng)?;
                    let scaled: Links = hj
                        .iter()
                        .map(|h| vec![h.iter().map(|z| z / (1.0 - psi.sqrt())).collect()])
                        .collect();
                    let probe_signal = tier_gains(&gj.iter().map(|x| vec![x.clone()]).collect(), &[ch.taps - 1], &scaled, &Vec::new(), &Vec::new())[0].sig;
                    per_fu.push(BoundRecord {
                        young: young_upper(&gj, &hj, psi)?,
                        proposed: proposed_upper(&gj, &hj, psi)?,
                        oracle_max: oracle.max_norm,
                        signal_lower: worst_signal_lower(&gj, &hj, psi)?,
                        probe_signal,
                        min_signal_exact: oracle.min_signal_exact,
                        min_signal_probed: oracle.min_signal,
                    });
                }
                out.push(per_fu);
            }
            Ok(out)
        })())
    });

    let mut table = Table::new(&[
        "kind",
        "trial",
        "psi",
        "fu",
        "young",
        "proposed",
        "oracle_max",
        "gap_db",
        "order_ok",
        "oracle_violation",
        "signal_lower",
        "probe_signal",
        "probe_rel_err",
        "min_signal_exact",
        "min_signal_probed",
    ]);
    let mut stats = RunStats::default();
    for (t, r) in trials.iter().enumerate() {
        tally(&mut stats, r, true);
        let Some(v) = r.value() else { continue };
        for (psi, per_fu) in psis.iter().zip(v) {
            for (j, b) in per_fu.iter().enumerate() {
                table.push(vec![
                    "trial".into(),
                    t.to_string(),
                    param(*psi),
                    j.to_string(),
                    num(b.young),
                    num(b.proposed),
                    num(b.oracle_max),
                    num(linear_to_db(b.young / b.proposed)),
                    ((b.young >= b.proposed) as u8).to_string(),
                    ((b.oracle_max > b.proposed) as u8).to_string(),
                    num(b.signal_lower),
                    num(b.probe_signal),
                    num((b.signal_lower - b.probe_signal).abs() / b.probe_signal),
                    num(b.min_signal_exact),
                    num(b.min_signal_probed),
                ]);
            }
        }
    }
    for (k, psi) in psis.iter().enumerate() {
        let recs: Vec<&BoundRecord> = trials.iter().filter_map(|r| r.value()).flat_map(|v| &v[k]).collect();
        let gaps: Vec<f64> = recs.iter().map(|b| linear_to_db(b.young / b.proposed)).collect();
        let order_bad = recs.iter().filter(|b| b.young < b.proposed).count();
        let violations = recs.iter().filter(|b| b.oracle_max > b.proposed).count();
        let worst = recs
            .iter()
            .map(|b| (b.signal_lower - b.probe_signal).abs() / b.probe_signal)
            .fold(0.0, f64::max);
        let min_ratio: Vec<f64> = recs.iter().map(|b| b.min_signal_exact / b.signal_lower).collect();
        table.push(vec![
            "summary".into(),
            recs.len().to_string(),
            param(*psi),
            "all".into(),
            opt(mean(&recs.iter().map(|b| b.young).collect::<Vec<_>>())),
            opt(mean(&recs.iter().map(|b| b.proposed).collect::<Vec<_>>())),
            opt(mean(&recs.iter().map(|b| b.oracle_max).collect::<Vec<_>>())),
            opt(median(&gaps)),
            order_bad.to_string(),
            violations.to_string(),
            "NA".into(),
            "NA".into(),
            num(worst),
            opt(mean(&min_ratio)),
            "NA".into(),
        ]);
    }
    Ok((table, stats))
}

const DESIGNS: [&str; 3] = ["nominal", "proposed", "young"];

/// Femto designs on estimated channels: nominal, proposed-bound, Young-bound.
fn femto_designs(
    est: &ChannelSet,
    g: &Links,
    psi: f64,
    gf: &[f64],
    p_tol: f64,
    noise: f64,
) -> [Outcome<PowerVector>; 3] {
    let nominal = Outcome::from(build_femto_lp(est, g, gf, p_tol, noise).and_then(|lp| solve_femto(&lp)));
    let robust = |kind| {
        Outcome::from(assemble_bounds(est, g, psi, kind).and_then(|b| solve_robust(&b, gf, p_tol, noise)))
    };
    [nominal, robust(BoundKind::Proposed), robust(BoundKind::Young)]
}

struct OutageRecord {
    power: Outcome<f64>,
    outages: usize,
    samples: usize,
    min_sinr: f64,
    mean_sinr: f64,
}

fn fu_outage(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let psis = spec.axis("psi").to_vec();
    let n1 = cfg.network.femto_users;
    let gamma = cfg.gamma_f();
    let gf = vec![gamma; n1];
    let (p_tol, noise) = (cfg.p_tol(), cfg.noise());
    let floor = p_tol + noise;
    let draws = cfg.robust.error_draws;
    let trials = map_trials(spec.trials, |t| -> Vec<[OutageRecord; 3]> {
        let mut rng = trial_rng(spec.seed, t);
        let ch = realize(cfg, cat, &mut rng);
        psis.iter()
            .map(|&psi| {
                let prepared = ch.as_ref().map_err(clone_err).and_then(|ch| {
                    let mut est = ch.clone();
                    est.h1 = estimate_links(&ch.h1, psi, &mut rng)?;
                    let g = tr_beams(&est.h1)?;
                    Ok((est, g))
                });
                let (est, g) = match prepared {
                    Ok(v) => v,
                    Err(e) => {
                        let failed = Outcome::from(Err::<f64, _>(e));
                        return std::array::from_fn(|_| OutageRecord {
                            power: failed.clone(),
                            outages: 0,
                            samples: 0,
                            min_sinr: f64::NAN,
                            mean_sinr: f64::NAN,
                        });
                    }
                };
                let designs = femto_designs(&est, &g, psi, &gf, p_tol, noise);
                let mut recs: [OutageRecord; 3] = std::array::from_fn(|d| OutageRecord {
                    power: match &designs[d] {
                        Outcome::Done(p) => Outcome::Done(p.total()),
                        Outcome::Infeasible => Outcome::Infeasible,
                        Outcome::Failed => Outcome::Failed,
                    },
                    outages: 0,
                    samples: 0,
                    min_sinr: f64::INFINITY,
                    mean_sinr: 0.0,
                });
                let none = Vec::new();
                let beta = vec![est.taps - 1; n1];
                for _ in 0..draws {
                    let truth: Links = est
                        .h1
                        .iter()
                        .map(|row| row.iter().map(|h| sample_true_channel(h, psi, &mut rng)).collect())
                        .collect();
                    let gains = tier_gains(&g, &beta, &truth, &none, &none);
                    for (d, design) in designs.iter().enumerate() {
                        let Some(p) = design.value() else { continue };
                        for (j, u) in gains.iter().enumerate() {
                            let co: f64 = u.co.iter().zip(&p.0).map(|(c, q)| c * q).sum();
                            let s = p.0[j] * u.sig / (p.0[j] * u.isi + co + floor);
                            let r = &mut recs[d];
                            r.samples += 1;
                            r.outages += (s < gamma - SINR_SLACK) as usize;
                            r.min_sinr = r.min_sinr.min(s);
                            r.mean_sinr += s;
                        }
                    }
                }
                for r in recs.iter_mut() {
                    if r.samples > 0 {
                        r.mean_sinr /= r.samples as f64;
                    } else {
                        r.min_sinr = f64::NAN;
                        r.mean_sinr = f64::NAN;
                    }
                }
                recs
            })
            .collect()
    });

    let mut table = Table::new(&[
        "kind",
        "trial",
        "psi",
        "design",
        "feasible",
        "power_w",
        "samples",
        "outages",
        "outage_rate",
        "min_sinr_db",
        "mean_sinr_db",
    ]);
    let mut stats = RunStats::default();
    for (t, per_psi) in trials.iter().enumerate() {
        for (psi, recs) in psis.iter().zip(per_psi) {
            for (name, r) in DESIGNS.iter().zip(recs) {
                tally(&mut stats, &r.power, true);
                table.push(vec![
                    "trial".into(),
                    t.to_string(),
                    param(*psi),
                    name.to_string(),
                    r.power.flag(),
                    opt(r.power.value().copied()),
                    r.samples.to_string(),
                    r.outages.to_string(),
                    rate(r.outages, r.samples),
                    num(linear_to_db(r.min_sinr)),
                    num(linear_to_db(r.mean_sinr)),
                ]);
            }
        }
    }
    for (k, psi) in psis.iter().enumerate() {
        for (d, name) in DESIGNS.iter().enumerate() {
            let recs: Vec<&OutageRecord> = trials.iter().map(|v| &v[k][d]).collect();
            let powers: Vec<f64> = recs.iter().filter_map(|r| r.power.value().copied()).collect();
            let samples: usize = recs.iter().map(|r| r.samples).sum();
            let outages: usize = recs.iter().map(|r| r.outages).sum();
            let min = recs
                .iter()
                .map(|r| r.min_sinr)
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min);
            let means: Vec<f64> = recs.iter().map(|r| r.mean_sinr).filter(|v| v.is_finite()).collect();
            table.push(vec![
                "summary".into(),
                powers.len().to_string(),
                param(*psi),
                name.to_string(),
                rate(powers.len(), recs.len()),
                opt(mean(&powers)),
                samples.to_string(),
                outages.to_string(),
                rate(outages, samples),
                num(linear_to_db(min)),
                opt(mean(&means).map(linear_to_db)),
            ]);
        }
    }
    Ok((table, stats))
}

fn robust_power(spec: &ExperimentSpec, cfg: &ScenarioConfig, cat: &ProfileCatalog) -> Result<(Table, RunStats)> {
    let grid = spec.grid();
    let n1 = cfg.network.femto_users;
    let (p_tol, noise) = (cfg.p_tol(), cfg.noise());
    let psis = spec.axis("psi").to_vec();
    let trials = map_trials(spec.trials, |t| -> Vec<[Outcome<f64>; 3]> {
        let mut rng = trial_rng(spec.seed, t);
        let ch = realize(cfg, cat, &mut rng);
        // one estimate per psi, shared across the threshold axis
        let estimates: Vec<Result<(ChannelSet, Links)>> = psis
            .iter()
            .map(|&psi| {
                let ch = ch.as_ref().map_err(clone_err)?;
                let mut est = ch.clone();
                est.h1 = estimate_links(&ch.h1, psi, &mut rng)?;
                let g = tr_beams(&est.h1)?;
                Ok((est, g))
            })
            .collect();
        grid.iter()
            .map(|pt| {
                let k = psis.iter().position(|p| *p == pt[0]).unwrap_or(0);
                match &estimates[k] {
                    Err(e) => std::array::from_fn(|_| Outcome::from(Err::<f64, _>(clone_err(e)))),
                    Ok((est, g)) => {
                        let gf = vec![db_to_linear(pt[1]); n1];
                        let d = femto_designs(est, g, pt[0], &gf, p_tol, noise);
                        std::array::from_fn(|i| match &d[i] {
                            Outcome::Done(p) => Outcome::Done(p.total()),
                            Outcome::Infeasible => Outcome::Infeasible,
                            Outcome::Failed => Outcome::Failed,
                        })
                    }
                }
            })
            .collect()
    });

    let mut table = Table::new(&[
        "kind",
        "trial",
        "psi",
        "gamma_f_db",
        "nominal_feasible",
        "proposed_feasible",
        "young_feasible",
        "nominal_w",
        "proposed_w",
        "young_w",
    ]);
    let mut stats = RunStats::default();
    for (t, recs) in trials.iter().enumerate() {
        for (pt, r) in grid.iter().zip(recs) {
            for o in r {
                tally(&mut stats, o, true);
            }
            table.push(vec![
                "trial".into(),
                t.to_string(),
                param(pt[0]),
                param(pt[1]),
                r[0].flag(),
                r[1].flag(),
                r[2].flag(),
                opt(r[0].value().copied()),
                opt(r[1].value().copied()),
                opt(r[2].value().copied()),
            ]);
        }
    }
    for (k, pt) in grid.iter().enumerate() {
        let col = |d: usize| -> Vec<f64> { trials.iter().filter_map(|r| r[k][d].value().copied()).collect() };
        let (a, b, c) = (col(0), col(1), col(2));
        table.push(vec![
            "summary".into(),
            trials.len().to_string(),
            param(pt[0]),
            param(pt[1]),
            rate(a.len(), trials.len()),
            rate(b.len(), trials.len()),
            rate(c.len(), trials.len()),
            opt(mean(&a)),
            opt(mean(&b)),
            opt(mean(&c)),
        ]);
    }
    Ok((table, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_interpolates() {
        let tx = [0.0, 10.0, 20.0];
        assert_eq!(crossover(&tx, &[5.0, 5.0, 5.0], &[0.0, 4.0, 6.0]), Some(15.0));
        assert_eq!(crossover(&tx, &[5.0, 5.0, 5.0], &[0.0, 1.0, 2.0]), None);
        assert_eq!(crossover(&tx, &[5.0, 5.0, 5.0], &[6.0, 7.0, 8.0]), Some(0.0));
    }

    #[test]
    fn number_format_round_trips() {
        for v in [1e-12, 0.1 + 0.2, -3.5, 123456.789] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "NA");
        assert_eq!(param(-4.0), "-4");
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
