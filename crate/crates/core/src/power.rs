//! Power allocation: the joint (centralized) problem, the femto closed form
//! and the macro dual subgradient solver.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::beamform::{tr_beams, zf_select, BeamformerSet, ZfBeams};
use crate::channel::{ChannelSet, Links};
use crate::error::{Error, Result, Stage};
use crate::linops::spectral_radius;
use crate::sinr::{fu_breakdown, leakage, mu_breakdown, tier_gains, PowerVector};

/// Relative tolerance for a femto SINR constraint to count as active.
pub const FEMTO_ACTIVE_TOL: f64 = 1e-8;
/// Absolute slack allowed below a SINR threshold in a feasible allocation.
pub const SINR_SLACK: f64 = 1e-6;
/// Stopping tolerance on the macro SINR residual.
pub const MACRO_X1_TOL: f64 = 1e-9;
/// Stopping tolerance on the normalized macro cap residual.
pub const MACRO_X2_TOL: f64 = 1e-8;

/// Femto power problem in the form `p ⪰ D B p + D z`.
#[derive(Debug, Clone)]
pub struct FemtoLp {
    pub eta_hat: Vec<f64>,
    pub eta: Vec<f64>,
    /// `b[(j, k)]`: leakage of beam `k` at FU `j`; zero diagonal.
    pub b: DMatrix<f64>,
    /// Diagonal of `D`, `γ_j / φ_j`.
    pub d: Vec<f64>,
    pub phi: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: f64,
}

impl FemtoLp {
    pub fn users(&self) -> usize {
        self.z.len()
    }

    pub fn feasible(&self) -> bool {
        self.rho < 1.0
    }

    /// `D B`.
    pub fn iteration_matrix(&self) -> DMatrix<f64> {
        let n = self.users();
        DMatrix::from_fn(n, n, |r, c| self.d[r] * self.b[(r, c)])
    }

    /// `D z`.
    pub fn offset(&self) -> Vec<f64> {
        self.d.iter().zip(&self.z).map(|(d, z)| d * z).collect()
    }
}

pub(crate) fn check_thresholds(gamma: &[f64], expect: usize, what: &str) -> Result<()> {
    if gamma.len() != expect {
        return Err(Error::Dimension(format!(
            "{what} has {} thresholds for {expect} users",
            gamma.len()
        )));
    }
    if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter(format!("{what} must be positive and finite")));
    }
    Ok(())
}

/// Builds the femto problem for TR beams `g` (`[antenna][FU]`).
pub fn build_femto_lp(
    channels: &ChannelSet,
    g: &Links,
    gamma_f: &[f64],
    p_tol: f64,
    noise: f64,
) -> Result<FemtoLp> {
    let n1 = channels.femto_users();
    check_thresholds(gamma_f, n1, "gamma_F")?;
    if !(p_tol >= 0.0 && noise >= 0.0) {
        return Err(Error::InvalidParameter("P_tol and noise must be nonnegative".into()));
    }
    let beta = vec![channels.taps - 1; n1];
    let gains = tier_gains(g, &beta, &channels.h1, &Vec::new(), &Vec::new());
    let eta_hat: Vec<f64> = (0..n1)
        .map(|j| (0..channels.macro_users()).map(|n| leakage(g, j, &channels.h10, n)).sum())
        .collect();
    let sig: Vec<f64> = gains.iter().map(|u| u.sig).collect();
    let isi: Vec<f64> = gains.iter().map(|u| u.isi).collect();
    let b = DMatrix::from_fn(n1, n1, |j, k| gains[j].co[k]);
    femto_lp_from_parts(&sig, &isi, b, eta_hat, gamma_f, p_tol, noise)
}

/// Assembles `p ⪰ D B p + D z` from per-FU signal, ISI and leakage
/// coefficients. `eta_hat` weights the objective.
pub(crate) fn femto_lp_from_parts(
    sig: &[f64],
    isi: &[f64],
    b: DMatrix<f64>,
    eta_hat: Vec<f64>,
    gamma_f: &[f64],
    p_tol: f64,
    noise: f64,
) -> Result<FemtoLp> {
    let n1 = sig.len();
    let scale = eta_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eta = eta_hat
        .iter()
        .map(|v| if scale > 0.0 { v / scale } else { 0.0 })
        .collect();
    let phi: Vec<f64> = (0..n1).map(|j| sig[j] - gamma_f[j] * isi[j]).collect();
    if let Some(j) = phi.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::infeasible(
            Stage::Femto,
            format!("SINR target of FU {j} unreachable at any power (phi = {:e})", phi[j]),
        ));
    }
    let d: Vec<f64> = gamma_f.iter().zip(&phi).map(|(g, f)| g / f).collect();
    let z = vec![p_tol + noise; n1];
    let db = DMatrix::from_fn(n1, n1, |r, c| d[r] * b[(r, c)]);
    let rho = spectral_radius(&db)?;
    Ok(FemtoLp {
        eta_hat,
        eta,
        b,
        d,
        phi,
        z,
        gamma: gamma_f.to_vec(),
        rho,
    })
}

fn solve_nonneg(m: DMatrix<f64>, rhs: Vec<f64>, stage: Stage) -> Result<Vec<f64>> {
    let n = rhs.len();
    let x = m
        .lu()
        .solve(&DVector::from_vec(rhs))
        .ok_or_else(|| Error::Numerical(format!("{stage} system is singular")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("power solution"));
    }
    let floor = -1e-12 * x.amax();
    if let Some(k) = (0..n).find(|&k| x[k] < floor) {
        return Err(Error::Numerical(format!(
            "{stage} power {k} came out negative ({:e})",
            x[k]
        )));
    }
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

/// Minimal femto powers `(I - D B)^{-1} D z`.
pub fn solve_femto(lp: &FemtoLp) -> Result<PowerVector> {
    if !lp.feasible() {
        return Err(Error::infeasible(
            Stage::Femto,
            format!("spectral radius {} is not below one", lp.rho),
        ));
    }
    let n = lp.users();
    let m = DMatrix::identity(n, n) - lp.iteration_matrix();
    Ok(PowerVector(solve_nonneg(m, lp.offset(), Stage::Femto)?))
}

/// The same solution through the η-weighted similarity
/// `diag(η)^{-1} [I - diag(η) D B diag(η)^{-1}]^{-1} diag(η) D z`.
///
/// Falls back to [`solve_femto`] when some `η_j` is zero.
pub fn solve_femto_weighted(lp: &FemtoLp) -> Result<PowerVector> {
    if lp.eta.iter().any(|e| *e <= 0.0) {
        return solve_femto(lp);
    }
    if !lp.feasible() {
        return Err(Error::infeasible(
            Stage::Femto,
            format!("spectral radius {} is not below one", lp.rho),
        ));
    }
    let n = lp.users();
    let e = &lp.eta;
    let m = DMatrix::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - e[r] * lp.d[r] * lp.b[(r, c)] / e[c]
    });
    let rhs = lp.offset().iter().zip(e).map(|(v, e)| v * e).collect();
    let y = solve_nonneg(m, rhs, Stage::Femto)?;
    Ok(PowerVector(y.iter().zip(e).map(|(y, e)| y / e).collect()))
}

/// Cross-tier power each MU receives from the femto tier at powers `p1`.
pub fn cross_report(channels: &ChannelSet, g: &Links, p1: &[f64]) -> Vec<f64> {
    (0..channels.macro_users())
        .map(|n| {
            p1.iter()
                .enumerate()
                .map(|(j, p)| p * leakage(g, j, &channels.h10, n))
                .sum()
        })
        .collect()
}

/// Diminishing step `a / (b + t)` shared by both multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    pub a: f64,
    pub b: f64,
    pub max_iter: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            max_iter: 50_000,
        }
    }
}

impl StepSchedule {
    pub fn step(&self, t: usize) -> f64 {
        self.a / (self.b + t as f64)
    }
}

/// State of the macro dual iteration at termination.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MacroDual {
    pub delta: Vec<f64>,
    pub nabla: Vec<f64>,
    pub xi: Vec<f64>,
    pub mu: Vec<f64>,
    /// `lambda[n][j]`, one multiplier per cap pair.
    pub lambda: Vec<Vec<f64>>,
    /// `a[n][j]`: unit-power leakage of MU beam `n` at FU `j`.
    pub cap_gain: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
    /// Largest normalized cap residual per MU.
    pub x2: Vec<f64>,
    /// MUs whose SINR-minimal power violates a cap; their power sits at the cap.
    pub cap_bound: Vec<bool>,
    pub iterations: usize,
}

impl MacroDual {
    pub fn any_cap_bound(&self) -> bool {
        self.cap_bound.iter().any(|b| *b)
    }
}

/// Normalized cap residual `a x / P_tol - 1`.
fn cap_residual(a: f64, x: f64, p_tol: f64) -> f64 {
    let load = a * x;
    if p_tol > 0.0 {
        load / p_tol - 1.0
    } else if load > 0.0 {
        f64::INFINITY
    } else {
        -1.0
    }
}

/// Minimizer of the per-MU Lagrangian over `x = exp(ξ)`.
fn lagrangian_argmin(delta: f64, nabla: f64, mu: f64, weight: f64) -> f64 {
    if mu <= 0.0 || nabla <= 0.0 {
        return 0.0;
    }
    2.0 * mu * nabla / (weight * (nabla + (nabla * nabla + 4.0 * delta * mu * nabla / weight).sqrt()))
}

/// Macro powers from the dual subgradient method.
///
/// `beams` are the ZF filters; `cross_star[n]` is the femto power reaching
/// MU `n`. Users whose cap forbids the SINR target are returned at the cap
/// and flagged in [`MacroDual::cap_bound`].
pub fn solve_macro(
    channels: &ChannelSet,
    beams: &ZfBeams,
    gamma_m: &[f64],
    p_tol: f64,
    cross_star: &[f64],
    noise: f64,
    schedule: &StepSchedule,
) -> Result<(PowerVector, MacroDual)> {
    let n0 = channels.macro_users();
    let n1 = channels.femto_users();
    check_thresholds(gamma_m, n0, "gamma_M")?;
    if cross_star.len() != n0 || cross_star.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidParameter("cross report must be N0 nonnegative values".into()));
    }
    if !(p_tol >= 0.0) {
        return Err(Error::InvalidParameter("P_tol must be nonnegative".into()));
    }
    if !(schedule.a > 0.0 && schedule.b > 0.0) {
        return Err(Error::InvalidParameter("step schedule must be positive".into()));
    }
    let gains = tier_gains(&beams.u, &beams.alpha, &channels.h0, &Vec::new(), &Vec::new());
    let mut delta = Vec::with_capacity(n0);
    let mut nabla = Vec::with_capacity(n0);
    for n in 0..n0 {
        let sig = gains[n].sig;
        if sig <= 0.0 {
            return Err(Error::infeasible(Stage::Macro, format!("MU {n} has no main-tap gain")));
        }
        let uplink_co: f64 = (0..n0)
            .filter(|&k| k != n)
            .map(|k| leakage(&beams.u, n, &channels.h0, k))
            .sum();
        delta.push((gains[n].isi + uplink_co) / sig);
        nabla.push((cross_star[n] + noise) / sig);
    }
    if let Some(n) = (0..n0).find(|&n| delta[n] * gamma_m[n] >= 1.0) {
        return Err(Error::infeasible(
            Stage::Macro,
            format!("MU {n} residual interference exceeds 1/gamma"),
        ));
    }
    let cap_gain: Vec<Vec<f64>> = (0..n0)
        .map(|n| (0..n1).map(|j| leakage(&beams.u, n, &channels.h01, j)).collect())
        .collect();
    let cap: Vec<f64> = cap_gain
        .iter()
        .map(|row| {
            row.iter()
                .filter(|a| **a > 0.0)
                .map(|a| p_tol / a)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let x_min: Vec<f64> = (0..n0)
        .map(|n| gamma_m[n] * nabla[n] / (1.0 - gamma_m[n] * delta[n]))
        .collect();
    let cap_bound: Vec<bool> = (0..n0).map(|n| x_min[n] > cap[n] * (1.0 + 1e-12)).collect();
    // Per-user objective weights; users decouple so the minimizer is unchanged.
    let weight: Vec<f64> = (0..n0)
        .map(|n| if nabla[n] > 0.0 { 1.0 / (gamma_m[n] * nabla[n]) } else { 1.0 })
        .collect();

    let mut mu = vec![1.0; n0];
    let mut lambda = vec![vec![0.0; n1]; n0];
    let mut x = vec![0.0; n0];
    let mut x1 = vec![0.0; n0];
    let mut x2 = vec![f64::NEG_INFINITY; n0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < schedule.max_iter {
        let mut done = true;
        for n in 0..n0 {
            if cap_bound[n] {
                x[n] = cap[n];
                continue;
            }
            let k: f64 = (0..n1)
                .filter(|&j| lambda[n][j] > 0.0)
                .map(|j| lambda[n][j] * cap_gain[n][j] / p_tol)
                .sum();
            x[n] = lagrangian_argmin(delta[n], nabla[n], mu[n], weight[n] + k);
            let inv = if x[n] > 0.0 { delta[n] + nabla[n] / x[n] } else { f64::INFINITY };
            x1[n] = (inv.ln() + gamma_m[n].ln()).min(700.0);
            x2[n] = (0..n1)
                .map(|j| cap_residual(cap_gain[n][j], x[n], p_tol))
                .fold(f64::NEG_INFINITY, f64::max);
            let sinr_ok = x1[n] <= MACRO_X1_TOL && (x1[n].abs() <= MACRO_X1_TOL || mu[n] == 0.0);
            if !(sinr_ok && x2[n] <= MACRO_X2_TOL) {
                done = false;
            }
        }
        if done {
            converged = true;
            break;
        }
        let step = schedule.step(iterations);
        for n in (0..n0).filter(|&n| !cap_bound[n]) {
            mu[n] = (mu[n] + step * x1[n]).max(0.0);
            for j in 0..n1 {
                let r = cap_residual(cap_gain[n][j], x[n], p_tol);
                lambda[n][j] = (lambda[n][j] + step * r).max(0.0);
            }
        }
        iterations += 1;
    }
    if !converged {
        let residual = x1
            .iter()
            .chain(&x2)
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        return Err(Error::NoConvergence {
            what: "macro dual subgradient",
            iterations,
            residual,
        });
    }
    let dual = MacroDual {
        xi: x.iter().map(|v| v.ln()).collect(),
        delta,
        nabla,
        mu,
        lambda,
        cap_gain,
        x1,
        x2,
        cap_bound,
        iterations,
    };
    Ok((PowerVector(x), dual))
}

/// Outcome of a power allocation run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AllocationResult {
    pub p0: PowerVector,
    pub p1: PowerVector,
    pub feasible: bool,
    /// MU SINRs followed by FU SINRs, evaluated with the actual powers.
    pub achieved_sinr: Vec<f64>,
    pub cross_report: Vec<f64>,
    pub iterations: usize,
    pub total_power: f64,
}

fn achieved(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    p0: &[f64],
    p1: &[f64],
    noise: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(p0.len() + p1.len());
    for n in 0..p0.len() {
        out.push(mu_breakdown(channels, beams, p0, p1, n, noise)?.sinr()?);
    }
    for j in 0..p1.len() {
        out.push(fu_breakdown(channels, beams, p0, p1, j, noise)?.sinr()?);
    }
    Ok(out)
}

fn meets(sinr: &[f64], gamma_m: &[f64], gamma_f: &[f64]) -> bool {
    sinr.iter()
        .zip(gamma_m.iter().chain(gamma_f))
        .all(|(s, g)| *s >= g - SINR_SLACK)
}

/// Joint constraint system `p ⪰ F p + v` over `[p0; p1]`.
pub fn centralized_system(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma_m: &[f64],
    gamma_f: &[f64],
    noise: f64,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n0 = channels.macro_users();
    let n1 = channels.femto_users();
    check_thresholds(gamma_m, n0, "gamma_M")?;
    check_thresholds(gamma_f, n1, "gamma_F")?;
    let beta = vec![beams.beta; n1];
    let mg = tier_gains(&beams.u, &beams.alpha, &channels.h0, &beams.g, &channels.h10);
    let fg = tier_gains(&beams.g, &beta, &channels.h1, &beams.u, &channels.h01);
    let n = n0 + n1;
    let mut f = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    let rows = mg
        .iter()
        .zip(gamma_m)
        .map(|(g, gm)| (g, *gm, 0, n0))
        .chain(fg.iter().zip(gamma_f).map(|(g, gf)| (g, *gf, n0, 0)));
    for (r, (g, gamma, own_off, other_off)) in rows.enumerate() {
        let phi = g.sig - gamma * g.isi;
        if phi <= 0.0 {
            return Err(Error::infeasible(
                Stage::Centralized,
                format!("user {r} cannot reach its SINR target at any power"),
            ));
        }
        let s = gamma / phi;
        for (k, c) in g.co.iter().enumerate() {
            f[(r, own_off + k)] = s * c;
        }
        for (k, c) in g.cross.iter().enumerate() {
            f[(r, other_off + k)] = s * c;
        }
        v[r] = s * noise;
    }
    Ok((f, v))
}

/// Joint minimum-power allocation for fixed beams.
pub fn solve_centralized(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma_m: &[f64],
    gamma_f: &[f64],
    noise: f64,
) -> Result<AllocationResult> {
    let (f, v) = centralized_system(channels, beams, gamma_m, gamma_f, noise)?;
    let rho = spectral_radius(&f)?;
    if rho >= 1.0 {
        return Err(Error::infeasible(
            Stage::Centralized,
            format!("spectral radius {rho} is not below one"),
        ));
    }
    let n = v.len();
    let p = solve_nonneg(DMatrix::identity(n, n) - f, v, Stage::Centralized)?;
    let n0 = channels.macro_users();
    let (p0, p1) = (p[..n0].to_vec(), p[n0..].to_vec());
    let achieved_sinr = achieved(channels, beams, &p0, &p1, noise)?;
    Ok(AllocationResult {
        feasible: meets(&achieved_sinr, gamma_m, gamma_f),
        cross_report: cross_report(channels, &beams.g, &p1),
        total_power: p.iter().sum(),
        p0: PowerVector(p0),
        p1: PowerVector(p1),
        achieved_sinr,
        iterations: 0,
    })
}

/// Two-stage scheme: femto closed form, then macro dual with the cross report.
pub fn solve_proposed(
    channels: &ChannelSet,
    gamma_m: &[f64],
    gamma_f: &[f64],
    p_tol: f64,
    noise: f64,
    schedule: &StepSchedule,
) -> Result<AllocationResult> {
    let g = tr_beams(&channels.h1)?;
    let lp = build_femto_lp(channels, &g, gamma_f, p_tol, noise)?;
    let p1 = solve_femto(&lp)?;
    let report = cross_report(channels, &g, &p1.0);
    let zf = zf_select(channels)?;
    let (p0, dual) = solve_macro(channels, &zf, gamma_m, p_tol, &report, noise, schedule)?;
    if let Some(n) = dual.cap_bound.iter().position(|b| *b) {
        return Err(Error::infeasible(
            Stage::Macro,
            format!("MU {n} needs more power than the cross-tier cap allows"),
        ));
    }
    let beams = BeamformerSet {
        u: zf.u,
        alpha: zf.alpha,
        g,
        beta: channels.taps - 1,
    };
    let achieved_sinr = achieved(channels, &beams, &p0.0, &p1.0, noise)?;
    Ok(AllocationResult {
        feasible: meets(&achieved_sinr, gamma_m, gamma_f),
        total_power: p0.total() + p1.total(),
        p0,
        p1,
        achieved_sinr,
        cross_report: report,
        iterations: dual.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, place_nodes, ProfileCatalog, ScenarioConfig};
    use crate::linops::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn realization(seed: u64) -> ChannelSet {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = place_nodes(&cfg, &mut rng);
        draw_channel_set(&cfg, &ProfileCatalog::builtin(), &g, &mut rng).unwrap()
    }

    fn fixed_point(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; v.len()];
        for _ in 0..200_000 {
            let next: Vec<f64> = (0..v.len())
                .map(|r| v[r] + (0..v.len()).map(|c| m[(r, c)] * p[c]).sum::<f64>())
                .collect();
            let diff = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            p = next;
            if diff <= 1e-15 * p.iter().fold(0.0, |a: f64, b| a.max(*b)) {
                break;
            }
        }
        p
    }

    fn single_fu() -> ChannelSet {
        let one = |v: f64| -> Links { vec![vec![vec![C64::new(v, 0.0)]]] };
        ChannelSet {
            taps: 1,
            h0: one(1.0),
            h1: one(2.0),
            h10: one(0.5),
            h01: one(0.1),
        }
    }

    #[test]
    fn single_fu_closed_form() {
        let ch = single_fu();
        let g = tr_beams(&ch.h1).unwrap();
        let lp = build_femto_lp(&ch, &g, &[3.0], 1e-4, 1e-12).unwrap();
        assert_eq!(lp.b[(0, 0)], 0.0);
        assert!((lp.phi[0] - 4.0).abs() < 1e-12);
        let p = solve_femto(&lp).unwrap();
        let want = 3.0 * (1e-4 + 1e-12) / 4.0;
        assert!((p.0[0] - want).abs() <= 1e-14 * want);
        let w = solve_femto_weighted(&lp).unwrap();
        assert!((w.0[0] - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn table_instance_floor() {
        let ch = realization(1);
        let g = tr_beams(&ch.h1).unwrap();
        let cfg = ScenarioConfig::default();
        let lp = build_femto_lp(&ch, &g, &[cfg.gamma_f(); 2], cfg.p_tol(), cfg.noise()).unwrap();
        for z in &lp.z {
            assert!((z - (1e-4 + 1e-12)).abs() < 1e-18);
        }
    }

    #[test]
    fn femto_matches_fixed_point_and_weighted_form() {
        for seed in 0..20 {
            let ch = realization(seed);
            let g = tr_beams(&ch.h1).unwrap();
            let Ok(lp) = build_femto_lp(&ch, &g, &[1.6, 1.6], 1e-4, 1e-12) else {
                continue;
            };
            let Ok(p) = solve_femto(&lp) else { continue };
            let oracle = fixed_point(&lp.iteration_matrix(), &lp.offset());
            let w = solve_femto_weighted(&lp).unwrap();
            for k in 0..2 {
                assert!((p.0[k] - oracle[k]).abs() <= 1e-10 * oracle[k]);
                assert!((p.0[k] - w.0[k]).abs() <= 1e-10 * p.0[k]);
            }
        }
    }

    #[test]
    fn femto_constraints_active() {
        let ch = realization(4);
        let beams = BeamformerSet::build(&ch).unwrap();
        let lp = build_femto_lp(&ch, &beams.g, &[1.6, 1.6], 1e-4, 1e-12).unwrap();
        let p1 = solve_femto(&lp).unwrap();
        for j in 0..2 {
            let mut b = fu_breakdown(&ch, &beams, &[0.0, 0.0], &p1.0, j, 1e-12).unwrap();
            b.cross = 1e-4;
            let s = b.sinr().unwrap();
            assert!((s - 1.6).abs() <= FEMTO_ACTIVE_TOL * 1.6, "{s}");
        }
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let ch = realization(2);
        let g = tr_beams(&ch.h1).unwrap();
        let err = build_femto_lp(&ch, &g, &[1e9, 1e9], 1e-4, 1e-12).unwrap_err();
        assert!(err.is_infeasible());
    }

    #[test]
    fn cross_report_matches_breakdown() {
        let ch = realization(5);
        let beams = BeamformerSet::build(&ch).unwrap();
        let p1 = [0.01, 0.02];
        let rep = cross_report(&ch, &beams.g, &p1);
        for n in 0..2 {
            let b = mu_breakdown(&ch, &beams, &[0.0, 0.0], &p1, n, 0.0).unwrap();
            assert!((rep[n] - b.cross).abs() <= 1e-12 * b.cross);
        }
        assert_eq!(cross_report(&ch, &beams.g, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn macro_matches_analytic_minimum() {
        let ch = realization(6);
        let zf = zf_select(&ch).unwrap();
        let cross = [3e-9, 7e-10];
        let (p, dual) =
            solve_macro(&ch, &zf, &[1.26, 1.26], 1.0, &cross, 1e-12, &StepSchedule::default()).unwrap();
        for n in 0..2 {
            let want = dual.nabla[n] / (1.0 / 1.26 - dual.delta[n]);
            assert!((p.0[n] - want).abs() <= 1e-5 * want);
            assert!(dual.mu[n] >= 0.0);
            assert!(dual.lambda[n].iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn macro_cap_binding() {
        let ch = realization(6);
        let zf = zf_select(&ch).unwrap();
        let p_tol = 1e-30;
        let (p, dual) =
            solve_macro(&ch, &zf, &[1.26, 1.26], p_tol, &[1e-9, 1e-9], 1e-12, &StepSchedule::default())
                .unwrap();
        assert!(dual.any_cap_bound());
        for n in 0..2 {
            let a = dual.cap_gain[n].iter().cloned().fold(0.0, f64::max);
            assert!((p.0[n] - p_tol / a).abs() <= 1e-12 * p.0[n]);
        }
    }

    #[test]
    fn centralized_matches_fixed_point() {
        let ch = realization(9);
        let beams = BeamformerSet::build(&ch).unwrap();
        let (f, v) = centralized_system(&ch, &beams, &[0.8, 0.8], &[1.6, 1.6], 1e-12).unwrap();
        let r = solve_centralized(&ch, &beams, &[0.8, 0.8], &[1.6, 1.6], 1e-12).unwrap();
        let oracle = fixed_point(&f, &v);
        let p: Vec<f64> = r.p0.0.iter().chain(&r.p1.0).cloned().collect();
        for k in 0..4 {
            assert!((p[k] - oracle[k]).abs() <= 1e-10 * oracle[k]);
        }
        assert!(r.feasible);
    }

    #[test]
    fn decoupled_tiers_agree() {
        let ch = realization(10).without_cross_tier();
        let beams = BeamformerSet::build(&ch).unwrap();
        let c = solve_centralized(&ch, &beams, &[1.26, 1.26], &[1.6, 1.6], 1e-12).unwrap();
        let lp = build_femto_lp(&ch, &beams.g, &[1.6, 1.6], 0.0, 1e-12).unwrap();
        let p1 = solve_femto(&lp).unwrap();
        for j in 0..2 {
            assert!((c.p1.0[j] - p1.0[j]).abs() <= 1e-10 * p1.0[j]);
        }
        let pr = solve_proposed(&ch, &[1.26, 1.26], &[1.6, 1.6], 0.0, 1e-12, &StepSchedule::default())
            .unwrap();
        assert!((pr.total_power - c.total_power).abs() <= 1e-8 * c.total_power);
    }
}
