//! Worst-case femto design under norm-bounded channel estimation error
//! `‖ĥ - h‖² <= ψ‖h‖²`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::channel::{random_direction, ChannelSet, Cir, Links};
use crate::error::{Error, Result, Stage};
use crate::linops::{conv_acc, dominant_eigpair, inner, l1_norm, norm_sqr, toeplitz_conv_matrix, ComplexMat, C64};
use crate::power::{check_thresholds, femto_lp_from_parts, solve_femto, FemtoLp};
use crate::sinr::{leakage, tier_gains, PowerVector};

pub const EIG_TOL: f64 = 1e-12;
pub const EIG_MAX_ITER: usize = 1_000_000;

fn check_psi(psi: f64) -> Result<()> {
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::InvalidParameter(format!("psi = {psi} outside [0, 1)")));
    }
    Ok(())
}

fn check_pair(g: &[Cir], h: &[Cir]) -> Result<usize> {
    if g.is_empty() || g.len() != h.len() {
        return Err(Error::Dimension(format!(
            "{} filters for {} channels",
            g.len(),
            h.len()
        )));
    }
    let l = h[0].len();
    if l == 0 || g.iter().chain(h).any(|v| v.len() != l) {
        return Err(Error::Dimension("filters and channels must share one tap count".into()));
    }
    Ok(l)
}

/// Per-antenna column `links[·][user]`.
pub fn column(links: &Links, user: usize) -> Vec<Cir> {
    links.iter().map(|row| row[user].clone()).collect()
}

fn response(g: &[Cir], h: &[Cir]) -> Vec<C64> {
    let l = g[0].len() + h[0].len() - 1;
    let mut out = vec![C64::new(0.0, 0.0); l];
    for (gi, hi) in g.iter().zip(h) {
        conv_acc(gi, hi, &mut out);
    }
    out
}

fn shrink(psi: f64) -> f64 {
    let s = 1.0 - psi.sqrt();
    s * s
}

/// Worst-case signal coefficient `|Σ_i (ĝ_i * ĥ_i)[L-1]|² / (1-√ψ)²` per unit power.
pub fn worst_signal_lower(g: &[Cir], h: &[Cir], psi: f64) -> Result<f64> {
    check_psi(psi)?;
    let l = check_pair(g, h)?;
    Ok(response(g, h)[l - 1].norm_sqr() / shrink(psi))
}

/// Young-inequality bound `(Σ_i ‖ĥ_i‖ ‖ĝ_i‖₁)² / (1-√ψ)²` on `‖Σ_i ĝ_i * h_i‖²`.
pub fn young_upper(g: &[Cir], h: &[Cir], psi: f64) -> Result<f64> {
    check_psi(psi)?;
    check_pair(g, h)?;
    let s: f64 = g.iter().zip(h).map(|(gi, hi)| norm_sqr(hi).sqrt() * l1_norm(gi)).sum();
    Ok(s * s / shrink(psi))
}

/// Norm-maximizing channel for filter `g` on the ball `‖h‖ <= ‖ĥ‖/(1-√ψ)`.
#[derive(Debug, Clone)]
pub struct VirtualChannel {
    pub h_star: Cir,
    pub phi_star: Cir,
    /// Top eigenvalue of `ĜᴴĜ ‖ĥ‖²/(1-√ψ)²`.
    pub lam: f64,
}

pub fn virtual_channel(g: &[C64], h: &[C64], psi: f64) -> Result<VirtualChannel> {
    check_psi(psi)?;
    if g.len() != h.len() || g.is_empty() {
        return Err(Error::Dimension("filter and channel lengths differ".into()));
    }
    let t = toeplitz_conv_matrix(g)?;
    let gram: ComplexMat = t.adjoint() * &t;
    let eig = dominant_eigpair(&gram, EIG_TOL, EIG_MAX_ITER)?;
    let radius = norm_sqr(h).sqrt() / (1.0 - psi.sqrt());
    Ok(VirtualChannel {
        h_star: eig.vector.iter().map(|z| z * radius).collect(),
        phi_star: eig.vector,
        lam: eig.value * radius * radius,
    })
}

/// Per-antenna terms `Σ_i ‖ĝ_i * h⃗_i‖²` and `Σ_{i≠i'} (ĝ_i * h⃗_i)ᴴ(ĝ_i' * h⃗_i')`.
fn proposed_parts(g: &[Cir], h: &[Cir], psi: f64) -> Result<(f64, C64)> {
    check_pair(g, h)?;
    let mut v = Vec::with_capacity(g.len());
    for (gi, hi) in g.iter().zip(h) {
        let vc = virtual_channel(gi, hi, psi)?;
        let mut out = vec![C64::new(0.0, 0.0); 2 * gi.len() - 1];
        conv_acc(gi, &vc.h_star, &mut out);
        v.push(out);
    }
    let diag = v.iter().map(|x| norm_sqr(x)).sum();
    let mut cross = C64::new(0.0, 0.0);
    for (a, va) in v.iter().enumerate() {
        for (b, vb) in v.iter().enumerate() {
            if a != b {
                cross += inner(va, vb);
            }
        }
    }
    Ok((diag, cross))
}

/// Eigenvector bound on `‖Σ_i ĝ_i * h_i‖²` over the error set.
pub fn proposed_upper(g: &[Cir], h: &[Cir], psi: f64) -> Result<f64> {
    check_psi(psi)?;
    let (diag, cross) = proposed_parts(g, h, psi)?;
    Ok(diag + cross.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Proposed,
    Young,
}

impl BoundKind {
    pub fn upper(self, g: &[Cir], h: &[Cir], psi: f64) -> Result<f64> {
        match self {
            BoundKind::Proposed => proposed_upper(g, h, psi),
            BoundKind::Young => young_upper(g, h, psi),
        }
    }
}

/// Coefficients of the worst-case femto problem, all per unit power.
#[derive(Debug, Clone)]
pub struct RobustBounds {
    pub kind: BoundKind,
    pub psi: f64,
    pub pl_sig: Vec<f64>,
    pub pu_isi: Vec<f64>,
    /// `pu_co[(j, k)]`: bound on the leakage of beam `k` at FU `j`.
    pub pu_co: DMatrix<f64>,
    /// Objective weights (cross-tier leakage bound toward all MUs).
    pub omega: Vec<f64>,
    /// Young bound on each FU's own total received norm.
    pub young_norm: Vec<f64>,
    /// FUs whose ISI bound came out negative and was clamped to zero.
    pub isi_clamped: Vec<bool>,
}

/// Worst-case coefficients for estimated channels `est` and beams `g_hat`.
///
/// At `ψ = 0` the error set is a single point and the estimate-side values
/// are used directly.
pub fn assemble_bounds(est: &ChannelSet, g_hat: &Links, psi: f64, kind: BoundKind) -> Result<RobustBounds> {
    check_psi(psi)?;
    let n1 = est.femto_users();
    let n0 = est.macro_users();
    let young_norm = (0..n1)
        .map(|j| young_upper(&column(g_hat, j), &column(&est.h1, j), psi))
        .collect::<Result<Vec<_>>>()?;
    if psi == 0.0 {
        let beta = vec![est.taps - 1; n1];
        let gains = tier_gains(g_hat, &beta, &est.h1, &Vec::new(), &Vec::new());
        return Ok(RobustBounds {
            kind,
            psi,
            pl_sig: gains.iter().map(|u| u.sig).collect(),
            pu_isi: gains.iter().map(|u| u.isi).collect(),
            pu_co: DMatrix::from_fn(n1, n1, |j, k| gains[j].co[k]),
            omega: (0..n1)
                .map(|j| (0..n0).map(|n| leakage(g_hat, j, &est.h10, n)).sum())
                .collect(),
            young_norm,
            isi_clamped: vec![false; n1],
        });
    }
    let g_cols: Vec<Vec<Cir>> = (0..n1).map(|j| column(g_hat, j)).collect();
    let mut pl_sig = Vec::with_capacity(n1);
    let mut pu_isi = Vec::with_capacity(n1);
    let mut isi_clamped = Vec::with_capacity(n1);
    let mut pu_co = DMatrix::zeros(n1, n1);
    for j in 0..n1 {
        let own = column(&est.h1, j);
        let pl = worst_signal_lower(&g_cols[j], &own, psi)?;
        let isi = kind.upper(&g_cols[j], &own, psi)? - pl;
        if isi < 0.0 {
            log::debug!("FU {j}: ISI bound {isi:e} below zero, clamped");
        }
        pl_sig.push(pl);
        pu_isi.push(isi.max(0.0));
        isi_clamped.push(isi < 0.0);
        for k in (0..n1).filter(|&k| k != j) {
            pu_co[(j, k)] = kind.upper(&g_cols[k], &own, psi)?;
        }
    }
    let mut omega = Vec::with_capacity(n1);
    for gj in &g_cols {
        let w = match kind {
            BoundKind::Young => (0..n0)
                .map(|n| young_upper(gj, &column(&est.h10, n), psi))
                .sum::<Result<f64>>()?,
            BoundKind::Proposed => {
                let mut diag = 0.0;
                let mut cross = C64::new(0.0, 0.0);
                for n in 0..n0 {
                    let (d, c) = proposed_parts(gj, &column(&est.h10, n), psi)?;
                    diag += d;
                    cross += c;
                }
                diag + cross.norm()
            }
        };
        omega.push(w);
    }
    Ok(RobustBounds {
        kind,
        psi,
        pl_sig,
        pu_isi,
        pu_co,
        omega,
        young_norm,
        isi_clamped,
    })
}

/// The worst-case problem in the same `p ⪰ D B p + D z` form as the femto LP.
pub fn build_robust_lp(bounds: &RobustBounds, gamma_f: &[f64], p_tol: f64, noise: f64) -> Result<FemtoLp> {
    check_thresholds(gamma_f, bounds.pl_sig.len(), "gamma_F")?;
    femto_lp_from_parts(
        &bounds.pl_sig,
        &bounds.pu_isi,
        bounds.pu_co.clone(),
        bounds.omega.clone(),
        gamma_f,
        p_tol,
        noise,
    )
    .map_err(retag)
}

fn retag(e: Error) -> Error {
    match e {
        Error::Infeasible { reason, .. } => Error::Infeasible {
            stage: Stage::Robust,
            reason,
        },
        other => other,
    }
}

/// Minimal powers meeting every worst-case SINR bound.
pub fn solve_robust(bounds: &RobustBounds, gamma_f: &[f64], p_tol: f64, noise: f64) -> Result<PowerVector> {
    let lp = build_robust_lp(bounds, gamma_f, p_tol, noise)?;
    solve_femto(&lp).map_err(retag)
}

/// Empirical extrema over the true channels consistent with an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    /// Largest `‖Σ_i ĝ_i * h_i‖²` found.
    pub max_norm: f64,
    /// Smallest central-tap power found by probing.
    pub min_signal: f64,
    /// Exact minimum of the central-tap power over the feasible set.
    pub min_signal_exact: f64,
    pub probes: usize,
}

/// Largest `t` with `ĥ + t d` feasible for unit direction `d`.
pub fn boundary_step(h_hat: &[C64], d: &[C64], psi: f64) -> f64 {
    let r = inner(d, h_hat).re;
    let n2 = norm_sqr(h_hat);
    (psi * r + (psi * psi * r * r + (1.0 - psi) * psi * n2).sqrt()) / (1.0 - psi)
}

/// Uniform draw from the true channels consistent with estimate `h_hat`.
pub fn sample_true_channel<R: Rng + ?Sized>(h_hat: &[C64], psi: f64, rng: &mut R) -> Cir {
    let l = h_hat.len();
    let radius = psi.sqrt() * norm_sqr(h_hat).sqrt() / (1.0 - psi);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / (2 * l) as f64);
    let d = random_direction(l, rng);
    h_hat
        .iter()
        .zip(&d)
        .map(|(h, d)| h / (1.0 - psi) + d * r)
        .collect()
}

/// Probes the feasible set of true channels for each antenna.
///
/// The set for `ĥ_i` is the ball centred at `ĥ_i/(1-ψ)` with radius
/// `√ψ ‖ĥ_i‖/(1-ψ)`. Probes start at the two radial extremes
/// `ĥ/(1∓√ψ)` and at random boundary points, then climb by
/// conditional-gradient steps, which never decrease a convex objective.
pub fn worst_case_oracle<R: Rng + ?Sized>(
    g: &[Cir],
    h_hat: &[Cir],
    psi: f64,
    n_probes: usize,
    n_ascent: usize,
    rng: &mut R,
) -> Result<OracleResult> {
    check_psi(psi)?;
    let l = check_pair(g, h_hat)?;
    let centre: Vec<Cir> = h_hat
        .iter()
        .map(|h| h.iter().map(|z| z / (1.0 - psi)).collect())
        .collect();
    let radius: Vec<f64> = h_hat
        .iter()
        .map(|h| psi.sqrt() * norm_sqr(h).sqrt() / (1.0 - psi))
        .collect();
    let toeplitz = g.iter().map(|gi| toeplitz_conv_matrix(gi)).collect::<Result<Vec<_>>>()?;

    // Central tap is linear in h: Σ_i w_iᴴ h_i with w_i the conjugated row L-1 of T_i.
    let rows: Vec<Cir> = toeplitz
        .iter()
        .map(|t| t.row(l - 1).iter().map(|z| z.conj()).collect())
        .collect();
    let at_centre: C64 = rows.iter().zip(&centre).map(|(w, c)| inner(w, c)).sum();
    let spread: f64 = rows.iter().zip(&radius).map(|(w, r)| norm_sqr(w).sqrt() * r).sum();
    let min_signal_exact = (at_centre.norm() - spread).max(0.0).powi(2);

    let eval = |h: &[Cir]| {
        let y = response(g, h);
        (norm_sqr(&y), y[l - 1].norm_sqr())
    };
    let mut starts: Vec<Vec<Cir>> = [1.0 - psi.sqrt(), 1.0 + psi.sqrt()]
        .iter()
        .map(|s| {
            h_hat
                .iter()
                .map(|h| h.iter().map(|z| z / s).collect())
                .collect()
        })
        .collect();
    for _ in 0..n_probes {
        starts.push(
            h_hat
                .iter()
                .map(|h| {
                    let d = random_direction(l, rng);
                    let t = boundary_step(h, &d, psi);
                    h.iter().zip(&d).map(|(a, b)| a + b * t).collect()
                })
                .collect(),
        );
    }

    let mut max_norm = f64::NEG_INFINITY;
    let mut min_signal = f64::INFINITY;
    for mut h in starts {
        let (f, s) = eval(&h);
        max_norm = max_norm.max(f);
        min_signal = min_signal.min(s);
        for _ in 0..n_ascent {
            let y = nalgebra::DVector::from_vec(response(g, &h));
            let mut moved = false;
            for (i, t) in toeplitz.iter().enumerate() {
                let grad = t.adjoint() * &y;
                let gn = grad.norm();
                if gn == 0.0 || radius[i] == 0.0 {
                    continue;
                }
                h[i] = centre[i]
                    .iter()
                    .zip(grad.iter())
                    .map(|(c, d)| c + d * (radius[i] / gn))
                    .collect();
                moved = true;
            }
            let (f, s) = eval(&h);
            max_norm = max_norm.max(f);
            min_signal = min_signal.min(s);
            if !moved {
                break;
            }
        }
    }
    Ok(OracleResult {
        max_norm,
        min_signal,
        min_signal_exact,
        probes: n_probes + 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::tr_beams;
    use crate::channel::{draw_channel_set, place_nodes, ProfileCatalog, ScenarioConfig};
    use crate::power::build_femto_lp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_link(l: usize, rng: &mut ChaCha8Rng) -> Cir {
        (0..l).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn tr(h: &[Cir]) -> Vec<Cir> {
        let links: Links = h.iter().map(|x| vec![x.clone()]).collect();
        column(&tr_beams(&links).unwrap(), 0)
    }

    fn realization(seed: u64) -> ChannelSet {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = place_nodes(&cfg, &mut rng);
        draw_channel_set(&cfg, &ProfileCatalog::builtin(), &g, &mut rng).unwrap()
    }

    #[test]
    fn signal_lower_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<Cir> = (0..3).map(|_| random_link(5, &mut rng)).collect();
        let g = tr(&h);
        let est = response(&g, &h)[4].norm_sqr();
        assert!((worst_signal_lower(&g, &h, 0.0).unwrap() - est).abs() <= 1e-15 * est);
        let v = worst_signal_lower(&g, &h, 0.04).unwrap();
        assert!((v - est * 1.5625).abs() <= 1e-12 * v);
    }

    #[test]
    fn signal_lower_unit_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut h = random_link(6, &mut rng);
        let n = norm_sqr(&h).sqrt();
        h.iter_mut().for_each(|z| *z /= n);
        let h = vec![h];
        let v = worst_signal_lower(&tr(&h), &h, 0.09).unwrap();
        assert!((v - 1.0 / 0.49).abs() < 1e-12);
    }

    #[test]
    fn young_scalar_is_tight() {
        let g = vec![vec![c(0.6, -0.8)]];
        let h = vec![vec![c(2.0, 1.0)]];
        let y = young_upper(&g, &h, 0.04).unwrap();
        assert!((y - 5.0 / 0.64).abs() < 1e-12);
        let y0 = young_upper(&g, &h, 0.0).unwrap();
        assert!((y0 - norm_sqr(&response(&g, &h))).abs() < 1e-12);
    }

    #[test]
    fn young_dominates_delta_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = vec![vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]];
        let h: Vec<Cir> = (0..2).map(|_| random_link(3, &mut rng)).collect();
        assert!(young_upper(&g, &h, 0.0).unwrap() >= norm_sqr(&response(&g, &h)));
    }

    #[test]
    fn delta_filter_virtual_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = vec![c(0.0, 0.0); 4];
        g[0] = c(1.0, 0.0);
        let h = random_link(4, &mut rng);
        let vc = virtual_channel(&g, &h, 0.05).unwrap();
        let want = norm_sqr(&h) / shrink(0.05);
        let mut out = vec![c(0.0, 0.0); 7];
        conv_acc(&g, &vc.h_star, &mut out);
        assert!((norm_sqr(&out) - want).abs() <= 1e-12 * want);
        assert!((norm_sqr(&vc.phi_star) - 1.0).abs() < 1e-12);
        assert!((vc.lam - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn virtual_channel_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_link(6, &mut rng);
        let h = random_link(6, &mut rng);
        let psi = 0.1;
        let vc = virtual_channel(&g, &h, psi).unwrap();
        let radius = norm_sqr(&h).sqrt() / (1.0 - psi.sqrt());
        assert!((norm_sqr(&vc.h_star).sqrt() - radius).abs() <= 1e-12 * radius);
        let best = {
            let mut o = vec![c(0.0, 0.0); 11];
            conv_acc(&g, &vc.h_star, &mut o);
            norm_sqr(&o)
        };
        for _ in 0..10_000 {
            let x: Cir = random_direction(6, &mut rng).iter().map(|z| z * radius).collect();
            let mut o = vec![c(0.0, 0.0); 11];
            conv_acc(&g, &x, &mut o);
            assert!(norm_sqr(&o) <= best * (1.0 + 1e-10));
        }
        let vc0 = virtual_channel(&g, &h, 0.0).unwrap();
        assert!((norm_sqr(&vc0.h_star) - norm_sqr(&h)).abs() <= 1e-12 * norm_sqr(&h));
    }

    #[test]
    fn proposed_single_antenna_is_eigen_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = vec![random_link(6, &mut rng)];
        let g = tr(&h);
        let vc = virtual_channel(&g[0], &h[0], 0.05).unwrap();
        let p = proposed_upper(&g, &h, 0.05).unwrap();
        assert!((p - vc.lam).abs() <= 1e-10 * p);
    }

    #[test]
    fn proposed_below_young() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let h: Vec<Cir> = (0..4).map(|_| random_link(6, &mut rng)).collect();
            let g = tr(&h);
            for psi in [0.0, 0.05, 0.1] {
                let p = proposed_upper(&g, &h, psi).unwrap();
                let y = young_upper(&g, &h, psi).unwrap();
                assert!(p <= y * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn bounds_monotone_in_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h: Vec<Cir> = (0..2).map(|_| random_link(6, &mut rng)).collect();
        let g = tr(&h);
        let mut last = (0.0, 0.0, 0.0);
        for k in 0..10 {
            let psi = k as f64 * 0.05;
            let now = (
                proposed_upper(&g, &h, psi).unwrap(),
                young_upper(&g, &h, psi).unwrap(),
                worst_signal_lower(&g, &h, psi).unwrap(),
            );
            assert!(now.0 >= last.0 && now.1 >= last.1 && now.2 >= last.2);
            last = now;
        }
    }

    #[test]
    fn zero_psi_matches_femto_exactly() {
        let ch = realization(11);
        let g = tr_beams(&ch.h1).unwrap();
        let lp = build_femto_lp(&ch, &g, &[1.6, 1.6], 1e-4, 1e-12).unwrap();
        let p = solve_femto(&lp).unwrap();
        for kind in [BoundKind::Proposed, BoundKind::Young] {
            let b = assemble_bounds(&ch, &g, 0.0, kind).unwrap();
            assert_eq!(solve_robust(&b, &[1.6, 1.6], 1e-4, 1e-12).unwrap(), p);
            assert_eq!(b.omega, lp.eta_hat);
        }
    }

    #[test]
    fn zero_cross_channel_zero_objective() {
        let mut ch = realization(12);
        for row in ch.h10.iter_mut() {
            for cir in row.iter_mut() {
                cir.iter_mut().for_each(|z| *z = c(0.0, 0.0));
            }
        }
        let g = tr_beams(&ch.h1).unwrap();
        let b = assemble_bounds(&ch, &g, 0.04, BoundKind::Proposed).unwrap();
        assert!(b.omega.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn robust_power_dominates_nominal() {
        let ch = realization(13);
        let g = tr_beams(&ch.h1).unwrap();
        let nominal = solve_femto(&build_femto_lp(&ch, &g, &[1.26, 1.26], 1e-4, 1e-12).unwrap()).unwrap();
        let b = assemble_bounds(&ch, &g, 0.04, BoundKind::Proposed).unwrap();
        let robust = solve_robust(&b, &[1.26, 1.26], 1e-4, 1e-12).unwrap();
        for j in 0..2 {
            assert!(robust.0[j] >= nominal.0[j]);
        }
    }

    #[test]
    fn oracle_zero_psi_is_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h: Vec<Cir> = (0..3).map(|_| random_link(4, &mut rng)).collect();
        let g = tr(&h);
        let y = response(&g, &h);
        let o = worst_case_oracle(&g, &h, 0.0, 20, 5, &mut rng).unwrap();
        assert_eq!(o.max_norm, norm_sqr(&y));
        assert_eq!(o.min_signal, y[3].norm_sqr());
        assert!((o.min_signal_exact - y[3].norm_sqr()).abs() <= 1e-12 * o.min_signal_exact);
    }

    #[test]
    fn oracle_covers_radial_probe_and_exact_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h: Vec<Cir> = (0..2).map(|_| random_link(6, &mut rng)).collect();
        let g = tr(&h);
        let psi = 0.04;
        let o = worst_case_oracle(&g, &h, psi, 50, 20, &mut rng).unwrap();
        let scaled: Vec<Cir> = h.iter().map(|x| x.iter().map(|z| z / 0.8).collect()).collect();
        assert!(o.max_norm >= norm_sqr(&response(&g, &scaled)));
        assert!(o.min_signal >= o.min_signal_exact * (1.0 - 1e-12));
        let est = response(&g, &h)[5].norm_sqr();
        assert!((o.min_signal_exact - est / 1.44).abs() <= 1e-10 * est);
    }

    #[test]
    fn oracle_below_triangle_bound() {
        // ‖Σ_i g_i*h_i‖ ≤ Σ_i ‖g_i*h_i‖ ≤ Σ_i √λ_i on the relaxed ball
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..20 {
            let h: Vec<Cir> = (0..4).map(|_| random_link(6, &mut rng)).collect();
            let g = tr(&h);
            let psi = 0.1;
            let o = worst_case_oracle(&g, &h, psi, 16, 20, &mut rng).unwrap();
            let tri: f64 = g
                .iter()
                .zip(&h)
                .map(|(gi, hi)| virtual_channel(gi, hi, psi).unwrap().lam.sqrt())
                .sum();
            assert!(o.max_norm <= tri * tri * (1.0 + 1e-10));
        }
    }

    #[test]
    fn samples_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_link(6, &mut rng);
        let mut near_edge = 0;
        for _ in 0..10_000 {
            let t = sample_true_channel(&h, 0.04, &mut rng);
            let e: f64 = h.iter().zip(&t).map(|(a, b)| (a - b).norm_sqr()).sum();
            let slack = 0.04 * norm_sqr(&t) - e;
            assert!(slack >= -1e-12 * norm_sqr(&t));
            if slack < 0.1 * 0.04 * norm_sqr(&t) {
                near_edge += 1;
            }
        }
        assert!(near_edge > 0);
        let same = sample_true_channel(&h, 0.0, &mut rng);
        assert_eq!(same, h);
    }

    #[test]
    fn boundary_step_hits_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let h = random_link(6, &mut rng);
        for _ in 0..100 {
            let d = random_direction(6, &mut rng);
            let t = boundary_step(&h, &d, 0.1);
            let truth: Cir = h.iter().zip(&d).map(|(a, b)| a + b * t).collect();
            let lhs = t * t;
            let rhs = 0.1 * norm_sqr(&truth);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
