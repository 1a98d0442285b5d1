//! Zero-forcing beam selection for the MBS and time-reversal prefilters for
//! the FBS.
//!
//! Tap indices are 0-based throughout: a received vector has `2L - 1` taps
//! and the time-reversal focusing tap is `L - 1`.

use crate::channel::{ChannelSet, Cir, Links};
use crate::error::{Error, Result, Stage};
use crate::linops::{self, conv_acc, norm_sqr, ComplexMat, C64};

/// Residual above which a selector is declared outside the row space.
pub const ZF_ROW_SPACE_TOL: f64 = 1e-6;

/// One zero-forcing candidate: unit-norm filters aiming at `tap`.
#[derive(Debug, Clone)]
pub struct ZfCandidate {
    /// Per-antenna filters, each of length `L`.
    pub filters: Vec<Cir>,
    pub tap: usize,
    /// Received main-tap amplitude of the unit-norm stacked filter.
    pub c: f64,
    pub gamma: f64,
}

/// Stacked Sylvester matrix of every user and its pseudo-inverse.
///
/// Built once per channel realization and shared by all `(user, tap)`
/// candidates.
#[derive(Debug, Clone)]
pub struct ZfSystem {
    taps: usize,
    antennas: usize,
    users: usize,
    stacked: ComplexMat,
    pinv: ComplexMat,
}

impl ZfSystem {
    /// `links[m][n]` is the CIR from antenna `m` to user `n`.
    pub fn new(links: &Links, taps: usize) -> Result<Self> {
        let antennas = links.len();
        let users = links.first().map_or(0, Vec::len);
        if antennas == 0 || users == 0 || taps == 0 {
            return Err(Error::Dimension("zero-forcing needs antennas, users and taps".into()));
        }
        let span = 2 * taps - 1;
        let mut stacked = ComplexMat::zeros(users * span, antennas * taps);
        for n in 0..users {
            let rows: Vec<Vec<C64>> = (0..taps)
                .map(|l| (0..antennas).map(|m| links[m][n][l]).collect())
                .collect();
            let block = linops::sylvester_matrix(&rows, taps)?;
            stacked.view_mut((n * span, 0), (span, antennas * taps)).copy_from(&block);
        }
        let pinv = linops::pseudo_inverse(&stacked)?;
        Ok(Self {
            taps,
            antennas,
            users,
            stacked,
            pinv,
        })
    }

    pub fn stacked(&self) -> &ComplexMat {
        &self.stacked
    }

    pub fn pinv(&self) -> &ComplexMat {
        &self.pinv
    }

    /// Candidate for `user` targeting `tap`. With `require_exact`, a selector
    /// that the stacked matrix cannot reproduce (residual above
    /// [`ZF_ROW_SPACE_TOL`]) is rejected; otherwise the least-squares filter
    /// is returned.
    pub fn candidate(
        &self,
        links: &Links,
        user: usize,
        tap: usize,
        require_exact: bool,
    ) -> Result<ZfCandidate> {
        let span = 2 * self.taps - 1;
        if user >= self.users || tap >= span {
            return Err(Error::InvalidParameter(format!(
                "candidate (user {user}, tap {tap}) outside {} users x {span} taps",
                self.users
            )));
        }
        let row = user * span + tap;
        let x: Vec<C64> = self.pinv.column(row).iter().copied().collect();
        let xn = norm_sqr(&x).sqrt();
        if xn == 0.0 {
            return Err(Error::infeasible(
                Stage::ZeroForcing,
                format!("tap {tap} of user {user} is unreachable"),
            ));
        }
        if require_exact {
            // ‖H x - z‖ for the selector z = e_row
            let hx = &self.stacked * nalgebra::DVector::from_column_slice(&x);
            let resid = hx
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let target = if k == row { 1.0 } else { 0.0 };
                    (v - C64::new(target, 0.0)).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            if resid > ZF_ROW_SPACE_TOL {
                return Err(Error::infeasible(
                    Stage::ZeroForcing,
                    format!("selector for user {user}, tap {tap} has row-space residual {resid:e}"),
                ));
            }
        }
        let unit: Vec<C64> = x.iter().map(|z| z / xn).collect();
        let filters = linops::unstack_tap_major(&unit, self.antennas);
        let mut cand = ZfCandidate {
            filters,
            tap,
            c: 1.0 / xn,
            gamma: 0.0,
        };
        cand.gamma = zf_gamma(&cand, links, user);
        Ok(cand)
    }
}

/// Aggregate response `Σ_m filters[m] * links[m][user]`.
pub fn aggregate_response(filters: &[Cir], links: &Links, user: usize) -> Vec<C64> {
    let l = filters[0].len();
    let mut out = vec![C64::new(0.0, 0.0); l + links[0][user].len() - 1];
    for (m, f) in filters.iter().enumerate() {
        conv_acc(f, &links[m][user], &mut out);
    }
    out
}

/// Ranking metric: main-tap power over own ISI plus leakage to the other
/// users plus one.
pub fn zf_gamma(candidate: &ZfCandidate, links: &Links, user: usize) -> f64 {
    let own = aggregate_response(&candidate.filters, links, user);
    let main = own[candidate.tap].norm_sqr();
    let isi: f64 = own
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != candidate.tap)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    let users = links[0].len();
    let leak: f64 = (0..users)
        .filter(|&k| k != user)
        .map(|k| norm_sqr(&aggregate_response(&candidate.filters, links, k)))
        .sum();
    main / (isi + leak + 1.0)
}

/// Single candidate on the macro channels.
pub fn zf_candidate(channels: &ChannelSet, user: usize, tap: usize) -> Result<ZfCandidate> {
    let sys = ZfSystem::new(&channels.h0, channels.taps)?;
    sys.candidate(&channels.h0, user, tap, true)
}

/// Selected zero-forcing beams: `u[m][n]` and the sampled tap per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfBeams {
    pub u: Links,
    pub alpha: Vec<usize>,
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Sweeps every tap per user and keeps the largest ranking metric; ties go
/// to the smallest tap. Infeasible candidates are skipped.
pub fn zf_select_links(links: &Links, taps: usize, require_exact: bool) -> Result<ZfBeams> {
    let sys = ZfSystem::new(links, taps)?;
    let antennas = links.len();
    let users = links[0].len();
    let mut u = vec![Vec::with_capacity(users); antennas];
    let mut alpha = Vec::with_capacity(users);
    let mut cs = Vec::with_capacity(users);
    let mut gammas = Vec::with_capacity(users);
    for n in 0..users {
        let mut best: Option<ZfCandidate> = None;
        for tap in 0..2 * taps - 1 {
            match sys.candidate(links, n, tap, require_exact) {
                Ok(c) => {
                    if best.as_ref().is_none_or(|b| c.gamma > b.gamma) {
                        best = Some(c);
                    }
                }
                Err(e) if e.is_infeasible() => continue,
                Err(e) => return Err(e),
            }
        }
        let best = best.ok_or_else(|| {
            Error::infeasible(Stage::ZeroForcing, format!("no feasible tap for user {n}"))
        })?;
        for (m, f) in best.filters.into_iter().enumerate() {
            u[m].push(f);
        }
        alpha.push(best.tap);
        cs.push(best.c);
        gammas.push(best.gamma);
    }
    Ok(ZfBeams {
        u,
        alpha,
        c: cs,
        gamma: gammas,
    })
}

/// Zero-forcing selection on the macro channels.
pub fn zf_select(channels: &ChannelSet) -> Result<ZfBeams> {
    zf_select_links(&channels.h0, channels.taps, true)
}

/// Time-reversal filters for user `user`: conjugated, reversed CIRs
/// normalized so that `Σ_i ‖g_i‖² = 1`.
pub fn tr_filters(links: &Links, user: usize) -> Result<Vec<Cir>> {
    let energy: f64 = links.iter().map(|row| norm_sqr(&row[user])).sum();
    if energy == 0.0 || !energy.is_finite() {
        return Err(Error::infeasible(
            Stage::TimeReversal,
            format!("user {user} has an all-zero channel"),
        ));
    }
    let s = energy.sqrt();
    Ok(links
        .iter()
        .map(|row| row[user].iter().rev().map(|z| z.conj() / s).collect())
        .collect())
}

/// Time-reversal beamformer for FU `j` on the femto channels.
pub fn tr_beamformer(channels: &ChannelSet, j: usize) -> Result<Vec<Cir>> {
    tr_filters(&channels.h1, j)
}

/// All time-reversal filters, indexed `g[i][j]`.
pub fn tr_beams(links: &Links) -> Result<Links> {
    let antennas = links.len();
    let users = links.first().map_or(0, Vec::len);
    let mut g = vec![Vec::with_capacity(users); antennas];
    for j in 0..users {
        for (i, f) in tr_filters(links, j)?.into_iter().enumerate() {
            g[i].push(f);
        }
    }
    Ok(g)
}

/// Beams of both tiers for one realization.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub u: Links,
    pub alpha: Vec<usize>,
    pub g: Links,
    /// Time-reversal sampling tap, always `L - 1`.
    pub beta: usize,
}

impl BeamformerSet {
    pub fn build(channels: &ChannelSet) -> Result<Self> {
        let zf = zf_select(channels)?;
        Ok(Self {
            u: zf.u,
            alpha: zf.alpha,
            g: tr_beams(&channels.h1)?,
            beta: channels.taps - 1,
        })
    }
}

/// Aggregate TR response `Σ_i g_i * h_i`; its central tap is the matched
/// filter peak.
pub fn tr_response(filters: &[Cir], cirs: &[&Cir]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); filters[0].len() + cirs[0].len() - 1];
    for (f, h) in filters.iter().zip(cirs) {
        conv_acc(f, h, &mut out);
    }
    out
}
