//! Received-power decomposition and SINR for macro users (MUs) and femto
//! users (FUs). Symbols are unit-power and mutually independent, so
//! interference powers add across users.

use serde::Serialize;

use crate::beamform::BeamformerSet;
use crate::channel::{ChannelSet, Cir, Links};
use crate::error::{Error, Result};
use crate::linops::{conv_acc, norm_sqr, C64};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PowerBreakdown {
    pub sig: f64,
    pub isi: f64,
    pub co: f64,
    pub cross: f64,
    pub noise: f64,
}

impl PowerBreakdown {
    pub fn interference(&self) -> f64 {
        self.isi + self.co + self.cross
    }

    pub fn sinr(&self) -> Result<f64> {
        sinr(self)
    }
}

/// `sig / (isi + co + cross + noise)`.
pub fn sinr(b: &PowerBreakdown) -> Result<f64> {
    let den = b.isi + b.co + b.cross + b.noise;
    if den <= 0.0 {
        if b.sig == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Numerical("SINR denominator is zero".into()));
    }
    Ok(b.sig / den)
}

/// Nonnegative per-user transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("power {k} is {v}")));
        }
        Ok(Self(p))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `Σ_a sqrt(p) f_a * h_a[user]` accumulated into a fresh buffer.
fn scaled_response(filters: &Links, beam: usize, links: &Links, user: usize, amp: f64) -> Vec<C64> {
    let l = filters[0][beam].len() + links[0][user].len() - 1;
    let mut out = vec![C64::new(0.0, 0.0); l];
    for (a, row) in filters.iter().enumerate() {
        let f: Cir = row[beam].iter().map(|z| z * amp).collect();
        conv_acc(&f, &links[a][user], &mut out);
    }
    out
}

fn check_power(p: &[f64], expect: usize, what: &str) -> Result<()> {
    if p.len() != expect {
        return Err(Error::Dimension(format!(
            "{what} has {} entries, expected {expect}",
            p.len()
        )));
    }
    if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("{what} has a negative or non-finite entry")));
    }
    Ok(())
}

fn split_tap(resp: &[C64], tap: usize) -> Result<(f64, f64)> {
    if tap >= resp.len() {
        return Err(Error::InvalidParameter(format!(
            "sampling tap {tap} outside the {}-tap response",
            resp.len()
        )));
    }
    let sig = resp[tap].norm_sqr();
    Ok((sig, norm_sqr(resp) - sig))
}

/// Received powers at MU `n`.
pub fn mu_breakdown(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    p0: &[f64],
    p1: &[f64],
    n: usize,
    noise: f64,
) -> Result<PowerBreakdown> {
    let n0 = channels.macro_users();
    check_power(p0, n0, "p0")?;
    check_power(p1, channels.femto_users(), "p1")?;
    let own = scaled_response(&beams.u, n, &channels.h0, n, p0[n].sqrt());
    let (sig, isi) = split_tap(&own, beams.alpha[n])?;
    let co = (0..n0)
        .filter(|&k| k != n)
        .map(|k| norm_sqr(&scaled_response(&beams.u, k, &channels.h0, n, p0[k].sqrt())))
        .sum();
    let cross = (0..p1.len())
        .map(|j| norm_sqr(&scaled_response(&beams.g, j, &channels.h10, n, p1[j].sqrt())))
        .sum();
    Ok(PowerBreakdown {
        sig,
        isi: isi.max(0.0),
        co,
        cross,
        noise,
    })
}

/// Received powers at FU `j`, sampled at `beams.beta`.
pub fn fu_breakdown(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    p0: &[f64],
    p1: &[f64],
    j: usize,
    noise: f64,
) -> Result<PowerBreakdown> {
    let n1 = channels.femto_users();
    check_power(p0, channels.macro_users(), "p0")?;
    check_power(p1, n1, "p1")?;
    let own = scaled_response(&beams.g, j, &channels.h1, j, p1[j].sqrt());
    let (sig, isi) = split_tap(&own, beams.beta)?;
    let co = (0..n1)
        .filter(|&k| k != j)
        .map(|k| norm_sqr(&scaled_response(&beams.g, k, &channels.h1, j, p1[k].sqrt())))
        .sum();
    let cross = (0..p0.len())
        .map(|n| norm_sqr(&scaled_response(&beams.u, n, &channels.h01, j, p0[n].sqrt())))
        .sum();
    Ok(PowerBreakdown {
        sig,
        isi: isi.max(0.0),
        co,
        cross,
        noise,
    })
}

/// Unit-power gains seen by one user: main tap, ISI, per-interferer leakage.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGains {
    pub sig: f64,
    pub isi: f64,
    /// Same-tier leakage from each other user's beam (own entry is zero).
    pub co: Vec<f64>,
    /// Cross-tier leakage from each beam of the other tier.
    pub cross: Vec<f64>,
}

/// `‖Σ_a filters[a][beam] * links[a][user]‖²` at unit power.
pub fn leakage(filters: &Links, beam: usize, links: &Links, user: usize) -> f64 {
    norm_sqr(&scaled_response(filters, beam, links, user, 1.0))
}

/// Unit-power gains for every user of one tier.
///
/// `beams` serve `own_links` (`[antenna][user]`); `other_beams` with
/// `cross_links` (`[other antenna][user]`) produce the cross-tier term.
pub fn tier_gains(
    beams: &Links,
    taps: &[usize],
    own_links: &Links,
    other_beams: &Links,
    cross_links: &Links,
) -> Vec<UserGains> {
    let users = own_links[0].len();
    let others = other_beams.first().map_or(0, Vec::len);
    (0..users)
        .map(|r| {
            let own = scaled_response(beams, r, own_links, r, 1.0);
            let sig = own[taps[r]].norm_sqr();
            let isi = (norm_sqr(&own) - sig).max(0.0);
            let co = (0..users)
                .map(|k| if k == r { 0.0 } else { leakage(beams, k, own_links, r) })
                .collect();
            let cross = (0..others)
                .map(|k| leakage(other_beams, k, cross_links, r))
                .collect();
            UserGains { sig, isi, co, cross }
        })
        .collect()
}

/// Gains at every MU (`cross` indexed by FU beam).
pub fn mu_gains(channels: &ChannelSet, beams: &BeamformerSet) -> Vec<UserGains> {
    tier_gains(&beams.u, &beams.alpha, &channels.h0, &beams.g, &channels.h10)
}

/// Gains at every FU (`cross` indexed by MU beam).
pub fn fu_gains(channels: &ChannelSet, beams: &BeamformerSet) -> Vec<UserGains> {
    let taps = vec![beams.beta; channels.femto_users()];
    tier_gains(&beams.g, &taps, &channels.h1, &beams.u, &channels.h01)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, place_nodes, ProfileCatalog, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn scalar_set(h: f64) -> (ChannelSet, BeamformerSet) {
        let one = |v: f64| -> Links { vec![vec![vec![c(v)]]] };
        let ch = ChannelSet {
            taps: 1,
            h0: one(h),
            h1: one(1.0),
            h10: one(0.0),
            h01: one(0.0),
        };
        let beams = BeamformerSet {
            u: one(1.0),
            alpha: vec![0],
            g: one(1.0),
            beta: 0,
        };
        (ch, beams)
    }

    fn realization(seed: u64) -> (ChannelSet, BeamformerSet) {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = place_nodes(&cfg, &mut rng);
        let ch = draw_channel_set(&cfg, &ProfileCatalog::builtin(), &g, &mut rng).unwrap();
        let b = BeamformerSet::build(&ch).unwrap();
        (ch, b)
    }

    #[test]
    fn scalar_mu_breakdown() {
        let (ch, b) = scalar_set(2.0);
        let bd = mu_breakdown(&ch, &b, &[4.0], &[0.0], 0, 1e-3).unwrap();
        assert!((bd.sig - 16.0).abs() < 1e-12);
        assert_eq!((bd.isi, bd.co, bd.cross), (0.0, 0.0, 0.0));
        assert_eq!(bd.noise, 1e-3);
    }

    #[test]
    fn zero_power_leaves_noise_only() {
        let (ch, b) = realization(3);
        let bd = mu_breakdown(&ch, &b, &[0.0, 0.0], &[0.0, 0.0], 1, 1e-12).unwrap();
        assert_eq!((bd.sig, bd.isi, bd.co, bd.cross), (0.0, 0.0, 0.0, 0.0));
        let bd = fu_breakdown(&ch, &b, &[0.0, 0.0], &[1.0, 1.0], 0, 1e-12).unwrap();
        assert_eq!(bd.cross, 0.0);
    }

    #[test]
    fn sinr_edge_cases() {
        let b = PowerBreakdown {
            sig: 1.0,
            noise: 1.0,
            ..Default::default()
        };
        assert_eq!(sinr(&b).unwrap(), 1.0);
        let b = PowerBreakdown {
            noise: 1.0,
            ..Default::default()
        };
        assert_eq!(sinr(&b).unwrap(), 0.0);
        let b = PowerBreakdown {
            sig: 1.0,
            ..Default::default()
        };
        assert!(sinr(&b).is_err());
    }

    #[test]
    fn bad_tap_is_rejected() {
        let (ch, mut b) = scalar_set(1.0);
        b.alpha[0] = 3;
        assert!(mu_breakdown(&ch, &b, &[1.0], &[0.0], 0, 1.0).is_err());
    }

    #[test]
    fn zf_beams_cancel_isi_and_co_tier() {
        let (ch, b) = realization(17);
        let bd = mu_breakdown(&ch, &b, &[2.0, 3.0], &[0.0, 0.0], 0, 1e-12).unwrap();
        assert!(bd.isi + bd.co <= 1e-8 * bd.sig);
    }

    #[test]
    fn tr_single_antenna_peak_is_channel_energy() {
        let cfg = ScenarioConfig {
            network: crate::channel::NetworkConfig {
                femto_antennas: 1,
                femto_users: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = place_nodes(&cfg, &mut rng);
        let ch = draw_channel_set(&cfg, &ProfileCatalog::builtin(), &g, &mut rng).unwrap();
        let b = BeamformerSet::build(&ch).unwrap();
        let p1 = 0.7;
        let bd = fu_breakdown(&ch, &b, &[0.0, 0.0], &[p1], 0, 0.0).unwrap();
        let e = norm_sqr(&ch.h1[0][0]);
        assert!((bd.sig - p1 * e).abs() <= 1e-12 * bd.sig);
    }

    #[test]
    fn gains_match_breakdowns() {
        let (ch, b) = realization(8);
        let p0 = [0.3, 1.7];
        let p1 = [0.05, 0.2];
        let mg = mu_gains(&ch, &b);
        for n in 0..2 {
            let bd = mu_breakdown(&ch, &b, &p0, &p1, n, 0.0).unwrap();
            let g = &mg[n];
            assert!((bd.sig - g.sig * p0[n]).abs() <= 1e-12 * bd.sig);
            let co: f64 = (0..2).map(|k| g.co[k] * p0[k]).sum();
            let cross: f64 = (0..2).map(|k| g.cross[k] * p1[k]).sum();
            assert!((bd.co - co).abs() <= 1e-10 * bd.co + 1e-14 * bd.sig);
            assert!((bd.cross - cross).abs() <= 1e-12 * bd.cross);
        }
    }
}
