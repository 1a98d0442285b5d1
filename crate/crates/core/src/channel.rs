//! Network geometry and frequency-selective channel synthesis.
//!
//! Taps are drawn circularly-symmetric complex Gaussian with variance equal
//! to the profile's linear tap weight divided by `d^exponent`. Profile rows
//! map one-to-one onto tap indices; the delay column is carried for
//! reference only.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{norm_sqr, C64};

/// Complex channel impulse response of one transmit antenna to one user.
pub type Cir = Vec<C64>;

/// CIRs indexed `[transmit antenna][user]`.
pub type Links = Vec<Vec<Cir>>;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapProfile {
    pub name: String,
    pub relative_delays_ns: Vec<f64>,
    pub avg_powers_dbm: Vec<f64>,
}

impl TapProfile {
    pub fn validate(&self) -> Result<()> {
        let n = self.avg_powers_dbm.len();
        if n == 0 || self.relative_delays_ns.len() != n {
            return Err(Error::Config(format!(
                "profile {}: need matching non-empty delay/power columns",
                self.name
            )));
        }
        if self.relative_delays_ns[0] != 0.0
            || self.relative_delays_ns.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(format!(
                "profile {}: delays must start at 0 and strictly increase",
                self.name
            )));
        }
        if self.avg_powers_dbm[0] != 0.0 {
            return Err(Error::Config(format!(
                "profile {}: first tap must be the 0 dBm reference",
                self.name
            )));
        }
        Ok(())
    }

    pub fn tap_count(&self) -> usize {
        self.avg_powers_dbm.len()
    }

    /// Linear per-tap weights (0 dBm maps to 1.0).
    pub fn linear_powers(&self) -> Vec<f64> {
        self.avg_powers_dbm.iter().map(|&p| db_to_linear(p)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileCatalog {
    #[serde(rename = "profile")]
    pub profiles: Vec<TapProfile>,
}

const BUILTIN_PROFILES: &str = include_str!("../data/tap_profiles.toml");

impl ProfileCatalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROFILES).expect("bundled tap profiles are valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cat: ProfileCatalog =
            toml::from_str(text).map_err(|e| Error::Config(format!("tap profiles: {e}")))?;
        for p in &cat.profiles {
            p.validate()?;
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&TapProfile> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("unknown tap profile {name:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub macro_antennas: usize,
    pub femto_antennas: usize,
    pub macro_users: usize,
    pub femto_users: usize,
    pub taps: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            macro_antennas: 4,
            femto_antennas: 4,
            macro_users: 2,
            femto_users: 2,
            taps: 6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub macro_radius_m: f64,
    pub femto_radius_m: f64,
    pub fbs_offset_m: f64,
    pub macro_exponent: f64,
    pub femto_exponent: f64,
    pub cross_exponent: f64,
    pub macro_profile: String,
    pub femto_profile: String,
    pub cross_profile: String,
    /// Pins every FBS-to-FU distance instead of drawing it.
    pub fu_distance_m: Option<f64>,
    pub profiles_path: Option<String>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            macro_radius_m: 300.0,
            femto_radius_m: 30.0,
            fbs_offset_m: 100.0,
            macro_exponent: 4.0,
            femto_exponent: 3.0,
            cross_exponent: 3.5,
            macro_profile: "itu-vehicular".into(),
            femto_profile: "itu-indoor-office".into(),
            cross_profile: "itu-outdoor-to-indoor".into(),
            fu_distance_m: None,
            profiles_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub gamma_m_db: f64,
    pub gamma_f_db: f64,
    pub p_tol_dbm: f64,
    pub noise_power_w: f64,
    /// Subgradient step `a / (b + t)`, in normalized multiplier units.
    pub step_a: f64,
    pub step_b: f64,
    pub max_iter: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            gamma_m_db: 1.0,
            gamma_f_db: 2.0,
            p_tol_dbm: -10.0,
            noise_power_w: 1e-12,
            step_a: 1.0,
            step_b: 1.0,
            max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    /// FBS-side error factor.
    pub psi: f64,
    /// MU-side cross-channel error factor.
    pub xi: f64,
    /// True-channel draws per realization in outage runs.
    pub error_draws: usize,
    /// Random boundary probes per worst-case search.
    pub oracle_probes: usize,
    /// Ascent steps per probe.
    pub oracle_ascent: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            psi: 0.04,
            xi: 0.0,
            error_draws: 10_000,
            oracle_probes: 64,
            oracle_ascent: 50,
        }
    }
}

/// Scenario parameters; defaults reproduce the reference operating point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub channel: ChannelConfig,
    pub power: PowerConfig,
    pub robust: RobustConfig,
}

impl ScenarioConfig {
    pub fn gamma_m(&self) -> f64 {
        db_to_linear(self.power.gamma_m_db)
    }

    pub fn gamma_f(&self) -> f64 {
        db_to_linear(self.power.gamma_f_db)
    }

    pub fn p_tol(&self) -> f64 {
        dbm_to_watts(self.power.p_tol_dbm)
    }

    pub fn noise(&self) -> f64 {
        self.power.noise_power_w
    }

    pub fn catalog(&self) -> Result<ProfileCatalog> {
        match &self.channel.profiles_path {
            Some(p) => ProfileCatalog::load(Path::new(p)),
            None => Ok(ProfileCatalog::builtin()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if [
            n.macro_antennas,
            n.femto_antennas,
            n.macro_users,
            n.femto_users,
            n.taps,
        ]
        .contains(&0)
        {
            return Err(Error::Config("all antenna, user and tap counts must be >= 1".into()));
        }
        if n.macro_antennas * n.taps < (2 * n.taps - 1) * n.macro_users {
            return Err(Error::Config(format!(
                "M0*L = {} < (2L-1)*N0 = {}: zero-forcing right inverse cannot exist",
                n.macro_antennas * n.taps,
                (2 * n.taps - 1) * n.macro_users
            )));
        }
        let c = &self.channel;
        for (name, v) in [
            ("macro_radius_m", c.macro_radius_m),
            ("femto_radius_m", c.femto_radius_m),
            ("fbs_offset_m", c.fbs_offset_m),
            ("macro_exponent", c.macro_exponent),
            ("femto_exponent", c.femto_exponent),
            ("cross_exponent", c.cross_exponent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(d) = c.fu_distance_m {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config(format!("fu_distance_m must be positive, got {d}")));
            }
        }
        let p = &self.power;
        if !(p.noise_power_w.is_finite() && p.noise_power_w > 0.0) {
            return Err(Error::Config("noise_power_w must be positive".into()));
        }
        for (name, v) in [
            ("gamma_m_db", p.gamma_m_db),
            ("gamma_f_db", p.gamma_f_db),
            ("p_tol_dbm", p.p_tol_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if !(p.step_a > 0.0 && p.step_b > 0.0 && p.max_iter > 0) {
            return Err(Error::Config("step schedule needs a > 0, b > 0, max_iter > 0".into()));
        }
        for (name, v) in [("psi", self.robust.psi), ("xi", self.robust.xi)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.robust.error_draws == 0 {
            return Err(Error::Config("error_draws must be >= 1".into()));
        }
        let cat = self.catalog()?;
        for name in [&c.macro_profile, &c.femto_profile, &c.cross_profile] {
            let prof = cat.get(name)?;
            if prof.tap_count() > n.taps {
                return Err(Error::Config(format!(
                    "profile {name} has {} taps but L = {}",
                    prof.tap_count(),
                    n.taps
                )));
            }
        }
        Ok(())
    }
}

/// Link distances for one placement, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// MBS to each MU.
    pub d_0n: Vec<f64>,
    /// FBS to each FU.
    pub d_1j: Vec<f64>,
    /// MBS to each FU.
    pub d_01j: Vec<f64>,
    /// FBS to each MU.
    pub d_10n: Vec<f64>,
    /// MBS to FBS.
    pub d_mf: f64,
}

fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> (f64, f64) {
    loop {
        let r = radius * rng.random::<f64>().sqrt();
        if r > 0.0 {
            let t = 2.0 * PI * rng.random::<f64>();
            return (r * t.cos(), r * t.sin());
        }
    }
}

/// Uniform placement: MUs in the macro disc around the origin, the FBS at a
/// fixed offset and uniform bearing, FUs uniform in the femto disc.
pub fn place_nodes<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Geometry {
    let c = &config.channel;
    let n = &config.network;
    let bearing = 2.0 * PI * rng.random::<f64>();
    let fbs = (c.fbs_offset_m * bearing.cos(), c.fbs_offset_m * bearing.sin());

    let mut d_0n = Vec::with_capacity(n.macro_users);
    let mut d_10n = Vec::with_capacity(n.macro_users);
    for _ in 0..n.macro_users {
        loop {
            let (x, y) = uniform_in_disc(c.macro_radius_m, rng);
            let to_fbs = (x - fbs.0).hypot(y - fbs.1);
            if to_fbs > 0.0 {
                d_0n.push(x.hypot(y));
                d_10n.push(to_fbs);
                break;
            }
        }
    }

    let mut d_1j = Vec::with_capacity(n.femto_users);
    let mut d_01j = Vec::with_capacity(n.femto_users);
    for _ in 0..n.femto_users {
        let (dx, dy) = match c.fu_distance_m {
            Some(d) => {
                let t = 2.0 * PI * rng.random::<f64>();
                (d * t.cos(), d * t.sin())
            }
            None => uniform_in_disc(c.femto_radius_m, rng),
        };
        d_1j.push(dx.hypot(dy));
        d_01j.push((fbs.0 + dx).hypot(fbs.1 + dy));
    }

    Geometry {
        d_0n,
        d_1j,
        d_01j,
        d_10n,
        d_mf: c.fbs_offset_m,
    }
}

/// One CIR with independent `CN(0, w_l / d^exponent)` taps; taps past the
/// profile length are zero.
pub fn draw_cir<R: Rng + ?Sized>(
    profile: &TapProfile,
    distance: f64,
    exponent: f64,
    taps: usize,
    rng: &mut R,
) -> Result<Cir> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "link distance must be positive, got {distance}"
        )));
    }
    if profile.tap_count() > taps {
        return Err(Error::InvalidParameter(format!(
            "profile {} has {} taps, more than L = {taps}",
            profile.name,
            profile.tap_count()
        )));
    }
    let loss = distance.powf(-exponent);
    let mut cir = vec![C64::new(0.0, 0.0); taps];
    for (tap, w) in cir.iter_mut().zip(profile.linear_powers()) {
        let sd = (0.5 * w * loss).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *tap = C64::new(sd * re, sd * im);
    }
    Ok(cir)
}

/// The four CIR families of one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub taps: usize,
    /// MBS antenna `m` to MU `n`.
    pub h0: Links,
    /// FBS antenna `i` to FU `j`.
    pub h1: Links,
    /// FBS antenna `i` to MU `n`.
    pub h10: Links,
    /// MBS antenna `m` to FU `j`.
    pub h01: Links,
}

impl ChannelSet {
    pub fn macro_antennas(&self) -> usize {
        self.h0.len()
    }
    pub fn femto_antennas(&self) -> usize {
        self.h1.len()
    }
    pub fn macro_users(&self) -> usize {
        self.h0.first().map_or(0, Vec::len)
    }
    pub fn femto_users(&self) -> usize {
        self.h1.first().map_or(0, Vec::len)
    }

    /// Shape and finiteness check.
    pub fn validate(&self) -> Result<()> {
        let (m0, m1, n0, n1) = (
            self.macro_antennas(),
            self.femto_antennas(),
            self.macro_users(),
            self.femto_users(),
        );
        for (name, links, ants, users) in [
            ("h0", &self.h0, m0, n0),
            ("h1", &self.h1, m1, n1),
            ("h10", &self.h10, m1, n0),
            ("h01", &self.h01, m0, n1),
        ] {
            if links.len() != ants || links.iter().any(|row| row.len() != users) {
                return Err(Error::Dimension(format!("{name} must be {ants}x{users}")));
            }
            for cir in links.iter().flatten() {
                if cir.len() != self.taps {
                    return Err(Error::Dimension(format!(
                        "{name} CIR has {} taps, expected {}",
                        cir.len(),
                        self.taps
                    )));
                }
                if cir.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite("channel tap"));
                }
            }
        }
        Ok(())
    }

    /// Zeroes both cross-tier families.
    pub fn without_cross_tier(&self) -> Self {
        let zero = |links: &Links| -> Links {
            links
                .iter()
                .map(|row| row.iter().map(|c| vec![C64::new(0.0, 0.0); c.len()]).collect())
                .collect()
        };
        Self {
            taps: self.taps,
            h0: self.h0.clone(),
            h1: self.h1.clone(),
            h10: zero(&self.h10),
            h01: zero(&self.h01),
        }
    }
}

fn draw_links<R: Rng + ?Sized>(
    profile: &TapProfile,
    distances: &[f64],
    antennas: usize,
    exponent: f64,
    taps: usize,
    rng: &mut R,
) -> Result<Links> {
    (0..antennas)
        .map(|_| {
            distances
                .iter()
                .map(|&d| draw_cir(profile, d, exponent, taps, rng))
                .collect()
        })
        .collect()
}

/// Draws `h0` (macro profile), `h1` (femto profile), then `h10` and `h01`
/// (cross profile) in that order from `rng`.
pub fn draw_channel_set<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    catalog: &ProfileCatalog,
    geometry: &Geometry,
    rng: &mut R,
) -> Result<ChannelSet> {
    let c = &config.channel;
    let n = &config.network;
    let macro_p = catalog.get(&c.macro_profile)?;
    let femto_p = catalog.get(&c.femto_profile)?;
    let cross_p = catalog.get(&c.cross_profile)?;
    let l = n.taps;
    Ok(ChannelSet {
        taps: l,
        h0: draw_links(macro_p, &geometry.d_0n, n.macro_antennas, c.macro_exponent, l, rng)?,
        h1: draw_links(femto_p, &geometry.d_1j, n.femto_antennas, c.femto_exponent, l, rng)?,
        h10: draw_links(cross_p, &geometry.d_10n, n.femto_antennas, c.cross_exponent, l, rng)?,
        h01: draw_links(cross_p, &geometry.d_01j, n.macro_antennas, c.cross_exponent, l, rng)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// `e = +sqrt(psi) h`.
    WorstAligned,
    /// `e = -sqrt(psi) h`.
    WorstAntiAligned,
    /// `e` uniform in the ball of radius `sqrt(psi) ‖h‖`.
    UniformBall,
}

fn enforce_radius(e: &mut [C64], limit_sqr: f64) {
    let mut n2 = norm_sqr(e);
    while n2 > limit_sqr {
        let s = (limit_sqr / n2).sqrt() * (1.0 - 4.0 * f64::EPSILON);
        for z in e.iter_mut() {
            *z *= s;
        }
        n2 = norm_sqr(e);
    }
}

/// Uniform direction on the unit sphere of `C^len`.
pub fn random_direction<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let d: Vec<C64> = (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
            .collect();
        let n = norm_sqr(&d).sqrt();
        if n > 0.0 {
            return d.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Returns `(h_est, e)` with `h_est = h_true + e` and `‖e‖² <= psi ‖h_true‖²`.
pub fn perturb_cir<R: Rng + ?Sized>(
    h_true: &[C64],
    psi: f64,
    mode: ErrorMode,
    rng: &mut R,
) -> Result<(Cir, Cir)> {
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::InvalidParameter(format!(
            "error factor must lie in [0, 1), got {psi}"
        )));
    }
    let h2 = norm_sqr(h_true);
    let mut e: Cir = match mode {
        ErrorMode::WorstAligned => h_true.iter().map(|&z| z * psi.sqrt()).collect(),
        ErrorMode::WorstAntiAligned => h_true.iter().map(|&z| -z * psi.sqrt()).collect(),
        ErrorMode::UniformBall => {
            let dim = 2 * h_true.len();
            let radius = (psi * h2).sqrt() * rng.random::<f64>().powf(1.0 / dim as f64);
            random_direction(h_true.len(), rng)
                .into_iter()
                .map(|z| z * radius)
                .collect()
        }
    };
    enforce_radius(&mut e, psi * h2);
    let est = h_true.iter().zip(&e).map(|(a, b)| a + b).collect();
    Ok((est, e))
}
