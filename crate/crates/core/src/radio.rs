//! RF arithmetic: pathloss, received power, interference and the
//! interference-aware Shannon rate.
//!
//! Powers are carried in dBm at the API boundary and summed in linear
//! milliwatts internally.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::{PhysicalConfig, Scenario, MAX_LINKS};

/// A subset of the available links; bit `j` set means link `j` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkSet(u16);

impl LinkSet {
    pub const EMPTY: LinkSet = LinkSet(0);

    /// Builds a set from a raw mask, rejecting bits at or above `k`.
    pub fn new(mask: u16, k: usize) -> Result<Self> {
        if !(1..=MAX_LINKS).contains(&k) {
            return Err(Error::config(format!("k must be in 1..={MAX_LINKS}, got {k}")));
        }
        if (mask as u32) >> k != 0 {
            return Err(Error::config(format!("mask {mask:#b} has bits above k={k}")));
        }
        Ok(LinkSet(mask))
    }

    /// All `k` links active.
    pub fn full(k: usize) -> Self {
        assert!((1..=MAX_LINKS).contains(&k), "k out of range: {k}");
        LinkSet(((1u32 << k) - 1) as u16)
    }

    pub fn single(link: usize) -> Self {
        assert!(link < MAX_LINKS, "link index out of range: {link}");
        LinkSet(1 << link)
    }

    pub fn mask(self) -> u16 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, link: usize) -> bool {
        link < MAX_LINKS && self.0 & (1 << link) != 0
    }

    pub fn with(self, link: usize) -> Self {
        assert!(link < MAX_LINKS, "link index out of range: {link}");
        LinkSet(self.0 | (1 << link))
    }

    pub fn is_disjoint(self, other: LinkSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Active link indices in ascending order.
    pub fn links(self) -> impl Iterator<Item = usize> {
        (0..MAX_LINKS).filter(move |&l| self.0 & (1 << l) != 0)
    }
}

impl fmt::Display for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

/// The joint action: one link set per AP.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivationProfile {
    pub per_ap: Vec<LinkSet>,
}

impl ActivationProfile {
    pub fn new(per_ap: Vec<LinkSet>) -> Self {
        Self { per_ap }
    }

    pub fn uniform(n: usize, set: LinkSet) -> Self {
        Self { per_ap: vec![set; n] }
    }

    pub fn len(&self) -> usize {
        self.per_ap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_ap.is_empty()
    }

    fn check<T: Real>(&self, scenario: &Scenario<T>) -> Result<()> {
        if self.per_ap.len() != scenario.num_aps() {
            return Err(Error::Contract(format!(
                "profile has {} entries for {} APs",
                self.per_ap.len(),
                scenario.num_aps()
            )));
        }
        let limit = LinkSet::full(scenario.num_links).mask();
        if let Some(bad) = self.per_ap.iter().find(|s| s.mask() & !limit != 0) {
            return Err(Error::Contract(format!(
                "link set {bad} uses links beyond k={}",
                scenario.num_links
            )));
        }
        Ok(())
    }
}

/// Log-distance pathloss with a per-meter wall term:
/// `L0 + 10·γ·log10(d) + c·W·d`.
pub fn pathloss_db<T: Real>(d: T, physical: &PhysicalConfig<T>) -> Result<T> {
    if d.is_nan() || d <= T::zero() {
        return Err(Error::Domain(format!("pathloss needs a positive distance, got {d}")));
    }
    Ok(physical.pathloss_intercept_db
        + T::lit(10.0) * physical.attenuation_factor * d.log10()
        + physical.wall_attenuation_db_per_wall * physical.walls_per_meter * d)
}

pub fn received_power_dbm<T: Real>(tx_dbm: T, d: T, physical: &PhysicalConfig<T>) -> Result<T> {
    Ok(tx_dbm - pathloss_db(d, physical)?)
}

#[inline]
pub fn dbm_to_mw<T: Real>(dbm: T) -> T {
    T::lit(10.0).powf(dbm / T::lit(10.0))
}

#[inline]
pub fn mw_to_dbm<T: Real>(mw: T) -> T {
    T::lit(10.0) * mw.log10()
}

fn check_index<T: Real>(scenario: &Scenario<T>, i: usize) -> Result<()> {
    if i >= scenario.num_aps() {
        return Err(Error::config(format!(
            "AP index {i} out of range for {} APs",
            scenario.num_aps()
        )));
    }
    Ok(())
}

/// Linear power received at AP `j`'s transmissions by STA `i`, in mW.
fn cross_gain_mw<T: Real>(scenario: &Scenario<T>, j: usize, i: usize) -> Result<T> {
    let d = scenario.ap_positions[j].distance(&scenario.sta_positions[i]);
    Ok(dbm_to_mw(received_power_dbm(
        scenario.physical.tx_power_dbm,
        d,
        &scenario.physical,
    )?))
}

/// Aggregate power at STA `i` on `link` from every other AP that has the
/// link active, summed in milliwatts. No sensitivity cutoff is applied.
pub fn interference_mw<T: Real>(
    scenario: &Scenario<T>,
    profile: &ActivationProfile,
    i: usize,
    link: usize,
) -> Result<T> {
    check_index(scenario, i)?;
    profile.check(scenario)?;
    if link >= scenario.num_links {
        return Err(Error::config(format!(
            "link index {link} out of range for k={}",
            scenario.num_links
        )));
    }
    let mut total = T::zero();
    for (j, set) in profile.per_ap.iter().enumerate() {
        if j != i && set.contains(link) {
            total = total + cross_gain_mw(scenario, j, i)?;
        }
    }
    Ok(total)
}

/// Downlink rate of AP `i` under the joint profile:
/// the sum over its active links of `B·log2(1 + P/(I + N))`.
pub fn achieved_rate_bps<T: Real>(
    scenario: &Scenario<T>,
    profile: &ActivationProfile,
    i: usize,
) -> Result<T> {
    check_index(scenario, i)?;
    profile.check(scenario)?;
    let own = profile.per_ap[i];
    if own.is_empty() {
        return Err(Error::Contract(format!("AP {i} has no active link")));
    }
    let phys = &scenario.physical;
    let signal = cross_gain_mw(scenario, i, i)?;
    let noise = dbm_to_mw(phys.noise_floor_dbm);
    let mut rate = T::zero();
    for link in own.links() {
        let sinr = signal / (interference_mw(scenario, profile, i, link)? + noise);
        rate = rate + phys.bandwidth_hz_per_link * sinr.ln_1p() / T::LN_2();
    }
    Ok(rate)
}

/// Precomputed linear gains for one scenario.
///
/// Produces the same rates as [`achieved_rate_bps`] without re-evaluating
/// the pathloss model for every query; the engine uses it in its inner loop.
#[derive(Debug, Clone)]
pub struct LinkBudget<T = f64> {
    n: usize,
    k: usize,
    /// `gain[j * n + i]`: power in mW from AP `j` at STA `i`.
    gain: Vec<T>,
    noise_mw: T,
    bandwidth_hz: T,
}

impl<T: Real> LinkBudget<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        let n = scenario.num_aps();
        let mut gain = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                gain.push(cross_gain_mw(scenario, j, i)?);
            }
        }
        Ok(Self {
            n,
            k: scenario.num_links,
            gain,
            noise_mw: dbm_to_mw(scenario.physical.noise_floor_dbm),
            bandwidth_hz: scenario.physical.bandwidth_hz_per_link,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.n
    }

    pub fn num_links(&self) -> usize {
        self.k
    }

    pub fn received_mw(&self, from_ap: usize, at_sta: usize) -> T {
        self.gain[from_ap * self.n + at_sta]
    }

    pub fn rate_bps(&self, profile: &ActivationProfile, i: usize) -> T {
        let signal = self.received_mw(i, i);
        let mut rate = T::zero();
        for link in profile.per_ap[i].links() {
            let mut interference = T::zero();
            for (j, set) in profile.per_ap.iter().enumerate() {
                if j != i && set.contains(link) {
                    interference = interference + self.received_mw(j, i);
                }
            }
            let sinr = signal / (interference + self.noise_mw);
            rate = rate + self.bandwidth_hz * sinr.ln_1p() / T::LN_2();
        }
        rate
    }

    pub fn rates_bps(&self, profile: &ActivationProfile) -> Vec<T> {
        (0..self.n).map(|i| self.rate_bps(profile, i)).collect()
    }
}
