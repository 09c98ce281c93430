//! Simulation worlds: AP/STA placement and the physical constants that go
//! with them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio;
use crate::real::Real;

/// Largest supported link count; a [`crate::LinkSet`] is a 16-bit mask.
pub const MAX_LINKS: usize = 16;

/// Angle redraws allowed before giving up on placing a STA inside the area.
pub const MAX_ANGLE_REDRAWS: usize = 1000;

/// Channel and radio constants shared by every AP in a scenario.
///
/// Defaults are the residential 5 GHz TMB pathloss constants with 20 dBm
/// and 80 MHz per link, a -82 dBm coverage threshold and a -95 dBm noise
/// floor (thermal noise over 80 MHz with no noise figure).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhysicalConfig<T = f64> {
    pub pathloss_intercept_db: T,
    pub attenuation_factor: T,
    pub wall_attenuation_db_per_wall: T,
    pub walls_per_meter: T,
    pub tx_power_dbm: T,
    pub bandwidth_hz_per_link: T,
    pub noise_floor_dbm: T,
    pub sensitivity_dbm: T,
}

impl<T: Real> Default for PhysicalConfig<T> {
    fn default() -> Self {
        Self {
            pathloss_intercept_db: T::lit(54.12),
            attenuation_factor: T::lit(2.06067),
            wall_attenuation_db_per_wall: T::lit(5.25),
            walls_per_meter: T::lit(0.1467),
            tx_power_dbm: T::lit(20.0),
            bandwidth_hz_per_link: T::lit(80e6),
            noise_floor_dbm: T::lit(-95.0),
            sensitivity_dbm: T::lit(-82.0),
        }
    }
}

impl<T: Real> PhysicalConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.pathloss_intercept_db,
            self.attenuation_factor,
            self.wall_attenuation_db_per_wall,
            self.walls_per_meter,
            self.tx_power_dbm,
            self.bandwidth_hz_per_link,
            self.noise_floor_dbm,
            self.sensitivity_dbm,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("physical constants must be finite"));
        }
        if self.bandwidth_hz_per_link <= T::zero() {
            return Err(Error::config("bandwidth_hz_per_link must be > 0"));
        }
        if self.sensitivity_dbm <= self.noise_floor_dbm {
            return Err(Error::config("sensitivity_dbm must exceed noise_floor_dbm"));
        }
        Ok(())
    }
}

/// A 2-D position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]", bound = "T: Real")]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn inside(&self, side: T) -> bool {
        let z = T::zero();
        self.x >= z && self.y >= z && self.x <= side && self.y <= side
    }
}

impl<T> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}

/// A sampled world: `n` AP/STA pairs in a square area, STA `i` served by AP `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scenario<T = f64> {
    pub area_side_m: T,
    pub ap_positions: Vec<Point<T>>,
    pub sta_positions: Vec<Point<T>>,
    pub ap_sta_distance_m: T,
    pub num_links: usize,
    pub physical: PhysicalConfig<T>,
}

fn positive<T: Real>(v: T) -> bool {
    v.partial_cmp(&T::zero()) == Some(std::cmp::Ordering::Greater)
}

fn distance_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(16.0))
}

impl<T: Real> Scenario<T> {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    /// Checks every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        let n = self.ap_positions.len();
        if n == 0 {
            return Err(Error::config("scenario needs at least one AP"));
        }
        if self.sta_positions.len() != n {
            return Err(Error::config(format!(
                "{} APs but {} STAs",
                n,
                self.sta_positions.len()
            )));
        }
        if !(1..=MAX_LINKS).contains(&self.num_links) {
            return Err(Error::config(format!(
                "num_links must be in 1..={MAX_LINKS}, got {}",
                self.num_links
            )));
        }
        if !positive(self.area_side_m) || !positive(self.ap_sta_distance_m) {
            return Err(Error::config("area side and AP-STA distance must be > 0"));
        }
        let tol = distance_tolerance::<T>();
        for (i, (ap, sta)) in self.ap_positions.iter().zip(&self.sta_positions).enumerate() {
            if !ap.inside(self.area_side_m) || !sta.inside(self.area_side_m) {
                return Err(Error::Geometry(format!("pair {i} lies outside the area")));
            }
            let d = ap.distance(sta);
            if ((d - self.ap_sta_distance_m) / self.ap_sta_distance_m).abs() > tol {
                return Err(Error::Geometry(format!(
                    "pair {i} is {d} m apart, expected {}",
                    self.ap_sta_distance_m
                )));
            }
        }
        Ok(())
    }

    /// APs whose signal reaches AP `i` at or above the sensitivity threshold.
    ///
    /// Uses the AP-to-AP distance at full transmit power, so the relation is
    /// symmetric. Co-located APs are always neighbours.
    pub fn neighbors_of(&self, i: usize) -> Result<Vec<usize>> {
        let n = self.num_aps();
        if i >= n {
            return Err(Error::config(format!("AP index {i} out of range for {n} APs")));
        }
        let me = self.ap_positions[i];
        let mut out = Vec::new();
        for (j, other) in self.ap_positions.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = me.distance(other);
            let covered = if d > T::zero() {
                radio::received_power_dbm(self.physical.tx_power_dbm, d, &self.physical)?
                    >= self.physical.sensitivity_dbm
            } else {
                true
            };
            if covered {
                out.push(j);
            }
        }
        Ok(out)
    }

    pub fn neighbor_sets(&self) -> Result<Vec<Vec<usize>>> {
        (0..self.num_aps()).map(|i| self.neighbors_of(i)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Samples a world with `n` APs placed uniformly in a square of side
/// `area_side_m`, each STA at distance `d` from its AP at a uniform angle.
/// Angles that put the STA outside the square are redrawn.
pub fn sample_scenario<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    area_side_m: T,
    d: T,
    physical: PhysicalConfig<T>,
) -> Result<Scenario<T>> {
    if n == 0 {
        return Err(Error::config("n must be >= 1"));
    }
    if !(1..=MAX_LINKS).contains(&k) {
        return Err(Error::config(format!("k must be in 1..={MAX_LINKS}, got {k}")));
    }
    if !positive(area_side_m) || !area_side_m.is_finite() {
        return Err(Error::config("area side must be a positive finite length"));
    }
    if !positive(d) || d >= area_side_m {
        return Err(Error::config(format!(
            "AP-STA distance must satisfy 0 < d < area side, got {d}"
        )));
    }
    physical.validate()?;

    let side = area_side_m.as_f64();
    let mut ap_positions = Vec::with_capacity(n);
    let mut sta_positions = Vec::with_capacity(n);
    for _ in 0..n {
        let ap = Point::new(
            T::lit(rng.gen::<f64>() * side),
            T::lit(rng.gen::<f64>() * side),
        );
        ap_positions.push(ap);
    }
    for (i, ap) in ap_positions.iter().enumerate() {
        let mut placed = None;
        for _ in 0..MAX_ANGLE_REDRAWS {
            let theta = T::lit(rng.gen_range(0.0..std::f64::consts::TAU));
            let sta = Point::new(ap.x + d * theta.cos(), ap.y + d * theta.sin());
            if sta.inside(area_side_m) {
                placed = Some(sta);
                break;
            }
        }
        match placed {
            Some(sta) => sta_positions.push(sta),
            None => {
                return Err(Error::Geometry(format!(
                    "no in-bounds STA position for AP {i} after {MAX_ANGLE_REDRAWS} angle draws"
                )))
            }
        }
    }

    Ok(Scenario {
        area_side_m,
        ap_positions,
        sta_positions,
        ap_sta_distance_m: d,
        num_links: k,
        physical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    fn two_aps(gap: f64) -> Scenario {
        Scenario {
            area_side_m: 5000.0,
            ap_positions: vec![Point::new(10.0, 10.0), Point::new(10.0 + gap, 10.0)],
            sta_positions: vec![Point::new(10.0, 20.0), Point::new(10.0 + gap, 20.0)],
            ap_sta_distance_m: 10.0,
            num_links: 4,
            physical: PhysicalConfig::default(),
        }
    }

    #[test]
    fn paper_layout_pairs_are_ten_meters_apart() {
        let mut rng = seed::stream(1);
        let sc: Scenario = sample_scenario(&mut rng, 8, 4, 100.0, 10.0, PhysicalConfig::default()).unwrap();
        assert_eq!(sc.num_aps(), 8);
        assert_eq!(sc.sta_positions.len(), 8);
        for (ap, sta) in sc.ap_positions.iter().zip(&sc.sta_positions) {
            assert!((ap.distance(sta) - 10.0).abs() <= 1e-9 * 10.0);
        }
        sc.validate().unwrap();
    }

    #[test]
    fn zero_distance_rejected_single_pair_ok() {
        let mut rng = seed::stream(1);
        let err = sample_scenario::<f64, _>(&mut rng, 1, 1, 100.0, 0.0, PhysicalConfig::default());
        assert!(matches!(err, Err(Error::Config(_))));
        let sc: Scenario = sample_scenario(&mut rng, 1, 1, 100.0, 10.0, PhysicalConfig::default()).unwrap();
        assert_eq!(sc.num_aps(), 1);
        assert!(sc.neighbors_of(0).unwrap().is_empty());
    }

    #[test]
    fn bad_preconditions() {
        let mut rng = seed::stream(1);
        let p = PhysicalConfig::default();
        assert!(sample_scenario(&mut rng, 0, 4, 100.0, 10.0, p).is_err());
        assert!(sample_scenario(&mut rng, 2, 0, 100.0, 10.0, p).is_err());
        assert!(sample_scenario(&mut rng, 2, 17, 100.0, 10.0, p).is_err());
        assert!(sample_scenario(&mut rng, 2, 4, 100.0, 100.0, p).is_err());
        let bad = PhysicalConfig { sensitivity_dbm: -100.0, ..p };
        assert!(sample_scenario(&mut rng, 2, 4, 100.0, 10.0, bad).is_err());
        let bad = PhysicalConfig { bandwidth_hz_per_link: 0.0, ..p };
        assert!(sample_scenario(&mut rng, 2, 4, 100.0, 10.0, bad).is_err());
    }

    #[test]
    fn same_seed_same_world() {
        let p = PhysicalConfig::default();
        let a: Scenario = sample_scenario(&mut seed::stream(42), 8, 4, 100.0, 10.0, p).unwrap();
        let b: Scenario = sample_scenario(&mut seed::stream(42), 8, 4, 100.0, 10.0, p).unwrap();
        for (x, y) in a.ap_positions.iter().zip(&b.ap_positions) {
            assert_eq!(x.x.to_bits(), y.x.to_bits());
            assert_eq!(x.y.to_bits(), y.y.to_bits());
        }
        assert_eq!(a, b);
    }

    #[test]
    fn neighbors_close_and_far() {
        let close = two_aps(5.0);
        assert_eq!(close.neighbors_of(0).unwrap(), vec![1]);
        assert_eq!(close.neighbors_of(1).unwrap(), vec![0]);
        let far = two_aps(4000.0);
        assert!(far.neighbors_of(0).unwrap().is_empty());
        assert!(far.neighbors_of(1).unwrap().is_empty());
        assert!(close.neighbors_of(2).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let sc = two_aps(5.0);
        let text = sc.to_json().unwrap();
        assert!(text.contains("\"sensitivity_dbm\""));
        assert!(text.contains("[\n      10.0,\n      10.0\n    ]") || text.contains("[10.0,10.0]"));
        assert_eq!(Scenario::from_json(&text).unwrap(), sc);

        let mut broken = sc.clone();
        broken.sta_positions[0] = Point::new(10.0, 21.0);
        let text = serde_json::to_string(&broken).unwrap();
        assert!(matches!(Scenario::<f64>::from_json(&text), Err(Error::Geometry(_))));
    }

    #[test]
    fn f32_worlds_sample_and_validate() {
        let sc = sample_scenario::<f32, _>(
            &mut seed::stream(3),
            8,
            4,
            100.0,
            10.0,
            PhysicalConfig::default(),
        )
        .unwrap();
        sc.validate().unwrap();
    }

    proptest! {
        #[test]
        fn sampled_worlds_hold_invariants(seed in any::<u64>(), n in 1usize..20, d in 1.0f64..45.0) {
            let sc: Scenario = sample_scenario(&mut seed::stream(seed), n, 4, 100.0, d, PhysicalConfig::default()).unwrap();
            prop_assert!(sc.validate().is_ok());
            let sets = sc.neighbor_sets().unwrap();
            for (i, set) in sets.iter().enumerate() {
                prop_assert!(!set.contains(&i));
                for &j in set {
                    prop_assert!(sets[j].contains(&i));
                }
            }
        }
    }
}
