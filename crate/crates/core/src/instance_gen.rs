//! Synthetic fulfillment instances over a US-style geography.
//!
//! Regions and FCs come from CSV files (bundled copies are used by
//! default). Order types are random item subsets, demand is split randomly
//! across sizes and types and then by population across regions, and each
//! FC stocks a newsvendor quantity of the items it carries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fulfillment::{FulfillmentInstance, OrderType};
use crate::RandomStream;

pub const EARTH_RADIUS_MILES: f64 = 3958.8;
pub const FIXED_COST: f64 = 8.759;
pub const UNIT_COST_BASE: f64 = 0.423;
pub const UNIT_COST_PER_MILE: f64 = 0.000541;

const BUNDLED_METROS: &str = include_str!("../data/metros.csv");
const BUNDLED_FCS: &str = include_str!("../data/fcs.csv");

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("order size {size} exceeds the {items} items available")]
    SizeImpossible { size: usize, items: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("requested {wanted} {what}, only {available} available")]
    NotEnoughSites {
        what: &'static str,
        wanted: usize,
        available: usize,
    },
    #[error("bad geography data: {0}")]
    Data(#[from] csv::Error),
}

/// Great-circle distance in miles between two `(lat, lon)` points in degrees.
pub fn haversine(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lat1, lon1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lat2, lon2) = (p2.0.to_radians(), p2.1.to_radians());
    let a = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * a.sqrt().min(1.0).asin()
}

pub fn unit_cost(dist: f64) -> f64 {
    UNIT_COST_BASE + UNIT_COST_PER_MILE * dist
}

pub fn fixed_cost() -> f64 {
    FIXED_COST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Regions, FCs and the `K x J` distance matrix between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Geography {
    pub regions: Vec<Region>,
    pub fcs: Vec<Site>,
    pub dist: Vec<Vec<f64>>,
}

impl Geography {
    pub fn new(regions: Vec<Region>, fcs: Vec<Site>) -> Self {
        let dist = fcs
            .iter()
            .map(|f| regions.iter().map(|r| haversine((f.lat, f.lon), (r.lat, r.lon))).collect())
            .collect();
        Self { regions, fcs, dist }
    }

    /// Reads `name,lat,lon,population` and `name,lat,lon` CSV text.
    pub fn from_csv(regions: &str, fcs: &str) -> Result<Self, GeneratorError> {
        let regions = csv::Reader::from_reader(regions.as_bytes())
            .deserialize()
            .collect::<Result<Vec<Region>, _>>()?;
        let fcs = csv::Reader::from_reader(fcs.as_bytes())
            .deserialize()
            .collect::<Result<Vec<Site>, _>>()?;
        Ok(Self::new(regions, fcs))
    }

    /// The bundled 99 metro areas and 10 FC sites.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_METROS, BUNDLED_FCS).expect("bundled data parses")
    }

    /// The `regions` most populous regions and the first `fcs` FCs, in file
    /// order.
    pub fn select(&self, regions: usize, fcs: usize) -> Result<Self, GeneratorError> {
        if regions > self.regions.len() {
            return Err(GeneratorError::NotEnoughSites {
                what: "regions",
                wanted: regions,
                available: self.regions.len(),
            });
        }
        if fcs > self.fcs.len() {
            return Err(GeneratorError::NotEnoughSites {
                what: "FCs",
                wanted: fcs,
                available: self.fcs.len(),
            });
        }
        let mut order: Vec<usize> = (0..self.regions.len()).collect();
        order.sort_by(|&a, &b| {
            self.regions[b].population.total_cmp(&self.regions[a].population).then(a.cmp(&b))
        });
        let picked = order[..regions].iter().map(|&j| self.regions[j].clone()).collect();
        Ok(Self::new(picked, self.fcs[..fcs].to_vec()))
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().flatten().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Items in the universe.
    pub n: usize,
    /// Largest order size.
    pub n_max: usize,
    /// Order types per size.
    pub n_per: usize,
    pub p_carry: f64,
    #[serde(default = "default_z_safety")]
    pub z_safety: f64,
    /// Horizon in time steps.
    pub horizon: u64,
    pub regions: usize,
    pub fcs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shortage: ShortageCost,
}

/// How an unfulfilled item is charged. Both use twice the largest
/// FC-to-region distance in the unit-cost formula.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortageCost {
    /// The item is charged like a single-item box: `c_fixed + c_unit(2 d_max)`.
    /// Shortage is then never cheaper than shipping from any FC.
    #[default]
    Box,
    /// Only `c_unit(2 d_max)`. This is below the box fee, so the LP prefers
    /// shortage to shipping and the benchmark degenerates.
    UnitOnly,
}

impl ShortageCost {
    pub fn per_item(self, max_distance: f64) -> f64 {
        let unit = unit_cost(2.0 * max_distance);
        match self {
            ShortageCost::Box => fixed_cost() + unit,
            ShortageCost::UnitOnly => unit,
        }
    }
}

fn default_z_safety() -> f64 {
    0.5
}

impl GeneratorConfig {
    /// The smaller network at desk scale: 10 regions, 5 FCs, 20 items,
    /// `T = 10^4`.
    pub fn small_network(n_max: usize, seed: u64) -> Self {
        Self {
            n: 20,
            n_max,
            n_per: 5,
            p_carry: 0.75,
            z_safety: 0.5,
            horizon: 10_000,
            regions: 10,
            fcs: 5,
            seed,
            shortage: ShortageCost::Box,
        }
    }

    /// The bigger network: 99 regions, 10 FCs, 100 items.
    pub fn big_network(p_carry: f64, horizon: u64, seed: u64) -> Self {
        Self {
            n: 100,
            n_max: 10,
            n_per: 10,
            p_carry,
            z_safety: 0.5,
            horizon,
            regions: 99,
            fcs: 10,
            seed,
            shortage: ShortageCost::Box,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(m.to_string()));
        if self.n == 0 || self.n_max == 0 || self.n_per == 0 {
            return bad("n, n_max and n_per must be positive");
        }
        if self.n_max > self.n {
            return Err(GeneratorError::SizeImpossible {
                size: self.n_max,
                items: self.n,
            });
        }
        if !(self.p_carry > 0.0 && self.p_carry <= 1.0) {
            return bad("p_carry must lie in (0, 1]");
        }
        if !(self.z_safety >= 0.0 && self.z_safety.is_finite()) {
            return bad("z_safety must be nonnegative");
        }
        if self.regions == 0 || self.fcs == 0 || self.horizon == 0 {
            return bad("regions, fcs and horizon must be positive");
        }
        Ok(())
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, GeneratorError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| GeneratorError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| GeneratorError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_types(&self) -> usize {
        1 + self.n_max * self.n_per
    }
}

/// Order types as sorted item lists; entry 0 is the empty type (no
/// arrival), followed by `n_per` types of each size `1..=n_max`.
pub fn gen_order_types(cfg: &GeneratorConfig, rng: &mut RandomStream) -> Result<Vec<Vec<usize>>, GeneratorError> {
    if cfg.n_max > cfg.n {
        return Err(GeneratorError::SizeImpossible {
            size: cfg.n_max,
            items: cfg.n,
        });
    }
    let mut types = Vec::with_capacity(cfg.num_types());
    types.push(Vec::new());
    for size in 1..=cfg.n_max {
        for _ in 0..cfg.n_per {
            let mut a = rng.sample_without_replacement(cfg.n, size);
            a.sort_unstable();
            types.push(a);
        }
    }
    Ok(types)
}

/// Uniform draw from the probability simplex of dimension `len`.
fn dirichlet(len: usize, rng: &mut RandomStream) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| rng.exponential(1.0)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// `rates[a][j]`: probability that type `a` arrives from region `j` in a
/// step. Mass is split uniformly at random over sizes, then over the types
/// of each size, then by population over regions.
pub fn gen_demand_rates(types: &[Vec<usize>], geo: &Geography, rng: &mut RandomStream) -> Vec<Vec<f64>> {
    let max_size = types.iter().map(Vec::len).max().unwrap_or(0);
    let mut by_size: Vec<Vec<usize>> = vec![Vec::new(); max_size + 1];
    for (a, t) in types.iter().enumerate() {
        by_size[t.len()].push(a);
    }
    let sizes: Vec<usize> = (0..=max_size).filter(|&s| !by_size[s].is_empty()).collect();
    let size_mass = dirichlet(sizes.len(), rng);
    let mut type_mass = vec![0.0; types.len()];
    for (&s, &mass) in sizes.iter().zip(&size_mass) {
        let split = dirichlet(by_size[s].len(), rng);
        for (&a, w) in by_size[s].iter().zip(split) {
            type_mass[a] = mass * w;
        }
    }
    let pop: f64 = geo.regions.iter().map(|r| r.population).sum();
    type_mass
        .iter()
        .map(|&m| geo.regions.iter().map(|r| m * r.population / pop).collect())
        .collect()
}

/// Carrying decisions and the demand each FC is expected to absorb.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandProfile {
    /// `carries[k][i]`.
    pub carries: Vec<Vec<bool>>,
    /// `closest[i][j]`: nearest FC carrying item `i` to region `j`.
    pub closest: Vec<Vec<Option<usize>>>,
    /// `dem[k][i]`: per-step probability that an order for item `i` is
    /// attributed to FC `k`.
    pub dem: Vec<Vec<f64>>,
}

impl DemandProfile {
    /// Items no FC carries.
    pub fn orphans(&self) -> Vec<usize> {
        (0..self.closest.len())
            .filter(|&i| self.closest[i].iter().all(Option::is_none))
            .collect()
    }
}

/// Draws carrying decisions (FC-major order) and attributes every item's
/// demand from each region to the closest carrying FC, ties to the lowest
/// index.
pub fn gen_demand_profile(
    cfg: &GeneratorConfig,
    types: &[Vec<usize>],
    rates: &[Vec<f64>],
    geo: &Geography,
    rng: &mut RandomStream,
) -> DemandProfile {
    let k_n = geo.fcs.len();
    let j_n = geo.regions.len();
    let carries: Vec<Vec<bool>> = (0..k_n)
        .map(|_| (0..cfg.n).map(|_| rng.bernoulli(cfg.p_carry)).collect())
        .collect();
    let closest: Vec<Vec<Option<usize>>> = (0..cfg.n)
        .map(|i| {
            (0..j_n)
                .map(|j| {
                    (0..k_n)
                        .filter(|&k| carries[k][i])
                        .min_by(|&a, &b| geo.dist[a][j].total_cmp(&geo.dist[b][j]).then(a.cmp(&b)))
                })
                .collect()
        })
        .collect();
    let mut dem = vec![vec![0.0; cfg.n]; k_n];
    for (a, items) in types.iter().enumerate() {
        for &i in items {
            for (j, &rate) in rates[a].iter().enumerate() {
                if let Some(k) = closest[i][j] {
                    dem[k][i] += rate;
                }
            }
        }
    }
    DemandProfile { carries, closest, dem }
}

/// Newsvendor stock `ceil(T dem + z sqrt(T dem (1 - dem)))` per FC and
/// item; zero where the FC does not carry the item.
pub fn gen_inventory(cfg: &GeneratorConfig, profile: &DemandProfile) -> Vec<Vec<u64>> {
    let t = cfg.horizon as f64;
    let inventory = profile
        .dem
        .iter()
        .zip(&profile.carries)
        .map(|(dems, carries)| {
            dems.iter()
                .zip(carries)
                .map(|(&d, &c)| if c { newsvendor(t, d, cfg.z_safety) } else { 0 })
                .collect()
        })
        .collect();
    for i in profile.orphans() {
        log::warn!("item {i} is carried by no FC; all of its demand goes unfulfilled");
    }
    inventory
}

/// `ceil(T d + z sqrt(T d (1 - d)))`, ignoring round-off just above an
/// integer.
pub fn newsvendor(horizon: f64, dem: f64, z: f64) -> u64 {
    let mean = horizon * dem;
    let target = mean + z * (mean * (1.0 - dem)).max(0.0).sqrt();
    (target - 1e-9).ceil().max(0.0) as u64
}

/// A generated instance with the intermediate draws kept for inspection.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: FulfillmentInstance,
    pub types: Vec<Vec<usize>>,
    pub rates: Vec<Vec<f64>>,
    pub profile: DemandProfile,
    pub orphans: Vec<usize>,
}

/// Generates a full instance from `cfg`, selecting the most populous
/// `cfg.regions` regions and the first `cfg.fcs` FCs of `geo`. Randomness
/// comes from `rng` in the order: types, rates, carrying.
pub fn build_instance(
    cfg: &GeneratorConfig,
    geo: &Geography,
    rng: &mut RandomStream,
) -> Result<GeneratedInstance, GeneratorError> {
    cfg.validate()?;
    let geo = geo.select(cfg.regions, cfg.fcs)?;
    let types = gen_order_types(cfg, rng)?;
    let rates = gen_demand_rates(&types, &geo, rng);
    let profile = gen_demand_profile(cfg, &types, &rates, &geo, rng);
    let inventory = gen_inventory(cfg, &profile);
    let orphans = profile.orphans();

    let shortage = cfg.shortage.per_item(geo.max_distance());
    let mut unit = vec![vec![vec![shortage; cfg.regions]; cfg.n]];
    let mut fixed = vec![vec![0.0; cfg.regions]];
    for k in 0..cfg.fcs {
        let per_region: Vec<f64> = geo.dist[k].iter().map(|&d| unit_cost(d)).collect();
        unit.push(vec![per_region; cfg.n]);
        fixed.push(vec![fixed_cost(); cfg.regions]);
    }
    let orders = types
        .iter()
        .zip(&rates)
        .filter(|(t, _)| !t.is_empty())
        .flat_map(|(t, per_region)| {
            per_region.iter().enumerate().map(move |(region, &rate)| OrderType {
                items: t.clone(),
                region,
                rate,
            })
        })
        .collect();
    let instance = FulfillmentInstance {
        label: format!("gen-{}", cfg.seed),
        items: cfg.n,
        fcs: cfg.fcs,
        regions: cfg.regions,
        horizon: cfg.horizon,
        orders,
        unit_cost: unit,
        fixed_cost: fixed,
        inventory,
    };
    Ok(GeneratedInstance {
        instance,
        types,
        rates,
        profile,
        orphans,
    })
}

/// [`build_instance`] on the bundled geography with a stream seeded from
/// `cfg.seed`.
pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedInstance, GeneratorError> {
    build_instance(cfg, &Geography::bundled(), &mut RandomStream::new(cfg.seed))
}
