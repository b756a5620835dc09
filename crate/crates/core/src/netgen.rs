//! Network generators: the two hand-specified fixtures and random spatial
//! sector networks with directional relay antennas.
//!
//! Geometry: the base station sits at the origin and the sector is centred
//! on the positive x axis. Every relay carries a receive antenna pointing
//! back at the base station and a transmit antenna pointing away from it.
//! A link `b -> a` exists when `b` lies in the receive cone of `a` and `a`
//! lies in the transmit cone of `b`, which forces `|a| > |b|`, so the
//! resulting graph has no cycles.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Topology;

/// Hand-specified networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// One layer of four relays, two receivers, all gains one.
    Fig3,
    /// Two layers of five relays, three receivers.
    Fig5,
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig3" => Ok(Fixture::Fig3),
            "fig5" => Ok(Fixture::Fig5),
            other => Err(Error::Config(format!("unknown fixture `{other}`"))),
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fixture::Fig3 => "fig3",
            Fixture::Fig5 => "fig5",
        })
    }
}

pub fn fixture(which: Fixture) -> Topology {
    match which {
        Fixture::Fig3 => {
            let mut t = Topology::zeros(&[4], 2);
            t.bs_gains[0] = vec![1.0; 4];
            t.rx_gains[0][0] = vec![1.0, 1.0, 0.0, 0.0];
            t.rx_gains[0][1] = vec![0.0, 0.0, 1.0, 1.0];
            t
        }
        Fixture::Fig5 => {
            let mut t = Topology::zeros(&[5, 5], 3);
            t.bs_gains[0] = vec![1.0; 5];
            t.relay_gains[1][0] = vec![
                vec![1.0, -0.5, -1.0, -0.5, 1.0],
                vec![-0.5, 1.0, -0.5, 1.0, -0.5],
                vec![-1.0, -0.5, 1.0, -0.5, -1.0],
                vec![-0.5, 1.0, -0.5, 1.0, -0.5],
                vec![1.0, -0.5, -1.0, -0.5, 1.0],
            ];
            t.rx_gains[1][0] = vec![4.0, -1.0, 0.0, 0.0, 1.0];
            t.rx_gains[1][1] = vec![0.0, 1.0, 4.0, -1.0, 0.0];
            t.rx_gains[1][2] = vec![-1.0, 0.0, 0.0, 1.0, 4.0];
            t
        }
    }
}

fn default_radius() -> f64 {
    100.0
}
fn default_sector() -> f64 {
    60.0
}
fn default_alpha() -> f64 {
    4.0
}
fn default_antenna_width() -> f64 {
    90.0
}
fn default_min_distance() -> f64 {
    1.0
}

/// How the path-loss exponent enters a link gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainLaw {
    /// Received power falls as `r^-alpha`: amplitude gain `r^(-alpha/2) v`.
    /// A unit-power transmitter at the cell radius then sees an SNR of
    /// `R^-alpha / sigma^2`.
    #[default]
    Power,
    /// Amplitude gain `r^-alpha v` (received power `r^(-2 alpha)`).
    Amplitude,
}

impl GainLaw {
    pub fn amplitude(self, r: f64, alpha: f64) -> f64 {
        match self {
            GainLaw::Power => r.powf(-alpha / 2.0),
            GainLaw::Amplitude => r.powf(-alpha),
        }
    }
}

/// Random sector network parameters. Angles are in degrees, lengths in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub relays: usize,
    pub receivers: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_sector")]
    pub sector: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_antenna_width")]
    pub antenna_width: f64,
    /// Receiver bearings. When absent the receivers divide the sector arc
    /// into equal parts (cell centres of `receivers` equal slices).
    #[serde(default)]
    pub receiver_angles: Option<Vec<f64>>,
    /// Link lengths are clamped to at least this value before path loss.
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
    #[serde(default)]
    pub gain_law: GainLaw,
    #[serde(default)]
    pub seed: u64,
}

impl SpatialConfig {
    pub fn new(relays: usize, receivers: usize, seed: u64) -> Self {
        Self {
            relays,
            receivers,
            radius: default_radius(),
            sector: default_sector(),
            alpha: default_alpha(),
            antenna_width: default_antenna_width(),
            receiver_angles: None,
            min_distance: default_min_distance(),
            gain_law: GainLaw::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Config("radius must be positive".into()));
        }
        if !(self.sector > 0.0 && self.sector <= 360.0) {
            return Err(Error::Config("sector must lie in (0, 360] degrees".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("path-loss exponent must be positive".into()));
        }
        if !(self.antenna_width > 0.0 && self.antenna_width <= 360.0) {
            return Err(Error::Config(
                "antenna width must lie in (0, 360] degrees".into(),
            ));
        }
        if !(self.min_distance > 0.0) {
            return Err(Error::Config(
                "minimum link distance must be positive".into(),
            ));
        }
        if self.receivers == 0 {
            return Err(Error::Config("at least one receiver is required".into()));
        }
        if let Some(angles) = &self.receiver_angles {
            if angles.len() != self.receivers {
                return Err(Error::Config(format!(
                    "{} receiver angles given for {} receivers",
                    angles.len(),
                    self.receivers
                )));
            }
        }
        Ok(())
    }

    /// Noise variance that gives the requested cell-edge SNR (in dB): the
    /// received power of a unit-power transmitter at the cell radius over
    /// the noise variance.
    pub fn sigma2_for_cell_edge_snr(&self, snr_db: f64) -> f64 {
        self.gain_law.amplitude(self.radius, self.alpha).powi(2) / 10f64.powf(snr_db / 10.0)
    }

    fn receiver_bearings(&self) -> Vec<f64> {
        match &self.receiver_angles {
            Some(a) => a.clone(),
            None => (0..self.receivers)
                .map(|m| self.sector * ((m as f64 + 0.5) / self.receivers as f64 - 0.5))
                .collect(),
        }
    }
}

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub bs: Point,
    pub relays: Vec<Point>,
    pub receivers: Vec<Point>,
}

/// Relays uniform over the sector area, receivers on the arc.
pub fn sample_placement(config: &SpatialConfig) -> Result<Placement> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = config.sector.to_radians() / 2.0;
    let relays = (0..config.relays)
        .map(|_| {
            let r = config.radius * rng.random::<f64>().sqrt();
            let theta = rng.random_range(-half..=half);
            [r * theta.cos(), r * theta.sin()]
        })
        .collect();
    let receivers = config
        .receiver_bearings()
        .into_iter()
        .map(|deg| {
            let t = deg.to_radians();
            [config.radius * t.cos(), config.radius * t.sin()]
        })
        .collect();
    Ok(Placement {
        bs: [0.0, 0.0],
        relays,
        receivers,
    })
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Closed cone test: is `target` within `half_width` of direction `axis`
/// as seen from `apex`?
fn in_cone(apex: Point, axis: Point, target: Point, cos_half: f64) -> bool {
    let v = sub(target, apex);
    let (nv, na) = (norm(v), norm(axis));
    if nv == 0.0 || na == 0.0 {
        return false;
    }
    let c = (v[0] * axis[0] + v[1] * axis[1]) / (nv * na);
    c >= cos_half - 1e-12
}

/// A generated network together with the relay bookkeeping needed to map
/// back to placement indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialNetwork {
    pub topology: Topology,
    /// Layer (zero-based) of every placed relay.
    pub layer_of: Vec<usize>,
    /// Placement index of every relay, in global (layer-major) order.
    pub order: Vec<usize>,
}

/// Relay-to-relay links as `(from, to)` placement indices.
pub fn relay_links(placement: &Placement, config: &SpatialConfig) -> Vec<(usize, usize)> {
    let cos_half = (config.antenna_width.to_radians() / 2.0).cos();
    let p = &placement.relays;
    let bs = placement.bs;
    let hears = |b: usize, a: usize| {
        in_cone(p[a], sub(bs, p[a]), p[b], cos_half) && in_cone(p[b], sub(p[b], bs), p[a], cos_half)
    };
    let mut links = Vec::new();
    for a in 0..p.len() {
        for b in 0..p.len() {
            if a == b || !hears(b, a) {
                continue;
            }
            if hears(a, b) {
                // Degenerate boundary case: keep only the link leaving the
                // relay nearer the base station.
                let (da, db) = (norm(sub(p[a], bs)), norm(sub(p[b], bs)));
                if (db, b) > (da, a) {
                    continue;
                }
            }
            links.push((b, a));
        }
    }
    links
}

/// Longest-path depth of every node; errors if the links contain a cycle.
pub fn longest_path_layers(nodes: usize, links: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; nodes];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for &(b, a) in links {
        indegree[a] += 1;
        out[b].push(a);
    }
    let mut depth = vec![0usize; nodes];
    let mut ready: Vec<usize> = (0..nodes).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &a in &out[v] {
            depth[a] = depth[a].max(depth[v] + 1);
            indegree[a] -= 1;
            if indegree[a] == 0 {
                ready.push(a);
            }
        }
    }
    if seen != nodes {
        return Err(Error::Internal("relay links contain a cycle".into()));
    }
    Ok(depth)
}

/// Builds the layered topology with fading gains `a(r) * v`, `a` given by
/// the configured [`GainLaw`].
///
/// Fading draws come from one stream seeded by `fading_seed`, consumed in a
/// fixed order: base station links by relay, relay links by `(to, from)`,
/// then relay to receiver links by `(relay, receiver)`.
pub fn connect(
    placement: &Placement,
    config: &SpatialConfig,
    fading_seed: u64,
) -> Result<SpatialNetwork> {
    config.validate()?;
    let n = placement.relays.len();
    let m = placement.receivers.len();
    let links = relay_links(placement, config);
    let layer_of = longest_path_layers(n, &links)?;
    let depth = layer_of.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&j| (layer_of[j], j));
    let mut sizes = vec![0usize; depth];
    let mut slot = vec![0usize; n];
    for &j in &order {
        slot[j] = sizes[layer_of[j]];
        sizes[layer_of[j]] += 1;
    }

    let cos_half = (config.antenna_width.to_radians() / 2.0).cos();
    let mut rng = ChaCha8Rng::seed_from_u64(fading_seed);
    let mut gain = |from: Point, to: Point| {
        let r = norm(sub(to, from)).max(config.min_distance);
        let v: f64 = rng.sample(StandardNormal);
        config.gain_law.amplitude(r, config.alpha) * v
    };

    let mut topology = Topology::zeros(&sizes, m);
    for j in 0..n {
        topology.bs_gains[layer_of[j]][slot[j]] = gain(placement.bs, placement.relays[j]);
    }
    let mut sorted = links.clone();
    sorted.sort_by_key(|&(b, a)| (a, b));
    for (b, a) in sorted {
        let g = gain(placement.relays[b], placement.relays[a]);
        topology.relay_gains[layer_of[a]][layer_of[b]][slot[a]][slot[b]] = g;
    }
    for j in 0..n {
        let pj = placement.relays[j];
        for (mm, &rx) in placement.receivers.iter().enumerate() {
            if in_cone(pj, sub(pj, placement.bs), rx, cos_half) {
                topology.rx_gains[layer_of[j]][mm][slot[j]] = gain(pj, rx);
            }
        }
    }
    Ok(SpatialNetwork {
        topology,
        layer_of,
        order,
    })
}

/// The no-relay reference: only a direct base-station link to each receiver.
pub fn reference_topology(
    placement: &Placement,
    config: &SpatialConfig,
    fading_seed: u64,
) -> Result<Topology> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(fading_seed);
    let direct = placement
        .receivers
        .iter()
        .map(|&rx| {
            let r = norm(sub(rx, placement.bs)).max(config.min_distance);
            let v: f64 = rng.sample(StandardNormal);
            config.gain_law.amplitude(r, config.alpha) * v
        })
        .collect();
    let mut t = Topology::zeros(&[], placement.receivers.len());
    t.direct_gains = Some(direct);
    Ok(t)
}

/// Placement and fading in one call; the fading seed is derived from the
/// placement seed.
pub fn generate(config: &SpatialConfig) -> Result<(Placement, SpatialNetwork)> {
    let placement = sample_placement(config)?;
    let net = connect(&placement, config, fading_seed(config.seed))?;
    Ok((placement, net))
}

/// Fading seed paired with a placement seed.
pub fn fading_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}
