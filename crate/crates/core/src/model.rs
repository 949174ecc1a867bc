//! Scenario configuration, unit conversions and grid geometry.
//!
//! Nodes live on the square `[-a, a]²` with the base station at the origin.
//! Powers are carried in dBm on the configuration boundary and converted to
//! linear milliwatts before any link arithmetic.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linkprob::LinearPowers;

/// Path-loss exponent used when a scenario does not set one.
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 3.0;

/// Slack added before flooring expected counts such as `N·p`, so that
/// products like `150 × 0.7 = 104.999…` floor to the intended integer.
const FLOOR_SLACK: f64 = 1e-9;

/// A point on the deployment square, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance to the base station at the origin.
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    ClusterHead,
    Member,
}

impl Role {
    pub fn is_cluster_head(self) -> bool {
        matches!(self, Role::ClusterHead)
    }
}

/// A validated scenario. Half-width and density are always mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_nodes: usize,
    pub ch_probability: f64,
    /// Half-width `a` of the deployment square, meters.
    pub grid_half_width: f64,
    /// Nodes per square meter.
    pub node_density: f64,
    pub p_tx_node_dbm: f64,
    pub p_tx_bs_dbm: f64,
    pub p_threshold_dbm: f64,
    pub path_loss_exponent: f64,
}

impl NetworkConfig {
    /// Reference scenario: 150 nodes at one node per m², 23 dBm nodes, 46 dBm
    /// base station, −111 dBm threshold. CH probability 0.2 and α = 3 are
    /// defaults of this crate, not reference values.
    pub fn reference() -> Self {
        let n_nodes = 150;
        let node_density = 1.0;
        NetworkConfig {
            n_nodes,
            ch_probability: 0.2,
            grid_half_width: half_width_unchecked(n_nodes, node_density),
            node_density,
            p_tx_node_dbm: 23.0,
            p_tx_bs_dbm: 46.0,
            p_threshold_dbm: -111.0,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
        }
    }

    pub fn linear_powers(&self) -> LinearPowers {
        LinearPowers {
            p_t: dbm_to_linear_unchecked(self.p_tx_node_dbm),
            p_b: dbm_to_linear_unchecked(self.p_tx_bs_dbm),
            p_th: dbm_to_linear_unchecked(self.p_threshold_dbm),
            alpha: self.path_loss_exponent,
        }
    }

    /// Changes the node count keeping density fixed, so the grid grows with N.
    pub fn with_n_nodes(&self, n_nodes: usize) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.n_nodes = n_nodes;
        cfg.grid_half_width = grid_half_width_from_density(n_nodes, self.node_density)?;
        cfg.validate()
    }

    pub fn with_ch_probability(&self, p: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.ch_probability = p;
        cfg.validate()
    }

    pub fn with_threshold_dbm(&self, p_th: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.p_threshold_dbm = p_th;
        cfg.validate()
    }

    /// `⌊N·p⌋`, the expected CH count used by the floored analytic mode.
    pub fn floored_ch_count(&self) -> usize {
        floor_count(self.n_nodes as f64 * self.ch_probability)
    }

    /// `⌊N·(1−p)⌋`.
    pub fn floored_member_count(&self) -> usize {
        floor_count(self.n_nodes as f64 * (1.0 - self.ch_probability))
    }

    /// Checks every invariant and returns the config unchanged if they hold.
    pub fn validate(&self) -> Result<Self> {
        RawConfig::from(self).validate()
    }
}

/// Floors a non-negative expected count, tolerating round-off just below an integer.
pub fn floor_count(x: f64) -> usize {
    (x + FLOOR_SLACK).floor().max(0.0) as usize
}

/// Converts a dBm level to milliwatts.
pub fn dbm_to_linear(level_dbm: f64) -> Result<f64> {
    if !level_dbm.is_finite() {
        return Err(Error::invalid("level_dbm", format!("must be finite, got {level_dbm}")));
    }
    Ok(dbm_to_linear_unchecked(level_dbm))
}

pub fn linear_to_dbm(milliwatts: f64) -> Result<f64> {
    if !(milliwatts.is_finite() && milliwatts > 0.0) {
        return Err(Error::invalid("milliwatts", format!("must be finite and > 0, got {milliwatts}")));
    }
    Ok(10.0 * milliwatts.log10())
}

fn dbm_to_linear_unchecked(level_dbm: f64) -> f64 {
    10f64.powf(level_dbm / 10.0)
}

/// Half-width `a` of the square that holds `n` nodes at the given density
/// (`λ = N / 4a²`).
pub fn grid_half_width_from_density(n: usize, density: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n_nodes", "must be at least 1"));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::invalid("node_density", format!("must be finite and > 0, got {density}")));
    }
    Ok(half_width_unchecked(n, density))
}

fn half_width_unchecked(n: usize, density: f64) -> f64 {
    (n as f64 / density).sqrt() / 2.0
}

/// Scenario as read from a config file: either the half-width or the density
/// (or both) may be present. [`RawConfig::validate`] fills in the other.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    pub n_nodes: usize,
    pub ch_probability: f64,
    pub grid_half_width: Option<f64>,
    pub node_density: Option<f64>,
    pub p_tx_node_dbm: f64,
    pub p_tx_bs_dbm: f64,
    pub p_threshold_dbm: f64,
    pub path_loss_exponent: f64,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig::from(&NetworkConfig::reference())
    }
}

impl From<&NetworkConfig> for RawConfig {
    fn from(cfg: &NetworkConfig) -> Self {
        RawConfig {
            n_nodes: cfg.n_nodes,
            ch_probability: cfg.ch_probability,
            grid_half_width: Some(cfg.grid_half_width),
            node_density: Some(cfg.node_density),
            p_tx_node_dbm: cfg.p_tx_node_dbm,
            p_tx_bs_dbm: cfg.p_tx_bs_dbm,
            p_threshold_dbm: cfg.p_threshold_dbm,
            path_loss_exponent: cfg.path_loss_exponent,
        }
    }
}

/// Relative tolerance when a config gives both half-width and density.
const GEOMETRY_REL_TOL: f64 = 1e-9;

impl RawConfig {
    pub fn validate(&self) -> Result<NetworkConfig> {
        if self.n_nodes == 0 {
            return Err(Error::invalid("n_nodes", "must be at least 1"));
        }
        let p = self.ch_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("ch_probability", format!("must lie in [0, 1], got {p}")));
        }
        let alpha = self.path_loss_exponent;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("path_loss_exponent", format!("must be finite and > 0, got {alpha}")));
        }
        for (field, v) in [
            ("p_tx_node_dbm", self.p_tx_node_dbm),
            ("p_tx_bs_dbm", self.p_tx_bs_dbm),
            ("p_threshold_dbm", self.p_threshold_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite, got {v}")));
            }
        }

        let n = self.n_nodes as f64;
        let (half_width, density) = match (self.grid_half_width, self.node_density) {
            (None, None) => {
                return Err(Error::invalid("node_density", "either node_density or grid_half_width is required"))
            }
            (None, Some(density)) => (grid_half_width_from_density(self.n_nodes, density)?, density),
            (Some(a), density) => {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::invalid("grid_half_width", format!("must be finite and > 0, got {a}")));
                }
                let implied = n / (4.0 * a * a);
                if let Some(density) = density {
                    if !(density.is_finite() && density > 0.0) {
                        return Err(Error::invalid("node_density", format!("must be finite and > 0, got {density}")));
                    }
                    if ((density - implied) / implied).abs() > GEOMETRY_REL_TOL {
                        return Err(Error::invalid(
                            "grid_half_width",
                            format!("half-width {a} implies density {implied}, but node_density is {density}"),
                        ));
                    }
                }
                (a, implied)
            }
        };

        Ok(NetworkConfig {
            n_nodes: self.n_nodes,
            ch_probability: p,
            grid_half_width: half_width,
            node_density: density,
            p_tx_node_dbm: self.p_tx_node_dbm,
            p_tx_bs_dbm: self.p_tx_bs_dbm,
            p_threshold_dbm: self.p_threshold_dbm,
            path_loss_exponent: alpha,
        })
    }

    /// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
    /// Keys not present keep the reference values, except that giving either of
    /// `grid_half_width`/`node_density` drops the reference value of the other.
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut raw = RawConfig::default();
        let mut half_width = None;
        let mut density = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "n_nodes" => raw.n_nodes = parse_value(value, line_no)?,
                "ch_probability" => raw.ch_probability = parse_value(value, line_no)?,
                "grid_half_width" => half_width = Some(parse_value(value, line_no)?),
                "node_density" => density = Some(parse_value(value, line_no)?),
                "p_tx_node_dbm" => raw.p_tx_node_dbm = parse_value(value, line_no)?,
                "p_tx_bs_dbm" => raw.p_tx_bs_dbm = parse_value(value, line_no)?,
                "p_threshold_dbm" => raw.p_threshold_dbm = parse_value(value, line_no)?,
                "path_loss_exponent" => raw.path_loss_exponent = parse_value(value, line_no)?,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        if half_width.is_some() || density.is_some() {
            raw.grid_half_width = half_width;
            raw.node_density = density;
        }
        Ok(raw)
    }
}

fn parse_value<T: FromStr>(value: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Parse {
        line,
        reason: format!("cannot parse `{value}`: {e}"),
    })
}

impl FromStr for NetworkConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RawConfig::parse(s)?.validate()
    }
}

impl fmt::Display for NetworkConfig {
    /// Writes the config in the same `key = value` format the parser reads.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_nodes = {}", self.n_nodes)?;
        writeln!(f, "ch_probability = {}", self.ch_probability)?;
        writeln!(f, "node_density = {}", self.node_density)?;
        writeln!(f, "p_tx_node_dbm = {}", self.p_tx_node_dbm)?;
        writeln!(f, "p_tx_bs_dbm = {}", self.p_tx_bs_dbm)?;
        writeln!(f, "p_threshold_dbm = {}", self.p_threshold_dbm)?;
        writeln!(f, "path_loss_exponent = {}", self.path_loss_exponent)
    }
}
