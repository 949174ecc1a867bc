//! Link-existence probabilities under unit-mean exponential power fading.
//!
//! A link of length `d` driven by transmit power `P` exists when the fading
//! gain `h ~ Exp(1)` satisfies `h ≥ P_th·d^α / P`, which happens with
//! probability `exp(−P_th·d^α / P)`. NCH→CH links use node power, both
//! base-station links use BS power.

use crate::model::Position;

/// Powers in linear milliwatts plus the path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPowers {
    pub p_t: f64,
    pub p_b: f64,
    pub p_th: f64,
    pub alpha: f64,
}

impl LinearPowers {
    /// Gain a link of length `distance` needs to exist when driven by `power`.
    pub fn required_gain(&self, distance: f64, power: f64) -> f64 {
        // No near-field term: zero distance or zero threshold means a certain link.
        if self.p_th == 0.0 || distance == 0.0 {
            return 0.0;
        }
        self.p_th * distance.powf(self.alpha) / power
    }

    /// `z₁`: fading exponent of the NCH→CH link.
    pub fn z_member_to_head(&self, r_j: Position, r_i: Position) -> f64 {
        self.required_gain(r_j.distance_to(&r_i), self.p_t)
    }

    /// Fading exponent of a BS link to a node at `r` (`z₂` for a CH, `z_DBS` for an NCH).
    pub fn z_bs(&self, r: Position) -> f64 {
        self.required_gain(r.norm(), self.p_b)
    }
}

pub fn p_link_nch_to_ch(r_j: Position, r_i: Position, pw: &LinearPowers) -> f64 {
    (-pw.z_member_to_head(r_j, r_i)).exp()
}

pub fn p_link_ch_to_bs(r_i: Position, pw: &LinearPowers) -> f64 {
    (-pw.z_bs(r_i)).exp()
}

pub fn p_link_nch_to_bs(r_j: Position, pw: &LinearPowers) -> f64 {
    (-pw.z_bs(r_j)).exp()
}

/// Probability that CH `i` cannot relay for NCH `j`: at least one of the
/// NCH→CH and BS→CH links is missing.
pub fn p_relay_pair_fails(r_j: Position, r_i: Position, pw: &LinearPowers) -> f64 {
    -(-(pw.z_member_to_head(r_j, r_i) + pw.z_bs(r_i))).exp_m1()
}

/// Failure probability of an NCH at `r_j` for fixed CH positions: no CH can
/// relay and the direct BS link is missing.
pub fn p_fbe(r_j: Position, ch_positions: &[Position], pw: &LinearPowers) -> f64 {
    let no_relay: f64 = ch_positions
        .iter()
        .map(|r_i| p_relay_pair_fails(r_j, *r_i, pw))
        .product();
    no_relay * -(-pw.z_bs(r_j)).exp_m1()
}
