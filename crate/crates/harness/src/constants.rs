//! Constants of the asymptotic bounds, each the largest ratio seen on
//! the pilot half-grid times [`SAFETY`]. Regenerate with
//! `rws fit --calibrate`.

use serde::Serialize;

pub const SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constants {
    pub prefix_q: f64,
    pub mm_q: f64,
    pub rm_to_bi_q: f64,
    pub bi_to_rm_q: f64,
    /// Stack-block moves per `min{B, ht(τ)}`.
    pub block_bp: f64,
    /// Stack-block moves per `Y(|τ|, B)`.
    pub block_y: f64,
    /// Block-wait miss units per `S·B`.
    pub block_wait: f64,
    /// `K` in the refined computation-phase factor `1 − b/(K·s)`.
    pub phase_refined: f64,
    /// Median steals per `p·h_refined`.
    pub steals: f64,
    /// Excess misses per `S^{1/3}·n²/B + S`.
    pub excess_q: f64,
}

pub const FROZEN: Constants = Constants {
    prefix_q: 11.7344,
    mm_q: 45.0000,
    rm_to_bi_q: 4.0000,
    bi_to_rm_q: 10.8333,
    block_bp: 2.5000,
    block_y: 3.5000,
    block_wait: 0.2677,
    phase_refined: 5.1308,
    steals: 0.5624,
    excess_q: 4.8811,
};
