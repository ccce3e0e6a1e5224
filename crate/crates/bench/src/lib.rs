// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use isac_core::channel::generate_channels;
use isac_core::optimizer::{initialize, FPState};
use isac_core::{ChannelSet, Rng, SystemConfig};

/// Reference scenario at `m_t` antennas with its seed-0 channels and the
/// optimizer's starting point.
pub fn scenario(m_t: usize) -> (SystemConfig, ChannelSet, FPState) {
    let cfg = SystemConfig::default().with_tx_antennas(m_t);
    let channels = generate_channels(&cfg, &mut Rng::new(0));
    let state = initialize(&cfg, &channels);
    (cfg, channels, state)
}
