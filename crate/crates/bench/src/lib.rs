//! Shared fixtures for the criterion benchmarks.

use cogmimo_core::channel::{
    corrupt_csi, sample_channels, sample_geometry, substream, ChannelRealization, CsiView, Geometry,
};
use cogmimo_core::NetworkConfig;

pub struct Fixture {
    pub config: NetworkConfig,
    pub geometry: Geometry,
    pub channels: ChannelRealization,
    pub csi: CsiView,
}

/// One reference-setting instance drawn from location 0, channel 0.
pub fn fixture(antennas: usize, users: usize, primary_pairs: usize, seed: u64) -> Fixture {
    let mut config = NetworkConfig::reference(antennas, users, primary_pairs);
    config.seed = seed;
    let geometry = sample_geometry(&config, &mut substream(seed, 0, 0)).expect("placement");
    let mut rng = substream(seed, 0, 1);
    let channels = sample_channels(&config, &geometry, &mut rng);
    let csi = corrupt_csi(&channels, &config, &mut rng);
    Fixture { config, geometry, channels, csi }
}
