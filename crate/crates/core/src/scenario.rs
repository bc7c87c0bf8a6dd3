use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::Result;
use crate::network::{channel_stats, realize_network, ChannelStats, NetworkRealization};

/// A configuration together with one network draw and its estimation statistics.
/// Every SE evaluation and optimizer entry point works on this bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub net: NetworkRealization,
    pub stats: ChannelStats,
}

impl Scenario {
    pub fn new(cfg: SystemConfig, net: NetworkRealization) -> Self {
        let stats = channel_stats(&cfg, &net);
        Scenario { cfg, net, stats }
    }

    /// Draws a network from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn generate(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = realize_network(cfg, &mut rng)?;
        Ok(Scenario::new(cfg.clone(), net))
    }

    pub fn num_aps(&self) -> usize {
        self.cfg.num_aps
    }

    pub fn num_dl(&self) -> usize {
        self.cfg.num_dl_ues
    }

    pub fn num_ul(&self) -> usize {
        self.cfg.num_ul_ues
    }

    pub fn antennas(&self) -> f64 {
        self.cfg.antennas_per_ap as f64
    }
}
