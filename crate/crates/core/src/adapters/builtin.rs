use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AdapterError;
use crate::dataset::ItemStatsTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Popularity,
    Random,
}

/// Items of `[1, universe]` ordered by descending popularity, ties by id.
#[derive(Debug, Clone)]
pub struct PopularityRanking(Vec<u32>);

impl PopularityRanking {
    pub fn new(stats: &ItemStatsTable, universe_size: u32) -> Self {
        let mut ids: Vec<u32> = (1..=universe_size).collect();
        ids.sort_by(|&a, &b| stats.popularity(b).cmp(&stats.popularity(a)).then(a.cmp(&b)));
        PopularityRanking(ids)
    }

    pub fn top(&self, k: usize) -> &[u32] {
        &self.0[..k.min(self.0.len())]
    }
}

/// Mixes a base seed with a (user, run) pair; SplitMix64 finalizer.
pub fn derive_seed(base: u64, user_id: u32, run_index: u32) -> u64 {
    let mut z = base ^ (u64::from(user_id) << 32 | u64::from(run_index)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn builtin_recommend(
    kind: BaselineKind,
    stats: &ItemStatsTable,
    universe_size: u32,
    k: usize,
    seed: u64,
) -> Result<Vec<u32>, AdapterError> {
    if k == 0 {
        return Err(AdapterError::ZeroK);
    }
    if k > universe_size as usize {
        return Err(AdapterError::KTooLarge { k, universe_size });
    }
    Ok(match kind {
        BaselineKind::Popularity => PopularityRanking::new(stats, universe_size).top(k).to_vec(),
        BaselineKind::Random => random_items(universe_size, k, seed),
    })
}

pub(crate) fn random_items(universe_size: u32, k: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, universe_size as usize, k)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect()
}
