#![allow(dead_code)]

use omnisurface::channel::{sample_channels, trial_seed};
use omnisurface::experiment::{BaseConfig, Profile};
use omnisurface::model::{ChannelSet, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random small system (`N_t ≤ 4`, `M ≤ 8`, at most three users) with
/// the desk geometry, and one channel draw for it.
pub fn small_instance(index: u64) -> (SystemConfig, ChannelSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(0xACCE, index));
    let mut base = BaseConfig::profile(Profile::Desk);
    base.n_tx = rng.gen_range(1..=4);
    base.n_elements = rng.gen_range(1..=8);
    let users = rng.gen_range(1..=3);
    base.k_r = rng.gen_range(0..=users);
    base.k_t = users - base.k_r;
    base.sinr_target_db = rng.gen_range(0.0..10.0);
    base.power_budget_dbw = rng.gen_range(-5.0..10.0);
    let cfg = base.system(rng.gen()).expect("valid random config");
    let ch = sample_channels(&cfg).expect("channels");
    (cfg, ch)
}
