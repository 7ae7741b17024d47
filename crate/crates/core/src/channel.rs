//! Random channel realizations: Rayleigh fading scaled by distance path loss,
//! plus JSON and flat-binary serialization of a realization.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, ChannelSet, SystemConfig, C64};

/// Name written into serialized channel headers.
pub const GENERATOR: &str = "chacha20-seed_from_u64";

const BINARY_MAGIC: &[u8; 8] = b"IOSCHAN\x01";
const FORMAT_VERSION: u32 = 1;

/// Reference gain at 1 m, −30 dB.
pub const DEFAULT_REF_GAIN: f64 = 1e-3;

/// Placement of the BS, the surface and the users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_bi: f64,
    pub d_iu: f64,
    /// Per-user angle in radians, reflected users first. Drawn uniformly on
    /// `[0, π/2]` for every realization when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

/// `C₀ · d^(−α)` with the reference distance fixed to one meter.
pub fn path_loss(d: f64, alpha: f64) -> Result<f64> {
    path_loss_with(d, alpha, DEFAULT_REF_GAIN)
}

pub fn path_loss_with(d: f64, alpha: f64, ref_gain: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidGeometry(format!("distance must be positive, got {d}")));
    }
    Ok(ref_gain * d.powf(-alpha))
}

/// BS–user distance for a user seen at angle `delta` from the surface.
pub fn user_distance(d_bi: f64, d_iu: f64, delta: f64) -> Result<f64> {
    let r = d_bi * d_bi + d_iu * d_iu - 2.0 * d_bi * d_iu * delta.sin();
    // rounding can leave a tiny negative radicand in the collinear case
    if r < -1e-9 * (d_bi * d_bi + d_iu * d_iu) || !r.is_finite() {
        return Err(Error::InvalidGeometry(format!(
            "negative radicand {r} for d_bi={d_bi}, d_iu={d_iu}, delta={delta}"
        )));
    }
    Ok(r.max(0.0).sqrt())
}

/// Mixes a base seed and a trial index into an independent stream seed.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cgauss<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Draws one realization from `cfg.seed`.
///
/// Order of draws: user angles (only when not fixed), then `G` row-major,
/// then every `h_d`, `h_r`, `h_t` in user order.
pub fn sample_channels(cfg: &SystemConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let k = cfg.n_users();
    let angles: Vec<f64> = match &cfg.geometry.angles {
        Some(a) => a.clone(),
        None => (0..k).map(|_| rng.gen_range(0.0..=FRAC_PI_2)).collect(),
    };
    let (geo, ple, c0) = (&cfg.geometry, &cfg.pathloss_exponents, cfg.ref_gain);
    let pl_bi = path_loss_with(geo.d_bi, ple.bs_ios, c0)?;
    let pl_iu = path_loss_with(geo.d_iu, ple.ios_user, c0)?;
    let pl_bu = angles[..cfg.k_r]
        .iter()
        .map(|&a| path_loss_with(user_distance(geo.d_bi, geo.d_iu, a)?, ple.bs_user, c0))
        .collect::<Result<Vec<_>>>()?;

    let (m, n) = (cfg.n_elements, cfg.n_tx);
    let mut g = CMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            g[(i, j)] = cgauss(&mut rng, pl_bi);
        }
    }
    let mut draw = |len: usize, var: f64| CVector::from_fn(len, |_, _| cgauss(&mut rng, var));
    let h_d = pl_bu.iter().map(|&pl| draw(n, pl)).collect();
    let h_r = (0..cfg.k_r).map(|_| draw(m, pl_iu)).collect();
    let h_t = (0..cfg.k_t).map(|_| draw(m, pl_iu)).collect();
    Ok(ChannelSet { g, h_d, h_r, h_t })
}

/// Metadata stored alongside a serialized realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelHeader {
    pub format_version: u32,
    pub generator: String,
    pub seed: u64,
    pub n_tx: usize,
    pub n_elements: usize,
    pub k_r: usize,
    pub k_t: usize,
}

impl ChannelHeader {
    pub fn for_channels(ch: &ChannelSet, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            generator: GENERATOR.to_string(),
            seed,
            n_tx: ch.n_tx(),
            n_elements: ch.n_elements(),
            k_r: ch.k_r(),
            k_t: ch.k_t(),
        }
    }

    fn value_count(&self) -> usize {
        2 * (self.n_elements * self.n_tx + self.k_r * (self.n_tx + self.n_elements) + self.k_t * self.n_elements)
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    header: ChannelHeader,
    /// Row-major `[re, im]` pairs.
    g: Vec<[f64; 2]>,
    h_d: Vec<Vec<[f64; 2]>>,
    h_r: Vec<Vec<[f64; 2]>>,
    h_t: Vec<Vec<[f64; 2]>>,
}

fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(p: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(p.len(), p.iter().map(|[re, im]| C64::new(*re, *im)))
}

/// Flat values in the on-disk order: `G` row-major, `h_d`, `h_r`, `h_t`,
/// each entry as interleaved re/im.
fn flatten(ch: &ChannelSet) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..ch.g.nrows() {
        for z in ch.g.row(i).iter() {
            out.extend([z.re, z.im]);
        }
    }
    for v in ch.h_d.iter().chain(&ch.h_r).chain(&ch.h_t) {
        for z in v.iter() {
            out.extend([z.re, z.im]);
        }
    }
    out
}

fn unflatten(h: &ChannelHeader, data: &[f64]) -> Result<ChannelSet> {
    if data.len() != h.value_count() {
        return Err(Error::Format(format!(
            "expected {} values, found {}",
            h.value_count(),
            data.len()
        )));
    }
    let mut it = data.chunks_exact(2).map(|p| C64::new(p[0], p[1]));
    let g = CMatrix::from_row_iterator(h.n_elements, h.n_tx, it.by_ref().take(h.n_elements * h.n_tx));
    let mut take = |len: usize| CVector::from_iterator(len, it.by_ref().take(len));
    let h_d = (0..h.k_r).map(|_| take(h.n_tx)).collect();
    let h_r = (0..h.k_r).map(|_| take(h.n_elements)).collect();
    let h_t = (0..h.k_t).map(|_| take(h.n_elements)).collect();
    let ch = ChannelSet { g, h_d, h_r, h_t };
    ch.validate()?;
    Ok(ch)
}

pub fn write_json<W: Write>(ch: &ChannelSet, seed: u64, mut w: W) -> Result<()> {
    let g = (0..ch.g.nrows())
        .flat_map(|i| ch.g.row(i).iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
        .collect();
    let doc = ChannelJson {
        header: ChannelHeader::for_channels(ch, seed),
        g,
        h_d: ch.h_d.iter().map(pairs).collect(),
        h_r: ch.h_r.iter().map(pairs).collect(),
        h_t: ch.h_t.iter().map(pairs).collect(),
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<(ChannelHeader, ChannelSet)> {
    let doc: ChannelJson = serde_json::from_reader(r)?;
    let h = doc.header;
    if doc.g.len() != h.n_elements * h.n_tx || doc.h_d.len() != h.k_r || doc.h_r.len() != h.k_r || doc.h_t.len() != h.k_t
    {
        return Err(Error::Format("channel arrays disagree with header".into()));
    }
    let g = CMatrix::from_row_iterator(
        h.n_elements,
        h.n_tx,
        doc.g.iter().map(|[re, im]| C64::new(*re, *im)),
    );
    let ch = ChannelSet {
        g,
        h_d: doc.h_d.iter().map(|p| from_pairs(p)).collect(),
        h_r: doc.h_r.iter().map(|p| from_pairs(p)).collect(),
        h_t: doc.h_t.iter().map(|p| from_pairs(p)).collect(),
    };
    ch.validate()?;
    if ch.n_tx() != h.n_tx || ch.n_elements() != h.n_elements {
        return Err(Error::Format("channel arrays disagree with header".into()));
    }
    Ok((h, ch))
}

/// Binary layout: 8-byte magic, little-endian `u32` header length, the JSON
/// header, then little-endian `f64` values as produced by [`flatten`].
pub fn write_binary<W: Write>(ch: &ChannelSet, seed: u64, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&ChannelHeader::for_channels(ch, seed))?;
    let len = u32::try_from(header.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&header)?;
    for v in flatten(ch) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<(ChannelHeader, ChannelSet)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("not a channel file".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let h: ChannelHeader = serde_json::from_slice(&header)?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() % 8 != 0 {
        return Err(Error::Format("truncated value block".into()));
    }
    let data: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let ch = unflatten(&h, &data)?;
    Ok((h, ch))
}
