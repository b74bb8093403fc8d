use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Draws per chunk. Every chunk owns an independent ChaCha stream, so the
/// sample sequence depends only on `(seed, substream_index, draw_index)`.
pub const CHUNK_DRAWS: usize = 4096;

/// Identifies a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleStream {
    pub seed: u64,
    pub substream_index: u64,
}

impl SampleStream {
    pub fn new(seed: u64, substream_index: u64) -> Self {
        Self { seed, substream_index }
    }

    /// Same seed, different substream.
    pub fn substream(&self, index: u64) -> Self {
        Self { seed: self.seed, substream_index: index }
    }

    /// Generator for chunk `chunk` of this stream; ChaCha's block counter
    /// plays the role of the draw index inside the chunk.
    pub fn chunk_rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.substream_index.to_le_bytes());
        key[16..24].copy_from_slice(b"rdrop-mc");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

/// Writes a uniform point of the ball `B(center, radius)` into `out`.
pub fn sample_ball_into<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64, out: &mut [f64]) {
    let n = center.len();
    let mut norm2;
    loop {
        norm2 = 0.0;
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = z;
            norm2 += z * z;
        }
        if norm2 > 0.0 {
            break;
        }
    }
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64) / norm2.sqrt();
    for (o, c) in out.iter_mut().zip(center) {
        *o = c + r * *o;
    }
}

/// Writes a uniform point of the unit sphere `S^{n-1}` into `out`.
pub fn sample_sphere_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = z;
            norm2 += z * z;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}

/// `count` i.i.d. uniform samples in the ball of `radius` around `center`.
///
/// Chunks are generated in parallel and concatenated in chunk order, so the
/// output is identical for any thread count.
pub fn draw_uniform_ball(
    stream: SampleStream,
    dim: usize,
    center: &[f64],
    radius: f64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    if center.len() != dim {
        return Err(Error::Domain(format!(
            "center has {} coordinates, expected {dim}",
            center.len()
        )));
    }
    if !(radius > 0.0) || count == 0 {
        return Err(Error::Domain(format!(
            "draw_uniform_ball requires radius > 0 and count >= 1 (radius {radius}, count {count})"
        )));
    }
    let chunks = count.div_ceil(CHUNK_DRAWS);
    let points = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.chunk_rng(c as u64);
            let len = CHUNK_DRAWS.min(count - c * CHUNK_DRAWS);
            (0..len)
                .map(|_| {
                    let mut p = vec![0.0; dim];
                    sample_ball_into(&mut rng, center, radius, &mut p);
                    p
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(points)
}
