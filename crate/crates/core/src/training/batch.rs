use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainingPair;
use crate::text::{BOS, PAD};

/// Sequences gathered into one optimizer step, padded to a common length.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Position of each row in the batch order of its epoch.
    pub id: usize,
    /// Index of each row's pair in the input list.
    pub pairs: Vec<usize>,
    pub len: usize,
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
    /// Base weights; exactly 0 at pad positions.
    pub weights: Vec<Vec<f64>>,
    /// False at pad positions.
    pub real: Vec<Vec<bool>>,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.src.len()
    }

    /// Decoder input for row `r`: BOS followed by the targets shifted right.
    pub fn decoder_input(&self, r: usize) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.len);
        v.push(BOS);
        v.extend_from_slice(&self.tgt[r][..self.len - 1]);
        v
    }

    pub fn pad_tokens(&self) -> usize {
        self.real.iter().flatten().filter(|&&r| !r).count()
    }
}

/// How many batches' worth of shuffled pairs are sorted by length together.
const BUCKET_SPAN: usize = 8;

/// Seeded shuffle, length bucketing, padding with PAD, and a seeded
/// shuffle of the resulting batch order. Empty pairs are dropped.
pub fn make_batches(pairs: &[TrainingPair], batch_size: usize, seed: u64) -> Vec<Batch> {
    let batch_size = batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pairs.len()).filter(|&i| !pairs[i].is_empty()).collect();
    order.shuffle(&mut rng);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for bucket in order.chunks(batch_size * BUCKET_SPAN) {
        let mut bucket = bucket.to_vec();
        bucket.sort_by_key(|&i| pairs[i].len());
        groups.extend(bucket.chunks(batch_size).map(<[usize]>::to_vec));
    }
    groups.shuffle(&mut rng);

    groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let len = members.iter().map(|&i| pairs[i].len()).max().unwrap_or(0);
            let pad_ids = |v: &[usize]| {
                let mut out = v.to_vec();
                out.resize(len, PAD);
                out
            };
            let mut b = Batch {
                id,
                pairs: members.clone(),
                len,
                src: Vec::with_capacity(members.len()),
                tgt: Vec::with_capacity(members.len()),
                weights: Vec::with_capacity(members.len()),
                real: Vec::with_capacity(members.len()),
            };
            for &i in &members {
                let p = &pairs[i];
                b.src.push(pad_ids(&p.src_ids));
                b.tgt.push(pad_ids(&p.tgt_ids));
                let mut w = p.weights.clone();
                w.resize(len, 0.0);
                b.weights.push(w);
                let mut r = vec![true; p.len()];
                r.resize(len, false);
                b.real.push(r);
            }
            b
        })
        .collect()
}
