use rand::seq::SliceRandom;
use rand::Rng;

use super::pairs::HeadlinePair;
use super::vocab::PAD;

/// Number of batches whose examples are length-sorted together.
const BUCKET_BATCHES: usize = 16;

/// Right-padded id matrix with its lengths and mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub ids: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
    pub mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn from_sequences(seqs: &[&[usize]]) -> Batch {
        let width = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(seqs.len());
        let mut mask = Vec::with_capacity(seqs.len());
        for s in seqs {
            let mut row = s.to_vec();
            row.resize(width, PAD);
            ids.push(row);
            mask.push((0..width).map(|j| j < s.len()).collect());
        }
        Batch {
            ids,
            lengths: seqs.iter().map(|s| s.len()).collect(),
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Unpadded row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i][..self.lengths[i]]
    }
}

/// One mini-batch of pairs: indices into the dataset plus padded views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    pub indices: Vec<usize>,
    pub documents: Batch,
    pub headlines: Batch,
}

/// Groups example indices into batches of examples with similar lengths.
///
/// Indices are shuffled, cut into buckets of several batches, length-sorted
/// inside each bucket and chunked; the resulting batch order is shuffled
/// again. Every index appears exactly once.
pub fn batch_indices(lengths: &[usize], batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    for bucket in order.chunks(batch_size * BUCKET_BATCHES) {
        let mut bucket = bucket.to_vec();
        bucket.sort_by_key(|&i| lengths[i]);
        batches.extend(bucket.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(rng);
    batches
}

/// Mini-batches for one epoch, with documents cut to `max_doc_tokens`.
pub fn make_batches(
    pairs: &[HeadlinePair],
    batch_size: usize,
    max_doc_tokens: usize,
    rng: &mut impl Rng,
) -> Vec<PairBatch> {
    let lengths: Vec<usize> = pairs
        .iter()
        .map(|p| p.document_ids.len().min(max_doc_tokens))
        .collect();
    batch_indices(&lengths, batch_size, rng)
        .into_iter()
        .map(|indices| {
            let docs: Vec<&[usize]> = indices
                .iter()
                .map(|&i| &pairs[i].document_ids[..lengths[i]])
                .collect();
            let heads: Vec<&[usize]> = indices
                .iter()
                .map(|&i| pairs[i].headline_ids.as_slice())
                .collect();
            PairBatch {
                documents: Batch::from_sequences(&docs),
                headlines: Batch::from_sequences(&heads),
                indices,
            }
        })
        .collect()
}
