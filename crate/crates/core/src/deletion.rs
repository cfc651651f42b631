//! Deletion channel model: deletion patterns, the input→output index map,
//! and seeded instance generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Which bits of the channel input were deleted. `mask` has one bit per input
/// bit; a set bit marks a deletion. `beta` records the generation rate and is
/// carried for diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct DeletionPattern {
    mask: BitString,
    beta: f64,
}

impl DeletionPattern {
    pub fn new(mask: BitString, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta {beta} outside [0,1)")));
        }
        Ok(DeletionPattern { mask, beta })
    }

    /// i.i.d. Bernoulli(beta) pattern over `len` bits.
    pub fn bernoulli<R: rand::Rng + ?Sized>(len: usize, beta: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta {beta} outside [0,1)")));
        }
        Ok(DeletionPattern {
            mask: BitString::bernoulli(len, beta, rng),
            beta,
        })
    }

    pub fn mask(&self) -> &BitString {
        &self.mask
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn input_len(&self) -> usize {
        self.mask.len()
    }

    /// Number of deleted bits.
    pub fn weight(&self) -> usize {
        self.mask.count_ones()
    }

    pub fn output_len(&self) -> usize {
        self.input_len() - self.weight()
    }

    pub fn is_deleted(&self, i: usize) -> bool {
        self.mask.get(i)
    }

    /// Precompute the full input→output index map.
    pub fn index_map(&self) -> IndexMap {
        let n = self.input_len();
        let mut positions = Vec::with_capacity(n);
        let mut deleted_before = Vec::with_capacity(n + 1);
        deleted_before.push(0u32);
        let mut last_survivor: Option<u32> = None;
        let mut deleted = 0u32;
        for i in 0..n {
            if self.mask.get(i) {
                positions.push(last_survivor);
                deleted += 1;
            } else {
                let slot = (i as u32) - deleted;
                positions.push(Some(slot));
                last_survivor = Some(slot);
            }
            deleted_before.push(deleted);
        }
        IndexMap {
            positions,
            deleted_before,
        }
    }
}

/// Input→output index map of a deletion pattern.
///
/// For a surviving input bit `i` (0-based), `output_index(i)` is its position
/// in the channel output. For a deleted bit it is the position of the nearest
/// earlier survivor, or `None` when every bit up to `i` was deleted.
#[derive(Debug, Clone)]
pub struct IndexMap {
    positions: Vec<Option<u32>>,
    deleted_before: Vec<u32>,
}

impl IndexMap {
    pub fn input_len(&self) -> usize {
        self.positions.len()
    }

    pub fn output_index(&self, i: usize) -> Option<usize> {
        self.positions[i].map(|v| v as usize)
    }

    /// Number of deletions strictly before input index `i`.
    pub fn deleted_before(&self, i: usize) -> usize {
        self.deleted_before[i] as usize
    }

    /// Where input bit `i` lands in the output if it survives: `i` minus the
    /// deletions before it. Defined for every `i`, deleted or not; this is the
    /// position a correct pivot match starts at.
    pub fn slot(&self, i: usize) -> usize {
        i - self.deleted_before(i)
    }
}

/// Apply a deletion pattern: keep exactly the input bits whose mask bit is 0,
/// in order.
pub fn apply_deletions(x: &BitString, d: &DeletionPattern) -> Result<BitString> {
    if d.input_len() != x.len() {
        return Err(Error::InvalidArgument(format!(
            "mask length {} != input length {}",
            d.input_len(),
            x.len()
        )));
    }
    let mut y = BitString::with_capacity(d.output_len());
    for i in 0..x.len() {
        if !d.is_deleted(i) {
            y.push(x.get(i));
        }
    }
    Ok(y)
}

/// A generated (X, D, Y) triple.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: BitString,
    pub pattern: DeletionPattern,
    pub y: BitString,
}

/// Generate X as i.i.d. fair bits and D as i.i.d. Bernoulli(beta), both from
/// one seeded stream; deterministic for a fixed seed.
pub fn gen_instance(n: usize, beta: f64, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = BitString::random(n, &mut rng);
    let pattern = DeletionPattern::bernoulli(n, beta, &mut rng)?;
    let y = apply_deletions(&x, &pattern)?;
    Ok(Instance { x, pattern, y })
}

/// Deterministic sub-seed derivation (splitmix64 over master ⊕ domain).
pub fn derive_seed(master: u64, domain: u64) -> u64 {
    let mut z = master ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
