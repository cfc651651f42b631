//! Varshamov–Tenengolts syndrome and single-deletion correction.
//!
//! The syndrome of a length-L string is Σ i·x(i) mod (L+1) with 1-based
//! weights. Knowing the original length and syndrome, a one-deletion
//! descendant determines the original uniquely: all syndrome-consistent
//! single-bit insertions yield the same string.

use crate::bits::BitString;
use crate::error::{Error, Result};

/// `Σ (i+1)·x[i] mod (len+1)`: 0-based storage with 1-based weights.
pub fn syndrome(x: &BitString) -> Result<u64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("syndrome of empty string".into()));
    }
    let modulus = (x.len() + 1) as u64;
    let mut s = 0u64;
    for (i, bit) in x.iter().enumerate() {
        if bit {
            s = (s + (i as u64 + 1)) % modulus;
        }
    }
    Ok(s)
}

/// Recover the unique length-`target_len` string with the given syndrome from
/// which `y` is obtainable by one deletion.
///
/// Scans the one-bit insertions of `y` with an incrementally evaluated
/// syndrome: inserting bit b at position p (0-based) gives syndrome
/// S_y + ones(y[p..]) + b·(p+1) mod (target_len+1).
pub fn decode_one_deletion(y: &BitString, target_len: usize, syn: u64) -> Result<BitString> {
    if target_len == 0 || y.len() + 1 != target_len {
        return Err(Error::InvalidArgument(format!(
            "received length {} does not match target length {} minus one",
            y.len(),
            target_len
        )));
    }
    let modulus = (target_len + 1) as u64;
    let syn = syn % modulus;

    let s_y: u64 = y
        .iter()
        .enumerate()
        .filter(|(_, b)| *b)
        .map(|(i, _)| i as u64 + 1)
        .sum::<u64>()
        % modulus;

    // suffix_ones[p] = number of ones in y[p..]
    let mut suffix_ones = vec![0u64; y.len() + 1];
    for p in (0..y.len()).rev() {
        suffix_ones[p] = suffix_ones[p + 1] + y.get(p) as u64;
    }

    #[allow(clippy::needless_range_loop)]
    for p in 0..=y.len() {
        for b in [false, true] {
            let total = (s_y + suffix_ones[p] + (b as u64) * (p as u64 + 1)) % modulus;
            if total == syn {
                let mut x = BitString::with_capacity(target_len);
                x.extend_from(&y.slice(0..p));
                x.push(b);
                x.extend_from(&y.slice(p..y.len()));
                return Ok(x);
            }
        }
    }
    Err(Error::DecodeFailure(
        "no syndrome-consistent insertion".into(),
    ))
}
