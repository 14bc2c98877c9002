//! Byte distributions and their quantization to coder frequencies.

use std::ops::{Index, IndexMut};

pub const ALPHABET: usize = 256;
/// Smallest probability any symbol may carry after [`Distribution::normalize`].
pub const FLOOR_PROB: f64 = 1e-12;
pub const FREQ_BITS: u32 = 14;
/// Total of every [`CumFreqTable`].
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// 256 probabilities over byte values.
#[derive(Clone, PartialEq)]
pub struct Distribution(pub [f64; ALPHABET]);

impl Distribution {
    pub fn uniform() -> Self {
        Distribution([1.0 / ALPHABET as f64; ALPHABET])
    }

    pub fn zeros() -> Self {
        Distribution([0.0; ALPHABET])
    }

    pub fn from_slice(p: &[f64]) -> Self {
        let mut d = Self::zeros();
        d.0.copy_from_slice(p);
        d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Floors every entry at [`FLOOR_PROB`], then rescales to unit sum.
    ///
    /// Panics on non-finite or negative entries, or an all-zero input; those
    /// only arise from a logic error upstream.
    pub fn normalize(&mut self) {
        let valid = self
            .0
            .iter()
            .fold(true, |ok, p| ok & (p.is_finite() & (*p >= 0.0)));
        if !valid {
            let bad = self.0.iter().find(|p| !(p.is_finite() && **p >= 0.0));
            panic!("invalid probability {bad:?}");
        }
        let mut sum = 0.0;
        for p in self.0.iter_mut() {
            *p = p.max(FLOOR_PROB);
            sum += *p;
        }
        assert!(sum > ALPHABET as f64 * FLOOR_PROB, "all-zero distribution");
        let inv = 1.0 / sum;
        for p in self.0.iter_mut() {
            *p *= inv;
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `(1 - w) * self + w * other`, in place.
    pub fn mix(&mut self, other: &Distribution, w: f64) {
        let keep = 1.0 - w;
        for (p, q) in self.0.iter_mut().zip(other.0.iter()) {
            *p = keep * *p + w * *q;
        }
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }

    pub fn to_cumfreqs(&self) -> CumFreqTable {
        probs_to_cumfreqs(self)
    }
}

impl Default for Distribution {
    fn default() -> Self {
        Self::uniform()
    }
}

impl std::fmt::Debug for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Distribution {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// What the PPM layer knows about the context behind a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionMeta {
    /// Total stored count of the matched context, prior included.
    pub confidence: f64,
    /// Matched PPM order, or -1 when no context matched.
    pub order: i32,
}

impl PredictionMeta {
    pub const NONE: PredictionMeta = PredictionMeta {
        confidence: 0.0,
        order: -1,
    };
}

/// Cumulative frequencies: `cum[0] = 0`, `cum[256] = FREQ_TOTAL`, strictly
/// increasing.
#[derive(Clone, PartialEq, Eq)]
pub struct CumFreqTable {
    cum: [u32; ALPHABET + 1],
}

impl CumFreqTable {
    /// Builds the prefix sums of `freqs`. Returns `None` unless every
    /// frequency is at least 1 and they sum to [`FREQ_TOTAL`].
    pub fn from_freqs(freqs: &[u32; ALPHABET]) -> Option<Self> {
        let mut cum = [0u32; ALPHABET + 1];
        for (s, &f) in freqs.iter().enumerate() {
            if f == 0 {
                return None;
            }
            cum[s + 1] = cum[s].checked_add(f)?;
        }
        (cum[ALPHABET] == FREQ_TOTAL).then_some(CumFreqTable { cum })
    }

    pub fn uniform() -> Self {
        Self::from_freqs(&[FREQ_TOTAL / ALPHABET as u32; ALPHABET]).unwrap()
    }

    #[inline]
    pub fn low(&self, s: u8) -> u32 {
        self.cum[s as usize]
    }

    #[inline]
    pub fn high(&self, s: u8) -> u32 {
        self.cum[s as usize + 1]
    }

    #[inline]
    pub fn freq(&self, s: u8) -> u32 {
        self.high(s) - self.low(s)
    }

    pub fn cum(&self) -> &[u32; ALPHABET + 1] {
        &self.cum
    }

    /// The symbol whose interval contains `target` (`target < FREQ_TOTAL`).
    #[inline]
    pub fn symbol_for(&self, target: u32) -> u8 {
        // First index with cum > target, minus one.
        let idx = self.cum.partition_point(|&c| c <= target);
        (idx - 1) as u8
    }

    /// Cross-entropy in bits of coding `d` with this table.
    pub fn cross_entropy(&self, d: &Distribution) -> f64 {
        (0..ALPHABET)
            .map(|s| {
                let q = self.freq(s as u8) as f64 / FREQ_TOTAL as f64;
                -d[s] * q.log2()
            })
            .sum()
    }
}

impl std::fmt::Debug for CumFreqTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.cum.iter()).finish()
    }
}

/// Quantizes `d` to integer frequencies `max(1, floor(p * T + 0.5))`.
///
/// Rounding can leave the total off by a few units; the difference is taken
/// from (or given to) the largest frequencies, never pushing one below 1.
pub fn probs_to_cumfreqs(d: &Distribution) -> CumFreqTable {
    let total = FREQ_TOTAL as f64;
    let mut freqs = [0u32; ALPHABET];
    let mut sum: i64 = 0;
    for (f, &p) in freqs.iter_mut().zip(d.0.iter()) {
        let q = (p * total + 0.5).floor();
        *f = if q >= 1.0 { q as u32 } else { 1 };
        sum += *f as i64;
    }
    let mut diff = FREQ_TOTAL as i64 - sum;
    while diff != 0 {
        // Lowest index wins ties so that the repair is deterministic.
        let s = (0..ALPHABET).fold(0, |best, s| if freqs[s] > freqs[best] { s } else { best });
        if diff > 0 {
            freqs[s] += diff as u32;
            diff = 0;
        } else {
            let take = (-diff).min(freqs[s] as i64 - 1);
            freqs[s] -= take as u32;
            diff += take;
        }
    }
    CumFreqTable::from_freqs(&freqs).expect("repaired frequencies sum to the coder total")
}
