//! Orders 5..8: plain count tables blended by confidence, kept outside the
//! PPM escape chain.

use crate::fnv::{fnv1a, Fnv1a};
use crate::prob::{Distribution, ALPHABET};
use crate::table::HashTable;

pub const MIN_ORDER: usize = 5;
pub const MAX_ORDER: usize = 8;
pub const SMOOTHING: f64 = 1e-4;
/// A context needs this many observations before it predicts anything.
pub const MIN_TOTAL: u32 = 4;
const INITIAL_CAPACITY: usize = 1 << 16;

/// Saturating 16-bit counts of the symbols seen in one context.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HighCtxEntry {
    counts: Vec<(u8, u16)>,
    total: u32,
}

impl HighCtxEntry {
    pub fn count(&self, s: u8) -> u16 {
        self.counts
            .iter()
            .find(|(sym, _)| *sym == s)
            .map_or(0, |&(_, c)| c)
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    /// Adds one observation; a count reaching 65535 halves the whole entry.
    pub fn increment(&mut self, s: u8) {
        let idx = match self.counts.iter().position(|(sym, _)| *sym == s) {
            Some(i) => i,
            None => {
                self.counts.push((s, 0));
                self.counts.len() - 1
            }
        };
        self.counts[idx].1 += 1;
        self.total += 1;
        if self.counts[idx].1 == u16::MAX {
            for (_, c) in self.counts.iter_mut() {
                *c /= 2;
            }
            self.counts.retain(|&(_, c)| c > 0);
            self.total = self.counts.iter().map(|&(_, c)| c as u32).sum();
        }
    }

    fn digest(&self, h: &mut Fnv1a) {
        h.write_u32(self.total);
        for &(s, c) in &self.counts {
            h.write_u8(s);
            h.write(&c.to_le_bytes());
        }
    }
}

#[derive(Debug, Clone)]
pub struct HighCtxPrediction {
    pub dist: Distribution,
    pub confidence: f64,
    pub order: usize,
}

/// `((N - 4) / (N + 8)) * (0.4 + 0.1 * (order - 5))`.
pub fn confidence(total: u32, order: usize) -> f64 {
    let n = total as f64;
    (n - 4.0) / (n + 8.0) * (0.4 + 0.1 * (order as f64 - 5.0))
}

/// Blend weight `min(2 * conf, 0.6)`.
pub fn blend_weight(conf: f64) -> f64 {
    (conf * 2.0).min(0.60)
}

#[derive(Debug, Clone)]
pub struct HighCtx {
    orders: Vec<HashTable<HighCtxEntry>>,
}

impl Default for HighCtx {
    fn default() -> Self {
        Self::new()
    }
}

impl HighCtx {
    pub fn new() -> Self {
        HighCtx {
            orders: (MIN_ORDER..=MAX_ORDER)
                .map(|_| HashTable::with_capacity(INITIAL_CAPACITY))
                .collect(),
        }
    }

    pub fn entry(&self, history: &[u8], order: usize) -> Option<&HighCtxEntry> {
        if history.len() < order {
            return None;
        }
        self.orders[order - MIN_ORDER].get(fnv1a(&history[history.len() - order..]))
    }

    pub fn table(&self, order: usize) -> &HashTable<HighCtxEntry> {
        &self.orders[order - MIN_ORDER]
    }

    /// The highest order whose context has at least [`MIN_TOTAL`] counts.
    pub fn predict(&self, history: &[u8]) -> Option<HighCtxPrediction> {
        for order in (MIN_ORDER..=MAX_ORDER).rev() {
            let Some(e) = self.entry(history, order) else {
                continue;
            };
            if e.total < MIN_TOTAL {
                continue;
            }
            let denom = e.total as f64 + ALPHABET as f64 * SMOOTHING;
            let mut dist = Distribution([SMOOTHING / denom; ALPHABET]);
            for &(s, c) in &e.counts {
                dist[s as usize] = (c as f64 + SMOOTHING) / denom;
            }
            return Some(HighCtxPrediction {
                dist,
                confidence: confidence(e.total, order),
                order,
            });
        }
        None
    }

    pub fn blend(d: &mut Distribution, pred: Option<&HighCtxPrediction>) {
        if let Some(pred) = pred {
            d.mix(&pred.dist, blend_weight(pred.confidence));
        }
    }

    pub fn update(&mut self, history: &[u8], observed: u8) {
        for order in MIN_ORDER..=MAX_ORDER.min(history.len()) {
            let h = fnv1a(&history[history.len() - order..]);
            self.orders[order - MIN_ORDER]
                .get_or_insert_with(h, HighCtxEntry::default)
                .increment(observed);
        }
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        for t in &self.orders {
            h.write_u64(t.len() as u64);
            for (k, e) in t.iter() {
                h.write_u64(k);
                e.digest(h);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(bytes: &[u8]) -> HighCtx {
        let mut m = HighCtx::new();
        for i in 0..bytes.len() {
            m.update(&bytes[..i], bytes[i]);
        }
        m
    }

    #[test]
    fn confidence_formula() {
        assert_eq!(confidence(4, 8), 0.0);
        assert!((confidence(20, 8) - 16.0 / 28.0 * 0.7).abs() < 1e-15);
        assert!((confidence(20, 8) - 0.4).abs() < 1e-15);
        assert!((confidence(16, 5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn blend_weight_cap() {
        assert_eq!(blend_weight(0.4), 0.60);
        assert!((blend_weight(0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn short_stream_creates_nothing() {
        let m = build(b"abcd");
        for k in MIN_ORDER..=MAX_ORDER {
            assert!(m.table(k).is_empty());
        }
        assert!(m.predict(b"abcd").is_none());
    }

    #[test]
    fn repeated_pattern_is_sharp() {
        let pattern = b"0123456789";
        let data: Vec<u8> = pattern.iter().cycle().take(1000).copied().collect();
        let m = build(&data);
        let pred = m.predict(&data).unwrap();
        assert_eq!(pred.order, 8);
        // Each order-8 context recurs once per period after its first full
        // appearance: (1000 - 8) / 10 rounds to 99 or 100 successors.
        let n = m.entry(&data, 8).unwrap().total();
        assert!((98..=100).contains(&n), "n = {n}");
        let next = data[data.len() % 10] as usize;
        let p = pred.dist[next];
        assert!(p >= n as f64 / (n as f64 + 0.0256));
        assert!((pred.dist.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn below_min_total_is_skipped() {
        let data = b"abcdefgh-abcdefgh-abcdefgh-abcdef";
        let m = build(data);
        let pred = m.predict(data);
        // "abcdef" at orders 5..8 was followed by 'g' at most 3 times.
        assert!(pred.is_none());
    }

    #[test]
    fn overflow_halves_entry() {
        let mut e = HighCtxEntry::default();
        for _ in 0..100 {
            e.increment(1);
        }
        for _ in 0..65534 {
            e.increment(2);
        }
        assert_eq!(e.count(2), 65534);
        e.increment(2);
        assert_eq!(e.count(2), 32767);
        assert_eq!(e.count(1), 50);
        assert_eq!(e.total(), 32767 + 50);
        e.increment(3);
        assert_eq!(e.total(), 32767 + 50 + 1);
    }
}
