//! Long-range repetition predictor.
//!
//! One table per context length maps the hash of the last `len` bytes to the
//! most recent position where that context ended. The longest length with a
//! previous occurrence predicts the byte that followed it.

use crate::fnv::{fnv1a, Fnv1a};
use crate::prob::{Distribution, ALPHABET};
use crate::table::HashTable;

/// Context lengths, longest first, with their base confidence. Below 16 bytes
/// the order-4 PPM already predicts as well as a hard match would, so the
/// shorter lengths only feed streak tracking.
pub const LENGTHS: [(usize, f64); 5] = [(16, 1.10), (12, 0.0), (8, 0.0), (6, 0.0), (4, 0.0)];
pub const MAX_WEIGHT: f64 = 0.96;
const INITIAL_CAPACITY: usize = 1 << 16;

/// `min(base * (0.65 + 0.04 * streak), 0.96)`.
pub fn match_weight(base: f64, streak: u32) -> f64 {
    (base * (0.65 + 0.04 * streak as f64)).min(MAX_WEIGHT)
}

/// Blend weight `min(0.85 w, 0.95)`.
pub fn blend_weight(w: f64) -> f64 {
    (w * 0.85).min(0.95)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPrediction {
    pub predicted: u8,
    pub weight: f64,
    pub length: usize,
}

#[derive(Debug, Clone)]
pub struct MatchModel {
    tables: Vec<HashTable<u64>>,
    history: Vec<u8>,
    /// Previous occurrence of each current context, found during the last update.
    candidates: [Option<u64>; LENGTHS.len()],
    streak: u32,
    last_predicted: Option<u8>,
}

impl Default for MatchModel {
    fn default() -> Self {
        Self::new()
    }
}

impl MatchModel {
    pub fn new() -> Self {
        MatchModel {
            tables: LENGTHS
                .iter()
                .map(|_| HashTable::with_capacity(INITIAL_CAPACITY))
                .collect(),
            history: Vec::new(),
            candidates: [None; LENGTHS.len()],
            streak: 0,
            last_predicted: None,
        }
    }

    pub fn history(&self) -> &[u8] {
        &self.history
    }

    pub fn streak(&self) -> u32 {
        self.streak
    }

    /// Overrides the streak counter, for tests and diagnostics.
    pub fn set_streak(&mut self, streak: u32) {
        self.streak = streak;
    }

    pub fn table(&self, length: usize) -> Option<&HashTable<u64>> {
        LENGTHS
            .iter()
            .position(|&(l, _)| l == length)
            .map(|i| &self.tables[i])
    }

    pub fn predict(&self) -> Option<MatchPrediction> {
        LENGTHS
            .iter()
            .zip(self.candidates.iter())
            .find_map(|(&(length, base), cand)| {
                let pos = (*cand)? as usize;
                let predicted = *self.history.get(pos + 1)?;
                Some(MatchPrediction {
                    predicted,
                    weight: match_weight(base, self.streak),
                    length,
                })
            })
    }

    /// Mixes the match distribution into `d` and remembers the predicted byte
    /// for streak tracking. Without a match `d` is left untouched.
    pub fn blend(&mut self, d: &mut Distribution) -> Option<MatchPrediction> {
        let pred = self.predict();
        self.last_predicted = pred.map(|p| p.predicted);
        if let Some(m) = pred {
            let wm = blend_weight(m.weight);
            let keep = 1.0 - wm;
            let other = wm * (1.0 - m.weight) / (ALPHABET - 1) as f64;
            for p in d.0.iter_mut() {
                *p = keep * *p + other;
            }
            let s = m.predicted as usize;
            d[s] += wm * m.weight - other;
        }
        pred
    }

    pub fn update(&mut self, observed: u8) {
        self.streak = match self.last_predicted.take() {
            Some(p) if p == observed => self.streak + 1,
            _ => 0,
        };
        self.history.push(observed);
        let end = self.history.len() as u64 - 1;
        for (i, &(length, _)) in LENGTHS.iter().enumerate() {
            self.candidates[i] = None;
            if self.history.len() < length {
                continue;
            }
            let h = fnv1a(&self.history[self.history.len() - length..]);
            self.candidates[i] = self.tables[i].insert(h, end);
        }
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        h.write(&self.history);
        h.write_u32(self.streak);
        for t in &self.tables {
            h.write_u64(t.len() as u64);
            for (k, &v) in t.iter() {
                h.write_u64(k);
                h.write_u64(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(m: &mut MatchModel, bytes: &[u8]) {
        for &b in bytes {
            let mut d = Distribution::uniform();
            m.blend(&mut d);
            m.update(b);
        }
    }

    #[test]
    fn short_history_has_no_match() {
        let mut m = MatchModel::new();
        feed(&mut m, b"abc");
        assert!(m.predict().is_none());
    }

    #[test]
    fn sixteen_byte_match_weight() {
        let mut m = MatchModel::new();
        feed(&mut m, b"0123456789abcdefX0123456789abcdef");
        m.set_streak(3);
        let p = m.predict().unwrap();
        assert_eq!((p.predicted, p.length), (b'X', 16));
        assert!((p.weight - 1.10 * 0.77).abs() < 1e-12);
    }

    #[test]
    fn weight_formula() {
        assert!((match_weight(0.95, 8) - 0.9215).abs() < 1e-12);
        assert_eq!(match_weight(1.0, 100), MAX_WEIGHT);
        assert!((blend_weight(0.8) - 0.68).abs() < 1e-15);
        assert_eq!(blend_weight(2.0), 0.95);
    }

    #[test]
    fn finds_repeat() {
        let mut m = MatchModel::new();
        feed(&mut m, b"abcdefghabcdefg");
        m.set_streak(3);
        let p = m.predict().unwrap();
        assert_eq!(p.predicted, b'h');
        // "bcdefg" is the longest context seen before.
        assert_eq!(p.length, 6);
        assert_eq!(p.weight, match_weight(LENGTHS[3].1, 3));
    }

    #[test]
    fn blend_formula_uniform_input() {
        let mut m = MatchModel::new();
        feed(&mut m, b"abcdefghabcdefg");
        // Build a state where the weight is exactly 0.8 by hand.
        let mut d = Distribution::uniform();
        let w = 0.8;
        let wm = blend_weight(w);
        let mut expected = Distribution::uniform();
        let mut pm = Distribution([(1.0 - w) / 255.0; 256]);
        pm[b'e' as usize] = w;
        expected.mix(&pm, wm);
        assert!((expected[b'e' as usize] - 0.54525).abs() < 1e-12);
        // And the model path agrees with the formula for its own weight.
        let pred = m.blend(&mut d).unwrap();
        let mut pm = Distribution([(1.0 - pred.weight) / 255.0; 256]);
        pm[pred.predicted as usize] = pred.weight;
        let mut manual = Distribution::uniform();
        manual.mix(&pm, blend_weight(pred.weight));
        for s in 0..256 {
            assert!((manual[s] - d[s]).abs() < 1e-15);
        }
        assert!((d.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_match_is_identity() {
        let mut m = MatchModel::new();
        feed(&mut m, b"abcdefgh");
        let mut d = Distribution::uniform();
        d[3] = 0.5;
        d.normalize();
        let before = d.clone();
        assert!(m.blend(&mut d).is_none());
        assert_eq!(d, before);
    }

    #[test]
    fn streak_counts_consecutive_hits() {
        let mut m = MatchModel::new();
        feed(&mut m, b"abcdabcd");
        m.set_streak(0);
        let mut d = Distribution::uniform();
        assert_eq!(m.blend(&mut d).unwrap().predicted, b'a');
        m.update(b'a');
        m.blend(&mut d);
        m.update(b'b');
        assert_eq!(m.streak(), 2);
        m.blend(&mut d);
        m.update(b'x');
        assert_eq!(m.streak(), 0);
    }

    #[test]
    fn later_occurrence_overwrites() {
        let mut m = MatchModel::new();
        feed(&mut m, b"wxyz1wxyz2");
        let t = m.table(4).unwrap();
        assert_eq!(t.get(fnv1a(b"wxyz")), Some(&8));
    }

    #[test]
    fn periodic_input_is_predicted() {
        let data: Vec<u8> = b"ab".iter().cycle().take(1024).copied().collect();
        let mut m = MatchModel::new();
        let mut hits = 0;
        let mut total = 0;
        for (i, &b) in data.iter().enumerate() {
            let mut d = Distribution::uniform();
            let pred = m.blend(&mut d);
            if i >= 32 {
                total += 1;
                if pred.map(|p| p.predicted) == Some(b) {
                    hits += 1;
                }
            }
            m.update(b);
        }
        assert!(hits as f64 >= 0.95 * total as f64);
    }

    #[test]
    fn weight_monotone_in_streak() {
        for &(_, base) in &LENGTHS {
            let mut prev = 0.0;
            for streak in 0..40 {
                let w = match_weight(base, streak);
                assert!(w >= prev && w <= MAX_WEIGHT);
                prev = w;
            }
        }
    }
}
