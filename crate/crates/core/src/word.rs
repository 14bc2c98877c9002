//! Lexical predictor: a trie of alphabetic words for in-word continuation
//! and a word-bigram table for the first letter of the next word.

use crate::fnv::{fnv1a, Fnv1a};
use crate::prob::{Distribution, ALPHABET};
use crate::table::HashTable;

pub const MAX_WORD_LEN: usize = 32;
pub const NODE_BUDGET: usize = 1 << 20;
pub const SMOOTHING: f64 = 1e-4;
/// Observations at which confidence reaches one half.
pub const CONFIDENCE_HALF: f64 = 8.0;

#[inline]
pub fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphabetic()
}

/// Blend weight `min(0.35 c, 0.45)` with `c` clamped to `[0, 1]`.
pub fn blend_weight(confidence: f64) -> f64 {
    (confidence.clamp(0.0, 1.0) * 0.35).min(0.45)
}

fn bump(counts: &mut Vec<(u8, u32)>, s: u8) {
    match counts.iter_mut().find(|(sym, _)| *sym == s) {
        Some((_, c)) => *c += 1,
        None => counts.push((s, 1)),
    }
}

fn count_of(counts: &[(u8, u32)], s: u8) -> u32 {
    counts
        .iter()
        .find(|(sym, _)| *sym == s)
        .map_or(0, |&(_, c)| c)
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: Vec<(u8, u32)>,
    /// What followed this prefix: a letter, or the byte that ended the word.
    next: Vec<(u8, u32)>,
    visits: u32,
}

#[derive(Debug, Clone, Default)]
struct BigramEntry {
    first: Vec<(u8, u32)>,
    total: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Trie(u32),
    Bigram(u64),
}

#[derive(Debug, Clone)]
pub struct WordPrediction {
    pub dist: Distribution,
    pub confidence: f64,
    source: Source,
}

fn smoothed(counts: &[(u8, u32)], total: u32) -> (Distribution, f64) {
    let denom = total as f64 + ALPHABET as f64 * SMOOTHING;
    let mut dist = Distribution([SMOOTHING / denom; ALPHABET]);
    for &(s, c) in counts {
        dist[s as usize] = (c as f64 + SMOOTHING) / denom;
    }
    let v = total as f64;
    (dist, v / (v + CONFIDENCE_HALF))
}

#[derive(Debug, Clone)]
pub struct WordModel {
    nodes: Vec<Node>,
    bigrams: HashTable<BigramEntry>,
    frequency: HashTable<u32>,
    current: Vec<u8>,
    /// Trie node spelling `current`; `None` once the path left the trie.
    cursor: Option<u32>,
    prev_word: Option<u64>,
    cached: Option<Source>,
    child_lookups: u64,
}

impl Default for WordModel {
    fn default() -> Self {
        Self::new()
    }
}

impl WordModel {
    pub fn new() -> Self {
        WordModel {
            nodes: vec![Node::default()],
            bigrams: HashTable::with_capacity(1 << 12),
            frequency: HashTable::with_capacity(1 << 12),
            current: Vec::new(),
            cursor: Some(0),
            prev_word: None,
            cached: None,
            child_lookups: 0,
        }
    }

    pub fn current_word(&self) -> &[u8] {
        &self.current
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of child-link lookups performed so far. Each coded byte costs
    /// at most one, because prediction and update share the cursor.
    pub fn child_lookups(&self) -> u64 {
        self.child_lookups
    }

    /// Visit count of the node spelling `word`, walking from the root.
    pub fn visits(&self, word: &[u8]) -> Option<u32> {
        let mut node = 0u32;
        for &b in word {
            node = self.nodes[node as usize]
                .children
                .iter()
                .find(|(c, _)| *c == b)?
                .1;
        }
        Some(self.nodes[node as usize].visits)
    }

    /// How many times `next_first` started a word right after `word`.
    pub fn bigram_count(&self, word: &[u8], next_first: u8) -> u32 {
        self.bigrams
            .get(fnv1a(word))
            .map_or(0, |e| count_of(&e.first, next_first))
    }

    pub fn word_frequency(&self, word: &[u8]) -> u32 {
        self.frequency.get(fnv1a(word)).copied().unwrap_or(0)
    }

    pub fn predict(&mut self) -> Option<WordPrediction> {
        let pred = if !self.current.is_empty() {
            self.cursor.and_then(|n| {
                let node = &self.nodes[n as usize];
                (node.visits >= 1).then(|| {
                    let (dist, confidence) = smoothed(&node.next, node.visits);
                    WordPrediction {
                        dist,
                        confidence,
                        source: Source::Trie(n),
                    }
                })
            })
        } else {
            self.prev_word.and_then(|h| {
                let e = self.bigrams.get(h)?;
                (e.total >= 1).then(|| {
                    let (dist, confidence) = smoothed(&e.first, e.total);
                    WordPrediction {
                        dist,
                        confidence,
                        source: Source::Bigram(h),
                    }
                })
            })
        };
        self.cached = pred.as_ref().map(|p| p.source);
        pred
    }

    pub fn blend(d: &mut Distribution, pred: Option<&WordPrediction>) {
        if let Some(p) = pred {
            d.mix(&p.dist, blend_weight(p.confidence));
        }
    }

    pub fn update(&mut self, observed: u8) {
        if let Some(Source::Trie(n)) = self.cached.take() {
            debug_assert_eq!(Some(n), self.cursor, "cached trie node out of sync");
        }
        if is_word_byte(observed) {
            if self.current.is_empty() {
                if let Some(h) = self.prev_word {
                    let e = self.bigrams.get_or_insert_with(h, BigramEntry::default);
                    bump(&mut e.first, observed);
                    e.total += 1;
                }
            }
            if let Some(n) = self.cursor {
                let node = &mut self.nodes[n as usize];
                bump(&mut node.next, observed);
                node.visits += 1;
                if self.current.len() < MAX_WORD_LEN {
                    self.cursor = self.child(n, observed);
                }
            }
            if self.current.len() < MAX_WORD_LEN {
                self.current.push(observed);
            }
        } else if !self.current.is_empty() {
            if let Some(n) = self.cursor {
                let node = &mut self.nodes[n as usize];
                bump(&mut node.next, observed);
                node.visits += 1;
            }
            let h = fnv1a(&self.current);
            *self.frequency.get_or_insert_with(h, || 0) += 1;
            self.prev_word = Some(h);
            self.current.clear();
            self.cursor = Some(0);
        }
    }

    fn child(&mut self, n: u32, b: u8) -> Option<u32> {
        self.child_lookups += 1;
        if let Some(&(_, c)) = self.nodes[n as usize]
            .children
            .iter()
            .find(|(c, _)| *c == b)
        {
            return Some(c);
        }
        if self.nodes.len() >= NODE_BUDGET {
            return None;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::default());
        self.nodes[n as usize].children.push((b, id));
        Some(id)
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        h.write_u64(self.nodes.len() as u64);
        for n in &self.nodes {
            h.write_u32(n.visits);
            for &(s, c) in n.children.iter().chain(n.next.iter()) {
                h.write_u8(s);
                h.write_u32(c);
            }
        }
        for (k, e) in self.bigrams.iter() {
            h.write_u64(k);
            h.write_u32(e.total);
        }
        for (k, &c) in self.frequency.iter() {
            h.write_u64(k);
            h.write_u32(c);
        }
        h.write(&self.current);
        h.write_u64(self.prev_word.unwrap_or(0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(m: &mut WordModel, bytes: &[u8]) {
        for &b in bytes {
            let _ = m.predict();
            m.update(b);
        }
    }

    #[test]
    fn nothing_to_predict_initially() {
        let mut m = WordModel::new();
        assert!(m.predict().is_none());
    }

    #[test]
    fn cat_cat() {
        let mut m = WordModel::new();
        feed(&mut m, b"cat cat ");
        assert_eq!(m.visits(b""), Some(2));
        assert_eq!(m.visits(b"c"), Some(2));
        assert_eq!(m.visits(b"ca"), Some(2));
        assert_eq!(m.visits(b"cat"), Some(2));
        assert_eq!(m.visits(b"cab"), None);
        assert_eq!(m.word_frequency(b"cat"), 2);
    }

    #[test]
    fn dog_cat_bigram() {
        let mut m = WordModel::new();
        feed(&mut m, b"dog cat");
        assert_eq!(m.bigram_count(b"dog", b'c'), 1);
        assert_eq!(m.bigram_count(b"dog", b'x'), 0);
    }

    #[test]
    fn continuation_after_ten_thes() {
        let mut m = WordModel::new();
        feed(&mut m, &b"the ".repeat(10));
        feed(&mut m, b"th");
        let p = m.predict().unwrap();
        // Node "th" saw 'e' ten times: (10 + 1e-4) / (10 + 0.0256).
        let expected = (10.0 + 1e-4) / (10.0 + 256.0 * 1e-4);
        assert!((p.dist[b'e' as usize] - expected).abs() < 1e-15);
        assert!(p.dist[b'e' as usize] > 0.9);
        assert!((p.confidence - 10.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn blend_weights() {
        assert_eq!(blend_weight(1.0), 0.35);
        assert_eq!(blend_weight(2.0), 0.35);
        assert_eq!(blend_weight(0.0), 0.0);
        for i in 0..=100 {
            assert!(blend_weight(i as f64 / 50.0) <= 0.45);
        }
    }

    #[test]
    fn non_alphabetic_stream_is_identity() {
        let mut m = WordModel::new();
        let data: Vec<u8> = (0..1_000_000u32)
            .map(|i| b"0123456789 .,;:!?\n\t-"[(i as usize * 7) % 20])
            .collect();
        for &b in &data {
            assert!(m.predict().is_none());
            m.update(b);
        }
        assert_eq!(m.node_count(), 1);
    }

    #[test]
    fn prediction_and_update_share_traversal() {
        let mut m = WordModel::new();
        let text = b"alice was beginning to get very tired of sitting by her sister on the bank";
        feed(&mut m, text);
        let letters = text.iter().filter(|b| b.is_ascii_alphabetic()).count() as u64;
        // One child lookup per letter, none during prediction.
        assert_eq!(m.child_lookups(), letters);
    }

    #[test]
    fn long_words_truncate() {
        let mut m = WordModel::new();
        let long = vec![b'a'; 100];
        feed(&mut m, &long);
        assert_eq!(m.current_word().len(), MAX_WORD_LEN);
        assert_eq!(m.node_count(), MAX_WORD_LEN + 1);
        let p = m.predict().unwrap();
        assert!(p.dist[b'a' as usize] > 0.9);
    }
}
