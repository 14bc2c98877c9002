//! Order-0..4 PPM with Jeffreys prior, escape method C and exclusion.

use crate::fnv::{fnv1a, Fnv1a};
use crate::prob::{Distribution, PredictionMeta, ALPHABET};
use crate::table::HashTable;

pub const MAX_ORDER: usize = 4;
/// Jeffreys pseudo-count given to every symbol of a fresh context.
pub const PRIOR: f64 = 0.5;
/// Total prior mass of a fresh context, `256 * 0.5`.
pub const PRIOR_MASS: f64 = PRIOR * ALPHABET as f64;
const INITIAL_CAPACITY: usize = 1024;

/// Method C escape probability for `distinct` symbols seen `real_total`
/// times. An empty context always escapes.
pub fn escape_prob(distinct: u32, real_total: f64) -> f64 {
    if real_total <= 0.0 {
        1.0
    } else {
        distinct as f64 / (real_total + distinct as f64)
    }
}

/// Counts of one context. Only symbols seen at least once are stored; every
/// other symbol implicitly holds the bare prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextRecord {
    seen: Vec<(u8, u32)>,
    total: f64,
}

impl Default for ContextRecord {
    fn default() -> Self {
        Self::new()
    }
}

impl ContextRecord {
    pub fn new() -> Self {
        ContextRecord {
            seen: Vec::new(),
            total: PRIOR_MASS,
        }
    }

    /// Stored count of `s`, prior included.
    pub fn count(&self, s: u8) -> f64 {
        PRIOR + self.real_count(s) as f64
    }

    pub fn real_count(&self, s: u8) -> u32 {
        self.seen
            .iter()
            .find(|(sym, _)| *sym == s)
            .map_or(0, |&(_, c)| c)
    }

    /// Sum of stored counts: `128 + number of updates`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of symbols whose count has risen above the prior.
    pub fn distinct(&self) -> u32 {
        self.seen.len() as u32
    }

    pub fn seen(&self) -> &[(u8, u32)] {
        &self.seen
    }

    pub fn increment(&mut self, s: u8) {
        match self.seen.iter_mut().find(|(sym, _)| *sym == s) {
            Some((_, c)) => *c += 1,
            None => self.seen.push((s, 1)),
        }
        self.total += 1.0;
    }

    fn digest(&self, h: &mut Fnv1a) {
        h.write_f64(self.total);
        for &(s, c) in &self.seen {
            h.write_u8(s);
            h.write_u32(c);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ppm {
    orders: Vec<HashTable<ContextRecord>>,
}

impl Default for Ppm {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn context_hash(history: &[u8], order: usize) -> Option<u64> {
    (history.len() >= order).then(|| fnv1a(&history[history.len() - order..]))
}

impl Ppm {
    pub fn new() -> Self {
        Ppm {
            orders: (0..=MAX_ORDER)
                .map(|_| HashTable::with_capacity(INITIAL_CAPACITY))
                .collect(),
        }
    }

    pub fn record(&self, history: &[u8], order: usize) -> Option<&ContextRecord> {
        context_hash(history, order).and_then(|h| self.orders[order].get(h))
    }

    pub fn table(&self, order: usize) -> &HashTable<ContextRecord> {
        &self.orders[order]
    }

    /// Blends orders 4 down to 0 through the escape chain. Each order spreads
    /// its non-escape mass over the symbols not yet excluded, in proportion to
    /// their real counts; symbols it has actually seen are then excluded
    /// from every lower order. Mass left after order 0 goes uniformly to the
    /// symbols still not excluded.
    pub fn predict(&self, history: &[u8]) -> (Distribution, PredictionMeta) {
        let mut p = Distribution::zeros();
        let mut excluded = [false; ALPHABET];
        let mut n_excluded = 0usize;
        let mut mass = 1.0;
        let mut meta = PredictionMeta::NONE;

        for order in (0..=MAX_ORDER).rev() {
            let Some(rec) = self.record(history, order) else {
                continue;
            };
            if meta.order < 0 {
                meta = PredictionMeta {
                    confidence: rec.total(),
                    order: order as i32,
                };
            }
            if n_excluded == ALPHABET {
                break;
            }
            let mut real = 0u64;
            let mut distinct = 0u32;
            for &(s, c) in rec.seen() {
                if !excluded[s as usize] {
                    real += c as u64;
                    distinct += 1;
                }
            }
            let real = real as f64;
            let esc = escape_prob(distinct, real);
            if real > 0.0 {
                let share = mass * (1.0 - esc) / real;
                for &(s, c) in rec.seen() {
                    if !excluded[s as usize] {
                        p[s as usize] += share * c as f64;
                    }
                }
            }
            mass *= esc;
            for &(s, _) in rec.seen() {
                if !excluded[s as usize] {
                    excluded[s as usize] = true;
                    n_excluded += 1;
                }
            }
        }

        if mass > 0.0 {
            if n_excluded < ALPHABET {
                let each = mass / (ALPHABET - n_excluded) as f64;
                for (q, ex) in p.0.iter_mut().zip(excluded.iter()) {
                    if !ex {
                        *q += each;
                    }
                }
            } else {
                let each = mass / ALPHABET as f64;
                p.0.iter_mut().for_each(|q| *q += each);
            }
        }
        (p, meta)
    }

    /// Counts `observed` in every context available for `history`.
    pub fn update(&mut self, history: &[u8], observed: u8) {
        for order in 0..=MAX_ORDER.min(history.len()) {
            let h = fnv1a(&history[history.len() - order..]);
            self.orders[order]
                .get_or_insert_with(h, ContextRecord::new)
                .increment(observed);
        }
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        for t in &self.orders {
            h.write_u64(t.len() as u64);
            for (k, rec) in t.iter() {
                h.write_u64(k);
                rec.digest(h);
            }
        }
    }
}
