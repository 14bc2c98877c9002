//! Micro-diffusion: multi-step Tweedie denoising over the binary-tree
//! decomposition of a byte distribution.
//!
//! Each byte is eight binary decisions, MSB first. Node `i` of the sum tree
//! (1-based heap layout, leaves at `256 + s`) holds the mass of its subtree,
//! and `S[2i + 1] / S[i]` is the probability of going right. A calibration
//! entry per (step, bit context, order group, shape, confidence, probability
//! bin) tracks how often "right" actually happened against how often it was
//! predicted; the difference, shrunk by its signal-to-noise ratio, is added
//! to the node's probability. Corrections are turned into per-subtree scale
//! factors and applied to the leaves in one top-down pass.

use std::sync::OnceLock;

use crate::fnv::{fnv1a, Fnv1a};
use crate::prob::{Distribution, PredictionMeta, ALPHABET};

pub const DEFAULT_STEPS: usize = 3;
pub const MAX_STEPS: usize = 4;
pub const BIT_CONTEXTS: usize = 27;
pub const ORDER_GROUPS: usize = 3;
pub const SHAPE_BINS: usize = 4;
pub const CONF_BINS: usize = 8;
pub const PROB_BINS: usize = 20;
pub const ENTRIES_PER_STEP: usize =
    BIT_CONTEXTS * ORDER_GROUPS * SHAPE_BINS * CONF_BINS * PROB_BINS;

/// Pseudo-observations every entry starts with.
pub const PRIOR_WEIGHT: f64 = 32.0;
/// Real observations an entry needs before it corrects anything.
pub const MIN_OBSERVATIONS: f64 = 10.0;
/// SNR at which the correction is applied at full strength.
pub const FULL_SNR: f64 = 4.0;
pub const CLAMP_EPS: f64 = 1e-8;
pub const SHAPE_THRESHOLDS: [f64; 3] = [0.05, 0.15, 0.40];
const LOGIT_RANGE: f64 = 8.0;
const DEGENERATE_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibEntry {
    pub sum_pred: f64,
    pub hits: f64,
    pub total: f64,
    pub sum_sq_err: f64,
}

impl CalibEntry {
    /// `PRIOR_WEIGHT` observations at probability `p`, variance 1/4 each.
    pub fn with_prior(p: f64) -> Self {
        CalibEntry {
            sum_pred: PRIOR_WEIGHT * p,
            hits: PRIOR_WEIGHT * p,
            total: PRIOR_WEIGHT,
            sum_sq_err: 0.25 * PRIOR_WEIGHT,
        }
    }

    pub fn real_observations(&self) -> f64 {
        self.total - PRIOR_WEIGHT
    }

    /// Shrunk additive correction.
    pub fn correction(&self) -> f64 {
        if self.real_observations() < MIN_OBSERVATIONS {
            return 0.0;
        }
        // With d = hits - sum_pred: delta = d / total and
        // SNR = delta^2 * total / (sum_sq_err / total) = d^2 / sum_sq_err.
        let d = self.hits - self.sum_pred;
        let delta = d / self.total;
        if self.sum_sq_err <= 0.0 {
            return delta;
        }
        delta * (d * d / (FULL_SNR * self.sum_sq_err)).min(1.0)
    }

    pub fn observe(&mut self, p_right: f64, went_right: bool) {
        let b = if went_right { 1.0 } else { 0.0 };
        self.sum_pred += p_right;
        self.hits += b;
        self.total += 1.0;
        let e = b - p_right;
        self.sum_sq_err += e * e;
    }
}

/// Complete binary tree of subtree masses. `s[1]` is the root, leaf `i` is
/// `s[256 + i]`; `s[0]` is unused.
#[derive(Clone)]
pub struct SumTree {
    pub s: [f64; 2 * ALPHABET],
}

impl SumTree {
    pub fn build(d: &Distribution) -> Self {
        let mut s = [0.0; 2 * ALPHABET];
        s[ALPHABET..].copy_from_slice(&d.0);
        for i in (1..ALPHABET).rev() {
            s[i] = s[2 * i] + s[2 * i + 1];
        }
        SumTree { s }
    }

    /// Probability of taking the right branch at internal node `i`, or
    /// `None` when the node carries no usable mass.
    #[inline]
    pub fn p_right(&self, i: usize) -> Option<f64> {
        let total = self.s[i];
        if total < DEGENERATE_MASS {
            return None;
        }
        let p = self.s[2 * i + 1] / total;
        (p > 0.0 && p < 1.0).then_some(p)
    }
}

/// Tree level (0 = MSB decision) of internal node `i`.
#[inline]
pub fn node_level(i: usize) -> usize {
    debug_assert!((1..ALPHABET).contains(&i));
    (usize::BITS - 1 - i.leading_zeros()) as usize
}

/// Internal node deciding bit `level` of `byte`.
#[inline]
pub fn path_node(byte: u8, level: usize) -> usize {
    (ALPHABET + byte as usize) >> (8 - level)
}

/// One of 27 contexts from the tree level and the bits already decided.
/// `path_bits` holds those `level` bits, most significant first.
pub fn bit_context(level: usize, path_bits: u8) -> usize {
    match level {
        0 => 0,
        1 => 1 + path_bits as usize,
        2 => 3 + path_bits as usize,
        3..=7 => {
            let group = (fnv1a(&[path_bits, level as u8]) % 4) as usize;
            7 + 4 * (level - 3) + group
        }
        _ => panic!("tree level {level} out of range"),
    }
}

fn node_context_table() -> [u8; ALPHABET] {
    let mut t = [0u8; ALPHABET];
    for (i, slot) in t.iter_mut().enumerate().skip(1) {
        let level = node_level(i);
        *slot = bit_context(level, (i - (1 << level)) as u8) as u8;
    }
    t
}

pub fn order_group(order: i32) -> usize {
    match order {
        i32::MIN..=1 => 0,
        2 | 3 => 1,
        _ => 2,
    }
}

pub fn shape_bin(p_max: f64) -> usize {
    SHAPE_THRESHOLDS.iter().filter(|&&t| p_max > t).count()
}

/// Log-spaced bins of the matched context's total count. Bin 0 is "no
/// context"; a fresh context (128 pseudo-counts) lands in bin 1 and each
/// further bin doubles the count, up to 8192 and beyond in bin 7.
pub fn conf_bin(confidence: f64) -> usize {
    if confidence < 128.0 {
        return 0;
    }
    let octave = (confidence / 128.0).log2().floor() as usize;
    (1 + octave).min(CONF_BINS - 1)
}

/// Representative total count of a confidence bin.
pub fn conf_bin_center(bin: usize) -> f64 {
    if bin == 0 {
        0.0
    } else {
        128.0 * (1u64 << (bin - 1)) as f64
    }
}

/// Noise level `128 / (C + 128)` of a confidence bin.
pub fn conf_bin_gamma(bin: usize) -> f64 {
    128.0 / (conf_bin_center(bin) + 128.0)
}

/// Uniform bins of `logit(p)` over `[-8, 8]`. Computed by comparing `p`
/// against the bin edges mapped back to probability space.
pub fn prob_bin(p: f64) -> usize {
    static EDGES: OnceLock<[f64; PROB_BINS - 1]> = OnceLock::new();
    let edges = EDGES.get_or_init(|| {
        let width = 2.0 * LOGIT_RANGE / PROB_BINS as f64;
        std::array::from_fn(|k| {
            let logit = -LOGIT_RANGE + (k + 1) as f64 * width;
            1.0 / (1.0 + (-logit).exp())
        })
    });
    edges.iter().map(|&e| usize::from(e <= p)).sum()
}

/// Probability at the logit midpoint of bin `b`.
pub fn prob_bin_center(b: usize) -> f64 {
    let width = 2.0 * LOGIT_RANGE / PROB_BINS as f64;
    let logit = -LOGIT_RANGE + (b as f64 + 0.5) * width;
    1.0 / (1.0 + (-logit).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinKey {
    pub step: usize,
    pub bctx: usize,
    pub order_group: usize,
    pub shape: usize,
    pub conf: usize,
    pub pbin: usize,
}

impl BinKey {
    pub fn index(&self) -> usize {
        ((((self.step * BIT_CONTEXTS + self.bctx) * ORDER_GROUPS + self.order_group) * SHAPE_BINS
            + self.shape)
            * CONF_BINS
            + self.conf)
            * PROB_BINS
            + self.pbin
    }
}

/// Flat index of the entry for the given lookup coordinates.
pub fn bin_indices(
    step: usize,
    bctx: usize,
    ppm_order: i32,
    p_max: f64,
    confidence: f64,
    p_right: f64,
) -> usize {
    BinKey {
        step,
        bctx,
        order_group: order_group(ppm_order),
        shape: shape_bin(p_max),
        conf: conf_bin(confidence),
        pbin: prob_bin(p_right),
    }
    .index()
}

#[derive(Debug, Clone)]
pub struct CalibTable {
    steps: usize,
    entries: Vec<CalibEntry>,
}

impl CalibTable {
    pub fn new(steps: usize) -> Self {
        assert!((1..=MAX_STEPS).contains(&steps), "steps must be 1..=4");
        let centers: Vec<CalibEntry> = (0..PROB_BINS)
            .map(|b| CalibEntry::with_prior(prob_bin_center(b)))
            .collect();
        let entries = (0..steps * ENTRIES_PER_STEP)
            .map(|i| centers[i % PROB_BINS])
            .collect();
        CalibTable { steps, entries }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CalibEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &CalibEntry {
        &self.entries[index]
    }

    pub fn entry_mut(&mut self, index: usize) -> &mut CalibEntry {
        &mut self.entries[index]
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        for e in &self.entries {
            h.write_f64(e.sum_pred);
            h.write_f64(e.hits);
            h.write_f64(e.total);
            h.write_f64(e.sum_sq_err);
        }
    }
}

/// Observation-weighted mean |correction| applied on the coding path,
/// per step and confidence bin.
#[derive(Debug, Clone)]
pub struct ScoreDiagnostics {
    sum_abs: Vec<[f64; CONF_BINS]>,
    weight: Vec<[f64; CONF_BINS]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub gamma: f64,
    pub c_center: f64,
    pub conf_bin: usize,
    pub step: usize,
    pub mean_abs_delta: f64,
    pub weight: f64,
}

impl ScoreDiagnostics {
    fn new(steps: usize) -> Self {
        ScoreDiagnostics {
            sum_abs: vec![[0.0; CONF_BINS]; steps],
            weight: vec![[0.0; CONF_BINS]; steps],
        }
    }

    fn add(&mut self, step: usize, conf: usize, delta: f64) {
        self.sum_abs[step][conf] += delta.abs();
        self.weight[step][conf] += 1.0;
    }

    pub fn mean(&self, step: usize, conf: usize) -> Option<f64> {
        let w = self.weight[step][conf];
        (w > 0.0).then(|| self.sum_abs[step][conf] / w)
    }

    /// Mean over every confidence bin of one step.
    pub fn step_mean(&self, step: usize) -> Option<f64> {
        let w: f64 = self.weight[step].iter().sum();
        (w > 0.0).then(|| self.sum_abs[step].iter().sum::<f64>() / w)
    }

    pub fn rows(&self) -> Vec<ScoreRow> {
        let mut rows = Vec::new();
        for conf in 0..CONF_BINS {
            for step in 0..self.sum_abs.len() {
                rows.push(ScoreRow {
                    gamma: conf_bin_gamma(conf),
                    c_center: conf_bin_center(conf),
                    conf_bin: conf,
                    step,
                    mean_abs_delta: self.mean(step, conf).unwrap_or(0.0),
                    weight: self.weight[step][conf],
                });
            }
        }
        rows
    }

    /// Delimiter-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gamma\tC_center\tstep\tmean_abs_delta\tweight\n");
        for r in self.rows() {
            out.push_str(&format!(
                "{:.4}\t{}\t{}\t{:.6}\t{}\n",
                r.gamma, r.c_center, r.step, r.mean_abs_delta, r.weight
            ));
        }
        out
    }
}

/// The denoiser with its calibration state and the per-byte log needed to
/// learn from the byte once it is known.
#[derive(Debug, Clone)]
pub struct Tweedie {
    table: CalibTable,
    node_ctx: [u8; ALPHABET],
    /// Distribution entering each step for the byte being coded.
    snapshots: Vec<Distribution>,
    meta: PredictionMeta,
    conf: usize,
    order_group: usize,
    pending: bool,
    diagnostics: ScoreDiagnostics,
}

impl Tweedie {
    pub fn new(steps: usize) -> Self {
        Tweedie {
            table: CalibTable::new(steps),
            node_ctx: node_context_table(),
            snapshots: vec![Distribution::uniform(); steps],
            meta: PredictionMeta::NONE,
            conf: 0,
            order_group: 0,
            pending: false,
            diagnostics: ScoreDiagnostics::new(steps),
        }
    }

    pub fn table(&self) -> &CalibTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut CalibTable {
        &mut self.table
    }

    pub fn diagnostics(&self) -> &ScoreDiagnostics {
        &self.diagnostics
    }

    #[inline]
    fn key(&self, step: usize, node: usize, shape: usize, p_right: f64) -> usize {
        BinKey {
            step,
            bctx: self.node_ctx[node] as usize,
            order_group: self.order_group,
            shape,
            conf: self.conf,
            pbin: prob_bin(p_right),
        }
        .index()
    }

    /// Runs every step on `d` and keeps what [`Tweedie::record`] needs.
    pub fn denoise(&mut self, d: &Distribution, meta: PredictionMeta) -> Distribution {
        self.meta = meta;
        self.conf = conf_bin(meta.confidence);
        self.order_group = order_group(meta.order);
        self.pending = true;
        let mut p = d.clone();
        let mut scale = [0.0f64; 2 * ALPHABET];
        for step in 0..self.table.steps {
            self.snapshots[step] = p.clone();
            let tree = SumTree::build(&p);
            let shape = shape_bin(p.max());
            scale[1] = 1.0;
            for i in 1..ALPHABET {
                let (sl, sr) = match tree.p_right(i) {
                    Some(pr) => {
                        let delta = self.table.entry(self.key(step, i, shape, pr)).correction();
                        let corrected = (pr + delta).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
                        ((1.0 - corrected) / (1.0 - pr), corrected / pr)
                    }
                    None => (1.0, 1.0),
                };
                scale[2 * i] = scale[i] * sl;
                scale[2 * i + 1] = scale[i] * sr;
            }
            for (q, s) in p.0.iter_mut().zip(scale[ALPHABET..].iter()) {
                *q *= s;
            }
            p.normalize();
        }
        p
    }

    /// Feeds the coded byte back into every entry consulted on its path.
    pub fn record(&mut self, observed: u8) {
        if !std::mem::take(&mut self.pending) {
            return;
        }
        let conf = self.conf;
        for step in 0..self.table.steps {
            let tree = SumTree::build(&self.snapshots[step]);
            let shape = shape_bin(self.snapshots[step].max());
            for level in 0..8 {
                let node = path_node(observed, level);
                let Some(pr) = tree.p_right(node) else {
                    continue;
                };
                let went_right = (observed >> (7 - level)) & 1 == 1;
                let idx = self.key(step, node, shape, pr);
                let entry = self.table.entry_mut(idx);
                self.diagnostics.add(step, conf, entry.correction());
                entry.observe(pr, went_right);
            }
        }
    }

    pub fn digest(&self, h: &mut Fnv1a) {
        self.table.digest(h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_size() {
        assert_eq!(CalibTable::new(3).len(), 155_520);
        assert_eq!(ENTRIES_PER_STEP, 3 * 27 * 3 * 4 * 8 * 20 / 3);
    }

    #[test]
    fn fresh_entries() {
        let t = CalibTable::new(3);
        for (i, e) in t.entries().iter().enumerate() {
            let c = prob_bin_center(i % PROB_BINS);
            assert_eq!(e.total, 32.0);
            assert_eq!(e.sum_pred, 32.0 * c);
            assert_eq!(e.hits, e.sum_pred);
            assert_eq!(e.sum_sq_err, 8.0);
            assert_eq!(e.correction(), 0.0);
        }
    }

    #[test]
    fn bit_contexts() {
        assert_eq!(bit_context(0, 0), 0);
        assert_eq!(bit_context(1, 0), 1);
        assert_eq!(bit_context(1, 1), 2);
        assert_eq!(bit_context(2, 0b10), 5);
        let mut seen = std::collections::BTreeSet::new();
        for i in 1..256 {
            let level = node_level(i);
            let ctx = bit_context(level, (i - (1 << level)) as u8);
            assert!(ctx < BIT_CONTEXTS);
            seen.insert(ctx);
        }
        assert_eq!(seen.len(), 27);
    }

    #[test]
    fn path_nodes() {
        assert_eq!(path_node(0xFF, 0), 1);
        assert_eq!(path_node(0xFF, 1), 3);
        assert_eq!(path_node(0xFF, 7), 255);
        assert_eq!(path_node(0x00, 7), 128);
        assert_eq!(path_node(0b1010_0000, 3), 0b1101);
        for i in 1..256 {
            assert!(node_level(i) < 8);
        }
    }

    #[test]
    fn bins() {
        assert_eq!(prob_bin(0.5), 10);
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = (((p / (1.0 - p)).ln() + 8.0) * 20.0 / 16.0).floor();
            if (x - x.round()).abs() > 1e-9 {
                assert_eq!(prob_bin(p), (x.max(0.0) as usize).min(19), "p = {p}");
            }
        }
        assert_eq!(prob_bin(1e-9), 0);
        assert_eq!(prob_bin(1.0 - 1e-9), 19);
        assert_eq!(shape_bin(0.20), 2);
        assert_eq!(shape_bin(0.01), 0);
        assert_eq!(shape_bin(0.9), 3);
        assert_eq!(order_group(-1), 0);
        assert_eq!(order_group(1), 0);
        assert_eq!(order_group(3), 1);
        assert_eq!(order_group(4), 2);
        assert_eq!(conf_bin(0.0), 0);
        assert_eq!(conf_bin(128.0), 1);
        assert_eq!(conf_bin(512.0), 3);
        assert_eq!(conf_bin(2048.0), 5);
        assert_eq!(conf_bin(8192.0), 7);
        assert_eq!(conf_bin(1e9), 7);
        assert!((conf_bin_gamma(1) - 0.5).abs() < 1e-12);
        assert!((conf_bin_gamma(3) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn correction_formula() {
        let e = CalibEntry {
            total: 100.0,
            hits: 60.0,
            sum_pred: 50.0,
            sum_sq_err: 25.0,
        };
        assert!((e.correction() - 0.1).abs() < 1e-15);
        let e = CalibEntry {
            sum_sq_err: 100.0,
            ..e
        };
        assert!((e.correction() - 0.025).abs() < 1e-15);
        // Nine real observations are not enough.
        let e = CalibEntry {
            total: 41.0,
            hits: 40.0,
            sum_pred: 10.0,
            sum_sq_err: 9.0,
        };
        assert_eq!(e.correction(), 0.0);
    }

    #[test]
    fn fresh_table_is_identity() {
        let mut t = Tweedie::new(3);
        let mut d = Distribution::zeros();
        for s in 0..256 {
            d[s] = ((s * 37) % 101 + 1) as f64;
        }
        d.normalize();
        let out = t.denoise(
            &d,
            PredictionMeta {
                confidence: 300.0,
                order: 2,
            },
        );
        for s in 0..256 {
            assert!((out[s] - d[s]).abs() <= 1e-12);
        }
    }

    #[test]
    fn planted_root_correction() {
        // Root P(right) = 69 / 133; plant an entry that lifts it to 0.9.
        let mut d = Distribution::zeros();
        for s in 0..256 {
            d[s] = if s < 128 { 0.5 } else { 0.5 + 5.0 / 128.0 };
        }
        d.normalize();
        let tree = SumTree::build(&d);
        let pr = tree.p_right(1).unwrap();
        assert!((pr - 69.0 / 133.0).abs() < 1e-12);
        let target = 0.9;
        let delta = target - pr;

        let mut t = Tweedie::new(1);
        let meta = PredictionMeta {
            confidence: 133.0,
            order: 2,
        };
        let idx = bin_indices(0, 0, meta.order, d.max(), meta.confidence, pr);
        *t.table_mut().entry_mut(idx) = CalibEntry {
            total: 1000.0,
            hits: (delta + 0.5) * 1000.0,
            sum_pred: 0.5 * 1000.0,
            sum_sq_err: 1.0,
        };
        assert!((t.table().entry(idx).correction() - delta).abs() < 1e-12);
        let out = t.denoise(&d, meta);
        let right: f64 = out.0[128..].iter().sum();
        assert!((right - 0.9).abs() < 1e-12);
        // Within each half the shape is untouched.
        assert!((out[200] / out[129] - d[200] / d[129]).abs() < 1e-12);
        assert!((out[3] / d[3] - 0.1 / (1.0 - pr)).abs() < 1e-9);
    }

    #[test]
    fn record_touches_24_entries() {
        let mut t = Tweedie::new(3);
        let d = Distribution::uniform();
        t.denoise(&d, PredictionMeta::NONE);
        t.record(0xFF);
        let touched: Vec<_> = t
            .table()
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.total > PRIOR_WEIGHT)
            .collect();
        assert_eq!(touched.len(), 24);
        // 0xFF goes right everywhere: hits grew by one, from the prior.
        for (i, e) in touched {
            let c = prob_bin_center(i % PROB_BINS);
            assert_eq!(e.hits, 32.0 * c + 1.0);
        }
    }
}
