//! The per-byte pipeline, the container format and ablation runs.

use std::time::{Duration, Instant};

use crate::arith::{Decoder, Encoder, StreamExhausted};
use crate::fnv::Fnv1a;
use crate::highctx::HighCtx;
use crate::match_model::MatchModel;
use crate::ppm::Ppm;
use crate::prob::{CumFreqTable, Distribution, PredictionMeta};
use crate::tweedie::{ScoreDiagnostics, Tweedie, DEFAULT_STEPS, MAX_STEPS};
use crate::word::WordModel;

pub const MAGIC: [u8; 4] = *b"MDCT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("not a midicoth container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("container header truncated ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("invalid flags byte {0:#04x}")]
    BadFlags(u8),
    #[error("declared length {0} does not fit in memory")]
    LengthOverflow(u64),
    #[error("corrupt payload: {0}")]
    Corrupt(#[from] StreamExhausted),
}

/// Which layers run. The decoder must use the encoder's configuration; the
/// container carries it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub enable_match: bool,
    pub enable_word: bool,
    pub enable_highctx: bool,
    pub enable_tweedie: bool,
    /// Denoising steps, 1..=4.
    pub tweedie_steps: u8,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl PipelineConfig {
    pub fn full() -> Self {
        PipelineConfig {
            enable_match: true,
            enable_word: true,
            enable_highctx: true,
            enable_tweedie: true,
            tweedie_steps: DEFAULT_STEPS as u8,
        }
    }

    pub fn base_ppm() -> Self {
        PipelineConfig {
            enable_match: false,
            enable_word: false,
            enable_highctx: false,
            enable_tweedie: false,
            tweedie_steps: DEFAULT_STEPS as u8,
        }
    }

    /// Base PPM, then each layer added in pipeline order.
    pub fn cascade() -> [(&'static str, PipelineConfig); 5] {
        let base = Self::base_ppm();
        let m = PipelineConfig {
            enable_match: true,
            ..base
        };
        let mw = PipelineConfig {
            enable_word: true,
            ..m
        };
        let mwh = PipelineConfig {
            enable_highctx: true,
            ..mw
        };
        let full = PipelineConfig {
            enable_tweedie: true,
            ..mwh
        };
        [
            ("Base PPM", base),
            ("+Match", m),
            ("+M+Word", mw),
            ("+M+W+HCtx", mwh),
            ("+M+W+H+Tweedie", full),
        ]
    }

    pub fn to_flags(&self) -> u8 {
        assert!((1..=MAX_STEPS as u8).contains(&self.tweedie_steps));
        (self.enable_match as u8)
            | (self.enable_word as u8) << 1
            | (self.enable_highctx as u8) << 2
            | (self.enable_tweedie as u8) << 3
            | (self.tweedie_steps - 1) << 4
    }

    pub fn from_flags(flags: u8) -> Result<Self, Error> {
        if flags & 0xC0 != 0 {
            return Err(Error::BadFlags(flags));
        }
        Ok(PipelineConfig {
            enable_match: flags & 1 != 0,
            enable_word: flags & 2 != 0,
            enable_highctx: flags & 4 != 0,
            enable_tweedie: flags & 8 != 0,
            tweedie_steps: ((flags >> 4) & 3) + 1,
        })
    }
}

/// A parsed container: 14-byte header and the coder payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub config: PipelineConfig,
    pub original_length: u64,
    pub payload: Vec<u8>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.config.to_flags());
        out.extend_from_slice(&self.original_length.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, Error> {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedHeader(bytes.len()));
        }
        if bytes[4] != VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        let config = PipelineConfig::from_flags(bytes[5])?;
        let original_length = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
        Ok(Container {
            config,
            original_length,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Pipeline layers in cascade order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ppm,
    Match,
    Word,
    HighCtx,
    Tweedie,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ppm,
        Stage::Match,
        Stage::Word,
        Stage::HighCtx,
        Stage::Tweedie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ppm => "ppm",
            Stage::Match => "match",
            Stage::Word => "word",
            Stage::HighCtx => "highctx",
            Stage::Tweedie => "tweedie",
        }
    }
}

/// All model state for one stream. Encoder and decoder drive the same
/// instance type through [`Pipeline::predict`] and [`Pipeline::update`],
/// which is what keeps the two directions bit-identical.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    ppm: Ppm,
    matcher: MatchModel,
    word: WordModel,
    highctx: HighCtx,
    tweedie: Option<Tweedie>,
    history: Vec<u8>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Pipeline {
            config,
            ppm: Ppm::new(),
            matcher: MatchModel::new(),
            word: WordModel::new(),
            highctx: HighCtx::new(),
            tweedie: config
                .enable_tweedie
                .then(|| Tweedie::new(config.tweedie_steps as usize)),
            history: Vec::new(),
        }
    }

    pub fn config(&self) -> PipelineConfig {
        self.config
    }

    pub fn history(&self) -> &[u8] {
        &self.history
    }

    /// Final distribution for the next byte, before quantization.
    pub fn predict_distribution(&mut self) -> (Distribution, PredictionMeta) {
        self.predict_observed(|_, _| {})
    }

    /// Like [`Pipeline::predict_distribution`], handing the output of every
    /// enabled stage to `observe` as it is produced.
    pub fn predict_observed(
        &mut self,
        mut observe: impl FnMut(Stage, &Distribution),
    ) -> (Distribution, PredictionMeta) {
        let (mut p, meta) = self.ppm.predict(&self.history);
        p.normalize();
        observe(Stage::Ppm, &p);
        if self.config.enable_match {
            self.matcher.blend(&mut p);
            observe(Stage::Match, &p);
        }
        if self.config.enable_word {
            let pred = self.word.predict();
            WordModel::blend(&mut p, pred.as_ref());
            observe(Stage::Word, &p);
        }
        if self.config.enable_highctx {
            let pred = self.highctx.predict(&self.history);
            HighCtx::blend(&mut p, pred.as_ref());
            observe(Stage::HighCtx, &p);
        }
        if let Some(t) = self.tweedie.as_mut() {
            p = t.denoise(&p, meta);
        }
        p.normalize();
        if self.tweedie.is_some() {
            observe(Stage::Tweedie, &p);
        }
        (p, meta)
    }

    pub fn predict(&mut self) -> CumFreqTable {
        self.predict_distribution().0.to_cumfreqs()
    }

    pub fn update(&mut self, byte: u8) {
        self.ppm.update(&self.history, byte);
        if self.config.enable_match {
            self.matcher.update(byte);
        }
        if self.config.enable_word {
            self.word.update(byte);
        }
        if self.config.enable_highctx {
            self.highctx.update(&self.history, byte);
        }
        if let Some(t) = self.tweedie.as_mut() {
            t.record(byte);
        }
        self.history.push(byte);
    }

    pub fn score_diagnostics(&self) -> Option<&ScoreDiagnostics> {
        self.tweedie.as_ref().map(|t| t.diagnostics())
    }

    /// Hash over every model's full state.
    pub fn state_digest(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&self.history);
        self.ppm.digest(&mut h);
        if self.config.enable_match {
            self.matcher.digest(&mut h);
        }
        if self.config.enable_word {
            self.word.digest(&mut h);
        }
        if self.config.enable_highctx {
            self.highctx.digest(&mut h);
        }
        if let Some(t) = &self.tweedie {
            t.digest(&mut h);
        }
        h.finish()
    }
}

/// Compression with optional observation hooks.
pub struct Compressor {
    pipeline: Pipeline,
    encoder: Encoder,
    length: u64,
}

impl Compressor {
    pub fn new(config: PipelineConfig) -> Self {
        Compressor {
            pipeline: Pipeline::new(config),
            encoder: Encoder::new(),
            length: 0,
        }
    }

    pub fn push(&mut self, byte: u8) {
        let table = self.pipeline.predict();
        self.encoder.encode(&table, byte);
        self.pipeline.update(byte);
        self.length += 1;
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn finish(self) -> Container {
        Container {
            config: self.pipeline.config,
            original_length: self.length,
            payload: self.encoder.finish(),
        }
    }
}

pub struct Decompressor<'a> {
    pipeline: Pipeline,
    decoder: Decoder<'a>,
    remaining: u64,
}

impl<'a> Decompressor<'a> {
    pub fn new(container: &'a Container) -> Result<Self, Error> {
        Ok(Decompressor {
            pipeline: Pipeline::new(container.config),
            decoder: Decoder::new(&container.payload)?,
            remaining: container.original_length,
        })
    }

    /// Next byte, or `None` once `original_length` bytes were produced.
    pub fn next_byte(&mut self) -> Result<Option<u8>, Error> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let table = self.pipeline.predict();
        let byte = self.decoder.decode(&table)?;
        self.pipeline.update(byte);
        self.remaining -= 1;
        Ok(Some(byte))
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }
}

pub fn compress(input: &[u8], config: PipelineConfig) -> Container {
    let mut c = Compressor::new(config);
    for &b in input {
        c.push(b);
    }
    c.finish()
}

pub fn decompress(container: &Container) -> Result<Vec<u8>, Error> {
    let cap = usize::try_from(container.original_length)
        .map_err(|_| Error::LengthOverflow(container.original_length))?;
    // Never trust the header for the allocation size.
    let mut out = Vec::with_capacity(cap.min(1 << 26));
    let mut d = Decompressor::new(container)?;
    while let Some(b) = d.next_byte()? {
        out.push(b);
    }
    Ok(out)
}

/// One configuration of an ablation cascade.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub name: &'static str,
    pub config: PipelineConfig,
    /// Whole container, header included.
    pub size: usize,
    pub original: usize,
    /// Improvement over the previous row, in percent of its size.
    pub delta_percent: Option<f64>,
    pub elapsed: Duration,
}

impl AblationRow {
    pub fn ratio_percent(&self) -> f64 {
        if self.original == 0 {
            0.0
        } else {
            100.0 * self.size as f64 / self.original as f64
        }
    }

    pub fn bpb(&self) -> f64 {
        if self.original == 0 {
            0.0
        } else {
            8.0 * self.size as f64 / self.original as f64
        }
    }
}

/// Compresses `input` under each cascade configuration in turn.
pub fn layer_bit_accounting(input: &[u8], steps: u8) -> Vec<AblationRow> {
    let mut rows: Vec<AblationRow> = Vec::new();
    for (name, mut config) in PipelineConfig::cascade() {
        config.tweedie_steps = steps;
        let start = Instant::now();
        let size = compress(input, config).len();
        let elapsed = start.elapsed();
        let delta_percent = rows
            .last()
            .map(|prev| 100.0 * (prev.size as f64 - size as f64) / prev.size as f64);
        rows.push(AblationRow {
            name,
            config,
            size,
            original: input.len(),
            delta_percent,
            elapsed,
        });
    }
    rows
}

/// Ideal code length of the stream under each stage's output, from a single
/// compression run, plus what the coder actually produced.
#[derive(Debug, Clone)]
pub struct StageReport {
    /// `(stage, bits)` for every enabled stage, in cascade order.
    pub stage_bits: Vec<(Stage, f64)>,
    /// Ideal bits of the quantized tables actually handed to the coder.
    pub quantized_bits: f64,
    pub container: Container,
    pub diagnostics: Option<ScoreDiagnostics>,
}

impl StageReport {
    /// Model entropy minus quantized code length, in bytes. Positive means
    /// quantization shortened the output.
    pub fn quantization_gain_bytes(&self) -> f64 {
        let model = self.stage_bits.last().map_or(0.0, |&(_, b)| b);
        (model - self.quantized_bits) / 8.0
    }
}

pub fn stage_accounting(input: &[u8], config: PipelineConfig) -> StageReport {
    let mut pipeline = Pipeline::new(config);
    let mut encoder = Encoder::new();
    let mut bits = [0.0f64; 5];
    let mut quantized_bits = 0.0;
    let mut stages: Vec<(Stage, Distribution)> = Vec::with_capacity(5);
    for &b in input {
        stages.clear();
        let (p, _) = pipeline.predict_observed(|st, d| stages.push((st, d.clone())));
        for (st, d) in &stages {
            bits[*st as usize] -= d[b as usize].log2();
        }
        let table = p.to_cumfreqs();
        quantized_bits -= (table.freq(b) as f64 / crate::prob::FREQ_TOTAL as f64).log2();
        encoder.encode(&table, b);
        pipeline.update(b);
    }
    let enabled = [
        true,
        config.enable_match,
        config.enable_word,
        config.enable_highctx,
        config.enable_tweedie,
    ];
    StageReport {
        stage_bits: Stage::ALL
            .iter()
            .zip(enabled)
            .filter(|(_, on)| *on)
            .map(|(&st, _)| (st, bits[st as usize]))
            .collect(),
        quantized_bits,
        diagnostics: pipeline.score_diagnostics().cloned(),
        container: Container {
            config,
            original_length: input.len() as u64,
            payload: encoder.finish(),
        },
    }
}
