//! Monte-Carlo experiments: configuration, the frame loop, aggregation and
//! output files.
//!
//! A frame draws `L` source blocks, encodes them once and sends the same
//! codeword stream through the channel at every SNR of the grid. Frames run
//! on a worker pool; their results are gathered in frame order and summed
//! with compensated summation, so the output does not depend on the number
//! of threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{calibrate_power, ChannelConfig};
use crate::codes::{CodeSpec, ComponentCode};
use crate::decoder::{CancelMode, DecoderConfig, TraceRecord, WindowDecoder};
use crate::design::{finalize, optimize_2d, optimize_scale_1d, Design2dOptions, DesignResult, ScaleSearch, ShiftRule};
use crate::encoder::{effective_rate, EncodedBlock, Interleaver, PbmstEncoder};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::limits::{sdr_db, LimitReport};
use crate::rng::{stream_rng, Stream};
use crate::source::SourceModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Exact header of the curve file.
pub const CURVE_HEADER: &str = "snr_db,distortion,sdr_db,ci95,ser,mean_iters,frames";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_hundred")]
    pub frames: usize,
    /// Number of data blocks `L`.
    #[serde(default = "default_hundred")]
    pub blocks: usize,
    pub memory: usize,
    pub window: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub cancel: CancelSetting,
    /// Channel uses per source sample, `R_c / R_s`.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub codebook: CodebookConfig,
    #[serde(default)]
    pub source: SourceConfig,
    pub code: CodeConfig,
}

fn default_hundred() -> usize {
    100
}

fn default_max_iters() -> usize {
    18
}

fn default_epsilon() -> f64 {
    1e-4
}

fn default_bandwidth() -> f64 {
    2.0
}

fn default_design_samples() -> usize {
    1_000_000
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CancelSetting {
    #[default]
    Hard,
    Soft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookConfig {
    /// `z3`, `z5`, `a2`, ...
    pub lattice: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(default)]
    pub optimize: bool,
    #[serde(default = "default_design_samples")]
    pub samples: usize,
    #[serde(default)]
    pub shift_rule: ShiftRuleSetting,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftRuleSetting {
    #[default]
    Accumulate,
    Replace,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKindSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKindSetting {
    #[default]
    Memoryless,
    PairCorrelated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub kind: CodeKindSetting,
    pub n: usize,
    /// `B` for repetition and parity-check products.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spc_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_blocks: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKindSetting {
    Repetition,
    Spc,
    TimeSharing,
}

impl SourceConfig {
    pub fn model(&self, seed: u64) -> Result<SourceModel> {
        match (self.kind, self.rho) {
            (SourceKindSetting::Memoryless, None) => Ok(SourceModel::memoryless(seed)),
            (SourceKindSetting::Memoryless, Some(_)) => Err(Error::InvalidParameter(
                "rho is only valid for the pair-correlated source".into(),
            )),
            (SourceKindSetting::PairCorrelated, Some(rho)) => SourceModel::pair_correlated(rho, seed),
            (SourceKindSetting::PairCorrelated, None) => {
                Err(Error::InvalidParameter("pair-correlated source needs rho".into()))
            }
        }
    }
}

impl CodeConfig {
    pub fn spec(&self) -> Result<CodeSpec> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("code.{name} is required for {:?}", self.kind)))
        };
        match self.kind {
            CodeKindSetting::Repetition => CodeSpec::repetition(self.n, need(self.blocks, "blocks")?),
            CodeKindSetting::Spc => CodeSpec::single_parity_check(self.n, need(self.blocks, "blocks")?),
            CodeKindSetting::TimeSharing => CodeSpec::time_sharing(
                self.n,
                need(self.spc_blocks, "spc_blocks")?,
                need(self.rep_blocks, "rep_blocks")?,
            ),
        }
    }
}

impl CodebookConfig {
    /// Builds the codebook and measures its distortion, entropy and symbol
    /// probabilities on `source`.
    pub fn design(&self, source: &SourceModel, seed: u64) -> Result<DesignResult> {
        let spec = LatticeSpec::from_name(&self.lattice)?;
        if self.samples == 0 {
            return Err(Error::InvalidParameter("codebook.samples must be positive".into()));
        }
        if self.optimize {
            if self.alpha.is_some() || self.shift.is_some() {
                return Err(Error::InvalidParameter(
                    "codebook.alpha/shift cannot be combined with optimize".into(),
                ));
            }
            return match spec.dim() {
                1 => optimize_scale_1d(spec.order(), source, self.samples, seed, ScaleSearch::default()),
                _ => {
                    if spec.name() != LatticeSpec::hexagonal_a2().name() {
                        return Err(Error::InvalidParameter(format!(
                            "no shift optimizer for {}",
                            spec.name()
                        )));
                    }
                    let opts = Design2dOptions {
                        n_samples: self.samples,
                        seed,
                        rule: match self.shift_rule {
                            ShiftRuleSetting::Accumulate => ShiftRule::Accumulate,
                            ShiftRuleSetting::Replace => ShiftRule::Replace,
                        },
                        ..Design2dOptions::default()
                    };
                    Ok(optimize_2d(source, &opts)?.result)
                }
            };
        }
        let alpha = self
            .alpha
            .ok_or_else(|| Error::InvalidParameter("codebook.alpha is required unless optimize = true".into()))?;
        let shift = self.shift.clone().unwrap_or_else(|| vec![0.0; spec.dim()]);
        finalize(&spec, alpha, &shift, source, self.samples, seed)
    }
}

/// The `[config]` section of a report, with tables nested as `[config.*]`.
#[derive(Serialize, Deserialize)]
struct ReportConfig {
    config: SimConfig,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Recovers the configuration echoed at the top of a run report.
    pub fn from_report(report: &str) -> Result<Self> {
        let head: String = report
            .lines()
            .take_while(|l| *l != "[codebook]")
            .map(|l| format!("{l}\n"))
            .collect();
        let wrapped: ReportConfig = toml::from_str(&head).map_err(|e| Error::Parse(e.to_string()))?;
        wrapped.config.validate()?;
        Ok(wrapped.config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.frames == 0 {
            return Err(Error::InvalidParameter("frames must be positive".into()));
        }
        if self.blocks == 0 {
            return Err(Error::InvalidParameter("blocks must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("SNR {bad} dB is not finite")));
        }
        self.source.model(self.seed)?;
        let spec = self.code.spec()?;
        LatticeSpec::from_name(&self.codebook.lattice)?;
        let rate = effective_rate(spec.k(), spec.length(), self.blocks, self.memory);
        let max = 1.0 / self.bandwidth;
        if rate > max * (1.0 + 1e-12) {
            return Err(Error::InfeasibleRate { rate, max });
        }
        Ok(())
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            window: self.window,
            max_iters: self.max_iters,
            epsilon: self.epsilon,
            cancel: match self.cancel {
                CancelSetting::Hard => CancelMode::Hard,
                CancelSetting::Soft => CancelMode::Soft,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    /// Mean distortion per source sample over all frames.
    pub distortion: f64,
    pub sdr_db: f64,
    /// Half-width of the 95% confidence interval on `distortion`.
    pub ci95: f64,
    /// Information-symbol error rate.
    pub ser: f64,
    /// Mean iterations per decoded block.
    pub mean_iters: f64,
    pub frames: usize,
}

/// Per-frame measurements at one SNR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameStats {
    pub distortion: f64,
    pub quantizer_distortion: f64,
    pub symbol_errors: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub points: Vec<CurvePoint>,
    pub limits: LimitReport,
    /// Mean quantization distortion of the simulated frames.
    pub frame_quantizer_distortion: f64,
    /// `frames[f][i]`: frame `f` at the `i`-th SNR.
    pub frames: Vec<Vec<FrameStats>>,
    pub power: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Everything a run needs that does not change from frame to frame.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: SimConfig,
    pub source: SourceModel,
    pub design: DesignResult,
    pub encoder: PbmstEncoder,
    pub decoder: WindowDecoder,
    pub power: f64,
    pub limits: LimitReport,
}

/// One frame's transmitted stream together with its source samples.
#[derive(Clone, Debug)]
pub struct FrameData {
    pub source: Vec<Vec<f64>>,
    pub blocks: Vec<EncodedBlock>,
}

impl Experiment {
    pub fn prepare(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let source = config.source.model(config.seed)?;
        let design = config.codebook.design(&source, config.seed)?;
        let cb = &design.codebook;
        let spec = config.code.spec()?;
        let code = ComponentCode::new(spec, cb.group().clone());
        let interleavers = Interleaver::family(spec.parity_len(), config.memory, config.seed);
        let encoder = PbmstEncoder::new(code, interleavers)?;
        let power = calibrate_power(cb, &encoder, &source, config.seed)?;
        if !(power > 0.0) {
            return Err(Error::InvalidParameter("codebook has zero transmit power".into()));
        }
        let decoder = WindowDecoder::new(&encoder, cb, &design.probabilities, config.blocks, config.decoder_config())?;
        let limits = LimitReport::new(design.entropy_bits, cb.dim(), design.distortion.min(1.0), config.bandwidth)?;
        Ok(Experiment {
            config: config.clone(),
            source,
            design,
            encoder,
            decoder,
            power,
            limits,
        })
    }

    pub fn channel(&self, snr_db: f64) -> Result<ChannelConfig> {
        ChannelConfig::new(snr_db, self.power, self.config.seed)
    }

    /// Source draws and encoding of frame `frame`.
    pub fn frame_data(&self, frame: u64) -> Result<FrameData> {
        let cb = &self.design.codebook;
        let per_block = self.encoder.code().spec().k() * cb.dim();
        let mut rng = stream_rng(self.config.seed, Stream::Source, frame);
        let mut source = Vec::with_capacity(self.config.blocks);
        for _ in 0..self.config.blocks {
            source.push(self.source.draw_with(&mut rng, per_block)?);
        }
        let blocks = self.encoder.encode_stream(cb, &source)?;
        Ok(FrameData { source, blocks })
    }

    /// Simulates one frame at every SNR of the grid.
    pub fn simulate_frame(&self, frame: u64) -> Result<Vec<FrameStats>> {
        let data = self.frame_data(frame)?;
        let cb = &self.design.codebook;
        let samples = (self.config.blocks * self.encoder.code().spec().k() * cb.dim()) as f64;
        let mut q_err = Kahan::default();
        for (s, b) in data.source.iter().zip(&data.blocks) {
            for (x, &g) in s.chunks_exact(cb.dim()).zip(&b.info) {
                q_err.add(sq_dist(x, cb.point(g)));
            }
        }
        let mut out = Vec::with_capacity(self.config.snr_db.len());
        for &snr in &self.config.snr_db {
            let ch = self.channel(snr)?;
            let y = ch.transmit(cb, &data.blocks, frame);
            let dec = self.decoder.decode(&y, ch.noise_var)?;
            let mut err = Kahan::default();
            let mut symbol_errors = 0;
            for ((s, b), u_hat) in data.source.iter().zip(&data.blocks).zip(&dec.info) {
                for ((x, &g), &h) in s.chunks_exact(cb.dim()).zip(&b.info).zip(u_hat) {
                    err.add(sq_dist(x, cb.point(h)));
                    symbol_errors += usize::from(g != h);
                }
            }
            out.push(FrameStats {
                distortion: err.sum / samples,
                quantizer_distortion: q_err.sum / samples,
                symbol_errors,
                iterations: dec.iterations.iter().sum(),
            });
        }
        Ok(out)
    }

    /// Decodes one frame with per-iteration tracing.
    pub fn trace(&self, snr_db: f64, frame: u64) -> Result<Vec<TraceRecord>> {
        let data = self.frame_data(frame)?;
        let ch = self.channel(snr_db)?;
        let y = ch.transmit(&self.design.codebook, &data.blocks, frame);
        let truth: Vec<_> = data.blocks.iter().map(|b| b.info.clone()).collect();
        Ok(self.decoder.decode_traced(&y, ch.noise_var, Some(&truth))?.trace)
    }

    /// Runs every frame on `threads` workers (`None`: one per core).
    pub fn run(&self, threads: Option<usize>) -> Result<ExperimentResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        let frames: Vec<Vec<FrameStats>> = pool.install(|| {
            (0..self.config.frames as u64)
                .into_par_iter()
                .map(|f| self.simulate_frame(f))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(self.aggregate(frames))
    }

    fn aggregate(&self, frames: Vec<Vec<FrameStats>>) -> ExperimentResult {
        let n = frames.len();
        let symbols = (n * self.config.blocks * self.encoder.code().spec().k()) as f64;
        let decoded_blocks = (n * self.config.blocks) as f64;
        let points = self
            .config
            .snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                let mut d = Kahan::default();
                for f in &frames {
                    d.add(f[i].distortion);
                }
                let mean = d.sum / n as f64;
                let ci95 = if n > 1 {
                    let mut v = Kahan::default();
                    for f in &frames {
                        v.add((f[i].distortion - mean).powi(2));
                    }
                    1.96 * (v.sum / (n - 1) as f64 / n as f64).sqrt()
                } else {
                    f64::NAN
                };
                let errors: usize = frames.iter().map(|f| f[i].symbol_errors).sum();
                let iters: usize = frames.iter().map(|f| f[i].iterations).sum();
                CurvePoint {
                    snr_db: snr,
                    distortion: mean,
                    sdr_db: sdr_db(mean),
                    ci95,
                    ser: errors as f64 / symbols,
                    mean_iters: iters as f64 / decoded_blocks,
                    frames: n,
                }
            })
            .collect();
        let mut q = Kahan::default();
        for f in &frames {
            q.add(f.first().map_or(0.0, |s| s.quantizer_distortion));
        }
        ExperimentResult {
            points,
            limits: self.limits,
            frame_quantizer_distortion: if frames.first().is_some_and(|f| !f.is_empty()) {
                q.sum / n as f64
            } else {
                f64::NAN
            },
            frames,
            power: self.power,
        }
    }

    /// Plain-text run report: configuration, codebook table, limits and the
    /// run constants, as `key = value` lines under section headers.
    pub fn report(&self, result: &ExperimentResult) -> String {
        let cb = &self.design.codebook;
        let spec = self.encoder.code().spec();
        let mut s = String::new();
        let echo = toml::to_string(&ReportConfig {
            config: self.config.clone(),
        })
        .expect("configuration serializes");
        let _ = writeln!(s, "{}", echo.trim_end());
        let _ = writeln!(s, "\n[codebook]\n{}", cb.to_table(&self.design.probabilities).trim_end());
        let _ = writeln!(s, "design_distortion = {}", self.design.distortion);
        let _ = writeln!(s, "design_entropy_bits = {}", self.design.entropy_bits);
        let _ = writeln!(s, "\n[limits]\n{}", result.limits.to_kv().trim_end());
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "master_seed = {}", self.config.seed);
        let _ = writeln!(s, "signal_power = {}", result.power);
        let _ = writeln!(s, "snr_definition = signal_power / noise_variance per real dimension");
        let _ = writeln!(s, "effective_rate = {}", effective_rate(spec.k(), spec.length(), self.config.blocks, self.config.memory));
        let _ = writeln!(s, "frame_quantizer_distortion = {}", result.frame_quantizer_distortion);
        s
    }

    /// Writes `curve.csv` and `report.txt` into `dir`.
    pub fn emit(&self, result: &ExperimentResult, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("curve.csv"), &curve_csv(&result.points))?;
        write_file(&dir.join("report.txt"), &self.report(result))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Curve file contents: [`CURVE_HEADER`] plus one line per point.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.snr_db, p.distortion, p.sdr_db, p.ci95, p.ser, p.mean_iters, p.frames
        );
    }
    s
}

/// Parses a curve file written by [`curve_csv`].
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Parse("missing curve header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Parse(format!("expected 7 fields: {line}")));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e}", f[i])));
            Ok(CurvePoint {
                snr_db: num(0)?,
                distortion: num(1)?,
                sdr_db: num(2)?,
                ci95: num(3)?,
                ser: num(4)?,
                mean_iters: num(5)?,
                frames: f[6].parse().map_err(|e| Error::Parse(format!("{}: {e}", f[6])))?,
            })
        })
        .collect()
}
