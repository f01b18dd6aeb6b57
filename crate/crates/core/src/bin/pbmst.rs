use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pbmst::limits::{constrained_limit_db, opta, LimitReport};
use pbmst::sim::{CodebookConfig, Experiment, ShiftRuleSetting, SimConfig, SourceConfig, SourceKindSetting};
use pbmst::{Error, Result};

#[derive(Parser)]
#[command(name = "pbmst", version, about = "Lattice-quantized superposition transmission of Gaussian sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design or evaluate a nested lattice quantizer and print its table.
    DesignQuantizer(DesignArgs),
    /// Constrained-entropy and rate-distortion SNR limits.
    Limits(LimitArgs),
    /// Run a Monte-Carlo SNR sweep from a configuration file.
    Simulate(SimulateArgs),
    /// Decode one frame and print the per-iteration trace.
    TraceDecode(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Memoryless,
    PairCorrelated,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShiftRuleArg {
    Accumulate,
    Replace,
}

#[derive(Args)]
struct DesignArgs {
    /// Lattice partition: z3, z5 or a2.
    #[arg(long)]
    lattice: String,
    #[arg(long)]
    seed: u64,
    /// Search the scale (and the shift for a2) instead of using --alpha/--shift.
    #[arg(long)]
    optimize: bool,
    #[arg(long, required_unless_present = "optimize")]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    shift: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "memoryless")]
    source: SourceArg,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "accumulate")]
    shift_rule: ShiftRuleArg,
    /// Also write the table to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    /// Quantizer entropy in bits per symbol.
    #[arg(long)]
    entropy: Option<f64>,
    /// Lattice dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Quantizer distortion for the rate-distortion limit.
    #[arg(long)]
    distortion: Option<f64>,
    /// Channel uses per source sample.
    #[arg(long, default_value_t = 2.0)]
    bandwidth: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// SNR grid in dB, overriding the configuration.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Output directory; defaults to the configuration's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    frame: u64,
}

impl RunArgs {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::from_file(&self.config)?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.frames {
            cfg.frames = v;
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.memory {
            cfg.memory = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        Ok(cfg)
    }
}

fn design(a: DesignArgs) -> Result<()> {
    let source = SourceConfig {
        kind: match a.source {
            SourceArg::Memoryless => SourceKindSetting::Memoryless,
            SourceArg::PairCorrelated => SourceKindSetting::PairCorrelated,
        },
        rho: a.rho,
    }
    .model(a.seed)?;
    let cfg = CodebookConfig {
        lattice: a.lattice,
        alpha: if a.optimize { None } else { a.alpha },
        shift: if a.optimize { None } else { a.shift },
        optimize: a.optimize,
        samples: a.samples,
        shift_rule: match a.shift_rule {
            ShiftRuleArg::Accumulate => ShiftRuleSetting::Accumulate,
            ShiftRuleArg::Replace => ShiftRuleSetting::Replace,
        },
    };
    let r = cfg.design(&source, a.seed)?;
    let mut text = r.codebook.to_table(&r.probabilities);
    text.push_str(&format!("distortion = {}\nentropy_bits = {}\n", r.distortion, r.entropy_bits));
    print!("{text}");
    if let Some(path) = a.output {
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    }
    Ok(())
}

fn limits(a: LimitArgs) -> Result<()> {
    match (a.entropy, a.distortion) {
        (Some(h), Some(d)) => print!("{}", LimitReport::new(h, a.dim, d, a.bandwidth)?.to_kv()),
        (Some(h), None) => println!("constrained_snr_db = {}", constrained_limit_db(h, a.dim, 1.0 / a.bandwidth)),
        (None, Some(d)) => {
            let o = opta(d, a.bandwidth)?;
            println!("opta_rate_bits = {}", o.rate_bits);
            if o.snr_db == f64::NEG_INFINITY {
                println!("opta_snr_db = -inf (no coding needed)");
            } else {
                println!("opta_snr_db = {}", o.snr_db);
            }
        }
        (None, None) => return Err(Error::InvalidParameter("give --entropy and/or --distortion".into())),
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = a.run.load()?;
    if let Some(grid) = a.snr {
        cfg.snr_db = grid;
    }
    let out = a
        .output
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidParameter("no output directory: pass --output or set `output`".into()))?;
    let exp = Experiment::prepare(&cfg)?;
    let res = exp.run(a.threads)?;
    exp.emit(&res, &out)?;
    print!("{}", pbmst::sim::curve_csv(&res.points));
    Ok(())
}

fn trace(a: TraceArgs) -> Result<()> {
    let exp = Experiment::prepare(&a.run.load()?)?;
    for r in exp.trace(a.snr, a.frame)? {
        println!("{}", r.to_line());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::DesignQuantizer(a) => design(a),
        Command::Limits(a) => limits(a),
        Command::Simulate(a) => simulate(a),
        Command::TraceDecode(a) => trace(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
