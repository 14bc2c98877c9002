use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use midicoth::{
    compress, corpus, decompress, layer_bit_accounting, stage_accounting, AblationRow, Container,
    PipelineConfig,
};

#[derive(Parser)]
#[command(name = "midicoth", version, about = "Lossless byte-stream compressor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress INPUT into OUTPUT ("-" for stdin/stdout).
    C {
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(default_value = "-")]
        output: PathBuf,
        #[command(flatten)]
        layers: LayerArgs,
    },
    /// Decompress INPUT into OUTPUT ("-" for stdin/stdout).
    D {
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(default_value = "-")]
        output: PathBuf,
    },
    /// Run the five-row layer ablation on each file.
    Bench {
        /// Files to benchmark. Defaults to alice29.txt and enwik8_3M from the corpus directory.
        files: Vec<PathBuf>,
        /// Corpus directory, overriding MIDICOTH_CORPUS.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
        steps: u8,
    },
    /// Compress once and report per-layer bit accounting and score diagnostics.
    Stats {
        input: PathBuf,
        /// Write the mean |correction| table as TSV.
        #[arg(long)]
        stats_out: Option<PathBuf>,
        #[command(flatten)]
        layers: LayerArgs,
    },
}

#[derive(Args, Clone, Copy)]
struct LayerArgs {
    #[arg(long)]
    no_match: bool,
    #[arg(long)]
    no_word: bool,
    #[arg(long)]
    no_highctx: bool,
    #[arg(long)]
    no_tweedie: bool,
    /// Denoising steps.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    steps: u8,
}

impl LayerArgs {
    fn config(self) -> PipelineConfig {
        PipelineConfig {
            enable_match: !self.no_match,
            enable_word: !self.no_word,
            enable_highctx: !self.no_highctx,
            enable_tweedie: !self.no_tweedie,
            tweedie_steps: self.steps,
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).context("reading stdin")?;
        Ok(buf)
    } else {
        fs::read(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(path: &Path, data: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        let mut out = io::stdout().lock();
        out.write_all(data).context("writing stdout")?;
        out.flush().context("writing stdout")
    } else {
        fs::write(path, data).with_context(|| format!("writing {}", path.display()))
    }
}

fn bpb(size: usize, original: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        size as f64 * 8.0 / original as f64
    }
}

fn ratio(size: usize, original: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        100.0 * size as f64 / original as f64
    }
}

fn cmd_compress(input: &Path, output: &Path, layers: LayerArgs) -> Result<()> {
    let data = read_input(input)?;
    let start = Instant::now();
    let out = compress(&data, layers.config()).to_bytes();
    let secs = start.elapsed().as_secs_f64();
    write_output(output, &out)?;
    eprintln!(
        "{} -> {} bytes  ratio {:.2}%  {:.3} bpb  {:.1} KB/s",
        data.len(),
        out.len(),
        ratio(out.len(), data.len()),
        bpb(out.len(), data.len()),
        data.len() as f64 / 1024.0 / secs.max(1e-9),
    );
    Ok(())
}

fn cmd_decompress(input: &Path, output: &Path) -> Result<()> {
    let data = read_input(input)?;
    let container = Container::parse(&data).context("invalid container")?;
    let out = decompress(&container).context("decompression failed")?;
    write_output(output, &out)
}

const DEFAULT_BENCH: [&str; 2] = ["alice29.txt", corpus::ENWIK8_3M];

fn cmd_bench(files: Vec<PathBuf>, dir: Option<PathBuf>, steps: u8) -> Result<()> {
    let inputs: Vec<(String, io::Result<Vec<u8>>)> = if files.is_empty() {
        let dir = dir.unwrap_or_else(|| corpus::dir_or("corpus"));
        DEFAULT_BENCH
            .iter()
            .map(|name| (name.to_string(), corpus::load(&dir, name)))
            .collect()
    } else {
        files
            .iter()
            .map(|f| {
                let name = f
                    .file_name()
                    .map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into());
                (name, fs::read(f))
            })
            .collect()
    };
    let mut machine = Vec::new();
    let mut missing = Vec::new();
    for (name, data) in inputs {
        let data = match data {
            Ok(d) => d,
            Err(e) => {
                eprintln!("midicoth: skipping {name}: {e}");
                missing.push(name);
                continue;
            }
        };
        let rows = layer_bit_accounting(&data, steps);
        print_bench(&name, &rows);
        for r in &rows {
            machine.push(format!(
                "ROW\t{}\t{}\t{}\t{:.4}\t{}\t{:.3}",
                name,
                r.name,
                r.size,
                r.ratio_percent(),
                r.delta_percent
                    .map_or_else(|| "-".into(), |d| format!("{d:.4}")),
                r.elapsed.as_secs_f64()
            ));
        }
    }
    for line in machine {
        println!("{line}");
    }
    if !missing.is_empty() {
        bail!("missing benchmark files: {}", missing.join(", "));
    }
    Ok(())
}

fn print_bench(name: &str, rows: &[AblationRow]) {
    println!("{name}");
    println!(
        "{:<18} {:>12} {:>9} {:>8} {:>8} {:>9}",
        "Configuration", "Size", "Ratio", "bpb", "Delta", "Time"
    );
    for r in rows {
        println!(
            "{:<18} {:>12} {:>8.2}% {:>8.3} {:>8} {:>8.2}s",
            r.name,
            r.size,
            r.ratio_percent(),
            r.bpb(),
            r.delta_percent
                .map_or_else(|| "-".into(), |d| format!("{d:+.2}%")),
            r.elapsed.as_secs_f64()
        );
    }
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        let total = 100.0 * (first.size as f64 - last.size as f64) / first.size as f64;
        println!("Total improvement {total:+.2}%");
    }
    println!();
}

fn cmd_stats(input: &Path, stats_out: Option<&Path>, layers: LayerArgs) -> Result<()> {
    let data = read_input(input)?;
    let report = stage_accounting(&data, layers.config());
    let size = report.container.to_bytes().len();
    println!("{:<10} {:>14} {:>8}", "Layer", "Ideal bytes", "bpb");
    for (stage, bits) in &report.stage_bits {
        println!(
            "{:<10} {:>14.1} {:>8.4}",
            stage.name(),
            bits / 8.0,
            bits / data.len().max(1) as f64
        );
    }
    println!(
        "{:<10} {:>14.1} {:>8.4}",
        "quantized",
        report.quantized_bits / 8.0,
        report.quantized_bits / data.len().max(1) as f64
    );
    println!(
        "{:<10} {:>14} {:>8.4}",
        "container",
        size,
        bpb(size, data.len())
    );
    match &report.diagnostics {
        Some(diag) => {
            println!();
            let tsv = diag.to_tsv();
            print!("{tsv}");
            if let Some(path) = stats_out {
                fs::write(path, &tsv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => {
            if stats_out.is_some() {
                bail!("--stats-out needs the denoising layer enabled");
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::C {
            input,
            output,
            layers,
        } => cmd_compress(&input, &output, layers),
        Command::D { input, output } => cmd_decompress(&input, &output),
        Command::Bench {
            files,
            corpus,
            steps,
        } => cmd_bench(files, corpus, steps),
        Command::Stats {
            input,
            stats_out,
            layers,
        } => cmd_stats(&input, stats_out.as_deref(), layers),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("midicoth: {e:#}");
            ExitCode::FAILURE
        }
    }
}
