use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use privamp::adversary::{annotate_phases, lemma_audit, Transcript};
use privamp::codes::{edit_code_generate, EditCodebook, DEFAULT_E, DEFAULT_RHO};
use privamp::entropy::{DistributionTable, Source, SourceSpec};
use privamp::harness::{
    attack_transcripts, exact_extraction_distance, monte_carlo, report_emit, report_parse, Cell, ExactJob,
    ExperimentConfig, Format, StrategySpec,
};
use privamp::par::Exec;
use privamp::protocol::ExtractParams;

#[derive(Parser)]
#[command(name = "privamp", version, about = "Privacy amplification protocols against an active channel adversary")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Records,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Records => Format::Records,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Toeplitz,
    Gf2n,
    Extract,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every cell of a config and print the report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run one strategy on one grid point and keep every transcript.
    Attack {
        #[arg(long)]
        config: PathBuf,
        /// Strategy spec, e.g. `swap:0,1@guess=random`.
        #[arg(long)]
        strategy: String,
        /// Grid point index.
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Transcript file (JSON lines); stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact extractor distances by enumeration.
    ExtTest {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Fixture for W (toeplitz, extract).
        #[arg(long)]
        w: Option<PathBuf>,
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        /// Without fixtures: flat sources of this length and entropy.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sequential: bool,
    },
    /// Build, verify and cache edit codebooks.
    CodeGen {
        #[arg(long)]
        lambda_m: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_E)]
        e: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// Cache directory; the file name is derived from the parameters.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Verify an existing cache file instead of generating.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Annotate the phases of every transcript in a file.
    PhaseAudit {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
    },
    /// Re-render report records.
    Report {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>, trials: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    if let Some(t) = trials {
        cfg.experiment.trials = t;
    }
    Ok(cfg)
}

fn table_or_flat(path: &Option<PathBuf>, n: Option<usize>, k: Option<f64>, seed: u64) -> Result<DistributionTable> {
    if let Some(p) = path {
        return Ok(DistributionTable::load_fixture(p)?);
    }
    let (Some(n), Some(k)) = (n, k) else {
        bail!("give a fixture or both --n and --k");
    };
    Ok(Source::new(&SourceSpec::flat(n, k, seed)?)?.table()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            seed,
            trials,
            out,
            format,
        } => {
            let cfg = load_config(&config, seed, trials)?;
            let format = format.map(Format::from).unwrap_or(cfg.report.format);
            let report = monte_carlo(&cfg)?;
            write_out(out.as_deref(), &report_emit(&report, format))
        }
        Cmd::Attack {
            config,
            strategy,
            point,
            seed,
            trials,
            out,
        } => {
            let cfg = load_config(&config, seed, Some(trials))?;
            let spec: StrategySpec = strategy.parse()?;
            let grid = cfg.grid()?;
            let Some(gp) = grid.into_iter().nth(point) else {
                bail!("grid point {point} does not exist");
            };
            let params = gp.map_err(|(_, why)| anyhow::anyhow!("grid point {point} is infeasible: {why}"))?;
            let cell = Cell::new(&cfg, params, spec, point, 0)?;
            let mut text = Vec::new();
            let mut wins = 0;
            let mut correct = 0;
            let runs = attack_transcripts(&cell, trials)?;
            for (o, tr) in &runs {
                tr.write_jsonl(&mut text)?;
                wins += o.eve_wins as usize;
                correct += o.correct as usize;
            }
            write_out(out.as_deref(), std::str::from_utf8(&text)?)?;
            eprintln!("{} trials: {correct} correct, {wins} eve wins", runs.len());
            Ok(())
        }
        Cmd::ExtTest {
            mode,
            w,
            x,
            y,
            n,
            k,
            m,
            seed,
            sequential,
        } => {
            let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
            let job = match mode {
                Mode::Toeplitz => ExactJob::Toeplitz {
                    w: table_or_flat(&w, n, k, seed)?,
                    m,
                },
                Mode::Gf2n => ExactJob::Gf2n {
                    x: table_or_flat(&x, n, k, seed)?,
                    y: table_or_flat(&y, n, k, seed.wrapping_add(1))?,
                    m,
                },
                Mode::Extract => {
                    let params = ExtractParams::desk();
                    ExactJob::Extract {
                        w: table_or_flat(&w, Some(params.w_len), Some(params.kw), seed)?,
                        x: table_or_flat(&x, Some(params.n), Some(params.kx), seed.wrapping_add(1))?,
                        y: table_or_flat(&y, Some(params.n), Some(params.ky), seed.wrapping_add(2))?,
                        params,
                    }
                }
            };
            let d = exact_extraction_distance(&job, exec)?;
            println!("{d:.12}");
            Ok(())
        }
        Cmd::CodeGen {
            lambda_m,
            e,
            rho,
            cache,
            out,
            verify,
        } => {
            if let Some(p) = verify {
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                let book = EditCodebook::from_cache_text(&text)?;
                book.verify()?;
                println!(
                    "ok: {} codewords of {} bits, weight {}",
                    book.codewords().len(),
                    book.lambda_c,
                    book.weight
                );
                return Ok(());
            }
            let Some(lm) = lambda_m else {
                bail!("--lambda-m is required unless --verify is given");
            };
            let book = match &cache {
                Some(dir) => EditCodebook::load_or_generate(dir, lm, e, rho)?,
                None => edit_code_generate(lm, e, rho)?,
            };
            if let Some(dir) = &cache {
                eprintln!("cached at {}", EditCodebook::cache_path(dir, lm, e, rho).display());
            }
            if out.is_some() || cache.is_none() {
                write_out(out.as_deref(), &book.to_cache_text())?;
            }
            Ok(())
        }
        Cmd::PhaseAudit { path, format } => {
            let f = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let trs = Transcript::read_jsonl(BufReader::new(f))?;
            let mut violations = 0;
            for (tr, complete) in &trs {
                let a = annotate_phases(tr, *complete);
                let audit = lemma_audit(&a);
                violations += audit.violations.len();
                match Format::from(format) {
                    Format::Records => {
                        println!("{}", serde_json::json!({ "annotation": a, "audit": audit }));
                    }
                    Format::Table => {
                        println!(
                            "trial {} ({}): {} phases, {} bad, {} challenge, audit {}",
                            a.trial,
                            a.strategy,
                            a.phases.len(),
                            a.bad_phases(),
                            a.challenge_phases(),
                            if audit.holds() { "holds" } else { "VIOLATED" }
                        );
                        for p in &a.phases {
                            let ops: Vec<String> = p.ops.iter().map(|o| format!("{:?}@{}", o.kind, o.seq)).collect();
                            println!(
                                "  phase {} [{}..{}]{}{} {}",
                                p.index,
                                p.first_seq,
                                p.last_seq,
                                if p.bad { " bad" } else { "" },
                                if p.challenge { " challenge" } else { "" },
                                ops.join(" ")
                            );
                        }
                        for w in &a.warnings {
                            println!("  warning: {w}");
                        }
                    }
                }
            }
            if violations > 0 {
                bail!("{violations} adjacent bad phase pairs without a challenge");
            }
            Ok(())
        }
        Cmd::Report { path, format, out } => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report = report_parse(&text)?;
            write_out(out.as_deref(), &report_emit(&report, format.into()))
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
