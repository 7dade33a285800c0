use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hlgkit::eval::Unit;
use hlgkit_cli::commands::{self, ScoreInput};
use hlgkit_cli::config::Settings;

#[derive(Parser)]
#[command(name = "hlgkit", version, about = "Build and run HLG decoders for unseen languages")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (graph directory, hypothesis file, report or lexicon)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for decoding
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Override a configuration key (repeatable), e.g. --set lm.order=2
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Language code; same as --set language=...
    #[arg(long, global = true)]
    language: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the LM, phonemize the vocabulary and write the decoder graph
    BuildDecoder,
    /// Decode a manifest of logit files with a built graph
    Decode {
        /// Graph directory written by build-decoder
        #[arg(long)]
        graph: PathBuf,
        /// `utt_id<TAB>logit_file` lines
        #[arg(long)]
        manifest: PathBuf,
        /// Append the path cost as a third column
        #[arg(long)]
        costs: bool,
    },
    /// Error rates of hypotheses against references
    Score {
        #[arg(long = "ref", required = true)]
        reference: Vec<PathBuf>,
        #[arg(long = "hyp", required = true)]
        hypothesis: Vec<PathBuf>,
        /// Row label per ref/hyp pair (defaults to the reference file stem)
        #[arg(long = "lang")]
        langs: Vec<String>,
        /// phoneme, char or word (repeatable; default char and word)
        #[arg(long)]
        unit: Vec<Unit>,
        /// Write REF/HYP alignments here (word units when scored)
        #[arg(long)]
        alignments: Option<PathBuf>,
    },
    /// Split observed error into LM and acoustic/pronunciation parts
    Decompose {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long, default_value = "word")]
        unit: Unit,
    },
    /// Summary statistics of per-language unigram and bigram counts
    Stats {
        /// Directory with one subdirectory per language
        dir: PathBuf,
    },
    /// Phonemize a word list with the nearest languages' rule tables
    G2p {
        /// One word per line
        words: PathBuf,
    },
}

fn settings(c: &Common) -> Result<Settings> {
    let mut s = match &c.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(o) = &c.out {
        s.set("out", &o.to_string_lossy())?;
    }
    if let Some(l) = &c.language {
        s.set("language", l)?;
    }
    for kv in &c.overrides {
        s.set_override(kv)?;
    }
    Ok(s)
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.cmd {
        Command::BuildDecoder => {
            let s = settings(common)?;
            let out = s.path("out").context("no output directory (pass --out)")?;
            let summary = commands::build(&s, &out)?;
            print!("{summary}");
        }
        Command::Decode {
            graph,
            manifest,
            costs,
        } => {
            let s = settings(common)?;
            let mut w = writer(common.out.as_deref())?;
            let summary =
                commands::decode_batch(&graph, &manifest, &s, common.jobs, costs, &mut *w)?;
            drop(w);
            for (id, e) in &summary.failed {
                log::error!("{id}: {e}");
            }
            if !summary.failed.is_empty() {
                bail!(
                    "{} of {} utterances failed",
                    summary.failed.len(),
                    summary.failed.len() + summary.decoded
                );
            }
        }
        Command::Score {
            reference,
            hypothesis,
            langs,
            unit,
            alignments,
        } => {
            if reference.len() != hypothesis.len() {
                bail!("give one --hyp per --ref");
            }
            if !langs.is_empty() && langs.len() != reference.len() {
                bail!("give one --lang per --ref, or none");
            }
            let units = if unit.is_empty() {
                vec![Unit::Char, Unit::Word]
            } else {
                unit
            };
            let inputs: Vec<ScoreInput> = reference
                .iter()
                .zip(&hypothesis)
                .enumerate()
                .map(|(i, (r, h))| ScoreInput {
                    language: langs.get(i).cloned().unwrap_or_else(|| {
                        r.file_stem().unwrap_or_default().to_string_lossy().into_owned()
                    }),
                    reference: r.clone(),
                    hypothesis: h.clone(),
                })
                .collect();
            let mut ali = alignments.as_deref().map(|p| writer(Some(p))).transpose()?;
            let table = commands::score(&inputs, &units, ali.as_deref_mut().map(|w| w as &mut dyn Write))?;
            drop(ali);
            let mut w = writer(common.out.as_deref())?;
            write!(w, "{table}")?;
        }
        Command::Decompose {
            reference,
            observed,
            oracle,
            unit,
        } => {
            let d = commands::decompose(&reference, &observed, &oracle, unit)?;
            let mut w = writer(common.out.as_deref())?;
            write!(w, "{}", commands::format_decomposition(&d))?;
        }
        Command::Stats { dir } => {
            let (rows, summary) = commands::stats(&dir)?;
            let mut w = writer(common.out.as_deref())?;
            writeln!(w, "language\tunigrams\tbigrams")?;
            for (l, u, b) in rows {
                writeln!(w, "{l}\t{u}\t{b}")?;
            }
            writeln!(w, "{summary}")?;
        }
        Command::G2p { words } => {
            let s = settings(common)?;
            let list = commands::read_word_list(&words)?;
            let (lex, report) = commands::run_g2p(&s, &list)?;
            let names: Vec<String> = report
                .neighbours
                .iter()
                .map(|(l, d)| format!("{l}({d})"))
                .collect();
            log::info!("neighbours: {}", names.join(" "));
            if !report.dropped.is_empty() {
                log::warn!("no pronunciation for: {}", report.dropped.join(" "));
            }
            commands::write_lexicon(&lex, common.out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
