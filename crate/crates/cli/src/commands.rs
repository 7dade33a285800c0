//! Pipeline commands. Each returns its report instead of printing so the
//! binary and the tests share one code path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hlgkit::allophone::{map_logits, AllophoneMap, LogitMatrix};
use hlgkit::decoder::{decode, BeamConfig, DecodeError};
use hlgkit::eval::{self, edit_align, format_alignment, Decomposition, ErrorReport, ScoreTable, Unit};
use hlgkit::g2p::{phonemize_lexicon, G2pReport, PhyloTree, PronLexicon, RuleTable};
use hlgkit::graphs::{build_decoder_graph, BuildOptions, DecoderGraph};
use hlgkit::ingest::{
    self, descriptive_stats, normalize_corpus, normalize_line, BigramStats, Punctuation,
    StatsSummary,
};
use hlgkit::lm::{self, NgramModel, BOS, EOS, UNK};
use rayon::prelude::*;

use crate::config::{beam_entries, beams_from_manifest, LmSource, PronSource, Settings};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
}

/// What `build-decoder` did.
#[derive(Debug)]
pub struct BuildSummary {
    pub vocabulary: usize,
    pub order: usize,
    pub lexicon_words: usize,
    pub dropped: Vec<String>,
    pub states: usize,
    pub arcs: usize,
}

impl std::fmt::Display for BuildSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "vocabulary: {} words", self.vocabulary)?;
        writeln!(f, "lm order: {}", self.order)?;
        writeln!(f, "lexicon: {} words", self.lexicon_words)?;
        writeln!(f, "hlg: {} states, {} arcs", self.states, self.arcs)?;
        write!(f, "dropped: {} words", self.dropped.len())?;
        if !self.dropped.is_empty() {
            write!(f, " ({})", self.dropped.join(" "))?;
        }
        writeln!(f)
    }
}

fn load_model(src: &LmSource) -> Result<(NgramModel, String)> {
    match src {
        LmSource::Corpus { path, order } => {
            let corpus = normalize_corpus(open(path)?, &Punctuation::default())
                .with_context(|| format!("ingest: reading corpus {}", path.display()))?;
            let counts = lm::count(&corpus, *order).context("lm: counting n-grams")?;
            Ok((lm::estimate(&counts), path.display().to_string()))
        }
        LmSource::Stats { unigrams, bigrams } => {
            let uni = ingest::parse_unigrams(open(unigrams)?)
                .with_context(|| format!("ingest: {}", unigrams.display()))?;
            warn_skipped(unigrams, &uni.skipped_lines);
            let bi = match bigrams {
                Some(p) if p.exists() => {
                    let bi = ingest::parse_bigrams(open(p)?);
                    match bi {
                        Ok(bi) => {
                            warn_skipped(p, &bi.skipped_lines);
                            bi.stats
                        }
                        Err(e) => {
                            log::warn!("{}: {e}; building a unigram-only model", p.display());
                            BigramStats::default()
                        }
                    }
                }
                Some(p) => {
                    log::warn!("bigram file {} is missing; building a unigram-only model", p.display());
                    BigramStats::default()
                }
                None => {
                    log::warn!("no bigram file configured; building a unigram-only model");
                    BigramStats::default()
                }
            };
            let counts = lm::from_stats(&uni.stats, &bi).context("lm: reading statistics")?;
            Ok((lm::estimate(&counts), unigrams.display().to_string()))
        }
    }
}

fn warn_skipped(path: &Path, lines: &[usize]) {
    if !lines.is_empty() {
        let shown: Vec<String> = lines.iter().take(10).map(|l| l.to_string()).collect();
        log::warn!(
            "{}: skipped {} malformed lines (lines {}{})",
            path.display(),
            lines.len(),
            shown.join(", "),
            if lines.len() > 10 { ", ..." } else { "" }
        );
    }
}

/// Vocabulary words that need a pronunciation (no sentence markers or `<unk>`).
fn spoken_vocabulary(model: &NgramModel) -> Vec<String> {
    model
        .vocab()
        .iter()
        .filter(|w| ![BOS, EOS, UNK].contains(&w.as_str()))
        .cloned()
        .collect()
}

/// Reads every `<lang>.txt` rule table in `dir`.
pub fn load_rule_tables(dir: &Path) -> Result<BTreeMap<String, RuleTable>> {
    let mut tables = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for e in entries {
        let p = e?.path();
        if p.extension().and_then(|x| x.to_str()) != Some("txt") {
            continue;
        }
        let Some(lang) = p.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let t = RuleTable::read(lang, open(&p)?)
            .with_context(|| format!("g2p: rule table {}", p.display()))?;
        tables.insert(lang.to_string(), t);
    }
    Ok(tables)
}

/// Phonemizes `words` with the configured tree and rule tables.
pub fn run_g2p(settings: &Settings, words: &[String]) -> Result<(PronLexicon, G2pReport)> {
    let PronSource::G2p { tree, tables, k } = settings.pron_source()? else {
        bail!("g2p needs g2p.tree and g2p.tables, not a fixed lexicon");
    };
    let tree = PhyloTree::read(open(&tree)?)
        .with_context(|| format!("g2p: tree {}", tree.display()))?;
    let tables = load_rule_tables(&tables)?;
    let lang = settings.language()?;
    phonemize_lexicon(words, &tree, &tables, &lang, k).context("g2p")
}

pub fn build(settings: &Settings, out: &Path) -> Result<BuildSummary> {
    let lang = settings.language()?;
    let src = settings.lm_source()?;
    let (model, lm_source) = load_model(&src).context("language model stage failed")?;
    let words = spoken_vocabulary(&model);
    let (lex, lexicon_source, dropped, neighbours) = match settings.pron_source()? {
        PronSource::Lexicon(p) => {
            let lex = open(&p)
                .and_then(|r| Ok(PronLexicon::read(r)?))
                .with_context(|| format!("g2p stage failed: lexicon {}", p.display()))?;
            let dropped: Vec<String> =
                words.iter().filter(|w| lex.get(w).is_none()).cloned().collect();
            (lex, p.display().to_string(), dropped, None)
        }
        PronSource::G2p { tree, k, .. } => {
            let (lex, report) = run_g2p(settings, &words).context("g2p stage failed")?;
            let n: Vec<String> = report.neighbours.iter().map(|(l, _)| l.clone()).collect();
            (
                lex,
                format!("g2p:{}:k={k}", tree.display()),
                report.dropped,
                Some(n.join(",")),
            )
        }
    };
    if lex.is_empty() {
        bail!("g2p stage failed: no vocabulary word has a pronunciation");
    }
    let opts = BuildOptions {
        blank_loop: settings.blank_loop()?,
        lm_source,
        lexicon_source,
    };
    let mut graph = build_decoder_graph(&model, &lex, &opts).context("graph stage failed")?;
    graph.provenance.insert("language".into(), lang);
    if let Some(n) = neighbours {
        graph.provenance.insert("g2p_neighbours".into(), n);
    }
    graph
        .provenance
        .extend(beam_entries(&settings.beams(BeamConfig::default())?));
    graph
        .save(out)
        .with_context(|| format!("writing graph to {}", out.display()))?;
    Ok(BuildSummary {
        vocabulary: words.len(),
        order: model.order(),
        lexicon_words: lex.len(),
        dropped,
        states: graph.hlg.num_states(),
        arcs: graph.hlg.num_arcs(),
    })
}

/// Outcome of a batch decode; `failed` holds (utterance, error message).
#[derive(Debug, Default)]
pub struct DecodeSummary {
    pub decoded: usize,
    pub failed: Vec<(String, String)>,
}

/// Reads `utt_id<TAB>path` lines; paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, file)) = line.split_once('\t') else {
            bail!("{}:{}: expected `utt_id<TAB>logit_file`", path.display(), i + 1);
        };
        if !seen.insert(id.to_string()) {
            bail!("{}:{}: duplicate utterance id {id:?}", path.display(), i + 1);
        }
        out.push((id.to_string(), base.join(file.trim())));
    }
    Ok(out)
}

fn graph_columns(graph: &DecoderGraph) -> Vec<String> {
    graph.phonemes.iter().skip(1).map(|(_, s)| s.to_string()).collect()
}

fn load_logits(
    path: &Path,
    cols: &[String],
    allophones: Option<&(AllophoneMap, hlgkit::allophone::PoolMode)>,
) -> Result<LogitMatrix> {
    let m = LogitMatrix::load(path, Some(cols))?;
    let m = match allophones {
        Some((map, mode)) => map_logits(&m, map, *mode)?,
        None => m,
    };
    if m.symbols() == cols {
        Ok(m)
    } else {
        Ok(m.select(cols)?)
    }
}

/// Decodes every manifest entry and writes `utt_id<TAB>words[<TAB>cost]`
/// lines in manifest order. Utterances without a surviving path get an
/// empty hypothesis; unreadable ones are reported as failed.
pub fn decode_batch(
    graph_dir: &Path,
    manifest: &Path,
    settings: &Settings,
    jobs: usize,
    costs: bool,
    out: &mut dyn Write,
) -> Result<DecodeSummary> {
    let graph = DecoderGraph::load(graph_dir)
        .with_context(|| format!("loading graph {}", graph_dir.display()))?;
    let beams = settings.beams(beams_from_manifest(&graph.provenance)?)?;
    let allophones = match settings.path("decode.allophones") {
        Some(p) => {
            let lang = settings.get("language").unwrap_or("").to_string();
            let map = AllophoneMap::read(lang, open(&p)?)
                .with_context(|| format!("allophone map {}", p.display()))?;
            Some((map, settings.pool_mode()?))
        }
        None => None,
    };
    let items = read_manifest(manifest)?;
    let cols = graph_columns(&graph);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let results: Vec<Result<(Vec<String>, f64)>> = pool.install(|| {
        items
            .par_iter()
            .map(|(id, path)| {
                let m = load_logits(path, &cols, allophones.as_ref())
                    .with_context(|| format!("{}", path.display()))?;
                match decode(&graph, &m, &beams) {
                    Ok(r) => Ok((r.words, r.total_cost.value())),
                    Err(DecodeError::NoPath) => {
                        log::warn!("{id}: no path survived; writing an empty hypothesis");
                        Ok((Vec::new(), f64::INFINITY))
                    }
                    Err(e) => Err(e.into()),
                }
            })
            .collect()
    });
    let mut summary = DecodeSummary::default();
    for ((id, _), r) in items.iter().zip(results) {
        match r {
            Ok((words, cost)) => {
                summary.decoded += 1;
                if costs {
                    writeln!(out, "{id}\t{}\t{cost:.4}", words.join(" "))?;
                } else {
                    writeln!(out, "{id}\t{}", words.join(" "))?;
                }
            }
            Err(e) => summary.failed.push((id.clone(), format!("{e:#}"))),
        }
    }
    out.flush()?;
    Ok(summary)
}

/// Reads `utt_id<TAB>text` lines (a bare id means an empty transcript).
pub fn read_transcripts(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let id = id.trim();
        if id.is_empty() {
            bail!("{}:{}: missing utterance id", path.display(), i + 1);
        }
        if !seen.insert(id.to_string()) {
            bail!("{}:{}: duplicate utterance id {id:?}", path.display(), i + 1);
        }
        // Cost column from `decode --costs` is ignored.
        let text = text.split('\t').next().unwrap_or("");
        out.push((id.to_string(), text.to_string()));
    }
    Ok(out)
}

/// Text normalization shared by references and hypotheses.
fn normalize_for(unit: Unit, text: &str) -> String {
    match unit {
        Unit::Phoneme => text.to_string(),
        Unit::Char | Unit::Word => normalize_line(text, &Punctuation::default()).join(" "),
    }
}

/// Pairs each reference with its hypothesis by id; a missing hypothesis is empty.
pub fn pair_up(
    refs: &[(String, String)],
    hyps: &[(String, String)],
    hyp_name: &str,
) -> Vec<(String, String, String)> {
    let map: HashMap<&str, &str> = hyps.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    let ref_ids: BTreeSet<&str> = refs.iter().map(|(i, _)| i.as_str()).collect();
    let missing = refs.iter().filter(|(i, _)| !map.contains_key(i.as_str())).count();
    if missing > 0 {
        log::warn!("{hyp_name}: {missing} references have no hypothesis; scored as empty");
    }
    let extra = hyps.iter().filter(|(i, _)| !ref_ids.contains(i.as_str())).count();
    if extra > 0 {
        log::warn!("{hyp_name}: {extra} hypotheses have no reference and are ignored");
    }
    refs.iter()
        .map(|(i, r)| (i.clone(), r.clone(), map.get(i.as_str()).unwrap_or(&"").to_string()))
        .collect()
}

/// One language's files for `score`.
#[derive(Clone, Debug)]
pub struct ScoreInput {
    pub language: String,
    pub reference: PathBuf,
    pub hypothesis: PathBuf,
}

/// Scores each language under every unit. Alignments, when requested, use
/// word units if scored and the first unit otherwise.
pub fn score(
    inputs: &[ScoreInput],
    units: &[Unit],
    mut alignments: Option<&mut dyn Write>,
) -> Result<ScoreTable> {
    let mut table = ScoreTable {
        units: units.to_vec(),
        rows: Vec::new(),
    };
    for inp in inputs {
        let refs = read_transcripts(&inp.reference)?;
        let hyps = read_transcripts(&inp.hypothesis)?;
        let pairs = pair_up(&refs, &hyps, &inp.hypothesis.display().to_string());
        let mut reps: Vec<ErrorReport> = Vec::new();
        for &u in units {
            let p: Vec<(String, String)> = pairs
                .iter()
                .map(|(_, r, h)| (normalize_for(u, r), normalize_for(u, h)))
                .collect();
            reps.push(
                eval::score_corpus(&p, u)
                    .with_context(|| format!("scoring {}", inp.reference.display()))?,
            );
        }
        if let Some(w) = alignments.as_deref_mut() {
            let u = if units.contains(&Unit::Word) {
                Unit::Word
            } else {
                units.first().copied().unwrap_or_default()
            };
            for (id, r, h) in &pairs {
                let (r, h) = (normalize_for(u, r), normalize_for(u, h));
                let (rep, ali) = edit_align(&u.tokens(&r), &u.tokens(&h), u);
                writeln!(w, "{} {id} ({} errors)", inp.language, rep.errors())?;
                write!(w, "{}", format_alignment(&ali))?;
            }
        }
        table.rows.push((inp.language.clone(), reps));
    }
    Ok(table)
}

pub fn decompose(
    reference: &Path,
    observed: &Path,
    oracle: &Path,
    unit: Unit,
) -> Result<Decomposition> {
    let refs = read_transcripts(reference)?;
    let norm = |v: Vec<(String, String, String)>| -> Vec<(String, String)> {
        v.into_iter()
            .map(|(_, r, h)| (normalize_for(unit, &r), normalize_for(unit, &h)))
            .collect()
    };
    let obs = norm(pair_up(&refs, &read_transcripts(observed)?, &observed.display().to_string()));
    let orc = norm(pair_up(&refs, &read_transcripts(oracle)?, &oracle.display().to_string()));
    Ok(eval::decompose(&obs, &orc, unit)?)
}

pub fn format_decomposition(d: &Decomposition) -> String {
    let name = d.observed.unit.rate_name();
    format!(
        "observed {name}: {:.4}\nlm (oracle) {name}: {:.4}\nam/pm {name}: {:.4}\n",
        d.observed.rate(),
        d.lm.rate(),
        d.am_pm_rate
    )
}

/// (language, distinct unigrams, distinct bigrams)
pub type LanguageCounts = (String, u64, u64);

/// Distinct unigram and bigram counts per `<dir>/<lang>/` with `unigrams.txt`
/// and an optional `bigrams.txt`.
pub fn stats(dir: &Path) -> Result<(Vec<LanguageCounts>, StatsSummary)> {
    let mut langs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    langs.sort();
    let mut rows = Vec::new();
    for l in langs {
        let name = l.file_name().unwrap().to_string_lossy().to_string();
        let uni_path = l.join("unigrams.txt");
        if !uni_path.exists() {
            log::warn!("{}: no unigrams.txt, skipped", l.display());
            continue;
        }
        let uni = ingest::parse_unigrams(open(&uni_path)?)
            .with_context(|| format!("{}", uni_path.display()))?;
        warn_skipped(&uni_path, &uni.skipped_lines);
        let bi_path = l.join("bigrams.txt");
        let bi = if bi_path.exists() {
            match ingest::parse_bigrams(open(&bi_path)?) {
                Ok(b) => {
                    warn_skipped(&bi_path, &b.skipped_lines);
                    b.stats.entries.len() as u64
                }
                Err(e) => {
                    log::warn!("{}: {e}", bi_path.display());
                    0
                }
            }
        } else {
            0
        };
        rows.push((name, uni.stats.entries.len() as u64, bi));
    }
    let pairs: Vec<(u64, u64)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let summary = descriptive_stats(&pairs).context("no language directories with unigrams")?;
    Ok((rows, summary))
}

/// Reads one word per line (further whitespace-separated tokens are ignored).
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        if let Some(w) = line?.split_whitespace().next() {
            out.push(w.to_string());
        }
    }
    Ok(out)
}

pub fn write_lexicon(lex: &PronLexicon, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => lex.write(BufWriter::new(File::create(p)?))?,
        None => lex.write(std::io::stdout().lock())?,
    }
    Ok(())
}
