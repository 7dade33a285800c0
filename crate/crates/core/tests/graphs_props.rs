mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc as Shared;

use hlgkit::fst::{compose, shortest_path, Label, SymbolTable, Wfst, EPS};
use hlgkit::g2p::PronLexicon;
use hlgkit::graphs::{
    build_ctc_topology, build_decoder_graph, build_hlg, build_lexicon_fst, phoneme_table,
    BuildOptions, DecoderGraph, BLANK,
};
use hlgkit::ingest::Corpus;
use hlgkit::lm::{count, estimate, NgramModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn all_sequences(alphabet: &[Label], max_len: usize) -> Vec<Vec<Label>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &a in alphabet {
                let mut t: Vec<Label> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn ctc_topology_matches_collapse_exhaustively() {
    let ph = Shared::new(phoneme_table(&strings(&["a", "b"])));
    let h = build_ctc_topology(&ph, true).unwrap();
    for seq in all_sequences(&[BLANK, 2, 3], 4) {
        let paths = shortest_path(&compose(&Wfst::linear_acceptor(&seq), &h).unwrap(), 4);
        assert_eq!(paths.len(), 1, "{seq:?}");
        assert_eq!(paths[0].olabels, oracle::ctc_collapse(&seq, BLANK), "{seq:?}");
    }
}

/// Every phoneme sequence is reachable from any frame count ≥ its minimal CTC length.
#[test]
fn ctc_topology_accepts_every_target_with_enough_frames() {
    let ph = Shared::new(phoneme_table(&strings(&["a", "b"])));
    let h = build_ctc_topology(&ph, true).unwrap();
    let inputs = all_sequences(&[BLANK, 2, 3], 6);
    for target in all_sequences(&[2, 3], 3) {
        let min_len = target.len() + target.windows(2).filter(|w| w[0] == w[1]).count();
        for frames in min_len..=6 {
            let ok = inputs.iter().filter(|s| s.len() == frames).any(|s| {
                let out = compose(&Wfst::linear_acceptor(s), &h).unwrap();
                let fin = compose(&out, &Wfst::linear_acceptor(&target)).unwrap().connect();
                fin.num_states() > 0
            });
            assert!(ok, "{target:?} with {frames} frames");
        }
    }
}

fn random_lexicon<R: Rng>(rng: &mut R, n_words: usize, phones: &[String]) -> PronLexicon {
    let mut lex = PronLexicon::new();
    for w in 0..n_words {
        for _ in 0..rng.gen_range(1..=2) {
            let len = rng.gen_range(1..=3);
            lex.add(
                &format!("w{w}"),
                (0..len).map(|_| phones.choose(rng).unwrap().clone()).collect(),
            );
        }
    }
    lex
}

fn word_table(n: usize) -> Shared<SymbolTable> {
    let mut t = SymbolTable::new();
    for w in 0..n {
        t.add(&format!("w{w}"));
    }
    Shared::new(t)
}

#[test]
fn every_lexicon_entry_composes_to_its_word() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let phones = strings(&["a", "b", "c"]);
    for _ in 0..100 {
        let n = rng.gen_range(1..8);
        let lex = random_lexicon(&mut rng, n, &phones);
        let ph = Shared::new(phoneme_table(&phones));
        let words = word_table(n);
        let mut l = build_lexicon_fst(&lex, &ph, &words).unwrap();
        let base = ph.len() as Label;
        l.map_labels(|i| if i >= base { EPS } else { i }, |o| o);
        l.set_isymbols(Some(ph.clone()));
        for (word, prons) in lex.entries() {
            for pron in prons {
                let labels: Vec<Label> = pron.iter().map(|p| ph.id(p).unwrap()).collect();
                let out = compose(&Wfst::linear_acceptor(&labels), &l).unwrap();
                let outputs: BTreeSet<Vec<Label>> =
                    shortest_path(&out, 64).into_iter().map(|p| p.olabels).collect();
                assert!(outputs.contains(&vec![words.id(word).unwrap()]), "{word} {pron:?}");
            }
        }
    }
}

fn model(sentences: &[&str], order: usize) -> NgramModel {
    let corpus = Corpus {
        utterances: sentences
            .iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect(),
    };
    estimate(&count(&corpus, order).unwrap())
}

/// Blank-padded frames for a word sequence: blank, then each phoneme followed by a blank.
/// `None` when a phoneme is missing from the graph.
fn frames_for(graph: &DecoderGraph, lex: &PronLexicon, sentence: &[&str]) -> Option<Vec<Label>> {
    let mut frames = vec![BLANK];
    for w in sentence {
        for p in &lex.get(w).unwrap()[0] {
            frames.push(graph.phonemes.id(p)?);
            frames.push(BLANK);
        }
    }
    Some(frames)
}

fn decodable(graph: &DecoderGraph, frames: &[Label], words: &[Label]) -> bool {
    let mut acc = Wfst::linear_acceptor(frames);
    acc.set_osymbols(Some(graph.phonemes.clone()));
    let out = compose(&acc, &graph.hlg).unwrap();
    let mut target = Wfst::linear_acceptor(words);
    target.set_isymbols(Some(graph.words.clone()));
    compose(&out, &target).unwrap().connect().num_states() > 0
}

#[test]
fn single_word_graph_emits_the_word() {
    let mut lex = PronLexicon::new();
    lex.add("hello", strings(&["h", "e", "l", "o"]));
    let m = model(&["hello", "hello hello"], 1);
    let g = build_decoder_graph(&m, &lex, &BuildOptions::default()).unwrap();
    let frames = frames_for(&g, &lex, &["hello"]).unwrap();
    let mut acc = Wfst::linear_acceptor(&frames);
    acc.set_osymbols(Some(g.phonemes.clone()));
    let best = shortest_path(&compose(&acc, &g.hlg).unwrap(), 1);
    assert_eq!(best[0].olabels, vec![g.words.id("hello").unwrap()]);
}

#[test]
fn empty_grammar_gives_empty_hlg() {
    let ph = Shared::new(phoneme_table(&strings(&["a"])));
    let words = word_table(1);
    let mut lex = PronLexicon::new();
    lex.add("w0", strings(&["a"]));
    let h = build_ctc_topology(&ph, true).unwrap();
    let l = build_lexicon_fst(&lex, &ph, &words).unwrap();
    let mut g = Wfst::new();
    let s = g.add_state();
    g.set_start(s);
    g.set_isymbols(Some(words.clone()));
    g.set_osymbols(Some(words.clone()));
    let hlg = build_hlg(&h, &l, &g, BTreeMap::new()).unwrap();
    assert_eq!(hlg.hlg.num_states(), 0);
}

#[test]
fn toy_language_decodable_set_equals_lm_support() {
    let mut lex = PronLexicon::new();
    for (w, p) in [
        ("ka", "k a"),
        ("ki", "k i"),
        ("ta", "t a"),
        ("ti", "t i"),
        ("na", "n a"),
        ("zu", "z u"),
    ] {
        lex.add(w, strings(&p.split(' ').collect::<Vec<_>>()));
    }
    let m = model(&["ka ki ta", "ti na ka", "ta ta", "na"], 2);
    let g = build_decoder_graph(&m, &lex, &BuildOptions::default()).unwrap();
    assert_eq!(g.provenance["lexicon_words"], "5");

    let all = ["ka", "ki", "ta", "ti", "na", "zu"];
    let mut sentences: Vec<Vec<&str>> = vec![vec![]];
    for a in all {
        sentences.push(vec![a]);
        for b in all {
            sentences.push(vec![a, b]);
        }
    }
    for s in sentences {
        let supported = s.iter().all(|w| m.vocab().contains(*w))
            && m.sequence_logprob(&s).is_finite();
        let frames = frames_for(&g, &lex, &s);
        let ids: Option<Vec<Label>> = s.iter().map(|w| g.words.id(w)).collect();
        let dec = match (frames, ids) {
            (Some(f), Some(ids)) => decodable(&g, &f, &ids),
            _ => false,
        };
        assert_eq!(dec, supported, "{s:?}");
    }
}

#[test]
fn hlg_alphabets_and_entry_decodability() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let phones = strings(&["a", "b", "c", "d"]);
    for _ in 0..30 {
        let n = rng.gen_range(1..6);
        let lex = random_lexicon(&mut rng, n, &phones);
        let corpus: Vec<String> = (0..n).map(|w| format!("w{w}")).collect();
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let m = model(&[refs.join(" ").as_str()], 1);
        let g = build_decoder_graph(&m, &lex, &BuildOptions::default()).unwrap();
        for s in g.hlg.states() {
            for a in g.hlg.arcs(s) {
                assert!(a.ilabel == EPS || a.ilabel == BLANK || a.ilabel > BLANK);
                assert!((a.ilabel as usize) < g.phonemes.len());
                assert!((a.olabel as usize) < g.words.len());
            }
        }
        for (word, prons) in lex.entries() {
            for pron in prons {
                let mut frames = vec![BLANK];
                for p in pron {
                    frames.push(g.phonemes.id(p).unwrap());
                    frames.push(BLANK);
                }
                let mut acc = Wfst::linear_acceptor(&frames);
                acc.set_osymbols(Some(g.phonemes.clone()));
                let outs = shortest_path(&compose(&acc, &g.hlg).unwrap(), 64);
                let w = g.words.id(word).unwrap();
                assert!(outs.iter().any(|p| p.olabels.contains(&w)), "{word} {pron:?}");
            }
        }
    }
}

#[test]
fn graph_directory_round_trip() {
    let mut lex = PronLexicon::new();
    lex.add("ab", strings(&["a", "b"]));
    lex.add("ba", strings(&["b", "a"]));
    let m = model(&["ab ba", "ba"], 2);
    let opts = BuildOptions {
        lm_source: "corpus.txt".into(),
        lexicon_source: "lex.txt".into(),
        ..BuildOptions::default()
    };
    let g = build_decoder_graph(&m, &lex, &opts).unwrap();
    let dir = tempdir();
    g.save(&dir).unwrap();
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["HLG.fst", "manifest.txt", "phonemes.txt", "words.txt"]);
    let back = DecoderGraph::load(&dir).unwrap();
    assert_eq!(back.provenance, g.provenance);
    assert_eq!(*back.phonemes, *g.phonemes);
    assert_eq!(back.hlg.num_arcs(), g.hlg.num_arcs());
    let again = tempdir();
    back.save(&again).unwrap();
    for f in &files {
        assert_eq!(
            std::fs::read(dir.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
    std::fs::remove_dir_all(&dir).unwrap();
    std::fs::remove_dir_all(&again).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static N: AtomicUsize = AtomicUsize::new(0);
    let d = std::env::temp_dir().join(format!(
        "hlgkit-graphs-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&d).unwrap();
    d
}
