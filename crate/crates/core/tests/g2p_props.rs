use std::collections::{BTreeMap, BTreeSet, VecDeque};

use hlgkit::g2p::{ensemble, knn_languages, phonemize_lexicon, PhyloTree, Rule, RuleTable};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random rooted tree on `n` nodes: node i > 0 hangs under a random earlier node.
fn random_tree<R: Rng>(rng: &mut R, n: usize) -> (Vec<(String, String)>, Vec<Vec<usize>>) {
    let mut edges = Vec::new();
    let mut adj = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        edges.push((format!("n{i:02}"), format!("n{p:02}")));
        adj[i].push(p);
        adj[p].push(i);
    }
    (edges, adj)
}

fn bfs(adj: &[Vec<usize>], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    dist
}

#[test]
fn tree_distance_matches_bfs_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(2..=50);
        let (edges, adj) = random_tree(&mut rng, n);
        let tree = PhyloTree::from_edges(&edges, &[]).unwrap();
        for a in 0..n {
            let d = bfs(&adj, a);
            for b in 0..n {
                let (na, nb) = (format!("n{a:02}"), format!("n{b:02}"));
                assert_eq!(tree.distance(&na, &nb), Some(d[b]));
                assert_eq!(tree.distance(&na, &nb), tree.distance(&nb, &na));
            }
        }
    }
}

#[test]
fn knn_matches_bfs_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.gen_range(2..=50);
        let (edges, adj) = random_tree(&mut rng, n);
        let tree = PhyloTree::from_edges(&edges, &[]).unwrap();
        let target = rng.gen_range(0..n);
        let available: BTreeSet<String> = (0..n)
            .filter(|_| rng.gen_bool(0.4))
            .map(|i| format!("n{i:02}"))
            .collect();
        let k = rng.gen_range(1..=5);
        let d = bfs(&adj, target);
        let mut expect: Vec<(usize, String)> = available
            .iter()
            .map(|l| (d[l[1..].parse::<usize>().unwrap()], l.clone()))
            .collect();
        expect.sort();
        expect.truncate(k);
        let got = knn_languages(&tree, &format!("n{target:02}"), k, &available).unwrap();
        let got: Vec<(usize, String)> = got.into_iter().map(|(l, d)| (d, l)).collect();
        assert_eq!(got, expect);
    }
}

const BASE: [char; 4] = ['a', 'b', 'c', 'd'];
const PHONES: [&str; 6] = ["p", "t", "k", "a", "i", "u"];

/// A table covering every base character, plus random multi-character and duplicate rules.
fn random_table<R: Rng>(rng: &mut R) -> RuleTable {
    let mut rules = Vec::new();
    let extra = rng.gen_range(0..8);
    for _ in 0..extra {
        let len = rng.gen_range(1..=3);
        rules.push(Rule {
            graphemes: (0..len).map(|_| *BASE.choose(rng).unwrap()).collect(),
            phonemes: (0..rng.gen_range(0..=2))
                .map(|_| PHONES.choose(rng).unwrap().to_string())
                .collect(),
        });
    }
    for c in BASE {
        rules.push(Rule {
            graphemes: c.to_string(),
            phonemes: vec![PHONES.choose(rng).unwrap().to_string()],
        });
    }
    rules.shuffle(rng);
    RuleTable::new("xx", rules).unwrap()
}

/// Best segmentation of `w[i..]`: most characters matched, then the
/// lexicographically largest sequence of step lengths (skips count as 0).
fn best_segmentation(
    rules: &[Rule],
    w: &[char],
    i: usize,
    memo: &mut BTreeMap<usize, (usize, Vec<usize>, Vec<String>)>,
) -> (usize, Vec<usize>, Vec<String>) {
    if i == w.len() {
        return (0, Vec::new(), Vec::new());
    }
    if let Some(v) = memo.get(&i) {
        return v.clone();
    }
    let mut options = Vec::new();
    // Skipping is always allowed; matched length decides whether it is ever chosen.
    let (m, mut steps, ph) = best_segmentation(rules, w, i + 1, memo);
    steps.insert(0, 0);
    options.push((m, steps, ph));
    for len in 1..=w.len() - i {
        let g: String = w[i..i + len].iter().collect();
        if let Some(r) = rules.iter().find(|r| r.graphemes == g) {
            let (m, mut steps, tail) = best_segmentation(rules, w, i + len, memo);
            steps.insert(0, len);
            let mut ph = r.phonemes.clone();
            ph.extend(tail);
            options.push((m + len, steps, ph));
        }
    }
    let best = options
        .into_iter()
        .max_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)))
        .unwrap();
    memo.insert(i, best.clone());
    best
}

#[test]
fn greedy_matches_segmentation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let table = random_table(&mut rng);
        let len = rng.gen_range(0..12);
        // 'z' is never covered and must be skipped.
        let word: Vec<char> = (0..len)
            .map(|_| if rng.gen_bool(0.1) { 'z' } else { *BASE.choose(&mut rng).unwrap() })
            .collect();
        let (_, _, phones) = best_segmentation(table.rules(), &word, 0, &mut BTreeMap::new());
        let s: String = word.iter().collect();
        let out = table.apply(&s);
        assert_eq!(out.phonemes, phones, "word {s:?}");
        assert_eq!(out.skipped, word.iter().filter(|&&c| c == 'z').count());
        assert_eq!(table.apply(&s), out);
        let bound: usize = s.chars().count() * table.rules().iter().map(|r| r.phonemes.len()).max().unwrap();
        assert!(out.phonemes.len() <= bound);
    }
}

fn hyp_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(PHONES.to_vec()), 0..8)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

proptest! {
    #[test]
    fn ensemble_of_copies_is_identity(h in hyp_strategy(), n in 1usize..6, d in 0usize..5) {
        let hyps = vec![(h.clone(), d); n];
        prop_assert_eq!(ensemble(&hyps).unwrap(), h);
    }

    #[test]
    fn ensemble_alphabet_is_contained(
        hyps in prop::collection::vec((hyp_strategy(), 0usize..6), 1..6)
    ) {
        let out = ensemble(&hyps).unwrap();
        let alphabet: BTreeSet<&String> = hyps.iter().flat_map(|(h, _)| h).collect();
        prop_assert!(out.iter().all(|p| alphabet.contains(p)));
        prop_assert_eq!(ensemble(&hyps).unwrap(), out);
    }
}

#[test]
fn family_output_is_contained_in_neighbour_hypotheses() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let tree = PhyloTree::from_edges(
        &[("f1", "root"), ("f2", "root"), ("aaa", "f1"), ("bbb", "f1"), ("ccc", "f2"), ("tgt", "f2")],
        &[],
    )
    .unwrap();
    let mut tables = BTreeMap::new();
    for l in ["aaa", "bbb", "ccc"] {
        tables.insert(l.to_string(), random_table(&mut rng));
    }
    let vocab: Vec<String> = (0..200)
        .map(|_| (0..rng.gen_range(1..8)).map(|_| *BASE.choose(&mut rng).unwrap()).collect())
        .collect();
    let (lex, report) = phonemize_lexicon(&vocab, &tree, &tables, "tgt", 3).unwrap();
    assert_eq!(report.neighbours.len(), 3);
    assert_eq!(report.neighbours[0], ("ccc".to_string(), 2));
    for (word, prons) in lex.entries() {
        let hyp_phones: BTreeSet<String> = tables
            .values()
            .flat_map(|t| t.apply(word).phonemes)
            .collect();
        for p in &prons[0] {
            assert!(hyp_phones.contains(p), "{word}: {p} not in any hypothesis");
        }
    }
    assert_eq!(lex.len() + report.dropped.len(), vocab.iter().collect::<BTreeSet<_>>().len());
}
