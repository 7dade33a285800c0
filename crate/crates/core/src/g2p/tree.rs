use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::BufRead;

use super::G2pError;

/// Language family tree. Distances are unweighted edge counts.
#[derive(Clone, Debug)]
pub struct PhyloTree {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl PhyloTree {
    /// Builds a tree from `(child, parent)` edges plus optional lone nodes.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)], lone: &[S]) -> Result<Self, G2pError> {
        let mut names = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut intern = |n: &str, names: &mut Vec<String>| -> usize {
            *ids.entry(n.to_string()).or_insert_with(|| {
                names.push(n.to_string());
                names.len() - 1
            })
        };
        let mut links = Vec::new();
        for (c, p) in edges {
            let c = intern(c.as_ref(), &mut names);
            let p = intern(p.as_ref(), &mut names);
            links.push((c, p));
        }
        for n in lone {
            intern(n.as_ref(), &mut names);
        }
        let ids: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let mut parent = vec![None; names.len()];
        for (c, p) in links {
            if c == p {
                return Err(G2pError::Tree(format!("node {:?} is its own parent", names[c])));
            }
            if let Some(old) = parent[c] {
                if old != p {
                    return Err(G2pError::Tree(format!(
                        "node {:?} appears with two parents",
                        names[c]
                    )));
                }
            }
            parent[c] = Some(p);
        }
        let roots: Vec<usize> = (0..names.len()).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(G2pError::Tree(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); names.len()];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(c);
            }
        }
        let mut depth = vec![usize::MAX; names.len()];
        depth[roots[0]] = 0;
        let mut queue = VecDeque::from([roots[0]]);
        while let Some(n) = queue.pop_front() {
            for &c in &children[n] {
                depth[c] = depth[n] + 1;
                queue.push_back(c);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(G2pError::Tree(format!(
                "node {:?} is on a cycle, not under the root",
                names[i]
            )));
        }
        Ok(PhyloTree {
            names,
            ids,
            parent,
            depth,
        })
    }

    /// Reads `child<TAB>parent` lines. A line with a single field declares a lone node.
    pub fn read<R: BufRead>(r: R) -> Result<Self, G2pError> {
        let mut edges = Vec::new();
        let mut lone = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split('\t').map(str::trim).collect();
            match fields.as_slice() {
                [c, p] if !c.is_empty() && !p.is_empty() => {
                    edges.push((c.to_string(), p.to_string()))
                }
                [n] => lone.push(n.to_string()),
                _ => {
                    return Err(G2pError::Parse {
                        line: i + 1,
                        message: format!("expected `child<TAB>parent`, got {line:?}"),
                    })
                }
            }
        }
        Self::from_edges(&edges, &lone)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.ids.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Edge count between two nodes, through their lowest common ancestor.
    pub fn distance(&self, a: &str, b: &str) -> Option<usize> {
        let mut x = *self.ids.get(a)?;
        let mut y = *self.ids.get(b)?;
        let mut d = 0;
        while self.depth[x] > self.depth[y] {
            x = self.parent[x].unwrap();
            d += 1;
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y].unwrap();
            d += 1;
        }
        while x != y {
            x = self.parent[x].unwrap();
            y = self.parent[y].unwrap();
            d += 2;
        }
        Some(d)
    }
}

/// The `k` available languages closest to `target`, ascending by distance,
/// ties broken by code. Returns fewer (with a warning) when fewer are available.
pub fn knn_languages(
    tree: &PhyloTree,
    target: &str,
    k: usize,
    available: &BTreeSet<String>,
) -> Result<Vec<(String, usize)>, G2pError> {
    if !tree.contains(target) {
        return Err(G2pError::UnknownLanguage(target.to_string()));
    }
    let mut ranked: Vec<(usize, &String)> = available
        .iter()
        .filter_map(|l| tree.distance(target, l).map(|d| (d, l)))
        .collect();
    ranked.sort();
    if ranked.len() < k {
        log::warn!(
            "only {} languages with rule tables are in the tree, {} requested",
            ranked.len(),
            k
        );
    }
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(d, l)| (l.clone(), d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five() -> PhyloTree {
        // root -> {x -> {a, b}, c}
        PhyloTree::from_edges(&[("x", "root"), ("a", "x"), ("b", "x"), ("c", "root")], &[]).unwrap()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn nearest_sibling_first() {
        let t = five();
        assert_eq!(t.distance("a", "b"), Some(2));
        assert_eq!(t.distance("a", "c"), Some(3));
        let one = knn_languages(&t, "a", 1, &set(&["b", "c"])).unwrap();
        assert_eq!(one, vec![("b".to_string(), 2)]);
        let two = knn_languages(&t, "a", 2, &set(&["b", "c"])).unwrap();
        assert_eq!(two, vec![("b".to_string(), 2), ("c".to_string(), 3)]);
    }

    #[test]
    fn ties_break_by_code_and_target_counts_as_available() {
        let t = PhyloTree::from_edges(&[("q", "r"), ("p", "r"), ("s", "r")], &[]).unwrap();
        let k = knn_languages(&t, "q", 3, &set(&["s", "p", "q"])).unwrap();
        assert_eq!(
            k,
            vec![("q".to_string(), 0), ("p".to_string(), 2), ("s".to_string(), 2)]
        );
    }

    #[test]
    fn unknown_target_and_short_lists() {
        let t = five();
        assert!(matches!(
            knn_languages(&t, "zz", 1, &set(&["a"])),
            Err(G2pError::UnknownLanguage(_))
        ));
        let all = knn_languages(&t, "a", 5, &set(&["b", "nothere"])).unwrap();
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn structural_errors() {
        assert!(PhyloTree::from_edges(&[("a", "r"), ("b", "s")], &[]).is_err());
        assert!(PhyloTree::from_edges(&[("a", "r"), ("a", "s"), ("s", "r")], &[]).is_err());
        // r is the only parentless node, but b <-> c form a detached cycle
        assert!(PhyloTree::from_edges(&[("a", "r"), ("b", "c"), ("c", "b")], &[]).is_err());
        let t = PhyloTree::read("a\tr\n\nb\tr\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert!(PhyloTree::read("a\tr\textra\n".as_bytes()).is_err());
    }
}
