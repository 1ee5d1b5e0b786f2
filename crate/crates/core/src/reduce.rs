//! Candidate-list reduction by agglomerative clustering on edit distance.
//!
//! Sentences with more than `k` candidates are clustered (average linkage
//! over the normalized Levenshtein distance of the rendered triplets) into
//! `k` groups, and the candidate with the most tokens represents each group.

use crate::extract::EventCandidate;

/// Default list cap.
pub const DEFAULT_CAP: usize = 5;

/// Unit-cost edit distance between two strings, over Unicode scalars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(ca != cb);
            row[j + 1] = (above + 1).min(row[j] + 1).min(diagonal + cost);
            diagonal = above;
        }
    }
    row[b.len()]
}

/// `2d / (|a| + |b| + d)`, in `[0, 1]`; two empty strings are at distance 0.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let d = levenshtein(a, b);
    if d == 0 {
        return 0.0;
    }
    let total = a.chars().count() + b.chars().count() + d;
    2.0 * d as f64 / total as f64
}

/// One merge step; clusters are numbered like leaves `0..n`, then `n + step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Average-linkage hierarchy over a precomputed symmetric distance matrix.
    ///
    /// Among equally distant pairs the one whose smallest members (by leaf
    /// order) are lexicographically smallest merges first.
    pub fn average_linkage(leaves: Vec<String>, distances: &[Vec<f64>]) -> Self {
        let n = leaves.len();
        struct Active {
            id: usize,
            first_leaf: usize,
            size: usize,
        }
        let mut active: Vec<Active> = (0..n).map(|i| Active { id: i, first_leaf: i, size: 1 }).collect();
        let mut dist: Vec<Vec<f64>> = distances.to_vec();
        let mut merges = Vec::with_capacity(n.saturating_sub(1));

        while active.len() > 1 {
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for i in 0..active.len() {
                for j in i + 1..active.len() {
                    let d = dist[i][j];
                    let (lo, hi) = ordered(active[i].first_leaf, active[j].first_leaf);
                    let better = match best {
                        None => true,
                        Some((bd, blo, bhi, _, _)) => d < bd || (d == bd && (lo, hi) < (blo, bhi)),
                    };
                    if better {
                        best = Some((d, lo, hi, i, j));
                    }
                }
            }
            let (height, _, _, i, j) = best.expect("at least two active clusters");
            let (si, sj) = (active[i].size as f64, active[j].size as f64);
            // Lance-Williams update for average linkage
            #[allow(clippy::needless_range_loop)]
            for k in 0..active.len() {
                if k != i && k != j {
                    let merged = (si * dist[i][k] + sj * dist[j][k]) / (si + sj);
                    dist[i][k] = merged;
                    dist[k][i] = merged;
                }
            }
            merges.push(Merge { left: active[i].id, right: active[j].id, height });
            active[i] = Active {
                id: n + merges.len() - 1,
                first_leaf: active[i].first_leaf.min(active[j].first_leaf),
                size: active[i].size + active[j].size,
            };
            active.remove(j);
            dist.remove(j);
            for row in &mut dist {
                row.remove(j);
            }
        }
        Self { leaves, merges }
    }

    /// Applies the first `n - k` merges and returns the clusters as leaf
    /// positions, each ascending, ordered by their first leaf.
    pub fn cut(&self, k: usize) -> Vec<Vec<usize>> {
        let n = self.leaves.len();
        if n == 0 {
            return Vec::new();
        }
        let k = k.clamp(1, n);
        let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        for merge in &self.merges[..n - k] {
            let mut joined = members[merge.left].take().expect("cluster merged once");
            joined.extend(members[merge.right].take().expect("cluster merged once"));
            members.push(Some(joined));
        }
        let mut clusters: Vec<Vec<usize>> = members
            .into_iter()
            .flatten()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        clusters.sort_by_key(|c| c[0]);
        clusters
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn distance_matrix(texts: &[String]) -> Vec<Vec<f64>> {
    let n = texts.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = normalized_levenshtein(&texts[i], &texts[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

/// Dendrogram of a sentence's candidates over their rendered triplets.
pub fn candidate_dendrogram(candidates: &[EventCandidate]) -> Dendrogram {
    let texts: Vec<String> = candidates.iter().map(EventCandidate::rendered).collect();
    let dist = distance_matrix(&texts);
    Dendrogram::average_linkage(candidates.iter().map(|c| c.id.clone()).collect(), &dist)
}

/// Clusters candidates into `min(k, n)` groups of candidate ids.
pub fn cluster_candidates(candidates: &[EventCandidate], k: usize) -> Vec<Vec<String>> {
    cluster_positions(candidates, k)
        .into_iter()
        .map(|c| c.into_iter().map(|i| candidates[i].id.clone()).collect())
        .collect()
}

fn cluster_positions(candidates: &[EventCandidate], k: usize) -> Vec<Vec<usize>> {
    if candidates.is_empty() {
        return Vec::new();
    }
    candidate_dendrogram(candidates).cut(k)
}

/// Caps a sentence's list at `k` candidates, one representative per cluster.
///
/// Lists of at most `k` pass through unchanged. Otherwise each cluster keeps
/// its candidate with the most tokens (ties: smaller `order_key`, then
/// earlier in the list); survivors are flagged `reduced` and sorted by
/// `order_key`.
pub fn reduce(candidates: &[EventCandidate], k: usize) -> Vec<EventCandidate> {
    if candidates.len() <= k {
        return candidates.to_vec();
    }
    let mut picked: Vec<usize> = cluster_positions(candidates, k)
        .into_iter()
        .map(|cluster| {
            cluster
                .into_iter()
                .min_by_key(|&i| (std::cmp::Reverse(candidates[i].token_count()), candidates[i].order_key, i))
                .expect("clusters are non-empty")
        })
        .collect();
    picked.sort_by_key(|&i| (candidates[i].order_key, i));
    picked.into_iter().map(|i| EventCandidate { reduced: true, ..candidates[i].clone() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::ArgumentSpan;

    fn span(tokens: &[usize], text: &str) -> ArgumentSpan {
        ArgumentSpan { tokens: tokens.to_vec(), text: text.to_string() }
    }

    /// A candidate whose rendered text is `s — p — o` with the given token counts.
    fn cand(i: usize, s: &str, p: &str, o: Option<&str>, order_key: usize) -> EventCandidate {
        let count = |t: &str| t.split_whitespace().count();
        let mut next = 1;
        let mut take = |t: &str| {
            let toks: Vec<usize> = (next..next + count(t)).collect();
            next += count(t);
            span(&toks, t)
        };
        EventCandidate {
            id: format!("n:0:{i}"),
            narrative_id: "n".into(),
            sentence_position: 0,
            subject: take(s),
            predicate: take(p),
            object: o.map(&mut take),
            order_key,
            reduced: false,
        }
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("ab", ""), 2);
        assert_eq!(levenshtein("", "ab"), 2);
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein("naïve", "naive"), 1);
    }

    #[test]
    fn normalized_closed_form() {
        assert_eq!(normalized_levenshtein("ab", ""), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        assert_eq!(normalized_levenshtein("x", "x"), 0.0);
        assert!((normalized_levenshtein("kitten", "sitting") - 0.375).abs() < 1e-12);
    }

    #[test]
    fn small_lists_stay_singletons() {
        let cands: Vec<_> = (0..3).map(|i| cand(i, "I", "went", Some("home"), i + 1)).collect();
        assert_eq!(cluster_candidates(&cands, 5), vec![vec!["n:0:0"], vec!["n:0:1"], vec!["n:0:2"]]);
        assert!(cluster_candidates(&[], 5).is_empty());
    }

    #[test]
    fn nearest_pair_merges_first() {
        let cands = vec![
            cand(0, "I", "went", Some("home"), 2),
            cand(1, "I", "went", Some("home today"), 2),
            cand(2, "she", "cried", None, 6),
        ];
        assert_eq!(cluster_candidates(&cands, 2), vec![vec!["n:0:0", "n:0:1"], vec!["n:0:2"]]);
    }

    #[test]
    fn identical_texts_form_one_cluster() {
        let cands = vec![cand(0, "I", "left", None, 2), cand(1, "I", "left", None, 2)];
        assert_eq!(cluster_candidates(&cands, 1), vec![vec!["n:0:0", "n:0:1"]]);
    }

    #[test]
    fn merge_heights_never_decrease() {
        let texts = ["a — b", "a — bc", "xyz — q", "xy — q — r", "long text here", "a"];
        let cands: Vec<_> = texts.iter().enumerate().map(|(i, t)| cand(i, t, "v", None, i)).collect();
        let dendrogram = candidate_dendrogram(&cands);
        assert_eq!(dendrogram.merges.len(), texts.len() - 1);
        for pair in dendrogram.merges.windows(2) {
            assert!(pair[0].height <= pair[1].height + 1e-12);
        }
        assert_eq!(dendrogram.cut(1), vec![(0..texts.len()).collect::<Vec<_>>()]);
    }

    #[test]
    fn equal_distances_merge_smallest_ids_first() {
        // all pairwise distances equal: ids 0 and 1 go first
        let dist = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let d = Dendrogram::average_linkage(vec!["a".into(), "b".into(), "c".into()], &dist);
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert_eq!(d.cut(2), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn pass_through_when_under_cap() {
        let cands: Vec<_> = (0..4).map(|i| cand(i, "I", "saw", Some("x"), i + 1)).collect();
        assert_eq!(reduce(&cands, 5), cands);
    }

    #[test]
    fn seven_become_five_longest_per_cluster() {
        let cands = vec![
            cand(0, "I", "went", Some("home"), 2),
            cand(1, "I", "went", Some("back home"), 2),
            cand(2, "my mother", "called", Some("me"), 5),
            cand(3, "she", "cried", None, 8),
            cand(4, "we", "ate", Some("dinner"), 11),
            cand(5, "we", "ate", Some("a big dinner"), 11),
            cand(6, "the dog", "barked", Some("at the mailman"), 14),
        ];
        let reduced = reduce(&cands, 5);
        assert_eq!(reduced.len(), 5);
        assert!(reduced.iter().all(|c| c.reduced));
        let ids: Vec<_> = reduced.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["n:0:1", "n:0:2", "n:0:3", "n:0:5", "n:0:6"]);
    }

    #[test]
    fn token_tie_goes_to_smaller_order_key() {
        let cands = vec![
            cand(0, "he", "ran", Some("far"), 7),
            cand(1, "he", "run", Some("far"), 3),
            cand(2, "zzzzzzzzzzzzzzzzzzzz", "qq", None, 9),
        ];
        let reduced = reduce(&cands, 2);
        assert_eq!(reduced.len(), 2);
        assert_eq!(reduced[0].id, "n:0:1");
    }
}
