use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{TimedTranscript, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AlignmentLink {
    pub src: usize,
    pub tgt: usize,
}

impl AlignmentLink {
    pub fn new(src: usize, tgt: usize) -> Self {
        Self { src, tgt }
    }
}

impl fmt::Display for AlignmentLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

/// Source and target document identifiers of an alignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DocPair {
    pub source: String,
    pub target: String,
}

impl DocPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }

    /// Both sides share the same document id.
    pub fn same(doc_id: impl Into<String>) -> Self {
        let id = doc_id.into();
        Self::new(id.clone(), id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Intersection,
    Pruned,
    Composed,
}

/// Links for one document pair, always expressed in source→target orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSet {
    pub docs: DocPair,
    pub direction: Direction,
    links: BTreeSet<AlignmentLink>,
}

impl AlignmentSet {
    pub fn new(
        docs: DocPair,
        direction: Direction,
        links: impl IntoIterator<Item = AlignmentLink>,
    ) -> Self {
        Self {
            docs,
            direction,
            links: links.into_iter().collect(),
        }
    }

    pub fn empty(docs: DocPair, direction: Direction) -> Self {
        Self::new(docs, direction, [])
    }

    pub fn links(&self) -> impl Iterator<Item = AlignmentLink> + '_ {
        self.links.iter().copied()
    }

    pub fn contains(&self, link: AlignmentLink) -> bool {
        self.links.contains(&link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Distinct source indices with at least one link.
    pub fn linked_sources(&self) -> BTreeSet<usize> {
        self.links.iter().map(|l| l.src).collect()
    }

    /// Swaps source and target roles.
    pub fn inverted(&self) -> Self {
        Self {
            docs: DocPair::new(self.docs.target.clone(), self.docs.source.clone()),
            direction: self.direction,
            links: self
                .links
                .iter()
                .map(|l| AlignmentLink::new(l.tgt, l.src))
                .collect(),
        }
    }

    /// Pharaoh line: space-separated `i-j` pairs.
    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_pharaoh(line: &str, docs: DocPair, direction: Direction) -> Result<Self> {
        let mut links = BTreeSet::new();
        for item in line.split_whitespace() {
            let (i, j) = item
                .split_once('-')
                .ok_or_else(|| Error::malformed(1, format!("bad pharaoh pair `{item}`")))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::malformed(1, format!("bad pharaoh pair `{item}`")))
            };
            links.insert(AlignmentLink::new(parse(i)?, parse(j)?));
        }
        Ok(Self {
            docs,
            direction,
            links,
        })
    }
}

/// Links present in both alignments; `backward` must already be in
/// source→target orientation.
pub fn intersect(forward: &AlignmentSet, backward: &AlignmentSet) -> Result<AlignmentSet> {
    if forward.docs != backward.docs {
        return Err(Error::DocMismatch {
            expected: format!("{}/{}", forward.docs.source, forward.docs.target),
            found: format!("{}/{}", backward.docs.source, backward.docs.target),
        });
    }
    Ok(AlignmentSet {
        docs: forward.docs.clone(),
        direction: Direction::Intersection,
        links: forward
            .links
            .intersection(&backward.links)
            .copied()
            .collect(),
    })
}

/// Relational composition: `(i, k)` whenever `(i, j)` is in `a_xy` and
/// `(j, k)` is in `a_yz` for some `j`.
pub fn compose(a_xy: &AlignmentSet, a_yz: &AlignmentSet) -> Result<AlignmentSet> {
    if a_xy.docs.target != a_yz.docs.source {
        return Err(Error::DocMismatch {
            expected: a_xy.docs.target.clone(),
            found: a_yz.docs.source.clone(),
        });
    }
    let mut by_mid: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for l in &a_yz.links {
        by_mid.entry(l.src).or_default().push(l.tgt);
    }
    let mut links = BTreeSet::new();
    for l in &a_xy.links {
        if let Some(ks) = by_mid.get(&l.tgt) {
            links.extend(ks.iter().map(|&k| AlignmentLink::new(l.src, k)));
        }
    }
    Ok(AlignmentSet {
        docs: DocPair::new(a_xy.docs.source.clone(), a_yz.docs.target.clone()),
        direction: Direction::Composed,
        links,
    })
}

/// Which timestamps decide that a link "goes back in time".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneRule {
    /// Remove when the target word starts before the source word starts.
    #[default]
    StartStart,
    /// Remove when the target word ends before the source word starts.
    EndStart,
}

/// Drops links whose target word was produced before its source word.
pub fn prune_time_regressive(
    links: &AlignmentSet,
    src: &TimedTranscript,
    tgt: &TimedTranscript,
    rule: PruneRule,
) -> Result<AlignmentSet> {
    for (expected, found) in [
        (&links.docs.source, &src.doc_id),
        (&links.docs.target, &tgt.doc_id),
    ] {
        if expected != found {
            return Err(Error::DocMismatch {
                expected: expected.clone(),
                found: found.clone(),
            });
        }
    }
    let mut kept = BTreeSet::new();
    for l in &links.links {
        let s = src.words.get(l.src).ok_or(Error::IndexOutOfRange {
            index: l.src,
            len: src.len(),
        })?;
        let t = tgt.words.get(l.tgt).ok_or(Error::IndexOutOfRange {
            index: l.tgt,
            len: tgt.len(),
        })?;
        let tgt_time = match rule {
            PruneRule::StartStart => t.start,
            PruneRule::EndStart => t.end,
        };
        // A link survives ties within the timestamp tolerance; exact
        // comparison keeps every surviving start/start latency nonnegative.
        let regressive = match rule {
            PruneRule::StartStart => tgt_time < s.start,
            PruneRule::EndStart => tgt_time < s.start - TIME_EPS,
        };
        if !regressive {
            kept.insert(*l);
        }
    }
    Ok(AlignmentSet {
        docs: links.docs.clone(),
        direction: Direction::Pruned,
        links: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Track;
    use proptest::prelude::*;

    fn set(links: &[(usize, usize)]) -> AlignmentSet {
        AlignmentSet::new(
            DocPair::same("d"),
            Direction::Forward,
            links.iter().map(|&(i, j)| AlignmentLink::new(i, j)),
        )
    }

    fn pairs(s: &AlignmentSet) -> Vec<(usize, usize)> {
        s.links().map(|l| (l.src, l.tgt)).collect()
    }

    #[test]
    fn intersect_examples() {
        let f = set(&[(0, 0), (1, 2)]);
        let b = set(&[(0, 0)]);
        let r = intersect(&f, &b).unwrap();
        assert_eq!(pairs(&r), vec![(0, 0)]);
        assert_eq!(r.direction, Direction::Intersection);
        assert!(intersect(&set(&[(0, 1)]), &set(&[(1, 0)]))
            .unwrap()
            .is_empty());
        let other = AlignmentSet::new(DocPair::same("e"), Direction::Backward, []);
        assert!(matches!(
            intersect(&f, &other),
            Err(Error::DocMismatch { .. })
        ));
    }

    #[test]
    fn compose_examples() {
        let xy = AlignmentSet::new(
            DocPair::new("x", "y"),
            Direction::Forward,
            [AlignmentLink::new(0, 1)],
        );
        let yz = AlignmentSet::new(
            DocPair::new("y", "z"),
            Direction::Forward,
            [AlignmentLink::new(1, 3)],
        );
        let r = compose(&xy, &yz).unwrap();
        assert_eq!(pairs(&r), vec![(0, 3)]);
        assert_eq!(r.docs, DocPair::new("x", "z"));
        let yz2 = AlignmentSet::new(
            DocPair::new("y", "z"),
            Direction::Forward,
            [AlignmentLink::new(2, 3)],
        );
        assert!(compose(&xy, &yz2).unwrap().is_empty());
        assert!(compose(&yz, &xy).is_err());
    }

    fn timed(id: &str, track: Track, starts: &[f64]) -> TimedTranscript {
        TimedTranscript::from_words(id, track, "xx", starts.iter().map(|&s| ("w", s, s + 0.2)))
            .unwrap()
    }

    #[test]
    fn prune_examples() {
        let src = timed("d", Track::Source, &[5.0]);
        let early = timed("d", Track::Interpreter, &[4.0]);
        let same = timed("d", Track::Interpreter, &[5.0]);
        let one = set(&[(0, 0)]);
        assert!(
            prune_time_regressive(&one, &src, &early, PruneRule::StartStart)
                .unwrap()
                .is_empty()
        );
        let kept = prune_time_regressive(&one, &src, &same, PruneRule::StartStart).unwrap();
        assert_eq!(pairs(&kept), vec![(0, 0)]);
        assert_eq!(kept.direction, Direction::Pruned);
        assert!(
            prune_time_regressive(&set(&[]), &src, &same, PruneRule::StartStart)
                .unwrap()
                .is_empty()
        );
        assert!(matches!(
            prune_time_regressive(&set(&[(0, 3)]), &src, &same, PruneRule::StartStart),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
        // the end of the target word (4.2) is still before the source start
        assert!(
            prune_time_regressive(&one, &src, &early, PruneRule::EndStart)
                .unwrap()
                .is_empty()
        );
        let close = timed("d", Track::Interpreter, &[4.9]);
        assert_eq!(
            prune_time_regressive(&one, &src, &close, PruneRule::EndStart)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn pharaoh_round_trip() {
        let s = set(&[(0, 0), (2, 1), (10, 12)]);
        assert_eq!(s.to_pharaoh(), "0-0 2-1 10-12");
        let back =
            AlignmentSet::parse_pharaoh("0-0 2-1  10-12\n", DocPair::same("d"), Direction::Forward)
                .unwrap();
        assert_eq!(back, s);
        assert!(
            AlignmentSet::parse_pharaoh("0_1", DocPair::same("d"), Direction::Forward).is_err()
        );
    }

    fn arb_links(max: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
        prop::collection::vec((0..max, 0..max), 0..60)
    }

    proptest! {
        #[test]
        fn intersection_is_subset(a in arb_links(12), b in arb_links(12)) {
            let (fa, fb) = (set(&a), set(&b));
            let r = intersect(&fa, &fb).unwrap();
            for l in r.links() {
                prop_assert!(fa.contains(l) && fb.contains(l));
            }
            let brute = a.iter().filter(|x| b.contains(x)).count();
            let dedup: BTreeSet<_> = a.iter().filter(|x| b.contains(x)).collect();
            prop_assert!(r.len() <= brute);
            prop_assert_eq!(r.len(), dedup.len());
        }

        #[test]
        fn compose_matches_nested_loop(a in arb_links(10), b in arb_links(10)) {
            let xy = AlignmentSet::new(DocPair::new("x", "y"), Direction::Forward, a.iter().map(|&(i, j)| AlignmentLink::new(i, j)));
            let yz = AlignmentSet::new(DocPair::new("y", "z"), Direction::Forward, b.iter().map(|&(i, j)| AlignmentLink::new(i, j)));
            let mut brute = BTreeSet::new();
            for &(i, j) in &a {
                for &(j2, k) in &b {
                    if j == j2 {
                        brute.insert((i, k));
                    }
                }
            }
            let got: BTreeSet<_> = compose(&xy, &yz).unwrap().links().map(|l| (l.src, l.tgt)).collect();
            prop_assert_eq!(got, brute);
        }
    }
}
