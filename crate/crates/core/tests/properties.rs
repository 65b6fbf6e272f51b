use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use lagmeter::ingest::{IncrementalLog, LogEvent, ParallelCorpus, SentencePair, Tokenizer};
use lagmeter::latency::finalization_times;
use lagmeter::quality::{aggregate_annotations, bleu, AnnotationRecord, BleuConfig, Segmentation};
use lagmeter::shortenfilter::{filter_corpus, BpeModel, FilterConfig, SubwordModels};
use lagmeter::textmetrics::{
    build_rank_table, count_syllables, count_text_syllables, log_rank_stats, LogBase, OovPolicy,
    SyllableRule,
};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(str::to_owned)
}

fn snapshots() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 0..6), 1..12)
}

fn log_of(snaps: &[Vec<String>]) -> IncrementalLog {
    let events = snaps
        .iter()
        .enumerate()
        .map(|(i, s)| LogEvent {
            time: 1.0 + i as f64,
            text: s.join(" "),
        })
        .collect();
    IncrementalLog::new("d", events, None).unwrap()
}

fn times(log: &IncrementalLog) -> Vec<f64> {
    finalization_times(log, &Tokenizer::new())
        .unwrap()
        .into_iter()
        .map(|r| r.time)
        .collect()
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["the", "cat", "sat", "on", "a", "mat", "dog"])
            .prop_map(str::to_owned),
        1..10,
    )
}

proptest! {
    #[test]
    fn finalization_is_monotone(snaps in snapshots()) {
        let t = times(&log_of(&snaps));
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn repeated_final_event_changes_nothing(snaps in snapshots()) {
        let before = times(&log_of(&snaps));
        let mut more = snaps.clone();
        more.push(snaps.last().unwrap().clone());
        prop_assert_eq!(times(&log_of(&more)), before);
    }

    #[test]
    fn revising_last_word_delays_it(snaps in snapshots(), replacement in "[f-h]") {
        let mut revised = snaps.clone();
        let mut last = snaps.last().unwrap().clone();
        prop_assume!(!last.is_empty());
        *last.last_mut().unwrap() = replacement;
        revised.push(last);
        let before = times(&log_of(&snaps));
        let after = times(&log_of(&revised));
        let revision_time = revised.len() as f64;
        prop_assert!(*after.last().unwrap() >= revision_time);
        // the untouched prefix keeps its times
        prop_assert_eq!(&after[..after.len() - 1], &before[..before.len() - 1]);
    }

    #[test]
    fn syllables_add_up(words in prop::collection::vec("[bcdfgklmnprst]{0,3}[aeiou][a-z]{0,5}", 1..10)) {
        for lang in ["en", "cs", "de"] {
            let rule = SyllableRule::for_language(lang).unwrap();
            let each: Vec<usize> = words.iter().map(|w| count_syllables(w, &rule)).collect();
            prop_assert!(each.iter().all(|&n| n >= 1));
            prop_assert_eq!(count_text_syllables(&words, &rule), each.iter().sum::<usize>());
        }
    }

    #[test]
    fn rank_table_is_a_frequency_bijection(tokens in prop::collection::vec("[a-f]{1,2}", 1..60)) {
        let table = build_rank_table(&tokens, &HashSet::new()).unwrap();
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for t in &tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
        let mut ranks: Vec<usize> = freq.keys().map(|w| table.rank(w).unwrap()).collect();
        ranks.sort_unstable();
        prop_assert_eq!(ranks, (1..=freq.len()).collect::<Vec<_>>());
        for (a, fa) in &freq {
            for (b, fb) in &freq {
                if fa > fb {
                    prop_assert!(table.rank(a) < table.rank(b));
                }
            }
        }
    }

    #[test]
    fn log_rank_mean_ignores_order(
        corpus in prop::collection::vec("[a-f]{1,2}", 1..60),
        text in prop::collection::vec("[a-g]{1,2}", 1..30),
        seed in any::<u64>(),
    ) {
        let table = build_rank_table(&corpus, &HashSet::new()).unwrap();
        let mut shuffled = text.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        for policy in [OovPolicy::Exclude, OovPolicy::RankPastEnd] {
            let a = log_rank_stats(&text, &table, &HashSet::new(), LogBase::E, policy).unwrap();
            let b = log_rank_stats(&shuffled, &table, &HashSet::new(), LogBase::E, policy).unwrap();
            prop_assert_eq!(a.sample_size, b.sample_size);
            match (a.mean, b.mean) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0)),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn bleu_one_mode_ignores_segment_order(
        pairs in prop::collection::vec((sentence(), sentence()), 1..6),
        rotate in 0usize..6,
    ) {
        let cfg = BleuConfig { mode: Segmentation::One, ..BleuConfig::default() };
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let mut moved = pairs.clone();
        let k = rotate % moved.len();
        moved.rotate_left(k);
        let (h2, r2): (Vec<_>, Vec<_>) = moved.into_iter().unzip();
        prop_assert_eq!(bleu(&h, &r, &cfg).unwrap().score, bleu(&h2, &r2, &cfg).unwrap().score);
        prop_assert_eq!(bleu(&h, &h, &cfg).unwrap().score, 100.0);
    }

    #[test]
    fn annotation_groups_partition_records(
        raw in prop::collection::vec((0u8..3, 0u8..2, 0u8..=100), 1..40),
    ) {
        let records: Vec<AnnotationRecord> = raw
            .iter()
            .enumerate()
            .map(|(i, &(sys, ann, score))| AnnotationRecord {
                sentence_id: format!("s{i}"),
                system: format!("sys{sys}"),
                annotator: format!("a{ann}"),
                score: score as f64,
            })
            .collect();
        let summary = aggregate_annotations(&records).unwrap();
        prop_assert_eq!(summary.iter().map(|s| s.n).sum::<usize>(), records.len());
        let mut reversed = records.clone();
        reversed.reverse();
        let again = aggregate_annotations(&reversed).unwrap();
        prop_assert_eq!(summary.len(), again.len());
        for (a, b) in summary.iter().zip(&again) {
            prop_assert_eq!((&a.annotator, &a.system, a.n), (&b.annotator, &b.system, b.n));
            prop_assert!((a.mean - b.mean).abs() < 1e-12 && (a.std - b.std).abs() < 1e-12);
        }
    }

    #[test]
    fn bpe_segments_concatenate_to_word(
        merges in prop::collection::vec(("[a-d]{1,2}", "[a-d]{1,2}"), 0..10),
        w in "[a-d]{0,10}",
        eow in any::<bool>(),
    ) {
        let model = BpeModel::new(merges, eow.then(|| "</w>".to_owned()));
        prop_assert_eq!(model.apply(&w).concat(), w);
    }

    #[test]
    fn filter_keeps_an_ordered_subsequence(
        pairs in prop::collection::vec((prop::collection::vec("[a-c]{1,4}", 1..5), prop::collection::vec("[a-c]{1,4}", 1..5)), 1..20),
        ratio in 0.1f64..2.0,
    ) {
        let corpus = ParallelCorpus::new(
            pairs.into_iter().map(|(source, target)| SentencePair { source, target }).collect(),
        ).unwrap();
        let models = SubwordModels::joint(BpeModel::new([("a", "b"), ("ab", "c")], None));
        let out = filter_corpus(&corpus, &FilterConfig { max_ratio: ratio }, &models).unwrap();
        let mut it = corpus.pairs().iter();
        for kept in out.kept.pairs() {
            prop_assert!(it.any(|p| p == kept));
        }
        let all = filter_corpus(&corpus, &FilterConfig { max_ratio: f64::INFINITY }, &models).unwrap();
        prop_assert_eq!(all.kept, corpus);
    }
}
