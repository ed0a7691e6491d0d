mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rubricnli::corpus::{
    corpus_stats, generate_synthetic_corpus, holdout_question_split, load_corpus, make_split, save_corpus,
    subsample_train, Corpus, Partition, SplitAssignment, SynthParams,
};
use rubricnli::points::Rational;

fn eighty_ten_ten() -> [Rational; 3] {
    [Rational::new(4, 5), Rational::new(1, 10), Rational::new(1, 10)]
}

/// Judgment counts by scanning every (response, item) pair of the corpus.
fn enumerate_counts(c: &Corpus) -> (usize, usize) {
    let mut n = 0;
    let mut n_true = 0;
    for r in c.responses() {
        for item in c.rubric_items().iter().filter(|i| i.question_id == r.question_id) {
            let j = c
                .judgments()
                .iter()
                .find(|j| j.response_id == r.id && j.rubric_item_id == item.id)
                .expect("valid corpora judge every pair");
            n += 1;
            n_true += j.label as usize;
        }
    }
    (n, n_true)
}

#[test]
fn synthetic_seed7_stats_match_enumeration_and_golden() {
    let c = generate_synthetic_corpus(&SynthParams::default(), 7).unwrap();
    let stats = corpus_stats(&c);
    let (n, n_true) = enumerate_counts(&c);
    assert_eq!((stats.n_judgments, stats.n_true, stats.n_false), (n, n_true, n - n_true));
    assert_eq!((stats.n_questions, stats.n_items, stats.n_responses), (4, 28, 200));
    common::assert_golden("synth_seed7_stats.json", &(serde_json::to_string_pretty(&stats).unwrap() + "\n"));
}

#[test]
fn chemistry_shaped_fixture() {
    let built = common::chemistry_shaped();
    let path = common::fixture_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_corpus(&built, &path).unwrap();
    }
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded.document(), built.document(), "fixture file is stale; regenerate with UPDATE_GOLDEN=1");
    let s = corpus_stats(&loaded);
    assert_eq!(
        (s.n_questions, s.n_items, s.n_responses, s.n_judgments, s.n_true, s.n_false),
        (4, 27, 1264, 8392, 4880, 3512)
    );
    for q in loaded.questions() {
        assert_eq!(loaded.max_points(&q.id).as_integer(), Some(8));
    }
}

#[test]
fn judgments_equal_responses_times_items() {
    let corpora = [
        common::chemistry_shaped(),
        generate_synthetic_corpus(&SynthParams::default(), 1).unwrap(),
        generate_synthetic_corpus(&SynthParams { n_questions: 2, items_per_question: 3, responses_per_question: 9, ..Default::default() }, 5)
            .unwrap(),
    ];
    for c in &corpora {
        let expected: usize =
            c.questions().iter().map(|q| c.responses_for(&q.id).count() * c.items_for(&q.id).count()).sum();
        assert_eq!(corpus_stats(c).n_judgments, expected);
    }
}

fn sizes_by_question(split: &SplitAssignment, c: &Corpus) -> BTreeMap<String, [usize; 3]> {
    c.questions().iter().map(|q| (q.id.clone(), split.sizes_for(c, &q.id))).collect()
}

#[test]
fn holdout_q2_sizes_golden() {
    let c = generate_synthetic_corpus(&SynthParams::default(), 7).unwrap();
    let split = holdout_question_split(&c, "q2", Rational::new(1, 10), 7).unwrap();
    let sizes = sizes_by_question(&split, &c);
    assert_eq!(sizes["q2"], [0, 0, 50]);
    for (q, s) in &sizes {
        if q != "q2" {
            assert_eq!(*s, [45, 5, 0]);
        }
    }
    common::assert_golden("holdout_q2_split.json", &(split.to_json_pretty() + "\n"));
}

#[test]
fn subsample_seed3_quarter_golden() {
    let c = generate_synthetic_corpus(&SynthParams::default(), 7).unwrap();
    let split = make_split(&c, eighty_ten_ten(), 3).unwrap();
    let sub = subsample_train(&split, &c, Rational::new(1, 4), 3).unwrap();
    for q in c.questions() {
        // 40 training responses per question, ceil(40 / 4) = 10 kept
        assert_eq!(split.sizes_for(&c, &q.id), [40, 5, 5]);
        assert_eq!(sub.sizes_for(&c, &q.id), [10, 5, 5]);
    }
    let kept: Vec<&str> = sub.ids_in(Partition::Train).collect();
    common::assert_golden("subsample_seed3_quarter.txt", &(kept.join("\n") + "\n"));
}

/// Largest remainder in integer arithmetic: quotas `w_i * n / W` with
/// remainders `(w_i * n) mod W`; ties go to val, then test, then train.
fn oracle_sizes(n: usize, weights: [u64; 3]) -> [usize; 3] {
    let total: u64 = weights.iter().sum();
    let mut sizes = weights.map(|w| (w * n as u64 / total) as usize);
    let rem = weights.map(|w| w * n as u64 % total);
    let mut order = [1usize, 2, 0];
    order.sort_by_key(|&k| std::cmp::Reverse(rem[k]));
    let left = n - sizes.iter().sum::<usize>();
    for &k in &order[..left] {
        sizes[k] += 1;
    }
    sizes
}

fn small_corpus() -> impl Strategy<Value = (SynthParams, u64)> {
    (1usize..5, 1usize..4, 3usize..40, any::<u64>()).prop_map(|(nq, ni, nr, seed)| {
        (
            SynthParams {
                n_questions: nq,
                items_per_question: ni,
                responses_per_question: nr,
                keyword_pool_size: 60,
                ..Default::default()
            },
            seed,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn make_split_partitions_each_question(
        (params, corpus_seed) in small_corpus(),
        weights in prop::array::uniform3(1u64..20),
        seed in any::<u64>(),
    ) {
        let c = generate_synthetic_corpus(&params, corpus_seed).unwrap();
        let total = weights.iter().sum::<u64>() as i64;
        let fractions = weights.map(|w| Rational::new(w as i64, total));
        let split = make_split(&c, fractions, seed).unwrap();

        let ids: HashSet<&str> = split.assignments.iter().map(|e| e.response_id.as_str()).collect();
        prop_assert_eq!(ids.len(), split.assignments.len());
        prop_assert_eq!(ids.len(), c.responses().len());
        for q in c.questions() {
            let n = c.responses_for(&q.id).count();
            prop_assert_eq!(split.sizes_for(&c, &q.id), oracle_sizes(n, weights));
        }

        let again = make_split(&c, fractions, seed).unwrap();
        prop_assert_eq!(split.to_json_pretty(), again.to_json_pretty());

        let f = Rational::new(1, 1 + (seed % 10) as i64);
        let sub = subsample_train(&split, &c, f, seed).unwrap();
        for p in [Partition::Val, Partition::Test] {
            let before: Vec<&str> = split.ids_in(p).collect();
            let after: Vec<&str> = sub.ids_in(p).collect();
            prop_assert_eq!(before, after);
        }
        let train: HashSet<&str> = split.ids_in(Partition::Train).collect();
        prop_assert!(sub.ids_in(Partition::Train).all(|id| train.contains(id)));
    }
}
