use std::io::Cursor;

use fairtext::dataset::{read_jsonl, read_mbic, write_jsonl, write_mbic, CsvDialect, MbicRecord};
use fairtext::debias::{mask_random, mask_spans, shift_decompose, MASK_TOKEN};
use fairtext::detection::{DetectorModel, FeatureConfig, Label};
use fairtext::metrics::{confusion, disparate_impact, power_mean, roc_auc, GroupOutcome};
use fairtext::recognition::{bio_to_spans, recognize, spans_to_bio, Lexicon, LexiconEntry};
use fairtext::text::{detokenize, split_sentences, tokenize, Span};
use proptest::prelude::*;

fn text_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z0-9]{1,8}",
            "[a-z]{1,4}[-'][a-z]{1,4}",
            "[.,!?;:\"()\\[\\]]",
            "[ \t\n]{1,3}",
            "[éüñß中文]{1,3}",
            "[A-Z][a-z]{0,5}\\. ",
        ],
        0..40,
    )
    .prop_map(|parts| parts.concat())
}

/// Random non-overlapping spans over `n` tokens, from a stream of choices.
fn pick_spans(n: usize, choices: &[(bool, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    for &(take, len) in choices {
        if t >= n {
            break;
        }
        if take {
            let last = (t + len).min(n - 1);
            out.push((t, last));
            t = last + 1;
        } else {
            t += 1;
        }
    }
    out
}

proptest! {
    #[test]
    fn token_offsets_recover_surfaces(text in text_strategy()) {
        let doc = tokenize(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut covered = vec![false; chars.len()];
        let mut previous_end = 0;
        for tok in &doc.tokens {
            prop_assert!(tok.start < tok.end);
            prop_assert!(tok.start >= previous_end);
            previous_end = tok.end;
            let slice: String = chars[tok.start..tok.end].iter().collect();
            prop_assert_eq!(&slice, &tok.surface);
            for c in &mut covered[tok.start..tok.end] {
                *c = true;
            }
        }
        for (c, cov) in chars.iter().zip(&covered) {
            prop_assert_eq!(!c.is_whitespace(), *cov, "char {:?}", c);
        }
    }

    #[test]
    fn detokenize_with_own_surfaces_is_identity(text in text_strategy(), choices in prop::collection::vec((any::<bool>(), 0usize..3), 0..40)) {
        let doc = tokenize(&text);
        prop_assert_eq!(detokenize::<&str>(&doc, &[]).unwrap(), text.clone());
        let spans: Vec<(Span, String)> = pick_spans(doc.tokens.len(), &choices)
            .into_iter()
            .map(|(a, b)| {
                let s = doc.span(a, b).unwrap();
                let surface = s.surface.clone();
                (s, surface)
            })
            .collect();
        prop_assert_eq!(detokenize(&doc, &spans).unwrap(), text);
    }

    #[test]
    fn sentences_concatenate_to_input(text in text_strategy()) {
        prop_assert_eq!(split_sentences(&text).concat(), text.clone());
        let doc = tokenize(&text);
        let mut expected_first = 0;
        for &(first, last) in &doc.sentence_bounds {
            prop_assert_eq!(first, expected_first);
            prop_assert!(first <= last);
            expected_first = last + 1;
        }
        prop_assert_eq!(expected_first, doc.tokens.len());
    }

    #[test]
    fn bio_round_trip(text in text_strategy(), choices in prop::collection::vec((any::<bool>(), 0usize..3), 0..40)) {
        let doc = tokenize(&text);
        let spans: Vec<Span> = pick_spans(doc.tokens.len(), &choices)
            .into_iter()
            .map(|(a, b)| doc.span(a, b).unwrap())
            .collect();
        let tags = spans_to_bio(&doc, &spans).unwrap();
        prop_assert_eq!(tags.len(), doc.tokens.len());
        prop_assert_eq!(bio_to_spans(&doc, &tags).unwrap(), spans);
    }

    #[test]
    fn recognized_spans_never_overlap(
        words in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "."]), 0..30),
        terms in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 1..4), 0..8),
    ) {
        let mut lexicon = Lexicon::new();
        for t in &terms {
            lexicon.insert(&t.join(" "), LexiconEntry { count_in_biased: 1, count_total: 1 });
        }
        let doc = tokenize(&words.join(" "));
        let found = recognize(&lexicon, &doc, 0.0);
        for pair in found.windows(2) {
            prop_assert!(pair[0].span.last_token < pair[1].span.first_token);
        }
        for s in &found {
            prop_assert!(s.span.len() <= 3);
            prop_assert!(doc.tokens[s.span.first_token..=s.span.last_token].iter().all(|t| t.is_word()));
        }
    }

    #[test]
    fn f1_forms_agree_and_metrics_are_bounded(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let (preds, labels): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let cm = confusion(&preds, &labels).unwrap();
        prop_assert_eq!(cm.total() as usize, preds.len());
        for m in [cm.precision(), cm.recall(), cm.f1(), cm.accuracy()].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&m));
        }
        if let (Ok(p), Ok(r), Ok(f1)) = (cm.precision(), cm.recall(), cm.f1()) {
            if p + r > 0.0 {
                prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn di_swapping_groups_gives_the_reciprocal(
        a in (1u64..1000).prop_flat_map(|n| (1..=n, Just(n))),
        b in (1u64..1000).prop_flat_map(|n| (1..=n, Just(n))),
    ) {
        let forward = disparate_impact(&GroupOutcome::new("u", false, a.0, a.1), &GroupOutcome::new("p", true, b.0, b.1)).unwrap();
        let backward = disparate_impact(&GroupOutcome::new("u", false, b.0, b.1), &GroupOutcome::new("p", true, a.0, a.1)).unwrap();
        prop_assert!((forward.di * backward.di - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_of_negated_scores_is_the_complement(
        data in prop::collection::vec((0u8..10, any::<bool>()), 2..200)
            .prop_filter("both classes", |d| d.iter().any(|x| x.1) && d.iter().any(|x| !x.1)),
    ) {
        let scores: Vec<f64> = data.iter().map(|x| x.0 as f64).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let labels: Vec<bool> = data.iter().map(|x| x.1).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        prop_assert!((auc + roc_auc(&negated, &labels).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_mean_lies_between_min_and_max(values in prop::collection::vec(0.001f64..1.0, 1..20), p in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let m = power_mean(&values, p).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
    }

    #[test]
    fn mbic_csv_round_trip(records in prop::collection::vec(record_strategy(), 0..20)) {
        let dialect = CsvDialect::default();
        let mut buf = Vec::new();
        write_mbic(&mut buf, &records, &dialect).unwrap();
        let report = read_mbic(buf.as_slice(), &dialect).unwrap();
        prop_assert!(report.malformed.is_empty());
        prop_assert_eq!(report.records, records);
    }

    #[test]
    fn jsonl_round_trip(records in prop::collection::vec(record_strategy(), 0..20)) {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &records).unwrap();
        let back: Vec<MbicRecord> = read_jsonl(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn mask_laws(text in text_strategy(), choices in prop::collection::vec((any::<bool>(), 0usize..3), 0..40)) {
        let doc = tokenize(&text);
        let spans: Vec<Span> = pick_spans(doc.tokens.len(), &choices)
            .into_iter()
            .map(|(a, b)| doc.span(a, b).unwrap())
            .collect();
        let masked = mask_spans(&doc, &spans).unwrap();
        let baseline = text.matches(MASK_TOKEN).count();
        prop_assert_eq!(masked.rendering.matches(MASK_TOKEN).count(), spans.len() + baseline);
        let instances = shift_decompose(&masked);
        prop_assert_eq!(instances.len(), spans.len());
        for inst in &instances {
            prop_assert_eq!(inst.text.matches(MASK_TOKEN).count(), 1 + baseline);
            let rebuilt = format!("{}{}{}", inst.left_context(), inst.target_span.surface, inst.right_context());
            prop_assert_eq!(&rebuilt, &text);
        }
    }

    #[test]
    fn random_masking_is_bounded_and_seeded(text in text_strategy(), fraction in 0.01f64..=1.0, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let doc = tokenize(&text);
        let a = mask_random(&doc, fraction, p, seed).unwrap();
        let b = mask_random(&doc, fraction, p, seed).unwrap();
        prop_assert_eq!(&a.masked_spans, &b.masked_spans);
        let limit = (fraction * doc.tokens.len() as f64).ceil() as usize;
        prop_assert!(a.mask_count() <= limit);
        prop_assert!(a.masked_spans.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn model_file_round_trip(weights in prop::collection::vec(-10.0f64..10.0, 16), bias in -5.0f64..5.0, threshold in 0.01f64..0.99) {
        let features = FeatureConfig { hash_dimension: 16, ngram_orders: vec![1, 3] };
        let mut model = DetectorModel::zeros(features, threshold).unwrap();
        model.weights = weights;
        model.bias_term = bias;
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = DetectorModel::read_from(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, model);
    }
}

fn record_strategy() -> impl Strategy<Value = MbicRecord> {
    let field = "([A-Za-z0-9][A-Za-z0-9 ,.'\"-]{0,20}[A-Za-z0-9])?";
    let word = "[a-z][a-z -]{0,10}[a-z]";
    (
        "[A-Z][a-zA-Z0-9 ,.'\"!?-]{0,40}[a-z.!?]",
        field,
        field,
        field,
        "([0-9]{2})?",
        field,
        field,
        prop::collection::vec(word, 0..4),
        any::<bool>(),
    )
        .prop_map(
            |(sentence, news_link, outlet, topic, age, gender, education, biased_words, biased)| {
                MbicRecord {
                    sentence,
                    news_link,
                    outlet,
                    topic,
                    annotator_age: age,
                    annotator_gender: gender,
                    annotator_education: education,
                    biased_words,
                    label: Label::from_positive(biased),
                }
            },
        )
}
