use std::collections::BTreeSet;
use std::sync::OnceLock;

use elicit_core::corpus::{context_window, segment_chat_instances};
use elicit_core::labeling::{merge_candidates, select_top_k};
use elicit_core::labelmodel::{masked_objective, predict_proba, rank_explanations};
use elicit_core::schema::{variable, DeferralPolicy, LfKind};
use elicit_core::session::{budget_size, plan_deferral, ConflictPolicy, Decision, ItemKey};
use elicit_core::{Candidate, LabelModelFit, ChatMessage, Document, OmegaMask, Sender, SessionState, SourceKind, Span, ValidationRecord};
use proptest::prelude::*;

fn candidate() -> impl Strategy<Value = Candidate> {
    (0..3usize, 0..2usize, 0..4usize, 0..3usize, 0..200usize, 1..60usize, 0.0..1.0f64).prop_map(
        |(doc, var, lf, value, start, len, conf)| Candidate {
            lf_id: format!("lf{lf}"),
            lf_kind: if lf == 0 { LfKind::Keyword } else { LfKind::External },
            variable_id: format!("v{var}"),
            value: format!("x{value}"),
            confidence: conf,
            raw_score: conf,
            span: Span::new(format!("d{doc}"), start, start + len),
        },
    )
}

fn base_fit() -> &'static LabelModelFit {
    static FIT: OnceLock<LabelModelFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let (lambda, _) = elicit_core::evaluation::synthetic::synthetic_lambda(&[0.8, 0.7, 0.6, 0.9], 20, 0);
        elicit_core::labelmodel::fit(&lambda, &OmegaMask::full(4), &Default::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn merge_partitions_candidates(cands in prop::collection::vec(candidate(), 0..40), threshold in 0.05..1.0f64) {
        let groups = merge_candidates(&cands, threshold);
        let mut members: Vec<Candidate> = groups.iter().flat_map(|g| g.members.clone()).collect();
        let mut input = cands.clone();
        let key = |c: &Candidate| (c.span.clone(), c.lf_id.clone(), c.variable_id.clone(), c.value.clone(), c.confidence.to_bits());
        members.sort_by_key(key);
        input.sort_by_key(key);
        prop_assert_eq!(members, input);

        let lfs: BTreeSet<&str> = cands.iter().map(|c| c.lf_id.as_str()).collect();
        let ids: BTreeSet<&str> = groups.iter().map(|g| g.group_id.as_str()).collect();
        prop_assert_eq!(ids.len(), groups.len());
        for g in &groups {
            prop_assert!(g.agreement >= 1 && g.agreement <= lfs.len());
            prop_assert_eq!(g.agreement, g.lf_ids().len());
            for c in &g.members {
                prop_assert!(g.merged_span.contains(&c.span));
                prop_assert_eq!(&c.value, &g.value);
                prop_assert_eq!(&c.variable_id, &g.variable_id);
                prop_assert_eq!(&c.span.doc_id, &g.doc_id);
            }
        }

        let again: Vec<Candidate> = groups.iter().flat_map(|g| g.members.clone()).collect();
        prop_assert_eq!(merge_candidates(&again, threshold), groups.clone());
        let mut reversed = cands.clone();
        reversed.reverse();
        prop_assert_eq!(merge_candidates(&reversed, threshold), groups);
    }

    #[test]
    fn top_k_bounds(cands in prop::collection::vec(candidate(), 0..40), k in 1..4usize) {
        let kept = select_top_k(&cands, k);
        let mut counts = std::collections::BTreeMap::new();
        for c in &kept {
            prop_assert!(cands.contains(c));
            if c.lf_kind != LfKind::Keyword {
                *counts.entry((&c.span.doc_id, &c.lf_id, &c.variable_id, &c.value)).or_insert(0) += 1;
            }
        }
        prop_assert!(counts.values().all(|&n| n <= k));
        prop_assert_eq!(
            kept.iter().filter(|c| c.lf_kind == LfKind::Keyword).count(),
            cands.iter().filter(|c| c.lf_kind == LfKind::Keyword).count()
        );
        // nothing dropped scores above something kept in the same slot
        for c in cands.iter().filter(|c| !kept.contains(c)) {
            for d in kept.iter().filter(|d| d.span.doc_id == c.span.doc_id && d.lf_id == c.lf_id && d.variable_id == c.variable_id && d.value == c.value) {
                prop_assert!(d.confidence >= c.confidence);
            }
        }
    }

    #[test]
    fn context_window_contains_span(
        words in prop::collection::vec("[a-z]{1,8}[.!?]?", 1..200),
        a in 0..2000usize,
        len in 1..50usize,
        radius in 0..700usize,
    ) {
        let text = words.join(" ");
        let doc = Document::new("d", &text, SourceKind::LongDocument);
        let n = doc.char_count;
        let start = a % n;
        let end = (start + len).min(n);
        let span = Span::new("d", start, end);
        let ex = context_window(&doc, &span, radius).unwrap();
        prop_assert!(ex.span.contains(&span));
        prop_assert!(ex.text.contains(doc.span_text(&span)));
        prop_assert_eq!(ex.text.as_str(), doc.span_text(&ex.span));
        if radius == 0 {
            prop_assert_eq!(ex.span, span);
        }
    }

    #[test]
    fn segmentation_splits_on_long_gaps(gaps in prop::collection::vec(0..8000u64, 0..30), limit in 1..5000u64) {
        let mut t = 0;
        let mut msgs = vec![ChatMessage { sender: Sender::Offender, timestamp: 0, text: "hi".into() }];
        for g in &gaps {
            t += g;
            msgs.push(ChatMessage { sender: Sender::Decoy, timestamp: t, text: "yo".into() });
        }
        let docs = segment_chat_instances("c", &msgs, limit).unwrap();
        prop_assert_eq!(docs.len(), 1 + gaps.iter().filter(|&&g| g > limit).count());
        prop_assert_eq!(docs.iter().map(|d| d.messages.len()).sum::<usize>(), msgs.len());
    }

    #[test]
    fn objective_is_even(z in prop::collection::vec(-3.0..3.0f64, 4), a in prop::collection::vec(-2.0..2.0f64, 16)) {
        let omega = OmegaMask::full(4);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        prop_assert_eq!(masked_objective(&a, &omega, &z), masked_objective(&a, &omega, &neg));
    }

    #[test]
    fn predict_proba_is_bounded_and_monotone(
        w in prop::collection::vec(0.0..5.0f64, 4),
        row in prop::collection::vec(-1i8..=1, 4),
        k in 0..4usize,
    ) {
        let mut fit = base_fit().clone();
        fit.weights = w;
        let p = predict_proba(&fit, &row).unwrap();
        prop_assert!(p > 0.0 && p < 1.0 || fit.weights.iter().sum::<f64>() > 30.0);
        if row[k] < 1 {
            let mut up = row.clone();
            up[k] += 1;
            prop_assert!(predict_proba(&fit, &up).unwrap() >= p);
        }
    }

    #[test]
    fn budget_deferral_invariants(confs in prop::collection::vec(0.0..1.0f64, 0..50), q in 0.0..=1.0f64) {
        let preds: Vec<(ItemKey, f64)> = confs.iter().enumerate().map(|(i, &c)| (ItemKey::new(format!("d{i:03}"), "v"), c)).collect();
        let plan = plan_deferral(&preds, &DeferralPolicy::Budget(q));
        prop_assert_eq!(plan.human.len(), budget_size(q, preds.len()));
        prop_assert_eq!(plan.human.len() + plan.auto.len(), preds.len());
        let conf = |k: &ItemKey| preds.iter().find(|(p, _)| p == k).unwrap().1;
        let max_h = plan.human.iter().map(conf).fold(f64::NEG_INFINITY, f64::max);
        let min_a = plan.auto.iter().map(conf).fold(f64::INFINITY, f64::min);
        prop_assert!(max_h <= min_a);
    }

    #[test]
    fn ranking_ignores_input_order(cands in prop::collection::vec(candidate(), 1..30), seed in any::<u64>()) {
        let groups = merge_candidates(&cands, 0.5);
        let mut shuffled = groups.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize ^ i.wrapping_mul(2654435761)) % (i + 1));
        }
        prop_assert_eq!(rank_explanations(&groups), rank_explanations(&shuffled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn replay_reproduces_any_session(ops in prop::collection::vec((0..4usize, 0..3usize, 0..4usize, 0..2usize), 0..40)) {
        let cands: Vec<Candidate> = (0..4)
            .flat_map(|d| (0..3).map(move |v| Candidate {
                lf_id: format!("lf{v}"),
                lf_kind: LfKind::External,
                variable_id: "sex".into(),
                value: if v == 2 { "female".into() } else { "male".into() },
                confidence: 0.3 * v as f64 + 0.1 * d as f64,
                raw_score: 0.5,
                span: Span::new(format!("d{d}"), 10 * v, 10 * v + 8),
            }))
            .collect();
        let groups = merge_candidates(&cands, 0.5);
        let docs: Vec<String> = (0..4).map(|d| format!("d{d}")).collect();
        let mut s = SessionState::open(vec![variable("sex", &["male", "female"])], docs, ConflictPolicy::FirstWins).unwrap();
        s.load_groups(None, groups.clone()).unwrap();
        for (n, (doc, kind, g, who)) in ops.into_iter().enumerate() {
            let key = ItemKey::new(format!("d{doc}"), "sex");
            let ranked: Vec<String> = s.ranked_groups(&key).iter().map(|g| g.group_id.clone()).collect();
            let (decision, group_id) = match kind {
                0 => (Decision::Confirm, ranked.get(g % ranked.len().max(1)).cloned()),
                1 => (Decision::Reject, ranked.get(g % ranked.len().max(1)).cloned()),
                _ => (Decision::NoEvidence, None),
            };
            let _ = s.submit_validation(ValidationRecord {
                record_id: format!("r{n}"),
                doc_id: key.doc_id.clone(),
                variable_id: "sex".into(),
                group_id,
                decision,
                annotator_id: format!("a{who}"),
                wall_time_ms: n as u64,
                timestamp: n as u64,
            });
            if n == 20 {
                s.plan_deferral(DeferralPolicy::Budget(0.5)).unwrap();
            }
        }
        let replayed = SessionState::replay(s.log.clone()).unwrap();
        prop_assert_eq!(replayed.export_table(), s.export_table());
        prop_assert_eq!(replayed, s);
    }
}
