//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! console.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use eventqa::corpus::{gold_triggers, EventMention, GoldTrigger, SentenceBuilder, SentenceRecord};
use eventqa::decoding::{
    merge_windows, n_best_spans, predictions_at, select_threshold, QuestionCandidates, SpanCandidate, ThresholdConfig,
    TriggerPrediction, DEFAULT_GRID,
};
use eventqa::encoder::{EncoderAdapter, MockConfig, MockEncoder, SpanScores};
use eventqa::evaluation::{score, unseen_type_split};
use eventqa::interpret::connectivity;
use eventqa::markers::{augment, Direction, MarkerMode};
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{PackConfig, QAInstance, QaSetup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let el = t.elapsed();
    check(el < limit, format!("took {:.1}s, limit {}s", el.as_secs_f64(), limit.as_secs()))
}

// ---- 1 -------------------------------------------------------------------

fn marker_round_trip() -> Outcome {
    let t = Instant::now();
    let records = corpus(1000, 0.5, 101);
    let mut spans = 0;
    for mode in [MarkerMode::EntityPosition, MarkerMode::EntityType, MarkerMode::ArgumentRole] {
        for rec in &records {
            let aug = augment(rec, mode).map_err(|e| e.to_string())?;
            check(aug.strip() == rec.text, format!("{} {mode}: strip differs", rec.key()))?;
            for ev in &rec.events {
                let (s, e) = aug
                    .remap_span(ev.trigger_start, ev.trigger_end, Direction::ToAugmented)
                    .map_err(|e| e.to_string())?;
                check(
                    aug.slice(s, e) == rec.slice(ev.trigger_start, ev.trigger_end),
                    format!("{} {mode}: trigger text moved", rec.key()),
                )?;
                let back = aug.remap_span(s, e, Direction::ToOriginal).map_err(|e| e.to_string())?;
                check(back == (ev.trigger_start, ev.trigger_end), format!("{} {mode}: round trip {back:?}", rec.key()))?;
                spans += 1;
            }
        }
    }
    within(t, Duration::from_secs(30))?;
    Ok(format!("1000 sentences x 3 modes, {spans} trigger spans exact"))
}

// ---- 2 -------------------------------------------------------------------

/// Every valid span ranked by a full sort.
fn brute_force_n_best(scores: &SpanScores, inst: &QAInstance, n_best: usize, max_len: usize) -> Vec<(usize, usize, f64)> {
    let mut all = Vec::new();
    for (i, si) in inst.original_offsets.iter().enumerate() {
        if si.is_none() {
            continue;
        }
        for (j, ej) in inst.original_offsets.iter().enumerate().skip(i) {
            if ej.is_none() || j - i + 1 > max_len {
                continue;
            }
            let (s, e) = (inst.context_offset + i, inst.context_offset + j);
            all.push((s, e, scores.start_probs[s] * scores.end_probs[e]));
        }
    }
    all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then((a.1 - a.0).cmp(&(b.1 - b.0))));
    all.truncate(n_best);
    all
}

fn decoder_oracle() -> Outcome {
    let t = Instant::now();
    let (_, mut pool) = marked_instances(202, 40);
    // a multi-window instance so windows with a non-zero index are covered
    let long = long_instances();
    pool.extend(long);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ThresholdConfig::default();
    for trial in 0..500 {
        let inst = &pool[rng.random_range(0..pool.len())];
        let n = inst.len();
        // coarse levels so that equal products and tie-breaks occur often
        let levels = if trial % 2 == 0 { 4 } else { 1000 };
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1..=levels) as f64).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / z).collect()
        };
        let start_probs = draw(&mut rng);
        let end_probs = draw(&mut rng);
        let scores = SpanScores {
            start_logits: start_probs.iter().map(|p| p.ln()).collect(),
            end_logits: end_probs.iter().map(|p| p.ln()).collect(),
            start_probs,
            end_probs,
        };
        let got = n_best_spans(&scores, inst, &cfg);
        let want = brute_force_n_best(&scores, inst, cfg.n_best, cfg.max_answer_subtokens);
        let got_keys: Vec<(usize, usize, f64)> = got.iter().map(|c| (c.start_subtoken, c.end_subtoken, c.probability)).collect();
        check(got_keys == want, format!("trial {trial}: {got_keys:?} != {want:?}"))?;
        for c in &got {
            let i = c.start_subtoken - inst.context_offset;
            let j = c.end_subtoken - inst.context_offset;
            check(
                (c.char_start, c.char_end) == (inst.original_offsets[i].unwrap().0, inst.original_offsets[j].unwrap().1)
                    && c.window_index == inst.window_index,
                format!("trial {trial}: offsets of {c:?}"),
            )?;
        }
    }
    within(t, Duration::from_secs(60))?;
    Ok("500 random score sets equal the brute-force ranking".into())
}

fn long_instances() -> Vec<QAInstance> {
    let recs = corpus(30, 0.0, 9);
    let setup = QaSetup {
        pack: PackConfig {
            max_seq_len: 20,
            doc_stride: 6,
        },
        ..setup_over(&recs, MarkerMode::ArgumentRole)
    };
    setup.instances(&recs).unwrap().into_iter().filter(|i| i.window_index > 0).take(30).collect()
}

// ---- 3 -------------------------------------------------------------------

/// Non-negative rational kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio(u128, u128);

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    fn new(n: u128, d: u128) -> Ratio {
        if d == 0 || n == 0 {
            return Ratio(0, 1);
        }
        let g = gcd(n, d);
        Ratio(n / g, d / g)
    }
    fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.0 * o.0, self.1 * o.1)
    }
    fn div(self, o: Ratio) -> Ratio {
        if o.0 == 0 {
            return Ratio(0, 1);
        }
        Ratio::new(self.0 * o.1, self.1 * o.0)
    }
    fn gt(self, o: Ratio) -> bool {
        self.0 * o.1 > o.0 * self.1
    }
    fn value(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

/// Precision, recall and harmonic-mean F1 in exact arithmetic.
fn prf(tp: usize, fp: usize, fn_: usize) -> (Ratio, Ratio, Ratio) {
    let p = Ratio::new(tp as u128, (tp + fp) as u128);
    let r = Ratio::new(tp as u128, (tp + fn_) as u128);
    let f = Ratio::new(2, 1).mul(p).mul(r).div(p.add(r));
    (p, r, f)
}

fn selection_oracle(dev: &[QuestionCandidates], gold: &[GoldTrigger]) -> f64 {
    let gold_keys: BTreeSet<(String, String, String, usize, usize)> = gold
        .iter()
        .map(|g| (g.doc_id.clone(), g.sent_id.clone(), g.event_type.clone(), g.start, g.end))
        .collect();
    let mut best: Option<(Ratio, f64)> = None;
    for &t in DEFAULT_GRID.iter().rev() {
        let mut tp = 0;
        let mut fp = 0;
        for q in dev {
            for c in q.candidates.iter().filter(|c| c.probability >= t) {
                if gold_keys.contains(&(q.doc_id.clone(), q.sent_id.clone(), q.event_type.clone(), c.char_start, c.char_end)) {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let f = prf(tp, fp, gold_keys.len() - tp).2;
        // descending scan: only a strictly better F1 displaces a higher threshold
        if best.is_none_or(|(b, _)| f.gt(b)) {
            best = Some((f, t));
        }
    }
    best.unwrap().1
}

fn random_dev(rng: &mut ChaCha8Rng) -> (Vec<QuestionCandidates>, Vec<GoldTrigger>) {
    let mut dev = Vec::new();
    let mut gold = Vec::new();
    for qi in 0..rng.random_range(1..6) {
        let (doc, sent, ty) = (format!("d{}", qi / 2), format!("s{qi}"), TYPES[qi % 4].to_string());
        let mut candidates = Vec::new();
        for k in 0..rng.random_range(0..5usize) {
            let s = 10 * k;
            candidates.push(SpanCandidate {
                start_subtoken: k,
                end_subtoken: k,
                window_index: 0,
                probability: rng.random_range(0..10) as f64 / 10.0 + 0.05,
                char_start: s,
                char_end: s + 4,
                text: String::new(),
            });
            if rng.random_bool(0.5) {
                gold.push(GoldTrigger { doc_id: doc.clone(), sent_id: sent.clone(), event_type: ty.clone(), start: s, end: s + 4 });
            }
        }
        if rng.random_bool(0.3) {
            gold.push(GoldTrigger { doc_id: doc.clone(), sent_id: sent.clone(), event_type: ty.clone(), start: 999, end: 1003 });
        }
        dev.push(QuestionCandidates { doc_id: doc, sent_id: sent, event_type: ty, candidates });
    }
    (dev, gold)
}

fn threshold_fidelity() -> Outcome {
    let t = Instant::now();
    let ont = ontology();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut non_top = 0;
    for trial in 0..100 {
        let (dev, gold) = random_dev(&mut rng);
        let got = select_threshold(&dev, &gold, &ont, &DEFAULT_GRID).map_err(|e| e.to_string())?.selected;
        let want = selection_oracle(&dev, &gold);
        check(got == want, format!("trial {trial}: selected {got}, oracle {want}"))?;
        non_top += usize::from(got < 0.5);
    }
    // every grid point scores the same: nothing is ever predicted
    let empty = vec![QuestionCandidates { doc_id: "d".into(), sent_id: "s".into(), event_type: "Die".into(), candidates: vec![] }];
    let g = [GoldTrigger { doc_id: "d".into(), sent_id: "s".into(), event_type: "Die".into(), start: 0, end: 3 }];
    let all_ties = select_threshold(&empty, &g, &ont, &DEFAULT_GRID).map_err(|e| e.to_string())?;
    check(all_ties.selected == 0.5, format!("all-ties case selected {}", all_ties.selected))?;
    within(t, Duration::from_secs(30))?;
    Ok(format!("100 random dev sets match the oracle ({non_top} chose below 0.5); all-ties -> 0.5"))
}

// ---- 4 -------------------------------------------------------------------

fn scorer_oracle() -> Outcome {
    let t = Instant::now();
    let ont = ontology();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..200 {
        let mut preds = Vec::new();
        let mut gold = Vec::new();
        for _ in 0..rng.random_range(0..15) {
            gold.push(GoldTrigger {
                doc_id: format!("d{}", rng.random_range(0..2)),
                sent_id: "s".into(),
                event_type: TYPES[rng.random_range(0..4)].into(),
                start: rng.random_range(0..4) * 5,
                end: 0,
            });
        }
        for g in &mut gold {
            g.end = g.start + 3;
        }
        for _ in 0..rng.random_range(0..15) {
            let s = rng.random_range(0..4) * 5;
            preds.push(TriggerPrediction {
                doc_id: format!("d{}", rng.random_range(0..2)),
                sent_id: "s".into(),
                event_type: TYPES[rng.random_range(0..4)].into(),
                char_start: s,
                char_end: s + if rng.random_bool(0.8) { 3 } else { 4 },
                text: String::new(),
                probability: rng.random_range(0.0..1.0),
            });
        }
        // oracle: per exact key, matches are limited by the smaller side
        let mut pc: BTreeMap<(String, String, String, usize, usize), usize> = BTreeMap::new();
        let mut gc = pc.clone();
        for p in &preds {
            *pc.entry((p.doc_id.clone(), p.sent_id.clone(), p.event_type.clone(), p.char_start, p.char_end)).or_default() += 1;
        }
        for g in &gold {
            *gc.entry((g.doc_id.clone(), g.sent_id.clone(), g.event_type.clone(), g.start, g.end)).or_default() += 1;
        }
        let mut per_type: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
        for (k, &n) in &pc {
            let m = n.min(gc.get(k).copied().unwrap_or(0));
            let e = per_type.entry(k.2.clone()).or_default();
            e.0 += m;
            e.1 += n - m;
        }
        for (k, &n) in &gc {
            let m = n.min(pc.get(k).copied().unwrap_or(0));
            per_type.entry(k.2.clone()).or_default().2 += n - m;
        }
        let (tp, fp, fn_) = per_type.values().fold((0, 0, 0), |a, v| (a.0 + v.0, a.1 + v.1, a.2 + v.2));
        let r = score(&preds, &gold, &ont);
        check((r.tp, r.fp, r.fn_) == (tp, fp, fn_), format!("trial {trial}: counts {:?} vs {:?}", (r.tp, r.fp, r.fn_), (tp, fp, fn_)))?;
        let (p, rc, f) = prf(tp, fp, fn_);
        for (name, got, want) in [("P", r.precision, p), ("R", r.recall, rc), ("F1", r.f1, f)] {
            check((got - want.value()).abs() <= 1e-12, format!("trial {trial}: {name} {got} vs {want:?}"))?;
        }
        for (ty, &(tp, fp, fn_)) in &per_type {
            let c = r.per_type[ty];
            check((c.tp, c.fp, c.fn_) == (tp, fp, fn_), format!("trial {trial}: {ty} counts"))?;
            check((c.f1 - prf(tp, fp, fn_).2.value()).abs() <= 1e-12, format!("trial {trial}: {ty} F1"))?;
        }
    }
    let wrong_type = score(
        &[TriggerPrediction {
            doc_id: "d".into(),
            sent_id: "s".into(),
            event_type: "Attack".into(),
            char_start: 56,
            char_end: 64,
            text: "killings".into(),
            probability: 0.9,
        }],
        &[GoldTrigger { doc_id: "d".into(), sent_id: "s".into(), event_type: "Die".into(), start: 56, end: 64 }],
        &ont,
    );
    check((wrong_type.tp, wrong_type.fp, wrong_type.fn_) == (0, 1, 1), "wrong type on the right span must be FP+FN")?;
    within(t, Duration::from_secs(30))?;
    Ok("200 random configurations match the matching oracle; wrong type -> FP+FN".into())
}

// ---- 5 -------------------------------------------------------------------

fn connectivity_gradient_check() -> Outcome {
    let t = Instant::now();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (setup, pool) = marked_instances(505, 30);
    for trial in 0..20u64 {
        let enc = MockEncoder::for_setup(&setup, MockConfig { seed: trial, init_std: 0.3, ..MockConfig::default() }).unwrap();
        let inst = &pool[rng.random_range(0..pool.len())];
        let bounds: Vec<usize> = inst.context_positions().filter(|&p| inst.is_answer_boundary(p)).collect();
        let s = bounds[rng.random_range(0..bounds.len())];
        let e = *bounds.iter().filter(|&&b| b >= s).last().unwrap();
        let map = connectivity(&enc, inst, s, e).map_err(|e| e.to_string())?;
        let x = enc.embed_inputs(inst).unwrap();
        let (n, d) = x.dim();
        let mut gs = vec![0.0; n];
        let mut ge = vec![0.0; n];
        for r in 0..n {
            for c in 0..d {
                let mut xp = x.clone();
                xp[[r, c]] += h;
                let mut xm = x.clone();
                xm[[r, c]] -= h;
                let sp = enc.forward_from_embeddings(inst, &xp).unwrap();
                let sm = enc.forward_from_embeddings(inst, &xm).unwrap();
                let ds = (sp.start_logits[s] - sm.start_logits[s]) / (2.0 * h);
                let de = (sp.end_logits[e] - sm.end_logits[e]) / (2.0 * h);
                gs[r] += ds * ds;
                ge[r] += de * de;
            }
        }
        for (fd, an) in [(&gs, &map.start_raw), (&ge, &map.end_raw)] {
            for (f, a) in fd.iter().zip(an.iter()) {
                let f = f.sqrt();
                let rel = (f - a).abs() / f.abs().max(a.abs()).max(1e-12);
                worst = worst.max(rel);
            }
        }
    }
    check(worst <= 1e-4, format!("max relative error {worst:.2e}"))?;

    let mut zero = MockEncoder::for_setup(&setup, MockConfig::default()).unwrap();
    zero.zero_span_head();
    for inst in pool.iter().take(5) {
        let b = inst.context_offset;
        let map = connectivity(&zero, inst, b, b).map_err(|e| e.to_string())?;
        check(
            map.start_raw.iter().chain(&map.end_raw).chain(&map.combined).all(|&v| v == 0.0),
            "zero span head gave a non-zero map",
        )?;
    }
    within(t, Duration::from_secs(120))?;
    Ok(format!("20 instances, max relative error {worst:.2e}; zero head -> zero maps"))
}

// ---- 6 -------------------------------------------------------------------

/// "The air assault killed two soldiers ." with one Attack trigger.
fn air_assault() -> (QaSetup, QAInstance) {
    let mut b = SentenceBuilder::new();
    b.push("The");
    let (s, e) = b.push_words("air assault");
    b.push_words("killed two soldiers");
    b.glue(".");
    let mut rec: SentenceRecord = b.finish("air", "s0");
    rec.events.push(EventMention { id: "ev1".into(), event_type: "Attack".into(), trigger_start: s, trigger_end: e, arguments: vec![] });
    let setup = QaSetup::build(
        ontology(),
        MarkerMode::ArgumentRole,
        QuestionStyle::WithArticle,
        std::slice::from_ref(&rec),
        std::slice::from_ref(&rec),
        PackConfig::default(),
    )
    .unwrap();
    let inst = setup.prepare_for(&rec, &["Attack".to_string()]).unwrap().instances.remove(0);
    (setup, inst)
}

fn dedup_injection(air_first: bool) -> Result<String, String> {
    let (_, inst) = air_assault();
    let pos = |word: &str| inst.tokens.iter().position(|t| t == word).unwrap();
    let (air, assault) = (pos("air"), pos("assault"));
    let mut sp = vec![1e-4f64; inst.len()];
    let mut ep = vec![1e-4f64; inst.len()];
    sp[air] = if air_first { 0.6 } else { 0.3 };
    sp[assault] = if air_first { 0.3 } else { 0.6 };
    ep[assault] = 0.9;
    let scores = SpanScores::from_logits(sp.iter().map(|p| p.ln()).collect(), ep.iter().map(|p| p.ln()).collect());
    let nbest = n_best_spans(&scores, &inst, &ThresholdConfig::default());
    let texts: Vec<&str> = nbest.iter().map(|c| c.text.as_str()).collect();
    check(texts.contains(&"air assault") && texts.contains(&"assault"), format!("both spans expected in n-best: {texts:?}"))?;
    let merged = merge_windows(vec![nbest]);
    let q = QuestionCandidates { doc_id: inst.doc_id.clone(), sent_id: inst.sent_id.clone(), event_type: "Attack".into(), candidates: merged };
    let kept: Vec<String> = predictions_at(&[q], 0.1).into_iter().map(|p| p.text).collect();
    let want = if air_first { "air assault" } else { "assault" };
    check(kept == [want], format!("after dedup {kept:?}, expected [{want:?}]"))?;
    Ok(want.to_string())
}

/// Two Attack triggers whose single-word spans both clear the threshold.
fn two_answers_decoded() -> Result<(), String> {
    let mut b = SentenceBuilder::new();
    b.push("The");
    let first = b.push("attack");
    b.push_words("and the");
    let second = b.push("bombing");
    b.push_words("killed two soldiers");
    b.glue(".");
    let mut rec: SentenceRecord = b.finish("two", "s0");
    for (i, (s, e)) in [first, second].into_iter().enumerate() {
        rec.events.push(EventMention { id: format!("ev{i}"), event_type: "Attack".into(), trigger_start: s, trigger_end: e, arguments: vec![] });
    }
    let setup = setup_over(std::slice::from_ref(&rec), MarkerMode::ArgumentRole);
    let inst = setup.prepare_for(&rec, &["Attack".to_string()]).unwrap().instances.remove(0);
    check(inst.gold_answers.len() == 2, "packing should give two gold answers")?;
    let mut sp = vec![1e-4f64; inst.len()];
    let mut ep = vec![1e-4f64; inst.len()];
    let ((s1, e1), (s2, e2)) = (inst.gold_answers[0], inst.gold_answers[1]);
    sp[s1] = 0.5;
    sp[s2] = 0.4;
    ep[e1] = 0.5;
    ep[e2] = 0.4;
    let scores = SpanScores::from_logits(sp.iter().map(|p| p.ln()).collect(), ep.iter().map(|p| p.ln()).collect());
    let merged = merge_windows(vec![n_best_spans(&scores, &inst, &ThresholdConfig::default())]);
    let q = QuestionCandidates { doc_id: "two".into(), sent_id: "s0".into(), event_type: "Attack".into(), candidates: merged };
    let kept: Vec<String> = predictions_at(&[q], 0.1).into_iter().map(|p| p.text).collect();
    check(kept == ["attack", "bombing"], format!("two-answer decode gave {kept:?}"))
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let data = splits(200, 100, 200, 0.0, 7);
    let exp = train_experiment(&data, MarkerMode::ArgumentRole, 7, 30, &BTreeSet::new());
    let f1 = exp.test_f1(&data.test, &all_types(), true);
    let elapsed = t.elapsed();
    check(f1 >= 0.9, format!("held-out F1 {f1:.4} < 0.9"))?;

    let preds = eventqa::decoding::decode(&exp.setup, &exp.trained, &data.test, &exp.threshold).unwrap();
    let predicted: BTreeSet<(String, String, String, usize, usize)> = preds
        .iter()
        .map(|p| (p.doc_id.clone(), p.sent_id.clone(), p.event_type.clone(), p.char_start, p.char_end))
        .collect();
    let mut per_question: BTreeMap<(String, String, String), Vec<GoldTrigger>> = BTreeMap::new();
    for g in gold_triggers(&data.test) {
        per_question.entry((g.doc_id.clone(), g.sent_id.clone(), g.event_type.clone())).or_default().push(g);
    }
    let multi: Vec<&Vec<GoldTrigger>> = per_question.values().filter(|v| v.len() >= 2).collect();
    let complete = multi
        .iter()
        .filter(|v| v.iter().all(|g| predicted.contains(&(g.doc_id.clone(), g.sent_id.clone(), g.event_type.clone(), g.start, g.end))))
        .count();
    check(!multi.is_empty(), "test corpus has no multi-answer question")?;
    // same tolerance as the F1 bar; see the ledger for the spanning-candidate
    // failure behind the misses
    check(
        complete as f64 >= 0.9 * multi.len() as f64,
        format!("{complete}/{} multi-answer questions fully recovered", multi.len()),
    )?;
    two_answers_decoded()?;

    dedup_injection(true)?;
    dedup_injection(false)?;
    check(elapsed < Duration::from_secs(300), format!("training took {:.0}s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "test F1 {f1:.4} after {} epochs ({:.0}s); {complete}/{} multi-answer questions complete; air assault/assault dedup ok",
        exp.epochs_run,
        elapsed.as_secs_f64(),
        multi.len()
    ))
}

// ---- 7 -------------------------------------------------------------------

fn marker_trend() -> Outcome {
    let t = Instant::now();
    let modes = [MarkerMode::None, MarkerMode::EntityType, MarkerMode::ArgumentRole];
    let mut f1 = [0.0f64; 3];
    let mut per_seed = Vec::new();
    for seed in 1..=3u64 {
        let data = splits(200, 100, 200, 0.5, seed);
        let mut row = Vec::new();
        for (k, &mode) in modes.iter().enumerate() {
            let exp = train_experiment(&data, mode, seed, 30, &BTreeSet::new());
            let v = exp.test_f1(&data.test, &all_types(), true);
            f1[k] += v / 3.0;
            row.push(format!("{v:.3}"));
        }
        per_seed.push(row.join("/"));
    }
    let [none, ety, role] = f1;
    let detail = format!(
        "mean F1 none {none:.4}, entity_type {ety:.4}, argument_role {role:.4} (per seed none/type/role: {})",
        per_seed.join(", ")
    );
    check(role >= ety - 1e-12 && ety >= none - 0.02, format!("ordering violated: {detail}"))?;
    check(role - none >= 0.05, format!("argument_role gain {:.4} < 0.05: {detail}", role - none))?;
    within(t, Duration::from_secs(20 * 60))?;
    Ok(detail)
}

// ---- 8 -------------------------------------------------------------------

fn unseen_types() -> Outcome {
    let t = Instant::now();
    let mut margins = Vec::new();
    let mut notes = Vec::new();
    for seed in 1..=3u64 {
        let unseen = held_out(seed);
        let data = splits(200, 100, 200, 0.0, seed);
        let exp = train_experiment(&data, MarkerMode::ArgumentRole, seed, 30, &unseen);
        let trained = exp.test_f1(&data.test, &unseen, true);
        let baseline = exp.test_f1(&data.test, &unseen, false);
        margins.push(trained - baseline);
        notes.push(format!("{}: {trained:.3} vs {baseline:.3}", unseen.iter().next().unwrap()));
    }
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    let ace = EventOntology::ace2005();
    let k = unseen_type_split(&[], &[], &ace, 0.2, 0).map_err(|e| e.to_string())?.unseen_types.len();
    check(k == 6, format!("ACE split at 0.2 gave {k} unseen types"))?;
    check(mean >= 0.2, format!("mean unseen margin {mean:.4} < 0.2 ({})", notes.join(", ")))?;
    within(t, Duration::from_secs(10 * 60))?;
    Ok(format!("mean unseen margin over untrained {mean:.4} ({}); ACE 0.2 split -> 6 types", notes.join(", ")))
}

// ---- 9 -------------------------------------------------------------------

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with("meta") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = eventqa::pipeline::RunConfig::default();
    cfg.out_dir = tmp.path().join("run");
    cfg.synth.n_train = 60;
    cfg.synth.n_dev = 20;
    cfg.synth.n_test = 20;
    cfg.train.max_epochs = 3;
    cfg.analyze.n_saliency = 2;
    let cfg_path = tmp.path().join("config.json");
    cfg.save(&cfg_path).unwrap();
    let commands = ["synth", "prepare", "train", "calibrate", "predict", "evaluate", "analyze"];
    let run_all = || -> Result<(), String> {
        for c in commands {
            let o = std::process::Command::new(env!("CARGO_BIN_EXE_eventqa"))
                .args([c, "--config", cfg_path.to_str().unwrap()])
                .output()
                .map_err(|e| e.to_string())?;
            check(o.status.success(), format!("{c}: {}", String::from_utf8_lossy(&o.stderr)))?;
        }
        Ok(())
    };
    run_all()?;
    let first = snapshot(&cfg.out_dir);
    run_all()?;
    let second = snapshot(&cfg.out_dir);
    check(first.keys().eq(second.keys()), "artifact sets differ between runs")?;
    let differing: Vec<String> = first
        .iter()
        .filter(|(k, v)| second[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    check(differing.is_empty(), format!("differing artifacts: {differing:?}"))?;
    let n_json = first.keys().filter(|k| k.extension().is_some_and(|e| e == "json" || e == "jsonl")).count();
    check(n_json > 0, "no JSON artifacts produced")?;
    Ok(format!("7 commands rerun: {} artifacts ({n_json} JSON/JSONL) byte-identical", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("marker round trip", marker_round_trip),
        ("decoder oracle", decoder_oracle),
        ("threshold selection", threshold_fidelity),
        ("scorer oracle", scorer_oracle),
        ("connectivity gradients", connectivity_gradient_check),
        ("end-to-end learning", end_to_end),
        ("marker benefit trend", marker_trend),
        ("unseen types", unseen_types),
        ("reproducibility", reproducibility),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} {name}: PASS [{secs:.1}s] {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL [{secs:.1}s] {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
