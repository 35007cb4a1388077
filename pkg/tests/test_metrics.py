import itertools
import math

import numpy as np
import pytest

from aacap.errors import DataError
from aacap.metrics import (
    EvalInstance,
    MetricReport,
    bleu,
    cider,
    evaluate_corpus,
    lcs_length,
    load_synonym_table,
    meteor,
    rouge_l,
    rouge_l_corpus,
)
from aacap.stemmer import porter_stem


def inst(candidate, *references):
    return EvalInstance(candidate.split(), [r.split() for r in references])


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def test_bleu_perfect_match():
    assert bleu([inst("a dog barks", "a dog barks", "dogs bark")], 1) == pytest.approx(1.0)


def test_bleu_clipped_unigram_hand_case():
    # "a a" vs "a b": one clipped match out of two, lengths equal so BP = 1
    assert bleu([inst("a a", "a b")], 1) == pytest.approx(0.5)


def test_bleu_zero_fourgram_matches_gives_zero():
    assert bleu([inst("a b c d e", "a x b y c z d e q")], 4) == 0.0


def test_bleu_brevity_penalty_applies_when_short():
    # candidate 2 tokens vs reference 4: both unigrams match, BP = exp(1 - 4/2)
    score = bleu([inst("a b", "a b c d")], 1)
    assert score == pytest.approx(math.exp(-1.0))


def test_bleu_corpus_pools_counts_before_ratio():
    instances = [inst("a a", "a b"), inst("c d", "c d")]
    # correct = 1 + 2, guess = 2 + 2, lengths equal -> BP 1
    assert bleu(instances, 1) == pytest.approx(0.75)


def test_bleu_empty_corpus_rejected():
    with pytest.raises(DataError):
        bleu([], 1)


def test_bleu_order_out_of_range():
    with pytest.raises(DataError):
        bleu([inst("a", "a")], 5)


def test_bleu_empty_candidate_scores_zero():
    assert bleu([inst("", "a b")], 1) == 0.0


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------

def test_rouge_identical_pair():
    assert rouge_l(inst("a b c", "a b c")) == pytest.approx(1.0)


def test_rouge_hand_case():
    # LCS("a b c d", "a c d") = 3; P = 0.75, R = 1.0; F(beta=1.2) = 0.879808
    assert rouge_l(inst("a b c d", "a c d")) == pytest.approx(0.8798, abs=1e-4)


def test_rouge_disjoint_vocabulary():
    assert rouge_l(inst("a b", "c d")) == 0.0


def test_rouge_empty_candidate():
    assert rouge_l(inst("", "a b")) == 0.0


def test_rouge_takes_best_reference():
    score = rouge_l(inst("a b c", "x y z", "a b c"))
    assert score == pytest.approx(1.0)


def brute_force_lcs(a, b):
    best = 0
    for r in range(len(a), 0, -1):
        for subset in itertools.combinations(range(len(a)), r):
            sub = [a[i] for i in subset]
            it = iter(b)
            if all(tok in it for tok in sub):
                best = r
                break
        if best:
            break
    return best


def test_lcs_matches_brute_force_enumeration():
    rng = np.random.default_rng(0)
    alphabet = list("wxyz")
    for _ in range(200):
        a = [alphabet[i] for i in rng.integers(0, 4, rng.integers(0, 9))]
        b = [alphabet[i] for i in rng.integers(0, 4, rng.integers(0, 9))]
        assert lcs_length(a, b) == brute_force_lcs(a, b), (a, b)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------

def test_cider_self_match_with_unique_ngrams():
    instances = [
        inst("water gurgles down the drain", "water gurgles down the drain"),
        inst("birds chirp in a tree", "birds chirp in a tree"),
    ]
    assert cider(instances) == pytest.approx(1.0)


def test_cider_candidate_with_no_overlap_contributes_zero():
    instances = [
        inst("p q r s", "a b c d"),
        inst("e f g h", "e f g h"),
    ]
    # first instance shares nothing with its references: its score is 0
    both = cider(instances)
    second_only = cider([inst("x y z w", "a b c d"), instances[1]])
    assert both == pytest.approx(second_only)


def test_cider_idf_zero_ngrams_contribute_nothing():
    # "calm noise" tails appear in every document, so those grams carry
    # idf 0; repeating one changes no score
    base = [
        inst("alpha calm noise", "alpha calm noise", "beta calm noise"),
        inst("gamma calm noise", "gamma calm noise", "delta calm noise"),
    ]
    repeated = [
        inst("alpha calm noise noise", "alpha calm noise", "beta calm noise"),
        base[1],
    ]
    assert cider(repeated) == pytest.approx(cider(base))


def test_cider_single_instance_warns():
    with pytest.warns(UserWarning):
        cider([inst("a b", "a b")])


def test_cider_d_variant_penalizes_length_gap():
    matched = [inst("a b c d", "a b c d"), inst("e f g h", "e f g h")]
    stretched = [inst("a b c d", "a b c d x y z w q r s t"),
                 inst("e f g h", "e f g h")]
    assert cider_d_score(stretched) < cider(stretched)
    assert cider_d_score(matched) == pytest.approx(cider(matched))


def cider_d_score(instances):
    return cider(instances, cider_d=True)


def test_cider_empty_corpus_rejected():
    with pytest.raises(DataError):
        cider([])


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------

def test_meteor_identical_pair_penalty_formula():
    # 4 matches in one chunk: score = 1 - 0.5 * (1/4)^3
    assert meteor(inst("a b c d", "a b c d")) == pytest.approx(1.0 - 0.5 / 64)


def test_meteor_zero_matches():
    assert meteor(inst("a b", "c d")) == 0.0


def test_meteor_stem_stage_matches_inflections():
    assert porter_stem("running") == porter_stem("runs") == "run"
    score = meteor(inst("running", "runs"))
    # single match, one chunk: F = 1, penalty = 0.5
    assert score == pytest.approx(0.5)


def test_meteor_synonym_stage_optional():
    synonyms = {"car": {"automobile"}, "automobile": {"car"}}
    assert meteor(inst("car", "automobile")) == 0.0
    assert meteor(inst("car", "automobile"), synonyms=synonyms) == pytest.approx(0.5)


def test_meteor_fragmentation_increases_penalty():
    contiguous = meteor(inst("a b c d", "a b c d x"))
    scattered = meteor(inst("a b c d", "a x b y c z d"))
    assert scattered < contiguous


def test_meteor_empty_candidate():
    assert meteor(inst("", "a b")) == 0.0


def test_synonym_table_round_trip(tmp_path):
    path = tmp_path / "syn.tsv"
    path.write_text("car\tautomobile\nrock\tstone\n")
    table = load_synonym_table(path)
    assert "car" in table["automobile"]
    assert "stone" in table["rock"]


def test_synonym_table_rejects_malformed_line(tmp_path):
    path = tmp_path / "syn.tsv"
    path.write_text("just_one_column\n")
    with pytest.raises(DataError):
        load_synonym_table(path)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

CORPUS_REFS = [
    [["water", "runs", "over", "rocks"], ["a", "stream", "flows", "gently"],
     ["water", "flowing", "downhill", "fast"]],
    [["a", "dog", "barks", "loudly"], ["dog", "barking", "at", "night"],
     ["the", "dog", "barks", "twice"]],
    [["rain", "falls", "on", "a", "roof"], ["heavy", "rain", "outside"],
     ["rain", "drums", "on", "metal"]],
]


def test_evaluate_corpus_first_reference_scores_high():
    candidates = [refs[0] for refs in CORPUS_REFS]
    report = evaluate_corpus(candidates, CORPUS_REFS)
    assert 0.9 <= report.bleu_1 <= 1.0
    assert 0.9 <= report.rouge_l <= 1.0
    assert 0.9 <= report.meteor <= 1.0
    assert report.cider > 0.0


def test_evaluate_corpus_empty_candidates_all_zero():
    candidates = [[] for _ in CORPUS_REFS]
    report = evaluate_corpus(candidates, CORPUS_REFS)
    assert report.to_dict() == {key: 0.0 for key in report.to_dict()}


def test_evaluate_corpus_order_invariant():
    candidates = [["water", "runs"], ["a", "dog", "barks"], ["rain", "falls"]]
    report = evaluate_corpus(candidates, CORPUS_REFS)
    permuted = evaluate_corpus(candidates[::-1], CORPUS_REFS[::-1])
    assert report.to_dict() == pytest.approx(permuted.to_dict())


def test_evaluate_corpus_reference_permutation_invariant():
    candidates = [["water", "runs"], ["a", "dog", "barks"], ["rain", "falls"]]
    shuffled_refs = [refs[::-1] for refs in CORPUS_REFS]
    a = evaluate_corpus(candidates, CORPUS_REFS)
    b = evaluate_corpus(candidates, shuffled_refs)
    assert a.to_dict() == pytest.approx(b.to_dict())


def test_evaluate_corpus_length_mismatch():
    with pytest.raises(DataError):
        evaluate_corpus([["a"]], CORPUS_REFS)


def test_bounded_metrics_stay_in_unit_interval_on_random_corpora():
    rng = np.random.default_rng(42)
    vocab = ["rain", "wind", "dog", "bird", "hum", "click", "roars", "soft"]
    for _ in range(20):
        def sentence():
            return [vocab[i] for i in rng.integers(0, len(vocab), rng.integers(1, 9))]

        instances = [EvalInstance(sentence(), [sentence() for _ in range(3)])
                     for _ in range(4)]
        for n in (1, 2, 3, 4):
            assert 0.0 <= bleu(instances, n) <= 1.0
        for instance in instances:
            assert 0.0 <= rouge_l(instance) <= 1.0
            assert 0.0 <= meteor(instance) <= 1.0
        assert cider(instances) >= 0.0


def test_metric_report_serialization(tmp_path):
    report = MetricReport(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    text = report.format_text()
    assert "bleu_1 0.100000" in text
    assert "meteor 0.700000" in text
    path = tmp_path / "report.json"
    report.save(path)
    import json

    loaded = json.loads(path.read_text())
    assert set(loaded) == {"bleu_1", "bleu_2", "bleu_3", "bleu_4",
                           "rouge_l", "cider", "meteor"}
    assert loaded["cider"] == 0.6
