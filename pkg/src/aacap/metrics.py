"""Multi-reference caption metrics: BLEU-1..4, ROUGE-L, CIDEr, METEOR.

All scorers take pre-tokenized lowercase captions. BLEU and CIDEr are
corpus-level; ROUGE-L and METEOR score each instance against its best
reference and report the corpus mean. Scores are raw (CIDEr is not scaled
by 10); callers that want the usual x100 display do that at print time.
"""

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from math import exp, log, sqrt
from typing import Callable, Optional, Sequence

from .errors import DataError
from .stemmer import porter_stem

Tokens = Sequence[str]

ROUGE_BETA = 1.2
METEOR_CHUNK_PENALTY = 0.5
CIDER_SIGMA = 6.0  # length penalty width, CIDEr-D variant only


@dataclass
class EvalInstance:
    candidate: list[str]
    references: list[list[str]]

    def __post_init__(self):
        if not self.references:
            raise DataError("an evaluation instance needs at least one reference")


@dataclass
class MetricReport:
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    rouge_l: float
    cider: float
    meteor: float

    def to_dict(self) -> dict[str, float]:
        return {"bleu_1": self.bleu_1, "bleu_2": self.bleu_2, "bleu_3": self.bleu_3,
                "bleu_4": self.bleu_4, "rouge_l": self.rouge_l, "cider": self.cider,
                "meteor": self.meteor}

    def format_text(self) -> str:
        return "\n".join(f"{key} {value:.6f}" for key, value in self.to_dict().items())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def bleu(instances: Sequence[EvalInstance], n: int = 4) -> float:
    """Corpus BLEU-n: clipped n-gram precision, geometric mean over 1..n,
    brevity penalty from closest-reference lengths (ties to the shorter)."""
    if not 1 <= n <= 4:
        raise DataError(f"BLEU order must be 1..4, got {n}")
    if not instances:
        raise DataError("BLEU of an empty candidate set")
    correct = [0] * n
    guess = [0] * n
    cand_len = 0
    ref_len = 0
    for inst in instances:
        cand = list(inst.candidate)
        cand_len += len(cand)
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in inst.references)[1]
        for k in range(1, n + 1):
            counts = ngram_counts(cand, k)
            max_ref = Counter()
            for ref in inst.references:
                for gram, count in ngram_counts(ref, k).items():
                    max_ref[gram] = max(max_ref[gram], count)
            correct[k - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            guess[k - 1] += max(0, len(cand) - k + 1)
    if cand_len == 0 or any(c == 0 for c in correct) or any(g == 0 for g in guess):
        return 0.0
    log_precision = sum(log(c / g) for c, g in zip(correct, guess)) / n
    brevity = 1.0 if cand_len > ref_len else exp(1.0 - ref_len / cand_len)
    return brevity * exp(log_precision)


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------

def lcs_length(a: Tokens, b: Tokens) -> int:
    """Longest common subsequence length, quadratic dynamic program."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ai in a:
        row = [0] * (len(b) + 1)
        for j, bj in enumerate(b, start=1):
            row[j] = prev[j - 1] + 1 if ai == bj else max(prev[j], row[j - 1])
        prev = row
    return prev[-1]


def rouge_l(instance: EvalInstance, beta: float = ROUGE_BETA) -> float:
    """Best F-measure over references from LCS precision and recall."""
    cand = instance.candidate
    if not cand:
        return 0.0
    best = 0.0
    for ref in instance.references:
        if not ref:
            continue
        lcs = lcs_length(cand, ref)
        if lcs == 0:
            continue
        precision = lcs / len(cand)
        recall = lcs / len(ref)
        score = ((1 + beta ** 2) * precision * recall
                 / (recall + beta ** 2 * precision))
        best = max(best, score)
    return best


def rouge_l_corpus(instances: Sequence[EvalInstance]) -> float:
    if not instances:
        raise DataError("ROUGE-L of an empty candidate set")
    return sum(rouge_l(inst) for inst in instances) / len(instances)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------

def _tfidf_vector(tokens: Tokens, n: int, idf: dict) -> tuple[dict, float]:
    vec = {gram: count * idf.get(gram, 0.0)
           for gram, count in ngram_counts(tokens, n).items()}
    norm = sqrt(sum(v * v for v in vec.values()))
    return vec, norm


def cider(instances: Sequence[EvalInstance], n_max: int = 4,
          cider_d: bool = False) -> float:
    """tf-idf weighted n-gram cosine against each reference, averaged over
    references and over n = 1..n_max; idf treats one item's reference set as
    one document. The cider_d flag adds count clipping and the gaussian
    length penalty of the -D variant."""
    if not instances:
        raise DataError("CIDEr of an empty candidate set")
    if len(instances) < 2:
        warnings.warn("CIDEr idf is degenerate with a single instance", stacklevel=2)
    log_n = log(len(instances))
    idf_by_n: list[dict] = []
    for n in range(1, n_max + 1):
        doc_freq: Counter = Counter()
        for inst in instances:
            grams = set()
            for ref in inst.references:
                grams.update(ngram_counts(ref, n).keys())
            doc_freq.update(grams)
        idf_by_n.append({gram: log_n - log(max(1.0, df))
                         for gram, df in doc_freq.items()})
    total = 0.0
    for inst in instances:
        per_n = []
        for n in range(1, n_max + 1):
            idf = idf_by_n[n - 1]
            cand_vec, cand_norm = _tfidf_vector(inst.candidate, n, idf)
            score = 0.0
            for ref in inst.references:
                ref_vec, ref_norm = _tfidf_vector(ref, n, idf)
                if cand_norm == 0.0 or ref_norm == 0.0:
                    continue
                if cider_d:
                    dot = sum(min(v, ref_vec.get(g, 0.0)) * ref_vec.get(g, 0.0)
                              for g, v in cand_vec.items())
                else:
                    dot = sum(v * ref_vec.get(g, 0.0) for g, v in cand_vec.items())
                sim = dot / (cand_norm * ref_norm)
                if cider_d:
                    delta = len(inst.candidate) - len(ref)
                    sim *= exp(-delta * delta / (2.0 * CIDER_SIGMA ** 2))
                score += sim
            per_n.append(score / len(inst.references))
        total += sum(per_n) / n_max
    return total / len(instances)


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------

def load_synonym_table(path) -> dict[str, set[str]]:
    """word<TAB>synonym per line; pairs are symmetric."""
    table: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{line_no}: expected 'word<TAB>synonym'")
            a, b = parts
            table.setdefault(a, set()).add(b)
            table.setdefault(b, set()).add(a)
    return table


def _align(candidate: Tokens, reference: Tokens,
           stem: Callable[[str], str],
           synonyms: Optional[dict[str, set[str]]]) -> list[tuple[int, int]]:
    """Staged greedy unigram alignment: exact, then stem, then synonyms."""
    stages = [lambda c, r: c == r, lambda c, r: stem(c) == stem(r)]
    if synonyms is not None:
        stages.append(lambda c, r: r in synonyms.get(c, ()) or c in synonyms.get(r, ()))
    cand_free = [True] * len(candidate)
    ref_free = [True] * len(reference)
    pairs: list[tuple[int, int]] = []
    for matches in stages:
        for ci, cw in enumerate(candidate):
            if not cand_free[ci]:
                continue
            for ri, rw in enumerate(reference):
                if ref_free[ri] and matches(cw, rw):
                    pairs.append((ci, ri))
                    cand_free[ci] = False
                    ref_free[ri] = False
                    break
    return sorted(pairs)


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor(instance: EvalInstance, stem: Callable[[str], str] = porter_stem,
           synonyms: Optional[dict[str, set[str]]] = None) -> float:
    """F-mean 10PR/(R+9P) with fragmentation penalty 0.5(chunks/matches)^3,
    best over references."""
    cand = instance.candidate
    if not cand:
        return 0.0
    best = 0.0
    for ref in instance.references:
        if not ref:
            continue
        pairs = _align(cand, ref, stem, synonyms)
        matches = len(pairs)
        if matches == 0:
            continue
        precision = matches / len(cand)
        recall = matches / len(ref)
        f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
        penalty = METEOR_CHUNK_PENALTY * (_chunk_count(pairs) / matches) ** 3
        best = max(best, f_mean * (1.0 - penalty))
    return best


def meteor_corpus(instances: Sequence[EvalInstance],
                  synonyms: Optional[dict[str, set[str]]] = None) -> float:
    if not instances:
        raise DataError("METEOR of an empty candidate set")
    return sum(meteor(inst, synonyms=synonyms) for inst in instances) / len(instances)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

def evaluate_corpus(candidates: Sequence[Tokens],
                    references: Sequence[Sequence[Tokens]],
                    synonyms: Optional[dict[str, set[str]]] = None,
                    cider_d: bool = False) -> MetricReport:
    """All metrics over aligned candidate/reference lists."""
    if len(candidates) != len(references):
        raise DataError(
            f"{len(candidates)} candidates vs {len(references)} reference sets")
    instances = [EvalInstance(list(c), [list(r) for r in refs])
                 for c, refs in zip(candidates, references)]
    return MetricReport(
        bleu_1=bleu(instances, 1),
        bleu_2=bleu(instances, 2),
        bleu_3=bleu(instances, 3),
        bleu_4=bleu(instances, 4),
        rouge_l=rouge_l_corpus(instances),
        cider=cider(instances, cider_d=cider_d),
        meteor=meteor_corpus(instances, synonyms=synonyms),
    )
