"""Greedy and beam-search caption generation from a trained model.

Sequences include the leading <START> token and are capped at max_tokens
entries total, matching the training-time caption length. A hypothesis is
finished once it emits <END> or hits the cap.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import AttentionStep, CaptionModel, EncoderOutput
from .numerics import log_softmax
from .text import END, MAX_TOKENS, START


@dataclass
class Hypothesis:
    tokens: list[int]  # starts with START; ends with END when finished that way
    log_prob: float  # sum of per-step log softmax probabilities
    h: np.ndarray
    c: np.ndarray
    finished: bool = False
    attention: list[AttentionStep] = field(default_factory=list)

    @property
    def emitted(self) -> int:
        return len(self.tokens) - 1

    def score(self, length_normalize: bool) -> float:
        if not length_normalize:
            return self.log_prob
        return self.log_prob / max(1, self.emitted)


def greedy_decode(model: CaptionModel, matrix: np.ndarray,
                  valid_length: int | None = None,
                  max_tokens: int = MAX_TOKENS) -> tuple[list[int], list[AttentionStep]]:
    """Argmax decoding; ties go to the lowest token id. Returns (ids, trace)."""
    enc = model.encode(matrix, valid_length)
    return greedy_decode_encoded(model, enc, max_tokens)


def greedy_decode_encoded(model: CaptionModel, enc: EncoderOutput,
                          max_tokens: int = MAX_TOKENS) -> tuple[list[int], list[AttentionStep]]:
    h, c = model.initial_state()
    ids = [START]
    trace: list[AttentionStep] = []
    while len(ids) < max_tokens:
        logits, h, c, att = model.decoder_step(ids[-1], h, c, enc)
        token = int(np.argmax(logits))
        ids.append(token)
        trace.append(att)
        if token == END:
            break
    return ids, trace


def beam_search(model: CaptionModel, matrix: np.ndarray, beam: int = 3,
                max_tokens: int = MAX_TOKENS, length_normalize: bool = True,
                valid_length: int | None = None) -> Hypothesis:
    """Best completed hypothesis under beam search.

    Finished hypotheses leave the live set and collect in a completed pool;
    the pool winner maximizes the (optionally length-normalized) score, with
    ties broken by shorter length, then lexicographic token order.
    """
    if beam < 1:
        raise ConfigError(f"beam width must be >= 1, got {beam}")
    enc = model.encode(matrix, valid_length)
    h0, c0 = model.initial_state()
    live = [Hypothesis([START], 0.0, h0, c0)]
    completed: list[Hypothesis] = []
    while live:
        candidates = []
        for hyp in live:
            logits, h, c, att = model.decoder_step(hyp.tokens[-1], hyp.h, hyp.c, enc)
            log_probs = log_softmax(logits)
            for token in range(log_probs.size):
                candidates.append((hyp.log_prob + log_probs[token], hyp, token, h, c, att))
        candidates.sort(key=lambda item: (-item[0], item[1].tokens, item[2]))
        next_live = []
        for score, hyp, token, h, c, att in candidates[:beam]:
            extended = Hypothesis(hyp.tokens + [token], score, h, c,
                                  attention=hyp.attention + [att])
            if token == END or len(extended.tokens) >= max_tokens:
                extended.finished = True
                completed.append(extended)
            else:
                next_live.append(extended)
        live = next_live
    best = min(completed,
               key=lambda hyp: (-hyp.score(length_normalize), hyp.emitted, hyp.tokens))
    return best
