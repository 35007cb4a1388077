"""Score a handful of candidate captions against multi-reference ground truth.

Run with: python3 demos/score_captions.py
"""

from aacap.metrics import EvalInstance, bleu, cider, evaluate_corpus, meteor, rouge_l
from aacap.text import normalize

references = [
    ["water runs over the rocks", "a stream flows gently downhill",
     "water is flowing over stones", "a brook babbles along",
     "water trickles over a rocky bed"],
    ["a dog barks twice", "a dog is barking loudly",
     "the dog barks at something", "two barks from a large dog",
     "a dog barks in a yard"],
    ["rain falls on a metal roof", "heavy rain hits the rooftop",
     "rain drums steadily on metal", "a downpour on a tin roof",
     "rain patters on the roof"],
]

candidates = [
    "water flows over the rocks",
    "a dog barks",
    "wind blows through trees",  # deliberately wrong
]

cand_tokens = [normalize(c) for c in candidates]
ref_tokens = [[normalize(r) for r in refs] for refs in references]

# --- per-instance scores -----------------------------------------------------
for cand, refs in zip(cand_tokens, ref_tokens):
    instance = EvalInstance(cand, refs)
    print(f"candidate: {' '.join(cand)!r}")
    print(f"  rouge_l={rouge_l(instance):.3f}  meteor={meteor(instance):.3f}")

# --- corpus-level report -----------------------------------------------------
report = evaluate_corpus(cand_tokens, ref_tokens)
print("\ncorpus report (raw values; multiply by 100 for the usual display):")
print(report.format_text())

# BLEU degrades gracefully from unigrams to 4-grams
instances = [EvalInstance(c, r) for c, r in zip(cand_tokens, ref_tokens)]
print("\nBLEU by order:", [round(bleu(instances, n), 3) for n in (1, 2, 3, 4)])
print("CIDEr (tf-idf weighted):", round(cider(instances), 3))
