"""Dataset manifests, the training loop, evaluation, and attention export.

A manifest is JSON lines, one record per audio item: id, path (either a
precomputed ".aace" embedding file or a ".wav" for the spectrogram
baseline), a list of captions (normally 5), and a split in {dev, val,
eval}. Training is fully reproducible from (seed, config, manifest).
"""

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .decoding import beam_search, greedy_decode_encoded
from .embeddings import load_embedding_file, save_embedding_file
from .errors import ConfigError, DataError, ShapeError
from .features import AugmentConfig, Spectrogram, spec_augment, wav_to_log_mel
from .metrics import EvalInstance, MetricReport, bleu, evaluate_corpus
from .model import CaptionModel, ModelConfig
from .numerics import adam_step
from .text import END, PAD, START, Vocabulary, build_vocab, decode, encode, normalize

SPLITS = ("dev", "val", "eval")
EXPECTED_CAPTIONS = 5

TOY_EVENTS = ["beep", "chime", "drum", "hiss", "knock", "ring", "thud", "whir"]


@dataclass
class ManifestEntry:
    id: str
    path: str
    captions: list[str]
    split: str

    @property
    def is_wav(self) -> bool:
        return self.path.lower().endswith(".wav")


@dataclass
class TrainConfig:
    batch_size: int = 32
    initial_lr: float = 1e-4
    plateau_patience: int = 3
    lr_factor: float = 0.5
    max_epochs: int = 10
    seed: int = 0
    augment: Optional[AugmentConfig] = None
    vocab_min_count: int = 10
    enc_hidden: int = 256
    attn_dim: int = 256
    dec_hidden: int = 256
    word_dim: int = 128

    def __post_init__(self):
        if not 0.0 < self.lr_factor < 1.0:
            raise ConfigError(f"lr_factor must be in (0, 1), got {self.lr_factor}")
        if self.plateau_patience < 1:
            raise ConfigError(f"plateau_patience must be >= 1, got {self.plateau_patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    losses: list[float]
    val_bleu4: list[float]
    lrs: list[float]
    vocab: Vocabulary
    model: CaptionModel


class PlateauScheduler:
    """Halve the rate after `patience` consecutive epochs without improvement.

    Improvement means beating the best seen value by more than min_improvement;
    the stale counter resets when the rate drops.
    """

    def __init__(self, initial_lr: float, factor: float = 0.5, patience: int = 3,
                 min_improvement: float = 1e-6):
        self.lr = initial_lr
        self.factor = factor
        self.patience = patience
        self.min_improvement = min_improvement
        self.best = -math.inf
        self.stale = 0

    def observe(self, metric: float) -> float:
        """Record one epoch's validation metric; returns the next epoch's lr."""
        if metric > self.best + self.min_improvement:
            self.best = metric
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr *= self.factor
                self.stale = 0
        return self.lr


# ---------------------------------------------------------------------------
# manifests and features
# ---------------------------------------------------------------------------

def load_manifest(path) -> list[ManifestEntry]:
    entries = []
    base = Path(path).parent
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entry = ManifestEntry(str(record["id"]), str(record["path"]),
                                      list(record["captions"]), str(record["split"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{line_no}: bad manifest record ({exc})") from exc
            if entry.split not in SPLITS:
                raise DataError(f"{path}:{line_no}: split {entry.split!r} not in {SPLITS}")
            if not Path(entry.path).is_absolute():
                entry.path = str(base / entry.path)
            if not Path(entry.path).exists():
                raise DataError(f"{path}:{line_no}: referenced file missing: {entry.path}")
            if len(entry.captions) != EXPECTED_CAPTIONS:
                warnings.warn(
                    f"{entry.id}: {len(entry.captions)} captions (expected "
                    f"{EXPECTED_CAPTIONS})", stacklevel=2)
            entries.append(entry)
    if not entries:
        raise DataError(f"{path}: empty manifest")
    return entries


def save_manifest(path, entries: list[ManifestEntry]):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps({"id": entry.id, "path": entry.path,
                                 "captions": entry.captions, "split": entry.split}) + "\n")


def split_entries(entries: list[ManifestEntry], split: str) -> list[ManifestEntry]:
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}")
    return [entry for entry in entries if entry.split == split]


def load_features(entry: ManifestEntry) -> np.ndarray:
    """Input matrix for one item: log-mel frames for wav, rows from an
    embedding file otherwise."""
    if entry.is_wav:
        return wav_to_log_mel(entry.path).values
    return load_embedding_file(entry.path)


def load_input_file(path, expected_dim: Optional[int] = None) -> np.ndarray:
    matrix = load_features(ManifestEntry("input", str(path), [], "eval"))
    if expected_dim is not None and matrix.shape[1] != expected_dim:
        raise ShapeError(
            f"{path}: feature dim {matrix.shape[1]} does not match the "
            f"checkpoint's expected {expected_dim}")
    return matrix


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _greedy_captions(model: CaptionModel, vocab: Vocabulary,
                     matrices: list[np.ndarray]) -> list[list[str]]:
    captions = []
    for matrix in matrices:
        enc = model.encode(matrix)
        ids, _ = greedy_decode_encoded(model, enc)
        captions.append(decode(ids, vocab).split())
    return captions


def validation_bleu4(model: CaptionModel, vocab: Vocabulary,
                     entries: list[ManifestEntry],
                     matrices: list[np.ndarray]) -> float:
    candidates = _greedy_captions(model, vocab, matrices)
    instances = [EvalInstance(cand, [normalize(c) for c in entry.captions])
                 for cand, entry in zip(candidates, entries)]
    return bleu(instances, 4)


def train(config: TrainConfig, manifest_path, out_dir) -> TrainResult:
    """Teacher-forced training with Adam, bucket padding, and the plateau rule.

    Writes <out_dir>/model.ckpt (best validation BLEU-4) and a machine
    parseable <out_dir>/train.log with one epoch per line.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = load_manifest(manifest_path)
    dev = split_entries(entries, "dev")
    val = split_entries(entries, "val")
    if not dev or not val:
        raise DataError("training needs non-empty dev and val splits")

    vocab = build_vocab((c for entry in dev for c in entry.captions),
                        min_count=config.vocab_min_count)
    targets = [[encode(c, vocab) for c in entry.captions] for entry in dev]
    dev_matrices = [load_features(entry) for entry in dev]
    val_matrices = [load_features(entry) for entry in val]
    dims = {m.shape[1] for m in dev_matrices + val_matrices}
    if len(dims) != 1:
        raise DataError(f"mixed feature dims across items: {sorted(dims)}")
    feature_dim = dims.pop()

    model_cfg = ModelConfig(embed_dim=feature_dim, vocab_size=len(vocab),
                            enc_hidden=config.enc_hidden, attn_dim=config.attn_dim,
                            dec_hidden=config.dec_hidden, word_dim=config.word_dim)
    model = CaptionModel(model_cfg, seed=config.seed)
    scheduler = PlateauScheduler(config.initial_lr, config.lr_factor,
                                 config.plateau_patience)
    rng = np.random.default_rng(config.seed)
    samples = [(i, j) for i in range(len(dev)) for j in range(len(dev[i].captions))]

    checkpoint_path = out_dir / "model.ckpt"
    log_path = out_dir / "train.log"
    losses, val_scores, lrs = [], [], []
    best_val = -math.inf
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(1, config.max_epochs + 1):
            lr = scheduler.lr
            order = rng.permutation(len(samples))
            loss_sum = 0.0
            for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
                batch = [samples[k] for k in order[start:start + config.batch_size]]
                matrices = []
                for item_idx, caption_idx in batch:
                    matrix = dev_matrices[item_idx]
                    if config.augment is not None and dev[item_idx].is_wav:
                        aug = replace(config.augment, rng_seed=_derived_seed(
                            config.seed, epoch, item_idx, caption_idx))
                        matrix = spec_augment(Spectrogram(matrix, 0.0), aug).values
                    matrices.append(matrix)
                lengths = [m.shape[0] for m in matrices]
                model.zero_grads()
                batch_loss = 0.0
                for (item_idx, caption_idx), matrix, valid in zip(batch, matrices, lengths):
                    result = model.forward_teacher_forced(
                        matrix, targets[item_idx][caption_idx], valid)
                    model.backward(result.cache)
                    batch_loss += result.loss
                batch_loss /= len(batch)
                if not math.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite loss in epoch {epoch} batch {batch_no} "
                        f"(items {[dev[i].id for i, _ in batch]})")
                for group in model.parameters():
                    group.gradient /= len(batch)
                    adam_step(group, lr)
                loss_sum += batch_loss * len(batch)
            mean_loss = loss_sum / len(samples)
            val_score = validation_bleu4(model, vocab, val, val_matrices)
            log.write(f"epoch={epoch} loss={mean_loss:.6f} "
                      f"val_bleu4={val_score:.6f} lr={lr:.6e}\n")
            losses.append(mean_loss)
            val_scores.append(val_score)
            lrs.append(lr)
            if val_score >= best_val:  # ties keep the most recent model
                best_val = val_score
                model.save(checkpoint_path, extra_config={"vocab": vocab.words})
            scheduler.observe(val_score)
    if not checkpoint_path.exists():
        model.save(checkpoint_path, extra_config={"vocab": vocab.words})
    return TrainResult(checkpoint_path, log_path, losses, val_scores, lrs, vocab, model)


def parse_train_log(path) -> list[dict[str, float]]:
    """Epoch records from a train.log, one dict per line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            fields = dict(part.split("=", 1) for part in line.split())
            rows.append({"epoch": int(fields["epoch"]), "loss": float(fields["loss"]),
                         "val_bleu4": float(fields["val_bleu4"]),
                         "lr": float(fields["lr"])})
    return rows


# ---------------------------------------------------------------------------
# evaluation and single-item decoding
# ---------------------------------------------------------------------------

def load_checkpoint(path) -> tuple[CaptionModel, Vocabulary]:
    model, config = CaptionModel.load(path)
    if "vocab" not in config:
        raise DataError(f"{path}: checkpoint has no vocabulary block")
    return model, Vocabulary(config["vocab"])


def evaluate(checkpoint_path, manifest_path, split: str = "eval",
             beam: int = 3, length_normalize: bool = True) -> MetricReport:
    """Beam-search decode every item of a split and score against all captions."""
    model, vocab = load_checkpoint(checkpoint_path)
    entries = split_entries(load_manifest(manifest_path), split)
    if not entries:
        raise DataError(f"{manifest_path}: no entries in split {split!r}")
    candidates = []
    references = []
    for entry in entries:
        matrix = load_input_file(entry.path, model.cfg.embed_dim)
        hyp = beam_search(model, matrix, beam=beam, length_normalize=length_normalize)
        candidates.append(decode(hyp.tokens, vocab).split())
        references.append([normalize(c) for c in entry.captions])
    return evaluate_corpus(candidates, references)


def caption_file(checkpoint_path, input_path, mode: str = "beam", beam: int = 3,
                 length_normalize: bool = True) -> str:
    """Caption one embedding file or wav; mode is 'greedy' or 'beam'."""
    if mode not in ("greedy", "beam"):
        raise ConfigError(f"mode must be 'greedy' or 'beam', got {mode!r}")
    model, vocab = load_checkpoint(checkpoint_path)
    matrix = load_input_file(input_path, model.cfg.embed_dim)
    if mode == "greedy":
        ids, _ = greedy_decode_encoded(model, model.encode(matrix))
    else:
        ids = beam_search(model, matrix, beam=beam,
                          length_normalize=length_normalize).tokens
    return decode(ids, vocab)


def export_attention(checkpoint_path, input_path, out_path,
                     item_id: Optional[str] = None) -> dict:
    """Greedy decode and write the per-token attention weights as JSON.

    The trace keeps one weight row per caption token (the <END> step is
    dropped so row k belongs to word k of the caption).
    """
    model, vocab = load_checkpoint(checkpoint_path)
    matrix = load_input_file(input_path, model.cfg.embed_dim)
    enc = model.encode(matrix)
    ids, trace = greedy_decode_encoded(model, enc)
    tokens = decode(ids, vocab).split()
    weights = [step.weights.tolist() for step, token in zip(trace, ids[1:])
               if token not in (PAD, START, END)]
    record = {"id": item_id or Path(str(input_path)).stem, "tokens": tokens,
              "frames": int(matrix.shape[0]), "weights": weights}
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(record, fh)
        fh.write("\n")
    return record


# ---------------------------------------------------------------------------
# synthetic toy dataset
# ---------------------------------------------------------------------------

def make_toy_dataset(out_dir, seed: int = 0, n_items: int = 8,
                     segments_per_item: int | tuple[int, int] = 4, dim: int = 16,
                     n_captions: int = EXPECTED_CAPTIONS,
                     n_events: int = len(TOY_EVENTS)) -> Path:
    """Synthetic audio-captioning data where segment k carries event k.

    Each item is a sequence of distinct "events"; the embedding row for
    segment k is a strong one-hot pattern for that event plus small noise,
    and every caption lists the event names in temporal order. That makes
    the set both memorizable (overfit checks) and usable as an attention
    alignment probe. segments_per_item may be an (inclusive) range to give
    items varying lengths. All items land in the dev split; the first two
    double as val and the last one as eval.
    """
    if n_items < 2:
        raise ConfigError(f"toy dataset needs n_items >= 2, got {n_items}")
    if not 2 <= n_events <= len(TOY_EVENTS):
        raise ConfigError(f"n_events must be 2..{len(TOY_EVENTS)}, got {n_events}")
    if isinstance(segments_per_item, int):
        seg_lo = seg_hi = segments_per_item
    else:
        seg_lo, seg_hi = segments_per_item
    if not 1 <= seg_lo <= seg_hi <= n_events:
        raise ConfigError(
            f"segments_per_item must fit 1..{n_events}, got {segments_per_item}")
    if dim < n_events:
        raise ConfigError(f"dim must be >= {n_events}, got {dim}")
    out_dir = Path(out_dir)
    (out_dir / "embeddings").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_items):
        segments = int(rng.integers(seg_lo, seg_hi + 1))
        events = rng.choice(n_events, size=segments, replace=False)
        matrix = rng.normal(scale=0.05, size=(segments, dim))
        for t, event in enumerate(events):
            matrix[t, event] += 3.0
        rel_path = f"embeddings/item_{i:03d}.aace"
        save_embedding_file(out_dir / rel_path, matrix)
        caption = " ".join(TOY_EVENTS[e] for e in events)
        entries.append(ManifestEntry(f"toy_{i:03d}", rel_path,
                                     [caption] * n_captions, "dev"))
    for k in range(min(2, n_items)):
        entries.append(replace(entries[k], id=f"toy_val_{k}", split="val"))
    entries.append(replace(entries[n_items - 1], id="toy_eval_0", split="eval"))
    manifest_path = out_dir / "manifest.jsonl"
    save_manifest(manifest_path, entries)
    return manifest_path
