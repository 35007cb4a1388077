"""Bi-LSTM encoder and attention LSTM decoder with hand-written gradients.

Shapes follow one convention throughout: feature rows are time steps, so an
input matrix is (T, F_e), encoder output E is (T, d_e) with d_e twice the
per-direction hidden size, and all per-step vectors are 1-D. There is no
batch axis; batching is a loop over items in the training pipeline.

Backpropagation is reverse-time over decoder steps (through the attention
read and the output projection), then reverse-time through both encoder
layers. Every learnable array is a numerics.ParameterGroup so the finite
difference checker can sweep the whole model.
"""

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CorruptionError, FormatError, ShapeError
from .numerics import PROB_FLOOR, ParameterGroup, sigmoid, softmax
from .text import PAD

CHECKPOINT_MAGIC = b"AACM\x01"


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int  # F_e of the input matrix
    vocab_size: int
    enc_hidden: int = 256  # per direction; encoder output dim d_e = 2 * enc_hidden
    attn_dim: int = 256  # d_a
    dec_hidden: int = 256  # d_h
    word_dim: int = 128  # d_w

    @property
    def enc_out_dim(self) -> int:
        return 2 * self.enc_hidden

    def to_dict(self) -> dict:
        return {"embed_dim": self.embed_dim, "vocab_size": self.vocab_size,
                "enc_hidden": self.enc_hidden, "attn_dim": self.attn_dim,
                "dec_hidden": self.dec_hidden, "word_dim": self.word_dim}


@dataclass
class EncoderOutput:
    values: np.ndarray  # (T, d_e); rows at or beyond valid_length are zero
    valid_length: int


@dataclass
class AttentionStep:
    alpha: np.ndarray  # (T, d_a) pre-activation grid after ReLU
    weights: np.ndarray  # (T,) probabilities, exactly 0 on padded frames
    context: np.ndarray  # (d_e,) attention-weighted encoder read


@dataclass
class ForwardResult:
    loss: float
    attention_steps: list[AttentionStep]
    cache: "_SequenceCache"


@dataclass
class _SequenceCache:
    matrix_shape: tuple[int, int]
    encoder_cache: object
    steps: list  # per decoder step: (token_in, token_out, att_cache, lstm_cache, h, probs)
    n_steps: int


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


class LstmCell:
    """Single LSTM cell; four gate blocks of shape (input_dim + hidden_dim, hidden_dim)."""

    GATES = ("forget", "input", "output", "cell")

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.weights: dict[str, ParameterGroup] = {}
        self.biases: dict[str, ParameterGroup] = {}
        for gate in self.GATES:
            self.weights[gate] = ParameterGroup(
                f"{name}.w_{gate}", _glorot(rng, input_dim + hidden_dim, hidden_dim))
            bias = np.zeros(hidden_dim)
            if gate == "forget":
                bias += 1.0  # standard trick: remember by default
            self.biases[gate] = ParameterGroup(f"{name}.b_{gate}", bias)

    def params(self) -> list[ParameterGroup]:
        return [self.weights[g] for g in self.GATES] + [self.biases[g] for g in self.GATES]

    def step(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
        """Returns (h, c, cache). h = o * tanh(f * c_prev + i * g_candidate)."""
        if x.shape != (self.input_dim,):
            raise ShapeError(f"{self.name}: input shape {x.shape}, expected ({self.input_dim},)")
        z = np.concatenate([x, h_prev])
        f = sigmoid(z @ self.weights["forget"].value + self.biases["forget"].value)
        i = sigmoid(z @ self.weights["input"].value + self.biases["input"].value)
        o = sigmoid(z @ self.weights["output"].value + self.biases["output"].value)
        g = np.tanh(z @ self.weights["cell"].value + self.biases["cell"].value)
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        return h, c, (z, f, i, o, g, c_prev, tanh_c)

    def backward_step(self, cache, dh: np.ndarray, dc: np.ndarray):
        """Accumulates parameter grads; returns (dx, dh_prev, dc_prev)."""
        z, f, i, o, g, c_prev, tanh_c = cache
        dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
        d_pre = {
            "output": dh * tanh_c * o * (1.0 - o),
            "forget": dc_total * c_prev * f * (1.0 - f),
            "input": dc_total * g * i * (1.0 - i),
            "cell": dc_total * i * (1.0 - g * g),
        }
        dz = np.zeros_like(z)
        for gate in self.GATES:
            grad = d_pre[gate]
            self.weights[gate].gradient += np.outer(z, grad)
            self.biases[gate].gradient += grad
            dz += self.weights[gate].value @ grad
        return dz[:self.input_dim], dz[self.input_dim:], dc_total * f


class BiLstmLayer:
    """Forward and backward LSTM passes over a sequence, states concatenated per step."""

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.fwd = LstmCell(f"{name}.fwd", input_dim, hidden_dim, rng)
        self.bwd = LstmCell(f"{name}.bwd", input_dim, hidden_dim, rng)

    def params(self) -> list[ParameterGroup]:
        return self.fwd.params() + self.bwd.params()

    def forward(self, x_seq: np.ndarray, valid: int):
        t_total = x_seq.shape[0]
        hidden = self.hidden_dim
        out = np.zeros((t_total, 2 * hidden))
        fwd_caches, bwd_caches = [], []
        h = c = np.zeros(hidden)
        for t in range(valid):
            h, c, cache = self.fwd.step(x_seq[t], h, c)
            fwd_caches.append(cache)
            out[t, :hidden] = h
        h = c = np.zeros(hidden)
        for t in range(valid - 1, -1, -1):
            h, c, cache = self.bwd.step(x_seq[t], h, c)
            bwd_caches.append(cache)  # processing order: t = valid-1, ..., 0
            out[t, hidden:] = h
        return out, (fwd_caches, bwd_caches, x_seq.shape, valid)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        fwd_caches, bwd_caches, x_shape, valid = cache
        hidden = self.hidden_dim
        dx = np.zeros(x_shape)
        dh_carry = dc_carry = np.zeros(hidden)
        for t in range(valid - 1, -1, -1):
            dx_t, dh_carry, dc_carry = self.fwd.backward_step(
                fwd_caches[t], dout[t, :hidden] + dh_carry, dc_carry)
            dx[t] += dx_t
        dh_carry = dc_carry = np.zeros(hidden)
        for t in range(valid):  # reverse of the bwd cell's processing order
            dx_t, dh_carry, dc_carry = self.bwd.backward_step(
                bwd_caches[valid - 1 - t], dout[t, hidden:] + dh_carry, dc_carry)
            dx[t] += dx_t
        return dx


class Encoder:
    """Two stacked Bi-LSTM layers; per-step outputs of the second layer feed attention."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.layer1 = BiLstmLayer("enc.l1", cfg.embed_dim, cfg.enc_hidden, rng)
        self.layer2 = BiLstmLayer("enc.l2", cfg.enc_out_dim, cfg.enc_hidden, rng)

    def params(self) -> list[ParameterGroup]:
        return self.layer1.params() + self.layer2.params()

    def forward(self, matrix: np.ndarray, valid: int):
        if matrix.ndim != 2 or matrix.shape[1] != self.cfg.embed_dim:
            raise ShapeError(
                f"encoder input shape {matrix.shape}, expected (T, {self.cfg.embed_dim})")
        if not 1 <= valid <= matrix.shape[0]:
            raise ValueError(
                f"valid_length {valid} outside 1..{matrix.shape[0]}")
        mid, cache1 = self.layer1.forward(matrix, valid)
        out, cache2 = self.layer2.forward(mid, valid)
        return out, (cache1, cache2)

    def backward(self, cache, d_out: np.ndarray) -> np.ndarray:
        cache1, cache2 = cache
        d_mid = self.layer2.backward(cache2, d_out)
        return self.layer1.backward(cache1, d_mid)


class Attention:
    """Additive temporal attention: scores = ReLU(E We + h_prev Wh) Wa, then softmax."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.w_enc = ParameterGroup("attn.w_enc", _glorot(rng, cfg.enc_out_dim, cfg.attn_dim))
        self.w_hidden = ParameterGroup("attn.w_hidden", _glorot(rng, cfg.dec_hidden, cfg.attn_dim))
        self.w_score = ParameterGroup("attn.w_score", _glorot(rng, cfg.attn_dim, 1))

    def params(self) -> list[ParameterGroup]:
        return [self.w_enc, self.w_hidden, self.w_score]

    def forward(self, enc_values: np.ndarray, valid: int, h_prev: np.ndarray):
        pre = enc_values @ self.w_enc.value + h_prev @ self.w_hidden.value  # (T, d_a)
        alpha = np.maximum(pre, 0.0)
        logits = (alpha @ self.w_score.value).ravel()
        logits[valid:] = -np.inf  # padded frames never receive weight
        weights = softmax(logits)
        weights[valid:] = 0.0
        context = weights @ enc_values
        step = AttentionStep(alpha=alpha, weights=weights, context=context)
        return step, (enc_values, h_prev, pre, alpha, weights)

    def backward(self, cache, d_context: np.ndarray):
        """Returns (dE, dh_prev); parameter grads accumulate in place."""
        enc_values, h_prev, pre, alpha, weights = cache
        d_weights = enc_values @ d_context
        d_enc = np.outer(weights, d_context)
        # softmax backward; padded entries have weight 0 and drop out
        inner = weights @ d_weights
        d_logits = weights * (d_weights - inner)
        self.w_score.gradient += (alpha.T @ d_logits)[:, None]
        d_alpha = np.outer(d_logits, self.w_score.value.ravel())
        d_pre = d_alpha * (pre > 0)
        d_enc += d_pre @ self.w_enc.value.T
        self.w_enc.gradient += enc_values.T @ d_pre
        d_pre_sum = d_pre.sum(axis=0)
        self.w_hidden.gradient += np.outer(h_prev, d_pre_sum)
        dh_prev = self.w_hidden.value @ d_pre_sum
        return d_enc, dh_prev


class Decoder:
    """Word embedding + single LSTM cell + output projection, fed by attention."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.embedding = ParameterGroup("dec.embedding",
                                        _glorot(rng, cfg.vocab_size, cfg.word_dim))
        self.cell = LstmCell("dec.lstm", cfg.word_dim + cfg.enc_out_dim, cfg.dec_hidden, rng)
        self.w_out = ParameterGroup("dec.w_out", _glorot(rng, cfg.dec_hidden, cfg.vocab_size))
        self.b_out = ParameterGroup("dec.b_out", np.zeros(cfg.vocab_size))
        self.attention = Attention(cfg, rng)

    def params(self) -> list[ParameterGroup]:
        return ([self.embedding] + self.cell.params() + [self.w_out, self.b_out]
                + self.attention.params())

    def step(self, token: int, h_prev: np.ndarray, c_prev: np.ndarray,
             enc: EncoderOutput):
        if not 0 <= token < self.cfg.vocab_size:
            raise ValueError(f"token id {token} outside vocabulary of {self.cfg.vocab_size}")
        att_step, att_cache = self.attention.forward(enc.values, enc.valid_length, h_prev)
        x = np.concatenate([self.embedding.value[token], att_step.context])
        h, c, lstm_cache = self.cell.step(x, h_prev, c_prev)
        logits = h @ self.w_out.value + self.b_out.value
        return logits, h, c, att_step, (att_cache, lstm_cache)


class CaptionModel:
    """Encoder, attention decoder, and training-time backprop in one bundle."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng)

    def parameters(self) -> list[ParameterGroup]:
        return self.encoder.params() + self.decoder.params()

    def zero_grads(self):
        for group in self.parameters():
            group.zero_grad()

    def encode(self, matrix: np.ndarray, valid_length: Optional[int] = None) -> EncoderOutput:
        valid = matrix.shape[0] if valid_length is None else valid_length
        values, _ = self.encoder.forward(np.asarray(matrix, dtype=np.float64), valid)
        return EncoderOutput(values, valid)

    def decoder_step(self, prev_token: int, h_prev: np.ndarray, c_prev: np.ndarray,
                     enc: EncoderOutput):
        """One inference step: (logits over vocab, h, c, AttentionStep)."""
        logits, h, c, att_step, _ = self.decoder.step(prev_token, h_prev, c_prev, enc)
        return logits, h, c, att_step

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.cfg.dec_hidden), np.zeros(self.cfg.dec_hidden)

    def forward_teacher_forced(self, matrix: np.ndarray, target: list[int],
                               valid_length: Optional[int] = None) -> ForwardResult:
        """Mean cross-entropy over non-PAD target positions, decoder fed gold tokens."""
        matrix = np.asarray(matrix, dtype=np.float64)
        valid = matrix.shape[0] if valid_length is None else valid_length
        enc_values, enc_cache = self.encoder.forward(matrix, valid)
        enc = EncoderOutput(enc_values, valid)
        h, c = self.initial_state()
        steps = []
        att_steps = []
        total = 0.0
        for s in range(len(target) - 1):
            token_in, token_out = target[s], target[s + 1]
            if token_out == PAD:
                break
            logits, h_new, c_new, att_step, caches = self.decoder.step(token_in, h, c, enc)
            probs = softmax(logits)
            total += -np.log(max(probs[token_out], PROB_FLOOR))
            steps.append((token_in, token_out, caches[0], caches[1], h_new, probs))
            att_steps.append(att_step)
            h, c = h_new, c_new
        n = len(steps)
        loss = total / n if n else 0.0
        cache = _SequenceCache(matrix.shape, enc_cache, steps, n)
        return ForwardResult(loss, att_steps, cache)

    def backward(self, cache: _SequenceCache) -> np.ndarray:
        """Accumulate gradients of the mean loss; returns dLoss/dInputMatrix."""
        if not isinstance(cache, _SequenceCache):
            raise ValueError("backward needs the cache from forward_teacher_forced")
        dec = self.decoder
        if cache.n_steps == 0:
            return np.zeros(cache.matrix_shape)
        scale = 1.0 / cache.n_steps
        d_enc_total = np.zeros((cache.matrix_shape[0], self.cfg.enc_out_dim))
        dh_next = np.zeros(self.cfg.dec_hidden)
        dc_next = np.zeros(self.cfg.dec_hidden)
        for token_in, token_out, att_cache, lstm_cache, h, probs in reversed(cache.steps):
            d_logits = probs * scale
            d_logits[token_out] -= scale
            dec.w_out.gradient += np.outer(h, d_logits)
            dec.b_out.gradient += d_logits
            dh = dec.w_out.value @ d_logits + dh_next
            dx, dh_prev, dc_prev = dec.cell.backward_step(lstm_cache, dh, dc_next)
            dec.embedding.gradient[token_in] += dx[:self.cfg.word_dim]
            d_context = dx[self.cfg.word_dim:]
            d_enc_step, dh_prev_att = dec.attention.backward(att_cache, d_context)
            d_enc_total += d_enc_step
            dh_next = dh_prev + dh_prev_att
            dc_next = dc_prev
        return self.encoder.backward(cache.encoder_cache, d_enc_total)

    # ------------------------------------------------------------------
    # checkpointing
    # ------------------------------------------------------------------

    def save(self, path, extra_config: Optional[dict] = None):
        """Versioned binary checkpoint: config JSON block + named float64 arrays."""
        config = {"model": self.cfg.to_dict()}
        if extra_config:
            config.update(extra_config)
        blob = json.dumps(config, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            params = self.parameters()
            fh.write(struct.pack("<I", len(params)))
            for group in params:
                name = group.name.encode("utf-8")
                fh.write(struct.pack("<I", len(name)))
                fh.write(name)
                fh.write(struct.pack("<I", group.value.ndim))
                fh.write(struct.pack(f"<{group.value.ndim}I", *group.value.shape))
                fh.write(group.value.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> tuple["CaptionModel", dict]:
        """Rebuild a model from a checkpoint; returns (model, full config dict)."""
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:5] != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a model checkpoint (bad magic/version)")
        offset = 5

        def take(n: int) -> bytes:
            nonlocal offset
            if offset + n > len(data):
                raise CorruptionError(f"{path}: truncated at byte {offset} + {n}")
            chunk = data[offset:offset + n]
            offset += n
            return chunk

        (blob_len,) = struct.unpack("<I", take(4))
        config = json.loads(take(blob_len).decode("utf-8"))
        model = cls(ModelConfig(**config["model"]))
        by_name = {group.name: group for group in model.parameters()}
        (count,) = struct.unpack("<I", take(4))
        if count != len(by_name):
            raise CorruptionError(
                f"{path}: checkpoint has {count} arrays, model expects {len(by_name)}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", take(4))
            name = take(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", take(4))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            values = np.frombuffer(take(8 * int(np.prod(shape))), dtype="<f8").reshape(shape)
            if name not in by_name:
                raise CorruptionError(f"{path}: unknown parameter {name!r}")
            if by_name[name].value.shape != values.shape:
                raise CorruptionError(
                    f"{path}: {name} has shape {values.shape}, expected "
                    f"{by_name[name].value.shape}")
            by_name[name].value[...] = values
        if offset != len(data):
            raise CorruptionError(f"{path}: {len(data) - offset} trailing bytes")
        return model, config
