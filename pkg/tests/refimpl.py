"""Independent straight-line reimplementation of the model math.

Used as the oracle in tests: same formulas, different code path, no shared
helpers with the package internals.
"""

import math

import numpy as np

from aacap.text import PAD


def ref_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def ref_cell_step(cell, x, h, c):
    z = np.concatenate([x, h])
    f = ref_sigmoid(z @ cell.weights["forget"].value + cell.biases["forget"].value)
    i = ref_sigmoid(z @ cell.weights["input"].value + cell.biases["input"].value)
    o = ref_sigmoid(z @ cell.weights["output"].value + cell.biases["output"].value)
    g = np.tanh(z @ cell.weights["cell"].value + cell.biases["cell"].value)
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def ref_bilstm(layer, xs, valid):
    hidden = layer.hidden_dim
    out = np.zeros((xs.shape[0], 2 * hidden))
    h = c = np.zeros(hidden)
    for t in range(valid):
        h, c = ref_cell_step(layer.fwd, xs[t], h, c)
        out[t, :hidden] = h
    h = c = np.zeros(hidden)
    for t in reversed(range(valid)):
        h, c = ref_cell_step(layer.bwd, xs[t], h, c)
        out[t, hidden:] = h
    return out


def ref_encode(model, m, valid):
    return ref_bilstm(model.encoder.layer2,
                      ref_bilstm(model.encoder.layer1, m, valid), valid)


def ref_attention(att, enc_values, valid, h_prev):
    pre = enc_values @ att.w_enc.value + h_prev @ att.w_hidden.value
    alpha = np.where(pre > 0, pre, 0.0)
    logits = (alpha @ att.w_score.value).ravel()[:valid]
    shifted = np.exp(logits - logits.max())
    weights = np.zeros(enc_values.shape[0])
    weights[:valid] = shifted / shifted.sum()
    return weights, weights @ enc_values


def ref_decoder_logits(model, token, h, c, enc_values, valid):
    """One decoder step; returns (logits, h_new, c_new, weights)."""
    dec = model.decoder
    weights, context = ref_attention(dec.attention, enc_values, valid, h)
    x = np.concatenate([dec.embedding.value[token], context])
    h_new, c_new = ref_cell_step(dec.cell, x, h, c)
    return h_new @ dec.w_out.value + dec.b_out.value, h_new, c_new, weights


def ref_log_prob_of_sequence(model, m, tokens, valid):
    """Sum of per-step log softmax probabilities of tokens[1:] given tokens[:-1]."""
    enc_values = ref_encode(model, m, valid)
    h = c = np.zeros(model.cfg.dec_hidden)
    total = 0.0
    for s in range(len(tokens) - 1):
        logits, h, c, _ = ref_decoder_logits(model, tokens[s], h, c, enc_values, valid)
        shifted = logits - logits.max()
        total += shifted[tokens[s + 1]] - math.log(np.exp(shifted).sum())
    return total


def ref_teacher_forced_loss(model, m, target, valid):
    enc_values = ref_encode(model, m, valid)
    h = c = np.zeros(model.cfg.dec_hidden)
    losses = []
    for s in range(len(target) - 1):
        if target[s + 1] == PAD:
            break
        logits, h, c, _ = ref_decoder_logits(model, target[s], h, c, enc_values, valid)
        shifted = logits - logits.max()
        losses.append(math.log(np.exp(shifted).sum()) - shifted[target[s + 1]])
    return sum(losses) / len(losses) if losses else 0.0
