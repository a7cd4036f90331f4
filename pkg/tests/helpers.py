"""Random tiny models and gradient-check drivers shared by several test modules."""
import itertools

import numpy as np

from radembed.crf import (CrfConfig, CrfModel, IndicatorEmission, NeuralEmission, TagLattice,
                          _neural_forward, sentence_loss_and_grads, sequence_score)
from radembed.data import NgramSample, PAD, UNK, Vocabulary
from radembed.embed import CwParams, EmbeddingMatrix, RadicalHead, hybrid_loss
from radembed.numeric import finite_diff_check

EPS = 1e-5


def tiny_embed_instance(rng, d=None, h=None, n=None, N=None, V=None):
    d = d or int(rng.integers(1, 5))
    h = h or int(rng.integers(1, 5))
    n = n or int(rng.choice([3, 5]))
    N = N or int(rng.integers(1, 6))
    V = V or int(rng.integers(5, 10))
    emb = EmbeddingMatrix(rng.normal(size=(d, V)))
    cw = CwParams(rng.normal(size=(h, n * d)) * 0.4, rng.normal(size=h) * 0.4,
                  rng.normal(size=(1, h)), rng.normal(size=1))
    head = RadicalHead(rng.normal(size=(N, d)), rng.normal(size=N))
    radical_of = rng.integers(0, N, size=V)
    window = tuple(int(c) for c in rng.integers(0, V, size=n))
    mid = window[n // 2]
    corrupt = int(rng.choice([c for c in range(2, V) if c != mid]))
    return emb, cw, head, radical_of, NgramSample(window, corrupt)


def _near_kinks(emb, cw, sample, margin=1e-4):
    """True if a hardtanh unit or the hinge sits within ``margin`` of a kink."""
    scores = []
    for w in (sample.window, sample.corrupted):
        x = emb.window(list(w))
        z = cw.W1 @ x + cw.b1
        if np.any(np.abs(np.abs(z) - 1.0) < margin):
            return True
        scores.append(cw.W2[0] @ np.clip(z, -1, 1) + cw.b2[0])
    return abs(1.0 - scores[0] + scores[1]) < margin


LD = np.longdouble


def hybrid_loss_oracle(emb, cw, head, radical_of, sample, alpha):
    """Independent forward pass of the hybrid loss in extended precision.

    Central differences of a float64 loss carry ~1e-11 of rounding noise,
    which is larger than the 1e-8 denominator floor allows for coordinates
    whose true gradient is exactly zero (shared context columns, the output
    bias). Differencing this oracle instead keeps the noise near 1e-14.
    """
    E, W1, b1 = emb.W.astype(LD), cw.W1.astype(LD), cw.b1.astype(LD)
    W2, b2 = cw.W2.astype(LD), cw.b2.astype(LD)
    Wr, br = head.Wr.astype(LD), head.br.astype(LD)

    def score(w):
        x = np.concatenate([E[:, c] for c in w])
        return (W2[0] @ np.clip(W1 @ x + b1, -1, 1)) + b2[0]

    def rad(c):
        z = Wr @ E[:, c] + br
        m = z.max()
        return np.log(np.exp(z - m).sum()) + m - z[radical_of[c]]

    hinge = max(LD(0), 1 - score(sample.window) + score(sample.corrupted))
    r = sum(rad(c) for c in list(sample.window) + list(sample.corrupted))
    return LD(alpha) * hinge + (1 - LD(alpha)) * r


def hybrid_gradient_error(emb, cw, head, radical_of, sample, alpha):
    """Max relative error of every hybrid-loss gradient against central
    differences of the extended-precision oracle."""
    _, g = hybrid_loss(emb, cw, head, sample, radical_of, alpha)

    def z(a, like):
        return np.zeros_like(like) if a is None else a

    params = [cw.W1, cw.b1, cw.W2, cw.b2, head.Wr, head.br, emb.W]
    grads = [z(g.W1, cw.W1), z(g.b1, cw.b1), z(g.W2, cw.W2), z(g.b2, cw.b2), g.Wr, g.br,
             g.dense_emb(emb.vocab_size)]
    return finite_diff_check(lambda: hybrid_loss_oracle(emb, cw, head, radical_of, sample, alpha),
                             params, grads, EPS)


def random_hybrid_instances(rng, count):
    out = []
    while len(out) < count:
        inst = tiny_embed_instance(rng)
        emb, cw, head, radical_of, sample = inst
        if not _near_kinks(emb, cw, sample):
            out.append(inst)
    return out


# ---------------------------------------------------------------- CRF helpers


def enumerate_paths(L, n_tags=4):
    return itertools.product(range(n_tags), repeat=L)


def random_lattice(rng, L, scale=2.0):
    return TagLattice(rng.normal(size=(L, 4)) * scale, rng.normal(size=(4, 4)) * scale,
                      rng.normal(size=4) * scale, rng.normal(size=4) * scale)


def brute_force_logz(lattice):
    scores = [sequence_score(lattice, p) for p in enumerate_paths(lattice.length)]
    m = max(scores)
    return m + np.log(sum(np.exp(s - m) for s in scores))


def tiny_crf(rng, mode="neural", d=None, H=None, window=3, V=None, finetune=True, N=3):
    d = d or int(rng.integers(1, 5))
    H = H or int(rng.integers(1, 7))
    V = V or int(rng.integers(4, 9))
    vocab = Vocabulary((PAD, UNK, *[chr(0x4E00 + i) for i in range(V - 2)]))
    cfg = CrfConfig(emission=mode, window=window, hidden=H, finetune_embeddings=finetune)
    if mode == "neural":
        em = NeuralEmission(EmbeddingMatrix(rng.normal(size=(d, V))),
                            rng.normal(size=(H, window * d)) * 0.4, rng.normal(size=H) * 0.4,
                            rng.normal(size=(4, H)), rng.normal(size=4))
    else:
        rw = rng.normal(size=(N, 4)) if mode == "char+radical" else None
        ro = rng.integers(0, N, size=V) if mode == "char+radical" else None
        em = IndicatorEmission(rng.normal(size=(V, 4)), rw, ro)
    return CrfModel(vocab, cfg, rng.normal(size=(4, 4)), rng.normal(size=4),
                    rng.normal(size=4), em)


def crf_near_kinks(model, sentence, margin=1e-4):
    em = model.emission
    if not isinstance(em, NeuralEmission):
        return False
    _, (_, _, Z, _) = _neural_forward(em, np.asarray(sentence), model.config.window)
    return bool(np.any(np.abs(np.abs(Z) - 1.0) < margin))


def crf_nll_oracle(model, sentence, gold):
    """Negative log-likelihood recomputed from scratch in extended precision:
    own windowing, own emission pass, and a loop-based forward algorithm."""
    from radembed.crf import START_MASK, STOP_MASK, TRANSITION_MASK
    em, L = model.emission, len(sentence)
    if isinstance(em, NeuralEmission):
        E = em.emb.W.astype(LD)
        W1, b1, W2, b2 = (a.astype(LD) for a in (em.W1, em.b1, em.W2, em.b2))
        half = model.config.window // 2
        scores = []
        for i in range(L):
            x = np.concatenate([E[:, sentence[j]] if 0 <= j < L else E[:, 0]
                                for j in range(i - half, i + half + 1)])
            scores.append(W2 @ np.clip(W1 @ x + b1, -1, 1) + b2)
        U = np.array(scores)
    else:
        U = np.array([em.char_w[c].astype(LD) + (em.radical_w[em.radical_of[c]].astype(LD)
                                                  if em.radical_w is not None else 0)
                      for c in sentence])
    T, st, sp = (a.astype(LD) for a in (model.transition, model.start, model.stop))
    if model.config.constrain_tags:
        T, st, sp = T + TRANSITION_MASK, st + START_MASK, sp + STOP_MASK

    def lse(v):
        m = v.max()
        return m if not np.isfinite(m) else m + np.log(np.exp(v - m).sum())

    a = st + U[0]
    for i in range(1, L):
        a = np.array([lse(a + T[:, t]) for t in range(4)]) + U[i]
    logz = lse(a + sp)
    g = st[gold[0]] + sp[gold[-1]] + sum(U[i, gold[i]] for i in range(L)) \
        + sum(T[gold[i - 1], gold[i]] for i in range(1, L))
    return logz - g


def crf_gradient_error(model, sentence, gold):
    """Max relative error of the CRF gradients against central differences
    of the extended-precision oracle; also returns the checked names."""
    _, grads = sentence_loss_and_grads(model, sentence, gold)
    params = model.param_arrays()
    names, ps, gs = [], [], []
    for name, p in params.items():
        g = grads.get(name)
        if name == "W_e":
            if g is None:
                continue
            dense = np.zeros_like(p)
            dense[:, g[0]] = g[1]
            g = dense
        names.append(name)
        ps.append(p)
        gs.append(g)
    sentence, gold = [int(c) for c in sentence], [int(t) for t in gold]
    return finite_diff_check(lambda: crf_nll_oracle(model, sentence, gold), ps, gs, EPS), names


def random_crf_instances(rng, count, modes=("neural",)):
    out = []
    while len(out) < count:
        mode = modes[len(out) % len(modes)]
        model = tiny_crf(rng, mode)
        L = int(rng.integers(1, 6))
        sent = rng.integers(1, len(model.vocab), size=L)
        gold = rng.integers(0, 4, size=L)
        if not crf_near_kinks(model, sent):
            out.append((model, sent, gold))
    return out
