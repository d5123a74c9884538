"""Stacked-LSTM sequence encoder with triplet loss and exact BPTT gradients.

The encoder runs two LSTM layers over a 50-step feature sequence and
returns the second layer's hidden state at the last step as the
embedding. Everything here is plain numpy: forward, loss, and
backpropagation through time are written out so gradients can be
verified against central finite differences.

Cell equations (gate order i, f, g, o within the stacked weight rows):

    i = sigmoid(W_i x + U_i h + b_i)
    f = sigmoid(W_f x + U_f h + b_f)
    g = tanh   (W_g x + U_g h + b_g)
    o = sigmoid(W_o x + U_o h + b_o)
    c = f * c_prev + i * g
    h = o * tanh(c)

States start at zero, so an all-zero parameter set maps every input to
the zero embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_GATES = 4  # i, f, g, o


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: stable for large |z| and faster than exp on this path
    return 0.5 * np.tanh(0.5 * z) + 0.5


@dataclass
class EncoderConfig:
    """Architecture and margin hyperparameters."""

    input_width: int = 8
    hidden1: int = 100
    hidden2: int = 40
    margin: float = 0.5

    def validate(self) -> None:
        if min(self.input_width, self.hidden1, self.hidden2) <= 0:
            raise ValueError("layer widths must be positive")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    @property
    def embedding_dim(self) -> int:
        return self.hidden2

    def to_dict(self) -> dict:
        return {"input_width": self.input_width, "hidden1": self.hidden1,
                "hidden2": self.hidden2, "margin": self.margin}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@dataclass
class LayerParams:
    """One LSTM layer: stacked gate weights, recurrent weights, biases.

    ``w_in`` is (4h, in), ``w_rec`` is (4h, h), ``bias`` is (4h,); gate
    rows are ordered i, f, g, o.
    """

    w_in: np.ndarray
    w_rec: np.ndarray
    bias: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[1]


@dataclass
class EncoderParams:
    """All weights of the two-layer encoder."""

    layers: list[LayerParams]

    @property
    def arrays(self) -> list[np.ndarray]:
        """The six weight arrays in fixed order [W1, U1, b1, W2, U2, b2]."""
        out = []
        for layer in self.layers:
            out.extend([layer.w_in, layer.w_rec, layer.bias])
        return out

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray]) -> "EncoderParams":
        if len(arrays) % 3 != 0:
            raise ValueError("expected triples of (w_in, w_rec, bias)")
        layers = [LayerParams(*arrays[i:i + 3]) for i in range(0, len(arrays), 3)]
        return cls(layers)

    @property
    def dtype(self):
        return self.layers[0].w_in.dtype

    def astype(self, dtype) -> "EncoderParams":
        return EncoderParams.from_arrays([a.astype(dtype) for a in self.arrays])

    def copy(self) -> "EncoderParams":
        return EncoderParams.from_arrays([a.copy() for a in self.arrays])

    def validate(self, config: EncoderConfig | None = None) -> None:
        for a in self.arrays:
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite encoder parameters")
        if config is not None:
            expected = [
                (N_GATES * config.hidden1, config.input_width),
                (N_GATES * config.hidden1, config.hidden1),
                (N_GATES * config.hidden1,),
                (N_GATES * config.hidden2, config.hidden1),
                (N_GATES * config.hidden2, config.hidden2),
                (N_GATES * config.hidden2,),
            ]
            got = [a.shape for a in self.arrays]
            if got != expected:
                raise ValueError(f"parameter shapes {got} do not match config "
                                 f"{expected}")


def init_params(config: EncoderConfig, seed: int,
                dtype=np.float64) -> EncoderParams:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) init per layer, forget bias +1."""
    config.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    layers = []
    for width_in, h in ((config.input_width, config.hidden1),
                        (config.hidden1, config.hidden2)):
        k = 1.0 / np.sqrt(h)
        w_in = rng.uniform(-k, k, size=(N_GATES * h, width_in))
        w_rec = rng.uniform(-k, k, size=(N_GATES * h, h))
        bias = rng.uniform(-k, k, size=N_GATES * h)
        bias[h:2 * h] += 1.0
        layers.append(LayerParams(w_in.astype(dtype), w_rec.astype(dtype),
                                  bias.astype(dtype)))
    return EncoderParams(layers)


def zero_params(config: EncoderConfig, dtype=np.float64) -> EncoderParams:
    config.validate()
    layers = []
    for width_in, h in ((config.input_width, config.hidden1),
                        (config.hidden1, config.hidden2)):
        layers.append(LayerParams(np.zeros((N_GATES * h, width_in), dtype),
                                  np.zeros((N_GATES * h, h), dtype),
                                  np.zeros(N_GATES * h, dtype)))
    return EncoderParams(layers)


# ---------------------------------------------------------------------------
# LSTM layer forward / backward (batched over sequences)
# ---------------------------------------------------------------------------
# Internally everything is time-major (T, B, *) so each step touches a
# contiguous block, and the step loops write into preallocated buffers.

class _LayerCache:
    """Activations saved by a layer forward pass for BPTT."""

    __slots__ = ("x", "gates", "c", "tanh_c", "h")

    def __init__(self, x, gates, c, tanh_c, h):
        self.x = x            # (T, B, in)
        self.gates = gates    # (T, B, 4h) activated i/f/g/o
        self.c = c            # (T, B, h)
        self.tanh_c = tanh_c  # (T, B, h)
        self.h = h            # (T, B, h)


def _sigmoid_inplace(z: np.ndarray) -> None:
    z *= 0.5
    np.tanh(z, out=z)
    z *= 0.5
    z += 0.5


def _layer_forward(layer: LayerParams, x: np.ndarray) -> _LayerCache:
    t, b, _ = x.shape
    h = layer.hidden
    dtype = x.dtype
    # Input projections for all steps in one GEMM; only the recurrent
    # term stays sequential.
    pre_in = x.reshape(t * b, -1) @ layer.w_in.T
    pre_in = pre_in.reshape(t, b, N_GATES * h)
    pre_in += layer.bias

    gates = np.empty((t, b, N_GATES * h), dtype=dtype)
    c_seq = np.empty((t, b, h), dtype=dtype)
    tc_seq = np.empty((t, b, h), dtype=dtype)
    h_seq = np.empty((t, b, h), dtype=dtype)
    tmp = np.empty((b, h), dtype=dtype)

    h_prev = np.zeros((b, h), dtype=dtype)
    c_prev = np.zeros((b, h), dtype=dtype)
    for step in range(t):
        pre = gates[step]
        np.matmul(h_prev, layer.w_rec.T, out=pre)
        pre += pre_in[step]
        _sigmoid_inplace(pre[:, :2 * h])           # input + forget gates
        np.tanh(pre[:, 2 * h:3 * h], out=pre[:, 2 * h:3 * h])
        _sigmoid_inplace(pre[:, 3 * h:])           # output gate

        c_t = c_seq[step]
        np.multiply(pre[:, h:2 * h], c_prev, out=c_t)
        np.multiply(pre[:, :h], pre[:, 2 * h:3 * h], out=tmp)
        c_t += tmp
        tc = tc_seq[step]
        np.tanh(c_t, out=tc)
        np.multiply(pre[:, 3 * h:], tc, out=h_seq[step])
        h_prev = h_seq[step]
        c_prev = c_t
    return _LayerCache(x, gates, c_seq, tc_seq, h_seq)


def _layer_backward(layer: LayerParams, cache: _LayerCache,
                    dh_out: np.ndarray, need_dx: bool = True):
    """BPTT through one layer.

    ``dh_out`` holds the loss gradient w.r.t. the hidden output at every
    step (zero rows where nothing flows in); it is consumed in place.
    Returns the gradient w.r.t. the layer input (or None for the bottom
    layer) plus (dW, dU, db).
    """
    t, b, h = cache.h.shape
    gates, c, tanh_c = cache.gates, cache.c, cache.tanh_c
    dtype = cache.h.dtype

    dpre = np.empty((t, b, N_GATES * h), dtype=dtype)
    dc = np.empty((b, h), dtype=dtype)
    dc_next = np.zeros((b, h), dtype=dtype)
    dh_next = np.empty((b, h), dtype=dtype)
    for step in range(t - 1, -1, -1):
        g = gates[step]
        gi = g[:, :h]
        gf = g[:, h:2 * h]
        gg = g[:, 2 * h:3 * h]
        go = g[:, 3 * h:]
        tc = tanh_c[step]

        dh = dh_out[step]
        # dc = dh * o * (1 - tanh(c)^2) + dc_next
        np.multiply(tc, tc, out=dc)
        np.subtract(1.0, dc, out=dc)
        dc *= go
        dc *= dh
        dc += dc_next

        dpre_step = dpre[step]
        dpi = dpre_step[:, :h]                     # input gate
        np.subtract(1.0, gi, out=dpi)
        dpi *= gi
        dpi *= gg
        dpi *= dc
        dpf = dpre_step[:, h:2 * h]                # forget gate
        np.subtract(1.0, gf, out=dpf)
        dpf *= gf
        if step > 0:
            dpf *= c[step - 1]
            dpf *= dc
        else:
            dpf[:] = 0.0                           # c_prev is zero at t=0
        dpg = dpre_step[:, 2 * h:3 * h]            # candidate
        np.multiply(gg, gg, out=dpg)
        np.subtract(1.0, dpg, out=dpg)
        dpg *= gi
        dpg *= dc
        dpo = dpre_step[:, 3 * h:]                 # output gate
        np.subtract(1.0, go, out=dpo)
        dpo *= go
        dpo *= tc
        dpo *= dh

        np.multiply(dc, gf, out=dc_next)
        if step > 0:
            np.matmul(dpre_step, layer.w_rec, out=dh_next)
            dh_out[step - 1] += dh_next

    # Weight gradients in one GEMM each over all (step, sequence) pairs;
    # the t=0 recurrent term vanishes because h_prev starts at zero.
    dpre_flat = dpre.reshape(t * b, N_GATES * h)
    dw_in = dpre_flat.T @ cache.x.reshape(t * b, -1)
    dw_rec = dpre[1:].reshape((t - 1) * b, -1).T @ \
        cache.h[:-1].reshape((t - 1) * b, h)
    dbias = dpre_flat.sum(axis=0)
    dx = (dpre_flat @ layer.w_in).reshape(cache.x.shape) if need_dx else None
    return dx, (dw_in, dw_rec, dbias)


def _forward(params: EncoderParams, xs: np.ndarray):
    """Run the stack over (B, T, p) inputs; returns caches and embeddings."""
    out = np.ascontiguousarray(xs.transpose(1, 0, 2))
    caches = []
    for layer in params.layers:
        cache = _layer_forward(layer, out)
        caches.append(cache)
        out = cache.h
    return caches, out[-1]


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def encode(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Embed one (50, p) feature matrix; returns a length-d vector."""
    x = np.asarray(x, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != params.layers[0].w_in.shape[1]:
        raise ValueError(f"input shape {x.shape} does not match encoder width "
                         f"{params.layers[0].w_in.shape[1]}")
    _, emb = _forward(params, x[None])
    return emb[0]


def encode_batch(params: EncoderParams, xs: np.ndarray,
                 chunk: int = 512) -> np.ndarray:
    """Embed (N, 50, p) inputs in fixed-size chunks; returns (N, d)."""
    xs = np.asarray(xs, dtype=params.dtype)
    if xs.ndim != 3 or xs.shape[2] != params.layers[0].w_in.shape[1]:
        raise ValueError(f"input shape {xs.shape} does not match encoder width")
    d = params.layers[-1].hidden
    out = np.empty((len(xs), d), dtype=params.dtype)
    for lo in range(0, len(xs), chunk):
        _, emb = _forward(params, xs[lo:lo + chunk])
        out[lo:lo + chunk] = emb
    return out


def triplet_loss(ea: np.ndarray, ep: np.ndarray, en: np.ndarray,
                 margin: float) -> float:
    """max(||ea - ep||^2 - ||ea - en||^2 + margin, 0)."""
    ea, ep, en = np.asarray(ea), np.asarray(ep), np.asarray(en)
    if not ea.shape == ep.shape == en.shape:
        raise ValueError("embedding dimensions differ")
    d_ap = float(np.sum((ea - ep) ** 2))
    d_an = float(np.sum((ea - en) ** 2))
    return max(d_ap - d_an + margin, 0.0)


def _loss_and_upstream(emb: np.ndarray, n: int, margin: float,
                       weights: np.ndarray | None = None):
    """Per-triplet hinge losses and the gradient on each embedding row.

    ``emb`` stacks anchors, positives, negatives as (3n, d). Inactive
    hinges (argument <= 0) contribute exactly zero gradient.
    """
    ea, ep, en = emb[:n], emb[n:2 * n], emb[2 * n:]
    d_ap = np.sum((ea - ep) ** 2, axis=1)
    d_an = np.sum((ea - en) ** 2, axis=1)
    arg = d_ap - d_an + margin
    losses = np.maximum(arg, 0.0)
    scale = (arg > 0).astype(emb.dtype)
    if weights is not None:
        scale = scale * weights
    scale = scale[:, None]
    demb = np.empty_like(emb)
    demb[:n] = 2.0 * (en - ep) * scale
    demb[n:2 * n] = 2.0 * (ep - ea) * scale
    demb[2 * n:] = 2.0 * (ea - en) * scale
    return losses, demb


def _backward_from_upstream(params: EncoderParams, caches, demb: np.ndarray):
    dh_out = np.zeros(caches[-1].h.shape, dtype=demb.dtype)
    dh_out[-1] = demb
    grads = []
    for idx in range(len(params.layers) - 1, -1, -1):
        dh_out, layer_grads = _layer_backward(
            params.layers[idx], caches[idx], dh_out, need_dx=idx > 0)
        grads = list(layer_grads) + grads
    return grads


def triplet_backward(params: EncoderParams, xa: np.ndarray, xp: np.ndarray,
                     xn: np.ndarray, margin: float):
    """Exact gradient of triplet_loss(encode(a), encode(p), encode(n)).

    Returns (loss, grads) with grads in the same order as
    ``EncoderParams.arrays``. The anchor branch receives gradient from
    both distance terms; an inactive hinge yields exactly zero grads.
    """
    xs = np.stack([xa, xp, xn]).astype(params.dtype)
    caches, emb = _forward(params, xs)
    losses, demb = _loss_and_upstream(emb, 1, margin)
    grads = _backward_from_upstream(params, caches, demb)
    return float(losses[0]), grads


def triplet_batch_grads(params: EncoderParams, xa: np.ndarray, xp: np.ndarray,
                        xn: np.ndarray, margin: float):
    """Losses and the summed gradient over a batch of triplets.

    Inputs are (B, 50, p); the three branches run as one stacked forward
    pass. Returns (losses (B,), grads summed over the batch).
    """
    n = len(xa)
    xs = np.concatenate([xa, xp, xn]).astype(params.dtype)
    caches, emb = _forward(params, xs)
    losses, demb = _loss_and_upstream(emb, n, margin)
    grads = _backward_from_upstream(params, caches, demb)
    return losses, grads


def grad_check(config: EncoderConfig, seed: int, eps: float = 1e-5) -> float:
    """Compare BPTT gradients against central finite differences.

    Builds random parameters and one random triplet, then perturbs every
    parameter by +/- eps. Returns the max relative error
    |g_bptt - g_fd| / max(|g_bptt| + |g_fd|, 1e-4); when both sides are
    zero the error is zero.
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [seed, 0x9e3779b9])))
    params = init_params(config, seed, dtype=np.float64)
    xa, xp, xn = rng.standard_normal((3, 50, config.input_width))

    _, grads = triplet_backward(params, xa, xp, xn, config.margin)

    def loss_at(arrays):
        p = EncoderParams.from_arrays(arrays)
        xs = np.stack([xa, xp, xn])
        _, emb = _forward(p, xs)
        losses, _ = _loss_and_upstream(emb, 1, config.margin)
        return float(losses[0])

    max_err = 0.0
    arrays = [a.copy() for a in params.arrays]
    for k, (arr, g_arr) in enumerate(zip(arrays, grads)):
        flat = arr.reshape(-1)
        g_flat = np.asarray(g_arr).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_at(arrays)
            flat[i] = orig - eps
            down = loss_at(arrays)
            flat[i] = orig
            g_num = (up - down) / (2.0 * eps)
            denom = max(abs(g_flat[i]) + abs(g_num), 1e-4)
            max_err = max(max_err, abs(g_flat[i] - g_num) / denom)
    return max_err
