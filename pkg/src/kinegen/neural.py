"""Differentiable building blocks: LSTM cell, dense layers, losses, Adam.

Everything is float64 numpy. Sequences are backpropagated through an
explicitly unrolled recurrence (no truncation), which keeps gradients exact
and finite-difference checkable. No graph framework: each model wires the
forward/backward kernels below by hand.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeError

Array = np.ndarray

PROB_EPS = 1e-7  # probability clamp used by bce
CHECKPOINT_FORMAT_VERSION = 1

ACTIVATIONS = ("linear", "sigmoid", "tanh")


def sigmoid(x: Array) -> Array:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ParamSet:
    """Ordered mapping from parameter name to float64 array.

    Iteration order is insertion order, which fixes the flattening order used
    by the optimizer, the gradient checker, and checkpoints.
    """

    def __init__(self, arrays: dict[str, Array] | None = None):
        self._arrays: dict[str, Array] = {}
        if arrays:
            for name, values in arrays.items():
                self.add(name, values)

    def add(self, name: str, values) -> None:
        if name in self._arrays:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name!r} contains non-finite values")
        self._arrays[name] = arr

    def __getitem__(self, name: str) -> Array:
        try:
            return self._arrays[name]
        except KeyError:
            raise ShapeError(f"unknown parameter {name!r}") from None

    def __setitem__(self, name: str, values) -> None:
        arr = np.asarray(values, dtype=np.float64)
        if name in self._arrays and arr.shape != self._arrays[name].shape:
            raise ShapeError(
                f"parameter {name!r}: cannot change shape "
                f"{self._arrays[name].shape} -> {arr.shape}"
            )
        self._arrays[name] = arr

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, arr in self._arrays.items():
            out._arrays[name] = arr.copy()
        return out

    def zeros_like(self) -> "ParamSet":
        out = ParamSet()
        for name, arr in self._arrays.items():
            out._arrays[name] = np.zeros_like(arr)
        return out

    def subset(self, prefix: str) -> "ParamSet":
        """Parameters whose name starts with prefix (arrays shared, not copied)."""
        out = ParamSet()
        for name, arr in self._arrays.items():
            if name.startswith(prefix):
                out._arrays[name] = arr
        return out

    def n_values(self) -> int:
        return sum(arr.size for arr in self._arrays.values())


def check_aligned(params: ParamSet, grads: ParamSet) -> None:
    """Raise ShapeError unless grads has exactly the names/shapes of params."""
    if params.names() != grads.names():
        missing = set(params.names()) ^ set(grads.names())
        raise ShapeError(f"parameter/gradient names misaligned: {sorted(missing)}")
    for name, arr in params.items():
        if grads[name].shape != arr.shape:
            raise ShapeError(
                f"gradient shape mismatch for {name!r}: "
                f"{grads[name].shape} vs {arr.shape}"
            )


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Array:
    """Uniform U[-k, k) with k = 1/sqrt(fan_in)."""
    k = 1.0 / np.sqrt(float(fan_in))
    return rng.uniform(-k, k, size=shape)


def init_lstm(params: ParamSet, prefix: str, rng: np.random.Generator,
              in_dim: int, hidden: int, forget_bias: float = 1.0) -> None:
    """Add LSTM cell parameters under prefix: wx (4H, D), wh (4H, H), b (4H,).

    Gate row order is i, f, g, o. The forget-gate bias starts at 1.0, a
    standard stabilizer for recurrent training.
    """
    fan_in = in_dim + hidden  # the cell consumes [x, h]
    params.add(prefix + ".wx", uniform_init(rng, (4 * hidden, in_dim), fan_in))
    params.add(prefix + ".wh", uniform_init(rng, (4 * hidden, hidden), fan_in))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = forget_bias
    params.add(prefix + ".b", b)


def init_dense(params: ParamSet, prefix: str, rng: np.random.Generator,
               in_dim: int, out_dim: int) -> None:
    """Add dense layer parameters under prefix: w (out, in), b (out,)."""
    params.add(prefix + ".w", uniform_init(rng, (out_dim, in_dim), in_dim))
    params.add(prefix + ".b", np.zeros(out_dim))


# ---------------------------------------------------------------------------
# LSTM kernels (batched over whole sequences)
# ---------------------------------------------------------------------------

def lstm_forward(wx: Array, wh: Array, b: Array, x: Array):
    """Run an LSTM over x of shape (B, T, D) from a zero initial state.

    Returns hidden states (B, T, H) and the cache needed by lstm_backward.
    """
    B, T, D = x.shape
    H = wh.shape[1]
    if wx.shape != (4 * H, D):
        raise ShapeError(f"lstm wx shape {wx.shape} incompatible with input dim {D}")

    xw = x.reshape(B * T, D) @ wx.T  # precompute input transforms
    xw = xw.reshape(B, T, 4 * H)

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    gates_i = np.empty((T, B, H))
    gates_f = np.empty((T, B, H))
    gates_g = np.empty((T, B, H))
    gates_o = np.empty((T, B, H))
    c_prev = np.empty((T, B, H))
    h_prev = np.empty((T, B, H))
    tanh_c = np.empty((T, B, H))
    hs = np.empty((B, T, H))

    for t in range(T):
        z = xw[:, t, :] + h @ wh.T + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = sigmoid(z[:, 3 * H:])
        c_prev[t] = c
        h_prev[t] = h
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = i, f, g, o
        tanh_c[t] = tc
        hs[:, t, :] = h

    cache = {
        "x": x, "i": gates_i, "f": gates_f, "g": gates_g, "o": gates_o,
        "c_prev": c_prev, "h_prev": h_prev, "tanh_c": tanh_c,
    }
    return hs, cache


def lstm_backward(wx: Array, wh: Array, cache: dict, dh_out: Array):
    """Backpropagate dh_out (B, T, H) through lstm_forward.

    Returns (dwx, dwh, db, dx).
    """
    x = cache["x"]
    B, T, D = x.shape
    H = wh.shape[1]

    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dx = np.empty_like(x)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))

    for t in range(T - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        tc = cache["tanh_c"][t]
        dh = dh_out[:, t, :] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        df = dc * cache["c_prev"][t]
        dg = dc * i
        dc_next = dc * f

        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)  # (B, 4H)

        dwx += dz.T @ x[:, t, :]
        dwh += dz.T @ cache["h_prev"][t]
        db += dz.sum(axis=0)
        dx[:, t, :] = dz @ wx
        dh_next = dz @ wh

    return dwx, dwh, db, dx


# ---------------------------------------------------------------------------
# dense kernels
# ---------------------------------------------------------------------------

def dense_forward(w: Array, b: Array, x: Array, activation: str = "linear"):
    """activation(x @ w.T + b) for x of shape (..., D). Returns (y, cache)."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(
            f"dense weight {w.shape} incompatible with input width {x.shape[-1]}"
        )
    pre = x @ w.T + b
    if activation == "sigmoid":
        y = sigmoid(pre)
    elif activation == "tanh":
        y = np.tanh(pre)
    else:
        y = pre
    return y, {"x": x, "y": y, "activation": activation}


def dense_backward(w: Array, cache: dict, dy: Array):
    """Backpropagate dy through dense_forward. Returns (dw, db, dx)."""
    y = cache["y"]
    act = cache["activation"]
    if act == "sigmoid":
        dpre = dy * y * (1.0 - y)
    elif act == "tanh":
        dpre = dy * (1.0 - y * y)
    else:
        dpre = dy
    x = cache["x"]
    d = x.shape[-1]
    o = w.shape[0]
    dpre2 = dpre.reshape(-1, o)
    x2 = x.reshape(-1, d)
    dw = dpre2.T @ x2
    db = dpre2.sum(axis=0)
    dx = dpre @ w
    return dw, db, dx


# ---------------------------------------------------------------------------
# spec-level single-vector operations
# ---------------------------------------------------------------------------

@dataclass
class RecurrentState:
    """Hidden and cell state of one LSTM cell."""
    h: Array
    c: Array

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.h.shape != self.c.shape:
            raise ShapeError(f"h shape {self.h.shape} != c shape {self.c.shape}")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.c))):
            raise ValueError("recurrent state contains non-finite values")

    @staticmethod
    def zeros(hidden: int) -> "RecurrentState":
        return RecurrentState(np.zeros(hidden), np.zeros(hidden))


def lstm_step(params: ParamSet, x: Array, state: RecurrentState) -> RecurrentState:
    """One LSTM step on a single input vector.

    Expects parameters named "wx" (4H, D), "wh" (4H, H), "b" (4H,). Gates are
    i, f, o sigmoids with tanh candidate g; c' = f*c + i*g; h' = o*tanh(c').
    """
    wx, wh, b = params["wx"], params["wh"], params["b"]
    x = np.asarray(x, dtype=np.float64)
    H = state.h.shape[0]
    if wh.shape != (4 * H, H):
        raise ShapeError(f"wh shape {wh.shape} incompatible with state width {H}")
    if wx.shape[0] != 4 * H:
        raise ShapeError(f"wx shape {wx.shape} incompatible with state width {H}")
    if wx.shape[1] != x.shape[0]:
        raise ShapeError(f"wx shape {wx.shape} incompatible with input width {x.shape[0]}")
    if b.shape != (4 * H,):
        raise ShapeError(f"b shape {b.shape} incompatible with state width {H}")

    z = wx @ x + wh @ state.h + b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    g = np.tanh(z[2 * H:3 * H])
    o = sigmoid(z[3 * H:])
    c_new = f * state.c + i * g
    h_new = o * np.tanh(c_new)
    return RecurrentState(h_new, c_new)


def dense(params: ParamSet, x: Array, activation: str = "linear") -> Array:
    """activation(W @ x + b) for a single vector, parameters "w" (out, in), "b"."""
    y, _ = dense_forward(params["w"], params["b"], np.asarray(x, dtype=np.float64),
                         activation)
    return y


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def bce(p, target):
    """Binary cross-entropy with probabilities clamped to [eps, 1-eps].

    Works elementwise on arrays; scalars in, scalar out.
    """
    p_arr = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    t_arr = np.asarray(target, dtype=np.float64)
    loss = -(t_arr * np.log(p_arr) + (1.0 - t_arr) * np.log(1.0 - p_arr))
    return float(loss) if loss.ndim == 0 else loss


def bce_dlogit(p, target):
    """d bce(sigmoid(z), target) / dz, honoring the probability clamp.

    Inside the clamp band the derivative is the usual (p - target); where the
    probability saturated past the clamp, the loss is constant, so 0.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    t_arr = np.asarray(target, dtype=np.float64)
    grad = p_arr - t_arr
    return np.where((p_arr > PROB_EPS) & (p_arr < 1.0 - PROB_EPS), grad, 0.0)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int
    m: ParamSet
    v: ParamSet

    @staticmethod
    def zeros(params: ParamSet) -> "AdamState":
        return AdamState(step=0, m=params.zeros_like(), v=params.zeros_like())


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState,
              hyper: AdamHyper = AdamHyper()):
    """One bias-corrected Adam update. Pure: returns (new_params, new_state)."""
    check_aligned(params, grads)
    check_aligned(params, state.m)
    t = state.step + 1
    new_params = ParamSet()
    new_m = ParamSet()
    new_v = ParamSet()
    b1c = 1.0 - hyper.beta1 ** t
    b2c = 1.0 - hyper.beta2 ** t
    for name, theta in params.items():
        g = grads[name]
        m = hyper.beta1 * state.m[name] + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * state.v[name] + (1.0 - hyper.beta2) * g * g
        m_hat = m / b1c
        v_hat = v / b2c
        new_params._arrays[name] = theta - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        new_m._arrays[name] = m
        new_v._arrays[name] = v
    return new_params, AdamState(step=t, m=new_m, v=new_v)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(loss_fn, params: ParamSet, eps: float = 1e-5,
               floor: float = 1e-3) -> float:
    """Max relative error between analytic and central finite-difference grads.

    loss_fn(params) must return (loss, grads) deterministically. The relative
    error per coordinate is |a - n| / max(|a|, |n|, floor); the floor keeps
    near-zero coordinates from amplifying round-off into false alarms.
    """
    _, grads = loss_fn(params)
    work = params.copy()
    worst = 0.0
    for name in params.names():
        arr = work[name]
        analytic = grads[name]
        flat = arr.reshape(-1)
        a_flat = np.asarray(analytic, dtype=np.float64).reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up, _ = loss_fn(work)
            flat[idx] = orig - eps
            down, _ = loss_fn(work)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(a_flat[idx]), abs(numeric), floor)
            worst = max(worst, abs(a_flat[idx] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: ParamSet, model_kind: str, config: dict) -> None:
    """Write parameters plus rebuild config as a versioned JSON checkpoint."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "model_kind": model_kind,
        "config": config,
        "arrays": [
            {"name": name, "shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in params.items()
        ],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path):
    """Read a checkpoint; returns (params, model_kind, config).

    Validates the declared shapes and that every value is finite.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or "arrays" not in payload:
        raise ParseError(f"{path}: missing 'arrays' field")
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported format_version {version!r}")
    params = ParamSet()
    for entry in payload["arrays"]:
        name = entry.get("name")
        shape = tuple(entry.get("shape", ()))
        data = np.asarray(entry.get("data", []), dtype=np.float64)
        if int(np.prod(shape, dtype=np.int64)) != data.size:
            raise ParseError(
                f"{path}: array {name!r} declares shape {shape} "
                f"but carries {data.size} values"
            )
        if not np.all(np.isfinite(data)):
            raise ParseError(f"{path}: array {name!r} contains non-finite values")
        params.add(name, data.reshape(shape))
    return params, payload.get("model_kind", ""), payload.get("config", {})
