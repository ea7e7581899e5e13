"""Time-conditioned network components.

Models here all expose ``forward(x, t, *, seed_time=False, gaps=None)`` and
return a ``DualTensor`` of predictions. ``t`` is a timestamp already mapped
to the normalized training scale: a scalar shared by the whole batch (the
common case, since batches come from one snapshot), a vector with one entry
per row, or a traced ``Tensor`` such as ``t - delta`` so the prediction can
be differentiated with respect to the shift. With ``seed_time=True`` the
returned tangent carries dF/dt evaluated at the same point.

``gaps``, when given a list, collects the distance of every thresholded
pre-activation from its threshold; callers use it to detect inputs sitting
on a kink where one-sided derivatives disagree.
"""

from __future__ import annotations

import json

import numpy as np

from futurefit.autodiff import (
    DualTensor,
    ParamStore,
    ShapeError,
    Tensor,
    UsageError,
    dual_concat,
    dual_select,
)


class TimeScaler:
    """Affine map sending the training time range onto [0, 1].

    Later timestamps extrapolate past 1.0; the shift bound and every learned
    time response live on this normalized scale.
    """

    def __init__(self, t_min: float = 0.0, t_max: float = 1.0):
        self.t_min = float(t_min)
        self.t_max = float(t_max)

    @classmethod
    def fit(cls, timestamps) -> "TimeScaler":
        ts = np.asarray(timestamps, dtype=np.float64)
        if ts.size == 0:
            raise UsageError("cannot fit a TimeScaler on an empty timestamp set")
        return cls(float(ts.min()), float(ts.max()))

    @property
    def span(self) -> float:
        return self.t_max - self.t_min if self.t_max > self.t_min else 1.0

    def transform(self, t):
        return (np.asarray(t, dtype=np.float64) - self.t_min) / self.span

    def inverse(self, u):
        return np.asarray(u, dtype=np.float64) * self.span + self.t_min

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeScaler":
        return cls(d["t_min"], d["t_max"])


def _kaiming_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in) if fan_in > 0 else 0.0
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, store: ParamStore, name: str, fan_in: int, fan_out: int,
                 rng: np.random.Generator, zero_init: bool = False):
        if zero_init:
            w = np.zeros((fan_in, fan_out))
            b = np.zeros(fan_out)
        else:
            w = _kaiming_uniform(rng, fan_in, (fan_in, fan_out))
            b = _kaiming_uniform(rng, fan_in, (fan_out,))
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", b)

    def __call__(self, x: DualTensor) -> DualTensor:
        return x @ DualTensor(self.w) + DualTensor(self.b)


class Time2Vec:
    """Learned time encoding: linear coordinates then sinusoids.

    tau(t)[a] = w_a t + b_a for the first ``m_lin`` coordinates and
    sin(w_a t + b_a) for the rest. Frequencies start uniform in (-1, 1) and
    phases uniform in (-pi, pi).
    """

    def __init__(self, store: ParamStore, name: str, m: int, m_lin: int, rng: np.random.Generator):
        if not 0 <= m_lin <= m:
            raise UsageError(f"m_lin must lie in [0, m], got m_lin={m_lin}, m={m}")
        self.m = m
        self.m_lin = m_lin
        self.w = store.add(f"{name}.w", rng.uniform(-1.0, 1.0, size=(1, m)))
        self.b = store.add(f"{name}.b", rng.uniform(-np.pi, np.pi, size=(m,)))

    def __call__(self, t: DualTensor) -> DualTensor:
        z = t @ DualTensor(self.w) + DualTensor(self.b)  # (k, m)
        if self.m_lin == self.m:
            return z
        periodic = z[:, self.m_lin:].sin()
        if self.m_lin == 0:
            return periodic
        return dual_concat([z[:, : self.m_lin], periodic], axis=1)


class TReLU:
    """Time-dependent ReLU with learned threshold, slope and offset.

    Each activation coordinate compares its input against a threshold
    g(tau); at or above it the input passes through, below it the unit
    returns h(tau) * (x - g(tau)) + v(tau). The three heads are separate
    one-hidden-layer tanh networks of the time encoding whose output layers
    start at zero, so an untrained TReLU is exactly ReLU.
    """

    def __init__(self, store: ParamStore, name: str, m: int, width: int,
                 rng: np.random.Generator, hidden: int = 8):
        self.width = width
        self.heads = {}
        for head in ("h", "g", "v"):
            self.heads[head] = (
                Linear(store, f"{name}.{head}1", m, hidden, rng),
                Linear(store, f"{name}.{head}2", hidden, width, rng, zero_init=True),
            )

    def _head(self, head: str, tau: DualTensor) -> DualTensor:
        first, second = self.heads[head]
        return second(first(tau).tanh())

    def __call__(self, x: DualTensor, tau: DualTensor, gaps=None) -> DualTensor:
        h = self._head("h", tau)
        g = self._head("g", tau)
        v = self._head("v", tau)
        if gaps is not None:
            gaps.append(float(np.min(np.abs(x.primal.data - g.primal.data))))
        mask = x.primal.data >= g.primal.data
        below = h * (x - g) + v
        return dual_select(mask, x, below)


def trelu_weight_count(m: int, hidden: int, width: int) -> int:
    """Weight-matrix entries of the threshold and slope heads of one TReLU."""
    return 2 * (m * hidden + hidden * width)


def _time_column(t, n_rows: int):
    """Normalize a timestamp argument to a (k, 1) node with k in {1, n}."""
    if isinstance(t, DualTensor):
        raise UsageError("pass the raw time value; tangent seeding is handled internally")
    if isinstance(t, Tensor):
        col = t.reshape(1, 1) if t.size == 1 else t.reshape(-1, 1)
    else:
        arr = np.asarray(t, dtype=np.float64)
        col = Tensor(arr.reshape(1, 1) if arr.ndim == 0 else arr.reshape(-1, 1))
    k = col.shape[0]
    if k not in (1, n_rows):
        raise ShapeError(f"got {k} timestamps for a batch of {n_rows} rows")
    return col


class TimeModel:
    """MLP over the concatenation of features and the time encoding.

    ``trelu_layers`` flags which hidden layers use TReLU instead of plain
    ReLU. With ``time_features=False`` the model never sees ``t`` at all
    (no encoding in the input, ReLU everywhere), which is the
    time-oblivious variant the reference methods train.
    """

    kind = "time_model"

    def __init__(self, d_in: int, d_out: int, hidden=(50, 50), m: int = 8, m_lin: int = 2,
                 trelu_layers="all", trelu_hidden: int = 8, time_features: bool = True,
                 seed: int = 0):
        hidden = tuple(int(h) for h in hidden)
        flags = self._resolve_flags(trelu_layers, len(hidden))
        if any(flags) and not time_features:
            raise UsageError("TReLU layers need the time encoding; enable time_features")
        self.spec = {
            "d_in": d_in, "d_out": d_out, "hidden": list(hidden), "m": m, "m_lin": m_lin,
            "trelu_layers": list(flags), "trelu_hidden": trelu_hidden,
            "time_features": bool(time_features), "seed": seed,
        }
        self.d_in, self.d_out = d_in, d_out
        self.time_features = bool(time_features)
        self.params = ParamStore()
        self.scaler = None
        rng = np.random.default_rng(seed)
        self.t2v = Time2Vec(self.params, "t2v", m, m_lin, rng) if self.time_features else None
        self.layers = []
        self.trelus = []
        fan = d_in + (m if self.time_features else 0)
        for i, width in enumerate(hidden):
            self.layers.append(Linear(self.params, f"fc{i}", fan, width, rng))
            self.trelus.append(
                TReLU(self.params, f"trelu{i}", m, width, rng, hidden=trelu_hidden)
                if flags[i] else None
            )
            fan = width
        self.out = Linear(self.params, "out", fan, d_out, rng)

    @staticmethod
    def _resolve_flags(trelu_layers, n_hidden: int) -> list:
        if trelu_layers == "all":
            return [True] * n_hidden
        if trelu_layers == "none":
            return [False] * n_hidden
        if trelu_layers == "last":
            return [False] * (n_hidden - 1) + [True]
        flags = [bool(f) for f in trelu_layers]
        if len(flags) != n_hidden:
            raise UsageError(f"need {n_hidden} TReLU flags, got {len(flags)}")
        return flags

    def forward(self, x, t, *, seed_time: bool = False, gaps=None) -> DualTensor:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        n = x.shape[0]
        xd = DualTensor(Tensor(x))
        if not self.time_features:
            h = xd
            tau = None
        else:
            col = _time_column(t, n)
            td = DualTensor(col, Tensor(np.ones(col.shape)) if seed_time else None)
            tau = self.t2v(td)  # (k, m)
            tau_rows = tau.broadcast_to((n, tau.shape[1])) if tau.shape[0] == 1 and n > 1 else tau
            h = dual_concat([xd, tau_rows], axis=1)
        for layer, trelu in zip(self.layers, self.trelus):
            h = layer(h)
            if trelu is not None:
                h = trelu(h, tau, gaps=gaps)
            else:
                if gaps is not None:
                    gaps.append(float(np.min(np.abs(h.primal.data))))
                h = h.relu()
        return self.out(h)

    def predict_logits(self, x, t) -> np.ndarray:
        return self.forward(x, t).primal.data

    def kink_gap(self, x, t) -> float:
        gaps: list = []
        self.forward(x, t, gaps=gaps)
        return min(gaps) if gaps else float("inf")


class PerFeatureTimeModel:
    """Linear-in-features scorer whose weights are functions of time.

    F(x, t) = w_0(t) + sum_j w_j(t) x_j, one independent two-hidden-layer
    tanh network of the scalar time per weight (smooth in t, so the
    extrapolation term keeps a usable curvature signal). The networks are
    stored stacked so a forward pass is a handful of batched matmuls. With
    ``zero_time=True`` every network sees a zeroed time input, which pins
    all weights to constants; that variant is the time-invariance probe.
    """

    kind = "per_feature"

    def __init__(self, d: int, widths=(50, 20), seed: int = 0, zero_time: bool = False):
        widths = tuple(int(w) for w in widths)
        if len(widths) != 2:
            raise UsageError("the per-feature networks use exactly two hidden layers")
        self.spec = {"d": d, "widths": list(widths), "seed": seed, "zero_time": bool(zero_time)}
        self.d = d
        self.zero_time = bool(zero_time)
        self.params = ParamStore()
        self.scaler = None
        rng = np.random.default_rng(seed)
        k = d + 1
        w1, w2 = widths
        self.W1 = self.params.add("W1", _kaiming_uniform(rng, 1, (k, 1, w1)))
        self.b1 = self.params.add("b1", _kaiming_uniform(rng, 1, (k, 1, w1)))
        self.W2 = self.params.add("W2", _kaiming_uniform(rng, w1, (k, w1, w2)))
        self.b2 = self.params.add("b2", _kaiming_uniform(rng, w1, (k, 1, w2)))
        self.W3 = self.params.add("W3", _kaiming_uniform(rng, w2, (k, w2, 1)))
        self.b3 = self.params.add("b3", _kaiming_uniform(rng, w2, (k, 1, 1)))

    def weight_curves(self, t) -> np.ndarray:
        """Evaluate (w_0(t), ..., w_d(t)) on a grid; returns (len(t), d+1)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        w = self._weights_dual(Tensor(t.reshape(-1, 1)), seed_time=False, gaps=None)
        return w.primal.data.reshape(self.d + 1, t.size).T

    def _weights_dual(self, col: Tensor, seed_time: bool, gaps) -> DualTensor:
        k_nets = self.d + 1
        n_t = col.shape[0]
        if self.zero_time:
            td = DualTensor(Tensor(np.zeros((n_t, 1))))
        else:
            td = DualTensor(col, Tensor(np.ones(col.shape)) if seed_time else None)
        tt = td.reshape(1, n_t, 1).broadcast_to((k_nets, n_t, 1))
        z1 = tt @ DualTensor(self.W1) + DualTensor(self.b1)
        h1 = z1.tanh()
        z2 = h1 @ DualTensor(self.W2) + DualTensor(self.b2)
        h2 = z2.tanh()
        return (h2 @ DualTensor(self.W3) + DualTensor(self.b3)).reshape(k_nets, n_t)

    def forward(self, x, t, *, seed_time: bool = False, gaps=None) -> DualTensor:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        n = x.shape[0]
        if x.shape[1] != self.d:
            raise ShapeError(f"expected {self.d} features, got {x.shape[1]}")
        col = _time_column(t, n)
        w = self._weights_dual(col, seed_time, gaps)  # (d+1, k)
        xd = DualTensor(Tensor(x))
        bias = w[0]           # (k,)
        feats = w[1:]         # (d, k)
        if col.shape[0] == 1:
            scores = (xd @ feats.reshape(self.d, 1)).reshape(n) + bias
        else:
            per_sample = feats.reshape(self.d, n).transpose()  # (n, d)
            scores = (xd * per_sample).sum(axis=1) + bias
        return scores

    def predict_logits(self, x, t) -> np.ndarray:
        return self.forward(x, t).primal.data

    def kink_gap(self, x, t) -> float:
        gaps: list = []
        self.forward(x, t, gaps=gaps)
        return min(gaps) if gaps else float("inf")


def build_model(spec: dict):
    """Construct a model from its spec dict (as stored in checkpoints)."""
    spec = dict(spec)
    kind = spec.pop("kind", "time_model")
    if kind == "time_model":
        return TimeModel(**spec)
    if kind == "per_feature":
        return PerFeatureTimeModel(**spec)
    raise UsageError(f"unknown model kind {kind!r}")


def save_checkpoint(model, path, extra: dict | None = None) -> str:
    """Write the model spec, parameters, and time scaler to one npz file."""
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    meta = {
        "kind": model.kind,
        "spec": model.spec,
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "extra": extra or {},
    }
    arrays = {f"param::{k}": v for k, v in model.params.state_dict().items()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    return path


def load_checkpoint(path):
    """Rebuild a model from ``save_checkpoint`` output, bit-exact."""
    with np.load(path) as archive:
        meta = json.loads(archive["__meta__"].tobytes().decode())
        state = {
            k[len("param::"):]: archive[k]
            for k in archive.files if k.startswith("param::")
        }
    model = build_model({"kind": meta["kind"], **meta["spec"]})
    model.params.load_state_dict(state)
    if meta["scaler"] is not None:
        model.scaler = TimeScaler.from_dict(meta["scaler"])
    return model
