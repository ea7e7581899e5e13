"""Training objectives for time-sensitive predictors.

The main objective augments the usual fit term with a first-order
extrapolation check: pick a shift delta, step back to t - delta, and demand
that the Taylor step F(x, t - delta) + delta * dF/dt lands on the label again,

    J(theta) = L(y, F(x, t)) + lam * max_{|delta| <= Dmax} L(y, F(x, t - delta)
                                                             + delta * dF/dt(x, t - delta)).

The inner maximization runs plain gradient ascent on delta with the model
parameters frozen; the chosen shift then enters the outer loss as a constant
(the envelope step). Two reference regularizers share the machinery: a
penalty on ||dF/dt||^2 and a perturbation loss L(y, F(x, t + delta*)) at the
adversarially chosen shift.

All losses take logits/raw outputs, never probabilities.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from futurefit.autodiff import (
    NumericError,
    Tensor,
    UsageError,
    gather_rows,
    grad_wrt,
    logsumexp,
)

BASE_KINDS = ("cross_entropy", "squared_error", "absolute_error")
LOSS_KINDS = ("erm", "gi", "grad_reg", "time_perturb")
DELTA_MODES = ("random", "adversarial", "adversarial_ws")


@dataclass
class LossSpec:
    """Configuration for one training objective.

    ``kind`` picks the objective; ``base`` the per-sample loss; ``lam``
    weighs the robustness term. ``delta_max`` bounds the time shift on the
    normalized scale, and the ascent fields control the inner maximization
    (``delta_mode``: fresh uniform draw, gradient ascent from a uniform
    draw, or ascent warm-started from the previous batch's shift).
    """

    kind: str = "erm"
    base: str = "cross_entropy"
    lam: float = 0.0
    delta_max: float = 0.5
    ascent_steps: int = 10
    ascent_rate: float = 0.05
    delta_mode: str = "adversarial_ws"
    grad_tol: float = 1e-4

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise UsageError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.base not in BASE_KINDS:
            raise UsageError(f"unknown base loss {self.base!r}, expected one of {BASE_KINDS}")
        if self.delta_mode not in DELTA_MODES:
            raise UsageError(f"unknown delta mode {self.delta_mode!r}, expected one of {DELTA_MODES}")
        if self.delta_max < 0:
            raise UsageError("delta_max must be non-negative")
        if self.lam < 0:
            raise UsageError("lam must be non-negative")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "base": self.base, "lam": self.lam,
            "delta_max": self.delta_max, "ascent_steps": self.ascent_steps,
            "ascent_rate": self.ascent_rate, "delta_mode": self.delta_mode,
            "grad_tol": self.grad_tol,
        }


@dataclass
class DeltaState:
    """Carries warm-start shifts between batches and logs every inner solve.

    Warm starts live in per-scope slots (scoped by snapshot timestamp during
    training) because interleaved snapshots generally have different
    worst-case shifts; a single shared slot would make them fight and park
    the shift in the useless middle ground.
    """

    slots: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def get(self, key=None):
        """Previous accepted shift for this scope, or None when unseen."""
        return self.slots.get(key)

    def put(self, key, delta: float) -> None:
        self.slots[key] = float(delta)

    def record(self, epoch: int, batch: int, delta0: float, delta_star: float,
               inner_loss: float) -> None:
        self.history.append({
            "epoch": epoch, "batch": batch, "delta0": delta0,
            "delta_star": delta_star, "inner_loss": inner_loss,
        })

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "batch", "delta0", "delta_star", "inner_loss"])
            writer.writeheader()
            writer.writerows(self.history)


def base_loss(pred: Tensor, y, kind: str) -> Tensor:
    """Mean per-sample loss; ``pred`` are logits or raw outputs.

    Cross-entropy handles both a 2-d (n, c) logit matrix with integer class
    labels and a 1-d logit vector scored against {0, 1} labels via the
    logistic link.
    """
    y = np.asarray(y)
    if kind == "cross_entropy":
        if pred.ndim == 2:
            idx = y.astype(np.intp)
            if idx.size and (idx.min() < 0 or idx.max() >= pred.shape[1]):
                raise UsageError(
                    f"class labels must lie in [0, {pred.shape[1] - 1}], "
                    f"got range [{idx.min()}, {idx.max()}]")
            lse = logsumexp(pred, axis=1).reshape(pred.shape[0])
            return (lse - gather_rows(pred, idx)).mean()
        # softplus(s) - y*s, with softplus(s) = relu(s) + log(1 + exp(-|s|))
        yv = y.astype(np.float64)
        softplus = pred.relu() + ((-pred.abs()).exp() + 1.0).log()
        return (softplus - Tensor(yv) * pred).mean()
    target = Tensor(y.astype(np.float64))
    flat = pred.reshape(target.shape) if pred.shape != target.shape else pred
    if kind == "squared_error":
        diff = flat - target
        return (diff * diff).mean()
    if kind == "absolute_error":
        return (flat - target).abs().mean()
    raise UsageError(f"unknown base loss {kind!r}")


def interpolated_prediction(model, x, t, delta) -> Tensor:
    """First-order extrapolation F(x, t - delta) + delta * dF/dt(x, t - delta).

    ``delta`` may be a float (a settled shift entering the outer loss) or a
    traced scalar ``Tensor`` so the result can be differentiated with
    respect to the shift itself. ``t`` is one timestamp shared by the batch.
    """
    t = float(t)
    if isinstance(delta, Tensor):
        if delta.size != 1:
            raise UsageError("the shift must be a scalar")
        shifted = Tensor(t) - delta
        d = model.forward(x, shifted, seed_time=True)
        return d.primal + delta * d.tangent_or_zero()
    delta = float(delta)
    d = model.forward(x, t - delta, seed_time=True)
    return d.primal + delta * d.tangent_or_zero()


def _ascend(objective, delta0: float, spec: LossSpec, params) -> tuple[float, float]:
    """Maximize ``objective`` over the shift by gradient ascent.

    Runs unclamped ascent from ``delta0``, clamps the final iterate to
    [-delta_max, delta_max], and keeps whichever of the start and end points
    scores higher, so the returned shift never loses to its initialization.
    Model parameters are frozen for the whole solve. Returns
    (delta_star, objective(delta_star)).
    """
    lo, hi = -spec.delta_max, spec.delta_max
    with params.frozen(), np.errstate(over="ignore", invalid="ignore"):
        loss0 = None
        delta = float(delta0)
        prev = delta
        for step in range(spec.ascent_steps):
            dvar = Tensor(delta, requires_grad=True)
            try:
                loss = objective(dvar)
                grad = float(grad_wrt(loss, dvar))
            except NumericError:
                # The unclamped iterate walked off a numerical cliff;
                # retreat to the last finite point and stop.
                delta = prev
                break
            if step == 0:
                loss0 = loss.item()
            if abs(grad) < spec.grad_tol:
                break
            prev = delta
            delta = delta + spec.ascent_rate * grad
        delta_star = float(np.clip(delta, lo, hi))
        if delta_star == delta0:
            if loss0 is None:
                loss0 = objective(Tensor(delta0)).item()
            return delta0, loss0
        loss_star = objective(Tensor(delta_star)).item()
        if loss0 is None:
            loss0 = objective(Tensor(delta0)).item()
    if loss0 >= loss_star:
        return float(delta0), float(loss0)
    return delta_star, float(loss_star)


def train_delta(model, x, y, t, spec: LossSpec, state: DeltaState,
                rng: np.random.Generator, *, perturb: bool = False) -> tuple[float, float, float]:
    """Choose the shift for one batch. Returns (delta_star, delta0, inner_loss).

    ``random`` mode draws delta uniformly from [-delta_max, delta_max] and
    uses it as-is; the adversarial modes refine the draw by ascent, with
    ``adversarial_ws`` starting from the previous accepted shift of the
    same timestamp. ``perturb=True`` scores F(x, t + delta) directly
    instead of the backward-step extrapolation.
    """
    if spec.delta_max == 0.0:
        return 0.0, 0.0, float("nan")
    if perturb:
        def objective(dvar):
            shifted = Tensor(float(t)) + dvar
            return base_loss(model.forward(x, shifted).primal, y, spec.base)
    else:
        def objective(dvar):
            return base_loss(interpolated_prediction(model, x, t, dvar), y, spec.base)

    key = float(t) if np.ndim(t) == 0 else None
    warm = state.get(key) if spec.delta_mode == "adversarial_ws" else None
    delta0 = warm if warm is not None else float(rng.uniform(-spec.delta_max, spec.delta_max))
    if spec.delta_mode == "random":
        with model.params.frozen():
            inner = objective(Tensor(delta0)).item()
        delta_star = delta0
    else:
        delta_star, inner = _ascend(objective, delta0, spec, model.params)
    state.put(key, delta_star)
    return float(delta_star), float(delta0), float(inner)


def gi_loss(model, x, y, t, spec: LossSpec, state: DeltaState,
            rng: np.random.Generator) -> tuple[Tensor, dict | None]:
    """Fit term plus the worst-case first-order extrapolation term.

    With ``lam == 0`` the robustness term is dropped entirely, making the
    objective (and its gradients) identical to plain ERM. The chosen shift
    is a constant in the returned graph; only the model parameters receive
    gradients from it.
    """
    base = base_loss(model.forward(x, t).primal, y, spec.base)
    if spec.lam == 0.0:
        return base, None
    delta_star, delta0, inner = train_delta(model, x, y, t, spec, state, rng)
    interp = interpolated_prediction(model, x, t, delta_star)
    loss = base + spec.lam * base_loss(interp, y, spec.base)
    return loss, {"delta0": delta0, "delta_star": delta_star, "inner_loss": inner}


def grad_reg_loss(model, x, y, t, spec: LossSpec) -> Tensor:
    """Fit term plus lam * mean squared norm of dF/dt over the batch."""
    d = model.forward(x, t, seed_time=True)
    base = base_loss(d.primal, y, spec.base)
    if spec.lam == 0.0:
        return base
    tan = d.tangent_or_zero()
    sq = tan * tan
    per_example = sq.sum(axis=1) if sq.ndim == 2 else sq
    return base + spec.lam * per_example.mean()


def time_perturb_loss(model, x, y, t, spec: LossSpec, state: DeltaState,
                      rng: np.random.Generator) -> tuple[Tensor, dict | None]:
    """Fit term plus lam * loss at the adversarially shifted time t + delta*."""
    base = base_loss(model.forward(x, t).primal, y, spec.base)
    if spec.lam == 0.0:
        return base, None
    delta_star, delta0, inner = train_delta(model, x, y, t, spec, state, rng, perturb=True)
    shifted = model.forward(x, float(t) + delta_star).primal
    loss = base + spec.lam * base_loss(shifted, y, spec.base)
    return loss, {"delta0": delta0, "delta_star": delta_star, "inner_loss": inner}


def objective(model, x, y, t, spec: LossSpec, state: DeltaState,
              rng: np.random.Generator) -> tuple[Tensor, dict | None]:
    """Dispatch on ``spec.kind``; returns (loss node, inner-solve record)."""
    if spec.kind == "erm":
        return base_loss(model.forward(x, t).primal, y, spec.base), None
    if spec.kind == "gi":
        return gi_loss(model, x, y, t, spec, state, rng)
    if spec.kind == "grad_reg":
        return grad_reg_loss(model, x, y, t, spec), None
    if spec.kind == "time_perturb":
        return time_perturb_loss(model, x, y, t, spec, state, rng)
    raise UsageError(f"unknown loss kind {spec.kind!r}")
