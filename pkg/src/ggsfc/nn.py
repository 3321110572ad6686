"""Dense numerical kernel: parameter sets, layer primitives with exact
analytic backprop, plain SGD, and finite-difference gradient verification.

Everything is float64.  Forward ops return (output, cache); the matching
backward op consumes the cache and returns exact gradients.  The model
sizes here are tiny, so clarity and verifiability win over speed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Mapping

import numpy as np

GRU_PARAM_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


class NonFiniteGradientError(ValueError):
    """A gradient contained NaN or inf; the update must be rejected."""


class ParamSet:
    """Named float64 tensors with shapes frozen at construction."""

    def __init__(self, tensors: Mapping[str, np.ndarray]):
        self._tensors: dict[str, np.ndarray] = {}
        for name, value in tensors.items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name!r} has non-finite entries")
            self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def names(self) -> tuple[str, ...]:
        return tuple(self._tensors)

    def items(self):
        return self._tensors.items()

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: v.shape for name, v in self._tensors.items()}

    def copy(self) -> "ParamSet":
        return ParamSet(self._tensors)

    def size(self) -> int:
        return sum(v.size for v in self._tensors.values())


class GradSet:
    """Gradient accumulator shape-matched to a ParamSet."""

    def __init__(self, params: ParamSet):
        self._tensors = {name: np.zeros_like(v) for name, v in params.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def items(self):
        return self._tensors.items()

    def add(self, name: str, value: np.ndarray) -> None:
        slot = self._tensors[name]
        if np.shape(value) != slot.shape:
            raise ValueError(
                f"gradient for {name!r} has shape {np.shape(value)}, expected {slot.shape}"
            )
        slot += value

    def add_all(self, grads: Mapping[str, np.ndarray]) -> None:
        for name, value in grads.items():
            self.add(name, value)

    def scale(self, factor: float) -> None:
        for v in self._tensors.values():
            v *= factor

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self._tensors.values())


def uniform_init(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Uniform in [-s, s] with s = 1/sqrt(fan-in); fan-in is the first axis."""
    s = 1.0 / np.sqrt(shape[0])
    return rng.uniform(-s, s, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign for stability at large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# affine

def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, tuple]:
    """y = x @ w + b for 1-D or batched 2-D x."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"affine shape mismatch: x {x.shape} vs w {w.shape}")
    return x @ w + b, (x, w)


def affine_backward(
    grad_y: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = cache
    grad_x = grad_y @ w.T
    if x.ndim == 1:
        grad_w = np.outer(x, grad_y)
        grad_b = grad_y.copy()
    else:
        grad_w = x.T @ grad_y
        grad_b = grad_y.sum(axis=0)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# GRU cell (shared across time/nodes; parameters addressed by prefix)

def gru_param_shapes(d_in: int, d_hidden: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for gate in ("z", "r", "h"):
        shapes[f"W_{gate}"] = (d_in, d_hidden)
        shapes[f"U_{gate}"] = (d_hidden, d_hidden)
        shapes[f"b_{gate}"] = (d_hidden,)
    return shapes


def init_gru_params(
    d_in: int, d_hidden: int, rng: np.random.Generator, prefix: str = ""
) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for name, shape in gru_param_shapes(d_in, d_hidden).items():
        if name.startswith("b"):
            out[prefix + name] = np.zeros(shape)
        else:
            out[prefix + name] = uniform_init(shape, rng)
    return out


def gru_cell(
    x: np.ndarray, h_prev: np.ndarray, params: Mapping[str, np.ndarray], prefix: str = ""
) -> tuple[np.ndarray, tuple]:
    """Standard GRU update; x and h_prev may be 1-D or batched 2-D.

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    hbar = tanh(x W_h + (r*h) U_h + b_h)
    h_new = (1 - z) * h + z * hbar
    """
    p = lambda name: params[prefix + name]
    z = sigmoid(x @ p("W_z") + h_prev @ p("U_z") + p("b_z"))
    r = sigmoid(x @ p("W_r") + h_prev @ p("U_r") + p("b_r"))
    rh = r * h_prev
    hbar = np.tanh(x @ p("W_h") + rh @ p("U_h") + p("b_h"))
    h_new = (1.0 - z) * h_prev + z * hbar
    cache = (x, h_prev, z, r, rh, hbar, params, prefix)
    return h_new, cache


def gru_cell_backward(
    grad_h_new: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Returns (grad_x, grad_h_prev, param gradients keyed with the prefix)."""
    x, h_prev, z, r, rh, hbar, params, prefix = cache
    p = lambda name: params[prefix + name]

    dz = grad_h_new * (hbar - h_prev)
    dhbar = grad_h_new * z
    dh_prev = grad_h_new * (1.0 - z)

    da_h = dhbar * (1.0 - hbar * hbar)
    drh = da_h @ p("U_h").T
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)

    dx = da_h @ p("W_h").T + da_z @ p("W_z").T + da_r @ p("W_r").T
    dh_prev = dh_prev + da_z @ p("U_z").T + da_r @ p("U_r").T

    if x.ndim == 1:
        grads = {
            prefix + "W_z": np.outer(x, da_z),
            prefix + "U_z": np.outer(h_prev, da_z),
            prefix + "b_z": da_z,
            prefix + "W_r": np.outer(x, da_r),
            prefix + "U_r": np.outer(h_prev, da_r),
            prefix + "b_r": da_r,
            prefix + "W_h": np.outer(x, da_h),
            prefix + "U_h": np.outer(rh, da_h),
            prefix + "b_h": da_h,
        }
    else:
        grads = {
            prefix + "W_z": x.T @ da_z,
            prefix + "U_z": h_prev.T @ da_z,
            prefix + "b_z": da_z.sum(axis=0),
            prefix + "W_r": x.T @ da_r,
            prefix + "U_r": h_prev.T @ da_r,
            prefix + "b_r": da_r.sum(axis=0),
            prefix + "W_h": x.T @ da_h,
            prefix + "U_h": rh.T @ da_h,
            prefix + "b_h": da_h.sum(axis=0),
        }
    return dx, dh_prev, grads


# ---------------------------------------------------------------------------
# masked softmax

def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over unmasked entries; masked entries get exactly 0."""
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError(f"logits shape {logits.shape} vs mask shape {mask.shape}")
    if not mask.any():
        raise ValueError("masked_softmax requires at least one unmasked entry")
    shifted = logits - logits[mask].max()
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / e.sum()


def log_prob_grad(probs: np.ndarray, index: int) -> np.ndarray:
    """Gradient of log(probs[index]) w.r.t. the logits of masked_softmax.

    d log p_i / d logit_j = delta_ij - p_j; masked entries have p_j = 0 and
    therefore zero gradient automatically.
    """
    if probs[index] <= 0.0:
        raise ValueError(f"index {index} has zero probability (masked?)")
    grad = -probs.copy()
    grad[index] += 1.0
    return grad


# ---------------------------------------------------------------------------
# updates

def sgd_update(
    params: ParamSet,
    grads: GradSet,
    alpha: float,
    direction: str = "ascend",
) -> ParamSet:
    """One plain SGD step: theta' = theta +/- alpha * grad.

    Non-finite gradients reject the whole update (raise) rather than being
    clipped; with sparse rewards at the 1e4 scale, silent clipping would
    hide defects.
    """
    if direction not in ("ascend", "descend"):
        raise ValueError(f"direction must be ascend or descend, got {direction!r}")
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not grads.is_finite():
        raise NonFiniteGradientError("gradient has non-finite entries; update rejected")
    sign = 1.0 if direction == "ascend" else -1.0
    new = {}
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        new[name] = value + sign * alpha * g
    return ParamSet(new)


# ---------------------------------------------------------------------------
# finite-difference verification

@dataclass
class GradCheckReport:
    rel_err: dict[str, float]
    max_rel_err: float
    passed: bool
    tolerance: float

    def __str__(self) -> str:
        worst = max(self.rel_err, key=self.rel_err.get) if self.rel_err else "-"
        status = "PASS" if self.passed else "FAIL"
        return (
            f"grad check {status}: max rel err {self.max_rel_err:.3e} "
            f"(worst tensor {worst}, tolerance {self.tolerance:.1e})"
        )


def finite_diff_check(
    f: Callable[[ParamSet], tuple[float, GradSet]],
    params: ParamSet,
    h: float = 1e-5,
    tolerance: float = 1e-6,
    max_coords_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare f's analytic gradient against central differences.

    f must be deterministic and return (scalar value, analytic GradSet).
    Per tensor, the relative error is ||ga - gn||_2 / max(||ga||_2, ||gn||_2)
    over the probed coordinates (all of them unless max_coords_per_tensor
    caps the probe count, in which case a seeded uniform subset is used).
    """
    value, analytic = f(params)
    if not np.isfinite(value):
        raise ValueError(f"f(params) is not finite: {value}")
    if max_coords_per_tensor is not None and rng is None:
        rng = np.random.default_rng(0)

    rel_err: dict[str, float] = {}
    for name in params.names():
        tensor = params[name]
        flat_idx = np.arange(tensor.size)
        if max_coords_per_tensor is not None and tensor.size > max_coords_per_tensor:
            flat_idx = rng.choice(tensor.size, size=max_coords_per_tensor, replace=False)
            flat_idx.sort()
        ga = analytic[name].reshape(-1)[flat_idx]
        gn = np.empty(len(flat_idx))
        flat = tensor.reshape(-1)  # view; probes mutate in place and restore
        for j, idx in enumerate(flat_idx):
            orig = flat[idx]
            flat[idx] = orig + h
            up, _ = f(params)
            flat[idx] = orig - h
            down, _ = f(params)
            flat[idx] = orig
            gn[j] = (up - down) / (2.0 * h)
        denom = max(np.linalg.norm(ga), np.linalg.norm(gn))
        rel_err[name] = 0.0 if denom < 1e-12 else float(np.linalg.norm(ga - gn) / denom)

    worst = max(rel_err.values()) if rel_err else 0.0
    return GradCheckReport(
        rel_err=rel_err, max_rel_err=worst, passed=worst <= tolerance, tolerance=tolerance
    )


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: ParamSet, metadata: dict, path: str | Path) -> None:
    """JSON checkpoint: flat float64 arrays with shapes plus metadata.

    JSON floats round-trip float64 exactly (shortest-repr), so a load gives
    bit-identical parameters; no timestamps, so same inputs give the same
    bytes.
    """
    doc = {
        "metadata": metadata,
        "tensors": {
            name: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
            for name, v in params.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ParamSet, dict]:
    doc = json.loads(Path(path).read_text())
    tensors = {
        name: np.array(rec["data"], dtype=np.float64).reshape(rec["shape"])
        for name, rec in doc["tensors"].items()
    }
    return ParamSet(tensors), doc["metadata"]
