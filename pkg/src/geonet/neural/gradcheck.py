"""Central-difference gradient checking for layers and whole models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functional import softmax_xent


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0

    def __str__(self):
        rows = [f"  {k}: {v:.3e}" for k, v in self.per_tensor.items()]
        head = f"max relative error {self.max_rel_error:.3e} over {self.n_checked} entries"
        return "\n".join([head, *rows])


def rel_error(a, n):
    a, n = np.asarray(a, dtype=np.float64), np.asarray(n, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def _stages(fragment):
    layers = getattr(fragment, "layers", None)
    if layers is None:
        return [("", fragment)]
    return list(layers)


def grad_check(fragment, x, epsilon: float = 1e-5, labels=None, seed: int = 0,
               max_entries: int | None = None) -> GradCheckReport:
    """Compare analytic and central-difference gradients.

    ``fragment`` is a layer or a :class:`GeoNet` (anything with ``layers``
    is treated as a sequence). With ``labels`` the objective is softmax
    cross-entropy of the output, otherwise a fixed random projection
    ``sum(out * R)``. Every input entry and every parameter entry is
    perturbed unless ``max_entries`` caps the count per tensor. A parameter
    perturbation only re-runs the layers from its own layer onward. Running
    buffers are restored afterwards.
    """
    stages = _stages(fragment)
    for _, layer in stages:
        for v in layer.params.values():
            if v.dtype != np.float64:
                raise TypeError("gradient checks need a float64 fragment")
    x = np.array(x, dtype=np.float64)
    saved = [{k: v.copy() for k, v in layer.buffers.items()} for _, layer in stages]
    rng = np.random.default_rng(seed)

    def run_from(s, a):
        for _, layer in stages[s:]:
            a = layer.forward(a, True)
        return a

    inputs = [x]
    for _, layer in stages:
        inputs.append(layer.forward(inputs[-1], True))
    out = inputs[-1]
    proj = rng.standard_normal(out.shape) if labels is None else None

    def objective(o):
        if labels is None:
            return float(np.sum(o * proj)), proj
        return softmax_xent(o, labels)

    _, g = objective(out)
    for _, layer in reversed(stages):
        g = layer.backward(g)
    # (stage index, name, array, analytic gradient)
    targets = [(0, "input", x, g)]
    for s, (lname, layer) in enumerate(stages):
        for k, v in layer.params.items():
            targets.append((s, f"{lname}.{k}" if lname else k, v, layer.grads[k].copy()))

    report = GradCheckReport(0.0)
    for s, name, arr, analytic in targets:
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
        start = inputs[s]
        numeric = np.empty(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + epsilon
            lp, _ = objective(run_from(s, start))
            flat[i] = old - epsilon
            lm, _ = objective(run_from(s, start))
            flat[i] = old
            numeric[j] = (lp - lm) / (2 * epsilon)
        err = float(rel_error(analytic.reshape(-1)[idx], numeric).max()) if len(idx) else 0.0
        report.per_tensor[name] = err
        report.max_rel_error = max(report.max_rel_error, err)
        report.n_checked += len(idx)

    for (_, layer), buf in zip(stages, saved):
        for k, v in buf.items():
            layer.buffers[k][...] = v
    return report
