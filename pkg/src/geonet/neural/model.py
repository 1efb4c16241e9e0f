"""GeoNet: a small NIN-style ConvNet for the 8-way orientation task."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional import softmax, softmax_xent
from .layers import BatchNorm2d, Conv2d, GlobalAvgPool, Layer, Linear, MaxPool2x2, ReLU

# conv:<out>:<kernel>[:bn][:pool] blocks separated by ';', then gap and fc:<classes>
DEFAULT_ARCH = "conv:32:3:bn:pool;conv:64:3:bn:pool;conv:128:3;conv:128:1:pool;gap;fc:8"
SIX_LAYER_ARCH = "conv:32:3:bn:pool;conv:64:3:bn:pool;conv:128:3;conv:128:3;conv:128:1:pool;gap;fc:8"


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int
    bn: bool = False
    pool: bool = False


def parse_arch(arch: str) -> tuple[list[ConvSpec], int]:
    """Parse an architecture string into conv blocks and the class count."""
    convs, n_classes, seen_gap = [], None, False
    for token in (t.strip() for t in arch.split(";") if t.strip()):
        parts = token.split(":")
        kind = parts[0]
        try:
            if kind == "conv":
                if seen_gap:
                    raise ValueError("conv after gap")
                flags = set(parts[3:])
                if flags - {"bn", "pool"}:
                    raise ValueError(f"unknown flags {sorted(flags - {'bn', 'pool'})}")
                convs.append(ConvSpec(int(parts[1]), int(parts[2]), "bn" in flags, "pool" in flags))
            elif kind == "gap" and len(parts) == 1:
                seen_gap = True
            elif kind == "fc" and seen_gap and n_classes is None:
                n_classes = int(parts[1])
            else:
                raise ValueError("unexpected token")
        except (IndexError, ValueError) as e:
            raise ValueError(f"bad architecture token {token!r}: {e}") from None
    if not convs or n_classes is None:
        raise ValueError(f"architecture {arch!r} needs conv blocks, gap and fc")
    return convs, n_classes


class GeoNet:
    """Sequential ConvNet over ``(N, 1, H, W)`` inputs.

    Parameters
    ----------
    arch : str
        Architecture string, see ``DEFAULT_ARCH``.
    input_size : int
        Side of the square network input; checked on every forward pass.
    seed : int
        Seed for Kaiming-uniform weight initialization.
    dtype : numpy dtype
        float32 for training, float64 for gradient checks.
    """

    def __init__(self, arch: str = DEFAULT_ARCH, input_size: int = 64, seed: int = 0,
                 dtype=np.float32, in_channels: int = 1):
        self.arch = arch
        self.input_size = int(input_size)
        self.in_channels = in_channels
        self.dtype = np.dtype(dtype)
        convs, self.n_classes = parse_arch(arch)
        rng = np.random.default_rng(seed)
        self.layers: list[tuple[str, Layer]] = []
        c = in_channels
        for i, spec in enumerate(convs, 1):
            # a bias in front of batch norm is cancelled by the mean subtraction
            self.layers.append((f"conv{i}", Conv2d(
                c, spec.out_channels, spec.kernel, bias=not spec.bn, rng=rng, dtype=dtype
            )))
            if spec.bn:
                self.layers.append((f"bn{i}", BatchNorm2d(spec.out_channels, dtype=dtype)))
            self.layers.append((f"relu{i}", ReLU()))
            if spec.pool:
                self.layers.append((f"pool{i}", MaxPool2x2()))
            c = spec.out_channels
        self.layers.append(("gap", GlobalAvgPool()))
        self.layers.append(("fc", Linear(c, self.n_classes, rng=rng, dtype=dtype)))
        self.check_shapes()

    def check_shapes(self):
        shape = (self.in_channels, self.input_size, self.input_size)
        for name, layer in self.layers:
            try:
                shape = layer.output_shape(shape)
            except ValueError as e:
                raise ValueError(f"layer {name}: {e}") from None
        if shape != (self.n_classes,):
            raise ValueError(f"final output {shape} != ({self.n_classes},)")
        return shape

    def forward(self, x, training: bool = False):
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1:] != (self.in_channels, self.input_size, self.input_size):
            raise ValueError(
                f"expected input (N, {self.in_channels}, {self.input_size}, {self.input_size}), "
                f"got {x.shape}"
            )
        x = x.astype(self.dtype, copy=False)
        for _, layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad_logits):
        g = grad_logits
        for _, layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def loss_and_grad(self, x, labels):
        """Training-mode forward + backward. Returns ``(loss, logits)``."""
        logits = self.forward(x, training=True)
        loss, g = softmax_xent(logits, labels)
        self.backward(g.astype(self.dtype, copy=False))
        return loss, logits

    def predict_proba(self, x):
        return softmax(self.forward(x, training=False).astype(np.float64))

    # parameters ---------------------------------------------------------

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": v for n, l in self.layers for k, v in l.params.items()}

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": l.grads[k] for n, l in self.layers for k in l.params}

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": v for n, l in self.layers for k, v in l.buffers.items()}

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameters then buffers, in layer order."""
        out = {}
        for n, l in self.layers:
            for k, v in l.params.items():
                out[f"{n}.{k}"] = v
            for k, v in l.buffers.items():
                out[f"{n}.{k}"] = v
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        missing = own.keys() - state.keys()
        extra = {k for k in state.keys() - own.keys() if not k.startswith("meta.")}
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for n, l in self.layers:
            for d in (l.params, l.buffers):
                for k in d:
                    v = np.asarray(state[f"{n}.{k}"])
                    if v.shape != d[k].shape:
                        raise ValueError(f"{n}.{k}: shape {v.shape} != {d[k].shape}")
                    d[k] = v.astype(self.dtype).copy()

    def astype(self, dtype) -> "GeoNet":
        """Copy of the model in another float dtype."""
        other = GeoNet(self.arch, self.input_size, dtype=dtype, in_channels=self.in_channels)
        other.load_state_dict(self.state_dict())
        return other

    @property
    def n_weight_layers(self) -> int:
        return sum(isinstance(l, (Conv2d, Linear)) for _, l in self.layers)
