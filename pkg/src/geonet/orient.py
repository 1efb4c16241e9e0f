"""Exact orientation transforms: the 8-element planar group, the 3D
flip-then-rotate enumeration and the 16 serial (planar x time) cases.

Matrices act on column vectors of centered pixel coordinates ``(x, y)``
with ``x`` along columns and ``y`` along rows (image convention, y down).
``compose_2d(a, b)`` applies ``b`` first. A row-vector convention
``p' = p @ M`` corresponds to using ``M.T`` here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "OrientTransform2D",
    "OrientTransform3D",
    "SerialTransform",
    "enumerate_2d",
    "compose_2d",
    "inverse_2d",
    "composition_table",
    "enumerate_3d",
    "Enumeration3D",
    "enumerate_serial",
    "inverse_serial",
    "N_PLANAR",
    "N_SERIAL",
]

# Listing order is the label order.
_SET_T = (
    ((1, 0), (0, 1)),
    ((0, 1), (-1, 0)),
    ((-1, 0), (0, -1)),
    ((0, -1), (1, 0)),
    ((-1, 0), (0, 1)),
    ((0, -1), (-1, 0)),
    ((1, 0), (0, -1)),
    ((0, 1), (1, 0)),
)
_NAMES_2D = (
    "identity",
    "rot90",
    "rot180",
    "rot270",
    "flip_x",
    "anti_transpose",
    "flip_y",
    "transpose",
)

N_PLANAR = len(_SET_T)
N_SERIAL = 2 * N_PLANAR


def _frozen(rows) -> np.ndarray:
    m = np.array(rows, dtype=np.int64)
    m.setflags(write=False)
    return m


def _det(m: np.ndarray) -> int:
    # exact integer determinant for 2x2 / 3x3
    if m.shape == (2, 2):
        return int(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    a = m
    return int(
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


@dataclass(frozen=True, eq=False)
class OrientTransform2D:
    label: int
    matrix: np.ndarray = field(repr=False)
    name: str = ""

    @property
    def det(self) -> int:
        return _det(self.matrix)

    @property
    def swaps_axes(self) -> bool:
        return self.matrix[0, 0] == 0

    def __eq__(self, other):
        if not isinstance(other, OrientTransform2D):
            return NotImplemented
        return self.label == other.label

    def __hash__(self):
        return hash(("2d", self.label))

    def __repr__(self):
        return f"OrientTransform2D({self.label}, {self.name}, {self.matrix.tolist()})"


@dataclass(frozen=True, eq=False)
class OrientTransform3D:
    label: int
    matrix: np.ndarray = field(repr=False)
    flip_plane: str = ""
    rotation: int = 0

    @property
    def det(self) -> int:
        return _det(self.matrix)

    def __eq__(self, other):
        if not isinstance(other, OrientTransform3D):
            return NotImplemented
        return self.label == other.label

    def __hash__(self):
        return hash(("3d", self.label))

    def __repr__(self):
        return f"OrientTransform3D({self.label}, {self.matrix.tolist()})"


@dataclass(frozen=True)
class SerialTransform:
    planar: OrientTransform2D
    time_reversed: bool

    @property
    def label(self) -> int:
        return self.planar.label + N_PLANAR * int(self.time_reversed)

    @classmethod
    def from_label(cls, label: int) -> "SerialTransform":
        label = _check_label(label, N_SERIAL)
        return cls(enumerate_2d()[label % N_PLANAR], label >= N_PLANAR)


def _check_label(label, n: int) -> int:
    if isinstance(label, (bool, np.bool_)) or not isinstance(label, (int, np.integer)):
        raise TypeError(f"label must be an integer, got {label!r}")
    if not 0 <= label < n:
        raise ValueError(f"label {label} outside 0..{n - 1}")
    return int(label)


@lru_cache(maxsize=None)
def _planar() -> tuple[OrientTransform2D, ...]:
    return tuple(
        OrientTransform2D(i, _frozen(m), _NAMES_2D[i]) for i, m in enumerate(_SET_T)
    )


def enumerate_2d() -> list[OrientTransform2D]:
    """The 8 planar transforms in label order 0..7."""
    return list(_planar())


def get_2d(label: int) -> OrientTransform2D:
    return _planar()[_check_label(label, N_PLANAR)]


def _lookup_2d(matrix: np.ndarray) -> OrientTransform2D:
    for t in _planar():
        if np.array_equal(t.matrix, matrix):
            return t
    raise AssertionError(f"matrix {matrix.tolist()} is not in the planar set")


def compose_2d(a: OrientTransform2D, b: OrientTransform2D) -> OrientTransform2D:
    """Element equal to ``a.matrix @ b.matrix``; ``b`` is applied first."""
    return _lookup_2d(a.matrix @ b.matrix)


def inverse_2d(a: OrientTransform2D) -> OrientTransform2D:
    # orthogonal integer matrix: inverse is the transpose
    return _lookup_2d(a.matrix.T)


def composition_table() -> np.ndarray:
    """8x8 table of labels, ``table[i, j] = compose_2d(t_i, t_j).label``."""
    ts = _planar()
    return np.array([[compose_2d(a, b).label for b in ts] for a in ts], dtype=np.int64)


# --- 3D -------------------------------------------------------------------

_FLIPS = (
    ("xOy", ((1, 0, 0), (0, 1, 0), (0, 0, -1))),
    ("xOz", ((1, 0, 0), (0, -1, 0), (0, 0, 1))),
    ("yOz", ((-1, 0, 0), (0, 1, 0), (0, 0, 1))),
)
# rotations carrying the +z face onto each of the six cube faces
_FACE_ROTATIONS = (
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),  # identity
    ((1, 0, 0), (0, 0, -1), (0, 1, 0)),  # Rx(90)
    ((1, 0, 0), (0, -1, 0), (0, 0, -1)),  # Rx(180)
    ((1, 0, 0), (0, 0, 1), (0, -1, 0)),  # Rx(270)
    ((0, 0, 1), (0, 1, 0), (-1, 0, 0)),  # Ry(90)
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),  # Ry(270)
)


@dataclass(frozen=True)
class Enumeration3D:
    transforms: tuple[OrientTransform3D, ...]
    candidate_count: int
    duplicates: tuple[tuple[int, int], ...]  # (candidate index, index of first equal candidate)

    @property
    def distinct_count(self) -> int:
        return len(self.transforms)


def enumerate_3d_candidates() -> list[tuple[str, int, np.ndarray]]:
    """Raw ``R_k @ F_p`` products in construction order (plane-major)."""
    out = []
    for plane, f in _FLIPS:
        f = np.array(f, dtype=np.int64)
        for k, r in enumerate(_FACE_ROTATIONS):
            out.append((plane, k, np.array(r, dtype=np.int64) @ f))
    return out


@lru_cache(maxsize=None)
def enumerate_3d() -> Enumeration3D:
    """De-duplicated flip-then-rotate products, labelled in construction order.

    Duplicates are dropped rather than padded, so ``distinct_count`` may be
    below ``candidate_count``.
    """
    kept: list[OrientTransform3D] = []
    first_index: list[int] = []
    dups = []
    for i, (plane, k, m) in enumerate(enumerate_3d_candidates()):
        for t, j in zip(kept, first_index):
            if np.array_equal(t.matrix, m):
                dups.append((i, j))
                break
        else:
            m.setflags(write=False)
            kept.append(OrientTransform3D(len(kept), m, plane, k))
            first_index.append(i)
    return Enumeration3D(tuple(kept), 18, tuple(dups))


# --- serial ---------------------------------------------------------------


def enumerate_serial() -> list[SerialTransform]:
    """Labels 0..7 keep frame order, 8..15 reverse it."""
    return [SerialTransform(t, rev) for rev in (False, True) for t in _planar()]


def inverse_serial(st: SerialTransform) -> SerialTransform:
    # planar action and frame reversal commute; reversal is an involution
    return SerialTransform(inverse_2d(st.planar), st.time_reversed)
