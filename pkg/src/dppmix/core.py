"""Ground sets, bitmask subsets and the generic set-function interface.

Elements are identified by their 0-based index; a subset of an ``n``-element
ground set is an integer bitmask whose bit ``i`` is set iff element ``i`` is
in the subset.  Labels exist only for I/O.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_N = 64
ENUM_MAX_N = 20


class DppmixError(Exception):
    """Base class for errors raised by this package."""


class ModelError(DppmixError, ValueError):
    """A model or argument violates a documented invariant."""


class TooLargeError(DppmixError, ValueError):
    """An exhaustive computation was requested on a ground set above its cap."""


def check_enumerable(n: int, cap: int = ENUM_MAX_N, what: str = "enumeration") -> None:
    if n > cap:
        raise TooLargeError(f"{what} needs n <= {cap}, got n = {n}")


@dataclass(frozen=True)
class GroundSet:
    n: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ModelError(f"ground set size must be a positive integer, got {self.n!r}")
        if self.n > MAX_N:
            raise ModelError(f"ground sets are limited to n <= {MAX_N}, got {self.n}")
        labels = tuple(str(s) for s in self.labels) if self.labels else tuple(str(i) for i in range(self.n))
        if len(labels) != self.n:
            raise ModelError(f"expected {self.n} labels, got {len(labels)}")
        if len(set(labels)) != self.n:
            raise ModelError("labels must be distinct")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "labels", labels)

    def index(self, label: str | int) -> int:
        """Resolve a label (or an integer index) to an element index."""
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if not 0 <= label < self.n:
                raise ModelError(f"element index {label} out of range for n = {self.n}")
            return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ModelError(f"unknown element label {label!r}") from None

    @property
    def full(self) -> "Subset":
        return Subset((1 << self.n) - 1, self.n)

    @property
    def empty(self) -> "Subset":
        return Subset(0, self.n)


@dataclass(frozen=True)
class Subset:
    """A subset of ``{0, ..., n-1}`` stored as a bitmask."""

    bits: int
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_N:
            raise ModelError(f"subset width must be in [1, {MAX_N}], got {self.n}")
        if self.bits < 0 or self.bits >> self.n:
            raise ModelError(f"bitmask {self.bits:#x} has bits outside the low {self.n}")

    @classmethod
    def from_elements(cls, elements: Iterable[int], n: int) -> "Subset":
        bits = 0
        for i in elements:
            i = int(i)
            if not 0 <= i < n:
                raise ModelError(f"element {i} out of range for n = {n}")
            bits |= 1 << i
        return cls(bits, n)

    def __contains__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __iter__(self):
        return iter(self.elements())

    def elements(self) -> list[int]:
        return [i for i in range(self.n) if self.bits >> i & 1]

    def add(self, i: int) -> "Subset":
        return Subset(self.bits | (1 << i), self.n)

    def remove(self, i: int) -> "Subset":
        return Subset(self.bits & ~(1 << i), self.n)

    def to_array(self) -> np.ndarray:
        return np.array([self.bits >> i & 1 for i in range(self.n)], dtype=bool)

    def __repr__(self) -> str:
        return f"Subset({self.elements()}, n={self.n})"


def subset_from_index(x: int, ground: GroundSet | int) -> Subset:
    """Map ``x`` in ``[0, 2**n)`` to the subset whose indicator vector is the binary expansion of ``x``."""
    n = ground.n if isinstance(ground, GroundSet) else int(ground)
    if not 0 <= x < (1 << n):
        raise ModelError(f"subset index {x} out of range [0, 2**{n})")
    return Subset(int(x), n)


def index_from_subset(S: Subset) -> int:
    return S.bits


def masks_to_bits(masks: np.ndarray, n: int) -> np.ndarray:
    """Unpack integer masks (shape ``(N,)``) into an ``(N, n)`` boolean array."""
    masks = np.asarray(masks, dtype=np.uint64)
    return (masks[:, None] >> np.arange(n, dtype=np.uint64)[None, :] & np.uint64(1)).astype(bool)


def bits_to_masks(X: np.ndarray) -> np.ndarray:
    """Pack an ``(N, n)`` boolean array into ``uint64`` masks."""
    X = np.asarray(X, dtype=bool)
    weights = np.uint64(1) << np.arange(X.shape[1], dtype=np.uint64)
    return np.bitwise_or.reduce(np.where(X, weights[None, :], np.uint64(0)), axis=1)


def all_subsets(n: int) -> np.ndarray:
    """All ``2**n`` subsets as a boolean ``(2**n, n)`` array, row ``x`` being subset ``x``."""
    check_enumerable(n)
    return masks_to_bits(np.arange(1 << n, dtype=np.uint64), n)


def _as_mask(S, n: int) -> int:
    if isinstance(S, Subset):
        if S.n != n:
            raise ModelError(f"subset has width {S.n}, function has ground set size {n}")
        return S.bits
    if isinstance(S, (int, np.integer)) and not isinstance(S, bool):
        S = int(S)
        if S < 0 or S >> n:
            raise ModelError(f"bitmask {S:#x} invalid for n = {n}")
        return S
    return Subset.from_elements(S, n).bits


class SetFunction:
    """A real-valued function on the subsets of ``{0, ..., n-1}``.

    Subclasses implement :meth:`_value` on integer masks.  Families with
    closed forms also override :meth:`_gain` and :meth:`_hessian`; the
    default implementations are the finite differences.  ``gain_batch``
    and ``values_batch`` are vectorised entry points used by the sampler
    and by the enumeration routines.

    Attributes ``submodular`` and ``monotone`` are ``True``/``False`` when
    known structurally and ``None`` when unknown.
    """

    family = "generic"
    submodular: bool | None = None
    supermodular: bool | None = None
    monotone: bool | None = None

    def __init__(self, n: int):
        if not 1 <= n <= MAX_N:
            raise ModelError(f"ground set size must be in [1, {MAX_N}], got {n}")
        self.n = int(n)

    # -- to override -------------------------------------------------
    def _value(self, mask: int) -> float:
        raise NotImplementedError

    def _gain(self, i: int, mask: int) -> float:
        return self._value(mask | (1 << i)) - self._value(mask)

    def _hessian(self, i: int, j: int, mask: int) -> float:
        bi, bj = 1 << i, 1 << j
        v = self._value
        # fixed summation order keeps (i, j) and (j, i) bit-identical
        return (v(mask | bi | bj) + v(mask)) - (v(mask | bi) + v(mask | bj))

    # -- public ------------------------------------------------------
    def value(self, S) -> float:
        return float(self._value(_as_mask(S, self.n)))

    __call__ = value

    def gain(self, i: int, S, closed_form: bool = True) -> float:
        """Marginal gain ``f(S + i) - f(S)``; ``i`` must not be in ``S``."""
        mask = _as_mask(S, self.n)
        self._check_element(i)
        if mask >> i & 1:
            raise ModelError(f"element {i} already in the subset")
        if closed_form:
            return float(self._gain(i, mask))
        return float(self._value(mask | (1 << i)) - self._value(mask))

    def hessian(self, i: int, j: int, S, closed_form: bool = True) -> float:
        """Second difference ``f(S+i+j) - f(S+i) - f(S+j) + f(S)``."""
        mask = _as_mask(S, self.n)
        self._check_element(i)
        self._check_element(j)
        if i == j:
            raise ModelError("hessian entry needs i != j")
        if mask >> i & 1 or mask >> j & 1:
            raise ModelError(f"elements {i} and {j} must both be outside the subset")
        if closed_form:
            return float(self._hessian(i, j, mask))
        return float(SetFunction._hessian(self, i, j, mask))

    def values_batch(self, X: np.ndarray) -> np.ndarray:
        """Values on the rows of a boolean ``(N, n)`` array."""
        masks = bits_to_masks(X)
        return np.array([self._value(int(m)) for m in masks], dtype=float)

    def gain_batch(self, i: int, X: np.ndarray) -> np.ndarray:
        """Gains of ``i`` at each row of ``X`` with bit ``i`` cleared."""
        masks = bits_to_masks(X) & ~np.uint64(1 << i)
        uniq, inverse = np.unique(masks, return_inverse=True)
        vals = np.array([self._gain(i, int(m)) for m in uniq], dtype=float)
        return vals[inverse.reshape(-1)]

    def table(self) -> np.ndarray:
        """Values on all ``2**n`` subsets, indexed by bitmask."""
        check_enumerable(self.n, what="value table")
        out = np.empty(1 << self.n)
        chunk = 1 << 14
        for start in range(0, 1 << self.n, chunk):
            stop = min(start + chunk, 1 << self.n)
            X = masks_to_bits(np.arange(start, stop, dtype=np.uint64), self.n)
            out[start:stop] = self.values_batch(X)
        return out

    def _check_element(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise ModelError(f"element {i} out of range for n = {self.n}")


class TableFunction(SetFunction):
    """A set function given by its full value table (``n <= 20``)."""

    family = "table"

    def __init__(self, values: Sequence[float]):
        values = np.asarray(values, dtype=float)
        n = int(values.size).bit_length() - 1
        if n < 1 or values.size != 1 << n:
            raise ModelError("table length must be 2**n with n >= 1")
        check_enumerable(n, what="table function")
        if not np.all(np.isfinite(values)):
            raise ModelError("table values must be finite")
        super().__init__(n)
        self.values = values.copy()
        self.values.setflags(write=False)

    def _value(self, mask):
        return self.values[mask]

    def values_batch(self, X):
        return self.values[bits_to_masks(X).astype(np.int64)]

    def gain_batch(self, i, X):
        m = bits_to_masks(X).astype(np.int64) & ~(1 << i)
        return self.values[m | (1 << i)] - self.values[m]

    def table(self):
        return self.values.copy()


@dataclass(frozen=True)
class PointProcess:
    """The distribution ``mu(S) ~ exp(beta * f(S))`` on subsets of the ground set."""

    f: SetFunction
    beta: float
    ground: GroundSet = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.ground is None:
            object.__setattr__(self, "ground", GroundSet(self.f.n))
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ModelError(f"beta must be a finite positive real, got {self.beta!r}")
        if self.ground.n != self.f.n:
            raise ModelError(f"ground set has n = {self.ground.n}, function has n = {self.f.n}")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.f.n

    def with_beta(self, beta: float) -> "PointProcess":
        return PointProcess(self.f, beta, self.ground)


def evaluate(f: SetFunction, S) -> float:
    return f.value(S)


def marginal_gain(f: SetFunction, i: int, S, closed_form: bool = True) -> float:
    return f.gain(i, S, closed_form=closed_form)


def hessian_entry(f: SetFunction, i: int, j: int, S, closed_form: bool = True) -> float:
    return f.hessian(i, j, S, closed_form=closed_form)
