"""Brute-force dense engine over truncated multimode Fock spaces.

States are dense complex tensors with one axis per mode (pure) or two axes
per mode (mixed).  Everything is exact linear algebra on the truncated
space: this engine is the oracle that the fast branch engine and every
closed-form expression are validated against, so the code favours
transparency over speed.  All values are immutable after construction and
all operations are pure functions.

Modes are always addressed by :class:`ModeLabel`, never by axis position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "ModeLabel",
    "TruncationPolicy",
    "FockRegister",
    "TruncationError",
    "MemoryBudgetError",
    "ModeMismatchError",
    "coherent_state",
    "create_op",
    "destroy_op",
    "number_op",
    "displacement_matrix",
    "squeeze_matrix",
    "beam_splitter_matrix",
    "apply_operator",
    "partial_trace",
    "inner_product",
]

#: soft cap on the number of complex entries a single dense tensor may hold
#: (6e7 entries ~ 1 GB); operations that would exceed it raise
#: :class:`MemoryBudgetError` instead of swapping the machine to death.
DEFAULT_BUDGET = 60_000_000


class TruncationError(RuntimeError):
    """Cutoff too small for the requested tolerance; carries the deficit."""

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


class MemoryBudgetError(RuntimeError):
    """A dense tensor would exceed the configured element budget."""


class ModeMismatchError(ValueError):
    """Operation referenced a mode the register does not hold."""


EARLY = "e"
LATE = "l"


@dataclass(frozen=True, order=True)
class ModeLabel:
    """Spatial label plus optional temporal bin ('e'/'l').

    temporal=None marks modes that are never split into time bins (e.g. the
    CV output mode).
    """

    spatial: str
    temporal: str | None = None

    def __post_init__(self):
        if self.temporal not in (None, EARLY, LATE):
            raise ValueError(f"temporal bin must be 'e', 'l' or None, got {self.temporal!r}")

    def __str__(self):
        return self.spatial if self.temporal is None else f"{self.spatial}:{self.temporal}"


@dataclass(frozen=True)
class TruncationPolicy:
    """Rule selecting per-mode Fock cutoffs.

    ``cutoff_for_amplitude`` keeps the Poisson tail of a coherent state of
    the given amplitude below ``eps_trunc`` for |beta| <= 3.  Source modes
    feeding beam splitters get ``source_pad`` extra levels so that every
    downstream amplitude up to the downstream cutoff is exact (photons
    removed by heralding otherwise nibble at the top level).
    """

    base_cutoff: int = 4
    eps_trunc: float = 1e-10
    detection_cutoff: int = 6
    source_pad: int = 4

    def cutoff_for_amplitude(self, amplitude: float) -> int:
        a = abs(amplitude)
        return int(math.ceil(a * a + 6.0 * a)) + self.base_cutoff

    def source_cutoff(self, amplitude: float) -> int:
        return self.cutoff_for_amplitude(amplitude) + self.source_pad

    def local_cutoff(self, amplitude: float, excitation: int = 0) -> int:
        """Cutoff for a single displaced-Fock factor D(beta)(a†)^k|0>."""
        return max(10, self.cutoff_for_amplitude(amplitude) + excitation)


# ---------------------------------------------------------------------------
# single-mode building blocks
# ---------------------------------------------------------------------------

def destroy_op(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


def create_op(dim: int) -> np.ndarray:
    return destroy_op(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_state(beta: complex, cutoff: int, eps_trunc: float | None = None) -> np.ndarray:
    """Closed-form coherent amplitudes c_k = e^{-|b|^2/2} b^k / sqrt(k!).

    Raises TruncationError (carrying the norm deficit) when ``eps_trunc`` is
    given and the neglected Poisson tail exceeds it.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    k = np.arange(cutoff + 1)
    # log-space magnitude to stay finite for large cutoff * amplitude
    absb = abs(beta)
    if absb == 0.0:
        amps = np.zeros(cutoff + 1, dtype=complex)
        amps[0] = 1.0
        return amps
    logmag = -absb * absb / 2.0 + k * math.log(absb) - 0.5 * np.array(
        [math.lgamma(n + 1.0) for n in k]
    )
    phase = np.exp(1j * k * np.angle(beta))
    amps = np.exp(logmag) * phase
    if eps_trunc is not None:
        deficit = 1.0 - float(np.vdot(amps, amps).real)
        if deficit > eps_trunc:
            raise TruncationError(
                f"coherent cutoff {cutoff} leaves norm deficit {deficit:.3e} > {eps_trunc:.1e}",
                deficit=deficit,
            )
    return amps


def displacement_matrix(beta: complex, dim: int) -> np.ndarray:
    """D(beta) = expm(beta a† − beta* a) on the truncated space."""
    adag = create_op(dim)
    return expm(beta * adag - np.conj(beta) * adag.conj().T)


def squeeze_matrix(zeta: complex, dim: int) -> np.ndarray:
    """S(zeta) = expm((zeta* a² − zeta a†²)/2) on the truncated space."""
    a = destroy_op(dim)
    adag = a.conj().T
    return expm(0.5 * (np.conj(zeta) * (a @ a) - zeta * (adag @ adag)))


def beam_splitter_matrix(r: float, t: float, dim1: int, dim2: int) -> np.ndarray:
    """Two-mode beam-splitter unitary with the convention

        out1 = t·in1 − r·in2,   out2 = r·in1 + t·in2

    for both coherent amplitudes and creation operators.  Returned as a
    (dim1*dim2, dim1*dim2) matrix in row-major (mode1, mode2) ordering.
    """
    if abs(r * r + t * t - 1.0) > 1e-12:
        raise ValueError(f"non-unitary beam splitter: r^2+t^2 = {r * r + t * t}")
    theta = math.atan2(r, t)
    a1 = np.kron(destroy_op(dim1), np.eye(dim2))
    a2 = np.kron(np.eye(dim1), destroy_op(dim2))
    gen = a1 @ a2.conj().T - a1.conj().T @ a2
    return expm(theta * gen)


# ---------------------------------------------------------------------------
# registers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FockRegister:
    """Dense multimode state with explicit per-mode cutoffs.

    kind 'pure': ``array`` has one axis per mode (shape = dims).
    kind 'mixed': ket axes then bra axes (shape = dims + dims).
    """

    modes: tuple[ModeLabel, ...]
    dims: tuple[int, ...]
    kind: str
    array: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("pure", "mixed"):
            raise ValueError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("duplicate mode labels in register")
        want = self.dims if self.kind == "pure" else self.dims + self.dims
        if self.array.shape != want:
            raise ValueError(f"array shape {self.array.shape} does not match dims {want}")

    # -- bookkeeping -------------------------------------------------------

    def axis(self, mode: ModeLabel) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ModeMismatchError(f"register has no mode {mode}") from None

    def dim(self, mode: ModeLabel) -> int:
        return self.dims[self.axis(mode)]

    @staticmethod
    def vacuum(modes, dims) -> "FockRegister":
        modes = tuple(modes)
        dims = tuple(int(d) for d in dims)
        _check_budget(dims)
        arr = np.zeros(dims, dtype=complex)
        arr[(0,) * len(dims)] = 1.0
        return FockRegister(modes, dims, "pure", arr)

    @staticmethod
    def from_product(modes, vectors) -> "FockRegister":
        """Pure product state from per-mode amplitude vectors."""
        modes = tuple(modes)
        vecs = [np.asarray(v, dtype=complex) for v in vectors]
        dims = tuple(len(v) for v in vecs)
        _check_budget(dims)
        arr = vecs[0]
        for v in vecs[1:]:
            arr = np.tensordot(arr, v, axes=0)
        return FockRegister(modes, dims, "pure", arr.reshape(dims))

    def to_mixed(self) -> "FockRegister":
        if self.kind == "mixed":
            return self
        _check_budget(self.dims + self.dims)
        rho = np.tensordot(self.array, self.array.conj(), axes=0)
        return FockRegister(self.modes, self.dims, "mixed", rho)

    def norm(self) -> float:
        if self.kind == "pure":
            return float(np.linalg.norm(self.array.ravel()))
        return float(abs(self.trace()))

    def trace(self) -> complex:
        if self.kind != "mixed":
            raise ValueError("trace is defined for mixed registers")
        n = len(self.dims)
        d = int(np.prod(self.dims))
        return complex(np.trace(self.array.reshape(d, d)))

    def normalized(self) -> "FockRegister":
        if self.kind == "pure":
            return FockRegister(self.modes, self.dims, "pure", self.array / self.norm())
        return FockRegister(self.modes, self.dims, "mixed", self.array / self.trace().real)

    def with_modes(self, labels, dims) -> "FockRegister":
        """Tensor fresh vacuum modes onto the register."""
        labels = tuple(labels)
        dims = tuple(int(d) for d in dims)
        if self.kind != "pure":
            raise ValueError("with_modes supports pure registers")
        _check_budget(self.dims + dims)
        vac = np.zeros(dims, dtype=complex)
        vac[(0,) * len(dims)] = 1.0
        arr = np.tensordot(self.array, vac, axes=0)
        return FockRegister(self.modes + labels, self.dims + dims, "pure", arr)

    def pad_mode(self, mode: ModeLabel, new_dim: int) -> "FockRegister":
        """Grow one mode's cutoff, zero-filling the new levels."""
        ax = self.axis(mode)
        old = self.dims[ax]
        if new_dim < old:
            raise ValueError("pad_mode cannot shrink a mode")
        if new_dim == old:
            return self
        dims = list(self.dims)
        dims[ax] = new_dim
        _check_budget(dims if self.kind == "pure" else tuple(dims) + tuple(dims))
        if self.kind == "pure":
            pad = [(0, 0)] * len(self.dims)
            pad[ax] = (0, new_dim - old)
            arr = np.pad(self.array, pad)
        else:
            n = len(self.dims)
            pad = [(0, 0)] * (2 * n)
            pad[ax] = (0, new_dim - old)
            pad[ax + n] = (0, new_dim - old)
            arr = np.pad(self.array, pad)
        return FockRegister(self.modes, tuple(dims), self.kind, arr)

    def truncate_mode(self, mode: ModeLabel, new_dim: int) -> "FockRegister":
        """Drop Fock levels >= new_dim on one mode (tail must be negligible;
        no renormalization is applied)."""
        ax = self.axis(mode)
        if new_dim >= self.dims[ax]:
            return self
        dims = list(self.dims)
        dims[ax] = new_dim
        sl = [slice(None)] * len(self.array.shape)
        sl[ax] = slice(0, new_dim)
        if self.kind == "mixed":
            sl[ax + len(self.dims)] = slice(0, new_dim)
        return FockRegister(self.modes, tuple(dims), self.kind, self.array[tuple(sl)].copy())

    def relabel(self, mapping: dict) -> "FockRegister":
        modes = tuple(mapping.get(m, m) for m in self.modes)
        return FockRegister(modes, self.dims, self.kind, self.array)


def _check_budget(dims, budget: int = DEFAULT_BUDGET):
    n = 1
    for d in dims:
        n *= int(d)
    if n > budget:
        raise MemoryBudgetError(
            f"dense tensor of {n} elements exceeds the budget of {budget}"
        )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def apply_operator(state: FockRegister, op: np.ndarray, targets) -> FockRegister:
    """Contract ``op`` onto the target modes, leaving the others untouched.

    ``op`` is a square matrix on the product space of the targets (row-major
    in the order given).  Mixed states get op · rho · op†.
    """
    targets = list(targets)
    axes = [state.axis(m) for m in targets]
    tdims = [state.dims[i] for i in axes]
    d = int(np.prod(tdims))
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match target dims {tuple(tdims)}")
    op_t = op.reshape(tdims + tdims)

    def contract(arr, conj_side=False):
        nt = len(axes)
        o = op_t.conj() if conj_side else op_t
        out = np.tensordot(o, arr, axes=(list(range(nt, 2 * nt)), axes))
        # tensordot puts the contracted (output) axes first; restore order
        return np.moveaxis(out, list(range(nt)), axes)

    if state.kind == "pure":
        return FockRegister(state.modes, state.dims, "pure", contract(state.array))
    n = len(state.dims)
    bra_axes = [a + n for a in axes]
    arr = np.tensordot(op_t, state.array, axes=(list(range(len(axes), 2 * len(axes))), axes))
    arr = np.moveaxis(arr, list(range(len(axes))), axes)
    arr = np.tensordot(op_t.conj(), arr, axes=(list(range(len(axes), 2 * len(axes))), bra_axes))
    arr = np.moveaxis(arr, list(range(len(axes))), bra_axes)
    return FockRegister(state.modes, state.dims, "mixed", arr)


def partial_trace(state: FockRegister, keep) -> FockRegister:
    """Trace out everything but ``keep`` (order follows the register)."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep list must not be empty")
    keep_axes = sorted(state.axis(m) for m in keep)
    modes = tuple(m for m in state.modes if m in keep)
    dims = tuple(state.dims[a] for a in keep_axes)
    kdim = int(np.prod(dims))

    if state.kind == "pure":
        # Gram contraction: never materializes the full density matrix
        _check_budget(dims + dims)
        n = len(state.dims)
        rest = [i for i in range(n) if i not in keep_axes]
        mat = np.transpose(state.array, keep_axes + rest).reshape(kdim, -1)
        rho = mat @ mat.conj().T
        return FockRegister(modes, dims, "mixed", rho.reshape(dims + dims))

    n = len(state.dims)
    arr = state.array
    traced = [i for i in range(n) if i not in keep_axes]
    for off, ax in enumerate(traced):
        arr = np.trace(arr, axis1=ax - off, axis2=ax - off + n - off)
        n -= 1
    return FockRegister(modes, dims, "mixed", arr)


def inner_product(a: FockRegister, b: FockRegister) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.kind != "pure" or b.kind != "pure":
        raise ValueError("inner_product expects pure registers")
    if a.modes != b.modes or a.dims != b.dims:
        raise ModeMismatchError("inner_product needs identical mode lists and cutoffs")
    return complex(np.vdot(a.array.ravel(), b.array.ravel()))


def assert_valid_density(state: FockRegister, herm_tol=1e-12, eig_floor=-1e-10):
    """Check Hermiticity / positivity of a mixed register (for tests)."""
    if state.kind != "mixed":
        raise ValueError("expects a mixed register")
    d = int(np.prod(state.dims))
    m = state.array.reshape(d, d)
    herm = np.max(np.abs(m - m.conj().T))
    if herm > herm_tol:
        raise AssertionError(f"density matrix not Hermitian: deviation {herm:.3e}")
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    if evals.min() < eig_floor:
        raise AssertionError(f"density matrix not PSD: min eigenvalue {evals.min():.3e}")
