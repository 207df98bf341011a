"""Fast engine for states that are short superpositions of products of
displaced Fock excitations.

Every state the interferometric network produces is a sum of a few branches

    c * D(beta_1)...D(beta_M) * (a1†)^k1 ... (aM†)^kM |0>

(one displacement and one creation-monomial per mode).  Beam splitters map
displacement vectors and creation operators linearly, so evolution is exact:
a branch never truncates, it only splits when a creation monomial spreads
over the two output ports.  Truncation enters only when matrix elements are
evaluated, through a small local Fock expansion per mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock_dense import (
    FockRegister,
    ModeLabel,
    TruncationError,
    TruncationPolicy,
    _check_budget,
    displacement_matrix,
)

__all__ = [
    "Branch",
    "BranchState",
    "BranchLimitError",
    "apply_beam_splitter",
    "apply_displacement",
    "expectation",
    "to_dense",
    "branch_norm",
]

DEFAULT_BRANCH_LIMIT = 64


class BranchLimitError(RuntimeError):
    """Branch count overflowed the configured limit."""


@dataclass(frozen=True)
class Branch:
    """coefficient * D(disp) * prod_m (a_m†)^excite[m] |0>."""

    coeff: complex
    disp: tuple[complex, ...]
    excite: tuple[int, ...]


@dataclass(frozen=True)
class BranchState:
    modes: tuple[ModeLabel, ...]
    branches: tuple[Branch, ...]

    def __post_init__(self):
        for b in self.branches:
            if len(b.disp) != len(self.modes) or len(b.excite) != len(self.modes):
                raise ValueError("branch arity does not match mode list")

    def axis(self, mode: ModeLabel) -> int:
        return self.modes.index(mode)

    @staticmethod
    def vacuum(modes) -> "BranchState":
        modes = tuple(modes)
        z = (0.0 + 0.0j,) * len(modes)
        k = (0,) * len(modes)
        return BranchState(modes, (Branch(1.0 + 0.0j, z, k),))

    def with_modes(self, labels) -> "BranchState":
        labels = tuple(labels)
        pad_d = (0.0 + 0.0j,) * len(labels)
        pad_k = (0,) * len(labels)
        branches = tuple(
            Branch(b.coeff, b.disp + pad_d, b.excite + pad_k) for b in self.branches
        )
        return BranchState(self.modes + labels, branches)

    def relabel(self, mapping: dict) -> "BranchState":
        return BranchState(tuple(mapping.get(m, m) for m in self.modes), self.branches)

    def reorder(self, modes) -> "BranchState":
        modes = tuple(modes)
        perm = [self.modes.index(m) for m in modes]
        branches = tuple(
            Branch(b.coeff, tuple(b.disp[i] for i in perm), tuple(b.excite[i] for i in perm))
            for b in self.branches
        )
        return BranchState(modes, branches)


def apply_beam_splitter(
    state: BranchState,
    r: float,
    t: float,
    modes: tuple[ModeLabel, ModeLabel],
    max_branches: int = DEFAULT_BRANCH_LIMIT,
) -> BranchState:
    """Beam splitter with out1 = t·in1 − r·in2, out2 = r·in1 + t·in2.

    Displacements and creation operators transform by the same matrix; a
    creation monomial (a1†)^k1 (a2†)^k2 expands binomially over the output
    ports, splitting the branch into (k1+1)(k2+1) monomial branches.
    """
    if abs(r * r + t * t - 1.0) > 1e-12:
        raise ValueError(f"non-unitary beam splitter: r^2+t^2 = {r * r + t * t}")
    i1, i2 = state.axis(modes[0]), state.axis(modes[1])
    out = []
    for b in state.branches:
        b1, b2 = b.disp[i1], b.disp[i2]
        disp = list(b.disp)
        disp[i1] = t * b1 - r * b2
        disp[i2] = r * b1 + t * b2
        disp = tuple(disp)
        k1, k2 = b.excite[i1], b.excite[i2]
        # (t a1† + r a2†)^k1 * (−r a1† + t a2†)^k2
        for i in range(k1 + 1):
            c1 = math.comb(k1, i) * (t ** i) * (r ** (k1 - i))
            for j in range(k2 + 1):
                c2 = math.comb(k2, j) * ((-r) ** j) * (t ** (k2 - j))
                exc = list(b.excite)
                exc[i1] = i + j
                exc[i2] = (k1 - i) + (k2 - j)
                coeff = b.coeff * c1 * c2
                if coeff != 0.0:
                    out.append(Branch(coeff, disp, tuple(exc)))
    if len(out) > max_branches:
        raise BranchLimitError(
            f"beam splitter expanded to {len(out)} branches (limit {max_branches})"
        )
    return BranchState(state.modes, tuple(out))


def apply_displacement(state: BranchState, mode: ModeLabel, gamma: complex) -> BranchState:
    """Left-multiply D(gamma): D(g)D(b) = exp((g b* − g* b)/2) D(g+b)."""
    ax = state.axis(mode)
    out = []
    for b in state.branches:
        beta = b.disp[ax]
        phase = np.exp((gamma * np.conj(beta) - np.conj(gamma) * beta) / 2.0)
        disp = list(b.disp)
        disp[ax] = beta + gamma
        out.append(Branch(b.coeff * phase, tuple(disp), b.excite))
    return BranchState(state.modes, tuple(out))


@lru_cache(maxsize=4096)
def _displacement_cached(re: float, im: float, dim: int) -> np.ndarray:
    m = displacement_matrix(complex(re, im), dim)
    m.setflags(write=False)
    return m


def local_vector(beta: complex, k: int, dim: int) -> np.ndarray:
    """Fock expansion of D(beta) (a†)^k |0> on ``dim`` levels."""
    if k >= dim:
        raise ValueError("local dimension too small for the excitation order")
    d = _displacement_cached(float(np.real(beta)), float(np.imag(beta)), dim)
    return d[:, k] * math.sqrt(math.factorial(k))


@dataclass
class ExpectationResult:
    """Unnormalized herald data: probability plus conditional operator."""

    probability: float
    kept_modes: tuple[ModeLabel, ...]
    kept_dims: tuple[int, ...]
    operator: np.ndarray | None = field(default=None, repr=False)


def _mode_vectors(state, ax, dim, policy):
    """Local vectors for every branch on one mode, plus a truncation check."""
    vecs = np.zeros((len(state.branches), dim), dtype=complex)
    for bi, b in enumerate(state.branches):
        v = local_vector(b.disp[ax], b.excite[ax], dim)
        deficit = abs(1.0 - float(np.vdot(v, v).real) / math.factorial(b.excite[ax]))
        if deficit > max(policy.eps_trunc, 1e-12) * 10.0:
            raise TruncationError(
                f"local expansion deficit {deficit:.3e} on mode axis {ax}", deficit=deficit
            )
        vecs[bi] = v
    return vecs


def expectation(
    state: BranchState,
    assignments: dict,
    keep,
    policy: TruncationPolicy = TruncationPolicy(),
    keep_dims: dict | None = None,
    want_operator: bool = True,
) -> ExpectationResult:
    """Probability Tr[Pi rho] and unnormalized conditional on ``keep``.

    ``assignments`` maps non-kept modes to POVM elements (anything with a
    .matrix(dim) method); missing or None entries mean identity.  Matrix
    elements are evaluated by local dense expansion per mode, branch pair by
    branch pair.
    """
    keep = tuple(keep)
    nb = len(state.branches)
    coeffs = np.array([b.coeff for b in state.branches])
    w = np.outer(coeffs, coeffs.conj())  # w[b, b'] = c_b * conj(c_b')
    for ax, mode in enumerate(state.modes):
        if mode in keep:
            continue
        dim = max(
            policy.local_cutoff(abs(b.disp[ax]), b.excite[ax]) + 1 for b in state.branches
        )
        vecs = _mode_vectors(state, ax, dim, policy)
        element = assignments.get(mode)
        if element is None:
            gram = vecs @ vecs.conj().T  # gram[b, b'] = <v_b'|v_b>
        else:
            mat = element.matrix(dim)
            gram = vecs @ mat.T @ vecs.conj().T  # gram[b, b'] = <v_b'|M|v_b>
        w = w * gram
    if not keep:
        return ExpectationResult(float(np.sum(w).real), (), ())

    keep_dims = dict(keep_dims or {})
    dims = []
    kept_vecs = []
    for mode in keep:
        ax = state.axis(mode)
        dim = keep_dims.get(mode) or max(
            policy.local_cutoff(abs(b.disp[ax]), b.excite[ax]) + 1 for b in state.branches
        )
        dims.append(dim)
        kept_vecs.append(_mode_vectors(state, ax, dim, policy))
    big = kept_vecs[0]
    for vv in kept_vecs[1:]:
        big = np.einsum("bi,bj->bij", big, vv).reshape(nb, -1)
    prob = float(np.einsum("bc,bk,ck->", w, big, big.conj()).real)
    result = ExpectationResult(prob, keep, tuple(dims))
    if want_operator:
        result.operator = np.einsum("bc,bk,cl->kl", w, big, big.conj())
    return result


def branch_norm(state: BranchState, policy: TruncationPolicy = TruncationPolicy()) -> float:
    return math.sqrt(max(0.0, expectation(state, {}, (), policy).probability))


def to_dense(
    state: BranchState,
    policy: TruncationPolicy = TruncationPolicy(),
    dims: dict | None = None,
) -> FockRegister:
    """Expand the branch sum into a dense pure register."""
    dims = dict(dims or {})
    mode_dims = []
    for ax, mode in enumerate(state.modes):
        d = dims.get(mode) or max(
            policy.local_cutoff(abs(b.disp[ax]), b.excite[ax]) + 1 for b in state.branches
        )
        mode_dims.append(int(d))
    _check_budget(mode_dims)
    arr = np.zeros(tuple(mode_dims), dtype=complex)
    for b in state.branches:
        term = np.array([b.coeff], dtype=complex).reshape((1,) * len(mode_dims))
        for ax in range(len(state.modes)):
            v = local_vector(b.disp[ax], b.excite[ax], mode_dims[ax])
            shape = [1] * len(mode_dims)
            shape[ax] = mode_dims[ax]
            term = term * v.reshape(shape)
        arr = arr + term
    return FockRegister(tuple(state.modes), tuple(mode_dims), "pure", arr)
