"""Tensor-product states of small discrete systems.

Amplitudes are stored densely and indexed row-major over ``dims``: the last
subsystem varies fastest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import NotUnitary, UnknownLabel

MAX_DIM = 1 << 24
SMILE, FROWN = "smile", "frown"


@dataclass(frozen=True, eq=False)
class TensorState:
    dims: tuple
    labels: tuple
    amplitudes: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(tuple(str(s) for s in lab) for lab in self.labels)
        if len(labels) != len(dims) or any(len(l) != d for l, d in zip(labels, dims)):
            raise ValueError("labels must list one name per basis state of every subsystem")
        total = int(np.prod(dims))
        if total > MAX_DIM:
            raise ValueError(f"dimension {total} exceeds the dense-storage limit {MAX_DIM}")
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        if amps.size != total:
            raise ValueError(f"{amps.size} amplitudes for total dimension {total}")
        amps.setflags(write=False)
        names = tuple(self.names) if self.names is not None else tuple(f"s{i}" for i in range(len(dims)))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_terms(cls, dims, labels, terms: dict, names=None, normalize=True) -> "TensorState":
        """Build from ``{(label, label, ...): amplitude}``."""
        state = cls(dims, labels, np.zeros(int(np.prod(dims)), dtype=complex), names)
        amps = np.zeros(int(np.prod(state.dims)), dtype=complex)
        for key, a in terms.items():
            amps[state.index(key)] += a
        out = state.with_amplitudes(amps)
        return out.normalize() if normalize else out

    def with_amplitudes(self, amps) -> "TensorState":
        return TensorState(self.dims, self.labels, amps, self.names)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "TensorState":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return self.with_amplitudes(self.amplitudes / n)

    def subsystem(self, key) -> int:
        if isinstance(key, str):
            if key not in self.names:
                raise UnknownLabel(f"no subsystem named {key!r}")
            return self.names.index(key)
        return int(key)

    def index(self, key) -> int:
        """Flat index of a basis ket given as a tuple of labels."""
        key = tuple(key)
        if len(key) != len(self.dims):
            raise UnknownLabel(f"ket {key} has {len(key)} labels, state has {len(self.dims)} subsystems")
        multi = []
        for lab, names in zip(key, self.labels):
            if str(lab) not in names:
                raise UnknownLabel(f"label {lab!r} not in {names}")
            multi.append(names.index(str(lab)))
        return int(np.ravel_multi_index(multi, self.dims))

    def amplitude(self, key) -> complex:
        return complex(self.amplitudes[self.index(key)])

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginal(self, sub) -> dict:
        """Reduced probabilities of one subsystem's basis labels."""
        k = self.subsystem(sub)
        p = np.abs(self.tensor()) ** 2
        axes = tuple(i for i in range(len(self.dims)) if i != k)
        probs = p.sum(axis=axes) / p.sum()
        return dict(zip(self.labels[k], probs.tolist()))

    def inner(self, other: "TensorState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def kets(self, tol: float = 0.0):
        """Yield ``(labels, amplitude)`` for each component above ``tol``."""
        for flat in np.flatnonzero(np.abs(self.amplitudes) > tol):
            multi = np.unravel_index(flat, self.dims)
            yield tuple(self.labels[i][m] for i, m in enumerate(multi)), complex(self.amplitudes[flat])

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "labels": [list(l) for l in self.labels],
            "names": list(self.names),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TensorState":
        amps = [complex(re, im) for re, im in d["amplitudes"]]
        return cls(d["dims"], d["labels"], amps, d.get("names"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def kron_states(*states: TensorState) -> TensorState:
    amps = reduce(np.kron, [s.amplitudes for s in states])
    return TensorState(sum((s.dims for s in states), ()), sum((s.labels for s in states), ()),
                       amps, sum((s.names for s in states), ()))


# -- basis rotations -----------------------------------------------------

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def polarizer_basis(theta: float) -> np.ndarray:
    """Columns ``cos t H + sin t V`` and ``-sin t H + cos t V``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class BasisRotation:
    """New basis for one subsystem or a contiguous block of subsystems.

    Column ``j`` of ``matrix`` is new basis vector ``j`` written in the old
    basis. Rotating a block of several subsystems merges them into one
    subsystem labelled ``labels``.
    """

    subsystems: tuple
    matrix: np.ndarray
    labels: tuple | None = None
    name: str | None = None

    def __post_init__(self):
        subs = (self.subsystems,) if isinstance(self.subsystems, (int, str)) else tuple(self.subsystems)
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NotUnitary("rotation matrix must be square")
        err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if err > 1e-12:
            raise NotUnitary(f"U^dagger U deviates from identity by {err:.3g}")
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "matrix", m)

    def inverse(self, old_labels=None, name=None) -> "BasisRotation":
        return BasisRotation(self.subsystems, self.matrix.conj().T, old_labels, name)


def rotate_basis(state: TensorState, r: BasisRotation) -> TensorState:
    """Re-express ``state`` in the rotated basis; the physical state is unchanged."""
    subs = [state.subsystem(s) for s in r.subsystems]
    if subs != list(range(subs[0], subs[0] + len(subs))):
        raise ValueError("rotated subsystems must be contiguous and in order")
    block = int(np.prod([state.dims[s] for s in subs]))
    if r.matrix.shape[0] != block:
        raise ValueError(f"rotation of size {r.matrix.shape[0]} on a block of dimension {block}")
    lo, hi = subs[0], subs[-1] + 1
    before = int(np.prod(state.dims[:lo]))
    after = int(np.prod(state.dims[hi:]))
    t = state.amplitudes.reshape(before, block, after)
    t = np.einsum("ji,ajb->aib", r.matrix.conj(), t)
    if len(subs) == 1:
        dims = state.dims
        names = state.names
        new = tuple(r.labels) if r.labels is not None else state.labels[lo]
        labels = state.labels[:lo] + (new,) + state.labels[hi:]
    else:
        new = tuple(r.labels) if r.labels is not None else tuple(f"b{i}" for i in range(block))
        dims = state.dims[:lo] + (block,) + state.dims[hi:]
        labels = state.labels[:lo] + (new,) + state.labels[hi:]
        names = state.names[:lo] + (r.name or "+".join(state.names[lo:hi]),) + state.names[hi:]
    return TensorState(dims, labels, t.ravel(), names)


# -- the constructions -----------------------------------------------------

ELECTRON = ("'", "''")


def _pair(amplitudes):
    a, b = (complex(z) for z in amplitudes)
    n = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
    if n == 0:
        raise ValueError("outcome amplitudes are both zero")
    return a / n, b / n


def build_measurement_chain(outcome_amplitudes) -> TensorState:
    """``a |',g,e> + b |'',e,g>``: electron 1 recorded by two anti-correlated pointers."""
    a, b = _pair(outcome_amplitudes)
    return TensorState.from_terms(
        (2, 2, 2), (ELECTRON, ("g", "e"), ("g", "e")),
        {("'", "g", "e"): a, ("''", "e", "g"): b},
        names=("electron1", "pointer2", "pointer3"), normalize=False)


def observer_state(outcome_amplitudes=(1, 1), observers=("Me",)) -> TensorState:
    """Electron branches entangled with one or more observers' awareness states.

    One observer gives ``a |',smile> + b |'',frown>``; two give the
    agreeing ``a |',smile,smile> + b |'',frown,frown>``.
    """
    a, b = _pair(outcome_amplitudes)
    k = len(observers)
    dims = (2,) + (2,) * k
    labels = (ELECTRON,) + ((SMILE, FROWN),) * k
    return TensorState.from_terms(
        dims, labels, {("'",) + (SMILE,) * k: a, ("''",) + (FROWN,) * k: b},
        names=("electron1",) + tuple(observers), normalize=False)


def cat_rotation(subsystem) -> BasisRotation:
    """Hadamard to the cat basis ``(smile +- frown)/sqrt 2`` on one observer."""
    return BasisRotation(subsystem, HADAMARD, ("cat+", "cat-"))


def joint_cat_rotation(first_subsystem: int) -> BasisRotation:
    """Cat basis on the agreeing two-observer pair ``(ss +- ff)/sqrt 2``, plus ``sf``, ``fs``."""
    s = 1 / np.sqrt(2)
    # block order: (smile,smile), (smile,frown), (frown,smile), (frown,frown)
    m = np.array([[s, s, 0, 0],
                  [0, 0, 1, 0],
                  [0, 0, 0, 1],
                  [s, -s, 0, 0]])
    return BasisRotation((first_subsystem, first_subsystem + 1), m,
                         ("cat+", "cat-", "smile,frown", "frown,smile"))


def measure_of_existence(state: TensorState, branch) -> float:
    """Squared-amplitude weight of the basis kets matching ``branch``.

    ``branch`` maps subsystem (index or name) to a label or a set of labels;
    a tuple gives one entry per subsystem, with ``None`` as a wildcard.
    """
    if not isinstance(branch, dict):
        branch = {i: lab for i, lab in enumerate(branch) if lab is not None}
    mask = np.ones(state.dims, dtype=bool)
    for sub, allowed in branch.items():
        k = state.subsystem(sub)
        allowed = {allowed} if isinstance(allowed, str) else set(allowed)
        missing = allowed - set(state.labels[k])
        if missing:
            raise UnknownLabel(f"labels {sorted(missing)} not in subsystem {state.names[k]}")
        sel = np.array([lab in allowed for lab in state.labels[k]])
        shape = [1] * len(state.dims)
        shape[k] = state.dims[k]
        mask &= sel.reshape(shape)
    p = state.probabilities().reshape(state.dims)
    return float(p[mask].sum() / p.sum())


def schmidt(state: TensorState, side) -> np.ndarray:
    """Schmidt coefficients across the cut ``side | rest`` (``side`` must be a leading block)."""
    side = sorted(state.subsystem(s) for s in side)
    if side != list(range(len(side))):
        raise ValueError("the cut must separate a leading block of subsystems")
    left = int(np.prod(state.dims[:len(side)]))
    m = state.normalize().amplitudes.reshape(left, -1)
    return np.linalg.svd(m, compute_uv=False)


def entanglement_entropy(coefficients: np.ndarray) -> float:
    p = np.asarray(coefficients) ** 2
    p = p[p > 1e-300]
    return float(-(p * np.log(p)).sum())


def factorization_ambiguity_demo(state: TensorState, side=None, rewrite: BasisRotation | None = None,
                                 tol: float = 1e-12) -> dict:
    """Schmidt structure across a cut and the cross terms of a product-looking rewrite.

    ``side`` defaults to every subsystem but the last. The rewrite rotates the
    last subsystem (default: cat basis) and splits the state into one term
    per rotated basis vector. Each term looks like a product across the cut,
    but expanding it back in the original basis produces components absent
    from the state; they cancel only in the sum.
    """
    side = list(range(len(state.dims) - 1)) if side is None else side
    coeffs = schmidt(state, side)
    rank = int((coeffs > tol).sum())
    last = len(state.dims) - 1
    rw = rewrite or BasisRotation(last, HADAMARD, ("cat+", "cat-"))
    rotated = rotate_basis(state, rw)
    k = rotated.subsystem(rw.subsystems[0])
    total = state.normalize().amplitudes
    in_support = np.abs(total) > tol
    terms = []
    cross_weights = []
    for j, lab in enumerate(rotated.labels[k]):
        mask = np.zeros(rotated.dims, dtype=bool)
        idx = [slice(None)] * len(rotated.dims)
        idx[k] = j
        mask[tuple(idx)] = True
        term = rotated.with_amplitudes(np.where(mask.ravel(), rotated.amplitudes, 0))
        back = rotate_basis(term, rw.inverse(state.labels[k])).amplitudes / state.norm()
        terms.append(back)
        cross_weights.append(float(np.sum(np.abs(back[~in_support]) ** 2)))
    residual = np.abs(np.sum(terms, axis=0)[~in_support])
    return {
        "schmidt_coefficients": coeffs.tolist(),
        "schmidt_rank": rank,
        "entropy": entanglement_entropy(coeffs),
        "rewrite_terms": len(terms),
        "term_weights": [float(np.sum(np.abs(t) ** 2)) for t in terms],
        "cross_term_weights": cross_weights,
        "cross_term_residual": float(residual.max()) if residual.size else 0.0,
    }


# -- decoherence ----------------------------------------------------------

def environment_qubits(c: complex) -> tuple[np.ndarray, np.ndarray]:
    """Two single-qubit environment states with ``<e_a|e_b> = c``."""
    c = complex(c)
    if abs(c) > 1 + 1e-15:
        raise ValueError("|c| must be <= 1")
    return np.array([1, 0], dtype=complex), np.array([c, np.sqrt(max(0.0, 1 - abs(c) ** 2))])


def decoherence_overlap(pointer_a=None, pointer_b=None, n_env: int = 1, per_qubit_overlap: complex = 0.0) -> complex:
    """Branch overlap ``<a|b> c^n`` after ``n_env`` environment qubits scatter off the pointer.

    With no pointer states given the branches differ only through the
    environment and the overlap is ``c^n``.
    """
    base = 1.0 + 0j
    if pointer_a is not None and pointer_b is not None:
        base = complex(np.vdot(np.asarray(pointer_a, dtype=complex), np.asarray(pointer_b, dtype=complex)))
    return base * complex(per_qubit_overlap) ** int(n_env)


def explicit_decoherence_overlap(n_env: int, per_qubit_overlap: complex,
                                 pointer_a=None, pointer_b=None) -> complex:
    """Inner product of the two explicitly built ``pointer (x) environment^n`` states."""
    if n_env > 20:
        raise ValueError("explicit environment states are built only for n <= 20")
    ea, eb = environment_qubits(per_qubit_overlap)
    a = np.asarray(pointer_a if pointer_a is not None else [1.0], dtype=complex)
    b = np.asarray(pointer_b if pointer_b is not None else [1.0], dtype=complex)
    for _ in range(n_env):
        a = np.kron(a, ea)
        b = np.kron(b, eb)
    return complex(np.vdot(a, b))


def decoherence_report(per_qubit_overlap: complex, n_values, pointer_a=None, pointer_b=None) -> list[dict]:
    rows = []
    for n in n_values:
        prod = decoherence_overlap(pointer_a, pointer_b, n, per_qubit_overlap)
        row = {"n_env": int(n), "overlap_re": prod.real, "overlap_im": prod.imag, "abs_overlap": abs(prod)}
        if n <= 20:
            ex = explicit_decoherence_overlap(n, per_qubit_overlap, pointer_a, pointer_b)
            row["explicit_abs_overlap"] = abs(ex)
            row["explicit_error"] = abs(ex - prod)
        rows.append(row)
    return rows
