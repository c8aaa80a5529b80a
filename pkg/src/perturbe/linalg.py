"""LU factorisation and linear solves, generic over the scalar arithmetic.

Arrays carry a leading lane axis: ``(1, n, n)`` for plain binary64 and for
the extended-precision oracle, ``(2, n, n)`` for tracked evaluation where
lane 0 is the original program and lane 1 the perturbed one.  The same
Doolittle elimination with row pivoting runs on all three; only the
``Arith`` object changes.

Under tracked arithmetic every elementwise subtraction is an atomic ``Sub``
with the usual condition-number gate; products and quotients are benign.
Pivots are chosen from lane 0 so both lanes follow one pivot sequence.

Random matrices come from numpy's Philox-4x64 counter-based generator keyed
through ``SeedSequence(seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2
import numpy as np

from .errors import SingularMatrixError
from .oracle import OracleConfig
from .shadow import DEFAULT_POLICY, OperandRule, PerturbationMode, PerturbationPolicy
from .ulp import ulp_array

__all__ = [
    "Binary64Arith",
    "TrackedArith",
    "OracleArith",
    "BINARY64",
    "LuFactors",
    "lu_decompose",
    "lu_solve",
    "solve",
    "matrix_norm",
    "matrix_condition_number",
    "gen_near_singular",
    "make_rng",
    "format_matrix",
    "parse_matrix",
    "read_matrix",
    "write_matrix",
    "read_vector",
    "write_vector",
]


class Binary64Arith:
    lanes = 1
    name = "binary64"

    def lift(self, values) -> np.ndarray:
        a = np.array(values, dtype=np.float64)
        return a[None, ...].copy()

    def pivot_magnitudes(self, col: np.ndarray) -> np.ndarray:
        return np.abs(col[0])

    def is_zero(self, v) -> bool:
        return bool(v[0] == 0)

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def lower(self, x):
        return x[0]


class TrackedArith(Binary64Arith):
    """Two-lane arithmetic with condition-gated perturbation of subtractions.

    Matches :func:`perturbe.shadow.apply` for ``Sub`` elementwise.  Only the
    injection count is kept; a full trace of an O(n^3) solve is not useful.
    """

    lanes = 2
    name = "tracked"

    def __init__(self, policy: PerturbationPolicy = DEFAULT_POLICY):
        self.policy = policy
        self.injections = 0
        self.cursor = 0
        thr = policy.threshold
        # |y/(x-y)| <= |x/(x-y)| + 1, so any exceeding Sub has |x| > (thr-1)|x-y|
        self._screen = (thr - 1.0) * (1.0 - 1e-9) if thr > 1.0 else 0.0

    def lift(self, values) -> np.ndarray:
        a = np.array(values, dtype=np.float64)
        return np.stack([a, a])

    def sub(self, a, b):
        a, b = np.broadcast_arrays(a, b)
        out = a - b
        xp, dp = a[1], out[1]
        with np.errstate(invalid="ignore", over="ignore"):
            hit = np.abs(xp) >= self._screen * np.abs(dp)
        idx = np.flatnonzero(hit)
        if idx.size:
            self._inject(xp.reshape(-1)[idx], b[1].reshape(-1)[idx], dp, idx)
        return out

    def _inject(self, x, y, dp, idx):
        policy = self.policy
        d = x - y
        with np.errstate(divide="ignore", invalid="ignore"):
            c_left = np.where(d == 0, np.inf, np.abs(x / d))
            c_right = np.where(d == 0, np.inf, np.abs(y / d))
        over_l = c_left > policy.threshold
        over_r = c_right > policy.threshold
        if policy.operand_rule is OperandRule.ALL_EXCEEDING:
            pick_l, pick_r = over_l, over_r
        else:
            pick_l = over_l & (~over_r | (c_left >= c_right))
            pick_r = over_r & ~pick_l
        fired = pick_l | pick_r
        count = int(np.count_nonzero(fired))
        if not count:
            return
        if policy.mode is PerturbationMode.ONE_ULP_SUB:
            k = np.full(count, -1.0)
        else:
            offs = np.asarray(policy.cyclic_offsets, dtype=np.float64)
            k = offs[(self.cursor + np.arange(count)) % offs.size]
            self.cursor += count
        self.injections += count
        xs, ys = x[fired], y[fired]
        xs = np.where(pick_l[fired], xs + k * ulp_array(xs), xs)
        ys = np.where(pick_r[fired], ys + k * ulp_array(ys), ys)
        np.put(dp, idx[fired], xs - ys)


class OracleArith(Binary64Arith):
    """Extended precision on object arrays of ``gmpy2.mpfr``.

    Matrix entries are data, so they enter exactly as their binary64 values.
    Operations must run inside :meth:`OracleConfig.context`.
    """

    name = "oracle"

    def __init__(self, config: OracleConfig | None = None):
        self.config = config or OracleConfig()

    def lift(self, values) -> np.ndarray:
        a = np.array(values, dtype=np.float64)
        out = np.empty((1,) + a.shape, dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(a.reshape(-1).tolist()):
            flat[i] = gmpy2.mpfr(v)
        return out

    def pivot_magnitudes(self, col):
        return np.abs(col[0]).astype(np.float64)

    def lower(self, x):
        return x[0]


BINARY64 = Binary64Arith()


@dataclass
class LuFactors:
    lu: np.ndarray
    perm: np.ndarray
    parity: int
    arith: Binary64Arith

    @property
    def n(self) -> int:
        return self.lu.shape[1]


def _context(arith):
    if isinstance(arith, OracleArith):
        return arith.config.context()
    return _NullContext()


class _NullContext:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def lu_decompose(a, arith: Binary64Arith | None = None) -> LuFactors:
    """``P A = L U`` with unit-diagonal ``L``, stored combined.

    ``perm[i]`` is the row of ``A`` that ends up in row ``i``.
    """
    arith = arith or BINARY64
    with _context(arith):
        lu = arith.lift(a)
        if lu.ndim != 3 or lu.shape[1] != lu.shape[2] or lu.shape[1] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {lu.shape[1:]}")
        n = lu.shape[1]
        perm = np.arange(n)
        parity = 1
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for k in range(n):
                p = k + int(np.argmax(arith.pivot_magnitudes(lu[:, k:, k])))
                if arith.is_zero(lu[:, p, k]):
                    raise SingularMatrixError(f"zero pivot in column {k}")
                if p != k:
                    lu[:, [k, p]] = lu[:, [p, k]]
                    perm[[k, p]] = perm[[p, k]]
                    parity = -parity
                if k + 1 == n:
                    break
                col = arith.div(lu[:, k + 1 :, k], lu[:, k, k, None])
                lu[:, k + 1 :, k] = col
                update = arith.mul(col[:, :, None], lu[:, k, None, k + 1 :])
                lu[:, k + 1 :, k + 1 :] = arith.sub(lu[:, k + 1 :, k + 1 :], update)
    return LuFactors(lu, perm, parity, arith)


def lu_solve(factors: LuFactors, b):
    """Solve with the factors; ``b`` may be a vector or an ``(n, k)`` block.

    Returns the lowered result: a float array for binary64, a ``(2, ...)``
    array of (original, perturbed) lanes for tracked, mpfr objects for oracle.
    """
    arith, lu, n = factors.arith, factors.lu, factors.n
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {n}")
    vector = b.ndim == 1
    with _context(arith):
        x = arith.lift(b[:, None] if vector else b)[:, factors.perm]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for j in range(n - 1):
                x[:, j + 1 :] = arith.sub(x[:, j + 1 :], arith.mul(lu[:, j + 1 :, j, None], x[:, j, None, :]))
            for j in range(n - 1, -1, -1):
                x[:, j] = arith.div(x[:, j], lu[:, j, j, None])
                if j:
                    x[:, :j] = arith.sub(x[:, :j], arith.mul(lu[:, :j, j, None], x[:, j, None, :]))
    if vector:
        x = x[..., 0]
    return arith.lower(x) if arith.lanes == 1 else x


def solve(a, b, arith: Binary64Arith | None = None):
    return lu_solve(lu_decompose(a, arith), b)


def matrix_norm(a, norm: str = "one") -> float:
    a = np.abs(np.asarray(a, dtype=np.float64))
    if norm == "one":
        return float(a.sum(axis=0).max())
    if norm in ("inf", "infinity"):
        return float(a.sum(axis=1).max())
    raise ValueError(f"unknown norm {norm!r}")


def matrix_condition_number(a, norm: str = "one") -> float:
    """``||A|| * ||A^-1||`` with the inverse solved column by column."""
    a = np.asarray(a, dtype=np.float64)
    inv = lu_solve(lu_decompose(a), np.eye(a.shape[0]))
    # kappa >= 1 exactly; rounding in the inverse can land just below
    return max(1.0, matrix_norm(a, norm) * matrix_norm(inv, norm))


# --- generation --------------------------------------------------------------

NOISE_SCALE = 1e-12


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def gen_near_singular(n: int, seed, severity: float = 1.0, probability: float = 1.0) -> np.ndarray:
    """Uniform[-1, 1] matrix, made nearly singular with chance ``probability``.

    The damaged row is a random convex combination of two other rows plus
    noise of magnitude ``severity * 1e-12``; smaller severity, larger kappa.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < severity <= 1:
        raise ValueError("severity must lie in (0, 1]")
    rng = make_rng(seed)
    a = rng.uniform(-1.0, 1.0, (n, n))
    damage = rng.random() < probability
    target, i, j = rng.choice(n, 3, replace=False) if n >= 3 else (1, 0, 0)
    alpha = rng.random()
    noise = rng.uniform(-1.0, 1.0, n) * (severity * NOISE_SCALE)
    if damage:
        a[target] = alpha * a[i] + (1.0 - alpha) * a[j] + noise
    return a


# --- text I/O ----------------------------------------------------------------

def format_matrix(a) -> str:
    a = np.asarray(a, dtype=np.float64)
    rows = [" ".join(repr(float(v)) for v in row) for row in a]
    return f"{a.shape[0]}\n" + "\n".join(rows) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n = int(lines[0])
    rows = [[float(tok) for tok in ln.split()] for ln in lines[1 : n + 1]]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"expected {n} rows of {n} values")
    return np.array(rows, dtype=np.float64)


def write_matrix(path, a) -> None:
    with open(path, "w") as fh:
        fh.write(format_matrix(a))


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return parse_matrix(fh.read())


def write_vector(path, v) -> None:
    v = np.asarray(v, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{v.size}\n" + " ".join(repr(float(x)) for x in v) + "\n")


def read_vector(path) -> np.ndarray:
    with open(path) as fh:
        toks = fh.read().split()
    n = int(toks[0])
    if len(toks) != n + 1:
        raise ValueError(f"expected {n} values")
    return np.array([float(t) for t in toks[1:]], dtype=np.float64)
