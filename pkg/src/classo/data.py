"""Instance generation, LIBSVM ingestion and polynomial feature expansion."""

from __future__ import annotations

import dataclasses
import enum
import gzip
import io
import itertools
import math
from typing import BinaryIO, Iterable, Optional, Tuple, Union

import numpy as np

MAX_POLY_COLUMNS = 5_000_000


class Scenario(enum.Enum):
    SUM_ZERO = "sum_zero"
    RANDOM_B = "random_b"
    GENLASSO = "genlasso"

    @classmethod
    def parse(cls, value: Union[str, "Scenario"]) -> "Scenario":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_").lower())


class LibsvmParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)
        self.lineno = lineno


@dataclasses.dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a random instance.

    ``A`` is iid standard normal, ``x_true`` has ``ceil(sparsity * n)``
    standard-normal entries at uniformly random positions and
    ``b = A x_true + noise`` with noise variance ``noise_var``. For
    ``GENLASSO`` the returned ``(B, d)`` is the random block ``D_2`` stacked
    under the identity (see :func:`generate`).
    """

    m: int
    n: int
    seed: int = 0
    sparsity: float = 0.01
    noise_var: float = 0.001
    scenario: Scenario = Scenario.SUM_ZERO
    s: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not 0 < self.sparsity <= 1:
            raise ValueError("sparsity must lie in (0, 1]")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        if self.scenario is not Scenario.SUM_ZERO and self.s < 1:
            raise ValueError("s must be positive for random_b and genlasso")


@dataclasses.dataclass
class GeneratedInstance:
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    d: np.ndarray
    x_true: np.ndarray


def rng_for(seed: int) -> np.random.Generator:
    """PCG64 bit generator; normals come from numpy's ziggurat sampler."""
    return np.random.Generator(np.random.PCG64(seed))


def generate(spec: SyntheticSpec) -> GeneratedInstance:
    """Draw a synthetic instance, deterministic in ``spec.seed``.

    ``SUM_ZERO`` uses ``B = e^T, d = 0``; ``RANDOM_B`` draws ``B`` (s x n)
    and ``d`` iid standard normal. ``GENLASSO`` returns ``D_2`` (s x n,
    iid standard normal) as ``B`` and ``d = 0``; the reduction in
    :mod:`classo.transforms` turns ``D = [I; D_2]`` into the actual
    constraints.
    """
    rng = rng_for(spec.seed)
    m, n = spec.m, spec.n
    A = np.asfortranarray(rng.standard_normal((m, n)))
    k = math.ceil(spec.sparsity * n)
    x_true = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x_true[support] = rng.standard_normal(k)
    noise = rng.standard_normal(m) * math.sqrt(spec.noise_var)
    b = A @ x_true + noise
    if spec.scenario is Scenario.SUM_ZERO:
        B = np.ones((1, n))
        d = np.zeros(1)
    elif spec.scenario is Scenario.RANDOM_B:
        B = rng.standard_normal((spec.s, n))
        d = rng.standard_normal(spec.s)
    else:
        B = rng.standard_normal((spec.s, n))
        d = np.zeros(spec.s)
    return GeneratedInstance(A, b, np.asfortranarray(B), d, x_true)


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif isinstance(source, str):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_libsvm(source: Union[bytes, str, BinaryIO]) -> Tuple[np.ndarray, np.ndarray]:
    """Parse LIBSVM ``label idx:val ...`` text into a dense ``(X, y)``.

    ``source`` may be raw bytes, a path, or a binary stream; gzip input is
    detected from its magic bytes. Indices are 1-based and must be strictly
    increasing within a line. Blank lines and ``#`` comments are skipped.
    """
    text = _read_bytes(source).decode("utf-8")
    labels = []
    rows = []
    width = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(lineno, f"bad label {tokens[0]!r}") from None
        entries = []
        last = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(lineno, f"index must be >= 1, got {idx}")
            if idx <= last:
                raise LibsvmParseError(lineno, f"index {idx} not strictly increasing")
            last = idx
            entries.append((idx - 1, val))
        width = max(width, last)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise LibsvmParseError(0, "no samples")
    X = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for j, val in entries:
            X[i, j] = val
    return X, np.asarray(labels)


def serialize_libsvm(X, y) -> bytes:
    """Inverse of :func:`parse_libsvm`; zero entries are omitted."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = io.StringIO()
    for row, label in zip(X, np.ravel(y)):
        parts = [repr(float(label))]
        parts += [f"{j + 1}:{float(row[j])!r}" for j in np.flatnonzero(row)]
        out.write(" ".join(parts) + "\n")
    return out.getvalue().encode()


def minmax_scale(X, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Scale each column affinely onto ``[lo, hi]``; constant columns map to ``lo``."""
    X = np.asarray(X, dtype=float)
    cmin = X.min(axis=0)
    span = X.max(axis=0) - cmin
    safe = np.where(span > 0, span, 1.0)
    return lo + (hi - lo) * (X - cmin) / safe


def monomial_exponents(p: int, degree: int) -> Iterable[Tuple[int, ...]]:
    """Index tuples of all monomials of total degree ``<= degree`` in graded lex order."""
    for k in range(degree + 1):
        yield from itertools.combinations_with_replacement(range(p), k)


def poly_expand(X, degree: int, max_columns: Optional[int] = MAX_POLY_COLUMNS) -> np.ndarray:
    """All monomials of total degree ``<= degree`` including the constant.

    The output has ``comb(p + degree, degree)`` columns, ordered by degree and
    then lexicographically in the variable indices, e.g. for ``p = 2`` and
    ``degree = 2``: ``1, x1, x2, x1^2, x1 x2, x2^2``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, p = X.shape
    if degree < 1 or p < 1:
        raise ValueError("degree and the number of features must be at least 1")
    ncols = math.comb(p + degree, degree)
    if max_columns is not None and ncols > max_columns:
        raise OverflowError(f"expansion would produce {ncols} columns (limit {max_columns})")
    out = np.empty((m, ncols), order="F")
    position = {}
    for col, mono in enumerate(monomial_exponents(p, degree)):
        if not mono:
            out[:, col] = 1.0
        else:
            np.multiply(out[:, position[mono[:-1]]], X[:, mono[-1]], out=out[:, col])
        position[mono] = col
    return out
