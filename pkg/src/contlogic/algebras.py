"""Bundled metric structures.

Every structure interprets one bundled signature.  Points of the scalar sort
are complex numbers; algebra points are numpy arrays.  Unless a structure
sets ``batchable = False`` every operation accepts a leading batch axis, which
the evaluator uses to score many candidate points in one call.

Structures
----------
MatrixCstar(n)          n x n matrices, operator-norm metric, D[k] = k-ball.
MatrixTracial(n)        n x n matrices, trace 2-norm metric, D[k] = operator-norm k-ball.
DirectSumTracial(a, b)  block-diagonal M_a + M_b with the normalized full trace.
ConvolutionL1(N)        sequences on -N..N under convolution, l1 norm.
UnitaryGroup(n)         U(n) with the operator-norm metric; one domain, the group.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import corpus
from .signature import Domain, Signature

MAX_MATRIX_DIM = 32


class SupportOverflow(ArithmeticError):
    """A convolution product leaves the truncation window."""


class NetUnavailable(LookupError):
    """The domain has no finite net generator."""


class MissingElement(KeyError):
    pass


# ---------------------------------------------------------------------------
# plain numerical helpers


def operator_norm(a) -> float | np.ndarray:
    """Largest singular value (batched over leading axes)."""
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] == 1 and a.shape[-2] == 1:
        return np.abs(a[..., 0, 0])
    return np.linalg.norm(a, ord=2, axis=(-2, -1))


def normalized_trace(a):
    a = np.asarray(a)
    return np.trace(a, axis1=-2, axis2=-1) / a.shape[-1]


def adjoint(a):
    return np.conj(np.swapaxes(a, -1, -2))


def clamp_singular_values(a, radius: float):
    """Metric projection onto the operator-norm ball of ``radius``."""
    a = np.asarray(a, dtype=complex)
    norms = operator_norm(a)
    if np.all(norms <= radius):
        return a
    u, s, vh = np.linalg.svd(a)
    s = np.minimum(s, radius)
    out = (u * s[..., None, :]) @ vh
    # the SVD round trip can overshoot by a few ulps; pull back inside the ball
    over = operator_norm(out)
    shrink = np.where(over > radius, radius / np.where(over == 0, 1, over) * (1 - 4 * np.finfo(float).eps), 1.0)
    out = out * np.asarray(shrink)[..., None, None]
    keep = norms <= radius
    if np.ndim(keep) == 0:
        return a if keep else out
    return np.where(keep[..., None, None], a, out)


def polar_parts(a):
    """``(u, |a|, |a|^(1/2))`` with ``a = u |a|`` and ``u`` unitary."""
    u, s, vh = np.linalg.svd(np.asarray(a, dtype=complex))
    v = adjoint(vh)
    unitary = u @ vh
    modulus = (v * s[..., None, :]) @ vh
    root = (v * np.sqrt(s)[..., None, :]) @ vh
    return unitary, modulus, root


def unitary_part(a):
    u, _, vh = np.linalg.svd(np.asarray(a, dtype=complex))
    return u @ vh


def haar_unitary(rng: np.random.Generator, n: int, count: int):
    z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.where(np.abs(d) == 0, 1, np.abs(d))
    return q * ph[..., None, :]


def clock_shift(n: int) -> list[np.ndarray]:
    """The n^2 - 1 non-identity Weyl unitaries X^j Z^k."""
    w = np.exp(2j * np.pi / n)
    x = np.roll(np.eye(n), 1, axis=0).astype(complex)
    z = np.diag(w ** np.arange(n))
    out = []
    for j in range(n):
        for k in range(n):
            if j == 0 and k == 0:
                continue
            out.append(np.linalg.matrix_power(x, j) @ np.linalg.matrix_power(z, k))
    return out


def stream_seed(*parts) -> int:
    h = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


# ---------------------------------------------------------------------------
# base


@dataclass(frozen=True)
class HintContext:
    """What a witness-hint solver sees.

    ``args`` are the points named in the hint annotation; ``objective`` and
    ``objective_batch`` score candidate values of the quantified variable with
    every other variable fixed.
    """

    structure: "Structure"
    quantifier: object
    domain: Domain
    assignment: dict
    args: tuple
    objective: Callable
    objective_batch: Callable | None
    evaluate_term: Callable


class Structure:
    """Evaluation oracle for one model of a bundled signature."""

    kind = "structure"
    batchable = True
    signature_name = ""

    def __init__(self):
        self.signature: Signature = corpus.signature(self.signature_name)
        self.scalar = self.signature.scalar_sort()
        self._sample_cache: dict = {}
        self.hints: dict[str, Callable[[HintContext], list]] = {}

    # ---- description

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "spec": self.spec}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec})"

    # ---- interpretation

    def metric(self, sort: str, x, y):
        if sort == self.scalar:
            return np.abs(np.asarray(x) - np.asarray(y))
        return self._metric(sort, x, y)

    def function(self, symbol: str, args: Sequence):
        if symbol == "i":
            return np.complex128(1j)
        if symbol == "cadd":
            return np.asarray(args[0]) + np.asarray(args[1])
        if symbol == "cmul":
            return np.asarray(args[0]) * np.asarray(args[1])
        if symbol == "conj":
            return np.conj(args[0])
        return self._function(symbol, args)

    def relation(self, symbol: str, args: Sequence):
        for sname, s in self.signature.sorts.items():
            if s.metric == symbol:
                return self.metric(sname, args[0], args[1])
        if symbol == "RE":
            return np.real(args[0])
        raise KeyError(f"{self.spec} does not interpret relation {symbol!r}")

    def _metric(self, sort, x, y):
        raise NotImplementedError

    def _function(self, symbol, args):
        raise KeyError(f"{self.spec} does not interpret {symbol!r}")

    # ---- domains

    def radius(self, domain: Domain) -> float:
        return float(domain.index) if domain.index is not None else math.inf

    def sample(self, domain: Domain, rng: np.random.Generator, count: int):
        if domain.sort == self.scalar:
            k = self.radius(domain)
            r = k * np.sqrt(rng.random(count))
            th = 2 * np.pi * rng.random(count)
            return r * np.exp(1j * th)
        # raw draws spill past the ball on purpose (boundary coverage); fold them back
        return self.project(domain, self._sample(domain, rng, count))

    def samples(self, domain: Domain, key, count: int, rng_seed: int = 0, block: int = 64):
        """First ``count`` points of the deterministic stream named by ``key``.

        Streams are produced in blocks with independent seeds, so a longer
        budget extends a shorter one.
        """
        nblocks = max(1, -(-count // block))
        parts = []
        for b in range(nblocks):
            ck = (domain, key, rng_seed, b, block)
            pts = self._sample_cache.get(ck)
            if pts is None:
                rng = np.random.default_rng(stream_seed(rng_seed, repr(key), domain.name, b))
                pts = self.project(domain, self.sample(domain, rng, block))
                if len(self._sample_cache) < 4096:
                    self._sample_cache[ck] = pts
            parts.append(pts)
        return np.concatenate(parts, axis=0)[:count]

    def project(self, domain: Domain, p):
        if domain.sort == self.scalar:
            p = np.asarray(p, dtype=complex)
            k = self.radius(domain)
            a = np.abs(p)
            return np.where(a > k, p * (k / np.where(a == 0, 1, a)), p)
        return self._project(domain, p)

    def membership_defect(self, domain: Domain, p) -> float:
        if domain.sort == self.scalar:
            return float(np.max(np.maximum(0.0, np.abs(p) - self.radius(domain))))
        return self._defect(domain, p)

    def anchors(self, domain: Domain) -> list:
        """Distinguished points of ``domain`` (zero and the unit) scored before any sample."""
        if domain.sort == self.scalar:
            return [np.complex128(0), np.complex128(1)] if self.radius(domain) >= 1 else [np.complex128(0)]
        out = []
        for name in ("zero", "one"):
            try:
                p = self.element(name)
            except MissingElement:
                continue
            if self.membership_defect(domain, p) <= 1e-12:
                out.append(p)
        return out

    def _sample(self, domain, rng, count):
        raise NotImplementedError

    def _project(self, domain, p):
        raise NotImplementedError

    def _defect(self, domain, p) -> float:
        raise NotImplementedError

    def net(self, domain: Domain, mesh: float):
        """Finite ``mesh``-net of ``domain`` (only discs ship one)."""
        if domain.sort == self.scalar:
            return disc_net(self.radius(domain), mesh)
        return self._net(domain, mesh)

    def _net(self, domain, mesh):
        raise NetUnavailable(f"no net generator for {domain.name} of {self.spec}")

    # ---- coordinates (refinement works on real vectors)

    def to_coords(self, sort: str, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        return np.concatenate([p.real.ravel(), p.imag.ravel()])

    def from_coords(self, sort: str, v: np.ndarray, like):
        like = np.asarray(like)
        m = v.size // 2
        return (v[:m] + 1j * v[m:]).reshape(like.shape)

    # ---- named elements

    def element(self, name: str):
        raise MissingElement(name)

    def elements(self, group: str) -> list:
        if group == "generators":
            return self.generators()
        raise MissingElement(group)

    def generators(self) -> list:
        return []

    # ---- serialization

    def to_json(self, sort: str, p):
        if sort == self.scalar:
            z = complex(np.asarray(p))
            return [z.real, z.imag]
        return self._to_json(p)

    def from_json(self, sort: str, data):
        if sort == self.scalar:
            return np.complex128(complex(data[0], data[1]))
        return self._from_json(data)

    def _to_json(self, p):
        p = np.asarray(p, dtype=complex)
        return [[[float(z.real), float(z.imag)] for z in row] for row in p]

    def _from_json(self, data):
        return np.array([[complex(a, b) for a, b in row] for row in data], dtype=complex)


def disc_net(radius: float, mesh: float) -> np.ndarray:
    """Square grid of spacing ``mesh*sqrt(2)`` clipped onto the closed disc.

    Every point of the disc lies within ``mesh`` of some net point because the
    radial clip is the metric projection onto a convex set.
    """
    if not (mesh > 0 and math.isfinite(radius)):
        raise NetUnavailable("net needs a finite radius and a positive mesh")
    h = mesh * math.sqrt(2)
    m = int(math.ceil(radius / h))
    if (2 * m + 1) ** 2 > 2.5e7:
        raise NetUnavailable(f"net with mesh {mesh} is too large")
    g = np.arange(-m, m + 1) * h
    z = (g[:, None] + 1j * g[None, :]).ravel()
    a = np.abs(z)
    z = np.where(a > radius, z * (radius / np.where(a == 0, 1, a)), z)
    return z


# ---------------------------------------------------------------------------
# matrices


class _MatrixBase(Structure):
    """Block-diagonal complex matrices with an optional fixed change of frame."""

    def __init__(self, blocks: Sequence[int], frame=None):
        blocks = tuple(int(b) for b in blocks)
        if not blocks or any(b < 1 for b in blocks) or sum(blocks) > MAX_MATRIX_DIM:
            raise ValueError(f"matrix blocks {blocks} outside 1..{MAX_MATRIX_DIM}")
        super().__init__()
        self.blocks = blocks
        self.n = sum(blocks)
        self.frame = None if frame is None else np.asarray(frame, dtype=complex)
        if self.frame is not None:
            if self.frame.shape != (self.n, self.n):
                raise ValueError("frame must be an n x n unitary")
            if np.linalg.norm(adjoint(self.frame) @ self.frame - np.eye(self.n)) > 1e-9:
                raise ValueError("frame must be unitary")
        self._offsets = np.cumsum((0,) + blocks)
        mask = np.zeros((self.n, self.n), dtype=bool)
        for i, b in enumerate(blocks):
            o = self._offsets[i]
            mask[o:o + b, o:o + b] = True
        self._mask = mask
        self.hints.update({
            "polar_unitary": self._hint_polar_unitary,
            "polar_modulus": self._hint_polar_modulus,
            "psd_root": self._hint_psd_root,
            "weyl": self._hint_weyl,
            "central_projections": self._hint_central,
            "spectral": self._hint_spectral,
        })

    # frame conjugation: structure point = F x F^*, x in the standard frame
    def _out(self, x):
        return x if self.frame is None else self.frame @ x @ adjoint(self.frame)

    def _in(self, p):
        return p if self.frame is None else adjoint(self.frame) @ p @ self.frame

    def _function(self, symbol, args):
        if symbol == "0":
            return np.zeros((self.n, self.n), dtype=complex)
        if symbol == "one":
            return np.eye(self.n, dtype=complex)
        if symbol == "add":
            return np.asarray(args[0]) + np.asarray(args[1])
        if symbol == "mul":
            return np.asarray(args[0]) @ np.asarray(args[1])
        if symbol == "star":
            return adjoint(np.asarray(args[0]))
        if symbol == "smul":
            lam = np.asarray(args[0], dtype=complex)
            return lam[..., None, None] * np.asarray(args[1])
        if symbol == "tr" and self.signature_name == "tracial":
            return normalized_trace(args[0])
        return super()._function(symbol, args)

    def _blockwise(self, p, fn):
        """Apply ``fn`` to each diagonal block (in the standard frame)."""
        x = self._in(np.asarray(p, dtype=complex))
        out = np.zeros(np.broadcast_shapes(x.shape, (self.n, self.n)), dtype=complex)
        for i, b in enumerate(self.blocks):
            o = self._offsets[i]
            out[..., o:o + b, o:o + b] = fn(x[..., o:o + b, o:o + b])
        return self._out(out)

    def _sample(self, domain, rng, count):
        k = self.radius(domain)
        x = np.zeros((count, self.n, self.n), dtype=complex)
        for i, b in enumerate(self.blocks):
            o = self._offsets[i]
            g = (rng.standard_normal((count, b, b)) + 1j * rng.standard_normal((count, b, b))) / math.sqrt(2)
            scale = k * rng.uniform(0.0, 1.5, count) / (2 * math.sqrt(b))
            x[:, o:o + b, o:o + b] = scale[:, None, None] * g
        return self._out(x)

    def _project(self, domain, p):
        k = self.radius(domain)
        if len(self.blocks) == 1:
            x = self._in(np.asarray(p, dtype=complex))
            return self._out(clamp_singular_values(x, k))
        return self._blockwise(p, lambda b: clamp_singular_values(b, k))

    def _defect(self, domain, p) -> float:
        x = self._in(np.asarray(p, dtype=complex))
        off = float(np.max(np.abs(np.where(self._mask, 0, x)))) if len(self.blocks) > 1 else 0.0
        return max(off, float(np.max(np.maximum(0.0, operator_norm(x) - self.radius(domain)))))

    def _net(self, domain, mesh):
        if self.n != 1:
            raise NetUnavailable(f"no net generator for {domain.name} of {self.spec}")
        return disc_net(self.radius(domain), mesh)[:, None, None]

    def to_coords(self, sort, p):
        return super().to_coords(sort, self._in(p) if sort != self.scalar else p)

    def from_coords(self, sort, v, like):
        x = super().from_coords(sort, v, like)
        return self._out(x) if sort != self.scalar else x

    def element(self, name: str):
        if name == "zero":
            return np.zeros((self.n, self.n), dtype=complex)
        if name in ("one", "identity"):
            return np.eye(self.n, dtype=complex)
        raise MissingElement(name)

    def generators(self) -> list:
        out = []
        for i, b in enumerate(self.blocks):
            o = self._offsets[i]
            for r in range(b):
                for c in range(b):
                    e = np.zeros((self.n, self.n), dtype=complex)
                    e[o + r, o + c] = 1
                    out.append(self._out(e))
        return out

    def central_projections(self) -> list:
        if len(self.blocks) == 1:
            return [np.eye(self.n, dtype=complex)]
        out = []
        for i, b in enumerate(self.blocks):
            o = self._offsets[i]
            p = np.zeros((self.n, self.n), dtype=complex)
            p[o:o + b, o:o + b] = np.eye(b)
            out.append(self._out(p))
        return out

    # ---- hints

    def _hint_polar_unitary(self, ctx: HintContext):
        return [self._blockwise(ctx.args[0], lambda b: polar_parts(b)[0])]

    def _hint_polar_modulus(self, ctx: HintContext):
        return [self._blockwise(ctx.args[0], lambda b: polar_parts(b)[1])]

    def _hint_psd_root(self, ctx: HintContext):
        def root(b):
            h = (b + adjoint(b)) / 2
            w, v = np.linalg.eigh(h)
            return (v * np.sqrt(np.maximum(w, 0))[..., None, :]) @ adjoint(v)

        return [self._blockwise(ctx.args[0], root)]

    def _hint_weyl(self, ctx: HintContext):
        out = []
        for i, b in enumerate(self.blocks):
            if b == 1:
                continue
            o = self._offsets[i]
            for w in clock_shift(b):
                x = np.eye(self.n, dtype=complex)
                x[o:o + b, o:o + b] = w
                out.append(self._out(x))
        return out

    def _hint_central(self, ctx: HintContext):
        return self.central_projections()

    def _hint_spectral(self, ctx: HintContext):
        """Positive contractions ``diag(sqrt(lam))`` with ``p`` ones and ``m`` equal entries."""
        from scipy.optimize import minimize_scalar

        n = self.n
        if ctx.objective_batch is None:
            return [self.element("zero"), self.element("one")]

        def point(p, m, t):
            d = np.zeros(n)
            d[:p] = 1.0
            d[p:p + m] = math.sqrt(min(max(t, 0.0), 1.0))
            return self._out(np.diag(d).astype(complex))

        cands = [point(p, 0, 0.0) for p in range(n + 1)]
        grid = np.linspace(0.0, 1.0, 33)[1:-1]
        scored = []
        for p in range(n):
            for m in range(1, n - p + 1):
                pts = np.stack([point(p, m, t) for t in grid])
                vals = np.asarray(ctx.objective_batch(pts), dtype=float)
                j = int(np.argmin(vals))
                scored.append((float(vals[j]), p, m, float(grid[j])))
        scored.sort()
        for _, p, m, t0 in scored[: max(4, n)]:
            h = grid[1] - grid[0]
            res = minimize_scalar(
                lambda t: float(ctx.objective(point(p, m, t))),
                bounds=(max(0.0, t0 - h), min(1.0, t0 + h)),
                method="bounded",
                options={"xatol": 1e-10},
            )
            cands.append(point(p, m, float(res.x)))
        return cands


class MatrixCstar(_MatrixBase):
    """``M_n`` as a C*-algebra: operator-norm metric, operator-norm balls."""

    kind = "matC*"
    signature_name = "cstar"

    def __init__(self, n: int, frame=None):
        super().__init__((n,), frame)

    @property
    def spec(self) -> str:
        return f"matC*:{self.n}"

    def _metric(self, sort, x, y):
        return operator_norm(np.asarray(x) - np.asarray(y))


class MatrixTracial(_MatrixBase):
    """``M_n`` with the normalized trace; the metric is the trace 2-norm."""

    kind = "tracial"
    signature_name = "tracial"

    def __init__(self, n: int, frame=None):
        super().__init__((n,), frame)

    @property
    def spec(self) -> str:
        return f"tracial:{self.n}"

    def _metric(self, sort, x, y):
        d = np.asarray(x) - np.asarray(y)
        return np.sqrt(np.sum(np.abs(d) ** 2, axis=(-2, -1)) / self.n)

    def two_norm(self, a) -> float:
        return float(np.sqrt(np.real(normalized_trace(adjoint(a) @ a))))


def two_norm(M: "MatrixTracial", a) -> float:
    """``sqrt(Re tau(a^* a))`` in a tracial matrix structure."""
    return M.two_norm(np.asarray(a, dtype=complex))


class DirectSumTracial(MatrixTracial):
    """``M_a (+) M_b``: block-diagonal carrier, trace ``(Tr x + Tr y)/(a+b)``."""

    kind = "dsum"

    def __init__(self, n1: int, n2: int, frame=None):
        _MatrixBase.__init__(self, (n1, n2), frame)

    @property
    def spec(self) -> str:
        return f"dsum:{self.blocks[0]},{self.blocks[1]}"


# ---------------------------------------------------------------------------
# l1(Z) truncated to a window


class ConvolutionL1(Structure):
    """Sequences supported in ``-N..N`` with convolution and the l1 norm.

    Index ``j`` is stored at array position ``j + N``.  Products whose support
    leaves the window raise :class:`SupportOverflow`.
    """

    kind = "l1"
    signature_name = "banach"

    def __init__(self, support_radius: int):
        if support_radius < 1:
            raise ValueError("support radius must be positive")
        super().__init__()
        self.N = int(support_radius)
        self.length = 2 * self.N + 1

    @property
    def spec(self) -> str:
        return f"l1:{self.N}"

    # ---- elements

    def basis(self, j: int):
        """The point mass ``f_j``."""
        if abs(j) > self.N:
            raise SupportOverflow(f"f_{j} outside the window -{self.N}..{self.N}")
        x = np.zeros(self.length, dtype=complex)
        x[j + self.N] = 1.0
        return x

    def from_dict(self, coeffs: dict):
        x = np.zeros(self.length, dtype=complex)
        for j, c in coeffs.items():
            if abs(int(j)) > self.N:
                raise SupportOverflow(f"index {j} outside the window")
            x[int(j) + self.N] = c
        return x

    def to_dict(self, x, tol: float = 0.0) -> dict[int, complex]:
        x = np.asarray(x)
        return {j - self.N: complex(x[j]) for j in range(self.length) if abs(x[j]) > tol}

    def support(self, x) -> tuple[int, int] | None:
        nz = np.nonzero(np.asarray(x))[0]
        if nz.size == 0:
            return None
        return int(nz[0]) - self.N, int(nz[-1]) - self.N

    def element(self, name: str):
        if name == "zero":
            return np.zeros(self.length, dtype=complex)
        if name in ("one", "identity"):
            return self.basis(0)
        raise MissingElement(name)

    def generators(self) -> list:
        return [self.basis(1), self.basis(-1)]

    # ---- algebra

    def convolve(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if x.ndim == 1 and y.ndim == 1:
            return self._conv1(x, y)
        xb, yb = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(y))
        flat = [self._conv1(a, b) for a, b in zip(xb.reshape(-1, self.length), yb.reshape(-1, self.length))]
        return np.stack(flat).reshape(xb.shape)

    def _conv1(self, x, y):
        full = np.convolve(x, y)  # indices -2N..2N
        lo, hi = full[: self.N], full[self.N + self.length:]
        if np.any(lo != 0) or np.any(hi != 0):
            raise SupportOverflow(f"product support exceeds -{self.N}..{self.N}")
        return full[self.N: self.N + self.length]

    def power(self, x, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = self.basis(0)
        for _ in range(k):
            out = self.convolve(out, x)
        return out

    def gelfand(self, x, t):
        """``sum_n x_n e^{int}`` at one or many ``t``."""
        t = np.asarray(t, dtype=float)
        j = np.arange(-self.N, self.N + 1)
        return np.exp(1j * np.multiply.outer(t, j)) @ np.asarray(x, dtype=complex)

    def norm(self, x):
        return np.sum(np.abs(np.asarray(x)), axis=-1)

    def _function(self, symbol, args):
        if symbol == "0":
            return self.element("zero")
        if symbol == "one":
            return self.basis(0)
        if symbol == "add":
            return np.asarray(args[0]) + np.asarray(args[1])
        if symbol == "mul":
            return self.convolve(args[0], args[1])
        if symbol == "star":
            return np.conj(np.asarray(args[0])[..., ::-1])
        if symbol == "smul":
            return np.asarray(args[0], dtype=complex)[..., None] * np.asarray(args[1])
        return super()._function(symbol, args)

    def _metric(self, sort, x, y):
        return self.norm(np.asarray(x) - np.asarray(y))

    # ---- domains

    def _sample(self, domain, rng, count):
        k = self.radius(domain)
        s = max(1, self.N // 4)
        x = np.zeros((count, self.length), dtype=complex)
        w = 2 * s + 1
        g = rng.standard_normal((count, w)) + 1j * rng.standard_normal((count, w))
        g /= np.sum(np.abs(g), axis=1, keepdims=True)
        x[:, self.N - s: self.N + s + 1] = g * (k * rng.uniform(0.0, 1.3, count))[:, None]
        return x

    def _project(self, domain, p):
        k = self.radius(domain)
        p = np.asarray(p, dtype=complex)
        nrm = self.norm(p)
        factor = np.where(nrm > k, k / np.where(nrm == 0, 1, nrm), 1.0)
        return p * np.asarray(factor)[..., None]

    def _defect(self, domain, p) -> float:
        return float(np.max(np.maximum(0.0, self.norm(p) - self.radius(domain))))

    def _to_json(self, p):
        return {str(j): [c.real, c.imag] for j, c in self.to_dict(p).items()}

    def _from_json(self, data):
        return self.from_dict({int(j): complex(a, b) for j, (a, b) in data.items()})


def gelfand_eval(M: ConvolutionL1, x, t) -> complex:
    return complex(M.gelfand(x, float(t)))


def convolution_power(M: ConvolutionL1, x, k: int):
    return M.power(x, k)


# ---------------------------------------------------------------------------
# unitary groups


class UnitaryGroup(Structure):
    """``U(n)`` with the operator-norm metric (bi-invariant, bounded by 2)."""

    kind = "unitary"
    signature_name = "unitary"

    def __init__(self, n: int):
        if not 1 <= n <= MAX_MATRIX_DIM:
            raise ValueError(f"dimension outside 1..{MAX_MATRIX_DIM}")
        super().__init__()
        self.n = int(n)

    @property
    def spec(self) -> str:
        return f"unitary:{self.n}"

    def _function(self, symbol, args):
        if symbol == "e":
            return np.eye(self.n, dtype=complex)
        if symbol == "gmul":
            return np.asarray(args[0]) @ np.asarray(args[1])
        if symbol == "inv":
            return adjoint(np.asarray(args[0]))
        return super()._function(symbol, args)

    def _metric(self, sort, x, y):
        return operator_norm(np.asarray(x) - np.asarray(y))

    def _sample(self, domain, rng, count):
        return haar_unitary(rng, self.n, count)

    def _project(self, domain, p):
        return unitary_part(p)

    def _defect(self, domain, p) -> float:
        p = np.asarray(p, dtype=complex)
        return float(np.max(operator_norm(adjoint(p) @ p - np.eye(self.n))))

    def element(self, name: str):
        if name in ("e", "one", "identity"):
            return np.eye(self.n, dtype=complex)
        raise MissingElement(name)

    def generators(self) -> list:
        return clock_shift(self.n)[:2] if self.n > 1 else [np.eye(1, dtype=complex)]


# ---------------------------------------------------------------------------


STRUCTURE_KINDS = ("matC*", "tracial", "dsum", "l1", "unitary")


def structure_from_spec(spec: str) -> Structure:
    """Build a structure from ``kind:params`` such as ``matC*:2`` or ``dsum:2,2``."""
    if ":" not in spec:
        raise ValueError(f"structure spec {spec!r} must look like kind:params")
    kind, arg = spec.split(":", 1)
    try:
        nums = [int(a) for a in arg.split(",")]
    except ValueError:
        raise ValueError(f"bad structure parameters in {spec!r}") from None
    if kind in ("matC*", "matCstar") and len(nums) == 1:
        return MatrixCstar(nums[0])
    if kind == "tracial" and len(nums) == 1:
        return MatrixTracial(nums[0])
    if kind == "dsum" and len(nums) == 2:
        return DirectSumTracial(*nums)
    if kind == "l1" and len(nums) == 1:
        return ConvolutionL1(nums[0])
    if kind == "unitary" and len(nums) == 1:
        return UnitaryGroup(nums[0])
    raise ValueError(f"unknown structure spec {spec!r}; kinds are {', '.join(STRUCTURE_KINDS)}")


def dumps_element(M: Structure, sort: str, p) -> str:
    return json.dumps(M.to_json(sort, p), sort_keys=True)
