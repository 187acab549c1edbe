"""Numerical estimation of sup/inf over structure domains.

A search scores, in order, the seed points, then a deterministic stream of
random samples, then a compass-search refinement around the incumbent.  The
reported value is the best score seen, so for a sup it is a lower bound on the
true value and for an inf an upper bound.  Ties keep the first point found.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .algebras import NetUnavailable, Structure
from .signature import Domain

EXACT = "exact"
LOWER = "lowerBoundOfSup"
UPPER = "upperBoundOfInf"
INDET = "indeterminate"

STRATEGIES = ("samplingOnly", "samplingPlusRefine", "certifiedNet")


@dataclass(frozen=True)
class QuantConfig:
    """Search settings.

    ``sample_budget`` and ``refine_steps`` apply to the outermost quantifier
    block; nested blocks use ``inner_sample_budget`` and
    ``inner_refine_steps``.  ``refine_step_size`` is relative to the domain
    radius.  ``seed_points`` seed the outermost block.
    """

    sample_budget: int = 64
    refine_steps: int = 4
    refine_step_size: float = 0.25
    seed_points: tuple = ()
    strategy: str = "samplingPlusRefine"
    rng_seed: int = 0
    inner_sample_budget: int = 16
    inner_refine_steps: int = 0
    net_mesh: float = 0.01
    use_hints: bool = True
    max_seed_combinations: int = 256

    def __post_init__(self):
        if self.sample_budget < 1 or self.inner_sample_budget < 1:
            raise ValueError("sample budgets must be at least 1")
        if not self.refine_step_size > 0:
            raise ValueError("refine_step_size must be positive")
        if self.refine_steps < 0 or self.inner_refine_steps < 0:
            raise ValueError("refine steps must be nonnegative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if not self.net_mesh > 0:
            raise ValueError("net_mesh must be positive")

    def with_(self, **kw) -> "QuantConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed_points"] = len(self.seed_points)
        return d

    @property
    def refining(self) -> bool:
        return self.strategy != "samplingOnly"


@dataclass
class QuantEstimate:
    """Numerical value of a formula with the direction in which it is sound.

    ``bound_direction`` is ``exact``, ``lowerBoundOfSup`` or
    ``upperBoundOfInf``.  ``indeterminate`` is set when nested estimates pull
    in conflicting directions, so the value is neither bound.  ``certified``
    marks values proved exact because they meet the formula's range bound.
    """

    value: float
    bound_direction: str
    witness: dict = field(default_factory=dict)
    samples_used: int = 0
    indeterminate: bool = False
    certified: bool = False

    def to_dict(self, structure: Structure | None = None, sorts: dict | None = None) -> dict:
        w = {}
        for k, v in self.witness.items():
            if structure is not None and sorts and k in sorts:
                w[k] = structure.to_json(sorts[k], v)
            else:
                w[k] = np.asarray(v).tolist() if not np.iscomplexobj(v) else [
                    np.real(v).tolist(), np.imag(v).tolist()]
        return {
            "value": float(self.value),
            "bound_direction": self.bound_direction,
            "indeterminate": bool(self.indeterminate),
            "certified": bool(self.certified),
            "samples_used": int(self.samples_used),
            "witness": w,
        }


@dataclass(frozen=True)
class CertifiedBracket:
    lower: float
    upper: float
    net_mesh: float
    lipschitz: float = 0.0
    net_size: int = 0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("empty bracket")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, v: float, slack: float = 1e-12) -> bool:
        return self.lower - slack <= v <= self.upper + slack


# ---------------------------------------------------------------------------
# search


@dataclass
class SearchResult:
    value: float
    best: tuple
    direction: str
    evaluations: int


def _stack(points: Sequence):
    return np.stack([np.asarray(p) for p in points])


def _take(arrays, idx):
    return tuple(a[idx] for a in arrays)


def search(
    M: Structure,
    domains: Sequence[Domain],
    score: Callable,
    sense: str,
    *,
    budget: int,
    refine_steps: int,
    step_size: float,
    seeds: Sequence[tuple] = (),
    key=(),
    rng_seed: int = 0,
    extra: Sequence[np.ndarray] | None = None,
) -> SearchResult:
    """Optimize ``score`` over the product of ``domains``.

    ``score(arrays)`` receives one stacked array per domain (leading axis =
    candidates) and returns ``(values, directions)``.
    """
    if sense not in ("sup", "inf"):
        raise ValueError(f"sense must be 'sup' or 'inf', not {sense!r}")
    sign = 1.0 if sense == "sup" else -1.0
    best_val = -math.inf
    best_pt: tuple | None = None
    best_dir = EXACT
    evals = 0

    def consider(arrays):
        nonlocal best_val, best_pt, best_dir, evals
        vals, dirs = score(arrays)
        vals = np.asarray(vals, dtype=float).reshape(-1)
        evals += vals.size
        if vals.size == 0:
            return False
        s = sign * np.where(np.isnan(vals), -math.inf, vals)
        j = int(np.argmax(s))
        if s[j] > best_val:
            best_val = float(s[j])
            best_pt = _take(arrays, j)
            best_dir = dirs[j] if dirs is not None else EXACT
            return True
        return False

    if seeds:
        seed_arrays = [
            M.project(d, _stack([s[i] for s in seeds])) for i, d in enumerate(domains)
        ]
        consider(seed_arrays)
    sample_arrays = [M.samples(d, (key, i), budget, rng_seed) for i, d in enumerate(domains)]
    consider(sample_arrays)
    if extra is not None:
        consider(extra)

    if refine_steps > 0 and best_pt is not None:
        radii = [M.radius(d) if math.isfinite(M.radius(d)) else 1.0 for d in domains]
        h = step_size
        for _ in range(refine_steps):
            coords = [M.to_coords(d.sort, p) for d, p in zip(domains, best_pt)]
            sizes = [c.size for c in coords]
            neighbours = []
            for vi, (d, c) in enumerate(zip(domains, coords)):
                for ci in range(sizes[vi]):
                    for sgn in (1.0, -1.0):
                        v = c.copy()
                        v[ci] += sgn * h * radii[vi]
                        neighbours.append((vi, M.from_coords(d.sort, v, best_pt[vi])))
            if not neighbours:
                break
            arrays = [
                M.project(d, _stack([p if vi == k else best_pt[k] for vi, p in neighbours]))
                for k, d in enumerate(domains)
            ]
            if not consider(arrays):
                h /= 2
    value = sign * best_val
    return SearchResult(float(value), best_pt or (), best_dir, evals)


def _single_score(objective, batch_objective):
    def score(arrays):
        pts = arrays[0]
        if batch_objective is not None:
            return np.asarray(batch_objective(pts), dtype=float), None
        return np.array([float(objective(p)) for p in pts]), None

    return score


def maximize(
    M: Structure,
    domain: Domain,
    objective: Callable,
    cfg: QuantConfig = QuantConfig(),
    seeds: Sequence = (),
    batch_objective: Callable | None = None,
    key=("maximize",),
) -> QuantEstimate:
    """Lower bound for ``sup objective`` over ``domain``.

    Parameters
    ----------
    objective : callable
        Point of ``domain`` to real number.
    seeds : sequence
        Extra candidate points, scored before the random samples together
        with ``cfg.seed_points`` and the domain's anchor points.
    batch_objective : callable, optional
        Vectorized objective taking a stacked array of points.
    """
    return _optimize(M, domain, objective, cfg, seeds, batch_objective, key, "sup")


def minimize(
    M: Structure,
    domain: Domain,
    objective: Callable,
    cfg: QuantConfig = QuantConfig(),
    seeds: Sequence = (),
    batch_objective: Callable | None = None,
    key=("minimize",),
) -> QuantEstimate:
    """Upper bound for ``inf objective`` over ``domain``; dual of :func:`maximize`."""
    return _optimize(M, domain, objective, cfg, seeds, batch_objective, key, "inf")


def _optimize(M, domain, objective, cfg, seeds, batch_objective, key, sense):
    seeds = list(seeds) + list(cfg.seed_points) + list(M.anchors(domain))
    res = search(
        M, [domain], _single_score(objective, batch_objective), sense,
        budget=cfg.sample_budget,
        refine_steps=cfg.refine_steps if cfg.refining else 0,
        step_size=cfg.refine_step_size,
        seeds=[(s,) for s in seeds],
        key=key,
        rng_seed=cfg.rng_seed,
    )
    return QuantEstimate(
        res.value, LOWER if sense == "sup" else UPPER, {"x": res.best[0]} if res.best else {},
        res.evaluations,
    )


def net_bracket(values: np.ndarray, lipschitz: float, mesh: float, sense: str) -> CertifiedBracket:
    """Bracket for a sup/inf from values on a ``mesh``-net of a Lipschitz function."""
    values = np.asarray(values, dtype=float)
    if sense == "sup":
        m = float(np.max(values))
        return CertifiedBracket(m, m + lipschitz * mesh, mesh, lipschitz, values.size)
    m = float(np.min(values))
    return CertifiedBracket(m - lipschitz * mesh, m, mesh, lipschitz, values.size)


def certified_bracket(M: Structure, domain: Domain, phi, x: str, cfg: QuantConfig = QuantConfig(),
                      sense: str = "sup", assignment: dict | None = None) -> CertifiedBracket:
    """Two-sided bound for ``sup_x phi`` (or ``inf``) over ``domain`` from a finite net.

    The Lipschitz constant comes from the propagated modulus of ``phi`` in
    ``x``; only domains with a net generator qualify, otherwise
    :class:`NetUnavailable` is raised.
    """
    from .evaluator import batch_values
    from .syntax import is_quantifier_free, propagate_modulus

    if cfg.strategy != "certifiedNet":
        cfg = cfg.with_(strategy="certifiedNet")
    pts = M.net(domain, cfg.net_mesh)
    if not is_quantifier_free(phi):
        raise NetUnavailable("certified nets need a quantifier-free body")
    mod = propagate_modulus(M.signature, phi, x, {x: domain})
    if not mod.is_lipschitz:
        raise NetUnavailable("certified nets need a Lipschitz modulus")
    vals = []
    for start in range(0, len(pts), 65536):
        vals.append(batch_values(M, phi, dict(assignment or {}), {x: pts[start:start + 65536]}))
    return net_bracket(np.concatenate(vals), mod.constant, cfg.net_mesh, sense)
