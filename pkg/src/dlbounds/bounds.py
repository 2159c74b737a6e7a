"""Sample-complexity bound calculators for dictionary learning.

Every bound here controls the expected representation error E h (or E h^2
for the squared-scale variant) by the empirical average over m samples
plus an additive term, sometimes after inflating the empirical average by
a multiplier:

    E h <= multiplier * E_m h + additive   with probability 1 - exp(-x).

All logarithms are natural.  Signals are assumed on the unit sphere, so
the plain loss lives in [0, 1] and an additive term >= 1 makes a bound
vacuous; reports carry that flag and the loss scale explicitly.

Variants:
  "maurer"  dimension-free second-moment bound, squared-error scale;
  "slow"    covering-number bound decaying like sqrt(log(m)/m);
  "fast"    localized bound decaying like log(m)/m with multiplier K/(K-1).

The k-sparse family is the l1 family at lam = k / (1 - delta), where
delta bounds the order-(k-1) Babel value of the dictionary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .core import InapplicableError

L1_VARIANTS = ("maurer", "slow", "fast")


@dataclass(frozen=True)
class BoundInputs:
    """Inputs shared by the bound calculators; unused fields may stay None.

    n, p: signal dimension and dictionary size; m: sample count;
    x: confidence exponent (failure probability exp(-x)); lam: l1 radius;
    k, delta: sparsity level and Babel bound for the k-sparse family;
    K, alpha: fast-rate multiplier parameter (K > 1) and localization
    weight; gamma: column-norm cap (feature-norm cap for kernels);
    cover_c, holder_l, holder_alpha: kernel covering constants.
    """

    n: int | None = None
    p: int | None = None
    m: int | None = None
    x: float | None = None
    lam: float | None = None
    k: int | None = None
    delta: float | None = None
    K: float | None = None
    alpha: float | None = None
    gamma: float = 1.0
    cover_c: float | None = None
    holder_l: float | None = None
    holder_alpha: float | None = None


@dataclass(frozen=True)
class BoundReport:
    """A bound as multiplier * empirical + sum(parts), with bookkeeping.

    parts is an ordered name -> value breakdown; additive is their exact
    sum.  loss_scale is "plain" for h in [0, 1] and "squared" for h^2.
    branch names the active branch of a max, when the bound has one.
    """

    multiplier: float
    parts: dict[str, float]
    loss_scale: str = "plain"
    branch: str | None = None

    @property
    def additive(self) -> float:
        return float(sum(self.parts.values()))

    @property
    def vacuous(self) -> bool:
        return self.additive >= 1.0

    def to_dict(self) -> dict:
        return {
            "multiplier": self.multiplier,
            "additive": self.additive,
            "parts": dict(self.parts),
            "vacuous": self.vacuous,
            "loss_scale": self.loss_scale,
            "branch": self.branch,
        }


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _check_mx(m, x) -> tuple[int, float]:
    _require(m is not None and int(m) >= 1, f"m must be a positive integer, got {m}")
    _require(x is not None and float(x) >= 0.0 and math.isfinite(float(x)),
             f"x must be finite and >= 0, got {x}")
    return int(m), float(x)


def _check_np(n, p) -> tuple[int, int]:
    _require(n is not None and int(n) >= 1, f"n must be a positive integer, got {n}")
    _require(p is not None and int(p) >= 1, f"p must be a positive integer, got {p}")
    return int(n), int(p)


def _check_delta(delta) -> float:
    _require(delta is not None and float(delta) >= 0.0,
             f"delta must be >= 0, got {delta}")
    # delta >= 1 is not a malformed input but a dictionary class the
    # k-sparse machinery cannot cover (the coefficient l1 control fails)
    if float(delta) >= 1.0:
        raise InapplicableError(f"needs delta < 1, got delta = {delta}")
    return float(delta)


def log_cover_l1(n: int, p: int, lam: float, eps: float) -> float:
    """log of the covering number (4 lam / eps)^(np) of the l1-constrained
    error-function class at radius eps, clamped at 0."""
    n, p = _check_np(n, p)
    _require(lam is not None and float(lam) > 0.0, f"lam must be > 0, got {lam}")
    _require(float(eps) > 0.0, f"eps must be > 0, got {eps}")
    return max(0.0, n * p * math.log(4.0 * float(lam) / float(eps)))


def log_cover_ksparse(n: int, p: int, k: int, delta: float, eps: float) -> float:
    """log of the covering number (4k / (eps (1 - delta)))^(np), clamped at 0."""
    n, p = _check_np(n, p)
    _require(k is not None and int(k) >= 1, f"k must be a positive integer, got {k}")
    _check_delta(delta)
    _require(float(eps) > 0.0, f"eps must be > 0, got {eps}")
    return max(0.0, n * p * math.log(4.0 * int(k) / (float(eps) * (1.0 - float(delta)))))


def slow_rate_generic(B: float, C: float, d: float, m: int, x: float) -> BoundReport:
    """Covering-number deviation bound for a [0, B]-valued function class
    with covering numbers (C / eps)^d, evaluated at eps = 1 / sqrt(m).

    Applicable when the cover at that radius has more than e / B^2
    elements; otherwise raises InapplicableError.
    """
    m, x = _check_mx(m, x)
    _require(float(B) > 0.0, f"B must be > 0, got {B}")
    _require(float(C) > 0.0, f"C must be > 0, got {C}")
    _require(float(d) >= 1.0, f"d must be >= 1, got {d}")
    B, C, d = float(B), float(C), float(d)
    log_cover = d * math.log(C * math.sqrt(m))
    if not log_cover > 1.0 - 2.0 * math.log(B):
        raise InapplicableError(
            f"cover size (C sqrt(m))^d = exp({log_cover:.6g}) does not exceed e/B^2")
    parts = {
        "cover": B * math.sqrt(log_cover / (2.0 * m)),
        "confidence": B * math.sqrt(x / (2.0 * m)),
        "discretization": math.sqrt(4.0 / m),
    }
    return BoundReport(multiplier=1.0, parts=parts, loss_scale="plain")


def fast_rate_generic(C: float, d: float, m: int, x: float, K: float, alpha: float) -> BoundReport:
    """Localized bound for a [0, 1]-valued class with covering numbers
    (C / eps)^d, C > 2:

        E f <= K/(K-1) E_m f + 6 K max(branches) + (11 x + 5 K) / m

    with branches alpha C^2 / (2m), 480^2 (d+1) ln(m/alpha) / m, and
    (20 + 22 ln m) / m.  The report records which branch is active.
    """
    m, x = _check_mx(m, x)
    _require(float(d) >= 1.0, f"d must be >= 1, got {d}")
    _require(K is not None and float(K) > 1.0, f"K must be > 1, got {K}")
    _require(alpha is not None and float(alpha) > 0.0, f"alpha must be > 0, got {alpha}")
    C, d, K, alpha = float(C), float(d), float(K), float(alpha)
    if not C > 2.0:
        raise InapplicableError(f"fast rate needs a cover constant C > 2, got C = {C:.6g}")
    _require(m / alpha > 1.0, f"need m/alpha > 1 for ln(m/alpha), got m={m}, alpha={alpha}")
    branches = {
        "alpha": alpha * C * C / (2.0 * m),
        "entropy": 480.0 ** 2 * (d + 1.0) * math.log(m / alpha) / m,
        "logm": (20.0 + 22.0 * math.log(m)) / m,
    }
    branch = max(branches, key=lambda name: branches[name])
    parts = {
        "localization": 6.0 * K * branches[branch],
        "confidence": (11.0 * x + 5.0 * K) / m,
    }
    return BoundReport(multiplier=K / (K - 1.0), parts=parts, loss_scale="plain", branch=branch)


def l1_generalization_bound(inputs: BoundInputs, variant: str) -> BoundReport:
    """Generalization bound for l1-constrained representation error.

    maurer: squared scale, dimension-free in n,
        E h^2 <= E_m h^2 + sqrt(p^2 (14 lam + sqrt(ln(16 m lam^2))/2)^2 / m)
                 + sqrt(x / (2m));
    slow: slow_rate_generic with B = 1, C = 4 lam, d = n p;
    fast: fast_rate_generic with C = 4 lam, d = n p.
    """
    if variant not in L1_VARIANTS:
        raise ValueError(f"variant must be one of {L1_VARIANTS}, got {variant!r}")
    _require(inputs.lam is not None and float(inputs.lam) > 0.0,
             f"lam must be > 0, got {inputs.lam}")
    lam = float(inputs.lam)
    m, x = _check_mx(inputs.m, inputs.x)
    if variant == "maurer":
        _require(inputs.p is not None and int(inputs.p) >= 1,
                 f"p must be a positive integer, got {inputs.p}")
        p = int(inputs.p)
        log_arg = 16.0 * m * lam * lam
        if log_arg < 1.0:
            raise InapplicableError(f"needs 16 m lam^2 >= 1, got {log_arg:.6g}")
        inner = 14.0 * lam + 0.5 * math.sqrt(math.log(log_arg))
        parts = {
            "complexity": math.sqrt(p * p * inner * inner / m),
            "confidence": math.sqrt(x / (2.0 * m)),
        }
        return BoundReport(multiplier=1.0, parts=parts, loss_scale="squared")
    n, p = _check_np(inputs.n, inputs.p)
    if variant == "slow":
        return slow_rate_generic(B=1.0, C=4.0 * lam, d=n * p, m=m, x=x)
    return fast_rate_generic(C=4.0 * lam, d=n * p, m=m, x=x, K=inputs.K, alpha=inputs.alpha)


def _ksparse_lam(inputs: BoundInputs) -> float:
    _require(inputs.k is not None and int(inputs.k) >= 1,
             f"k must be a positive integer, got {inputs.k}")
    delta = _check_delta(inputs.delta)
    return int(inputs.k) / (1.0 - delta)


def ksparse_generalization_bound(inputs: BoundInputs, variant: str) -> BoundReport:
    """k-sparse generalization bound: the l1 bound at lam = k / (1 - delta),
    delta an upper bound on mu_{k-1} of the dictionary class."""
    lam_eff = _ksparse_lam(inputs)
    return l1_generalization_bound(replace(inputs, lam=lam_eff), variant)


def optimize_fast_params(inputs: BoundInputs, K_grid, alpha_grid,
                         family: str | None = None, empirical: float = 0.0) -> tuple[float, float, BoundReport]:
    """Pick (K, alpha) on a grid minimizing multiplier * empirical + additive.

    Ties break toward smaller K, then smaller alpha.  Grid points where
    the bound is inapplicable are skipped; if none remain the search
    raises InapplicableError.  family is inferred from the populated
    inputs when not given ("l1" if lam is set, else "ksparse").
    """
    ks = sorted(float(v) for v in K_grid)
    alphas = sorted(float(v) for v in alpha_grid)
    _require(len(ks) > 0 and len(alphas) > 0, "K_grid and alpha_grid must be nonempty")
    _require(float(empirical) >= 0.0, f"empirical must be >= 0, got {empirical}")
    if family is None:
        family = "l1" if inputs.lam is not None else "ksparse"
    if family not in ("l1", "ksparse"):
        raise ValueError(f"family must be 'l1' or 'ksparse', got {family!r}")
    calc = l1_generalization_bound if family == "l1" else ksparse_generalization_bound
    best: tuple[float, float, BoundReport] | None = None
    best_obj = math.inf
    for k_val in ks:
        for a_val in alphas:
            try:
                report = calc(replace(inputs, K=k_val, alpha=a_val), "fast")
            except InapplicableError:
                continue
            objective = report.multiplier * float(empirical) + report.additive
            if objective < best_obj:
                best_obj = objective
                best = (k_val, a_val, report)
    if best is None:
        raise InapplicableError("fast bound inapplicable at every grid point")
    return best


def log_integral_check(gamma: float, x_grid) -> float:
    """Max violation of the entropy-integral inequality

        int_0^x sqrt(log(gamma / eps)) d(eps) <= 2 x sqrt(log(gamma / x))

    over the given x values in (0, 1], for gamma >= sqrt(e).  The left
    side is evaluated by adaptive quadrature (abs tolerance 1e-10); a
    correct implementation keeps the returned maximum <= 0 up to
    quadrature error.
    """
    gamma = float(gamma)
    if not gamma >= math.sqrt(math.e):
        raise InapplicableError(f"gamma must be >= sqrt(e) = {math.sqrt(math.e):.6f}, got {gamma}")
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    _require(xs.size > 0, "x_grid must be nonempty")
    _require(bool(np.all((xs > 0.0) & (xs <= 1.0))), "x values must lie in (0, 1]")
    worst = -math.inf
    for x in xs:
        lhs, _abserr = quad(lambda e: math.sqrt(math.log(gamma / e)), 0.0, x,
                            epsabs=1e-10, limit=200)
        rhs = 2.0 * x * math.sqrt(math.log(gamma / x))
        worst = max(worst, lhs - rhs)
    return float(worst)
