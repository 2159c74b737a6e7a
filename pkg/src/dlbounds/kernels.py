"""Kernelized representation error: everything through Gram matrices.

A kernel kappa(x, y) = <phi(x), phi(y)> lets the sparse coders run in
feature space without materializing phi: the squared error of coefficients
a on atoms d_1..d_p is

    ||sum_i a_i phi(d_i) - phi(x)||^2
        = a' G a + kappa(x, x) - 2 sum_i a_i kappa(x, d_i)

with G the atom Gram matrix.  Smoothness metadata (L, alpha) means kappa
is L-Holder of order alpha in each argument on its stated domain, which
makes phi Holder of order alpha/2 with constant sqrt(2 L); that constant
is conservative (not sharp for the Gaussian kernel) but is what the
covering-number bounds consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CoeffVector, InapplicableError, NORM_TOL, as_vector
from .coherence import BabelValue, babel_from_gram
from .bounds import BoundInputs, BoundReport, _check_delta, _check_mx, _check_np, _require

# Tolerances for kernel sanity checks.
SYMMETRY_TOL = 1e-12
EIG_FLOOR = -1e-8
PSD_QUAD_FLOOR = -1e-8


@dataclass(frozen=True)
class KernelFn:
    """A positive-semidefinite kernel with optional smoothness metadata.

    smoothness = (L, alpha): kappa is L-Holder of order alpha in each
    argument on the domain the kernel is meant for (the unit ball for the
    shipped kernels).  feature_norm_cap bounds sqrt(kappa(x, x)) there.
    """

    fn: Callable[[np.ndarray, np.ndarray], float]
    name: str
    smoothness: tuple[float, float] | None = None
    feature_norm_cap: float | None = None

    def __call__(self, x, y) -> float:
        return float(self.fn(as_vector(x), as_vector(y)))


def linear_kernel() -> KernelFn:
    """kappa(x, y) = <x, y>; on the unit ball it is 1-Lipschitz per argument."""
    return KernelFn(fn=lambda x, y: float(np.dot(x, y)), name="linear",
                    smoothness=(1.0, 1.0), feature_norm_cap=1.0)


def gaussian_kernel(sigma: float) -> KernelFn:
    """kappa(x, y) = exp(-||x - y||^2 / (2 sigma^2)).

    The per-argument Lipschitz constant is exp(-1/2)/sigma (the maximum
    of the radial derivative, attained at distance sigma).
    """
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")

    def fn(x, y):
        diff = x - y
        return math.exp(-float(np.dot(diff, diff)) / (2.0 * sigma * sigma))

    return KernelFn(fn=fn, name=f"gaussian:{sigma:g}",
                    smoothness=(math.exp(-0.5) / sigma, 1.0), feature_norm_cap=1.0)


def polynomial_kernel(degree: int) -> KernelFn:
    """kappa(x, y) = (1 + <x, y>)^degree on the unit ball.

    There |1 + <x, y>| <= 2, giving Lipschitz constant degree * 2^(degree-1)
    per argument and feature norms at most 2^(degree/2).
    """
    degree = int(degree)
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    return KernelFn(fn=lambda x, y: (1.0 + float(np.dot(x, y))) ** degree,
                    name=f"poly:{degree}",
                    smoothness=(degree * 2.0 ** (degree - 1), 1.0),
                    feature_norm_cap=2.0 ** (degree / 2.0))


def kernel_from_name(name: str) -> KernelFn:
    """Parse "linear", "gaussian:SIGMA", or "poly:DEGREE"."""
    base, _, arg = str(name).partition(":")
    try:
        if base == "linear" and not arg:
            return linear_kernel()
        if base == "gaussian" and arg:
            return gaussian_kernel(float(arg))
        if base == "poly" and arg:
            return polynomial_kernel(int(arg))
    except ValueError as exc:
        raise ValueError(f"bad kernel spec {name!r}: {exc}") from None
    raise ValueError(f"unknown kernel {name!r}; use linear, gaussian:SIGMA, or poly:DEGREE")


def gram_matrix(kf: KernelFn, points: np.ndarray) -> np.ndarray:
    """Gram matrix of kappa over rows of points (symmetric fill of the
    upper triangle; each unordered pair is evaluated once)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError(f"points must be a nonempty 2-d array, got shape {pts.shape}")
    p = pts.shape[0]
    g = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            g[i, j] = g[j, i] = kf(pts[i], pts[j])
    return g


def validate_kernel(kf: KernelFn, points: np.ndarray) -> list[str]:
    """Report kernel sanity violations on sample points: asymmetry beyond
    SYMMETRY_TOL, or Gram minimum eigenvalue below EIG_FLOOR."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError(f"points must be a nonempty 2-d array, got shape {pts.shape}")
    p = pts.shape[0]
    report: list[str] = []
    g = np.empty((p, p))
    worst_asym = 0.0
    for i in range(p):
        for j in range(p):
            g[i, j] = kf(pts[i], pts[j])
    for i in range(p):
        for j in range(i + 1, p):
            worst_asym = max(worst_asym, abs(g[i, j] - g[j, i]))
    if worst_asym > SYMMETRY_TOL:
        report.append(f"asymmetry {worst_asym:.3g} exceeds {SYMMETRY_TOL:g}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (g + g.T)).min())
    if min_eig < EIG_FLOOR:
        report.append(f"Gram min eigenvalue {min_eig:.3g} below {EIG_FLOOR:g}")
    return report


@dataclass(frozen=True)
class KernelDictionary:
    """Atom pre-images (rows of points) plus their cached Gram matrix.

    gamma caps the feature norms sqrt(kappa(d_i, d_i)); for bound use the
    Gram diagonal must lie in [1 - tol, gamma^2 + tol], which
    validate_kernel_dictionary reports on.
    """

    points: np.ndarray
    gram: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        g = np.asarray(self.gram, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"points must be a nonempty 2-d array, got shape {pts.shape}")
        if g.shape != (pts.shape[0], pts.shape[0]):
            raise ValueError(f"gram shape {g.shape} does not match {pts.shape[0]} points")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(g))):
            raise ValueError("points and gram must be finite")
        if not float(self.gamma) >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        pts = pts.copy(); pts.flags.writeable = False
        g = g.copy(); g.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def build(cls, points: np.ndarray, kf: KernelFn, gamma: float = 1.0) -> "KernelDictionary":
        return cls(points=np.asarray(points, dtype=float),
                   gram=gram_matrix(kf, points), gamma=gamma)

    @property
    def p(self) -> int:
        return self.points.shape[0]


def validate_kernel_dictionary(kd: KernelDictionary) -> list[str]:
    """Report Gram-diagonal entries outside [1 - tol, gamma^2 + tol]."""
    report: list[str] = []
    diag = np.diag(kd.gram)
    low = np.flatnonzero(diag < 1.0 - NORM_TOL)
    high = np.flatnonzero(diag > kd.gamma ** 2 + NORM_TOL)
    for i in low:
        report.append(f"atom {i}: kappa(d,d) = {diag[i]:.12g} below 1")
    for i in high:
        report.append(f"atom {i}: kappa(d,d) = {diag[i]:.12g} above gamma^2 = {kd.gamma ** 2:g}")
    return report


def _coeff_support(coeffs, p: int) -> tuple[np.ndarray, np.ndarray]:
    """(support indices, their values) from a CoeffVector or dense array."""
    if isinstance(coeffs, CoeffVector):
        if coeffs.values.shape[0] != p:
            raise ValueError(f"coefficients have length {coeffs.values.shape[0]}, expected {p}")
        idx = np.asarray(coeffs.support, dtype=int)
        return idx, coeffs.values[idx]
    dense = as_vector(coeffs)
    if dense.shape[0] != p:
        raise ValueError(f"coefficients have length {dense.shape[0]}, expected {p}")
    idx = np.flatnonzero(dense != 0.0)
    return idx, dense[idx]


def kernel_repr_error(x, coeffs, kd: KernelDictionary, kf: KernelFn) -> float:
    """sqrt of the feature-space squared error of the given coefficients.

    Works on the support only (O(k^2) Gram lookups plus k kernel
    applications).  Raises if the quadratic form dips below the PSD floor
    -1e-8; small negatives above it clamp to 0.
    """
    xv = as_vector(x)
    idx, vals = _coeff_support(coeffs, kd.p)
    quad_form = float(kf(xv, xv))
    if idx.size:
        g_ss = kd.gram[np.ix_(idx, idx)]
        kx = np.array([kf(xv, kd.points[i]) for i in idx])
        quad_form += float(vals @ g_ss @ vals) - 2.0 * float(vals @ kx)
    if quad_form < PSD_QUAD_FLOOR:
        raise ValueError(f"squared error {quad_form:.3g} below PSD floor {PSD_QUAD_FLOOR:g}; "
                         "kernel is not positive semidefinite on these points")
    return math.sqrt(max(quad_form, 0.0))


def kernel_greedy_ksparse(x, kd: KernelDictionary, kf: KernelFn, k: int):
    """Greedy pursuit in feature space, using only kernel values.

    Residual correlations are kappa(x, d_i) - (G a)_i; the support refit
    solves G_SS a = kappa_S(x) (with a 1e-12 ridge if G_SS is numerically
    singular).  Under the linear kernel this matches greedy_ksparse.
    """
    from .coders import RANK_RTOL, RIDGE, CodingResult

    xv = as_vector(x)
    k = int(k)
    if not 1 <= k <= kd.p:
        raise ValueError(f"k must satisfy 1 <= k <= p = {kd.p}, got {k}")
    kx = np.array([kf(xv, kd.points[i]) for i in range(kd.p)])
    support: list[int] = []
    coef = np.zeros(0)
    ridge_used = False
    for _ in range(k):
        corr = np.abs(kx - (kd.gram[:, support] @ coef if support else 0.0))
        if support:
            corr[support] = -1.0
        i = int(np.argmax(corr))
        if corr[i] <= 0.0:
            break
        support.append(i)
        g_ss = kd.gram[np.ix_(support, support)]
        rhs = kx[support]
        eigs = np.linalg.eigvalsh(g_ss)
        if eigs.min() > RANK_RTOL ** 2 * max(eigs.max(), 0.0) and eigs.min() > 0.0:
            ridge_used = False
        else:
            g_ss = g_ss + RIDGE * np.eye(len(support))
            ridge_used = True
        coef = np.linalg.solve(g_ss, rhs)
        # Normal equations square the conditioning; two rounds of iterative
        # refinement claw back the digits the Euclidean QR path keeps.
        for _ in range(2):
            coef += np.linalg.solve(g_ss, rhs - g_ss @ coef)
    dense = np.zeros(kd.p)
    dense[support] = coef
    coeffs = CoeffVector(dense, tuple(support))
    error = kernel_repr_error(xv, coeffs, kd, kf)
    return CodingResult(coeffs=coeffs, error=error, method="greedy", ridge_used=ridge_used)


def feature_babel(kd: KernelDictionary, k: int) -> BabelValue:
    """Babel value of the atoms in feature space, read off the Gram matrix."""
    return babel_from_gram(kd.gram, k)


def holder_feature_check(kf: KernelFn, pairs) -> float:
    """Max violation of the feature-space Holder bound over sample pairs:

        ||phi(x) - phi(y)|| <= sqrt(2 L) ||x - y||^(alpha/2)

    which follows from the kernel being L-Holder of order alpha in each
    argument.  <= 0 means the metadata is consistent on these pairs.
    """
    if kf.smoothness is None:
        raise ValueError(f"kernel {kf.name!r} carries no smoothness metadata")
    hol_l, hol_a = kf.smoothness
    worst = -math.inf
    count = 0
    for x, y in pairs:
        xv, yv = as_vector(x), as_vector(y)
        sq = kf(xv, xv) - 2.0 * kf(xv, yv) + kf(yv, yv)
        if sq < PSD_QUAD_FLOOR:
            raise ValueError(f"feature distance squared {sq:.3g} below PSD floor")
        feat_dist = math.sqrt(max(sq, 0.0))
        bound = math.sqrt(2.0 * hol_l) * float(np.linalg.norm(xv - yv)) ** (hol_a / 2.0)
        worst = max(worst, feat_dist - bound)
        count += 1
    if count == 0:
        raise ValueError("pairs must be nonempty")
    return float(worst)


def kernel_cover_log(n: int, p: int, eps: float, *, cover_c: float, holder_l: float,
                     holder_alpha: float, gamma: float = 1.0, lam: float | None = None,
                     k: int | None = None, delta: float | None = None) -> float:
    """log covering number of the kernelized error-function class, clamped
    at 0.  With lam set: np * log(C (lam gamma L / eps)^(1/alpha)); with
    (k, delta) set: the same at lam gamma = k gamma^2 / (1 - delta)."""
    n, p = _check_np(n, p)
    _require(float(eps) > 0.0, f"eps must be > 0, got {eps}")
    _require(float(cover_c) > 0.0, f"cover_c must be > 0, got {cover_c}")
    _require(float(holder_l) > 0.0, f"holder_l must be > 0, got {holder_l}")
    _require(float(holder_alpha) > 0.0, f"holder_alpha must be > 0, got {holder_alpha}")
    _require(float(gamma) >= 1.0, f"gamma must be >= 1, got {gamma}")
    if (lam is None) == (k is None):
        raise ValueError("set exactly one of lam or (k, delta)")
    if lam is not None:
        _require(float(lam) > 0.0, f"lam must be > 0, got {lam}")
        scale = float(lam) * float(gamma) * float(holder_l)
    else:
        _require(int(k) >= 1, f"k must be a positive integer, got {k}")
        delta = _check_delta(delta)
        scale = int(k) * float(gamma) ** 2 * float(holder_l) / (1.0 - delta)
    value = n * p * (math.log(float(cover_c)) + math.log(scale / float(eps)) / float(holder_alpha))
    return max(0.0, value)


KERNEL_VARIANTS = ("maurer_k", "slow")


def kernel_gen_bound(inputs: BoundInputs, variant: str) -> BoundReport:
    """Generalization bounds for kernelized k-sparse representation.

    maurer_k: squared scale, feature norms capped by 1 (gamma must be 1),
        identical to the Euclidean k-sparse maurer bound;
    slow: plain scale for gamma-capped feature norms,

        E h <= E_m h + gamma (sqrt(np ln(sqrt(m) C^alpha k gamma^2 L /
              (1 - delta)) / (2 alpha m)) + sqrt(x / (2m))) + sqrt(4/m).
    """
    if variant not in KERNEL_VARIANTS:
        raise ValueError(f"variant must be one of {KERNEL_VARIANTS}, got {variant!r}")
    if variant == "maurer_k":
        if abs(float(inputs.gamma) - 1.0) > 1e-12:
            raise InapplicableError(
                f"maurer_k needs feature norms capped by 1 (gamma = 1), got gamma = {inputs.gamma}")
        from .bounds import ksparse_generalization_bound

        return ksparse_generalization_bound(inputs, "maurer")
    n, p = _check_np(inputs.n, inputs.p)
    m, x = _check_mx(inputs.m, inputs.x)
    _require(inputs.k is not None and int(inputs.k) >= 1,
             f"k must be a positive integer, got {inputs.k}")
    delta = _check_delta(inputs.delta)
    _require(inputs.cover_c is not None and float(inputs.cover_c) > 0.0,
             f"cover_c must be > 0, got {inputs.cover_c}")
    _require(inputs.holder_l is not None and float(inputs.holder_l) > 0.0,
             f"holder_l must be > 0, got {inputs.holder_l}")
    _require(inputs.holder_alpha is not None and float(inputs.holder_alpha) > 0.0,
             f"holder_alpha must be > 0, got {inputs.holder_alpha}")
    _require(float(inputs.gamma) >= 1.0, f"gamma must be >= 1, got {inputs.gamma}")
    k = int(inputs.k)
    c_cov, hol_l, hol_a = float(inputs.cover_c), float(inputs.holder_l), float(inputs.holder_alpha)
    gamma = float(inputs.gamma)
    log_arg = math.sqrt(m) * c_cov ** hol_a * k * gamma ** 2 * hol_l / (1.0 - delta)
    log_cover = n * p * math.log(log_arg) / hol_a
    if not log_cover > 1.0 - 2.0 * math.log(gamma):
        raise InapplicableError(
            f"cover size exp({log_cover:.6g}) does not exceed e/gamma^2")
    parts = {
        "cover": gamma * math.sqrt(n * p * math.log(log_arg) / (2.0 * hol_a * m)),
        "confidence": gamma * math.sqrt(x / (2.0 * m)),
        "discretization": math.sqrt(4.0 / m),
    }
    return BoundReport(multiplier=1.0, parts=parts, loss_scale="plain")
