"""Monte Carlo simulation of shallow Gaussian networks on the sphere.

The field is ``F(x) = n^{-1/2} sum_j V_j sigma(W_j x)`` with i.i.d. standard
Gaussian ``V_j`` and ``W_j in R^d``; its q-th chaos component replaces
``sigma`` by ``J_q h_q``.

Every replica ``r`` draws from its own generator seeded by
``SeedSequence(master_seed, spawn_key=(stream, r))``. Replicas are computed
one at a time and reassembled in index order, so results do not depend on
how many worker threads are used.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .combinatorics import upsilon
from .hermite import Activation, HermiteExpansion, eval_hermite_normalized
from .sphere import pair_moment_exact, sample_sphere

THREADS_ENV = "CHAOSLAB_THREADS"
BLOCK = 256

# seed streams
NETWORK, POINTS, REPLICA_POINTS, LIMIT = 0, 1, 2, 3


class NumericalError(RuntimeError):
    pass


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def stream_rng(master_seed: int, stream: int, index: int | None = None) -> np.random.Generator:
    """Generator for ``(master_seed, stream[, index])`` via SeedSequence hashing."""
    key = (stream,) if index is None else (stream, index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=key)))


def map_replicas(fn: Callable[[int], object], R: int, threads: int | None = None) -> list:
    """Evaluate ``fn(r)`` for ``r < R`` in fixed blocks; output is in replica order."""
    threads = default_threads() if threads is None else threads
    blocks = [range(a, min(a + BLOCK, R)) for a in range(0, R, BLOCK)]

    def run(block):
        return [fn(r) for r in block]

    if threads <= 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    return [item for part in parts for item in part]


def jackknife_stderr(values: np.ndarray) -> float:
    """Leave-one-out jackknife standard error of the mean of ``values``."""
    values = np.asarray(values, dtype=float)
    R = len(values)
    loo = (values.sum() - values) / (R - 1)
    return float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True)
class SimConfig:
    d: int
    n: int
    M: int
    R: int
    master_seed: int = 0
    activation: Activation = field(default_factory=Activation.relu)
    chaos_orders: tuple[int, ...] = ()
    threads: int | None = None

    def __post_init__(self):
        if self.d < 2 or self.n < 1 or self.M < 2 or self.R < 2:
            raise ValueError(f"need d >= 2, n >= 1, M >= 2, R >= 2; got d={self.d}, n={self.n}, M={self.M}, R={self.R}")

    def points(self) -> np.ndarray:
        """The fixed evaluation points, i.i.d. uniform on the sphere."""
        return sample_sphere(self.d, stream_rng(self.master_seed, POINTS), self.M)


@dataclass(frozen=True)
class FieldSample:
    points: np.ndarray
    values: np.ndarray
    kind: str
    q: int | None
    master_seed: int
    stream: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("field sample contains non-finite values")


def sample_network(cfg: SimConfig, replica: int) -> tuple[np.ndarray, np.ndarray]:
    """Outer weights ``V`` (n,) and inner weights ``W`` (n, d) for one replica."""
    rng = stream_rng(cfg.master_seed, NETWORK, replica)
    V = rng.standard_normal(cfg.n)
    W = rng.standard_normal((cfg.n, cfg.d))
    return V, W


def eval_field(weights, activation: Callable, points: np.ndarray) -> np.ndarray:
    V, W = weights
    return V @ activation(W @ points.T) / math.sqrt(len(V))


def chaos_component(weights, q: int, J_q: float, points: np.ndarray) -> np.ndarray:
    """``F_q(x) = J_q n^{-1/2} sum_j V_j h_q(W_j x)`` at each point."""
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    V, W = weights
    return J_q * (V @ eval_hermite_normalized(q, W @ points.T)) / math.sqrt(len(V))


def norm_sq(values: np.ndarray) -> float | np.ndarray:
    """Unit-volume squared L2 norm: the mean of squares over the points (last axis)."""
    return np.mean(np.asarray(values) ** 2, axis=-1)


def simulate_field(cfg: SimConfig, kind: str = "field", q: int | None = None, J_q: float | None = None,
                   points: np.ndarray | None = None) -> FieldSample:
    """Replicated evaluations of ``F`` (``kind='field'``) or ``F_q`` (``kind='chaos'``)."""
    pts = cfg.points() if points is None else points
    if kind == "field":
        fn = lambda r: eval_field(sample_network(cfg, r), cfg.activation, pts)
    elif kind == "chaos":
        if q is None or J_q is None:
            raise ValueError("chaos samples need q and J_q")
        fn = lambda r: chaos_component(sample_network(cfg, r), q, J_q, pts)
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    values = np.array(map_replicas(fn, cfg.R, cfg.threads))
    return FieldSample(pts, values, kind, q, cfg.master_seed, NETWORK)


@dataclass(frozen=True)
class Estimate:
    quantity: str
    estimate: float
    stderr: float
    exact: float | None = None

    @property
    def z(self) -> float:
        if self.exact is None:
            return math.nan
        diff = self.estimate - self.exact
        if self.stderr == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.stderr


def _mean_estimate(quantity, vals, exact=None) -> Estimate:
    vals = np.asarray(vals, dtype=float)
    return Estimate(quantity, float(vals.mean()), jackknife_stderr(vals), exact)


def second_moment_mc(cfg: SimConfig, q: int, J_q: float) -> Estimate:
    """Replica mean of ``|F_q|^2``; its expectation is ``J_q**2``."""
    sample = simulate_field(cfg, "chaos", q, J_q)
    return _mean_estimate(f"norm_sq_F{q}", norm_sq(sample.values), J_q**2)


def chaos_remainder_mc(cfg: SimConfig, exp: HermiteExpansion, Q: int) -> Estimate:
    """Replica mean of ``|F - sum_{q<=Q} F_q|^2``; its expectation is the Parseval tail."""
    pts = cfg.points()

    def one(r):
        w = sample_network(cfg, r)
        rest = eval_field(w, cfg.activation, pts)
        for q in range(Q + 1):
            if exp.coeffs[q] != 0:
                rest = rest - chaos_component(w, q, exp.coeffs[q], pts)
        return norm_sq(rest)

    from .bounds import tail_sq

    vals = map_replicas(one, cfg.R, cfg.threads)
    return _mean_estimate(f"remainder_Q{Q}", vals, tail_sq(exp, Q))


# --- fourth moments and cumulants -------------------------------------------------


def z_fourth_moment_exact(J_q: float, q: int, d: int) -> float:
    """``E|Z_q|^4 = J_q^4 (1 + 2 int int <x1,x2>^{2q})`` for the limit chaos component."""
    return J_q**4 * (1.0 + 2.0 * pair_moment_exact(d, q))


def hermite_square_coeffs(q: int) -> dict[int, float]:
    """Coefficients ``a_m`` with ``h_q^2 = sum_m a_m h_m`` (only even ``m`` occur)."""
    out = {}
    for r in range(q + 1):
        m = 2 * q - 2 * r
        out[m] = math.factorial(r) * math.comb(q, r) ** 2 * math.sqrt(math.factorial(m)) / math.factorial(q)
    return out


def hermite_square_moment(p: int, q: int, rho: float) -> float:
    """``E[h_p(A)^2 h_q(B)^2]`` for standard Gaussians with correlation ``rho``."""
    ap, aq = hermite_square_coeffs(p), hermite_square_coeffs(q)
    return math.fsum(ap[m] * aq[m] * rho**m for m in ap if m in aq)


def _integrated_square_moment(p: int, q: int, d: int) -> float:
    """``int int E[h_p(W x1)^2 h_q(W x2)^2] dx1 dx2`` over the sphere pair."""
    ap, aq = hermite_square_coeffs(p), hermite_square_coeffs(q)
    return math.fsum(ap[m] * aq[m] * pair_moment_exact(d, m // 2) for m in ap if m in aq)


def fourth_moment_gap_exact(q: int, J_q: float, d: int, n: int) -> float:
    """``E|F_q|^4 - E|Z_q|^4`` from the direct Gaussian moment computation.

    Uses ``E[V^4] = 3`` and the Hermite product formula; for ``q = 1`` it
    reduces to ``J^4 (2 + 4 m_1(d)) / n``.
    """
    cum = 3.0 * _integrated_square_moment(q, q, d) - 1.0 - 2.0 * pair_moment_exact(d, q)
    return J_q**4 * cum / n


def fourth_moment_gap_diagram_sum(q: int, J_q: float, d: int, n: int) -> float:
    """The diagram-count expression ``J^4/(n (q!)^2) sum_{q1<q} Upsilon_{q1,q} m_{q-q1}(d)``."""
    s = math.fsum(upsilon(q1, q) / math.factorial(q) ** 2 * pair_moment_exact(d, q - q1) for q1 in range(q))
    return J_q**4 * s / n


def offdiag_cov_exact(p: int, q: int, J_p: float, J_q: float, d: int, n: int) -> float:
    """``Cov(|F_p|^2, |F_q|^2)`` for ``p != q``; exactly proportional to ``1/n``."""
    if p == q:
        raise ValueError("use fourth_moment_gap_exact for p == q")
    return J_p**2 * J_q**2 * (3.0 * _integrated_square_moment(p, q, d) - 1.0) / n


def cumulant_pointpair_exact(q: int, rho: float) -> float:
    """``Cum(V H_q(A), V H_q(A), V H_q(B), V H_q(B))`` with raw Hermite ``H_q``."""
    f = math.factorial(q) ** 2
    return f * (3.0 * hermite_square_moment(q, q, rho) - 1.0 - 2.0 * rho ** (2 * q))


def cumulant_pointpair(q: int, rho: float, method: str = "mc", R: int = 10**6,
                       rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Fourth joint cumulant of ``(V H_q(A), V H_q(A), V H_q(B), V H_q(B))``.

    ``method='mc'`` estimates it from ``R`` draws through the four-moment
    combination and returns ``(estimate, jackknife stderr)``;
    ``'symbolic-q1'`` returns ``2 + 4 rho^2`` (only for ``q = 1``);
    ``'exact'`` uses the Hermite product formula for any ``q``.
    """
    if abs(rho) > 1:
        raise ValueError(f"|rho| must be <= 1, got {rho}")
    if method == "symbolic-q1":
        if q != 1:
            raise NotImplementedError("symbolic cumulant is only available for q = 1")
        return 2.0 + 4.0 * rho**2, 0.0
    if method == "exact":
        return cumulant_pointpair_exact(q, rho), 0.0
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng() if rng is None else rng
    V, G1, G2 = rng.standard_normal((3, R))
    A = G1
    B = rho * G1 + math.sqrt(max(0.0, 1 - rho * rho)) * G2
    scale = math.sqrt(math.factorial(q))
    X = V * eval_hermite_normalized(q, A) * scale
    Y = V * eval_hermite_normalized(q, B) * scale
    cols = np.stack([X * X * Y * Y, X * X, Y * Y, X * Y])
    sums = cols.sum(axis=1)

    def stat(m):
        return m[0] - m[1] * m[2] - 2 * m[3] ** 2

    full = stat(sums / R)
    loo = stat((sums[:, None] - cols) / (R - 1))
    se = math.sqrt((R - 1) / R * float(np.sum((loo - loo.mean()) ** 2)))
    return float(full), se


def _gram_terms(cfg: SimConfig, r: int, p: int, q: int, J_p: float, J_q: float, estimator: str) -> float:
    """Per-replica U-statistic over distinct point pairs for the fourth-moment functionals.

    ``p == q`` targets ``E|F_q|^4 - E|Z_q|^4``; ``p != q`` targets
    ``Cov(|F_p|^2, |F_q|^2)``. Points are redrawn per replica so the average
    integrates over the sphere pair. ``estimator='plain'`` uses the sampled
    field; ``'conditional'`` integrates out ``V`` exactly given ``W``, leaving
    ``(K_ii - m_i)(K_kk - m_k) + 2 (K_ik - m_ik)^2`` for the Gram matrix
    ``K = A^T A / n`` with known means ``m``; this has the same expectation.
    """
    V, W = sample_network(cfg, r)
    X = sample_sphere(cfg.d, stream_rng(cfg.master_seed, REPLICA_POINTS, r), cfg.M)
    proj = W @ X.T
    Ap = J_p * eval_hermite_normalized(p, proj)
    Aq = Ap if q == p else J_q * eval_hermite_normalized(q, proj)
    off = ~np.eye(cfg.M, dtype=bool)
    rho = X @ X.T
    if estimator == "plain":
        Fp = V @ Ap / math.sqrt(cfg.n)
        Fq = Fp if q == p else V @ Aq / math.sqrt(cfg.n)
        prod = np.outer(Fp**2, Fq**2)
        base = J_p**4 * (1 + 2 * rho ** (2 * p)) if p == q else J_p**2 * J_q**2 * np.ones_like(rho)
        return float(np.mean((prod - base)[off]))
    if estimator != "conditional":
        raise ValueError(f"unknown estimator {estimator!r}")
    # Centre the Gram entries at their known means; the product terms then
    # carry the whole 1/n signal without O(n^{-1/2}) linear fluctuations.
    Kpp = Ap.T @ Ap / cfg.n
    if p == q:
        c = np.diag(Kpp) - J_p**2
        vals = np.outer(c, c) + 2 * (Kpp - J_p**2 * rho**p) ** 2
    else:
        cq = np.einsum("jm,jm->m", Aq, Aq) / cfg.n - J_q**2
        Kpq = Ap.T @ Aq / cfg.n
        vals = np.outer(np.diag(Kpp) - J_p**2, cq) + 2 * Kpq**2
    return float(np.mean(vals[off]))


@dataclass(frozen=True)
class GapEstimate:
    q: int
    d: int
    n: int
    M: int
    R: int
    estimate: float
    stderr: float
    fourth_moment: float
    exact: float
    diagram_sum: float


def fourth_moment_gap_mc(cfg: SimConfig, q: int, J_q: float, estimator: str = "conditional") -> GapEstimate:
    """Monte Carlo estimate of ``E|F_q|^4 - E|Z_q|^4`` with jackknife error.

    ``E|F_q|^4`` is estimated from replica averages of distinct-pair
    U-statistics (unbiased for the sphere integral); the exact
    ``E|Z_q|^4`` is subtracted.
    """
    if cfg.R < 1000:
        raise ValueError(f"need R >= 1000 replicas, got {cfg.R}")
    vals = np.array(map_replicas(lambda r: _gram_terms(cfg, r, q, q, J_q, J_q, estimator), cfg.R, cfg.threads))
    est = float(vals.mean())
    z4 = z_fourth_moment_exact(J_q, q, cfg.d)
    return GapEstimate(
        q, cfg.d, cfg.n, cfg.M, cfg.R, est, jackknife_stderr(vals), est + z4,
        fourth_moment_gap_exact(q, J_q, cfg.d, cfg.n), fourth_moment_gap_diagram_sum(q, J_q, cfg.d, cfg.n),
    )


def offdiag_cov_mc(cfg: SimConfig, p: int, q: int, J_p: float, J_q: float, estimator: str = "conditional") -> Estimate:
    """Monte Carlo estimate of ``Cov(|F_p|^2, |F_q|^2)`` for ``p != q``."""
    if p == q:
        raise ValueError("p and q must differ")
    vals = map_replicas(lambda r: _gram_terms(cfg, r, p, q, J_p, J_q, estimator), cfg.R, cfg.threads)
    return _mean_estimate(f"cov_F{p}_F{q}", vals, offdiag_cov_exact(p, q, J_p, J_q, cfg.d, cfg.n))


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)


# --- limit covariance and Gaussian limit ------------------------------------------


def relu_kernel_raw(u):
    """The arccos expression ``(1/pi)(u(pi - arccos u) + sqrt(1 - u^2))`` as displayed."""
    u = _clamp_unit(u)
    return (u * (np.pi - np.arccos(u)) + np.sqrt(1 - u * u)) / np.pi


def relu_limit_kernel(u):
    """ReLU limit covariance ``E[relu(A) relu(B)]`` for ``corr(A, B) = u``.

    This is half of :func:`relu_kernel_raw`, which is the normalization
    matching ``|relu|^2 = 1/2`` at ``u = 1`` and the Hermite series.
    """
    return 0.5 * relu_kernel_raw(u)


def _clamp_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1 + 1e-12):
        raise ValueError("kernel argument must lie in [-1, 1]")
    u = np.clip(u, -1.0, 1.0)
    return u if u.ndim else float(u)


def kernel_matrix(points: np.ndarray, exp: HermiteExpansion, orders: Sequence[int] | None = None) -> np.ndarray:
    """``K_ij = sum_q J_q^2 <x_i, x_j>^q`` over ``orders`` (default: all of ``exp``)."""
    u = np.clip(points @ points.T, -1.0, 1.0)
    if orders is None:
        return exp.kernel(u)
    return sum(exp.coeffs[q] ** 2 * u**q for q in orders)


def _sym_sqrt(K: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (K + K.T))
    if vals.min() < -1e-8 * max(1.0, abs(vals.max())):
        raise NumericalError(f"kernel matrix is not positive semidefinite (min eigenvalue {vals.min():.3g})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def gaussian_limit_sample(points: np.ndarray, exp: HermiteExpansion, rng: np.random.Generator,
                          size: int | None = None, orders: Sequence[int] | None = None) -> np.ndarray:
    """Draw(s) of the limit Gaussian field at ``points`` via the symmetric square root of K."""
    S = _sym_sqrt(kernel_matrix(points, exp, orders))
    g = rng.standard_normal((len(points),) if size is None else (size, len(points)))
    return g @ S


def limit_fourth_moment_mc(cfg: SimConfig, exp: HermiteExpansion, q: int) -> Estimate:
    """Replica mean of the distinct-pair U-statistic of ``Z_q(x_i)^2 Z_q(x_k)^2``."""
    off = ~np.eye(cfg.M, dtype=bool)

    def one(r):
        X = sample_sphere(cfg.d, stream_rng(cfg.master_seed, REPLICA_POINTS, r), cfg.M)
        z = gaussian_limit_sample(X, exp, stream_rng(cfg.master_seed, LIMIT, r), orders=[q])
        return float(np.mean(np.outer(z**2, z**2)[off]))

    vals = map_replicas(one, cfg.R, cfg.threads)
    return _mean_estimate(f"Z{q}_fourth_moment", vals, z_fourth_moment_exact(exp.coeffs[q], q, cfg.d))


def limit_field_sample(cfg: SimConfig, exp: HermiteExpansion, points: np.ndarray | None = None) -> FieldSample:
    pts = cfg.points() if points is None else points
    S = _sym_sqrt(kernel_matrix(pts, exp))
    values = np.array(map_replicas(lambda r: stream_rng(cfg.master_seed, LIMIT, r).standard_normal(len(pts)) @ S,
                                   cfg.R, cfg.threads))
    return FieldSample(pts, values, "gaussian-limit", None, cfg.master_seed, LIMIT)


def pairs_with_correlations(d: int, u_values: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Point pairs ``(x1, x2)`` on S^{d-1} with ``<x1, x2>`` equal to each requested value.

    Returns an array of shape ``(len(u_values), 2, d)``.
    """
    out = np.empty((len(u_values), 2, d))
    for i, u in enumerate(u_values):
        x1 = sample_sphere(d, rng)
        y = rng.standard_normal(d)
        y -= (y @ x1) * x1
        y /= np.linalg.norm(y)
        out[i, 0] = x1
        out[i, 1] = u * x1 + math.sqrt(max(0.0, 1 - u * u)) * y
    return out


@dataclass(frozen=True)
class CovarianceReport:
    u: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    series: np.ndarray
    kernel: np.ndarray | None

    @property
    def z(self) -> np.ndarray:
        return (self.empirical - self.series) / self.stderr

    @property
    def max_abs_dev(self) -> float:
        return float(np.max(np.abs(self.empirical - self.series)))

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))


def covariance_check(cfg: SimConfig, exp: HermiteExpansion, pairs: np.ndarray) -> CovarianceReport:
    """Compare ``E[F(x1) F(x2)]`` estimated over replicas with the Hermite series.

    The field has mean zero, so the covariance is estimated by the replica
    mean of ``F(x1) F(x2)``.
    """
    if cfg.R < 1000:
        raise ValueError(f"need R >= 1000 replicas, got {cfg.R}")
    P = len(pairs)
    pts = pairs.reshape(2 * P, cfg.d)
    sample = simulate_field(cfg, "field", points=pts)
    prods = sample.values[:, 0::2] * sample.values[:, 1::2]
    u = np.einsum("pd,pd->p", pairs[:, 0], pairs[:, 1])
    emp = prods.mean(axis=0)
    se = np.array([jackknife_stderr(prods[:, i]) for i in range(P)])
    kern = relu_limit_kernel(np.clip(u, -1, 1)) if cfg.activation.kind == "relu" else None
    return CovarianceReport(u, emp, se, exp.kernel(np.clip(u, -1, 1)), kern)


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def w2_gaussian_proxy(sample: FieldSample, exp: HermiteExpansion) -> float:
    """Bures-Wasserstein distance between moment-matched and limit Gaussians.

    The empirical mean and covariance of the ``M``-point values are compared
    with ``N(0, K)``. Distances use the unit-volume metric, i.e. the squared
    distance is divided by ``M``. Negative eigenvalues from rounding are
    clipped to zero (the only regularization applied). This is a diagnostic:
    it only sees the first two moments.
    """
    R, M = sample.values.shape
    if R < 10 * M:
        raise ValueError(f"need R >= 10 M, got R={R}, M={M}")
    mu = sample.values.mean(axis=0)
    S = np.cov(sample.values, rowvar=False)
    K = kernel_matrix(sample.points, exp)
    rK = _psd_sqrt(K)
    cross = _psd_sqrt(rK @ S @ rK)
    w2 = float(mu @ mu + np.trace(S) + np.trace(K) - 2 * np.trace(cross))
    return math.sqrt(max(0.0, w2) / M)
