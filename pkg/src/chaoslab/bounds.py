"""Evaluation of the d2 bounds of the two main estimates and the choice of truncation.

Both bounds split the field into the first ``Q`` chaoses and a remainder:

* ``thm1``: ``C |sigma| n^{-1/4} sqrt(A_Q) + 3/2 sqrt(T_Q)``, valid for
  ``Q <= log_3 sqrt(n)``;
* ``thm2``: ``C n^{-1/2} A_Q (|sigma|^2 + n^{-1/2} B_Q) + 3/2 sqrt(T_Q)``,

with ``A_Q = sum_{q<=Q} J_q^2 q 3^q``, ``B_Q = sum_{q<=Q} J_q^2 3^q`` and
the Parseval tail ``T_Q = sum_{q>Q} J_q^2``. Sums are accumulated in log
scale and ``n`` may be an arbitrarily large integer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, zeta

from .hermite import Activation, HermiteExpansion

THEOREMS = ("thm1", "thm2")
Q_POLICIES = ("fixed", "optimize", "corollary1")
LOG3 = math.log(3.0)


class HypothesisViolation(ValueError):
    """Raised when a truncation level violates ``Q <= log_3 sqrt(n)``."""


def parse_width(text) -> int:
    """Parse a network width such as ``1e6``, ``10^48`` or ``4096`` into an int."""
    if isinstance(text, int):
        return text
    s = str(text).strip()
    if "^" in s:
        base, _, power = s.partition("^")
        return int(base) ** int(power)
    value = int(Decimal(s))
    if value < 1:
        raise ValueError(f"width must be >= 1, got {text!r}")
    return value


def _log(n) -> float:
    return math.log(n)


@dataclass(frozen=True)
class BoundParams:
    n: int
    C: float = 1.0
    theorem: str = "thm1"
    q_policy: str = "optimize"
    Q: int | None = None
    override: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.theorem not in THEOREMS:
            raise ValueError(f"theorem must be one of {THEOREMS}, got {self.theorem!r}")
        if self.q_policy not in Q_POLICIES:
            raise ValueError(f"q_policy must be one of {Q_POLICIES}, got {self.q_policy!r}")
        if self.q_policy == "fixed" and (self.Q is None or self.Q < 0):
            raise ValueError("fixed policy needs a nonnegative Q")

    @property
    def log_n(self) -> float:
        return _log(self.n)


@dataclass(frozen=True)
class BoundEntry:
    Q: int
    main_term: float
    tail_term: float

    @property
    def total(self) -> float:
        return self.main_term + self.tail_term


@dataclass(frozen=True)
class BoundReport:
    Q_star: int
    main_term: float
    tail_term: float
    total: float
    curve: tuple[BoundEntry, ...] = field(default=())
    theorem: str = "thm1"


def hypothesis_cap(n) -> int:
    """Largest ``Q`` with ``Q <= log_3 sqrt(n)``, i.e. ``9**Q <= n`` (exact)."""
    Q = max(0, int(_log(n) / (2 * LOG3)) - 1)
    while 9 ** (Q + 1) <= n:
        Q += 1
    while Q > 0 and 9**Q > n:
        Q -= 1
    return Q


def tail_sq(exp: HermiteExpansion, Q: int) -> float:
    """Parseval tail ``sum_{q>Q} J_q^2 = |sigma|^2 - sum_{q<=Q} J_q^2``, floored at 0."""
    if not 0 <= Q <= exp.qmax:
        raise ValueError(f"Q must lie in [0, {exp.qmax}], got {Q}")
    return max(0.0, exp.sigma_norm_sq - math.fsum(exp.coeffs[: Q + 1] ** 2))


def _log_weighted_sums(exp: HermiteExpansion, Q: int) -> tuple[float, float]:
    """Return ``(log A_Q, log B_Q)``; ``-inf`` for empty sums."""
    c = exp.coeffs[: Q + 1]
    q = np.arange(len(c))
    nz = c != 0
    if not nz.any():
        return -math.inf, -math.inf
    log_b_terms = 2 * np.log(np.abs(c[nz])) + q[nz] * LOG3
    log_b = float(logsumexp(log_b_terms))
    pos = nz & (q > 0)
    if not pos.any():
        return -math.inf, log_b
    log_a = float(logsumexp(2 * np.log(np.abs(c[pos])) + np.log(q[pos]) + q[pos] * LOG3))
    return log_a, log_b


def thm1_bound(exp: HermiteExpansion, params: BoundParams, Q: int, override: bool | None = None) -> BoundEntry:
    """Evaluate the general-activation bound at truncation ``Q``."""
    override = params.override if override is None else override
    if Q < 0:
        raise ValueError(f"Q must be nonnegative, got {Q}")
    if not override and 9**Q > params.n:
        raise HypothesisViolation(
            f"Q={Q} exceeds log_3 sqrt(n) = {params.log_n / (2 * LOG3):.4f} for n={params.n}"
        )
    log_a, _ = _log_weighted_sums(exp, Q)
    main = 0.0
    if log_a > -math.inf:
        main = params.C * exp.sigma_norm * math.exp(-0.25 * params.log_n + 0.5 * log_a)
    return BoundEntry(Q, main, 1.5 * math.sqrt(tail_sq(exp, Q)))


def thm2_bound(exp: HermiteExpansion, params: BoundParams, Q: int) -> BoundEntry:
    """Evaluate the smooth-activation bound at truncation ``Q`` (both sums kept)."""
    if Q < 0:
        raise ValueError(f"Q must be nonnegative, got {Q}")
    log_a, log_b = _log_weighted_sums(exp, Q)
    main = 0.0
    if log_a > -math.inf:
        half = 0.5 * params.log_n
        log_inner = float(np.logaddexp(math.log(exp.sigma_norm_sq), log_b - half))
        main = params.C * math.exp(-half + log_a + log_inner)
    return BoundEntry(Q, main, 1.5 * math.sqrt(tail_sq(exp, Q)))


def corollary1_Q(n) -> int:
    """Truncation ``round(log n / (3 log 3))``."""
    return int(round(_log(n) / (3 * LOG3)))


def _entry(exp, params, Q):
    if params.theorem == "thm1":
        return thm1_bound(exp, params, Q)
    return thm2_bound(exp, params, Q)


def optimize_Q(exp: HermiteExpansion, params: BoundParams) -> BoundReport:
    """Evaluate the bound over the truncation levels allowed by ``params.q_policy``.

    ``optimize`` scans every ``Q`` from 0 to ``qmax`` (and to the hypothesis
    cap for ``thm1``); ``fixed`` and ``corollary1`` evaluate a single level.
    """
    if params.q_policy == "fixed":
        levels = [params.Q]
    elif params.q_policy == "corollary1":
        levels = [corollary1_Q(params.n)]
    else:
        top = exp.qmax
        if params.theorem == "thm1" and not params.override:
            top = min(top, hypothesis_cap(params.n))
        levels = list(range(top + 1))
    for Q in levels:
        if Q > exp.qmax:
            raise ValueError(f"expansion has qmax={exp.qmax}, too short for Q={Q}")
    curve = tuple(_entry(exp, params, Q) for Q in levels)
    best = min(curve, key=lambda e: (e.total, e.Q))
    return BoundReport(best.Q, best.main_term, best.tail_term, best.total, curve, params.theorem)


def power_law_expansion(exponent: float, qmax: int) -> HermiteExpansion:
    """Synthetic coefficients ``J_q = q**-exponent`` for ``q >= 1``, ``J_0 = 0``.

    The squared norm is the full series ``zeta(2 * exponent)``.
    """
    if exponent <= 0.5:
        raise ValueError(f"exponent must exceed 1/2 for square summability, got {exponent}")
    q = np.arange(qmax + 1, dtype=float)
    coeffs = np.zeros(qmax + 1)
    coeffs[1:] = q[1:] ** -exponent
    norm_sq = float(zeta(2 * exponent))
    table = {int(k): float(c) for k, c in enumerate(coeffs) if c}
    act = Activation.coefficient_table(table, sigma_norm_sq=norm_sq, name=f"power:{exponent:g}")
    return HermiteExpansion(coeffs, norm_sq, ("closed-form",) * (qmax + 1), act)


RATE_MODELS = ("loglog", "log", "sqrtlog")


@dataclass(frozen=True)
class RateFit:
    name: str
    model: str
    slope: float
    intercept: float
    r_squared: float


def rate_abscissa(n_values: Sequence, model: str) -> np.ndarray:
    """Abscissa for a rate fit: ``log log n``, ``log n`` or ``sqrt(log n)``."""
    log_n = np.array([_log(n) for n in n_values])
    if model == "loglog":
        return np.log(log_n)
    if model == "log":
        return log_n
    if model == "sqrtlog":
        return np.sqrt(log_n)
    raise ValueError(f"unknown rate model {model!r}; expected one of {RATE_MODELS}")


def fit_rate(name: str, n_values: Sequence, totals: Sequence[float], model: str) -> RateFit:
    """Least-squares slope of ``log(bound)`` against the model abscissa."""
    x = rate_abscissa(n_values, model)
    y = np.log(np.asarray(totals, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(name, model, float(slope), float(intercept), r2)


def default_rate_model(exp: HermiteExpansion, theorem: str) -> str:
    kind = exp.activation.kind
    if kind in ("tanh", "logistic"):
        return "sqrtlog"
    if theorem == "thm2" or kind in ("erf", "polynomial"):
        return "log"
    return "loglog"


@dataclass(frozen=True)
class RateRow:
    activation: str
    n: int
    theorem: str
    Q_star: int
    main_term: float
    tail_term: float
    total: float


@dataclass(frozen=True)
class RateSpec:
    name: str
    expansion: HermiteExpansion
    theorem: str = "thm1"
    model: str | None = None


def rate_table(specs: Sequence[RateSpec], n_grid: Sequence, C: float = 1.0) -> tuple[list[RateRow], list[RateFit]]:
    """Optimized bound for each activation and width, plus fitted rate exponents."""
    rows, fits = [], []
    for spec in specs:
        totals = []
        for n in n_grid:
            rep = optimize_Q(spec.expansion, BoundParams(n=n, C=C, theorem=spec.theorem))
            rows.append(RateRow(spec.name, n, spec.theorem, rep.Q_star, rep.main_term, rep.tail_term, rep.total))
            totals.append(rep.total)
        model = spec.model or default_rate_model(spec.expansion, spec.theorem)
        fits.append(fit_rate(spec.name, n_grid, totals, model))
    return rows, fits
