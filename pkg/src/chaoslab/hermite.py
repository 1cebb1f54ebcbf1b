"""Normalized Hermite polynomials and Hermite coefficients of activations.

Coefficients are projections onto the unit-variance Hermite polynomials
``h_q = H_q / sqrt(q!)`` under the standard Gaussian measure::

    J_q(sigma) = E[sigma(Z) h_q(Z)],   Z ~ N(0, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special

# Half-width of the truncated integration domain. Integrands are evaluated as
# sigma(z) * [h_q(z) exp(-z^2/4)] * exp(-z^2/4) / sqrt(2 pi); the bracket is
# bounded uniformly in q, so exp(-L^2/4) controls the neglected mass.
DOMAIN_HALF_WIDTH = 14.0
GL_ORDER = 24
DEFAULT_PANELS = 128
MAX_LINEAR_QMAX = 512

SOURCES = ("closed-form", "quadrature", "table-verbatim")
ACTIVATION_KINDS = ("relu", "erf", "tanh", "logistic", "polynomial", "coefficient-table", "callable")


class InvalidActivationError(ValueError):
    """Raised when an activation is not square integrable under N(0, 1)."""


class InsufficientDataError(ValueError):
    """Raised when too few nonzero coefficients are available for a fit."""


def eval_hermite_normalized(q: int, x):
    """Evaluate ``h_q(x) = H_q(x) / sqrt(q!)`` by the normalized recurrence.

    Works elementwise on arrays. The recurrence
    ``h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)`` never forms ``H_q``
    itself, so it does not overflow for large ``q`` at moderate ``x``.
    """
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for k in range(1, q):
        prev, cur = cur, (x * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
    return cur if cur.ndim else float(cur)


def hermite_table(qmax: int, x, scale=None) -> np.ndarray:
    """Return the array ``[h_0(x), ..., h_qmax(x)]`` of shape ``(qmax+1, *x.shape)``.

    ``scale`` multiplies the starting value ``h_0``; since the recurrence is
    linear every row is scaled by it. Passing ``exp(-x**2/4)`` yields bounded
    Hermite functions that do not overflow far in the tails.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0 if scale is None else scale
    if qmax >= 1:
        out[1] = x * out[0]
    for k in range(1, qmax):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


def _relu(z):
    return np.maximum(z, 0.0)


def _erf(z):
    return special.erf(z)


def _logistic(z):
    return special.expit(z)


@dataclass(frozen=True)
class Activation:
    """A scalar nonlinearity, square integrable under the standard Gaussian.

    Use the constructors (:meth:`relu`, :meth:`polynomial`, :meth:`table`, ...)
    rather than building instances directly.
    """

    kind: str
    name: str
    poly: tuple[float, ...] = ()
    table: tuple[tuple[int, float], ...] = ()
    func: Callable | None = field(default=None, compare=False, repr=False)
    kinks: tuple[float, ...] = ()
    norm_sq: float | None = None

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}; expected one of {ACTIVATION_KINDS}")
        if self.kind == "polynomial" and len(self.poly) == 0:
            raise ValueError("polynomial activation needs at least one coefficient")
        if self.kind == "callable" and self.func is None:
            raise ValueError("callable activation needs a function")

    @classmethod
    def relu(cls) -> "Activation":
        return cls("relu", "relu", kinks=(0.0,))

    @classmethod
    def erf(cls) -> "Activation":
        return cls("erf", "erf")

    @classmethod
    def tanh(cls) -> "Activation":
        return cls("tanh", "tanh")

    @classmethod
    def logistic(cls) -> "Activation":
        return cls("logistic", "logistic")

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], name: str | None = None) -> "Activation":
        """Polynomial ``sum_k coeffs[k] z**k`` (monomial basis, ascending)."""
        coeffs = tuple(float(c) for c in coeffs)
        return cls("polynomial", name or "poly:" + ",".join(f"{c:g}" for c in coeffs), poly=coeffs)

    @classmethod
    def coefficient_table(
        cls, coeffs: Mapping[int, float], sigma_norm_sq: float | None = None, name: str | None = None
    ) -> "Activation":
        """Activation given directly by its Hermite coefficients.

        ``sigma_norm_sq`` may be supplied when the table is a truncation of
        an infinite expansion with known Gaussian norm; otherwise the table
        is taken to be the whole expansion.
        """
        items = tuple(sorted((int(q), float(j)) for q, j in coeffs.items()))
        if any(q < 0 for q, _ in items):
            raise ValueError("Hermite orders must be nonnegative")
        if name is None:
            name = "table:" + ",".join(f"J{q}={j:g}" for q, j in items)
        return cls("coefficient-table", name, table=items, norm_sq=sigma_norm_sq)

    @classmethod
    def from_callable(cls, func: Callable, name: str = "callable", kinks: Sequence[float] = ()) -> "Activation":
        return cls("callable", name, func=func, kinks=tuple(sorted(float(k) for k in kinks)))

    @property
    def is_odd(self) -> bool:
        return self.kind in ("erf", "tanh")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "relu":
            return _relu(z)
        if self.kind == "erf":
            return _erf(z)
        if self.kind == "tanh":
            return np.tanh(z)
        if self.kind == "logistic":
            return _logistic(z)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(z, self.poly)
        if self.kind == "coefficient-table":
            qmax = max(q for q, _ in self.table) if self.table else 0
            h = hermite_table(qmax, z)
            out = np.zeros_like(z)
            for q, j in self.table:
                out = out + j * h[q]
            return out
        return np.asarray(self.func(z), dtype=float)


def parse_activation(text: str) -> Activation:
    """Parse an activation name as accepted on the command line.

    Accepted forms: ``relu``, ``erf``, ``tanh``, ``logistic``,
    ``poly:c0,c1,...`` and ``table:J1=1,J3=0.5``.
    """
    text = text.strip()
    simple = {"relu": Activation.relu, "erf": Activation.erf, "tanh": Activation.tanh,
              "logistic": Activation.logistic, "sigmoid": Activation.logistic}
    if text in simple:
        return simple[text]()
    if text.startswith("poly:"):
        try:
            coeffs = [float(c) for c in text[5:].split(",") if c.strip()]
        except ValueError as exc:
            raise ValueError(f"bad polynomial coefficients in {text!r}") from exc
        return Activation.polynomial(coeffs, name=text)
    if text.startswith("table:"):
        table = {}
        for item in text[6:].split(","):
            key, sep, value = item.strip().partition("=")
            if not sep or not key.upper().startswith("J"):
                raise ValueError(f"bad table entry {item!r}; expected J<q>=<value>")
            table[int(key[1:])] = float(value)
        return Activation.coefficient_table(table, name=text)
    raise ValueError(
        f"unknown activation {text!r}; supported: relu, erf, tanh, logistic, poly:c0,c1,..., table:J<q>=<v>,..."
    )


def _quadrature_rule(kinks: Sequence[float], panels: int, half_width: float = DOMAIN_HALF_WIDTH):
    """Composite Gauss-Legendre nodes and weights on ``[-L, L]`` split at kinks."""
    breaks = [-half_width] + [k for k in kinks if -half_width < k < half_width] + [half_width]
    nodes, weights = np.polynomial.legendre.leggauss(GL_ORDER)
    xs, ws = [], []
    total = 2 * half_width
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, round(panels * (b - a) / total))
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        xs.append((mid[:, None] + half[:, None] * nodes[None, :]).ravel())
        ws.append((half[:, None] * weights[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _gaussian_sq_norm(activation: Activation, panels: int) -> float:
    z, w = _quadrature_rule(activation.kinks, panels)
    vals = activation(z)
    with np.errstate(over="ignore", invalid="ignore"):
        est = float(np.sum(w * vals**2 * np.exp(-0.5 * z**2)) / math.sqrt(2 * math.pi))
        z2, w2 = _quadrature_rule(activation.kinks, 2 * panels, half_width=1.5 * DOMAIN_HALF_WIDTH)
        wide = float(np.sum(w2 * activation(z2) ** 2 * np.exp(-0.5 * z2**2)) / math.sqrt(2 * math.pi))
    if not (math.isfinite(est) and math.isfinite(wide)) or abs(wide - est) > 1e-8 * max(1.0, abs(est)):
        raise InvalidActivationError(
            f"activation {activation.name!r} does not look square integrable under N(0,1) "
            f"(norm estimates {est:.6g} vs {wide:.6g} on widened domain)"
        )
    return est


def _quadrature_coeffs(activation: Activation, qmax: int, panels: int) -> np.ndarray:
    z, w = _quadrature_rule(activation.kinks, panels)
    damp = np.exp(-0.25 * z**2)
    table = hermite_table(qmax, z, scale=damp)
    integrand = activation(z) * damp * w / math.sqrt(2 * math.pi)
    return table @ integrand


def coeff_quadrature(activation: Activation, q: int, panels: int = DEFAULT_PANELS) -> float:
    """Return ``E[sigma(Z) h_q(Z)]`` by composite panel quadrature.

    The domain ``[-L, L]`` is split at the activation's kinks so that each
    panel sees a smooth integrand.
    """
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if panels < 16:
        raise ValueError(f"panels must be >= 16, got {panels}")
    _gaussian_sq_norm(activation, panels)
    return float(_quadrature_coeffs(activation, q, panels)[q])


def _log_double_factorial_odd(m: int) -> float:
    """log(m!!) for odd m >= -1."""
    if m <= 0:
        return 0.0
    k = (m + 1) // 2
    return special.gammaln(2 * k + 1) - k * math.log(2) - special.gammaln(k + 1)


def relu_coeff(q: int) -> float:
    """Hermite coefficient of the ReLU from the direct Gaussian computation.

    For even ``q >= 2`` this is ``(-1)**(q/2+1) (q-3)!! / sqrt(2 pi q!)``,
    evaluated in log scale so any ``q`` is allowed.
    """
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if q == 0:
        return 1.0 / math.sqrt(2 * math.pi)
    if q == 1:
        return 0.5
    if q % 2:
        return 0.0
    sign = 1.0 if (q // 2) % 2 else -1.0
    logval = _log_double_factorial_odd(q - 3) - 0.5 * (math.log(2 * math.pi) + special.gammaln(q + 1))
    return sign * math.exp(logval)


def relu_coeff_table(q: int) -> float:
    """ReLU coefficient exactly as tabulated in the literature source.

    Identical to :func:`relu_coeff` except the even-order denominator is
    ``sqrt(pi) sqrt(q!)``, which makes those entries larger by ``sqrt(2)``.
    """
    if q < 2 or q % 2:
        return relu_coeff(q)
    return relu_coeff(q) * math.sqrt(2.0)


def polynomial_to_hermite(poly: Sequence[float]) -> np.ndarray:
    """Convert monomial coefficients to normalized Hermite coefficients.

    Uses ``z**k = sum_j k! / (j! (k-2j)! 2**j) He_{k-2j}(z)`` and
    ``He_m = sqrt(m!) h_m``.
    """
    deg = len(poly) - 1
    out = np.zeros(deg + 1)
    for k, c in enumerate(poly):
        if c == 0:
            continue
        for j in range(k // 2 + 1):
            m = k - 2 * j
            out[m] += c * math.factorial(k) / (math.factorial(j) * math.factorial(m) * 2**j) * math.sqrt(math.factorial(m))
    return out


@dataclass(frozen=True)
class HermiteExpansion:
    """Normalized Hermite coefficients ``J_0..J_qmax`` of an activation.

    ``sources[q]`` records where ``coeffs[q]`` came from: ``closed-form``,
    ``quadrature`` or ``table-verbatim``.
    """

    coeffs: np.ndarray
    sigma_norm_sq: float
    sources: tuple[str, ...]
    activation: Activation

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if len(self.sources) != len(coeffs):
            raise ValueError("one source tag per coefficient is required")

    @property
    def qmax(self) -> int:
        return len(self.coeffs) - 1

    @property
    def sigma_norm(self) -> float:
        return math.sqrt(self.sigma_norm_sq)

    def partial_sq_sums(self) -> np.ndarray:
        """Cumulative sums ``sum_{q<=Q} J_q**2`` for ``Q = 0..qmax``."""
        return np.cumsum(self.coeffs**2)

    def kernel(self, u, qmax: int | None = None):
        """Truncated limit covariance ``sum_{q<=qmax} J_q**2 u**q``."""
        qmax = self.qmax if qmax is None else qmax
        u = np.asarray(u, dtype=float)
        c = self.coeffs[: qmax + 1] ** 2
        return np.polynomial.polynomial.polyval(u, c)


def expansion(
    activation: Activation,
    qmax: int,
    panels: int = DEFAULT_PANELS,
    relu_mode: str = "closed-form",
) -> HermiteExpansion:
    """Compute the Hermite expansion of ``activation`` up to order ``qmax``.

    Closed forms are used for relu, polynomial and coefficient-table
    activations; quadrature otherwise. ``relu_mode`` selects between the
    direct closed form (``closed-form``), the literature table
    (``table-verbatim``) and plain ``quadrature``.
    """
    if qmax < 1:
        raise ValueError(f"qmax must be >= 1, got {qmax}")
    kind = activation.kind

    if kind == "coefficient-table":
        coeffs = np.zeros(qmax + 1)
        for q, j in activation.table:
            if q <= qmax:
                coeffs[q] = j
        full = math.fsum(j * j for _, j in activation.table)
        norm_sq = activation.norm_sq if activation.norm_sq is not None else full
        return HermiteExpansion(coeffs, norm_sq, ("closed-form",) * (qmax + 1), activation)

    if kind == "relu" and relu_mode not in ("closed-form", "table-verbatim", "quadrature"):
        raise ValueError(f"unknown relu_mode {relu_mode!r}")
    if kind == "relu" and relu_mode != "quadrature":
        # log-scale closed form, valid beyond the linear storage cap
        fn = relu_coeff if relu_mode == "closed-form" else relu_coeff_table
        coeffs = np.array([fn(q) for q in range(qmax + 1)])
        return HermiteExpansion(coeffs, 0.5, (relu_mode,) * (qmax + 1), activation)

    if qmax > MAX_LINEAR_QMAX:
        raise ValueError(f"quadrature expansions are limited to qmax <= {MAX_LINEAR_QMAX}")
    norm_sq = _gaussian_sq_norm(activation, panels)

    if kind == "polynomial":
        herm = polynomial_to_hermite(activation.poly)
        coeffs = np.zeros(qmax + 1)
        m = min(len(herm), qmax + 1)
        coeffs[:m] = herm[:m]
        return HermiteExpansion(coeffs, norm_sq, ("closed-form",) * (qmax + 1), activation)

    coeffs = _quadrature_coeffs(activation, qmax, panels)
    return HermiteExpansion(coeffs, norm_sq, ("quadrature",) * (qmax + 1), activation)


def parseval_gap(exp: HermiteExpansion) -> float:
    """``sigma_norm_sq - sum_{q<=qmax} J_q**2``; nonnegative up to rounding."""
    return exp.sigma_norm_sq - math.fsum(exp.coeffs**2)


@dataclass(frozen=True)
class DecayFit:
    model: str
    exponent: float
    intercept: float
    r_squared: float
    orders: tuple[int, ...]


DECAY_MODELS = ("power", "exponential", "sqrt-exponential")


def decay_fit(
    exp: HermiteExpansion,
    model: str,
    q_min: int = 4,
    q_max: int | None = None,
    parity: str | None = None,
    squared: bool = False,
    tol: float = 1e-13,
) -> DecayFit:
    """Least-squares fit of the decay of ``|J_q|``.

    ``log|J_q|`` is regressed on ``log q`` (power, exponent ``alpha`` with
    ``|J_q| ~ q**-alpha``), on ``q`` (exponential, rate ``beta``) or on
    ``sqrt(q)`` (sqrt-exponential, rate ``c``). The returned exponent is the
    negated slope. Coefficients below ``tol`` in magnitude are treated as
    zero. With ``squared=True`` the fit is done on ``J_q**2`` instead.
    """
    if model not in DECAY_MODELS:
        raise ValueError(f"unknown decay model {model!r}; expected one of {DECAY_MODELS}")
    q_max = exp.qmax if q_max is None else min(q_max, exp.qmax)
    orders = np.arange(q_min, q_max + 1)
    if parity == "even":
        orders = orders[orders % 2 == 0]
    elif parity == "odd":
        orders = orders[orders % 2 == 1]
    vals = np.abs(exp.coeffs[orders])
    keep = vals > tol
    orders, vals = orders[keep], vals[keep]
    if len(orders) < 6:
        raise InsufficientDataError(f"need at least 6 nonzero coefficients with q >= {q_min}, found {len(orders)}")
    y = np.log(vals) * (2 if squared else 1)
    x = {"power": np.log(orders), "exponential": orders.astype(float), "sqrt-exponential": np.sqrt(orders)}[model]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(model, float(-slope), float(intercept), r2, tuple(int(q) for q in orders))
