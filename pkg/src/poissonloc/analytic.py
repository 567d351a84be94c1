"""Expected anchor counts and localization probabilities.

An NL-node is localized when it links to at least three L-nodes. L-nodes are
Poisson, so the number of linked anchors is Poisson with mean ``lambda``
(the thinned intensity integrated over the plane or over a disk).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.special import erfc

from .channel import ChannelModel, ParameterError, link_probability

ANCHORS_REQUIRED = 3
# exp(-x) underflows past this point in double precision
UNDERFLOW_LAMBDA = 745.0


class NumericalError(RuntimeError):
    """Numerical procedure failed to converge; ``info`` holds diagnostics."""

    def __init__(self, message: str, info: dict | None = None):
        super().__init__(message)
        self.info = info or {}


@dataclass(frozen=True)
class Deployment:
    rho_l: float
    rho_nl: float
    radius: float

    def __post_init__(self) -> None:
        for name in ("rho_l", "rho_nl", "radius"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def n_l(self) -> float:
        return self.rho_l * self.area

    @property
    def n_nl(self) -> float:
        return self.rho_nl * self.area


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
    return value


def _nonneg(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or value < 0:
        raise ParameterError(f"{name} must be >= 0, got {value!r}")
    return value


def expected_neighbors_unbounded(
    model: ChannelModel, rho_l: float, d_max: float | None = None
) -> float:
    """Mean number of linked L-nodes over the whole plane.

    ``d_max`` overrides the model's coverage radius, which is how the range
    threshold routines evaluate candidate radii.
    """
    rho_l = _positive("rho_l", rho_l)
    d = model.d_max if d_max is None else _positive("d_max", d_max)
    return rho_l * math.pi * d * d * model.shadow_gain


def expected_neighbors_bounded(model: ChannelModel, rho_l: float, radius: float) -> float:
    """Mean number of linked L-nodes within ``radius`` of an NL-node (closed form)."""
    rho_l = _positive("rho_l", rho_l)
    radius = _positive("radius", radius)
    d_max = model.d_max
    if model.hard_disk:
        return rho_l * math.pi * min(radius, d_max) ** 2
    k = model.alpha / model.eta
    a = k * math.log(radius / d_max)
    # 1 - erf(a) and 1 + erf(a - 1/k) written with erfc to avoid cancellation
    near = 0.5 * math.pi * rho_l * radius**2 * float(erfc(a))
    far = 0.5 * math.pi * rho_l * d_max**2 * model.shadow_gain * float(erfc(1.0 / k - a))
    return near + far


def quadrature_oracle(
    model: ChannelModel, rho_l: float, radius: float, rtol: float = 1e-10, limit: int = 500
) -> float:
    """Integrate ``2 pi rho_L r P(link | r)`` over ``[0, radius]`` numerically.

    Independent of the closed form in :func:`expected_neighbors_bounded`.
    Raises :class:`NumericalError` when adaptive quadrature reports failure
    or an error estimate above ``rtol``.
    """
    rho_l = _positive("rho_l", rho_l)
    radius = _positive("radius", radius)
    d_max = model.d_max

    def integrand(r: float) -> float:
        return r * link_probability(model, r)

    breaks = [d_max]
    if not model.hard_disk:
        width = model.eta / model.alpha
        breaks += [d_max * math.exp(s * width) for s in (-3, -1.5, 1.5, 3, 5)]
    edges = [0.0] + sorted(b for b in breaks if 0 < b < radius) + [radius]
    total, abserr, worst = 0.0, 0.0, None
    for lo, hi in zip(edges[:-1], edges[1:]):
        out = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=limit,
                             full_output=True)
        total += out[0]
        abserr += out[1]
        if worst is None or out[1] > worst[1]:
            worst = (lo, hi, out[2].get("neval"), out[3] if len(out) > 3 else None)
    # judged against the whole integral; pieces with negligible mass may stall
    if abserr > 10.0 * rtol * abs(total):
        raise NumericalError(
            "quadrature did not reach requested tolerance",
            {"interval": worst[:2], "value": total, "abserr": abserr,
             "neval": worst[2], "message": worst[3]},
        )
    return 2.0 * math.pi * rho_l * total


def poisson_tail(lam: float, k: int = ANCHORS_REQUIRED) -> float:
    """``P(N >= k)`` for ``N ~ Poisson(lam)``."""
    lam = _nonneg("lambda", lam)
    if k <= 0:
        return 1.0
    if lam == 0.0:
        return 0.0
    if lam > UNDERFLOW_LAMBDA:
        return 1.0
    if lam < 1.0:
        # direct tail sum; avoids 1 - (1 - tiny) cancellation
        term = math.exp(-lam) * lam**k / math.factorial(k)
        total, j = term, k
        while term > 1e-18 * total:
            j += 1
            term *= lam / j
            total += term
        return total
    return 1.0 - poisson_head(lam, k)


def poisson_head(lam: float, k: int = ANCHORS_REQUIRED) -> float:
    """``P(N < k)`` for ``N ~ Poisson(lam)``, the per-node failure probability."""
    lam = _nonneg("lambda", lam)
    if k <= 0:
        return 0.0
    if lam > UNDERFLOW_LAMBDA:
        return 0.0
    term, total = 1.0, 1.0
    for j in range(1, k):
        term *= lam / j
        total += term
    return math.exp(-lam) * total


def single_node_localization_probability(lam: float, k: int = ANCHORS_REQUIRED) -> float:
    """Probability that an NL-node with mean anchor count ``lam`` hears ``k`` or more."""
    return poisson_tail(lam, k)


def failure_probability(lam: float, k: int = ANCHORS_REQUIRED) -> tuple[float, bool]:
    """Per-node failure probability and whether ``exp(-lam)`` underflowed."""
    lam = _nonneg("lambda", lam)
    return poisson_head(lam, k), lam > UNDERFLOW_LAMBDA


def log_network_localization_probability(
    lam: float, n_nl: float, k: int = ANCHORS_REQUIRED
) -> float:
    """Natural log of the probability that all ``n_nl`` NL-nodes are localized."""
    lam = _nonneg("lambda", lam)
    n_nl = _nonneg("n_nl", n_nl)
    if n_nl == 0.0:
        return 0.0
    fail = poisson_head(lam, k)
    if fail == 0.0:
        return 0.0
    if fail < 0.5:
        return n_nl * math.log1p(-fail)
    success = poisson_tail(lam, k)
    if success == 0.0:
        return -math.inf
    return n_nl * math.log(success)


def network_localization_probability(
    lam: float, n_nl: float, k: int = ANCHORS_REQUIRED
) -> float:
    """Probability that all ``n_nl`` NL-nodes are localized (``n_nl`` may be non-integer)."""
    if float(n_nl) == 1.0:
        return single_node_localization_probability(lam, k)
    return math.exp(log_network_localization_probability(lam, n_nl, k))


def minimum_density(model: ChannelModel) -> float:
    """L-node density giving on average exactly three linked anchors per NL-node."""
    return ANCHORS_REQUIRED / (math.pi * model.d_max**2 * model.shadow_gain)


def localization_probability(model: ChannelModel, rho_l: float, k: int = ANCHORS_REQUIRED) -> float:
    return single_node_localization_probability(expected_neighbors_unbounded(model, rho_l), k)


def network_probability(model: ChannelModel, deployment: Deployment, k: int = ANCHORS_REQUIRED) -> float:
    """Network localization probability with the mean NL count of ``deployment``."""
    lam = expected_neighbors_unbounded(model, deployment.rho_l)
    return network_localization_probability(lam, deployment.n_nl, k)
