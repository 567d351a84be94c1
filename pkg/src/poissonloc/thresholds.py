"""Transition thresholds of the localization probabilities.

Finite thresholds are inflection points of the probability curves, found in
closed form for a single node and by bracketed root finding for the whole
network. Asymptotic evaluators compute finite-``n`` trajectories of the
network probability under prescribed growth of the node counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analytic
from .analytic import ParameterError, poisson_head, poisson_tail
from .channel import ChannelModel
from .roots import BracketError, find_root, scan_sign_changes

log = logging.getLogger(__name__)

SCAN_POINTS = 400
SCAN_LOW, SCAN_HIGH = 0.1, 1e3


@dataclass
class ThresholdResult:
    value: float
    residual: float
    iterations: int
    bracket: tuple[float, float]
    sign_changes: list[tuple[float, float]] = field(default_factory=list)


def _gamma1(model: ChannelModel) -> float:
    return math.pi * model.d_max**2 * model.shadow_gain


def _gamma2(model: ChannelModel, rho_l: float) -> float:
    return rho_l * math.pi * model.shadow_gain


def single_node_density_threshold(model: ChannelModel) -> float:
    """L-node density at the inflection of ``P(E_L)`` versus density (mean count 2)."""
    return 2.0 / _gamma1(model)


def single_node_range_threshold(model: ChannelModel, rho_l: float, wrt: str = "range") -> float:
    """Coverage radius at the inflection of ``P(E_L)``.

    With ``wrt="range"`` the inflection is taken against ``d_max`` itself and
    sits at a mean anchor count of 5/2; this is the ``n_nl = 1`` case of
    :func:`network_range_threshold`. With ``wrt="area"`` it is taken against
    the coverage area ``pi d_max^2`` and sits at a mean count of 2, the
    inverse of :func:`single_node_density_threshold`. ``model.d_max`` is ignored.
    """
    rho_l = analytic._positive("rho_l", rho_l)
    target = {"range": 2.5, "area": 2.0}.get(wrt)
    if target is None:
        raise ParameterError(f"wrt must be 'range' or 'area', got {wrt!r}")
    return math.sqrt(target / _gamma2(model, rho_l))


def _network_term(lam: float, n_nl: float) -> float:
    """``(n_nl - 1) lam^3 e^-lam / P(E_L)``, finite as ``lam -> 0``."""
    if n_nl == 1.0:
        return 0.0
    tail = poisson_tail(lam)
    if tail == 0.0:
        return 6.0 * (n_nl - 1.0)
    if lam > analytic.UNDERFLOW_LAMBDA:
        return 0.0
    return (n_nl - 1.0) * lam**3 * math.exp(-lam) / tail


def density_equation(lam: float, n_nl: float) -> float:
    """Inflection condition of the network probability versus density, in terms of
    the mean anchor count ``lam = gamma_1 rho_L``."""
    return 2.0 - lam + 0.5 * _network_term(lam, n_nl)


def range_equation(lam: float, n_nl: float) -> float:
    """Inflection condition versus coverage radius with ``lam = gamma_2 d_m^2``."""
    return 5.0 - 2.0 * lam + _network_term(lam, n_nl)


def _solve(equation, to_lambda, seed: float, what: str) -> ThresholdResult:
    def g(x: float) -> float:
        return equation(to_lambda(x))

    lo, hi = SCAN_LOW * seed, SCAN_HIGH * seed
    brackets, scan = scan_sign_changes(g, lo, hi, SCAN_POINTS)
    if not brackets:
        raise BracketError(
            f"no sign change of the {what} equation in [{lo:.6g}, {hi:.6g}]",
            {"lo": lo, "hi": hi, "min": float(scan["values"].min()),
             "max": float(scan["values"].max())},
        )
    a, b = brackets[-1]
    res = find_root(g, a, b)
    return ThresholdResult(res.root, res.residual, res.iterations, res.bracket, brackets)


def _check_n_nl(n_nl: float) -> float:
    n_nl = float(n_nl)
    if not math.isfinite(n_nl) or n_nl < 1:
        raise ParameterError(f"n_nl must be >= 1, got {n_nl!r}")
    return n_nl


def network_density_threshold(model: ChannelModel, n_nl: float) -> ThresholdResult:
    """L-node density at the inflection of the network probability.

    When several sign changes exist in the scan range the largest root is
    returned; all brackets are kept in ``sign_changes``.
    """
    n_nl = _check_n_nl(n_nl)
    g1 = _gamma1(model)
    return _solve(
        lambda lam: density_equation(lam, n_nl),
        lambda rho: g1 * rho,
        single_node_density_threshold(model),
        "density threshold",
    )


def network_range_threshold(model: ChannelModel, rho_l: float, n_nl: float) -> ThresholdResult:
    """Coverage radius at the inflection of the network probability; ignores ``model.d_max``."""
    n_nl = _check_n_nl(n_nl)
    rho_l = analytic._positive("rho_l", rho_l)
    g2 = _gamma2(model, rho_l)
    return _solve(
        lambda lam: range_equation(lam, n_nl),
        lambda d: g2 * d * d,
        single_node_range_threshold(model, rho_l),
        "range threshold",
    )


# asymptotic regimes


def asymptotic_gamma(model: ChannelModel, radius: float) -> float:
    """Mean anchor count per L-node in the disk: ``lambda = gamma * N_L``."""
    radius = analytic._positive("radius", radius)
    return (model.d_max / radius) ** 2 * model.shadow_gain


def dense_network_p0(model: ChannelModel, radius: float, xi: float) -> float:
    """Critical constant ``p`` for ``N_L ~ p ln n`` when ``N_NL ~ q n^(1-xi)``."""
    radius = analytic._positive("radius", radius)
    xi = float(xi)
    if not 0.0 <= xi <= 1.0:
        raise ParameterError(f"xi must lie in [0, 1], got {xi!r}")
    if xi == 1.0:
        log.info("xi = 1: bounded NL count, any unbounded N_L localizes the network")
        return 0.0
    return (1.0 - xi) / asymptotic_gamma(model, radius)


REGIMES = ("log", "log_of_nl", "linear")


@dataclass(frozen=True)
class GrowthSpec:
    """Growth laws of the node counts with the asymptotic parameter ``n``.

    ``log``: ``N_L = p ln n`` and ``N_NL = q n^(1-xi)`` (``xi = 1`` keeps
    ``N_NL`` bounded). ``log_of_nl``: ``N_NL = q n^(1-xi)``, ``N_L = ln N_NL``.
    ``linear``: ``N_L = n``, ``N_NL = n^t``.
    """

    xi: float = 0.0
    p: float = 1.0
    q: float = 1.0
    t: float = 1.0
    regime: str = "log"

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ParameterError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not 0.0 <= self.xi <= 1.0:
            raise ParameterError(f"xi must lie in [0, 1], got {self.xi!r}")
        for name in ("p", "q", "t"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")

    def counts(self, n: float) -> tuple[float, float]:
        """``(N_L, N_NL)`` at growth parameter ``n``."""
        if self.regime == "log":
            n_nl = self.q * n ** (1.0 - self.xi)
            return self.p * math.log(n), n_nl
        if self.regime == "log_of_nl":
            n_nl = self.q * n ** (1.0 - self.xi)
            return math.log(n_nl), n_nl
        return float(n), float(n) ** self.t


def dense_network_localization_limit(
    spec: GrowthSpec, gamma: float, n_grid: Sequence[float]
) -> np.ndarray:
    """Network localization probability along ``n_grid`` with ``lambda = gamma N_L``."""
    if not gamma > 0:
        raise ParameterError("gamma must be > 0")
    n_grid = np.asarray(n_grid, dtype=float)
    if np.any(np.diff(n_grid) <= 0):
        raise ParameterError("n_grid must be strictly increasing")
    out = np.empty(len(n_grid))
    for i, n in enumerate(n_grid):
        n_l, n_nl = spec.counts(n)
        out[i] = analytic.network_localization_probability(gamma * max(n_l, 0.0), n_nl)
    return out


def failure_mass(lam: float, n_nl: float) -> float:
    """``X(lambda) * N_NL``; the network probability lies in ``[1 - m, exp(-m)]``."""
    return poisson_head(lam) * n_nl


def transition_p(
    gamma: float, n: float, level: float, *, xi: float = 0.0, q: float = 1.0
) -> float:
    """Constant ``p`` at which the network probability equals ``level`` (``log`` regime)."""
    if not 0.0 < level < 1.0:
        raise ParameterError("level must lie in (0, 1)")
    target = math.log(level)

    def f(p: float) -> float:
        n_l, n_nl = GrowthSpec(xi=xi, p=p, q=q).counts(n)
        return analytic.log_network_localization_probability(gamma * n_l, n_nl) - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    lo = hi / 2.0
    while f(lo) > 0:
        lo /= 2.0
    return find_root(f, lo, hi).root


def theorem2_required_range(model: ChannelModel, rho_l: float, omega: float) -> float:
    """Coverage radius making the mean anchor count equal ``omega`` at density ``rho_l``.

    Under constant density, letting ``omega -> inf`` with
    ``N_NL = o(omega^-2 e^omega)`` localizes the whole network. ``model.d_max``
    is ignored.
    """
    rho_l = analytic._positive("rho_l", rho_l)
    omega = analytic._positive("omega", omega)
    return math.sqrt(omega / (math.pi * rho_l * model.shadow_gain))
