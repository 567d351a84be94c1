"""Link model between an NL-node and an L-node.

Log-normal shadowing on top of a power-law path loss. A link exists when the
received power exceeds the detection threshold; with zero shadowing this
collapses to a hard disk of radius ``d_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcinv

ALPHA = 10.0 / (math.sqrt(2.0) * math.log(10.0))


class ParameterError(ValueError):
    """Raised for non-finite or out-of-range model inputs."""


def _check(name: str, value: float, *, lower: float, strict: bool) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    if (strict and value <= lower) or (not strict and value < lower):
        op = ">" if strict else ">="
        raise ParameterError(f"{name} must be {op} {lower}, got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelModel:
    """Shadowing channel parameterized by link budget.

    Attributes:
        sigma_s: shadowing standard deviation in dB.
        n_p: path-loss exponent.
        beta_th: link budget ``10 log10(P_t / P_th)`` in dB.
    """

    sigma_s: float
    n_p: float
    beta_th: float
    alpha: float = field(init=False, repr=False)
    eta: float = field(init=False)
    d_max: float = field(init=False)

    def __post_init__(self) -> None:
        sigma_s = _check("sigma_s", self.sigma_s, lower=0.0, strict=False)
        n_p = _check("n_p", self.n_p, lower=0.0, strict=True)
        beta_th = _check("beta_th", self.beta_th, lower=0.0, strict=True)
        object.__setattr__(self, "sigma_s", sigma_s)
        object.__setattr__(self, "n_p", n_p)
        object.__setattr__(self, "beta_th", beta_th)
        object.__setattr__(self, "alpha", ALPHA)
        object.__setattr__(self, "eta", sigma_s / n_p)
        object.__setattr__(self, "d_max", 10.0 ** (beta_th / (10.0 * n_p)))

    @classmethod
    def from_d_max(cls, sigma_s: float, n_p: float, d_max: float) -> "ChannelModel":
        """Build the model whose mean coverage radius is ``d_max`` meters.

        ``d_max`` must exceed 1 m, since the link budget is positive.
        """
        d_max = _check("d_max", d_max, lower=1.0, strict=True)
        n_p = _check("n_p", n_p, lower=0.0, strict=True)
        return cls(sigma_s, n_p, 10.0 * n_p * math.log10(d_max))

    @property
    def hard_disk(self) -> bool:
        """True when shadowing is too small to resolve; links follow ``d <= d_max``."""
        return self.eta == 0.0 or math.isinf(self.alpha / self.eta)

    @property
    def shadow_gain(self) -> float:
        """``exp(eta^2 / alpha^2)``, the area gain shadowing gives the mean coverage."""
        return math.exp((self.eta / self.alpha) ** 2)

    def with_d_max(self, d_max: float) -> "ChannelModel":
        return ChannelModel.from_d_max(self.sigma_s, self.n_p, d_max)


def new_channel(sigma_s: float, n_p: float, beta_th: float) -> ChannelModel:
    return ChannelModel(sigma_s, n_p, beta_th)


def link_probability(model: ChannelModel, d):
    """Probability that an NL-node and an L-node at distance ``d`` are linked.

    Accepts a scalar or an array of distances and returns the same shape.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d_arr) & ~np.isposinf(d_arr)) or np.any(d_arr < 0):
        raise ParameterError("distance must be non-negative")
    with np.errstate(divide="ignore"):
        log_ratio = np.log(d_arr / model.d_max)
    if model.hard_disk:
        p = np.where(log_ratio < 0, 1.0, np.where(log_ratio > 0, 0.0, 0.5))
    else:
        # erfc keeps the far tail accurate where 1 - erf would cancel
        p = 0.5 * erfc((model.alpha / model.eta) * log_ratio)
    if p.ndim == 0:
        return float(p)
    return p


def sample_link(model: ChannelModel, d: float, rng: np.random.Generator) -> bool:
    """Bernoulli link draw; consumes exactly one uniform variate from ``rng``."""
    u = rng.random()
    return bool(u < link_probability(model, d))


def cutoff_distance(model: ChannelModel, p_min: float = 1e-9) -> float:
    """Distance beyond which the link probability is below ``p_min``."""
    if model.hard_disk:
        return model.d_max
    return model.d_max * math.exp((model.eta / model.alpha) * float(erfcinv(2.0 * p_min)))
