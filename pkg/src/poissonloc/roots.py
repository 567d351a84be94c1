"""Bracketed scalar root finding: bisection safeguarding secant steps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class BracketError(ValueError):
    """No sign change was found; ``scan`` holds the sampled points."""

    def __init__(self, message: str, scan: dict | None = None):
        super().__init__(message)
        self.scan = scan or {}


@dataclass
class RootResult:
    root: float
    residual: float
    iterations: int
    bracket: tuple[float, float]


def find_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    xtol: float = 0.0,
    rtol: float = 4 * np.finfo(float).eps,
    maxiter: int = 200,
) -> RootResult:
    """Locate a root of ``f`` in ``[a, b]`` where ``f(a)`` and ``f(b)`` differ in sign.

    Illinois-modified secant (regula falsi) steps; a bisection step replaces
    any secant step that would leave the open bracket.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return RootResult(a, 0.0, 0, (a, a))
    if fb == 0.0:
        return RootResult(b, 0.0, 0, (b, b))
    if (fa > 0) == (fb > 0):
        raise BracketError("f(a) and f(b) have the same sign", {"a": a, "b": b, "fa": fa, "fb": fb})

    it = 0
    for it in range(1, maxiter + 1):
        x = b - fb * (b - a) / (fb - fa)
        if not min(a, b) < x < max(a, b):
            x = 0.5 * (a + b)
        fx = f(x)
        if fx == 0.0:
            return RootResult(x, 0.0, it, (x, x))
        if (fx > 0) != (fb > 0):
            a, fa = b, fb
        else:
            fa *= 0.5
        b, fb = x, fx
        if abs(b - a) <= xtol + rtol * max(abs(a), abs(b)):
            break
    fa_true = f(a)
    x, fx = (a, fa_true) if abs(fa_true) < abs(fb) else (b, fb)
    return RootResult(x, abs(fx), it, (min(a, b), max(a, b)))


def scan_sign_changes(
    f: Callable[[float], float], lo: float, hi: float, num: int = 400
) -> tuple[list[tuple[float, float]], dict]:
    """Sample ``f`` on a geometric grid and return every bracketing pair."""
    grid = np.geomspace(lo, hi, num)
    values = np.array([f(float(x)) for x in grid])
    brackets = []
    for i in range(num - 1):
        if values[i] == 0.0:
            brackets.append((float(grid[i]), float(grid[i])))
        elif values[i] * values[i + 1] < 0:
            brackets.append((float(grid[i]), float(grid[i + 1])))
    if values[-1] == 0.0:
        brackets.append((float(grid[-1]), float(grid[-1])))
    return brackets, {"grid": grid, "values": values}
