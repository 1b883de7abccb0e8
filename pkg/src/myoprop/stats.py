"""One-way ANOVA and the F distribution via the regularized incomplete beta."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence

from .errors import InputError, NumericError

BETA_TOL = 1e-10
BETA_MAX_ITER = 300
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOL:
            return h
    raise NumericError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise InputError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise InputError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _check_df(df1, df2):
    if not (df1 >= 1 and df2 >= 1) or not (math.isfinite(df1) and math.isfinite(df2)):
        raise InputError(f"degrees of freedom must be >= 1, got ({df1}, {df2})")


def f_cdf(x: float, df1: float, df2: float) -> float:
    """P(F <= x) for an F(df1, df2) variable."""
    _check_df(df1, df2)
    if x < 0 or math.isnan(x):
        raise InputError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2))


def f_sf(x: float, df1: float, df2: float) -> float:
    """P(F > x), evaluated through the complementary beta to keep small tails accurate."""
    _check_df(df1, df2)
    if x < 0 or math.isnan(x):
        raise InputError(f"x must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df1 * x + df2))


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    df_between: int
    df_within: int
    p_value: float
    significant_at: Dict[float, bool] = field(default_factory=dict)
    degenerate: bool = False

    def summary(self) -> str:
        lines = [
            f"F = {self.f_statistic!r}",
            f"df_between = {self.df_between}",
            f"df_within = {self.df_within}",
            f"p = {self.p_value!r}",
        ]
        for alpha, sig in sorted(self.significant_at.items()):
            lines.append(f"significant at alpha={alpha:g}: {'yes' if sig else 'no'}")
        if self.degenerate:
            lines.append("note: zero within-group variance with unequal means (p set to 0)")
        return "\n".join(lines)


def anova_oneway(groups: Sequence[Sequence[float]], alphas: Sequence[float] = (0.05,)) -> AnovaResult:
    """Classic between/within sums-of-squares F test."""
    groups = [[float(v) for v in g] for g in groups]
    if len(groups) < 2:
        raise InputError("one-way ANOVA needs at least two groups")
    if any(len(g) < 2 for g in groups):
        raise InputError("every group needs at least two observations")
    if any(not math.isfinite(v) for g in groups for v in g):
        raise InputError("observations must be finite")
    n_total = sum(len(g) for g in groups)
    k = len(groups)
    grand = math.fsum(v for g in groups for v in g) / n_total
    means = [math.fsum(g) / len(g) for g in groups]
    ss_between = math.fsum(len(g) * (m - grand) ** 2 for g, m in zip(groups, means))
    ss_within = math.fsum((v - m) ** 2 for g, m in zip(groups, means) for v in g)
    df_b, df_w = k - 1, n_total - k
    if ss_within == 0:
        if ss_between == 0:
            raise InputError("all observations are identical; F is undefined")
        return AnovaResult(math.inf, df_b, df_w, 0.0,
                           {float(a): True for a in alphas}, degenerate=True)
    f = (ss_between / df_b) / (ss_within / df_w)
    p = min(max(f_sf(f, df_b, df_w), 0.0), 1.0)
    return AnovaResult(f, df_b, df_w, p, {float(a): p < a for a in alphas})
