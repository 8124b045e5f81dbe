"""Separable cost-function families, their derivatives, and breakup scenarios.

Three families share one protocol (eval / first / second derivative):

* poly:   f(x) = a4 x^4 + a3 x^3 + a2 x^2 + a1 x + C
                 + b1/x + b2/x^2 + b3/x^3 + b4/x^4          (poles at 0)
* frac:   f(x) = a4 x^4 + a3 x^3 + a2 x^2 + a1 x + C
                 + b2 x^(1/2) + b3 x^(1/3) + b4 x^(1/4)     (domain x >= 0)
* legacy: f(x) = [t + M x + r (1 - x) + y/(x + s)]^p

The scenario machinery prices fractional "breakups" of the target placement
(k items of size 1, everyone else at the floor w) at exact points: equal
m-way splits of one item (W family), two-piece splits (V family),
redistributions of all k items into m pieces each (Nkw family), the
equal-weight spread over all N bins, and two extra split rows (eight-piece
and two-piece with a 1.5x margin factor).  A fitted function separates when
every active scenario costs at least eps more than its reference.

Sums with many cancelling terms use compensated (Neumaier) summation so that
coefficient magnitudes around 1e10 with results around 1e-4 stay trustworthy.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "PolyParams",
    "FracParams",
    "LegacyParams",
    "ScenarioQuantities",
    "Scenario",
    "compensated_sum",
    "eval_cost",
    "first_derivative",
    "second_derivative",
    "desired_cost",
    "convexity_measure",
    "all_scenarios",
    "scenario_active",
    "scenario_cost",
    "scenario_reference",
    "scenario_margin",
    "params_to_text",
    "params_from_text",
]

W_SPLITS = (2, 3, 4, 5, 10, 20, 100, 1000)
V_SPLITS = (0.001, 0.01, 0.02, 0.05, 0.15, 0.3)
NKW_SPLITS = (2, 3, 4, 5, 6, 8, 12)


def compensated_sum(terms) -> float:
    """Neumaier-compensated sum: exact-ish for widely cancelling magnitudes."""
    s = 0.0
    comp = 0.0
    for t in terms:
        t = float(t)
        total = s + t
        if abs(s) >= abs(t):
            comp += (s - total) + t
        else:
            comp += (t - total) + s
        s = total
    return s + comp


# -- parameter families ----------------------------------------------------

@dataclass(frozen=True)
class PolyParams:
    """Polynomial + inverse-power family; w is the floor size the fit targets."""

    C: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0
    b4: float = 0.0
    w: float = 0.0

    family = "poly"

    def has_poles(self) -> bool:
        return any((self.b1, self.b2, self.b3, self.b4))


@dataclass(frozen=True)
class FracParams:
    """Polynomial + fractional-power family (x^(1/2), x^(1/3), x^(1/4))."""

    C: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    b2: float = 0.0
    b3: float = 0.0
    b4: float = 0.0
    w: float = 0.0

    family = "frac"


@dataclass(frozen=True)
class LegacyParams:
    """Power-of-affine-plus-inverse family [t + Mx + r(1-x) + y/(x+s)]^p."""

    p: float = 1.0
    t: float = 0.0
    M: float = 0.0
    r: float = 0.0
    s: float = 0.0
    y: float = 0.0
    w: float = 0.0

    family = "legacy"

    def base(self, x: float) -> float:
        if abs(x + self.s) < 1e-9:
            raise ValueError(f"evaluation too close to the pole at x = {-self.s}")
        return self.t + self.M * x + self.r * (1.0 - x) + self.y / (x + self.s)


Params = PolyParams | FracParams | LegacyParams


# -- evaluation and derivatives -------------------------------------------

def eval_cost(params: Params, x: float) -> float:
    """Exact term-by-term evaluation of the family formula at x."""
    if isinstance(params, PolyParams):
        if x <= 0.0 and params.has_poles():
            raise ValueError(f"x = {x} is at/below the pole at 0")
        terms = [params.a4 * x ** 4, params.a3 * x ** 3, params.a2 * x ** 2,
                 params.a1 * x, params.C]
        if params.has_poles():
            terms += [params.b1 / x, params.b2 / x ** 2,
                      params.b3 / x ** 3, params.b4 / x ** 4]
        return compensated_sum(terms)
    if isinstance(params, FracParams):
        if x < 0.0:
            raise ValueError(f"x = {x} below the fractional-power domain [0, inf)")
        return compensated_sum([
            params.a4 * x ** 4, params.a3 * x ** 3, params.a2 * x ** 2,
            params.a1 * x, params.C,
            params.b2 * x ** 0.5, params.b3 * x ** (1.0 / 3.0),
            params.b4 * x ** 0.25])
    if isinstance(params, LegacyParams):
        base = params.base(x)
        p = params.p
        if base < 0.0 and p != int(p):
            raise ValueError(f"negative base {base} under non-integer power {p}")
        return base ** p
    raise TypeError(f"unsupported params type {type(params)!r}")


def first_derivative(params: Params, x: float) -> float:
    if isinstance(params, PolyParams):
        if x <= 0.0 and params.has_poles():
            raise ValueError(f"x = {x} is at/below the pole at 0")
        terms = [4 * params.a4 * x ** 3, 3 * params.a3 * x ** 2,
                 2 * params.a2 * x, params.a1]
        if params.has_poles():
            terms += [-params.b1 / x ** 2, -2 * params.b2 / x ** 3,
                      -3 * params.b3 / x ** 4, -4 * params.b4 / x ** 5]
        return compensated_sum(terms)
    if isinstance(params, FracParams):
        if x <= 0.0:
            raise ValueError(f"x = {x} at/below the fractional-power derivative pole at 0")
        return compensated_sum([
            4 * params.a4 * x ** 3, 3 * params.a3 * x ** 2,
            2 * params.a2 * x, params.a1,
            params.b2 / (2.0 * x ** 0.5),
            params.b3 / (3.0 * x ** (2.0 / 3.0)),
            params.b4 / (4.0 * x ** 0.75)])
    if isinstance(params, LegacyParams):
        base = params.base(x)
        p = params.p
        if base < 0.0 and (p - 1.0) != int(p - 1.0):
            raise ValueError(f"negative base {base} under non-integer power {p - 1}")
        g1 = params.M - params.r - params.y / (x + params.s) ** 2
        return p * base ** (p - 1.0) * g1
    raise TypeError(f"unsupported params type {type(params)!r}")


def second_derivative(params: Params, x: float) -> float:
    if isinstance(params, PolyParams):
        if x <= 0.0:
            raise ValueError("second derivative requires x > 0")
        return compensated_sum([
            12 * params.a4 * x ** 2, 6 * params.a3 * x, 2 * params.a2,
            2 * params.b1 / x ** 3, 6 * params.b2 / x ** 4,
            12 * params.b3 / x ** 5, 20 * params.b4 / x ** 6])
    if isinstance(params, FracParams):
        if x <= 0.0:
            raise ValueError("second derivative requires x > 0")
        return compensated_sum([
            12 * params.a4 * x ** 2, 6 * params.a3 * x, 2 * params.a2,
            -params.b2 / (4.0 * x ** 1.5),
            -2.0 * params.b3 / (9.0 * x ** (5.0 / 3.0)),
            -3.0 * params.b4 / (16.0 * x ** 1.75)])
    if isinstance(params, LegacyParams):
        base = params.base(x)
        p = params.p
        g1 = params.M - params.r - params.y / (x + params.s) ** 2
        g2 = 2.0 * params.y / (x + params.s) ** 3
        for q in (p - 1.0, p - 2.0):
            if base < 0.0 and q != int(q):
                raise ValueError(f"negative base {base} under non-integer power {q}")
        return p * (p - 1.0) * base ** (p - 2.0) * g1 * g1 + p * base ** (p - 1.0) * g2
    raise TypeError(f"unsupported params type {type(params)!r}")


def desired_cost(params: Params, N: int, k: int) -> float:
    """Cost of the target placement: k items of size 1 and N-k floors of size w."""
    if not (0 <= k <= N):
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={N}")
    return compensated_sum([k * eval_cost(params, 1.0),
                            (N - k) * eval_cost(params, params.w)])


def convexity_measure(params: Params, lo: float, hi: float,
                      subintervals: int, threshold: float | None = None
                      ) -> tuple[int, int]:
    """Count subintervals of [lo, hi] passing the midpoint-convexity test
    f(mid) <= (f(u)+f(v))/2 + threshold.  Returns (numerator, denominator)."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if subintervals < 1:
        raise ValueError("subintervals must be >= 1")
    if threshold is None:
        threshold = 1e-12 * max(1.0, abs(eval_cost(params, lo)),
                                abs(eval_cost(params, hi)))
    num = 0
    h = (hi - lo) / subintervals
    for i in range(subintervals):
        u = lo + i * h
        v = lo + (i + 1) * h
        mid = 0.5 * (u + v)
        if eval_cost(params, mid) <= 0.5 * (eval_cost(params, u) + eval_cost(params, v)) + threshold:
            num += 1
    return num, subintervals


# -- breakup scenarios -----------------------------------------------------

@dataclass(frozen=True)
class ScenarioQuantities:
    """Shape constants of a fitting instance."""

    N: int
    k: int
    w: float

    def __post_init__(self) -> None:
        if not (1 <= self.k <= self.N):
            raise ValueError(f"need 1 <= k <= N, got k={self.k}, N={self.N}")
        if not (0.0 <= self.w < 1.0):
            raise ValueError(f"floor w must lie in [0, 1), got {self.w}")

    @property
    def equal_wt(self) -> float:
        """Per-bin mass when the total is spread evenly over all N bins."""
        return (self.k + (self.N - self.k) * self.w) / self.N

    def nkw(self, m: int) -> float:
        """Floor-mass per remaining bin after splitting every item m ways."""
        if self.N <= m * self.k:
            raise ValueError(f"Nkw{m} undefined: N={self.N} <= {m}*k={m * self.k}")
        return (self.N - self.k) * self.w / (self.N - m * self.k)


@dataclass(frozen=True)
class Scenario:
    """A named fractional placement to separate from the target.

    kind is one of "W" (split one item into m equal pieces), "V" (split one
    item into a and 1-a), "Nkw" (split every item into m pieces and pool the
    floor mass), "equalWeight" (spread everything evenly), "piece8"/"piece2x"
    (extra split rows; piece2x carries a 1.5x margin factor).  tightened
    switches the W/V splits to their floor-shifted forms.
    """

    kind: str
    param: float | None = None
    tightened: bool = False

    @property
    def name(self) -> str:
        if self.kind == "W":
            return f"W{int(self.param)}"
        if self.kind == "V":
            return f"V{self.param:g}"
        if self.kind == "Nkw":
            return f"Nkw{int(self.param)}"
        return self.kind

    @property
    def margin_factor(self) -> float:
        return 1.5 if self.kind == "piece2x" else 1.0


def all_scenarios(tightened: bool = False, extra: bool = False) -> list[Scenario]:
    """The full scenario catalog for one fitting variant (guards not yet applied)."""
    out: list[Scenario] = []
    for m in W_SPLITS:
        if tightened and m == 1000:
            continue  # the floor-shifted variant drops the thousand-way split
        out.append(Scenario("W", float(m), tightened))
    for a in V_SPLITS:
        out.append(Scenario("V", a, tightened))
    for m in NKW_SPLITS:
        out.append(Scenario("Nkw", float(m), tightened))
    out.append(Scenario("equalWeight", None, tightened))
    if extra:
        out.append(Scenario("piece8", None, tightened))
        out.append(Scenario("piece2x", None, tightened))
    return out


def scenario_active(sc: Scenario, sq: ScenarioQuantities) -> bool:
    """Guards mirroring the conditional construction of each row."""
    N, k, w = sq.N, sq.k, sq.w
    if sc.kind == "W":
        return 1.0 / sc.param >= w
    if sc.kind == "V":
        return sc.param >= w
    if sc.kind == "Nkw":
        m = int(sc.param)
        return N > m * k and sq.nkw(m) <= 1.0 and 1.0 / m >= w
    return True  # equalWeight, piece8, piece2x are unconditional


def scenario_cost(params: Params, sq: ScenarioQuantities, sc: Scenario) -> float | None:
    """Total cost of the scenario placement; None when the guard excludes it."""
    if not scenario_active(sc, sq):
        return None
    N, k, w = sq.N, sq.k, sq.w
    f = lambda x: eval_cost(params, x)
    if sc.kind == "W":
        m = int(sc.param)
        x = (1.0 + (m - 1) * w) / m if sc.tightened else 1.0 / m
        return m * f(x)
    if sc.kind == "V":
        a = sc.param
        if sc.tightened:
            return compensated_sum([f(a + w / 2.0), f(1.0 - a + w / 2.0)])
        return compensated_sum([f(a), f(1.0 - a)])
    if sc.kind == "Nkw":
        m = int(sc.param)
        return compensated_sum([m * k * f(1.0 / m),
                                (N - m * k) * f(sq.nkw(m))])
    if sc.kind == "equalWeight":
        return N * f(sq.equal_wt)
    if sc.kind == "piece8":
        return 8.0 * f((1.0 + 7.0 * w) / 8.0)
    if sc.kind == "piece2x":
        return 2.0 * f((1.0 + w) / 2.0)
    raise ValueError(f"unknown scenario kind {sc.kind!r}")


def scenario_reference(params: Params, sq: ScenarioQuantities, sc: Scenario) -> float | None:
    """The target-side cost the scenario must exceed (by margin_factor * eps)."""
    if not scenario_active(sc, sq):
        return None
    f1 = eval_cost(params, 1.0)
    fw = eval_cost(params, sq.w)
    if sc.kind == "W":
        m = int(sc.param)
        if sc.tightened:
            return compensated_sum([f1, (m - 1) * fw])
        return f1
    if sc.kind == "V":
        if sc.tightened:
            return compensated_sum([f1, fw])
        return f1
    if sc.kind in ("Nkw", "equalWeight"):
        return desired_cost(params, sq.N, sq.k)
    if sc.kind == "piece8":
        return compensated_sum([f1, 7.0 * fw])
    if sc.kind == "piece2x":
        return compensated_sum([f1, fw])
    raise ValueError(f"unknown scenario kind {sc.kind!r}")


def scenario_margin(params: Params, sq: ScenarioQuantities, sc: Scenario) -> float | None:
    """scenario_cost - scenario_reference; the fit demands >= margin_factor * eps."""
    cost = scenario_cost(params, sq, sc)
    if cost is None:
        return None
    return cost - scenario_reference(params, sq, sc)


# -- serialization ---------------------------------------------------------

_POLY_KEYS = ("C", "a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4", "w")
_FRAC_KEYS = ("C", "a1", "a2", "a3", "a4", "b2", "b3", "b4", "w")
_LEGACY_KEYS = ("p", "t", "M", "r", "s", "y", "w")


def params_to_text(params: Params) -> str:
    """key=value serialization, one per line, family first."""
    lines = [f"family={params.family}"]
    keys = {"poly": _POLY_KEYS, "frac": _FRAC_KEYS, "legacy": _LEGACY_KEYS}[params.family]
    for key in keys:
        lines.append(f"{key}={getattr(params, key)!r}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> Params:
    """Parse the key=value form; family defaults to poly when absent."""
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)", line)
        if m is None:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        fields[m.group(1)] = m.group(2)
    family = fields.pop("family", "poly")
    table = {"poly": (PolyParams, _POLY_KEYS), "frac": (FracParams, _FRAC_KEYS),
             "legacy": (LegacyParams, _LEGACY_KEYS)}
    if family not in table:
        raise ValueError(f"unknown family {family!r}")
    cls, keys = table[family]
    kwargs = {}
    for key, value in fields.items():
        if key not in keys:
            raise ValueError(f"unexpected key {key!r} for family {family}")
        try:
            kwargs[key] = float(value)
        except ValueError:
            raise ValueError(f"non-numeric value for {key!r}: {value!r}") from None
    return cls(**kwargs)
