"""Closed-form layer generators for the built-in systems.

Every family is constructible from ``(name, params)`` alone, so config files
and the ``repro`` targets can name them directly.

=============  ==========================================================
name           layer ``n``
=============  ==========================================================
constant       ``N`` maps ``r (x + j*gap)``, ``j = 0..N-1``
ex51           2D: ``diag(.5,.4) x`` and ``.5 (x + (1,1))``
ex53           ``form=phi``: ``x/2`` and ``(x + rho**n / n)/2``;
               ``form=psi``: ``r_n (x + j)``, ``r_1 = rho/2``,
               ``r_n = (n-1) rho / (2n)``
ex54           2D: ``((x + i/(2**n n))/2, (y + j/2)/2)``, ``i, j in {0,1}``
ex55           ``x/(3 a_n)`` and ``(x-1)/(3 a_n) + 1`` with ``a_n`` from
               ``a_rule``: up ``(n+3)/(n+2)``, down ``(n+2)/(n+3)``,
               geometric ``1.5**(2**-n)``, constant ``c``
ex56           2D: ``n**2`` maps of ratio ``1/(2n)`` on a grid plus three of
               ratio ``1/2``
ex57           ``r(x-j)+j`` with ``r = 1/3`` when ``floor(log2 n)`` is even,
               ``1/2`` when odd
ex58           ``2**-2**n (x + a)``, ``a`` in all digits ``0..2**2**n - 1``
               (``digits=full``) or just the two endpoints
ex59           ``(x+1)/2`` and ``(x + j - 1)/(2n)``, ``j = 1..n``
=============  ==========================================================
"""

from __future__ import annotations

import math

import numpy as np

from .core import Box, ContractionMap, ExplicitPeriodic, LayerSystem, Provider, RatioTable
from .errors import ConfigError, ProviderRangeError

LN2 = math.log(2.0)
MATERIALIZE_MAX_MAPS = 1 << 20


class Family(Provider):
    dimension = 1
    params_spec: dict = {}

    def __init__(self, **params):
        unknown = set(params) - set(self.params_spec)
        if unknown:
            raise ConfigError("/family/params", f"unknown parameter(s) {sorted(unknown)} for {self.name}")
        self.params = {k: params.get(k, default) for k, default in self.params_spec.items()}
        self.validate()

    def validate(self):
        pass

    def ambient(self) -> Box:
        return Box(np.zeros(self.dimension), np.ones(self.dimension))

    # families with a single ratio per layer override these two
    def log_ratio(self, ns: np.ndarray) -> np.ndarray | None:
        return None

    def log_count(self, ns: np.ndarray) -> np.ndarray:
        return np.full(ns.shape, LN2)

    def ratio_groups(self, n: int):
        lr = self.log_ratio(np.array([n]))
        if lr is None:
            return None
        return lr, self.log_count(np.array([n]))

    def ratio_table(self, start: int, stop: int):
        ns = np.arange(start, stop, dtype=np.int64)
        lr = self.log_ratio(ns)
        if lr is None:
            groups = [self.ratio_groups(int(n)) for n in ns]
            if any(g is None for g in groups):
                return None
            return RatioTable.from_groups(groups)
        return RatioTable(np.asarray(lr, float), np.asarray(self.log_count(ns), float),
                          np.arange(len(ns) + 1, dtype=np.int64))

    def to_json(self) -> dict:
        return {"provider": "family", "family": {"name": self.name, "params": dict(self.params)}}

    def _check_size(self, n: int, count: float):
        if count > MATERIALIZE_MAX_MAPS:
            raise ProviderRangeError(
                f"{self.name} layer {n} has {count:.4g} maps; too many to materialize")


class Constant(Family):
    name = "constant"
    params_spec = {"r": 1 / 3, "N": 2, "gap": None}
    similarity_only = True

    def validate(self):
        r, N = self.params["r"], self.params["N"]
        if not (0 < float(r) < 1):
            raise ConfigError("/family/params/r", f"r must lie in (0,1), got {r!r}")
        if int(N) != N or N < 2:
            raise ConfigError("/family/params/N", f"N must be an integer >= 2, got {N!r}")
        self.r, self.N = float(r), int(N)
        gap = self.params["gap"]
        self.gap = (1 - self.r) / (self.r * (self.N - 1)) if gap is None else float(gap)
        if self.gap < 0:
            raise ConfigError("/family/params/gap", "gap must be non-negative")

    def ambient(self) -> Box:
        return Box([0.0], [self.r * (self.N - 1) * self.gap / (1 - self.r)])

    def maps(self, n):
        return [ContractionMap.similarity(self.r, [j * self.gap]) for j in range(self.N)]

    def log_ratio(self, ns):
        return np.full(ns.shape, math.log(self.r))

    def log_count(self, ns):
        return np.full(ns.shape, math.log(self.N))

    def open_set(self, n):
        return self.ambient()


class Ex51(Family):
    name = "ex51"
    dimension = 2

    def maps(self, n):
        return [ContractionMap.diagonal([0.5, 0.4], [0.0, 0.0]),
                ContractionMap.similarity(0.5, [1.0, 1.0])]


class Ex53(Family):
    name = "ex53"
    params_spec = {"rho": 1.0, "form": "psi"}
    similarity_only = True

    def validate(self):
        rho = self.params["rho"]
        if not (0 < float(rho) <= 1):
            raise ConfigError("/family/params/rho", f"rho must lie in (0,1], got {rho!r}")
        if self.params["form"] not in ("phi", "psi"):
            raise ConfigError("/family/params/form", "form must be 'phi' or 'psi'")
        self.rho = float(rho)
        self.form = self.params["form"]

    def ambient(self):
        if self.form == "phi":
            # (x + rho**n/n)/2 stays in [0, M] for every n iff M >= rho
            return Box([0.0], [self.rho])
        return Box([0.0], [self.rho / (2 - self.rho)])

    def _psi_log_ratio(self, ns):
        ns = np.asarray(ns, dtype=float)
        out = np.log(self.rho / 2) + np.log(np.maximum(ns - 1, 1) / ns)
        return np.where(ns == 1, math.log(self.rho / 2), out)

    def maps(self, n):
        if self.form == "phi":
            shift = math.exp(n * math.log(self.rho) - math.log(n)) if self.rho < 1 else 1.0 / n
            return [ContractionMap.similarity(0.5, [0.0]), ContractionMap.similarity(0.5, [shift])]
        lr = float(self._psi_log_ratio([n])[0])
        return [ContractionMap.similarity(log_ratio=lr, translation=[0.0]),
                ContractionMap.similarity(log_ratio=lr, translation=[1.0])]

    def log_ratio(self, ns):
        if self.form == "phi":
            return np.full(ns.shape, -LN2)
        return self._psi_log_ratio(ns)

    def phi_open_length(self, n: int) -> float:
        """``sum_{k>=1} rho**(n+k-1) / (2**k (n+k-1))``."""
        total, k = 0.0, 1
        while True:
            m = n + k - 1
            term = math.exp(m * math.log(self.rho) - k * LN2 - math.log(m)) if self.rho < 1 else 2.0 ** -k / m
            total += term
            if term < 1e-18 * total:
                return total
            k += 1

    def open_set(self, n):
        if self.form == "phi":
            return Box([0.0], [self.phi_open_length(n)])
        return Box([0.0], [self.rho / (2 - self.rho)])


class Ex54(Family):
    name = "ex54"
    dimension = 2
    similarity_only = True

    def ambient(self):
        return Box([0.0, 0.0], [0.5, 0.5])

    def maps(self, n):
        out = []
        sx = 2.0 ** -n / n
        for j in (0, 1):
            for i in (0, 1):
                out.append(ContractionMap.similarity(0.5, [i * sx, j / 2]))
        # digit index is i + 2j (0-based)
        return out

    def log_ratio(self, ns):
        return np.full(ns.shape, -LN2)

    def log_count(self, ns):
        return np.full(ns.shape, 2 * LN2)

    def open_set(self, n):
        k = np.arange(1, 200)
        width = float(np.sum(2.0 ** -(n + 2 * k - 1) / (n + k - 1)))
        return Box([0.0, 0.0], [width, 0.5])


A_RULES = ("up", "down", "geometric", "constant")


class Ex55(Family):
    name = "ex55"
    params_spec = {"a_rule": "up", "c": 1.0}
    similarity_only = True

    def validate(self):
        rule = self.params["a_rule"]
        if rule not in A_RULES:
            raise ConfigError("/family/params/a_rule", f"a_rule must be one of {A_RULES}, got {rule!r}")
        c = float(self.params["c"])
        if rule == "constant" and not (2 / 3 <= c <= 1.5):
            raise ConfigError("/family/params/c", f"c must lie in [2/3, 3/2], got {c!r}")
        self.rule, self.c = rule, c

    def log_a(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=float)
        if self.rule == "up":
            return np.log((ns + 3) / (ns + 2))
        if self.rule == "down":
            return np.log((ns + 2) / (ns + 3))
        if self.rule == "geometric":
            return np.exp2(-ns) * math.log(1.5)
        return np.full(ns.shape, math.log(self.c))

    def maps(self, n):
        lr = -math.log(3.0) - float(self.log_a([n])[0])
        r = math.exp(lr)
        return [ContractionMap.similarity(log_ratio=lr, translation=[0.0]),
                ContractionMap.similarity(log_ratio=lr, translation=[1.0 / r - 1.0])]

    def log_ratio(self, ns):
        return -math.log(3.0) - self.log_a(ns)

    def open_set(self, n):
        return Box([0.0], [1.0])


class Ex56(Family):
    name = "ex56"
    dimension = 2
    similarity_only = True

    def maps(self, n):
        self._check_size(n, n * n + 3)
        out = [None] * (n * n + 3)
        for j in range(n):
            for i in range(n):
                out[i + n * j] = ContractionMap.similarity(1 / (2 * n), [i, j])
        for k, (i, j) in enumerate(((1, 0), (0, 1), (1, 1))):
            out[n * n + k] = ContractionMap.similarity(0.5, [i, j])
        return out

    def ratio_groups(self, n):
        if n == 1:
            return np.array([-LN2]), np.array([math.log(4.0)])
        return (np.array([-math.log(2 * n), -LN2]),
                np.array([2 * math.log(n), math.log(3.0)]))

    def open_set(self, n):
        return Box([0.0, 0.0], [1.0, 1.0])


class Ex57(Family):
    name = "ex57"
    similarity_only = True

    @staticmethod
    def third_block(ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        lg = np.floor(np.log2(ns.astype(float))).astype(np.int64)
        # guard float log2 at exact powers of two
        lg = np.where((1 << (lg + 1)) <= ns, lg + 1, lg)
        lg = np.where((1 << lg) > ns, lg - 1, lg)
        return lg % 2 == 0

    def maps(self, n):
        r = 1 / 3 if bool(self.third_block([n])[0]) else 0.5
        return [ContractionMap.similarity(r, [0.0]), ContractionMap.similarity(r, [1 / r - 1])]

    def log_ratio(self, ns):
        return np.where(self.third_block(ns), -math.log(3.0), -LN2)

    def open_set(self, n):
        return Box([0.0], [1.0])

    def structure_points(self, kmax):
        out, m = [], 1
        while (1 << m) - 1 <= kmax:
            out.append((1 << m) - 1)
            m += 1
        return out


class Ex58(Family):
    name = "ex58"
    params_spec = {"digits": "full"}
    similarity_only = True
    max_layer = 1000

    def validate(self):
        if self.params["digits"] not in ("full", "endpoints"):
            raise ConfigError("/family/params/digits", "digits must be 'full' or 'endpoints'")
        self.full = self.params["digits"] == "full"

    def maps(self, n):
        if n > 9:
            raise ProviderRangeError(f"ex58 layer {n}: ratio 2**-2**{n} is not representable as a float map")
        base = 1 << (1 << n)
        lr = -(2.0 ** n) * LN2
        if self.full:
            self._check_size(n, base)
            digits = range(base)
        else:
            digits = (0, base - 1)
        return [ContractionMap.similarity(log_ratio=lr, translation=[float(a)]) for a in digits]

    def log_ratio(self, ns):
        return -np.exp2(np.asarray(ns, dtype=float)) * LN2

    def log_count(self, ns):
        if self.full:
            return np.exp2(np.asarray(ns, dtype=float)) * LN2
        return np.full(np.shape(ns), LN2)

    def open_set(self, n):
        return Box([0.0], [1.0])


class Ex59(Family):
    name = "ex59"
    params_spec = {"margin": 0.0}
    similarity_only = True

    def validate(self):
        m = float(self.params["margin"])
        if m < 0:
            raise ConfigError("/family/params/margin", "margin must be non-negative")
        self.margin = m

    def ambient(self):
        return Box([-self.margin], [1.0 + self.margin])

    def maps(self, n):
        self._check_size(n, n + 1)
        out = [ContractionMap.similarity(0.5, [1.0])]
        out += [ContractionMap.similarity(1 / (2 * n), [j - 1.0]) for j in range(1, n + 1)]
        return out

    def ratio_groups(self, n):
        if n == 1:
            return np.array([-LN2]), np.array([LN2])
        return np.array([-math.log(2 * n), -LN2]), np.array([math.log(n), 0.0])

    def open_set(self, n):
        return Box([0.0], [1.0])


FAMILIES = {cls.name: cls for cls in (Constant, Ex51, Ex53, Ex54, Ex55, Ex56, Ex57, Ex58, Ex59)}


def make_family(name: str, params: dict | None = None) -> Family:
    cls = FAMILIES.get(name)
    if cls is None:
        raise ConfigError("/family/name", f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    return cls(**(params or {}))


def family_system(name: str, ambient: Box | None = None, **params) -> LayerSystem:
    """Convenience: ``family_system('ex55', a_rule='down')``."""
    fam = make_family(name, params)
    return LayerSystem(fam.dimension, ambient if ambient is not None else fam.ambient(), fam)


def explicit_system(prefix, cycle, ambient: Box) -> LayerSystem:
    prov = ExplicitPeriodic(prefix, cycle)
    return LayerSystem(ambient.dim, ambient, prov)
