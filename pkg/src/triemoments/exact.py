"""Exact joint moments of (size, KPL, NPL) for random tries, all n <= n_max.

The three shape parameters satisfy, for n >= 2, distributional recurrences
of split type: the left subtree receives Binom(n, p) keys, the right the
rest, the two subtrees are independent, and the tolls are +1 (size), +n
(KPL) and +(left size + right size) (NPL).  Conditioning on the split and
expanding products of independent subtree contributions turns these into
an O(n_max^2) dynamic program over first, second and mixed moments.  The
k = 0 and k = n split outcomes reproduce the parent quantity itself; those
self-terms are moved to the left-hand side, so each step divides by
1 - p^n - q^n.

Within one n the update order is fixed by data dependence:

    ES, EK, EN  ->  ES2, EK2, ESK  ->  ESN  ->  EN2

(ESN consumes ES2 of the same n; EN2 consumes ESN and ES2).

Precision modes
---------------
standard   float64 tables; binomial weights by a mode-centred multiplicative
           recurrence with renormalisation; convolution sums use compensated
           accumulation and accessors cancel second moments with exact
           product splitting.
extended   double-double tables end to end; weights maintained by the exact
           Pascal update w'(k) = p w(k-1) + q w(k), so second-moment
           cancellation keeps ~1e-28 relative accuracy.

The module also houses the Poisson model: truncated Poisson generating
functions of the moment sequences, the Poissonized variances/covariance and
the two covariance toll functions.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dd import DD, cdot, two_prod
from .errors import DegenerateVariance, GuardExceeded

_ARRAYS = ("ES", "EK", "EN", "ES2", "EK2", "EN2", "ESK", "ESN")


def _binom_weights(n: int, p: float, q: float) -> np.ndarray:
    """Binomial(n, p) pmf by multiplicative recurrence outward from the mode.

    The mode value is seeded in log space (no under/overflow for any n) and
    the vector is renormalised so the weights sum to 1 exactly to rounding.
    """
    k0 = min(max(int((n + 1) * p), 0), n)
    w = np.empty(n + 1)
    w[k0] = 1.0
    if k0 < n:
        ks = np.arange(k0, n, dtype=np.float64)
        w[k0 + 1:] = np.cumprod(((n - ks) * p) / ((ks + 1.0) * q))
    if k0 > 0:
        ks = np.arange(k0, 0, -1, dtype=np.float64)
        w[k0 - 1::-1] = np.cumprod((ks * q) / ((n - ks + 1.0) * p))
    logw0 = (math.lgamma(n + 1) - math.lgamma(k0 + 1) - math.lgamma(n - k0 + 1)
             + k0 * math.log(p) + (n - k0) * math.log(q))
    w *= math.exp(logw0)
    w /= w.sum()
    return w


def _var(m2: float, m1: float) -> float:
    # m2 - m1^2 with the squaring error removed (the subtraction itself is
    # exact by Sterbenz whenever the variance is small relative to m2).
    sq, err = two_prod(m1, m1)
    return float((m2 - sq) - err)


def _cov(m11: float, mx: float, my: float) -> float:
    pr, err = two_prod(mx, my)
    return float((m11 - pr) - err)


@dataclass(frozen=True)
class MomentTable:
    """Exact first/second/mixed moments of (S_n, K_n, N_n) for n <= n_max."""

    p: float
    n_max: int
    precision: str
    ES: np.ndarray
    EK: np.ndarray
    EN: np.ndarray
    ES2: np.ndarray
    EK2: np.ndarray
    EN2: np.ndarray
    ESK: np.ndarray
    ESN: np.ndarray
    _dd: dict | None = field(default=None, repr=False)

    # -- accessors ---------------------------------------------------------
    def _check_n(self, n: int):
        if not (0 <= n <= self.n_max):
            raise IndexError(f"n={n} outside table range 0..{self.n_max}")

    def mean_S(self, n: int) -> float:
        self._check_n(n)
        return float(self.ES[n])

    def mean_K(self, n: int) -> float:
        self._check_n(n)
        return float(self.EK[n])

    def mean_N(self, n: int) -> float:
        self._check_n(n)
        return float(self.EN[n])

    def mean_depth(self, n: int) -> float:
        """E(depth of a random external node) = EK(n)/n."""
        self._check_n(n)
        if n < 1:
            raise ValueError("mean_depth needs n >= 1")
        return float(self.EK[n]) / n

    def _second(self, sq_name: str, a_name: str, b_name: str, n: int) -> float:
        if self._dd is not None:
            m2 = self._dd[sq_name][n]
            r = m2 - self._dd[a_name][n] * self._dd[b_name][n]
            return float(r.to_float())
        if a_name == b_name:
            return _var(getattr(self, sq_name)[n], getattr(self, a_name)[n])
        return _cov(getattr(self, sq_name)[n], getattr(self, a_name)[n],
                    getattr(self, b_name)[n])

    def var_S(self, n: int) -> float:
        self._check_n(n)
        return self._second("ES2", "ES", "ES", n)

    def var_K(self, n: int) -> float:
        self._check_n(n)
        return self._second("EK2", "EK", "EK", n)

    def var_N(self, n: int) -> float:
        self._check_n(n)
        return self._second("EN2", "EN", "EN", n)

    def cov_SK(self, n: int) -> float:
        self._check_n(n)
        return self._second("ESK", "ES", "EK", n)

    def cov_SN(self, n: int) -> float:
        self._check_n(n)
        return self._second("ESN", "ES", "EN", n)

    def _rho(self, cov: float, va: float, vb: float, n: int) -> float:
        if n < 2 or va <= 0.0 or vb <= 0.0:
            raise DegenerateVariance(f"correlation undefined at n={n}")
        return cov / math.sqrt(va * vb)

    def rho_SK(self, n: int) -> float:
        return self._rho(self.cov_SK(n), self.var_S(n), self.var_K(n), n)

    def rho_SK_corrected(self, n: int, correction: float = 1.046) -> float:
        """Correlation with Var(K_n) + correction in the denominator.

        The additive constant magnifies the tiny periodic fluctuation so it
        is visible in plots; its value is a plotting choice, not a derived
        quantity, hence configurable.
        """
        return self._rho(self.cov_SK(n), self.var_S(n),
                         self.var_K(n) + correction, n)

    def rho_SN(self, n: int) -> float:
        return self._rho(self.cov_SN(n), self.var_S(n), self.var_N(n), n)

    # -- serialisation -----------------------------------------------------
    _CSV_COLUMNS = ("n", "ES", "EK", "EN", "VarS", "VarK", "VarN",
                    "CovSK", "CovSN", "RhoSK", "RhoSN")

    def _row(self, n: int) -> list:
        rho_sk = rho_sn = float("nan")
        if n >= 2:
            rho_sk, rho_sn = self.rho_SK(n), self.rho_SN(n)
        return [n, self.mean_S(n), self.mean_K(n), self.mean_N(n),
                self.var_S(n), self.var_K(n), self.var_N(n),
                self.cov_SK(n), self.cov_SN(n), rho_sk, rho_sn]

    def config(self) -> dict:
        return {"p": self.p, "n_max": self.n_max, "precision": self.precision}

    def to_csv(self, extra_config: dict | None = None) -> str:
        cfg = dict(self.config())
        if extra_config:
            cfg.update(extra_config)
        cfg_line = "# config: " + " ".join(f"{k}={v}" for k, v in sorted(cfg.items()))
        lines = [cfg_line, ",".join(self._CSV_COLUMNS)]
        for n in range(self.n_max + 1):
            row = self._row(n)
            lines.append(",".join([str(row[0])] + [repr(float(x)) for x in row[1:]]))
        return "\n".join(lines) + "\n"

    def to_json(self, extra_config: dict | None = None) -> str:
        cfg = dict(self.config())
        if extra_config:
            cfg.update(extra_config)
        cols = {name: [] for name in self._CSV_COLUMNS}
        for n in range(self.n_max + 1):
            for name, val in zip(self._CSV_COLUMNS, self._row(n)):
                cols[name].append(val if name == "n" else float(val))
        return json.dumps({"config": cfg, "columns": cols}, allow_nan=True)


def _compute_standard(p: float, q: float, n_max: int) -> dict:
    t = {name: np.zeros(n_max + 1) for name in _ARRAYS}
    ES, EK, EN = t["ES"], t["EK"], t["EN"]
    ES2, EK2, EN2 = t["ES2"], t["EK2"], t["EN2"]
    ESK, ESN = t["ESK"], t["ESN"]
    for n in range(2, n_max + 1):
        w = _binom_weights(n, p, q)
        wi = w[1:n]
        wb = w[0] + w[n]
        denom = 1.0 - wb
        fwd = slice(1, n)
        rev = slice(n - 1, 0, -1)
        sf, sr = ES[fwd], ES[rev]
        kf, kr = EK[fwd], EK[rev]
        nf, nr = EN[fwd], EN[rev]
        r_s = sf + sr
        r_k = kf + kr
        r_n = nf + nr + r_s
        rows = np.stack([
            r_s,
            r_k,
            r_n,
            ES2[fwd] + ES2[rev] + 2.0 * (sf * sr + r_s),
            EK2[fwd] + EK2[rev] + 2.0 * (kf * kr) + (2.0 * n) * r_k,
            ESK[fwd] + ESK[rev] + sf * kr + sr * kf + float(n) * r_s + r_k,
            ESN[fwd] + ESN[rev] + ES2[fwd] + ES2[rev]
            + sf * nr + nf * sr + 2.0 * sf * sr + r_n,
            EN2[fwd] + EN2[rev] + 2.0 * (ESN[fwd] + ESN[rev]) + ES2[fwd] + ES2[rev]
            + 2.0 * (nf * nr + nf * sr + sf * nr + sf * sr),
        ])
        d = cdot(rows, wi)
        ES[n] = (d[0] + 1.0) / denom
        EK[n] = (d[1] + n) / denom
        EN[n] = (d[2] + wb * ES[n]) / denom
        ES2[n] = (d[3] + wb * 2.0 * ES[n] + 1.0) / denom
        EK2[n] = (d[4] + wb * (2.0 * n) * EK[n] + float(n) * n) / denom
        ESK[n] = (d[5] + wb * (n * ES[n] + EK[n]) + n) / denom
        ESN[n] = (d[6] + wb * (ES2[n] + EN[n] + ES[n])) / denom
        EN2[n] = (d[7] + wb * (2.0 * ESN[n] + ES2[n])) / denom
    return t


def _dd_stack(rows: list[DD]) -> DD:
    return DD(np.stack([r.hi for r in rows]), np.stack([r.lo for r in rows]))


def _compute_extended(p: float, q: float, n_max: int) -> dict:
    t = {name: DD(np.zeros(n_max + 1), np.zeros(n_max + 1)) for name in _ARRAYS}
    ES, EK, EN = t["ES"], t["EK"], t["EN"]
    ES2, EK2, EN2 = t["ES2"], t["EK2"], t["EN2"]
    ESK, ESN = t["ESK"], t["ESN"]
    pd, qd = DD(p), DD(q)
    w = _dd_stack([qd * qd, DD(2.0) * pd * qd, pd * pd])  # weights at n = 2
    w = DD(w.hi.ravel(), w.lo.ravel())
    for n in range(2, n_max + 1):
        wi = w[1:n]
        wb = w[0] + w[n]
        denom = DD(1.0) - wb
        fwd = slice(1, n)
        rev = slice(n - 1, 0, -1)
        sf, sr = ES[fwd], ES[rev]
        kf, kr = EK[fwd], EK[rev]
        nf, nr = EN[fwd], EN[rev]
        r_s = sf + sr
        r_k = kf + kr
        r_n = nf + nr + r_s
        s2 = ES2[fwd] + ES2[rev]
        sn = ESN[fwd] + ESN[rev]
        rows = _dd_stack([
            r_s,
            r_k,
            r_n,
            s2 + DD(2.0) * (sf * sr + r_s),
            EK2[fwd] + EK2[rev] + DD(2.0) * (kf * kr) + DD(2.0 * n) * r_k,
            ESK[fwd] + ESK[rev] + sf * kr + sr * kf + DD(float(n)) * r_s + r_k,
            sn + s2 + sf * nr + nf * sr + DD(2.0) * (sf * sr) + r_n,
            EN2[fwd] + EN2[rev] + DD(2.0) * sn + s2
            + DD(2.0) * (nf * nr + nf * sr + sf * nr + sf * sr),
        ])
        d = (rows * wi).sum(axis=-1)
        es = (d[0] + 1.0) / denom
        ek = (d[1] + float(n)) / denom
        en = (d[2] + wb * es) / denom
        es2 = (d[3] + wb * (DD(2.0) * es) + 1.0) / denom
        ek2 = (d[4] + wb * (DD(2.0 * n) * ek) + float(n) * float(n)) / denom
        esk = (d[5] + wb * (DD(float(n)) * es + ek) + float(n)) / denom
        esn = (d[6] + wb * (es2 + en + es)) / denom
        en2 = (d[7] + wb * (DD(2.0) * esn + es2)) / denom
        for arr, val in ((ES, es), (EK, ek), (EN, en), (ES2, es2),
                         (EK2, ek2), (ESK, esk), (ESN, esn), (EN2, en2)):
            arr[n] = val
        if n < n_max:
            # Pascal update: w'(k) = p w(k-1) + q w(k), exact recurrence
            pw = pd * w
            qw = qd * w
            nw = DD(np.empty(n + 2), np.empty(n + 2))
            nw[0] = qw[0]
            nw[n + 1] = pw[n]
            nw[1:n + 1] = pw[0:n] + qw[1:n + 1]
            w = nw
    return t


def compute(p: float, n_max: int, precision: str = "standard") -> MomentTable:
    """Solve the moment recurrences exactly for all n <= n_max at fixed p."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0,1)")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if precision not in ("standard", "extended"):
        raise ValueError("precision must be 'standard' or 'extended'")
    # The law is invariant under p <-> q, so compute with the canonical
    # pair: q_eff = max(p, 1-p) and p_eff = 1 - q_eff (exact by Sterbenz).
    # Inputs p and 1-p then run bit-identical arithmetic, so their tables
    # serialize byte-identically.
    q_eff = max(p, 1.0 - p)
    p_eff = 1.0 - q_eff
    if precision == "standard":
        t = _compute_standard(p_eff, q_eff, n_max)
        return MomentTable(p=p, n_max=n_max, precision=precision,
                           **{k: t[k] for k in _ARRAYS})
    t = _compute_extended(p_eff, q_eff, n_max)
    floats = {k: t[k].to_float() for k in _ARRAYS}
    return MomentTable(p=p, n_max=n_max, precision=precision,
                       _dd=t, **floats)


# ---------------------------------------------------------------------------
# Poisson model
# ---------------------------------------------------------------------------

def _guard_from_length(n_terms: int) -> float:
    # largest z with z + 12 sqrt(z) + 50 <= N: the Poisson(z) mass beyond
    # 12 sigma + 50 makes the truncated tail < 1e-12 for any polynomially
    # bounded moment sequence.
    nn = n_terms - 1
    if nn <= 50:
        return 0.0
    u = math.sqrt(nn - 50 + 36.0) - 6.0
    return u * u


@dataclass(frozen=True)
class PoissonSeries:
    """A truncated Poisson generating function e^-z sum m_n z^n / n!."""

    coef: np.ndarray
    guard_z: float

    @classmethod
    def from_moments(cls, moments) -> "PoissonSeries":
        coef = np.asarray(moments, dtype=np.float64)
        return cls(coef=coef, guard_z=_guard_from_length(len(coef)))

    def eval(self, z, derivative: int = 0):
        """Evaluate the series (or its first derivative) at z.

        The derivative is taken termwise: d/dz e^-z sum m_n z^n/n! equals
        e^-z sum (m_{n+1} - m_n) z^n / n!.
        """
        if derivative not in (0, 1):
            raise ValueError("derivative must be 0 or 1")
        if abs(z) > self.guard_z:
            raise GuardExceeded(
                f"|z|={abs(z):g} beyond series guard {self.guard_z:g}")
        # the guard certifies the tail beyond z + 12 sqrt(z) + 50 terms is
        # negligible; do not iterate further into a long table
        limit = int(math.ceil(abs(z) + 12.0 * math.sqrt(abs(z)) + 50.0)) + 2
        c = self.coef[:limit + 1] if limit + 1 < len(self.coef) else self.coef
        if derivative:
            c = np.diff(c)
        zc = complex(z)
        if zc.imag == 0.0:
            x = zc.real
            term = 1.0
            parts = []
            for i, cn in enumerate(c):
                parts.append(cn * term)
                term *= x / (i + 1)
            return math.exp(-x) * math.fsum(parts)
        term = 1.0 + 0.0j
        re_parts, im_parts = [], []
        for i, cn in enumerate(c):
            v = cn * term
            re_parts.append(v.real)
            im_parts.append(v.imag)
            term *= zc / (i + 1)
        return cmath.exp(-zc) * complex(math.fsum(re_parts), math.fsum(im_parts))


def poisson_eval(series: PoissonSeries, z, derivative: int = 0):
    """Evaluate a PoissonSeries (functional form of PoissonSeries.eval)."""
    return series.eval(z, derivative)


class PoissonModel:
    """The five Poisson generating functions of one moment table.

    f10/f01 are the transforms of ES/EK, f20/f02 of the second moments and
    f11 of the mixed moment; from them the Poissonized variances, the
    Poissonized covariance and its two toll functions are evaluated.
    """

    def __init__(self, table: MomentTable):
        self.p = table.p
        self.q = 1.0 - table.p
        self.f10 = PoissonSeries.from_moments(table.ES)
        self.f01 = PoissonSeries.from_moments(table.EK)
        self.f20 = PoissonSeries.from_moments(table.ES2)
        self.f02 = PoissonSeries.from_moments(table.EK2)
        self.f11 = PoissonSeries.from_moments(table.ESK)

    @property
    def guard_z(self) -> float:
        return self.f10.guard_z

    def var_S(self, z: float) -> float:
        """Poissonized variance of the size: f20 - f10^2 - z f10'^2."""
        return (self.f20.eval(z) - self.f10.eval(z) ** 2
                - z * self.f10.eval(z, 1) ** 2)

    def var_K(self, z: float) -> float:
        """Poissonized variance of the KPL: f02 - f01^2 - z f01'^2."""
        return (self.f02.eval(z) - self.f01.eval(z) ** 2
                - z * self.f01.eval(z, 1) ** 2)

    def cov(self, z: float) -> float:
        """Poissonized covariance: f11 - f10 f01 - z f10' f01'."""
        return (self.f11.eval(z) - self.f10.eval(z) * self.f01.eval(z)
                - z * self.f10.eval(z, 1) * self.f01.eval(z, 1))

    def h1(self, z: float) -> float:
        """First covariance toll: pq z (f10'(pz)-f10'(qz))(f01'(pz)-f01'(qz))."""
        p, q = self.p, self.q
        return (p * q * z
                * (self.f10.eval(p * z, 1) - self.f10.eval(q * z, 1))
                * (self.f01.eval(p * z, 1) - self.f01.eval(q * z, 1)))

    def h2(self, z: float) -> float:
        """Second covariance toll (exponentially small for large z)."""
        p, q = self.p, self.q
        ez = math.exp(-z)
        a = z * ez * (self.f10.eval(p * z) + self.f10.eval(q * z)
                      + p * (1.0 - z) * self.f10.eval(p * z, 1)
                      + q * (1.0 - z) * self.f10.eval(q * z, 1))
        b = ez * ((1.0 + z) * self.f01.eval(p * z)
                  + (1.0 + z) * self.f01.eval(q * z)
                  - p * z * z * self.f01.eval(p * z, 1)
                  - q * z * z * self.f01.eval(q * z, 1))
        c = z * ez * (1.0 - (1.0 + z * z) * ez)
        return a + b + c
