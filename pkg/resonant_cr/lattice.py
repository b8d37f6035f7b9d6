# resonant_cr/lattice.py
import logging
import math
from functools import lru_cache
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy.signal import fftconvolve

from resonant_cr import config as settings
from resonant_cr.arithmetic import _divisors
from resonant_cr.data_manager import (
    read_resonant_index,
    save_csv,
    write_resonant_index,
)
from resonant_cr.envelope import Envelope, japanese
from resonant_cr.errors import BudgetError, DomainError
from resonant_cr.reports import ConvergenceReport
from resonant_cr.zeta import zeta

logger = logging.getLogger(__name__)

_I8 = np.int64


class LatticeSpec(BaseModel):
    """Lattice Z^n / L with resonance level mu = mu_tilde / L^2."""

    n: int = Field(ge=1, description="Space dimension.")
    p: int = Field(1, ge=1, description="Nonlinearity half-degree.")
    L: int = Field(ge=1, description="Lattice scale.")
    mu_tilde: int = Field(0, description="Integer resonance level mu L^2.")
    R_int: Optional[int] = Field(
        None, ge=0, description="Truncation radius in integer coordinates."
    )

    @model_validator(mode="after")
    def _check(self):
        if self.n * self.p < 2:
            raise ValueError(f"need n*p >= 2, got n={self.n}, p={self.p}")
        if self.mu_tilde % 2:
            raise ValueError(f"mu_tilde must be even, got {self.mu_tilde}")
        return self

    @property
    def d(self) -> int:
        return 2 * self.p * self.n

    @property
    def nu(self) -> int:
        """Level of the paired form: Omega L^2 = -2 (m1' . m2')."""
        return -self.mu_tilde // 2

    @property
    def mu(self) -> float:
        return self.mu_tilde / self.L**2

    def with_radius(self, R_int: int) -> "LatticeSpec":
        return self.model_copy(update={"R_int": int(R_int)})


class ResonantIndex(BaseModel):
    """Enumerated resonant tuples around an integer base frequency.

    For p = 1 each row is (m1', m2') with m1' . m2' = nu; for p = 2, n = 1
    each row is (J1, J2, J3, J4) with J1 J2 + J3 J4 = nu.
    """

    n: int
    p: int = 1
    L: int
    nu: int
    R_int: int
    base: List[int] = Field(description="K as integer coordinates L*K.")
    tuples: np.ndarray = Field(description="int64 array of shape (count, 2pn).")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def count(self) -> int:
        return int(self.tuples.shape[0])

    @property
    def width(self) -> int:
        return 2 * self.p * self.n

    def frequencies(self) -> np.ndarray:
        """Integer coordinates of K_1 .. K_(2p+1), shape (count, 2p+1, n)."""
        J = self.tuples.reshape(self.count, 2 * self.p, self.n)
        if self.p == 1:
            m1, m2 = J[:, 0], J[:, 1]
            k = np.stack([m1, m1 + m2, m2], axis=1)
        else:
            k = k_from_j(J, self.p)
        return k + np.asarray(self.base, dtype=_I8)

    def verify(self) -> bool:
        """Exact integer check of the level equation, S = 0 and Omega = mu."""
        J = self.tuples.reshape(self.count, 2 * self.p, self.n)
        level = np.sum(J[:, 0::2] * J[:, 1::2], axis=(1, 2))
        if np.any(level != self.nu):
            return False
        K = self.frequencies()
        base = np.asarray(self.base, dtype=_I8)
        signs = np.array([(-1) ** i for i in range(2 * self.p + 1)], dtype=_I8)
        S = np.einsum("i,kij->kj", signs, K) - base
        omega = np.einsum("i,ki->k", signs, np.sum(K * K, axis=2)) - base @ base
        return bool(np.all(S == 0) and np.all(omega == -2 * self.nu))

    def save(self, file_path: str):
        write_resonant_index(
            file_path,
            n=self.n,
            p=self.p,
            L=self.L,
            nu=self.nu,
            R_int=self.R_int,
            base=self.base,
            tuples=self.tuples,
        )

    @classmethod
    def load(cls, file_path: str) -> "ResonantIndex":
        data = read_resonant_index(file_path)
        return cls(
            n=data["n"],
            p=data["p"],
            L=data["L"],
            nu=data["nu"],
            R_int=data["R_int"],
            base=[int(v) for v in data["base"]],
            tuples=data["tuples"],
        )

    def export_csv(self, file_path: str) -> int:
        columns = [f"t{i}" for i in range(self.width)]
        rows = [[int(v) for v in row] for row in self.tuples]
        header = {"n": self.n, "p": self.p, "L": self.L, "nu": self.nu}
        return save_csv(rows, columns, file_path, header=header)


class ResonantSum(BaseModel):
    value_re: float
    value_im: float
    tail_estimate: float = Field(description="Bound on the dropped tail.")
    R_int: int
    route: Literal["enumeration", "histogram", "empty"]
    count: Optional[int] = Field(None, description="Tuples summed, if enumerated.")

    @property
    def value(self) -> complex:
        return complex(self.value_re, self.value_im)


# --- Box and slice helpers ---


def _box(k: int, R: int) -> np.ndarray:
    """All integer vectors of [-R, R]^k in lexicographic order."""
    if k == 0:
        return np.zeros((1, 0), dtype=_I8)
    axis = np.arange(-R, R + 1, dtype=_I8)
    return np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    """(g, u, v) with a u + b v = g = gcd(a, b) > 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_u, u = u, old_u - quot * u
        old_v, v = v, old_v - quot * v
    if old_r < 0:
        return -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def _t_range(c0: np.ndarray, s: int, R: int) -> Tuple[np.ndarray, np.ndarray]:
    """Integer t with |c0 + t s| <= R, as inclusive bounds."""
    if s > 0:
        return -((R + c0) // s), (R - c0) // s
    s = -s
    return -((R - c0) // s), (c0 + R) // s


def _slice_solutions(m: np.ndarray, nu: int, R: int) -> np.ndarray:
    """All x in [-R, R]^n with m . x = nu, lexicographically sorted.

    Two nonzero coefficients (a, b) carry a line solve by extended gcd
    along the primitive direction (b, -a)/g; the remaining coordinates
    are free. An empty slice is returned when gcd(m) does not divide nu.
    """
    n = len(m)
    nz = np.flatnonzero(m)
    empty = np.zeros((0, n), dtype=_I8)
    if nz.size == 0:
        return _box(n, R) if nu == 0 else empty
    if nz.size == 1:
        k = int(nz[0])
        a = int(m[k])
        if nu % a or abs(nu // a) > R:
            return empty
        rest = _box(n - 1, R)
        return np.insert(rest, k, nu // a, axis=1)
    i, j = int(nz[0]), int(nz[1])
    a, b = int(m[i]), int(m[j])
    g, u, v = _ext_gcd(a, b)
    free = [k for k in range(n) if k not in (i, j)]
    F = _box(len(free), R)
    rhs = nu - F @ m[free].astype(_I8)
    ok = rhs % g == 0
    F, rhs = F[ok], rhs[ok]
    if len(rhs) == 0:
        return empty
    x0 = u * (rhs // g)
    y0 = v * (rhs // g)
    sx, sy = b // g, -(a // g)
    lo_x, hi_x = _t_range(x0, sx, R)
    lo_y, hi_y = _t_range(y0, sy, R)
    lo = np.maximum(lo_x, lo_y)
    hi = np.minimum(hi_x, hi_y)
    counts = np.maximum(hi - lo + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return empty
    row = np.repeat(np.arange(len(rhs)), counts)
    starts = np.cumsum(counts) - counts
    t = lo[row] + (np.arange(total) - starts[row])
    out = np.empty((total, n), dtype=_I8)
    out[:, i] = x0[row] + t * sx
    out[:, j] = y0[row] + t * sy
    if free:
        out[:, free] = F[row]
    return out[np.lexsort(out.T[::-1])]


def enumeration_cost(n: int, R: int) -> float:
    """Slices times free-coordinate rows per slice."""
    side = float(2 * R + 1)
    return side**n * side ** max(n - 2, 0)


def enumerate_resonant(spec: LatticeSpec, K_int: Sequence[int]) -> ResonantIndex:
    """All (m1', m2') in the box |.|_inf <= R_int with m1' . m2' = nu.

    The degenerate slice m1' = 0 is included; rows come out in
    lexicographic order of (m1', m2').
    """
    if spec.p != 1:
        raise DomainError("pair enumeration is for p = 1; use general_p_enumerate")
    n = spec.n
    if len(K_int) != n:
        raise DomainError(f"K has {len(K_int)} coordinates, expected {n}")
    R = 4 * spec.L if spec.R_int is None else spec.R_int
    cost = enumeration_cost(n, R)
    if cost > settings.ENUMERATION_BUDGET:
        raise BudgetError(
            f"resonant enumeration with R_int={R}, n={n}",
            estimate=cost,
            budget=settings.ENUMERATION_BUDGET,
            analysis={"R_int": R, "n": n, "L": spec.L},
        )
    nu = spec.nu
    blocks = []
    for m1 in _box(n, R):
        sols = _slice_solutions(m1, nu, R)
        if len(sols):
            blocks.append(np.hstack([np.broadcast_to(m1, sols.shape), sols]))
    tuples = np.vstack(blocks) if blocks else np.zeros((0, 2 * n), dtype=_I8)
    logger.debug(f"Enumerated {len(tuples)} resonant pairs (n={n}, nu={nu}, R={R})")
    return ResonantIndex(
        n=n,
        p=1,
        L=spec.L,
        nu=nu,
        R_int=R,
        base=[int(k) for k in K_int],
        tuples=np.ascontiguousarray(tuples, dtype=_I8),
    )


def exhaustive_pairs(n: int, nu: int, R: int) -> np.ndarray:
    """Reference double loop over the full box, lexicographic."""
    box = _box(n, R)
    rows = []
    for m1 in box:
        hits = box[box @ m1 == nu]
        if len(hits):
            rows.append(np.hstack([np.broadcast_to(m1, hits.shape), hits]))
    return np.vstack(rows) if rows else np.zeros((0, 2 * n), dtype=_I8)


# --- Weighted sums ---


def _check_decay(envs: Sequence[Envelope], n: int) -> None:
    ell = min(f.ell for f in envs)
    if ell <= 3 * n + 2:
        raise DomainError(
            f"envelope decay ell={ell} does not exceed 3n+2={3 * n + 2}",
            analysis={"required_ell": 3 * n + 2, "ell": ell},
        )


def _lattice_mass(f: Envelope, K: np.ndarray, L: int, R: int) -> Tuple[float, float]:
    """Sum of |f(K + m/L)| over the box |m|_inf <= R and a bound on the rest."""
    n = f.n
    if f.is_separable:
        inside, total = abs(f.amp), abs(f.amp)
        for j in range(n):
            reach = R + math.ceil(L * (abs(K[j] - f.x0[j]) + 8.0 * f.width))
            a = np.arange(-reach, reach + 1)
            values = np.exp(-(((K[j] + a / L - f.x0[j]) / f.width) ** 2))
            inside *= math.fsum(values[np.abs(a) <= R])
            total *= math.fsum(values)
        return inside, max(total - inside, 0.0)
    # |f(x)| <= C <x>^-ell and |x| >= k/L - |K|_inf on the shell |m|_inf = k
    C, ell = f.norm_bound, f.ell
    k_inf = float(np.max(np.abs(K)))
    k_max = max(R, math.ceil(2 * L * k_inf)) + 1024 * L + 1
    k = np.arange(k_max + 1, dtype=float)
    shell = (2 * k + 1) ** n - np.maximum(2 * k - 1, 0) ** n
    g = (1.0 + np.maximum(k / L - k_inf, 0.0) ** 2) ** (-ell / 2)
    terms = C * shell * g
    remainder = C * 2 * n * 3 ** (n - 1) * (2 * L) ** ell * k_max ** (n - ell) / (ell - n)
    return math.fsum(terms[: R + 1]), math.fsum(terms[R + 1 :]) + remainder


def _tail_bound(
    f1: Envelope, f2: Envelope, f3: Envelope, K: np.ndarray, L: int, R: int
) -> float:
    """Bound on the resonant terms with m1 or m2 outside the box of radius R.

    Drops the resonance constraint, so sup|f2| times the unconstrained pair mass.
    """
    in1, out1 = _lattice_mass(f1, K, L, R)
    in3, out3 = _lattice_mass(f3, K, L, R)
    sup2 = abs(f2.amp) if f2.family == "gaussian" else f2.norm_bound
    return sup2 * (out1 * (in3 + out3) + (in1 + out1) * out3)


_MAX_AUTO_RADIUS = 1 << 14


def _auto_radius(
    f1: Envelope, f2: Envelope, f3: Envelope, K: np.ndarray, L: int, tail_tol: float
) -> Tuple[int, float]:
    """Smallest box radius whose tail bound meets tail_tol."""
    R = L
    if all(f.family == "gaussian" for f in (f1, f2, f3)):
        shift = max(float(np.linalg.norm(K - f.x0)) for f in (f1, f2, f3))
        w = max(f.width for f in (f1, f2, f3))
        R = math.ceil(L * (shift + w * math.sqrt(max(math.log(1.0 / tail_tol), 1.0))))
    R = max(1, R)
    lo = 0
    tail = _tail_bound(f1, f2, f3, K, L, R)
    while tail > tail_tol:
        if R >= _MAX_AUTO_RADIUS:
            raise BudgetError(
                f"no box radius up to {R} meets tail_tol={tail_tol:g}",
                estimate=float(2 * R),
                budget=float(_MAX_AUTO_RADIUS),
                analysis={"tail_estimate": tail},
            )
        lo, R = R, 2 * R
        tail = _tail_bound(f1, f2, f3, K, L, R)
    while R - lo > 1:
        mid = (lo + R) // 2
        t = _tail_bound(f1, f2, f3, K, L, mid)
        if t <= tail_tol:
            R, tail = mid, t
        else:
            lo = mid
    return R, tail


def _pair_histogram(
    f1: Envelope, f2: Envelope, f3: Envelope, axis: int, K: float, L: int, R: int
) -> np.ndarray:
    """Sum over (a, b) in the box of the axis weight, binned by a*b + R^2."""
    a = np.arange(-R, R + 1)
    t = K + a / L
    u = f1.axis_factor(axis, t)[:, None]
    w = f3.axis_factor(axis, t)[None, :]
    s = np.arange(-2 * R, 2 * R + 1)
    v = np.conj(f2.axis_factor(axis, K + s / L))
    table = u * w * v[np.add.outer(a, a) + 2 * R]
    prod = (np.multiply.outer(a, a) + R * R).ravel()
    size = 2 * R * R + 1
    real = np.bincount(prod, weights=table.real.ravel(), minlength=size)
    imag = np.bincount(prod, weights=table.imag.ravel(), minlength=size)
    return real + 1j * imag


def _histogram_sum(
    f1: Envelope, f2: Envelope, f3: Envelope, K_int, L: int, nu: int, R: int
) -> complex:
    n = f1.n
    K = np.asarray(K_int, dtype=float) / L
    hists = [_pair_histogram(f1, f2, f3, i, K[i], L, R) for i in range(n)]
    acc = hists[0]
    for h in hists[1:-1]:
        acc = fftconvolve(acc, h)
    if n == 1:
        idx = nu + R * R
        return complex(acc[idx]) if 0 <= idx < len(acc) else 0j
    last = hists[-1]
    off_acc = (n - 1) * R * R
    # sum over v of acc[v] last[nu - v]
    v = np.arange(len(acc)) - off_acc
    j = nu - v + R * R
    ok = (j >= 0) & (j < len(last))
    return complex(np.sum(acc[ok] * last[j[ok]]))


def weighted_resonant_sum(
    spec: LatticeSpec,
    K_int: Sequence[int],
    f1: Envelope,
    f2: Envelope,
    f3: Envelope,
    tail_tol: float = 1e-10,
    route: Literal["auto", "enumeration", "histogram"] = "auto",
) -> ResonantSum:
    """Sum of f1(K1) conj(f2)(K2) f3(K3) over the resonant set around K.

    Coordinate-separable envelopes go through per-axis product histograms
    convolved across axes; everything else sums the enumerated pairs.
    """
    n, L = spec.n, spec.L
    K = np.asarray(K_int, dtype=float) / L
    if any(f.is_zero for f in (f1, f2, f3)):
        return ResonantSum(
            value_re=0.0, value_im=0.0, tail_estimate=0.0, R_int=0, route="empty"
        )
    _check_decay((f1, f2, f3), n)
    if spec.R_int is None:
        R, tail = _auto_radius(f1, f2, f3, K, L, tail_tol)
    else:
        R = spec.R_int
        tail = _tail_bound(f1, f2, f3, K, L, R)
    separable = all(f.is_separable for f in (f1, f2, f3))
    if route == "histogram" and not separable:
        raise DomainError("the histogram route needs coordinate-separable envelopes")
    if route == "histogram" or (route == "auto" and separable):
        value = _histogram_sum(f1, f2, f3, K_int, L, spec.nu, R)
        return ResonantSum(
            value_re=value.real,
            value_im=value.imag,
            tail_estimate=tail,
            R_int=R,
            route="histogram",
        )
    index = enumerate_resonant(spec.with_radius(R), K_int)
    m1 = index.tuples[:, :n] / L
    m2 = index.tuples[:, n:] / L
    terms = f1(K + m1) * np.conj(f2(K + m1 + m2)) * f3(K + m2)
    return ResonantSum(
        value_re=math.fsum(terms.real),
        value_im=math.fsum(terms.imag),
        tail_estimate=tail,
        R_int=R,
        route="enumeration",
        count=index.count,
    )


def normalization_Z(n: int, p: int, L: float) -> float:
    """Z_pn(L): zeta(pn-1)/zeta(pn) L^(2pn-2), or L^2 log L / zeta(2) at pn = 2."""
    pn = p * n
    if pn < 2:
        raise DomainError(f"normalization needs n*p >= 2, got {pn}")
    if pn == 2:
        return L**2 * math.log(L) / zeta(2.0)
    return zeta(pn - 1.0) / zeta(float(pn)) * L ** (2 * pn - 2)


def sup_bound_scan(
    n: int,
    L_values: Sequence[int],
    f: Envelope,
    K_points: Sequence[Sequence[float]],
    mu_tildes: Sequence[int],
    band: float = 0.5,
) -> ConvergenceReport:
    """max over K and mu_tilde of <K>^ell |sum| / Z_n(L), per L.

    K points are rounded to the lattice of each L. The scan is L-stable when
    the per-L maxima stay within a factor (1 + band) of each other.
    """
    values = []
    for L in L_values:
        Z = normalization_Z(n, 1, L)
        best = 0.0
        for K in K_points:
            K_int = [int(round(k * L)) for k in K]
            Kc = np.asarray(K_int, dtype=float) / L
            for mt in mu_tildes:
                spec = LatticeSpec(n=n, L=L, mu_tilde=mt)
                total = weighted_resonant_sum(spec, K_int, f, f, f).value
                best = max(best, float(japanese(Kc)) ** f.ell * abs(total) / Z)
        values.append(best)
        logger.info(f"sup-bound scan L={L}: {best:.6g}")
    positive = [v for v in values if v > 0]
    stable = (
        bool(positive) and max(positive) <= (1.0 + band) * min(positive)
    ) or not positive
    return ConvergenceReport(
        n=n,
        L_values=list(L_values),
        errors=values,
        stable=stable,
        metadata={"ell": f.ell, "mu_tildes": list(mu_tildes), "kind": "sup_bound"},
    )


# --- Truncated frequency grids and the coupling table ---


class FrequencyGrid(BaseModel):
    """Modes m in [-Lambda, Lambda]^n, i.e. frequencies K = m / L."""

    n: int = Field(ge=1)
    L: int = Field(ge=1)
    Lambda: int = Field(ge=0)

    @property
    def side(self) -> int:
        return 2 * self.Lambda + 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.side,) * self.n

    @property
    def size(self) -> int:
        return self.side**self.n

    def modes(self) -> np.ndarray:
        return _box(self.n, self.Lambda)

    def frequencies(self) -> np.ndarray:
        return self.modes() / self.L

    def flat_index(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=_I8) + self.Lambda
        return np.ravel_multi_index(tuple(np.moveaxis(m, -1, 0)), self.shape)

    def contains(self, m: np.ndarray) -> np.ndarray:
        return np.all(np.abs(np.asarray(m)) <= self.Lambda, axis=-1)


class CouplingTable(BaseModel):
    """Resonant triples (K1, K2, K3) for every K with all members on the grid.

    Stored as flat grid indices k, k1, k2, k3 with K1 - K2 + K3 = K and
    |K1|^2 - |K2|^2 + |K3|^2 - |K|^2 = mu.
    """

    grid: FrequencyGrid
    mu_tilde: int = 0
    k: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray

    _indices: Optional[List[ResonantIndex]] = PrivateAttr(default=None)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def count(self) -> int:
        return int(len(self.k))

    def indices(self) -> List[ResonantIndex]:
        """Per-K ResonantIndex view in grid order."""
        if self._indices is None:
            modes = self.grid.modes()
            out = []
            for idx, base in enumerate(modes):
                sel = self.k == idx
                m1 = modes[self.k1[sel]] - base
                m2 = modes[self.k3[sel]] - base
                out.append(
                    ResonantIndex(
                        n=self.grid.n,
                        L=self.grid.L,
                        nu=-self.mu_tilde // 2,
                        R_int=2 * self.grid.Lambda,
                        base=[int(v) for v in base],
                        tuples=np.hstack([m1, m2]).astype(_I8),
                    )
                )
            self._indices = out
        return self._indices


def resonant_coupling_table(grid: FrequencyGrid, mu_tilde: int = 0) -> CouplingTable:
    """Exact resonant triples on a truncated grid, in deterministic order.

    For each K, pairs (K1, K3) run over the grid in lexicographic order and
    K2 = K1 + K3 - K must also lie on the grid. Works for n = 1, where every
    triple is trivial.
    """
    if mu_tilde % 2:
        raise DomainError(f"mu_tilde must be even, got {mu_tilde}")
    G = grid.size
    cost = float(G) ** 3
    if cost > settings.TRIPLE_LOOP_BUDGET * 10:
        raise BudgetError(
            "coupling table", estimate=cost, budget=settings.TRIPLE_LOOP_BUDGET * 10
        )
    modes = grid.modes()
    nu = -mu_tilde // 2
    ks, k1s, k2s, k3s = [], [], [], []
    ii, jj = np.meshgrid(np.arange(G), np.arange(G), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    for idx, base in enumerate(modes):
        z1 = modes[ii] - base
        z3 = modes[jj] - base
        keep = np.sum(z1 * z3, axis=1) == nu
        m2 = modes[ii[keep]] + modes[jj[keep]] - base
        on_grid = grid.contains(m2)
        sel1 = ii[keep][on_grid]
        sel3 = jj[keep][on_grid]
        ks.append(np.full(len(sel1), idx, dtype=_I8))
        k1s.append(sel1)
        k2s.append(grid.flat_index(m2[on_grid]))
        k3s.append(sel3)
    table = CouplingTable(
        grid=grid,
        mu_tilde=mu_tilde,
        k=np.concatenate(ks).astype(_I8),
        k1=np.concatenate(k1s).astype(_I8),
        k2=np.concatenate(k2s).astype(_I8),
        k3=np.concatenate(k3s).astype(_I8),
    )
    logger.info(f"Coupling table: {table.count} triples on {G} modes")
    return table


# --- General p: J-coordinates ---


def k_from_j(J: np.ndarray, p: int) -> np.ndarray:
    """Shifted frequencies k_1 .. k_(2p+1) from J_1 .. J_2p.

    Inverts J_(2i-1) = k_(2i-1) + k_(2i+1) - k_(2i+2) ... - k_2p and
    J_2i = k_2i - k_(2i-1), closing with k_1 - k_2 + ... + k_(2p+1) = 0.
    Shape (..., 2p, n) in, (..., 2p+1, n) out.
    """
    J = np.asarray(J)
    k = np.zeros(J.shape[:-2] + (2 * p + 1, J.shape[-1]), dtype=J.dtype)
    tail = np.zeros_like(J[..., 0, :])
    for i in range(p, 0, -1):
        odd = J[..., 2 * i - 2, :] - tail
        even = J[..., 2 * i - 1, :] + odd
        k[..., 2 * i - 2, :] = odd
        k[..., 2 * i - 1, :] = even
        tail = tail + odd - even
    signs = np.array([(-1) ** i for i in range(2 * p)])
    k[..., 2 * p, :] = -np.einsum("i,...ij->...j", signs, k[..., : 2 * p, :])
    return k


def j_from_k(k: np.ndarray, p: int) -> np.ndarray:
    """Forward map of k_from_j on the first 2p shifted frequencies."""
    k = np.asarray(k)
    J = np.zeros(k.shape[:-2] + (2 * p, k.shape[-1]), dtype=k.dtype)
    for i in range(1, p + 1):
        tail = sum(
            k[..., 2 * l - 2, :] - k[..., 2 * l - 1, :] for l in range(i + 1, p + 1)
        )
        J[..., 2 * i - 2, :] = k[..., 2 * i - 2, :] + tail
        J[..., 2 * i - 1, :] = k[..., 2 * i - 1, :] - k[..., 2 * i - 2, :]
    return J


@lru_cache(maxsize=4096)
def _small_divisors(t: int, R: int) -> Tuple[int, ...]:
    return tuple(e for e in _divisors(t) if e <= R)


def general_p_enumerate(spec: LatticeSpec, K_int: Sequence[int]) -> ResonantIndex:
    """All (J1, J2, J3, J4) in the box with J1 J2 + J3 J4 = nu (p = 2, n = 1).

    For each (J1, J2) the remainder t = nu - J1 J2 is split as J3 J4 by
    divisor enumeration; t = 0 gives the two coordinate axes.
    """
    if spec.p != 2 or spec.n != 1:
        raise DomainError("J-coordinate enumeration covers p = 2, n = 1")
    R = 4 * spec.L if spec.R_int is None else spec.R_int
    cost = float(2 * R + 1) ** 2 * (1 + math.log(R + 1))
    if cost > settings.ENUMERATION_BUDGET:
        raise BudgetError(
            f"quintic enumeration with R_int={R}",
            estimate=cost,
            budget=settings.ENUMERATION_BUDGET,
        )
    nu = spec.nu
    axis = np.arange(-R, R + 1, dtype=_I8)
    rows: List[Tuple[int, int, int, int]] = []
    for j1 in range(-R, R + 1):
        for j2 in range(-R, R + 1):
            t = nu - j1 * j2
            if t == 0:
                rows.extend((j1, j2, 0, int(j4)) for j4 in axis)
                rows.extend((j1, j2, int(j3), 0) for j3 in axis if j3 != 0)
                continue
            for e in _small_divisors(abs(t), R):
                for j3 in (-e, e):
                    j4 = t // j3
                    if abs(j4) <= R:
                        rows.append((j1, j2, j3, j4))
    tuples = np.array(rows, dtype=_I8).reshape(-1, 4)
    tuples = tuples[np.lexsort(tuples.T[::-1])]
    return ResonantIndex(
        n=1,
        p=2,
        L=spec.L,
        nu=nu,
        R_int=R,
        base=[int(K_int[0])],
        tuples=tuples,
    )


def exhaustive_quadruples(nu: int, R: int) -> np.ndarray:
    box = _box(4, R)
    hit = box[:, 0] * box[:, 1] + box[:, 2] * box[:, 3] == nu
    return box[hit]


def general_p_weighted_sum(
    spec: LatticeSpec,
    K_int: Sequence[int],
    envelopes: Sequence[Envelope],
    tail_tol: float = 1e-10,
) -> ResonantSum:
    """Quintic 1-D sum of f1 conj(f2) f3 conj(f4) f5 over J_e . J_o = nu."""
    if len(envelopes) == 1:
        envelopes = list(envelopes) * 5
    if len(envelopes) != 5:
        raise DomainError("the quintic sum takes one or five envelopes")
    L = spec.L
    K = np.asarray(K_int, dtype=float) / L
    if spec.R_int is None:
        shift = max(float(np.linalg.norm(K - f.x0)) for f in envelopes)
        w = max(f.tail_scale() for f in envelopes)
        # each J combines at most three shifted frequencies
        rho = 3.0 * (shift + w * math.sqrt(max(math.log(1.0 / tail_tol), 1.0)))
        R = max(1, math.ceil(L * rho))
    else:
        R = spec.R_int
        rho = R / L
    index = general_p_enumerate(spec.with_radius(R), K_int)
    k = k_from_j(index.tuples.reshape(-1, 4, 1), 2) / L + K
    terms = np.ones(index.count, dtype=complex)
    for i, f in enumerate(envelopes):
        value = f(k[:, i, :])
        terms *= np.conj(value) if i % 2 else value
    tail = math.prod(f.norm_bound for f in envelopes) * (1.0 + rho / 3.0) ** (
        -min(f.ell for f in envelopes)
    )
    return ResonantSum(
        value_re=math.fsum(terms.real),
        value_im=math.fsum(terms.imag),
        tail_estimate=tail,
        R_int=R,
        route="enumeration",
        count=index.count,
    )
