"""Model parameters, index bookkeeping, the sigma exponent ladder and the
threshold constants of the large-data regime.

Everything here is a pure value computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of ``u_t = i Lap u + lam |u|^alpha u``.

    ``b`` is the pseudo-conformal rate and ``K`` the data-size bound.
    """

    lambda_re: float = -1.0
    lambda_im: float = 0.0
    alpha: float = 1.8
    dim: int = 1
    b: float = 4.0
    K: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.lambda_re > 0:
            raise ValueError("Re lambda > 0 (blow-up regime) is not supported")
        if not 0 < self.alpha <= 2.0 / self.dim:
            raise ValueError(f"alpha must lie in (0, 2/N], got {self.alpha}")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def lam(self) -> complex:
        return complex(self.lambda_re, self.lambda_im)

    @property
    def gap(self) -> float:
        """``(2 - N alpha) / 2``, the exponent of the (1-bt) decay laws."""
        return (2.0 - self.dim * self.alpha) / 2.0

    @property
    def blowup_time(self) -> float:
        return math.inf if self.b == 0 else 1.0 / self.b

    def limit_constant(self) -> float:
        """``b(2 - N alpha) / (2 alpha |Re lam|)``."""
        if self.lambda_re == 0:
            raise ValueError("limit constant needs Re lambda < 0")
        return self.b * (2 - self.dim * self.alpha) / (2 * self.alpha * abs(self.lambda_re))

    def theorem_violations(self) -> list[str]:
        out = []
        if not self.lambda_re < 0:
            out.append("Re lambda < 0")
        if not self.alpha < 2.0 / self.dim:
            out.append("alpha < 2/N")
        return out

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class IndexSet:
    k: int
    n: int
    m: int
    J: int

    @classmethod
    def default(cls, dim: int) -> "IndexSet":
        # minimal integers compatible with the index constraints
        table = {1: (1, 2, 2, 9), 2: (2, 3, 3, 13), 3: (2, 4, 4, 16)}
        if dim not in table:
            raise ValueError(f"no default indices for dim={dim}")
        return cls(*table[dim])

    @property
    def ranges(self) -> tuple[range, range, range]:
        """Derivative-order ranges of the three seminorm families."""
        m2 = 2 * self.m
        return (
            range(0, m2 + 1),
            range(m2 + 1, m2 + 3 + self.k),
            range(m2 + 3 + self.k, self.J + 1),
        )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_indices(p: ModelParams, idx: IndexSet, theorem_mode: bool = False) -> ValidationReport:
    N = p.dim
    rep = ValidationReport()
    if not idx.k > N / 2:
        rep.violations.append(f"k > N/2 fails: {idx.k} <= {N / 2}")
    nmin = max(N / 2 + 1, N * (N + 1) / 4)
    if not idx.n > nmin:
        rep.violations.append(f"n > max(N/2+1, N(N+1)/4) fails: {idx.n} <= {nmin}")
    if not 2 * idx.m >= idx.k + idx.n + 1:
        rep.violations.append(f"2m >= k+n+1 fails: {2 * idx.m} < {idx.k + idx.n + 1}")
    J = 2 * idx.m + 2 + idx.k + idx.n
    if idx.J != J:
        rep.violations.append(f"J = 2m+2+k+n fails: {idx.J} != {J}")
    if theorem_mode and not idx.n >= N / (2 * p.alpha):
        rep.violations.append(f"n >= N/(2 alpha) fails: {idx.n} < {N / (2 * p.alpha)}")
    return rep


@dataclass(frozen=True)
class SigmaSchedule:
    sigma: tuple[float, ...]

    def __getitem__(self, j: int) -> float:
        return self.sigma[j]

    def __len__(self):
        return len(self.sigma)

    @property
    def J(self) -> int:
        return len(self.sigma) - 1


def sigma_one(dim: int, idx: IndexSet) -> float:
    J, m = idx.J, idx.m
    return 1.0 / (4 * (4 * J * (J - 2 * m - 1) + 4 * J + 4 / dim + 1) * (8 * m + 1) ** (2 * m))


def sigma_schedule(p: ModelParams, idx: IndexSet, s1: float | None = None) -> SigmaSchedule:
    """Recursive ladder; ``s1`` overrides sigma_1 (used by the mutation canary)."""
    rep = validate_indices(p, idx)
    if not rep:
        raise ValueError("invalid indices: " + "; ".join(rep.violations))
    J, m = idx.J, idx.m
    s = [0.0] * (J + 1)
    s[1] = sigma_one(p.dim, idx) if s1 is None else s1
    for j in range(2, 2 * m + 1):
        s[j] = (8 * m + 1) ** j * s[1]
    s[2 * m + 1] = p.gap + (4 * J + 2 * p.alpha + 1) * s[2 * m]
    for j in range(2 * m + 2, J + 1):
        s[j] = 4 * J * s[2 * m] * (j - 2 * m - 1) + s[2 * m + 1]
    if any(not s[j] < s[j + 1] for j in range(1, J)) or not s[0] < s[1]:
        raise ArithmeticError("sigma schedule is not strictly increasing")
    return SigmaSchedule(tuple(s))


def sigma_J_closed_form(p: ModelParams, idx: IndexSet) -> float:
    J, m = idx.J, idx.m
    return (4 * J * (J - 2 * m - 1) + 4 * J + 2 * p.alpha + 1) * (8 * m + 1) ** (2 * m) * sigma_one(
        p.dim, idx
    ) + p.gap


@dataclass(frozen=True)
class ThresholdConfig:
    """Proof constants C1, C2, C3 (never given numerically; default 1) and
    the derived thresholds once :func:`thresholds` has filled them in."""

    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    alpha1: float | None = None
    alpha1_gap: float | None = None  # 2/N - alpha1, kept separately: alpha1 rounds to 2/N
    b0: float | None = None
    b1: float | None = None
    b1_terms: tuple[float, ...] = ()
    theorem_regime: bool | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if min(self.C1, self.C2, self.C3) < 1:
            raise ValueError("C1, C2, C3 must be >= 1")


def _pow_or_inf(log_value: float) -> float:
    return math.inf if log_value > 709.0 else math.exp(log_value)


def _scaled_power(coef: float, base: float, expo: float) -> float:
    """coef * base**expo, or inf where it overflows."""
    try:
        return coef * base**expo
    except OverflowError:
        return math.inf


def thresholds(p: ModelParams, idx: IndexSet, c: ThresholdConfig | None = None) -> ThresholdConfig:
    c = c or ThresholdConfig()
    if p.lambda_re == 0:
        raise ValueError("thresholds need Re lambda != 0")
    N, K, J = p.dim, p.K, idx.J
    s1 = sigma_one(N, idx)
    lam_abs = abs(p.lam)
    log4K = math.log(4 * K)

    b0 = _scaled_power(16 / N, 4 * K, 4 / N + 2)

    # (12 C1 C2 (4K)^{4J+1} |lam| / (s1 |Re lam|)) (2/alpha1 - N) = 1
    log_pref = math.log(12 * c.C1 * c.C2 * lam_abs / (s1 * abs(p.lambda_re))) + (4 * J + 1) * log4K
    eps = math.exp(-log_pref)  # = 2/alpha1 - N, may underflow to 0
    alpha1 = 2.0 / (N + eps)
    alpha1_gap = 2.0 * eps / (N * (N + eps))

    terms = (
        b0,
        8 * c.C3,
        _pow_or_inf(math.log(32 * lam_abs * c.C1 * c.C2 / s1) + (4 * J + 4) * log4K),
        _scaled_power(2 ** (4 / N + 3) * p.alpha / (3 ** (1 / N) - 1), 4 * K, 2),
    )
    b1 = max(terms)

    notes = []
    lo = max(3 / (2 * N), 2 / (N + 1))
    if not lo < alpha1:
        notes.append(f"alpha1={alpha1!r} not above max(3/(2N), 2/(N+1))={lo}")
    if alpha1_gap < 1e-12:
        notes.append(
            f"alpha1 lies within {alpha1_gap:.3e} of 2/N: the proven regime is unreachable "
            "in double precision; thresholds are diagnostics only"
        )
    regime = bool(p.lambda_re < 0 and (2.0 / N - p.alpha) <= alpha1_gap and p.alpha < 2.0 / N and p.b >= b1)
    return replace(
        c,
        alpha1=alpha1,
        alpha1_gap=alpha1_gap,
        b0=b0,
        b1=b1,
        b1_terms=terms,
        theorem_regime=regime,
        notes=tuple(notes),
    )
