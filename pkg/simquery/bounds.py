"""Cut and spectral approximation checkers plus the closed-form query budgets.

Checkers compare a hidden graph G with an approximation G~:

  cut:       (1 - eps) |dG S| <= |dG~ S| <= (1 + eps) |dG S| for every cut S
  spectral:  (1 - eps) x'L~x  <= x'Lx    <= (1 + eps) x'L~x  for every x

Budget calculators return the smallest integer number of queries their
guarantee asks for. Logarithms are natural.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

import numpy as np
import scipy.linalg

from simquery._helpers import edge_count, get_seeded_rng
from simquery.graph import ALGEBRAIC_RTOL, CutSpec, Graph, cut_values, iter_cut_masks, laplacian

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_CUT_VERTICES = 22
MAX_SPECTRAL_VERTICES = 500
NULLSPACE_TOL = 1e-8
NULLSPACE_ANGLE_TOL = 1e-6


class VacuousBoundError(ValueError):
    """The bound's inputs make it vacuous (e.g. no spectral gap)."""


class AssumptionViolationError(ValueError):
    """A theorem's structural assumption does not hold for the given inputs."""


Witness = Union[list[int], list[float], None]


@dataclass(frozen=True)
class ApproxReport:
    """Verdict of one approximation check.

    `witness` is the worst cut side S (cut checks) or the worst direction x
    (spectral checks); `certified` is False for randomized checks, whose
    holds=True only means "not falsified".
    """

    kind: str
    epsilon: float
    holds: bool
    worst_ratio: float
    witness: Witness = None
    certified: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "holds": self.holds,
            "worstRatio": self.worst_ratio if math.isfinite(self.worst_ratio) else str(self.worst_ratio),
            "witness": self.witness,
            "certified": self.certified,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def _check_pair(G: Graph, G_tilde: Graph) -> None:
    if G.n != G_tilde.n:
        raise ValueError(f"Graphs differ in size: {G.n} vs {G_tilde.n}")
    if G.n < 2:
        raise ValueError("Need at least 2 vertices")


def _check_epsilon(epsilon: float) -> None:
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")


def _cut_ratios(c: np.ndarray, c_tilde: np.ndarray) -> np.ndarray:
    """c~/c, with 0/0 = 1 and x/0 = inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = c_tilde / c
    ratio[(c == 0) & (c_tilde == 0)] = 1.0
    ratio[(c == 0) & (c_tilde > 0)] = np.inf
    return ratio


def _cut_violations(c: np.ndarray, c_tilde: np.ndarray, epsilon: float) -> np.ndarray:
    tol = ALGEBRAIC_RTOL * np.maximum(c, c_tilde)
    return (c_tilde < (1 - epsilon) * c - tol) | (c_tilde > (1 + epsilon) * c + tol)


def _cut_report(masks_iter, G: Graph, G_tilde: Graph, epsilon: float, certified: bool) -> ApproxReport:
    holds = True
    worst_dev, worst_ratio, worst_mask = -1.0, 1.0, None
    for block in masks_iter:
        c = cut_values(G.W, block)
        c_tilde = cut_values(G_tilde.W, block)
        if np.any(_cut_violations(c, c_tilde, epsilon)):
            holds = False
        ratio = _cut_ratios(c, c_tilde)
        dev = np.abs(ratio - 1.0)
        idx = int(np.argmax(dev))
        if dev[idx] > worst_dev:
            worst_dev, worst_ratio, worst_mask = float(dev[idx]), float(ratio[idx]), block[idx]
    witness = CutSpec.from_mask(worst_mask).vertices() if worst_mask is not None else None
    return ApproxReport("cut", float(epsilon), holds, worst_ratio, witness, certified)


def check_cut_approximation(G: Graph, G_tilde: Graph, epsilon: float) -> ApproxReport:
    """Exhaustive check over all 2^(n-1) - 1 cuts."""
    _check_pair(G, G_tilde)
    _check_epsilon(epsilon)
    if G.n > MAX_EXHAUSTIVE_CUT_VERTICES:
        raise ValueError(
            f"n={G.n} exceeds {MAX_EXHAUSTIVE_CUT_VERTICES} for exhaustive cut checks; "
            "use sample_cut_approximation"
        )
    report = _cut_report(iter_cut_masks(G.n), G, G_tilde, epsilon, certified=True)
    logger.debug("Cut check eps=%g: holds=%s worst=%g", epsilon, report.holds, report.worst_ratio)
    return report


def sample_cut_approximation(
    G: Graph, G_tilde: Graph, epsilon: float, n_cuts: int = 10_000, seed: int = 0
) -> ApproxReport:
    """Randomized cut check for any n; can falsify but never certify."""
    _check_pair(G, G_tilde)
    _check_epsilon(epsilon)
    rng = get_seeded_rng(seed)
    masks = rng.integers(0, 2, size=(n_cuts, G.n)).astype(bool)
    proper = masks.any(axis=1) & ~masks.all(axis=1)
    return _cut_report([masks[proper]], G, G_tilde, epsilon, certified=False)


def _nullspace(L: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Null basis plus the positive eigenpairs of a PSD matrix."""
    values, vectors = scipy.linalg.eigh(L)
    scale = max(1.0, float(np.abs(values).max()))
    null = values < NULLSPACE_TOL * scale
    return vectors[:, null], values[~null], vectors[:, ~null]


def _nullspace_witness(N_a: np.ndarray, N_b: np.ndarray) -> Optional[np.ndarray]:
    """A unit vector of span(N_a) farthest from span(N_b), or None if span(N_a) is inside it."""
    if N_a.shape[1] == 0:
        return None
    residual = N_a - N_b @ (N_b.T @ N_a)
    norms = np.linalg.norm(residual, axis=0)
    idx = int(np.argmax(norms))
    if norms[idx] <= NULLSPACE_ANGLE_TOL:
        return None
    return residual[:, idx] / norms[idx]


def _rayleigh(L: np.ndarray, L_tilde: np.ndarray, x: np.ndarray) -> float:
    num, den = float(x @ L @ x), float(x @ L_tilde @ x)
    if den <= NULLSPACE_TOL:
        return np.inf if num > NULLSPACE_TOL else 1.0
    return num / den


def check_spectral_approximation(G: Graph, G_tilde: Graph, epsilon: float) -> ApproxReport:
    """Exact check through the generalized eigenproblem L x = r L~ x.

    The null spaces must coincide; on the common complement every ratio
    x'Lx / x'L~x must lie in [1 - eps, 1 + eps]. The ratios are the
    eigenvalues of B' L B with B = L~^(+1/2) restricted to range(L~).
    """
    _check_pair(G, G_tilde)
    _check_epsilon(epsilon)
    if G.n > MAX_SPECTRAL_VERTICES:
        raise ValueError(f"n={G.n} exceeds {MAX_SPECTRAL_VERTICES} for spectral checks")
    L = laplacian(G).L
    L_tilde = laplacian(G_tilde).L
    N, _, _ = _nullspace(L)
    N_tilde, values_tilde, vectors_tilde = _nullspace(L_tilde)

    for a, b in ((N, N_tilde), (N_tilde, N)):
        x = _nullspace_witness(a, b)
        if x is not None:
            ratio = _rayleigh(L, L_tilde, x)
            logger.debug("Null spaces differ; ratio along witness %g", ratio)
            return ApproxReport("spectral", float(epsilon), False, ratio, x.tolist())

    if values_tilde.size == 0:
        return ApproxReport("spectral", float(epsilon), True, 1.0, None)

    B = vectors_tilde / np.sqrt(values_tilde)[None, :]
    M = B.T @ L @ B
    ratios, Y = scipy.linalg.eigh((M + M.T) / 2)
    dev = np.abs(ratios - 1.0)
    idx = int(np.argmax(dev))
    x = B @ Y[:, idx]
    x = x / np.linalg.norm(x)
    tol = ALGEBRAIC_RTOL * max(1.0, float(np.abs(ratios).max()))
    holds = bool(ratios.min() >= 1 - epsilon - tol and ratios.max() <= 1 + epsilon + tol)
    return ApproxReport("spectral", float(epsilon), holds, float(ratios[idx]), x.tolist())


def implied_cut_epsilon(epsilon: float) -> float:
    """Cut tolerance guaranteed by an eps-spectral approximation: eps / (1 - eps).

    Restricting the spectral inequality to cut indicators gives
    c/(1 + eps) <= c~ <= c/(1 - eps); the lower side is within 1 - eps.
    """
    if not 0 <= epsilon < 1:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    return epsilon / (1 - epsilon)


def check_implies(G: Graph, G_tilde: Graph, epsilon: float) -> tuple[ApproxReport, ApproxReport]:
    """Spectral check at eps and the cut check it implies (at implied_cut_epsilon(eps))."""
    spectral = check_spectral_approximation(G, G_tilde, epsilon)
    cut = check_cut_approximation(G, G_tilde, implied_cut_epsilon(epsilon))
    if spectral.holds and not cut.holds:
        logger.error("Spectral approximation holds but implied cut approximation fails at eps=%g", epsilon)
    return spectral, cut


def normalized_deviation(G: Graph, G_tilde: Graph) -> float:
    """||D^-1/2 (L - L~) D^-1/2|| in spectral norm, D the degrees of G."""
    _check_pair(G, G_tilde)
    pair = laplacian(G)
    inv_sqrt = np.zeros(G.n)
    positive = pair.degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(pair.degrees[positive])
    diff = pair.L - laplacian(G_tilde).L
    scaled = inv_sqrt[:, None] * diff * inv_sqrt[None, :]
    return float(np.linalg.norm((scaled + scaled.T) / 2, 2))


def implied_spectral_epsilon(deviation: float, lambda2: float) -> float:
    """Spectral tolerance sigma = dev / (lambda2 - dev) implied by a normalized deviation.

    Infinite when dev >= lambda2.
    """
    if deviation < 0:
        raise ValueError(f"deviation must be nonnegative, got {deviation}")
    if deviation >= lambda2:
        return math.inf
    return deviation / (lambda2 - deviation)


@dataclass(frozen=True)
class BoundInputs:
    n: Optional[int] = None
    min_degree: Optional[float] = None
    lambda2: Optional[float] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    c: Optional[float] = None
    c_in: Optional[float] = None
    c_out: Optional[float] = None
    ell: Optional[int] = None
    p_observed: Optional[float] = None
    c_tilde_observed: Optional[float] = None

    def __post_init__(self):
        if self.n is not None and self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.ell is not None and self.ell < 1:
            raise ValueError(f"ell must be at least 1, got {self.ell}")
        if self.p_observed is not None and not 0 < self.p_observed <= 1:
            raise ValueError(f"p_observed must be in (0, 1], got {self.p_observed}")
        for name in ("c", "c_in", "c_tilde_observed"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.c_out is not None and self.c_out < 0:
            raise ValueError(f"c_out must be nonnegative, got {self.c_out}")

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Missing bound inputs: {', '.join(missing)}")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def union_log_term(n: int) -> float:
    """k = ln(2 + 4 ln n), the cut-counting term of the cut budgets."""
    return math.log(2 + 4 * math.log(n))


def theorem1_budget(inp: BoundInputs) -> int:
    """m >= C(n,2) (12k / (eps lambda))^2 / min D, k = max(ln(3/delta), ln n)."""
    inp.require("n", "min_degree", "lambda2", "epsilon", "delta")
    if inp.lambda2 <= 0:
        raise VacuousBoundError(f"lambda2={inp.lambda2}: no spectral gap, the bound is vacuous")
    if inp.min_degree <= 0:
        raise VacuousBoundError(f"min_degree={inp.min_degree}: the bound is vacuous")
    k = max(math.log(3 / inp.delta), math.log(inp.n))
    m = edge_count(inp.n) * (12 * k / (inp.epsilon * inp.lambda2)) ** 2 / inp.min_degree
    return math.ceil(m)


def theorem2_lower_budget(n: int, c: float, delta: float) -> float:
    """C(n,2)(1 - delta)/c: below this many queries no eps < 1 cut approximation is likely."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0 <= delta < 1:
        raise ValueError(f"delta must be in [0, 1), got {delta}")
    return edge_count(n) * (1 - delta) / c


def appendixc_cut_budget(inp: BoundInputs) -> int:
    """m >= C(n,2) 3(2 ln n + ln(1/delta) + k) / (eps^2 c), k = ln(2 + 4 ln n)."""
    inp.require("n", "epsilon", "delta", "c")
    n = inp.n
    m = edge_count(n) * 3 * (2 * math.log(n) + math.log(1 / inp.delta) + union_log_term(n)) / (inp.epsilon**2 * inp.c)
    return math.ceil(m)


def cmin_beta(p_observed: float, c_tilde_observed: float, delta: float) -> float:
    """beta = sqrt(1 + l/(p c~)) - sqrt(l/(p c~)), l = 3 ln(1/delta) / 4."""
    if p_observed <= 0 or c_tilde_observed <= 0:
        raise ValueError(f"p and c~ must be positive, got p={p_observed} c~={c_tilde_observed}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    ell = 3 * math.log(1 / delta) / 4
    r = ell / (p_observed * c_tilde_observed)
    return math.sqrt(1 + r) - math.sqrt(r)


def appendixc_cmin_lower(p_observed: float, c_tilde_observed: float, delta: float) -> float:
    """High-probability lower bound c >= c~ beta^2 on the hidden minimum cut.

    c~ is the minimum cut of the rescaled sampled graph and p = m / C(n, 2).
    """
    return c_tilde_observed * cmin_beta(p_observed, c_tilde_observed, delta) ** 2


def appendixc_observable_budget(inp: BoundInputs) -> int:
    """Cut budget from observed quantities only.

    m >= C(n,2) 3(2 ln n + ln(2/delta) + k) / (eps^2 beta^2 c~), beta taken at delta/2.
    """
    inp.require("n", "epsilon", "delta", "p_observed", "c_tilde_observed")
    n = inp.n
    beta = cmin_beta(inp.p_observed, inp.c_tilde_observed, inp.delta / 2)
    numerator = 3 * (2 * math.log(n) + math.log(2 / inp.delta) + union_log_term(n))
    m = edge_count(n) * numerator / (inp.epsilon**2 * beta**2 * inp.c_tilde_observed)
    return math.ceil(m)


def theorem4_cluster_budget(inp: BoundInputs) -> int:
    """m >= (12 n^2 / c_in)(2 ln n + ell ln(2/delta) + k), requires c_in > 4 c_out."""
    inp.require("n", "c_in", "c_out", "ell", "delta")
    if not inp.c_in > 4 * inp.c_out:
        raise AssumptionViolationError(f"c_in={inp.c_in} must exceed 4 * c_out={4 * inp.c_out}")
    n = inp.n
    m = 12 * n**2 / inp.c_in * (2 * math.log(n) + inp.ell * math.log(2 / inp.delta) + union_log_term(n))
    return math.ceil(m)


def with_replacement_cut_tail(epsilon: float, m: int, c: float, n: int) -> float:
    """2 exp(-eps^2 m c / (3 n^2)): one cut's failure probability under adaptive sampling with replacement."""
    if n < 2 or m < 0 or c < 0:
        raise ValueError(f"Invalid inputs n={n} m={m} c={c}")
    return min(1.0, 2 * math.exp(-(epsilon**2) * m * c / (3 * n**2)))
