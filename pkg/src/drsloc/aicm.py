"""Chained-pattern survey-score model: pattern logic, defect
quantification, rank identification, regularized maximum-likelihood
fitting, cross-validation, and per-location utility estimation.

A score batch collects N vectors of integer scores in {0..q} over g
locations.  Under the chained-pattern generative model, every vector
(after reordering locations by ascending attractability) matches one of
g+1 patterns: pattern i has i-1 leading zeros followed by all-positive
entries, and pattern g+1 is the all-zero vector.  Vectors matching no
pattern are "defective" and carry a defect quantity -- their minimum L1
distance to a qualified vector.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SurveyBatch",
    "RankPermutation",
    "AicmParameters",
    "FitConfig",
    "FitResult",
    "pattern_index",
    "defective_score_quantity",
    "identify_rank",
    "rank_success_bound",
    "sample_probability",
    "loss",
    "frequency_estimate",
    "fit",
    "cross_validate_lambda",
    "estimate_utilities",
    "dump_survey_json",
    "load_survey_json",
    "dump_model_json",
    "load_model_json",
]

_LOG_FLOOR = 1e-12  # probability clamp inside logs


@dataclass(frozen=True)
class SurveyBatch:
    """N survey score vectors over g locations, scores in {0..q}."""

    g: int
    q: int
    scores: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.g < 1 or self.q < 1:
            raise ValueError("g and q must be positive")
        for k, row in enumerate(self.scores):
            if len(row) != self.g:
                raise ValueError(f"sample {k} has length {len(row)} != g")
            if any((a < 0 or a > self.q) for a in row):
                raise ValueError(f"sample {k} has scores outside 0..{self.q}")

    def __len__(self) -> int:
        return len(self.scores)

    def willing_counts(self) -> np.ndarray:
        """|V'_j| = number of samples scoring location j at least 1."""
        a = np.asarray(self.scores, dtype=int).reshape(len(self.scores), self.g)
        return (a >= 1).sum(axis=0)


@dataclass(frozen=True)
class RankPermutation:
    """Locations listed by ascending attractability (0-based labels):
    order[k] is the original label ranked k+1 from the bottom."""

    order: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of 0..g-1")

    @property
    def g(self) -> int:
        return len(self.order)

    def to_rank(self, vector) -> tuple[int, ...]:
        """Reorder an original-label vector into rank coordinates."""
        return tuple(vector[j] for j in self.order)

    def from_rank(self, vector) -> tuple:
        """Map a rank-coordinate vector back to original labels."""
        out = [None] * len(self.order)
        for pos, j in enumerate(self.order):
            out[j] = vector[pos]
        return tuple(out)


@dataclass(frozen=True)
class AicmParameters:
    """Model parameters in rank coordinates.

    p[i-1] for i in 1..g+1 is the pattern probability; pi[i-1, j-1, r-1]
    for i <= j, r in 1..q is the score distribution of location j within
    pattern i (rows with j < i are unused); m[s] for s in 0..g-1 is the
    defect-quantity distribution.
    """

    g: int
    q: int
    p: np.ndarray
    pi: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        p, pi, m = np.asarray(self.p, float), np.asarray(self.pi, float), np.asarray(self.m, float)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "m", m)
        if p.shape != (self.g + 1,):
            raise ValueError("p must have g+1 entries")
        if pi.shape != (self.g, self.g, self.q):
            raise ValueError("pi must have shape (g, g, q)")
        if m.shape != (self.g,):
            raise ValueError("m must have g entries")
        if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("p must lie on the probability simplex")
        if np.any(m < -1e-9) or abs(m.sum() - 1.0) > 1e-6:
            raise ValueError("m must lie on the probability simplex")
        for i in range(self.g):
            for j in range(i, self.g):
                row = pi[i, j]
                if np.any(row < -1e-9) or abs(row.sum() - 1.0) > 1e-6:
                    raise ValueError(f"pi[{i},{j}] must lie on the simplex")


@dataclass(frozen=True)
class FitConfig:
    """Regularization weights and optimizer/cross-validation knobs."""

    lam1: float = 0.0
    lam2: float = 0.0
    multistarts: int = 8
    max_iterations: int = 5000
    gradient_tol: float = 1e-6
    folds: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")


@dataclass(frozen=True)
class FitResult:
    params: AicmParameters
    rank: RankPermutation
    loss: float
    n_qualified: int
    n_defective: int


def pattern_index(score_vector, rank: RankPermutation | None = None) -> int | None:
    """Pattern index in 1..g+1, or None for a defective vector.

    Pattern i has exactly i-1 leading zeros in rank coordinates followed
    by all-positive scores; pattern g+1 is all-zero.  When ``rank`` is
    given, the vector is reordered first.
    """
    v = rank.to_rank(score_vector) if rank is not None else tuple(score_vector)
    g = len(v)
    if all(a == 0 for a in v):
        return g + 1
    first = next(k for k, a in enumerate(v) if a != 0)
    if all(a >= 1 for a in v[first:]):
        return first + 1
    return None


def defective_score_quantity(
    score_vector, rank: RankPermutation | None = None
) -> tuple[int, tuple[int, ...]]:
    """Minimum L1 distance to a qualified vector, with a minimizer.

    Converting to pattern i zeroes the first i-1 entries (each costs its
    current value) and raises every remaining zero to 1 (cost 1 each).
    Ties pick the smallest pattern index, which keeps the most nonzero
    entries; the minimizer is returned in the input's coordinates.
    """
    v = list(rank.to_rank(score_vector)) if rank is not None else list(score_vector)
    g = len(v)
    best_cost, best_w = None, None
    for i in range(1, g + 2):
        lead = i - 1 if i <= g else g
        cost = sum(v[:lead]) + sum(1 for a in v[lead:] if a == 0)
        if best_cost is None or cost < best_cost:
            w = [0] * lead + [a if a >= 1 else 1 for a in v[lead:]]
            best_cost, best_w = cost, w
    out = tuple(best_w)
    if rank is not None:
        out = rank.from_rank(out)
    return int(best_cost), out


def identify_rank(batch: SurveyBatch) -> RankPermutation:
    """Sort locations by ascending |V'_j|; ties by label ascending."""
    counts = batch.willing_counts()
    order = sorted(range(batch.g), key=lambda j: (counts[j], j))
    return RankPermutation(tuple(order))


def rank_success_bound(n_samples: int, g: int, m0: float, p_star: float) -> float:
    """Lower bound 1 - (g-1) exp(-N [m0 (1+p*) - 1]^2 / 2) on the
    probability that cardinality sorting recovers the true rank.

    The guarantee is only meaningful when p* > (1 - m0)/m0; a violation
    triggers a warning and the (possibly vacuous) value is still
    returned.
    """
    if not (0 < m0 <= 1) or not (0 < p_star <= 1):
        raise ValueError("m0 and p_star must lie in (0, 1]")
    if m0 * (1.0 + p_star) - 1.0 <= 0:
        warnings.warn("rank identification premise p* > (1-m0)/m0 violated",
                      stacklevel=2)
    margin = m0 * (1.0 + p_star) - 1.0
    return 1.0 - (g - 1) * math.exp(-0.5 * n_samples * margin * margin)


def sample_probability(qualified_vector, params: AicmParameters) -> float:
    """P(xi' | p, pi) for a qualified rank-coordinate vector."""
    i = pattern_index(qualified_vector)
    if i is None:
        raise ValueError("vector is defective; convert it first")
    if i == params.g + 1:
        return float(params.p[params.g])
    prob = float(params.p[i - 1])
    for j in range(i - 1, params.g):
        prob *= float(params.pi[i - 1, j, qualified_vector[j] - 1])
    return prob


# ---------------------------------------------------------------------------
# sufficient statistics and the loss


@dataclass(frozen=True)
class _Stats:
    """Counts over converted (qualified) rank-coordinate samples:
    n_pattern[i-1] for i in 1..g+1, and n_score[i-1, j-1, r-1]."""

    n: int
    n_pattern: np.ndarray
    n_score: np.ndarray


def _collect_stats(converted: list[tuple[int, ...]], g: int, q: int) -> _Stats:
    n_pattern = np.zeros(g + 1)
    n_score = np.zeros((g, g, q))
    for v in converted:
        i = pattern_index(v)
        if i is None:
            raise ValueError("converted sample is still defective")
        n_pattern[i - 1] += 1
        if i <= g:
            for j in range(i - 1, g):
                n_score[i - 1, j, v[j] - 1] += 1
    return _Stats(n=len(converted), n_pattern=n_pattern, n_score=n_score)


def _regularizers(pi: np.ndarray, g: int, q: int) -> tuple[float, float]:
    """(sum of R1 terms over i<=j, sum of R2 terms over j<g)."""
    r = np.arange(1, q + 1, dtype=float)
    mean = pi @ r            # (g, g): E[score] per (i, j) row
    second = pi @ (r * r)    # (g, g): E[score^2]
    r1 = 0.0
    for i in range(g):
        for j in range(i, g):
            r1 += second[i, j] - mean[i, j] ** 2
    r2 = 0.0
    for j in range(g - 1):   # locations j+1 and j+2 (1-based), patterns i <= j+1
        w = mean[: j + 1, j + 1] - mean[: j + 1, j]
        r2 += float(np.mean(w * w) - np.mean(w) ** 2)
    return r1, r2


def loss(
    params: AicmParameters,
    converted: list[tuple[int, ...]],
    lam1: float,
    lam2: float,
) -> float:
    """Regularized negative mean log-likelihood over converted samples."""
    stats = _collect_stats(converted, params.g, params.q)
    return _loss_from_stats(params.p, params.pi, stats, params.g, params.q, lam1, lam2)


def _loss_from_stats(p, pi, stats: _Stats, g, q, lam1, lam2) -> float:
    loglik = float(stats.n_pattern @ np.log(np.maximum(p, _LOG_FLOOR)))
    loglik += float(np.sum(stats.n_score * np.log(np.maximum(pi, _LOG_FLOOR))))
    val = -loglik / max(stats.n, 1)
    if lam1 > 0 or lam2 > 0:
        r1, r2 = _regularizers(pi, g, q)
        val += 2.0 * lam1 / (g * (g + 1)) * r1
        if g > 1:
            val += lam2 / (g - 1) * r2
    return val


def _loss_gradient(p, pi, stats: _Stats, g, q, lam1, lam2):
    n = max(stats.n, 1)
    gp = -stats.n_pattern / np.maximum(p, _LOG_FLOOR) / n
    gpi = -stats.n_score / np.maximum(pi, _LOG_FLOOR) / n
    r = np.arange(1, q + 1, dtype=float)
    if lam1 > 0:
        c1 = 2.0 * lam1 / (g * (g + 1))
        mean = pi @ r
        for i in range(g):
            for j in range(i, g):
                gpi[i, j] += c1 * (r * r - 2.0 * mean[i, j] * r)
    if lam2 > 0 and g > 1:
        c2 = lam2 / (g - 1)
        mean = pi @ r
        for j in range(g - 1):
            w = mean[: j + 1, j + 1] - mean[: j + 1, j]
            dz = 2.0 * (w - np.mean(w)) / (j + 1)  # dR2_j / dw_i
            for i in range(j + 1):
                gpi[i, j + 1] += c2 * dz[i] * r
                gpi[i, j] -= c2 * dz[i] * r
    return gp, gpi


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, len(v) + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _project(p, pi, g):
    p = _project_simplex(p)
    pi = pi.copy()
    for i in range(g):
        for j in range(i, g):
            pi[i, j] = _project_simplex(pi[i, j])
    return p, pi


def frequency_estimate(converted: list[tuple[int, ...]], g: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form maximum-likelihood (p, pi) by frequency counting over
    the converted samples; rows of empty pattern classes are uniform."""
    stats = _collect_stats(converted, g, q)
    p = stats.n_pattern / max(stats.n, 1)
    pi = np.full((g, g, q), 1.0 / q)
    for i in range(g):
        for j in range(i, g):
            tot = stats.n_score[i, j].sum()
            if tot > 0:
                pi[i, j] = stats.n_score[i, j] / tot
    return p, pi


def _pgd(p0, pi0, stats, g, q, lam1, lam2, cfg: FitConfig):
    """Projected-gradient descent with Armijo backtracking."""
    p, pi = _project(p0.copy(), pi0.copy(), g)
    val = _loss_from_stats(p, pi, stats, g, q, lam1, lam2)
    step = 1.0
    for _ in range(cfg.max_iterations):
        gp, gpi = _loss_gradient(p, pi, stats, g, q, lam1, lam2)
        accepted = False
        for _half in range(40):
            p_new, pi_new = _project(p - step * gp, pi - step * gpi, g)
            val_new = _loss_from_stats(p_new, pi_new, stats, g, q, lam1, lam2)
            move = float(np.sum((p_new - p) ** 2) + np.sum((pi_new - pi) ** 2))
            if val_new <= val - 1e-4 / max(step, 1e-12) * move:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        gmap = math.sqrt(move) / max(step, 1e-12)
        p, pi, val = p_new, pi_new, val_new
        step = min(step * 2.0, 1e6)
        if gmap <= cfg.gradient_tol:
            break
    return p, pi, val


def _convert_batch(batch: SurveyBatch, rank: RankPermutation):
    """Rank-reorder every sample and convert defective ones; returns
    (converted rank-coordinate vectors, defect quantities)."""
    converted, defects = [], []
    for row in batch.scores:
        v = rank.to_rank(row)
        s, w = defective_score_quantity(v)
        converted.append(w)
        defects.append(s)
    return converted, defects


def fit(batch: SurveyBatch, config: FitConfig | None = None) -> FitResult:
    """Identify the rank, convert defective samples, estimate the
    defect-quantity distribution by frequency, and minimize the
    regularized loss over (p, pi) by multistart projected gradient.

    At lam1 = lam2 = 0 the frequency estimate is the exact optimum and
    is returned directly.
    """
    cfg = config or FitConfig()
    if len(batch) < 1:
        raise ValueError("empty batch")
    rank = identify_rank(batch)
    converted, defects = _convert_batch(batch, rank)
    g, q = batch.g, batch.q

    m = np.zeros(g)
    for s in defects:
        if s > g - 1:
            raise AssertionError("defect quantity exceeded g-1")
        m[s] += 1
    m /= len(defects)

    stats = _collect_stats(converted, g, q)
    p_freq, pi_freq = frequency_estimate(converted, g, q)

    if cfg.lam1 == 0 and cfg.lam2 == 0:
        best_p, best_pi = p_freq, pi_freq
        best_val = _loss_from_stats(best_p, best_pi, stats, g, q, 0.0, 0.0)
    else:
        rng = np.random.default_rng(cfg.seed)
        starts = [(p_freq, pi_freq)]
        for _ in range(max(cfg.multistarts - 1, 0)):
            ps = rng.dirichlet(np.ones(g + 1) + 4.0 * p_freq * (g + 1))
            pis = pi_freq.copy()
            for i in range(g):
                for j in range(i, g):
                    pis[i, j] = rng.dirichlet(np.ones(q) + 4.0 * q * pi_freq[i, j])
            starts.append((ps, pis))
        best_p = best_pi = None
        best_val = math.inf
        for p0, pi0 in starts:
            p1, pi1, val = _pgd(np.asarray(p0, float), np.asarray(pi0, float),
                                stats, g, q, cfg.lam1, cfg.lam2, cfg)
            if val < best_val:
                best_p, best_pi, best_val = p1, pi1, val

    params = AicmParameters(g=g, q=q, p=best_p, pi=best_pi, m=m)
    n_def = sum(1 for s in defects if s > 0)
    return FitResult(params=params, rank=rank, loss=float(best_val),
                     n_qualified=len(defects) - n_def, n_defective=n_def)


def _held_out_loglik(params: AicmParameters, rank: RankPermutation,
                     batch: SurveyBatch) -> float:
    total = 0.0
    for row in batch.scores:
        v = rank.to_rank(row)
        _, w = defective_score_quantity(v)
        total += math.log(max(sample_probability(w, params), _LOG_FLOOR))
    return total / len(batch)


def cross_validate_lambda(
    batch: SurveyBatch,
    folds: int = 4,
    config: FitConfig | None = None,
) -> float:
    """Two-round k-fold selection of lam1 = lam2 = lambda by held-out
    mean log-likelihood: a coarse scan over {0, 0.1, ..., 5} then a fine
    scan over the winner +/- 0.01k for k = 0..10.  Ties prefer the
    smaller lambda."""
    cfg = config or FitConfig(multistarts=2, max_iterations=800)
    if len(batch) < folds:
        raise ValueError("batch smaller than fold count")
    idx = np.arange(len(batch))
    np.random.default_rng(cfg.seed).shuffle(idx)
    parts = np.array_split(idx, folds)

    def score(lam: float) -> float:
        total = 0.0
        for f in range(folds):
            test_idx = set(parts[f].tolist())
            train = SurveyBatch(batch.g, batch.q, tuple(
                batch.scores[k] for k in range(len(batch)) if k not in test_idx))
            test = SurveyBatch(batch.g, batch.q, tuple(
                batch.scores[k] for k in sorted(test_idx)))
            res = fit(train, replace(cfg, lam1=lam, lam2=lam))
            total += _held_out_loglik(res.params, res.rank, test)
        return total / folds

    grid1 = [round(0.1 * k, 10) for k in range(51)]
    scores1 = [(score(lam), -lam) for lam in grid1]
    lam_star1 = -max(scores1)[1]
    grid2 = sorted({max(round(lam_star1 + 0.01 * k, 10), 0.0)
                    for k in range(-10, 11)})
    scores2 = [(score(lam), -lam) for lam in grid2]
    return -max(scores2)[1]


def estimate_utilities(params: AicmParameters, rank: RankPermutation) -> np.ndarray:
    """Per-location mean-score utility u_j = sum_{i<=j} p_i E[score of
    location j in pattern i], reported in original label order."""
    r = np.arange(1, params.q + 1, dtype=float)
    in_rank = np.zeros(params.g)
    for j in range(params.g):
        in_rank[j] = sum(params.p[i] * float(params.pi[i, j] @ r)
                         for i in range(j + 1))
    return np.asarray(rank.from_rank(in_rank), dtype=float)


# ---------------------------------------------------------------------------
# JSON exchange


def dump_survey_json(batch: SurveyBatch, metadata: dict | None = None) -> str:
    doc = {"g": batch.g, "q": batch.q,
           "scores": [list(row) for row in batch.scores]}
    if metadata:
        doc["metadata"] = metadata
    return json.dumps(doc, indent=1)


def load_survey_json(text: str) -> SurveyBatch:
    doc = json.loads(text)
    return SurveyBatch(g=int(doc["g"]), q=int(doc["q"]),
                       scores=tuple(tuple(int(a) for a in row)
                                    for row in doc["scores"]))


def dump_model_json(result: FitResult, metadata: dict | None = None) -> str:
    par = result.params
    doc = {
        "g": par.g,
        "q": par.q,
        "rank": list(result.rank.order),
        "p": par.p.tolist(),
        "pi": par.pi.tolist(),
        "m": par.m.tolist(),
        "loss": result.loss,
        "n_qualified": result.n_qualified,
        "n_defective": result.n_defective,
    }
    if metadata:
        doc["metadata"] = metadata
    return json.dumps(doc, indent=1)


def load_model_json(text: str) -> FitResult:
    doc = json.loads(text)
    params = AicmParameters(g=int(doc["g"]), q=int(doc["q"]),
                            p=np.array(doc["p"]), pi=np.array(doc["pi"]),
                            m=np.array(doc["m"]))
    return FitResult(params=params,
                     rank=RankPermutation(tuple(int(j) for j in doc["rank"])),
                     loss=float(doc["loss"]),
                     n_qualified=int(doc["n_qualified"]),
                     n_defective=int(doc["n_defective"]))
