"""Domain types for the service-center location problem with
attraction-driven demand.

Sites and candidate locations are dense 0-based integers internally;
external JSON files may carry arbitrary labels that are mapped on load.
Utilities are stored sparsely over (site, candidate) pairs with the
candidate inside the site's neighborhood; absent pairs are structurally
infeasible, not zero-utility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = [
    "Instance",
    "LocationDecision",
    "Allocation",
    "ScenarioSet",
    "AmbiguitySet",
    "ValidationReport",
    "validate_instance",
    "demand_function",
    "utility_upper_bound",
    "load_instance_json",
    "dump_instance_json",
    "load_scenarios_json",
    "dump_scenarios_json",
]


@dataclass(frozen=True)
class Instance:
    """A location instance.

    n_sites / n_candidates are the cardinalities of the site and
    candidate sets.  ``neighborhood[i]`` is the tuple of candidates
    preferable to site i, and ``utility[(i, j)]`` is defined exactly for
    j in ``neighborhood[i]``.
    """

    n_sites: int
    n_candidates: int
    open_cost: tuple[float, ...]
    budget: float
    capacity: tuple[float, ...]
    neighborhood: tuple[tuple[int, ...], ...]
    utility: dict[tuple[int, int], float]
    reverse_neighborhood: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        rev: list[list[int]] = [[] for _ in range(self.n_candidates)]
        for i, nbrs in enumerate(self.neighborhood):
            for j in nbrs:
                rev[j].append(i)
        object.__setattr__(
            self, "reverse_neighborhood", tuple(tuple(r) for r in rev)
        )

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n_sites) for j in self.neighborhood[i]]


@dataclass(frozen=True)
class LocationDecision:
    y: tuple[int, ...]

    def open_set(self) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.y) if v)

    def budget_feasible(self, instance: Instance) -> bool:
        return (
            sum(c * v for c, v in zip(instance.open_cost, self.y))
            <= instance.budget + 1e-9
        )


@dataclass(frozen=True)
class Allocation:
    x: dict[tuple[int, int], float]
    q: dict[tuple[int, int], float]


@dataclass(frozen=True)
class ScenarioSet:
    """Finite demand support: scenarios[w][(i, j)] >= 0 on the instance
    pair support, identical across scenarios."""

    scenarios: tuple[dict[tuple[int, int], float], ...]

    def __len__(self) -> int:
        return len(self.scenarios)

    def __getitem__(self, w: int) -> dict[tuple[int, int], float]:
        return self.scenarios[w]

    def __iter__(self):
        return iter(self.scenarios)


@dataclass(frozen=True)
class AmbiguitySet:
    """Total-variation ball of radius ``radius`` around ``nominal``."""

    nominal: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("ambiguity radius must be nonnegative")
        if any(m < -1e-12 for m in self.nominal):
            raise ValueError("nominal measure must be nonnegative")
        if abs(sum(self.nominal) - 1.0) > 1e-9:
            raise ValueError("nominal measure must sum to one")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(instance: Instance) -> ValidationReport:
    """Report-style invariant check; never raises."""
    report = ValidationReport()
    n, m = instance.n_sites, instance.n_candidates
    if len(instance.neighborhood) != n:
        report.violations.append(
            f"neighborhood has {len(instance.neighborhood)} rows, expected {n}"
        )
        return report
    for i, nbrs in enumerate(instance.neighborhood):
        if not nbrs:
            report.violations.append(f"empty neighborhood for site {i}")
        for j in nbrs:
            if not 0 <= j < m:
                report.violations.append(f"candidate {j} out of range for site {i}")
            if (i, j) not in instance.utility:
                report.violations.append(f"missing utility for pair ({i}, {j})")
    nbr_sets = [set(nbrs) for nbrs in instance.neighborhood]
    for (i, j), u in instance.utility.items():
        if not 0 <= i < n:
            report.violations.append(f"utility site index {i} out of range")
        elif j not in nbr_sets[i]:
            report.violations.append(
                f"utility defined for ({i}, {j}) outside neighborhood"
            )
        if u < 0:
            report.violations.append(f"negative utility at ({i}, {j})")
    for j, b in enumerate(instance.open_cost):
        if b <= 0:
            report.violations.append(f"nonpositive open cost at candidate {j}")
    for j, c in enumerate(instance.capacity):
        if c < 0:
            report.violations.append(f"negative capacity at candidate {j}")
    return report


def demand_function(
    instance: Instance,
    scenario: dict[tuple[int, int], float],
    site: int,
    y,
) -> float:
    """Attraction-driven demand at ``site`` under decision ``y``.

    Zero with no open neighbor, otherwise the largest single-center
    attraction among opened neighbors.
    """
    if not 0 <= site < instance.n_sites:
        raise KeyError(f"unknown site id {site}")
    opened = [j for j in instance.neighborhood[site] if y[j]]
    if not opened:
        return 0.0
    return max(scenario[(site, j)] for j in opened)


def utility_upper_bound(instance: Instance, scenario_set: ScenarioSet) -> float:
    """Cap on the recourse value over every decision and scenario:
    per-site best utility times per-site largest demand, summed."""
    if len(scenario_set) == 0:
        raise ValueError("scenario set must be nonempty")
    total = 0.0
    for i in range(instance.n_sites):
        u_max = max(instance.utility[(i, j)] for j in instance.neighborhood[i])
        d_max = max(
            dem[(i, j)]
            for dem in scenario_set.scenarios
            for j in instance.neighborhood[i]
        )
        total += u_max * d_max
    return total


# --- JSON interfaces -------------------------------------------------------


def dump_instance_json(instance: Instance, metadata: dict | None = None) -> str:
    obj = {
        "sites": instance.n_sites,
        "candidates": instance.n_candidates,
        "budget": instance.budget,
        "cost": list(instance.open_cost),
        "capacity": list(instance.capacity),
        "neighborhood": [list(nbrs) for nbrs in instance.neighborhood],
        "utility": [[i, j, u] for (i, j), u in sorted(instance.utility.items())],
    }
    if metadata is not None:
        obj["metadata"] = metadata
    return json.dumps(obj, indent=1, sort_keys=True)


def load_instance_json(text: str) -> Instance:
    obj = json.loads(text)
    try:
        return Instance(
            n_sites=int(obj["sites"]),
            n_candidates=int(obj["candidates"]),
            open_cost=tuple(float(v) for v in obj["cost"]),
            budget=float(obj["budget"]),
            capacity=tuple(float(v) for v in obj["capacity"]),
            neighborhood=tuple(tuple(int(j) for j in row) for row in obj["neighborhood"]),
            utility={(int(i), int(j)): float(u) for i, j, u in obj["utility"]},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed instance JSON: {exc}") from exc


def dump_scenarios_json(
    scenario_set: ScenarioSet,
    ambiguity: AmbiguitySet,
    metadata: dict | None = None,
) -> str:
    obj = {
        "tv_radius": ambiguity.radius,
        "nominal": list(ambiguity.nominal),
        "demand": [
            [[i, j, d] for (i, j), d in sorted(dem.items())]
            for dem in scenario_set.scenarios
        ],
    }
    if metadata is not None:
        obj["metadata"] = metadata
    return json.dumps(obj, indent=1, sort_keys=True)


def load_scenarios_json(text: str) -> tuple[ScenarioSet, AmbiguitySet]:
    obj = json.loads(text)
    try:
        scenarios = tuple(
            {(int(i), int(j)): float(d) for i, j, d in row} for row in obj["demand"]
        )
        ambiguity = AmbiguitySet(
            nominal=tuple(float(v) for v in obj["nominal"]),
            radius=float(obj["tv_radius"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scenario JSON: {exc}") from exc
    supports = {frozenset(s) for s in scenarios}
    if len(supports) > 1:
        raise ValueError("scenarios do not share the same (site, candidate) support")
    if len(scenarios) != len(ambiguity.nominal):
        raise ValueError("nominal measure length does not match scenario count")
    return ScenarioSet(scenarios=scenarios), ambiguity
