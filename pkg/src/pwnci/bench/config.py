"""Experiment configuration and the JSON schema it is read from.

Schema (all keys optional except ``problem``)::

    {
      "problem": "lcp2",            # built-in name, or a custom definition object
      "n": 10,                      # dimension (ignored for custom problems)
      "N": 500,                     # SAA sample size
      "reps": 200,                  # Monte Carlo replications
      "budgets": [[0.025, 0.025]],  # (alpha1, alpha2) pairs
      "seed": 20240101,             # master seed
      "baseline_alpha": null,       # also compute the plain plug-in intervals at this level
      "workers": 1,                 # worker processes
      "raw": false                  # also write per-replication records
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from ..svi import SviProblem, from_definition, make_problem

DESK_SCALE = {
    "lcp1": dict(n=10, N=500, reps=200),
    "lcp2": dict(n=10, N=500, reps=200),
    "lcp3": dict(n=10, N=500, reps=200),
    "qp": dict(n=300, N=2000, reps=200),
    "worked": dict(n=2, N=100, reps=200),
}
FULL_SCALE = {
    "lcp1": dict(n=30, N=500, reps=500),
    "lcp2": dict(n=30, N=500, reps=500),
    "lcp3": dict(n=30, N=500, reps=500),
    "qp": dict(n=3000, N=10000, reps=1000),
    "worked": dict(n=2, N=100, reps=500),
}
DEFAULT_BUDGETS = {
    "qp": ((0.01, 0.04), (0.025, 0.025)),
}
LCP_BUDGETS = ((0.02, 0.08), (0.05, 0.05), (0.01, 0.04), (0.025, 0.025))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str | dict
    n: int | None = None
    N: int = 500
    reps: int = 200
    budgets: tuple = LCP_BUDGETS
    seed: int = 0
    baseline_alpha: float | None = None
    workers: int = 1
    raw: bool = False
    full_scale: bool = field(default=False, compare=False)

    def __post_init__(self):
        budgets = tuple((float(a1), float(a2)) for a1, a2 in self.budgets)
        for a1, a2 in budgets:
            if not (0 < a1 < 1 and 0 < a2 < 1 and a1 + a2 < 1):
                raise ValueError(f"invalid alpha budget ({a1}, {a2})")
        object.__setattr__(self, "budgets", budgets)
        if self.N < 2 or self.reps < 1:
            raise ValueError("need N >= 2 and reps >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def problem_name(self) -> str:
        if isinstance(self.problem, str):
            return self.problem
        return self.problem.get("name", "custom")

    def build_problem(self) -> SviProblem:
        if isinstance(self.problem, dict):
            return from_definition(self.problem)
        return make_problem(self.problem, self.n)

    def at_scale(self, full: bool) -> "ExperimentConfig":
        """Copy with ``n``, ``N`` and ``reps`` set from the scale table."""
        table = FULL_SCALE if full else DESK_SCALE
        sizes = table.get(self.problem_name)
        if sizes is None:
            return replace(self, full_scale=full)
        return replace(self, full_scale=full, **sizes)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("full_scale")
        d.pop("workers")  # does not affect results
        d["budgets"] = [list(b) for b in self.budgets]
        return json.dumps(d, sort_keys=True)


def default_config(problem: str, full_scale: bool = False, **overrides) -> ExperimentConfig:
    budgets = DEFAULT_BUDGETS.get(problem, LCP_BUDGETS)
    base = ExperimentConfig(problem=problem, budgets=budgets).at_scale(full_scale)
    if problem == "qp":
        base = replace(base, baseline_alpha=0.05)
    return replace(base, **overrides) if overrides else base


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        data = json.load(fh)
    if "problem" not in data:
        raise ValueError("config needs a 'problem' entry")
    known = set(ExperimentConfig.__dataclass_fields__) - {"full_scale"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if isinstance(data["problem"], str):
        cfg = default_config(data["problem"])
        cfg = replace(cfg, **{k: v for k, v in data.items() if k != "problem"})
    else:
        cfg = ExperimentConfig(**data)
    return replace(cfg, **overrides) if overrides else cfg
