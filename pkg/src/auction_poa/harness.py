"""Experiment orchestration: instance-PoA estimates, JSON-configured suites, CSV rows.

Estimates here target one prior/strategy instance; the worst case over all
instances of a format is never computed.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np

from .auctions import AuctionFormat, PublicGood, allocation_value_batch
from .composition import compose, verify_composed_smoothness
from .equilibria import (
    BidGrid,
    ClosedForm,
    GridStrategy,
    MixedClosedForm,
    Strategy,
    TypeTable,
    bad_example_mixed_strategy,
    epsilon_bne_check,
    symmetric_uniform_fpa_bne,
    truthful,
    vickrey_asymmetric_bne,
)
from .io import from_dict, write_csv
from .learning import LearnerConfig, item_grid, run_repeated, welfare_vs_bound
from .priors import atoms, is_discrete, sample_profiles
from .smoothness import SmoothnessParams, builtin_deviation, verify_smoothness
from .valuations import UnitDemand, random_coverage
from .welfare import opt_welfare

__all__ = [
    "EXHAUSTIVE_LIMIT",
    "PoaEstimate",
    "poa_estimate",
    "ConfigError",
    "Experiment",
    "ResultRow",
    "CSV_COLUMNS",
    "parse_experiments",
    "load_config",
    "run_experiment",
    "run_suite",
    "rows_to_csv",
]

EXHAUSTIVE_LIMIT = 10**6
KINDS = ("poa", "eq-check", "smooth-check", "learn", "compose-check")
CHECKS = ("within", "at_least", "at_most")
CSV_COLUMNS = ["experiment", "seed", "samples", "estimate", "stderr", "bound", "tolerance", "pass", "config_hash"]


@dataclass(frozen=True)
class PoaEstimate:
    """Instance PoA: ratio of mean welfare to mean optimal welfare."""

    welfare: float
    opt: float
    ratio: float
    welfare_stderr: float
    opt_stderr: float
    stderr: float
    samples: int
    exhaustive: bool = False
    label: str = "instance PoA"


def _strategy_support(s: Strategy) -> Optional[int]:
    """Number of actions a strategy mixes over at any one type (None if continuous)."""
    if s.pure:
        return 1
    if isinstance(s, GridStrategy):
        return int(max((np.asarray(p) > 0).sum() for p in s.probs))
    return None


def _action_dist(s: Strategy, v, rng):
    """``[(action, prob)]`` for a pure or grid strategy at type ``v``."""
    if isinstance(s, GridStrategy) and not s.pure:
        row = np.asarray(s.probs[s._row(v)])
        return [(s.bids[k], float(row[k])) for k in np.flatnonzero(row > 0)]
    return [(s.sample(v, rng, 1)[0], 1.0)]


def _actions_for(s: Strategy, col, rng, size):
    """Actions for a column of sampled types (array or list of objects)."""
    try:
        if isinstance(s, ClosedForm) and isinstance(col, np.ndarray):
            return np.asarray(s.bid(col), dtype=float)
        if isinstance(s, MixedClosedForm):
            return s.sample(None, rng, size)
        out = None
        groups: dict = {}
        for k, v in enumerate(col):
            groups.setdefault(v if not isinstance(v, (float, np.floating)) else float(v), []).append(k)
        for v, ks in groups.items():
            a = s.sample(v, rng, len(ks))
            if out is None:
                out = np.zeros((size,) + np.shape(a)[1:])
            out[ks] = a
        return out
    except KeyError as e:
        raise ValueError(f"strategy undefined at a sampled value: {e}") from None


def _welfare_and_opt(fmt, bids, profiles):
    """Per-row welfare and OPT for sampled profiles (array or list of tuples)."""
    if isinstance(profiles, np.ndarray):
        alloc, _ = fmt.settle(bids)
        sw = (alloc * profiles).sum(axis=1)
        opt = profiles.sum(axis=1) if isinstance(fmt, PublicGood) else profiles.max(axis=1)
        return sw, opt
    sw = np.empty(len(profiles))
    opt = np.empty(len(profiles))
    groups: dict = {}
    for k, p in enumerate(profiles):
        groups.setdefault(tuple(p), []).append(k)
    for p, ks in groups.items():
        sw[ks] = allocation_value_batch(fmt, bids[ks], p).sum(axis=1)
        opt[ks] = opt_welfare(fmt, p)
    return sw, opt


def poa_estimate(fmt: AuctionFormat, prior, strategies: Sequence[Strategy], samples: int = 100_000,
                 seed: int = 0, exhaustive: Optional[bool] = None) -> PoaEstimate:
    """Estimate E[SW] / E[OPT] for one prior and strategy profile.

    Exhaustive enumeration (no sampling) is used when the prior is discrete,
    every strategy has finite support, and prior atoms times strategy
    support is at most ``EXHAUSTIVE_LIMIT``; ``exhaustive`` forces it on or off.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    supports = [_strategy_support(s) for s in strategies]
    eligible = is_discrete(prior) and all(k is not None for k in supports)
    if eligible:
        count = len(atoms(prior)) * math.prod(supports)
        eligible = count <= EXHAUSTIVE_LIMIT
    if exhaustive and not eligible:
        raise ValueError("exhaustive mode needs a discrete prior and finite strategy support within the limit")
    if exhaustive is None:
        exhaustive = eligible

    if exhaustive:
        sw = opt = 0.0
        for prof, p in atoms(prior):
            dists = [_action_dist(s, v, rng) for s, v in zip(strategies, prof)]
            combos = list(itertools.product(*dists))
            bids = fmt.validate(np.array([[np.asarray(a, dtype=float) for a, _ in c] for c in combos]))
            probs = np.array([math.prod(q for _, q in c) for c in combos])
            sw += p * float(allocation_value_batch(fmt, bids, prof).sum(axis=1) @ probs)
            opt += p * float(opt_welfare(fmt, prof))
        ratio = sw / opt if opt > 0 else float("nan")
        return PoaEstimate(sw, opt, ratio, 0.0, 0.0, 0.0, 0, True)

    profiles = sample_profiles(prior, samples, rng)
    cols = [profiles[:, i] if isinstance(profiles, np.ndarray) else [p[i] for p in profiles]
            for i in range(len(strategies))]
    bids = np.stack([_actions_for(s, c, rng, samples) for s, c in zip(strategies, cols)], axis=1)
    bids = fmt.validate(bids)
    sw, opt = _welfare_and_opt(fmt, bids, profiles)
    m_sw, m_opt = float(sw.mean()), float(opt.mean())
    ratio = m_sw / m_opt if m_opt > 0 else float("nan")
    n = samples
    se_sw = float(sw.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    se_opt = float(opt.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    # delta method for a ratio of means
    resid = sw - ratio * opt
    se = float(resid.std(ddof=1) / (math.sqrt(n) * m_opt)) if n > 1 and m_opt > 0 else 0.0
    return PoaEstimate(m_sw, m_opt, ratio, se_sw, se_opt, se, n, False)


class ConfigError(ValueError):
    """Configuration problem, with file/line/field location in the message."""


@dataclass(frozen=True)
class Experiment:
    id: str
    kind: str
    samples: int
    seed: int
    bound: float
    tolerance: float
    check: str = "at_least"
    upper: Optional[float] = None
    spec: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")

    @property
    def config_hash(self) -> str:
        body = dict(self.spec, samples=self.samples, seed=self.seed, bound=self.bound, tolerance=self.tolerance)
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    def judge(self, estimate: float) -> bool:
        if math.isnan(estimate):
            return False
        if self.check == "within":
            ok = abs(estimate - self.bound) <= self.tolerance
        elif self.check == "at_most":
            ok = estimate <= self.bound + self.tolerance
        else:
            ok = estimate >= self.bound - self.tolerance
        return ok and (self.upper is None or estimate < self.upper)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    samples: int
    estimate: float
    stderr: float
    bound: float
    tolerance: float
    passed: bool
    config_hash: str

    def as_list(self) -> list:
        return [self.experiment, self.seed, self.samples, repr(self.estimate), repr(self.stderr),
                repr(self.bound), repr(self.tolerance), str(self.passed).lower(), self.config_hash]


def _line_of(text: str, exp_id: str) -> Optional[int]:
    m = re.search(r'"id"\s*:\s*"' + re.escape(exp_id) + '"', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_experiments(doc: Any, source: str = "<config>", text: str = "") -> list[Experiment]:
    """Build experiments from a parsed config: one object or ``{"experiments": [...]}``."""
    items = doc.get("experiments", [doc]) if isinstance(doc, dict) else None
    if not isinstance(items, list):
        raise ConfigError(f"{source}: top level must be an object or have an 'experiments' list")
    out, seen = [], set()
    for k, d in enumerate(items):
        where = f"{source}: experiments[{k}]"
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object")
        if "id" in d:
            line = _line_of(text, str(d["id"]))
            where = f"{source}:{line}: experiment {d['id']!r}" if line else f"{where} ({d['id']!r})"
        for key in ("id", "kind", "seed", "bound", "tolerance"):
            if key not in d:
                raise ConfigError(f"{where}: missing field '{key}'")
        if d["kind"] not in KINDS:
            raise ConfigError(f"{where}: field 'kind': unknown kind {d['kind']!r}; expected one of {KINDS}")
        if d.get("check", "at_least") not in CHECKS:
            raise ConfigError(f"{where}: field 'check': expected one of {CHECKS}")
        if d["id"] in seen:
            raise ConfigError(f"{where}: duplicate id")
        seen.add(d["id"])
        try:
            e = Experiment(str(d["id"]), d["kind"], int(d.get("samples", 1)), int(d["seed"]), float(d["bound"]),
                           float(d["tolerance"]), d.get("check", "at_least"),
                           None if d.get("upper") is None else float(d["upper"]), d)
            _build(e)  # validate the kind-specific fields now
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as err:
            raise ConfigError(f"{where}: {_field_hint(err)}{err}") from None
        out.append(e)
    return out


class _FieldError(ValueError):
    def __init__(self, name, msg):
        super().__init__(msg)
        self.name = name


def _field_hint(err) -> str:
    return f"field '{err.name}': " if isinstance(err, _FieldError) else ""


def _get(d: dict, name: str, conv=None, default=...):
    if name not in d:
        if default is ...:
            raise _FieldError(name, "missing")
        return default
    try:
        return conv(d[name]) if conv else d[name]
    except Exception as err:  # noqa: BLE001 - re-raised with the field name
        raise _FieldError(name, str(err)) from None


def load_config(path: str) -> list[Experiment]:
    with open(path) as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    return parse_experiments(doc, path, text)


def _strategies(d, n: int) -> list[Strategy]:
    if isinstance(d, list):
        if len(d) != n:
            raise ValueError(f"expected {n} strategies, got {len(d)}")
        return [_strategies(x, 1)[0] for x in d]
    t = d.get("type")
    if t == "symmetric_fpa":
        return [symmetric_uniform_fpa_bne(int(d.get("n", n)))] * n
    if t == "vickrey":
        return list(vickrey_asymmetric_bne())
    if t == "bad_example":
        return [bad_example_mixed_strategy(int(d.get("items", 2)))] * n
    if t == "truthful":
        return [truthful()] * n
    if t == "linear":
        slope = float(d["slope"])
        return [ClosedForm(f"linear_{slope}", lambda v, s=slope: s * np.asarray(v, dtype=float), (slope,))] * n
    if t == "type_table":
        return [TypeTable(tuple(float(x) for x in d["types"]), tuple(float(x) for x in d["actions"]))] * n
    raise ValueError(f"unknown strategy type {t!r}")


def _build(e: Experiment) -> dict:
    """Parse the kind-specific part of an experiment into library objects."""
    d = e.spec
    out: dict = {}
    if e.kind in ("poa", "eq-check", "smooth-check", "learn"):
        out["format"] = _get(d, "format", from_dict)
    if e.kind in ("poa", "eq-check"):
        out["prior"] = _get(d, "prior", from_dict)
        out["strategies"] = _get(d, "strategy", lambda s: _strategies(s, out["prior"].n))
    if e.kind == "eq-check":
        g = _get(d, "grid")
        grids = g if isinstance(g, list) else [g]
        out["grid"] = [BidGrid(float(x["step"]), float(x["cap"])) for x in grids]
        if len(out["grid"]) == 1:
            out["grid"] = out["grid"][0]
        out["points"] = _get(d, "points", int, 101)
        out["integration"] = _get(d, "integration", str, "quadrature")
    if e.kind in ("smooth-check", "compose-check", "learn"):
        out["params"] = SmoothnessParams(_get(d, "lambda", float), _get(d, "mu", float), _get(d, "mode", str, "strong"))
    if e.kind == "smooth-check":
        out["rule"] = _get(d, "rule", builtin_deviation)
        out["values"] = [tuple(p) for p in itertools.product(*_get(d, "values"))]
        acts = _get(d, "actions")
        if isinstance(acts, dict):
            # per-case grid from 0 up to each player's own value
            step = _get(acts, "step", float)
            out["actions"] = lambda values: np.array(list(itertools.product(*[item_grid(step, v) for v in values])))
        else:
            out["actions"] = np.array(list(itertools.product(*acts)), dtype=float)
    if e.kind == "compose-check":
        out["format"] = compose([from_dict(c) for c in _get(d, "constituents")])
        r = _get(d, "rule")
        out["rule"] = [builtin_deviation(x) for x in r] if isinstance(r, list) else builtin_deviation(r)
        out["cases"] = _get(d, "cases", dict)
        kind = out["cases"].get("kind")
        if kind not in ("unit_demand_grid", "random_submodular"):
            raise _FieldError("cases", f"unknown case generator {kind!r}")
    if e.kind == "learn":
        out["values"] = _get(d, "values", lambda vs: tuple(v if isinstance(v, (int, float)) else from_dict(v)
                                                           for v in vs))
        out["step"] = _get(d, "step", float)
        out["T"] = _get(d, "T", int)
        out["runs"] = _get(d, "runs", int, 1)
        out["algorithm"] = _get(d, "algorithm", str, "mw")
        out["max_regret"] = _get(d, "max_regret", float, None)
    return out


def _compose_cases(fmt, cases: dict, seed: int):
    m = fmt.m
    if cases["kind"] == "unit_demand_grid":
        n = int(cases.get("players", 2))
        vals = [float(x) for x in cases["values"]]
        per = [UnitDemand(tuple(c)) for c in itertools.product(vals, repeat=m)]
        profiles = list(itertools.product(per, repeat=n))
        acts = [float(x) for x in cases["actions"]]
        vec = list(itertools.product(acts, repeat=m))
        A = np.array(list(itertools.product(vec, repeat=n)), dtype=float)
        return profiles, A
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n = int(cases.get("players", 2))
    count = int(cases.get("instances", 200))
    per_case = int(cases.get("actions_per_instance", 30))
    profiles = [tuple(random_coverage(m, rng) for _ in range(n)) for _ in range(count)]
    action_sets = {}
    for k, prof in enumerate(profiles):
        caps = np.array([v.singleton_values() for v in prof])
        a = rng.uniform(size=(per_case, n, m)) * caps
        action_sets[k] = np.concatenate([a, np.zeros((1, n, m)), 0.5 * caps[None]])
    by_profile = {p: action_sets[k] for k, p in enumerate(profiles)}
    return profiles, lambda values: by_profile[tuple(values)]


def run_experiment(e: Experiment) -> ResultRow:
    b = _build(e)
    stderr = 0.0
    if e.kind == "poa":
        est = poa_estimate(b["format"], b["prior"], b["strategies"], e.samples, e.seed,
                           e.spec.get("exhaustive"))
        estimate, stderr = est.ratio, est.stderr
        passed = e.judge(estimate)
    elif e.kind == "eq-check":
        rep = epsilon_bne_check(b["format"], b["strategies"], b["prior"], b["grid"], e.samples, e.seed,
                                b["points"], b["integration"])
        estimate, stderr = rep.epsilon, rep.worst.stderr
        passed = e.judge(estimate)
    elif e.kind == "smooth-check":
        rep = verify_smoothness(b["format"], b["rule"], b["params"], b["values"], b["actions"], e.samples,
                                e.seed, keep_rows=False)
        estimate, stderr = rep.min_margin, rep.stderr
        passed = rep.passed and e.judge(estimate)
    elif e.kind == "compose-check":
        profiles, actions = _compose_cases(b["format"], b["cases"], e.seed)
        rep = verify_composed_smoothness(b["format"], b["rule"], b["params"], profiles, actions, e.samples,
                                         e.seed, keep_rows=False)
        estimate, stderr = rep.min_margin, rep.stderr
        passed = rep.passed and e.judge(estimate)
    else:
        estimate, passed = _run_learning(e, b)
    return ResultRow(e.id, e.seed, e.samples, float(estimate), float(stderr), e.bound, e.tolerance,
                     bool(passed), e.config_hash)


def _run_learning(e: Experiment, b: dict):
    """Estimate = worst slack of avg welfare over the regret-corrected bound across runs."""
    fmt, values = b["format"], b["values"]
    caps = [v.singleton_values() if fmt.multi_item else float(v) for v in values]
    grids = [item_grid(b["step"], c) for c in caps]
    slack, ok = math.inf, True
    for r in range(b["runs"]):
        configs = [LearnerConfig(b["algorithm"], seed=int(np.random.SeedSequence([e.seed, r, i]).generate_state(1)[0]))
                   for i in range(len(values))]
        seq = run_repeated(fmt, values, grids, configs, b["T"])
        rep = welfare_vs_bound(seq, b["params"])
        slack = min(slack, rep.avg_welfare - rep.corrected_bound)
        ok &= rep.passed
        if b["max_regret"] is not None:
            ok &= max(rep.regrets) <= b["max_regret"]
    return slack, ok and e.judge(slack)


def run_suite(experiments: Sequence[Experiment], jobs: int = 1, seed: Optional[int] = None,
              samples: Optional[int] = None) -> list[ResultRow]:
    """Run experiments (optionally in parallel processes); rows sorted by id."""
    exps = [replace(e, seed=e.seed if seed is None else seed, samples=e.samples if samples is None else samples)
            for e in experiments]
    if jobs > 1 and len(exps) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_experiment, exps))
    else:
        rows = [run_experiment(e) for e in exps]
    return sorted(rows, key=lambda r: r.experiment)


def rows_to_csv(rows: Sequence[ResultRow], path_or_buf) -> None:
    write_csv(path_or_buf, CSV_COLUMNS, [r.as_list() for r in rows])
