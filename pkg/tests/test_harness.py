import csv
import io
import json
import math

import numpy as np
import pytest

from auction_poa.auctions import FirstPrice, SimultaneousItems
from auction_poa.cli import main
from auction_poa.equilibria import GridStrategy, TypeTable, bad_example_mixed_strategy, symmetric_uniform_fpa_bne
from auction_poa.harness import (
    ConfigError,
    load_config,
    parse_experiments,
    poa_estimate,
    rows_to_csv,
    run_suite,
)
from auction_poa.priors import CorrelatedJoint, Discrete, IndependentProduct, Uniform, point_mass
from auction_poa.valuations import UnitDemand

FAST = {
    "experiments": [
        {"id": "b-poa", "kind": "poa", "format": {"type": "first_price"},
         "prior": {"type": "independent", "per_player": [{"type": "uniform", "lo": 0, "hi": 1}] * 2},
         "strategy": {"type": "symmetric_fpa", "n": 2}, "samples": 2000, "seed": 1,
         "bound": 1.0, "tolerance": 0.01, "check": "within"},
        {"id": "a-smooth", "kind": "smooth-check", "format": {"type": "first_price"}, "rule": "halfValueFpa",
         "lambda": 0.5, "mu": 1.0, "values": [[0, 0.5, 1]] * 2, "actions": [[0, 0.5, 1]] * 2,
         "samples": 1, "seed": 2, "bound": 0.0, "tolerance": 1e-9},
    ]
}


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def test_symmetric_poa():
    s = symmetric_uniform_fpa_bne(2)
    est = poa_estimate(FirstPrice(), IndependentProduct((Uniform(0, 1), Uniform(0, 1))), [s, s], 50_000, 0)
    assert est.ratio == pytest.approx(1.0, abs=0.01)
    assert est.label == "instance PoA"


def test_bad_example_poa():
    pm = point_mass(UnitDemand((1.0, 1.0)))
    s = bad_example_mixed_strategy()
    est = poa_estimate(SimultaneousItems(2, allocate_zero_bids=False, max_bids=1), IndependentProduct((pm, pm)),
                       [s, s], 50_000, 0)
    assert est.ratio == pytest.approx(0.75, abs=0.01)
    assert est.ratio <= 1 + 3 * est.stderr


def test_exhaustive_matches_hand_expectation():
    prior = CorrelatedJoint(((0.4, 0.6), (1.0, 0.6)), (0.5, 0.5))
    strat = [TypeTable((0.4, 1.0), (0.3, 0.3)), TypeTable((0.6,), (0.2,))]
    est = poa_estimate(FirstPrice(), prior, strat, samples=10)
    assert est.exhaustive
    # player 0 always wins with 0.3 > 0.2
    assert est.welfare == pytest.approx(0.5 * 0.4 + 0.5 * 1.0)
    assert est.opt == pytest.approx(0.5 * 0.6 + 0.5 * 1.0)
    assert est.ratio == pytest.approx(0.7 / 0.8)


def test_exhaustive_grid_strategy_matches_sampling():
    prior = IndependentProduct((Discrete((0.5, 1.0), (0.5, 0.5)), Discrete((0.5, 1.0), (0.3, 0.7))))
    g = GridStrategy((0.5, 1.0), (0.0, 0.25, 0.5), ((0.5, 0.5, 0.0), (0.0, 0.2, 0.8)))
    exact = poa_estimate(FirstPrice(), prior, [g, g], exhaustive=True)
    mc = poa_estimate(FirstPrice(), prior, [g, g], 200_000, 3, exhaustive=False)
    assert abs(mc.ratio - exact.ratio) <= 4 * mc.stderr + 1e-9


def test_strategy_undefined():
    prior = IndependentProduct((Discrete((0.5, 1.0), (0.5, 0.5)), point_mass(0.5)))
    strat = [TypeTable((0.5,), (0.1,)), TypeTable((0.5,), (0.1,))]
    with pytest.raises(ValueError, match="undefined"):
        poa_estimate(FirstPrice(), prior, strat, 100, exhaustive=False)


def test_stderr_scales_with_samples():
    prior = IndependentProduct((Uniform(0, 1), Uniform(0, 2)))
    from auction_poa.equilibria import vickrey_asymmetric_bne

    strat = list(vickrey_asymmetric_bne())
    ratios = []
    for rep in range(20):
        a = poa_estimate(FirstPrice(), prior, strat, 4000, rep).stderr
        b = poa_estimate(FirstPrice(), prior, strat, 8000, 100 + rep).stderr
        ratios.append(a / b)
    assert np.mean(ratios) == pytest.approx(math.sqrt(2), rel=0.2)


def test_parse_errors_have_locations(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "experiments": [\n    {"id": "x",,}\n  ]\n}')
    with pytest.raises(ConfigError, match=r"bad.json:3:"):
        load_config(str(bad))
    doc = {"experiments": [dict(FAST["experiments"][0], format={"type": "vcg"})]}
    with pytest.raises(ConfigError, match=r"cfg.json:4: experiment 'b-poa': field 'format'"):
        load_config(_write(tmp_path, doc))
    doc = {"experiments": [{k: v for k, v in FAST["experiments"][1].items() if k != "lambda"}]}
    with pytest.raises(ConfigError, match="field 'lambda'"):
        load_config(_write(tmp_path, doc))
    with pytest.raises(ConfigError, match="tolerance"):
        parse_experiments({"id": "t", "kind": "poa", "seed": 1, "bound": 1, "tolerance": 0})


def test_suite_rows_sorted_and_deterministic(tmp_path):
    exps = load_config(_write(tmp_path, FAST))
    rows = run_suite(exps)
    assert [r.experiment for r in rows] == ["a-smooth", "b-poa"]
    assert all(r.passed for r in rows)
    a, b = io.StringIO(), io.StringIO()
    rows_to_csv(rows, a)
    rows_to_csv(run_suite(exps), b)
    assert a.getvalue() == b.getvalue()
    header = a.getvalue().splitlines()[0].split(",")
    assert header[:8] == ["experiment", "seed", "samples", "estimate", "stderr", "bound", "tolerance", "pass"]


def test_cli_suite_and_exit_codes(tmp_path, capsys):
    cfg = _write(tmp_path, FAST)
    out = tmp_path / "out.csv"
    assert main(["suite", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 and {r["pass"] for r in rows} == {"true"}
    tampered = json.loads(json.dumps(FAST))
    tampered["experiments"][0]["bound"] = 0.5
    assert main(["suite", "--config", _write(tmp_path, tampered, "t.json")]) == 1
    assert "false" in capsys.readouterr().out


def test_cli_subcommand_filters_and_overrides(tmp_path, capsys):
    cfg = _write(tmp_path, FAST)
    assert main(["poa", "--config", cfg, "--seed", "9", "--samples", "500"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("b-poa,9,500,")
    assert main(["learn", "--config", cfg]) == 2


def test_cli_exhaustive_flag(tmp_path, capsys):
    doc = {"id": "d", "kind": "poa", "format": {"type": "first_price"},
           "prior": {"type": "correlated", "support": [[0.4, 0.6], [1.0, 0.6]], "probabilities": [0.5, 0.5]},
           "strategy": [{"type": "type_table", "types": [0.4, 1.0], "actions": [0.3, 0.3]},
                        {"type": "type_table", "types": [0.6], "actions": [0.2]}],
           "samples": 10, "seed": 0, "bound": 0.875, "tolerance": 1e-9, "check": "within"}
    assert main(["poa", "--config", _write(tmp_path, doc), "--exhaustive"]) == 0


def test_cli_missing_file(capsys):
    assert main(["suite", "--config", "/nonexistent.json"]) == 2
