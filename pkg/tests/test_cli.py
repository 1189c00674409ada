import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from tradewinds.calibrate import grid_evaluate
from tradewinds.cli import main
from tradewinds.domain import HOURS_PER_WEEK, ModelParams, Scenario, VisitMatrix
from tradewinds.geo import build_distance_matrix
from tradewinds.ingest import load_dir, write_scenario
from tradewinds.models import predict_ahuff
from tradewinds.stats import REGRESSION_VARIABLES, regression_design, shannon_entropy
from tradewinds.synth import SynthSpec, generate

from conftest import make_nbhd, make_store


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run("synth", "--stores", 5, "--neighborhoods", 200, "--alpha", 0.8, "--beta", 1.2,
               "--seed", 7, "--out-dir", d) == 0
    return d


def test_synth_writes_dataset(data_dir):
    names = {p.name for p in data_dir.iterdir()}
    assert {"stores.csv", "hourly.csv", "visits.csv", "neighborhoods.csv", "truth.json", "manifest.json"} <= names
    truth = json.loads((data_dir / "truth.json").read_text())
    assert truth["alpha"] == 0.8 and truth["beta"] == 1.2
    assert load_dir(data_dir).scenario == generate(SynthSpec(seed=7))[0]


def test_calibrate_recovers_truth(data_dir, tmp_path):
    assert run("calibrate", "--data", data_dir, "--model", "thuff", "--seed", 7, "--out-dir", tmp_path) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert abs(res["alpha"] - 0.8) <= 0.05 and abs(res["beta"] - 1.2) <= 0.05
    assert res["r"] >= 0.999
    trace = read_csv(tmp_path / "trace.csv")
    assert trace[0] == ["restart", "iteration", "best_objective"]
    assert max(float(r[2]) for r in trace[1:]) == res["r"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "calibrate" and manifest["seed"] == 7
    assert set(manifest["input_sha256"]) == {"stores", "hourly", "visits", "neighborhoods"}
    assert manifest["config"]["pso"]["particles"] == 10
    assert "wall_time_s" in manifest


def test_grid_only(data_dir, tmp_path):
    assert run("calibrate", "--data", data_dir, "--grid-only", "--model", "huff", "--out-dir", tmp_path) == 0
    rows = read_csv(tmp_path / "grid.csv")
    assert rows[0] == ["alpha\\beta", "0.1", "0.5", "1.0", "2.0", "5.0"]
    cells = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert cells.size == 25
    s = load_dir(data_dir).scenario
    np.testing.assert_array_equal(cells, grid_evaluate(s, build_distance_matrix(s), "huff"))
    assert not (tmp_path / "result.json").exists()


def test_calibrate_with_config_and_flags(data_dir, tmp_path):
    conf = tmp_path / "pso.conf"
    conf.write_text("particles = 4\nrestarts = 2\niterations = 5\n")
    out = tmp_path / "out"
    assert run("calibrate", "--data", data_dir, "--config", conf, "--restarts", 3,
               "--bounds-high", "1.5,1.5", "--out-dir", out) == 0
    pso = json.loads((out / "manifest.json").read_text())["config"]["pso"]
    assert (pso["particles"], pso["restarts"], pso["iterations"]) == (4, 3, 5)
    assert pso["bounds_high"] == [1.5, 1.5]


def test_missing_visits_file(data_dir, tmp_path, capsys):
    for name in ("stores.csv", "hourly.csv", "neighborhoods.csv"):
        (tmp_path / name).write_bytes((data_dir / name).read_bytes())
    assert run("calibrate", "--data", tmp_path, "--out-dir", tmp_path / "o") == 2
    assert "visits.csv" in capsys.readouterr().err


def test_schema_error_exit(data_dir, tmp_path):
    for name in ("stores.csv", "hourly.csv", "neighborhoods.csv"):
        (tmp_path / name).write_bytes((data_dir / name).read_bytes())
    (tmp_path / "visits.csv").write_text("cbg,store_id,visits\n")
    assert run("decay", "--data", tmp_path, "--out-dir", tmp_path / "o") == 2


def single_store_dir(tmp_path):
    s = Scenario((make_store("only", 0.0, 0.0),),
                 (make_nbhd("n1", 0.0, 0.1), make_nbhd("n2", 0.1, 0.0)),
                 VisitMatrix({("n1", "only"): 6.0, ("n2", "only"): 9.0}))
    write_scenario(s, tmp_path)
    return tmp_path


def test_non_calibratable_exit(tmp_path):
    d = single_store_dir(tmp_path / "data")
    assert run("calibrate", "--data", d, "--model", "huff", "--out-dir", tmp_path / "o") == 3


def test_single_store_predict_and_diff(tmp_path):
    d = single_store_dir(tmp_path / "data")
    out = tmp_path / "o"
    assert run("predict", "--data", d, "--alpha", 1, "--beta", 1, "--diff", "--out-dir", out) == 0
    winners = read_csv(out / "winners.csv")[1:]
    assert [r[1] for r in winners] == ["only", "only"]
    diffs = [float(r[2]) for r in read_csv(out / "diff.csv")[1:]]
    assert diffs == [0.0, 0.0]
    summary = json.loads((out / "diff_summary.json").read_text())
    assert summary["mean_abs"] == 0.0


def test_predict_ahuff_hour_matches_library(tmp_path):
    h1, h2 = np.zeros(HOURS_PER_WEEK), np.zeros(HOURS_PER_WEEK)
    h1[17], h1[3], h2[17], h2[40] = 2.0, 5.0, 6.0, 1.0
    s = Scenario(
        (make_store("a", 0.0, 0.0, h1, attractiveness=4.0), make_store("b", 0.0, 0.05, h2, attractiveness=2.0)),
        (make_nbhd("n1", 0.01, 0.0), make_nbhd("n2", 0.0, 0.04), make_nbhd("n3", 0.03, 0.03)),
        VisitMatrix({("n1", "a"): 5.0, ("n2", "b"): 3.0}),
    )
    write_scenario(s, tmp_path / "data")
    out = tmp_path / "o"
    assert run("predict", "--data", tmp_path / "data", "--model", "ahuff", "--alpha", 0.7, "--beta", 1.4,
               "--hour", 17, "--out-dir", out) == 0
    expected = predict_ahuff(s, build_distance_matrix(s), ModelParams(0.7, 1.4)).values[:, :, 17]
    rows = read_csv(out / "shares.csv")
    assert rows[0] == ["cbg_id", "store_id", "probability", "hour"]
    got = np.array([float(r[2]) for r in rows[1:]]).reshape(3, 2)
    np.testing.assert_array_equal(got, expected)
    assert all(r[3] == "17" for r in rows[1:])
    geo = json.loads((out / "market_share.geojson").read_text())
    assert geo["type"] == "FeatureCollection" and len(geo["features"]) == 5


def test_predict_from_params_file(data_dir, tmp_path):
    (tmp_path / "result.json").write_text(json.dumps({"model": "thuff", "alpha": 0.8, "beta": 1.2}))
    out = tmp_path / "o"
    assert run("predict", "--data", data_dir, "--params", tmp_path / "result.json", "--out-dir", out,
               "--classes", 5, "--weights", "visits") == 0
    shares = read_csv(out / "shares.csv")
    assert len(shares) == 1 + 200 * 5 * HOURS_PER_WEEK
    geo = json.loads((out / "market_share.geojson").read_text())
    assert len(geo["classification"]["breaks"]) == 6
    classes = {f["properties"].get("class") for f in geo["features"]} - {None}
    assert classes <= set(range(5))
    store_shares = read_csv(out / "store_shares.csv")
    assert store_shares[0] == ["store_id", "hour", "share"]
    assert abs(sum(float(r[2]) for r in store_shares[1:]) - 1) < 1e-9


def test_kind_mismatch_exit(data_dir, tmp_path):
    assert run("predict", "--data", data_dir, "--model", "huff", "--alpha", 1, "--beta", 1,
               "--hour", 5, "--out-dir", tmp_path) == 4
    (tmp_path / "result.json").write_text(json.dumps({"model": "ahuff", "alpha": 1, "beta": 1}))
    assert run("predict", "--data", data_dir, "--model", "thuff", "--params", tmp_path / "result.json",
               "--out-dir", tmp_path) == 4


def test_decay_outputs(data_dir, tmp_path):
    assert run("decay", "--data", data_dir, "--out-dir", tmp_path, "--bins", 12) == 0
    summary = json.loads((tmp_path / "decay.json").read_text())
    assert summary["median_km"] > 0 and summary["bins"] == 12
    pdf = read_csv(tmp_path / "pdf.csv")[1:]
    assert len(pdf) == 12
    area = sum((float(r[1]) - float(r[0])) * float(r[3]) for r in pdf)
    assert abs(area - 1) < 1e-6
    ecdf = [float(r[1]) for r in read_csv(tmp_path / "ecdf.csv")[1:]]
    assert ecdf[-1] == 1.0 and all(b >= a for a, b in zip(ecdf, ecdf[1:]))
    assert read_csv(tmp_path / "loglog.csv")[0] == ["ln_distance", "ln_density", "in_fit", "fitted_ln_density"]


def test_decay_without_visits_exit(tmp_path):
    s = Scenario((make_store("a"),), (make_nbhd("n"),))
    write_scenario(s, tmp_path / "data")
    assert run("decay", "--data", tmp_path / "data", "--out-dir", tmp_path / "o") == 3


def linear_response_dir(path, cities=("synthville",)):
    """Scenario whose visits are an exact linear function of the covariates."""
    s, _ = generate(SynthSpec(seed=3, n_stores=4, n_neighborhoods=40))
    d = build_distance_matrix(s)
    coef = dict(total_visit_counts=2.0, distance=-3.0, total_population=0.01, median_income=1e-4,
                median_age=0.5, entropy=7.0)
    entries = {}
    for i, nb in enumerate(s.neighborhoods):
        ent = shannon_entropy(nb.race_counts)
        for j, st in enumerate(s.stores):
            x = dict(total_visit_counts=st.attractiveness, distance=d.values[i, j],
                     total_population=nb.population, median_income=nb.median_income,
                     median_age=nb.median_age, entropy=ent)
            entries[(nb.id, st.id)] = 100.0 + sum(coef[k] * x[k] for k in coef)
    stores = tuple(replace(st, city=cities[j % len(cities)]) for j, st in enumerate(s.stores))
    s = Scenario(stores, s.neighborhoods, VisitMatrix(entries))
    write_scenario(s, path)
    return s, coef


def test_regress_perfect_fit(tmp_path):
    s, coef = linear_response_dir(tmp_path / "data")
    out = tmp_path / "o"
    assert run("regress", "--data", tmp_path / "data", "--out-dir", out) == 0
    rep = json.loads((out / "regression.json").read_text())
    assert abs(rep["r_squared"] - 1.0) < 1e-12
    assert rep["n_obs"] == 160 and rep["variables"] == list(REGRESSION_VARIABLES)
    rows = {r[0]: r for r in read_csv(out / "regression.csv")[1:]}
    assert list(rows) == ["intercept"] + list(REGRESSION_VARIABLES)
    for k, c in coef.items():
        assert float(rows[k][1]) == pytest.approx(c, rel=1e-6)
        assert rows[k][5] == "***"


def test_regress_grouping_single_group_is_pooled(tmp_path):
    linear_response_dir(tmp_path / "data")
    rng = np.random.default_rng(0)
    visits = read_csv(tmp_path / "data" / "visits.csv")
    with open(tmp_path / "data" / "visits.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(visits[0])
        for r in visits[1:]:
            w.writerow([r[0], r[1], repr(float(r[2]) + rng.normal(0, 5.0))])
    pooled, grouped = tmp_path / "pooled", tmp_path / "grouped"
    assert run("regress", "--data", tmp_path / "data", "--out-dir", pooled) == 0
    assert run("regress", "--data", tmp_path / "data", "--group-by", "city", "--out-dir", grouped) == 0
    by_group = read_csv(grouped / "regression_by_group.csv")
    assert by_group[0][0] == "city"
    assert [r[1:] for r in by_group[1:]] == read_csv(pooled / "regression.csv")[1:]
    r2 = read_csv(grouped / "rsquared.csv")
    assert r2[1][0] == "synthville"
    assert r2[1][1] == repr(json.loads((pooled / "regression.json").read_text())["r_squared"])


def test_regress_std_across_groups(tmp_path):
    linear_response_dir(tmp_path / "data", cities=("east", "west"))
    assert run("regress", "--data", tmp_path / "data", "--group-by", "city", "--out-dir", tmp_path / "o") == 0
    rows = {r[0]: r for r in read_csv(tmp_path / "o" / "rsquared.csv")[1:]}
    assert set(rows) == {"east", "west", "Mean", "Std"}
    vals = [float(rows[c][1]) for c in ("east", "west")]
    assert float(rows["Std"][1]) == pytest.approx(np.std(vals, ddof=1), abs=1e-15)


def test_regress_insufficient_data_exit(tmp_path):
    s = Scenario((make_store("a"),), (make_nbhd("n", median_age=30.0, median_income=1.0, race_counts={"x": 1.0}),),
                 VisitMatrix({("n", "a"): 7.0}))
    write_scenario(s, tmp_path / "data")
    assert run("regress", "--data", tmp_path / "data", "--out-dir", tmp_path / "o") == 5


def test_regress_design_matches_library(tmp_path):
    s, _ = linear_response_dir(tmp_path / "data")
    X, y, _ = regression_design(s, build_distance_matrix(s))
    assert len(y) == 160 and set(X) == set(REGRESSION_VARIABLES)


def test_privacy_flag(data_dir, tmp_path):
    assert run("decay", "--data", data_dir, "--min-visit-threshold", 5, "--out-dir", tmp_path) == 0
    cfg = json.loads((tmp_path / "manifest.json").read_text())["config"]
    assert cfg["min_visit_threshold"] == 5.0


def outputs(directory):
    out = {}
    for p in sorted(directory.iterdir()):
        data = p.read_bytes()
        if p.name == "manifest.json":
            m = json.loads(data)
            m.pop("wall_time_s")
            data = json.dumps(m, sort_keys=True).encode()
        out[p.name] = data
    return out


@pytest.mark.parametrize(
    "argv",
    [
        ["synth", "--stores", 3, "--neighborhoods", 30, "--noise", "poisson"],
        ["calibrate", "--model", "ahuff", "--particles", 5, "--restarts", 3, "--iterations", 10, "--grid"],
        ["calibrate", "--model", "thuff", "--restarts", 4, "--iterations", 10, "--threads", 4],
        ["predict", "--model", "thuff", "--alpha", 0.8, "--beta", 1.2, "--hour", 30, "--diff"],
        ["decay"],
        ["regress", "--group-by", "brand"],
    ],
)
def test_bitwise_reproducible(data_dir, tmp_path, argv):
    base = list(argv) + ["--seed", 11, "--out-dir", tmp_path]
    if argv[0] != "synth":
        base += ["--data", data_dir]
    assert run(*base) == 0
    first = outputs(tmp_path)
    assert run(*base) == 0
    assert outputs(tmp_path) == first
