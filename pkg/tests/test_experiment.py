import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from _oracles import exact_rank_sum_p, midranks, two_pass_mean_std
from stalib.benchmarks import make_benchmark
from stalib.experiment import (
    SUMMARY_HEADER,
    DegenerateSamples,
    ExperimentError,
    ExperimentPlan,
    RunFailure,
    Trial,
    export_results,
    final_grad_norm,
    load_curve,
    load_plan,
    load_records,
    load_summary,
    rank_sum_z,
    run_experiment,
    summarize,
    wilcoxon_rank_sum,
    write_curve,
)


def trial(fbest, seed=0, g=1e-6, evals=100, bench="sphere", alg="esta", dim=2):
    return Trial(bench, dim, alg, seed, fbest, g, "", evals, 5, "designed_optimal", 0.01,
                 curve=[(1, fbest + 1.0), (evals, fbest)])


SMALL = dict(benchmarks=("sphere", "rastrigin"), dims=(3,), algorithms=("esta", "exsta"), runs=3,
             base_seed=7, curve_stride=50)


@pytest.fixture(scope="module")
def small_result():
    return run_experiment(ExperimentPlan(**SMALL))


# plan

def test_plan_defaults_and_seeds():
    p = ExperimentPlan()
    assert p.dims == (20, 30, 50) and p.runs == 30 and p.base_seed == 42 and len(p.benchmarks) == 10
    assert ExperimentPlan(runs=3, base_seed=5).seeds() == [5, 6, 7]


@pytest.mark.parametrize(
    "bad",
    [dict(runs=0), dict(algorithms=("nosuch",)), dict(dims=()), dict(workers=0),
     dict(termination="max_stalls"), dict(se=0), dict(termination="bogus")],
)
def test_plan_validation(bad):
    with pytest.raises(ExperimentError):
        ExperimentPlan(**bad)


def test_plan_budget_caps():
    p = ExperimentPlan(algorithms=("esta", "standard_sta"))
    assert p.config_for("esta", 20).termination.max_fes is None
    assert p.config_for("standard_sta", 20).termination.max_fes == 200_000
    q = ExperimentPlan(termination="max_fes")
    assert q.config_for("esta", 30).termination.max_fes == 300_000
    assert ExperimentPlan(termination="max_fes", max_fes=99).config_for("esta", 30).termination.max_fes == 99


def test_load_plan(tmp_path):
    f = tmp_path / "plan.json"
    f.write_text(json.dumps({"benchmarks": "all", "dims": [20], "runs": 2, "termination": "max_fes"}))
    p = load_plan(f, runs=4, dims=None)
    assert len(p.benchmarks) == 10 and p.dims == (20,) and p.runs == 4
    f.write_text(json.dumps({"runz": 3}))
    with pytest.raises(ExperimentError):
        load_plan(f)
    f.write_text("[1, 2]")
    with pytest.raises(ExperimentError):
        load_plan(f)
    with pytest.raises(ExperimentError):
        load_plan(tmp_path / "missing.json")


# running and aggregation

def test_run_experiment_shape(small_result):
    r = small_result
    assert len(r.trials) == 2 * 2 * 3 and not r.failures
    assert [(s.benchmark, s.algorithm) for s in r.summaries] == [
        ("sphere", "esta"), ("sphere", "exsta"), ("rastrigin", "esta"), ("rastrigin", "exsta")]
    assert all(s.runs == 3 and s.complete for s in r.summaries)
    assert [t.seed for t in r.trials[:3]] == [7, 8, 9]


def test_curves_monotone(small_result):
    for t in small_result.trials:
        e = [p[0] for p in t.curve]
        f = [p[1] for p in t.curve]
        assert all(np.diff(e) > 0) and all(np.diff(f) <= 0)
        assert f[-1] == t.fbest and e[-1] == t.evaluations


def test_summary_matches_two_pass_oracle(small_result):
    for s in small_result.summaries:
        fb = [t.fbest for t in small_result.trials if (t.benchmark, t.algorithm) == (s.benchmark, s.algorithm)]
        mean, std = two_pass_mean_std(fb)
        assert s.objval_mean == pytest.approx(mean, rel=1e-12, abs=1e-300)
        assert s.objval_std == pytest.approx(std, rel=1e-12, abs=1e-300)


@settings(max_examples=60)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_aggregation_oracle_property(values):
    (row,) = summarize([trial(v, seed=i) for i, v in enumerate(values)])
    mean, std = two_pass_mean_std(values)
    assert row.objval_mean == pytest.approx(mean, rel=1e-12, abs=1e-9)
    assert row.objval_std == pytest.approx(std, rel=1e-12, abs=1e-9)


def test_single_run_has_zero_std():
    (row,) = summarize([trial(3.0)])
    assert row.objval_std == 0.0 and row.runs == 1


def test_esta_sphere_plan():
    r = run_experiment(ExperimentPlan(benchmarks=("sphere",), dims=(20,), runs=30))
    assert r.summaries[0].objval_mean <= 1e-12


def test_failures_are_recorded_not_fatal():
    rows = summarize([trial(1.0)], [RunFailure("sphere", 2, "esta", 1, "boom"),
                                    RunFailure("trid", 2, "esta", 1, "boom")])
    assert rows[0].runs == 1 and rows[0].failed == 1 and not rows[0].complete
    assert rows[1].runs == 0 and math.isnan(rows[1].objval_mean)


def test_parallel_matches_serial():
    plan = dict(benchmarks=("griewank",), dims=(2,), algorithms=("esta",), runs=4, base_seed=3)
    serial = run_experiment(ExperimentPlan(**plan))
    par = run_experiment(ExperimentPlan(workers=2, **plan))
    assert [t.fbest for t in serial.trials] == [t.fbest for t in par.trials]
    assert [t.curve for t in serial.trials] == [t.curve for t in par.trials]


def test_final_grad_norm_flags_kink():
    p = make_benchmark("ackley", 4)
    g, flag = final_grad_norm(p, np.zeros(4))
    assert flag == "kink" and g < 1e-6
    g, flag = final_grad_norm(p, np.full(4, 0.5))
    assert flag == "" and g > 0


# rank-sum test

def test_wilcoxon_identical_samples():
    r = wilcoxon_rank_sum([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert r.verdict == "no_difference" and r.p_value == 1.0
    r = wilcoxon_rank_sum([5.0] * 4, [5.0] * 6)
    assert r.verdict == "no_difference" and r.p_value == 1.0
    with pytest.raises(DegenerateSamples):
        rank_sum_z([5.0] * 4, [5.0] * 6)


def test_wilcoxon_minimal_rank_sum_example():
    # the normal approximation gives p = 0.081 here; the exact permutation p is 0.1
    r = wilcoxon_rank_sum([1, 2, 3], [10, 11, 12])
    assert r.statistic == 6.0
    assert exact_rank_sum_p([1, 2, 3], [10, 11, 12]) == (0.1, 6.0)
    assert r.p_value == pytest.approx(0.0809, abs=1e-4)
    assert r.verdict == "no_difference"


def test_wilcoxon_large_shift():
    a = np.random.default_rng(0).uniform(0, 1e-3, 30)
    r = wilcoxon_rank_sum(a, a + 100)
    assert r.verdict == "a_better" and r.p_value < 1e-6
    sub_a, sub_b = a[:10], a[:10] + 100
    assert exact_rank_sum_p(sub_a, sub_b)[0] == pytest.approx(2 / 184_756)
    assert wilcoxon_rank_sum(sub_a, sub_b).verdict == "a_better"
    assert wilcoxon_rank_sum(a + 100, a).verdict == "b_better"


def test_wilcoxon_matches_scipy_asymptotic():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = np.round(rng.normal(size=rng.integers(3, 30)), 1)
        b = np.round(rng.normal(size=rng.integers(3, 30)) + 0.5, 1)
        ref = mannwhitneyu(a, b, method="asymptotic", use_continuity=True).pvalue
        assert wilcoxon_rank_sum(a, b).p_value == pytest.approx(ref, rel=1e-10)


def test_midranks_oracle_agrees_with_scipy():
    from scipy.stats import rankdata

    v = [3.0, 1.0, 3.0, 2.0, 3.0, 1.0]
    assert midranks(v) == list(rankdata(v))


samples = st.lists(st.integers(-50, 50), min_size=1, max_size=12)


@settings(max_examples=80)
@given(samples, samples)
def test_wilcoxon_symmetry(a, b):
    ra, rb = wilcoxon_rank_sum(a, b), wilcoxon_rank_sum(b, a)
    assert ra.p_value == pytest.approx(rb.p_value, rel=1e-12)
    flip = {"a_better": "b_better", "b_better": "a_better", "no_difference": "no_difference"}
    assert rb.verdict == flip[ra.verdict]


@settings(max_examples=80)
@given(samples, samples, st.integers(-1000, 1000))
def test_wilcoxon_shift_and_monotone_invariance(a, b, c):
    base = wilcoxon_rank_sum(a, b)
    shifted = wilcoxon_rank_sum(np.add(a, c), np.add(b, c))
    warped = wilcoxon_rank_sum(np.exp(np.divide(a, 10)), np.exp(np.divide(b, 10)))
    for r in (shifted, warped):
        assert r.verdict == base.verdict and r.p_value == pytest.approx(base.p_value, rel=1e-12)


def test_wilcoxon_input_validation():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1.0])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1.0], [np.nan])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1.0], [2.0], significance=1.5)


# export

def test_csv_export_layout(tmp_path, small_result):
    r = small_result
    export_results(r.trials, r.summaries, "csv", tmp_path)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(SUMMARY_HEADER)
    assert ",".join(rows[0]) == "benchmark,dim,algorithm,objval_mean,objval_std,gradnorm_mean,evals_mean,time_mean"
    assert len(rows) == 1 + len(r.summaries)
    for cell in rows[1][3:]:
        mant, exp = cell.split("e")
        assert len(mant.split(".")[1]) == 2 and exp[0] in "+-"
    back = load_summary(tmp_path / "summary.csv")
    assert [(s.benchmark, s.dim, s.algorithm) for s in back] == [(s.benchmark, s.dim, s.algorithm) for s in r.summaries]
    assert back[0].objval_mean == float("%.2e" % r.summaries[0].objval_mean)
    recs = load_records(tmp_path / "records.csv")
    assert [t.fbest for t in recs] == [t.fbest for t in r.trials]
    curves = sorted((tmp_path / "curves").iterdir())
    assert len(curves) == len(r.trials)
    first = load_curve(tmp_path / "curves" / "sphere_3_esta_seed7.csv")
    assert first == r.trials[0].curve


def test_json_round_trip(tmp_path, small_result):
    r = small_result
    export_results(r.trials, r.summaries, "json", tmp_path)
    assert load_summary(tmp_path / "summary.json") == r.summaries
    recs = load_records(tmp_path / "records.json")
    assert recs == [Trial(**{**t.__dict__, "curve": []}) for t in r.trials]
    assert load_curve(tmp_path / "curves" / "rastrigin_3_exsta_seed9.json") == r.trials[-1].curve


def test_json_writes_null_for_missing_gradient(tmp_path):
    t = trial(1.0)
    t.grad_norm = math.nan
    export_results([t], summarize([t]), "json", tmp_path)
    assert json.loads((tmp_path / "records.json").read_text())[0]["grad_norm"] is None
    assert math.isnan(load_records(tmp_path / "records.json")[0].grad_norm)


def test_failures_file(tmp_path):
    f = RunFailure("sphere", 2, "esta", 1, "boom")
    paths = export_results([trial(1.0)], summarize([trial(1.0)], [f]), "csv", tmp_path, [f])
    assert tmp_path / "failures.csv" in paths
    assert "boom" in (tmp_path / "failures.csv").read_text()


def test_export_errors(tmp_path):
    with pytest.raises(ValueError):
        export_results([], [], "xml", tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        export_results([trial(1.0)], summarize([trial(1.0)]), "csv", blocker / "sub")


def test_write_curve_formats(tmp_path):
    c = [(1, 3.0), (100, 2.5), (250, 2.5)]
    assert load_curve(write_curve(tmp_path / "c.csv", c)) == c
    assert load_curve(write_curve(tmp_path / "c.json", c)) == c


def test_exports_are_deterministic(tmp_path, small_result):
    again = run_experiment(ExperimentPlan(**SMALL))
    export_results(small_result.trials, small_result.summaries, "csv", tmp_path / "a")
    export_results(again.trials, again.summaries, "csv", tmp_path / "b")

    def drop_time(path):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        keep = [i for i, h in enumerate(rows[0]) if h not in ("time_mean", "wall_time")]
        return [[r[i] for i in keep] for r in rows]

    for name in ("summary.csv", "records.csv"):
        assert drop_time(tmp_path / "a" / name) == drop_time(tmp_path / "b" / name)
    for f in (tmp_path / "a" / "curves").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "curves" / f.name).read_bytes()
