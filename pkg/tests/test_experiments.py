import json

import pytest

from tspqa.experiments import (
    ExperimentReport,
    exp_connection_histograms_by_mcs,
    exp_edge_rank_decay,
    exp_ground_connection_distribution,
    exp_iterative_success,
    exp_subtour_fraction,
)


def test_subtour_fraction_small_n_never_splits():
    rep = exp_subtour_fraction(n=5, count=20)
    assert rep.summary["split_fraction"] == 0.0


def test_subtour_fraction_summary_from_rows():
    rep = exp_subtour_fraction(n=9, count=15, seed=3)
    assert rep.summary["split_instances"] == sum(r["split"] for r in rep.rows)


def test_report_is_byte_reproducible(tmp_path):
    a = exp_ground_connection_distribution(n=9, count=10).to_csv("cmd")
    b = exp_ground_connection_distribution(n=9, count=10).to_csv("cmd")
    assert a == b
    assert a.startswith("# command: cmd\n")


def test_parallel_matches_serial():
    a = exp_subtour_fraction(n=9, count=6, jobs=1)
    b = exp_subtour_fraction(n=9, count=6, jobs=2)
    assert a.rows == b.rows and a.summary == b.summary


def test_report_roundtrip(tmp_path):
    rep = exp_subtour_fraction(n=8, count=5)
    csv_path, json_path = rep.write(tmp_path, "tspqa experiment")
    back = ExperimentReport.from_dict(json.loads(json_path.read_text()))
    assert back.summary == rep.summary
    assert back.summary_table() == rep.summary_table()
    assert csv_path.read_text().startswith("# command: tspqa experiment")


def test_ground_connections_all_even():
    rep = exp_ground_connection_distribution(n=10, count=20)
    assert rep.summary["all_even"]


def test_iterative_success_exact():
    rep = exp_iterative_success(n=8, count=10)
    s = rep.summary["exact"]
    assert 0 <= s["optimal_rate"] <= s["solved_rate"] <= 1
    surv = list(s["optimal_by_iteration"].values())
    assert surv == sorted(surv)
    assert surv[-1] == pytest.approx(s["optimal_rate"])


def test_connection_histograms_keys():
    rep = exp_connection_histograms_by_mcs(n=8, count=5, mcs_grid=(100,), iterations=(1,))
    assert set(rep.summary) == {"exact", "mcs=100"}


def test_edge_rank_full_truncation_covers_everything():
    rep = exp_edge_rank_decay(n_grid=(8,), count=10, L_values=(7,))
    assert rep.summary["8"]["edge_coverage"]["7"] == 1.0
    freq = rep.summary["8"]["rank_frequency"]
    assert sum(freq.values()) == pytest.approx(1.0)
    assert rep.summary["8"]["log_slope"] < 0
