#!/usr/bin/env python3
"""Smoke test for the groupwork Python extension.

Build and stage the module first:

    cargo build --release -p groupwork-py
    cp target/release/libgroupwork.so python/groupwork.so

then run `python3 python/smoke_test.py` from the repository root.
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import groupwork


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    # --- games -----------------------------------------------------------
    game = groupwork.Game(3, {
        "1": 1.0, "2": 2.0, "3": 3.0,
        "1,2": 4.0, "1,3": 5.0, "2,3": 6.0,
        "1,2,3": 9.0,
    })
    phi = game.shapley()
    for got, want in zip(phi, [2.0, 3.0, 4.0]):
        approx(got, want)
    approx(sum(phi), game.value([1, 2, 3]))
    assert game.marginal_vector([1, 2, 3]) == [1.0, 3.0, 5.0]

    membership = game.core_contains([2.0, 3.0, 4.0])
    assert membership["contained"] and not membership["violations"]

    core = game.core_is_empty()
    assert not core["empty"]
    inside = game.core_contains(core["certificate"])
    assert inside["contained"]

    majority = groupwork.Game(3, {
        "1": 0.0, "2": 0.0, "3": 0.0,
        "1,2": 1.0, "1,3": 1.0, "2,3": 1.0,
        "1,2,3": 1.0,
    })
    assert majority.core_is_empty()["empty"]
    prop = majority.check_property("additivity")
    assert not prop["holds"] and prop["coalitions"] == ["1", "2"]

    additive = groupwork.Game.additive([2.0, 5.0, 7.0])
    for got, want in zip(additive.shapley(), [2.0, 5.0, 7.0]):
        approx(got, want, 1e-12)
    assert groupwork.Game.unanimity(3).check_property("convexity")["holds"]

    round_trip = groupwork.Game.from_json(game.to_json())
    assert round_trip.shapley() == phi

    # --- variance shares ---------------------------------------------------
    level2, level1 = groupwork.variance_shares(0.47673, 0.58337)
    approx(level2, 0.4497, 5e-4)
    approx(level1, 0.5503, 5e-4)

    # --- datasets and models ----------------------------------------------
    data = groupwork.Dataset.study_shape(13)
    assert data.n_records == 87
    assert data.n_groups == 31
    described = data.describe()
    assert described["group_sizes"] == {"2": 11, "3": 15, "4": 5}

    null_fit = data.fit_model("observed_contribution")
    assert null_fit["fixed"][0]["name"] == "(intercept)"
    assert null_fit["random"]["level2"]["variance"] >= 0.0
    k = len(null_fit["fixed"]) + 2
    approx(null_fit["fit"]["aic"], -2.0 * null_fit["fit"]["loglik"] + 2.0 * k, 1e-8)

    full_fit = data.fit_model("learning_outcome", ["content_engaging"])
    assert full_fit["comparison"]["df"] == 1
    assert full_fit["comparison"]["p_value"] < 0.05

    table = data.screen("observed_contribution", ["content_engaging", "background"])
    flagged = {row["predictor"]: row["flagged"] for row in table["rows"]}
    assert flagged["content_engaging"]

    shapley = data.shapley_per_student()
    team_total = sum(shapley["s1"][s] for s in ("p001", "p002"))
    games = data.games("contribution")
    approx(team_total, games["s1:t01"].value([1, 2]))

    reports = data.stability_reports("opinion")
    assert len(reports) == 31
    assert any(r["core_empty"] for r in reports)

    with tempfile.TemporaryDirectory() as tmp:
        report = data.pipeline(out=tmp, seed=13)
        assert os.path.exists(os.path.join(tmp, "report.json"))
        assert report["table1_descriptives"]["n_records"] == 87
        assert report["table3_final_contribution"]["selected"] == ["content_engaging"]
        assert len(report["shapley_values"]) == 87

        records = os.path.join(tmp, "records.csv")
        ratings = os.path.join(tmp, "ratings.csv")
        data.save(records, ratings)
        reloaded = groupwork.Dataset.load(records, ratings)
        assert reloaded.n_records == 87

    # --- error surfacing ----------------------------------------------------
    try:
        groupwork.Game(2, {"1": 1.0})
    except ValueError as e:
        assert "missing" in str(e)
    else:
        raise AssertionError("expected ValueError for an incomplete game")

    print("groupwork python smoke test: OK")


if __name__ == "__main__":
    main()
