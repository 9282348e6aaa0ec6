from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from oracles import aquifer_oracle
from wtdml.errors import EmptySeries
from wtdml.grid import Grid
from wtdml.wells import (AquiferLabel, WellConfig, classify_aquifer, classify_aquifer_array,
                         pixel_aggregate, process_wells, representative_wtd, sanity_filter)

FIXTURE = Path(__file__).parent / "fixtures" / "aquifer_labels.csv"


def readings(rows):
    return pd.DataFrame(rows, columns=["well_id", "lon", "lat", "date", "wtd_m", "well_depth_m"])


class TestSanity:
    def test_examples(self):
        df = readings([("a", 0.5, 0.5, "2000", -2.0, 10.0),
                       ("b", 0.5, 0.5, "2000", 5000.0, 10.0),
                       ("c", 0.5, 0.5, "2000", 12.3, 10.0),
                       ("d", np.nan, 0.5, "2000", 3.0, 10.0)])
        kept, counts = sanity_filter(df)
        assert kept["well_id"].tolist() == ["c"]
        assert counts == {"missing_coordinates": 1, "non_finite": 0, "negative": 1,
                          "implausible": 1}


class TestClassify:
    @pytest.mark.parametrize("ai,depth,label", [
        (2.0, 100, AquiferLabel.UNCONFINED),
        (1.0, 50, AquiferLabel.CONFINED),
        (1.0, 10, AquiferLabel.UNCONFINED),
        (1.48, 100, AquiferLabel.CONFINED),  # tie on AI uses the wet rule
        (2.0, 241, AquiferLabel.CONFINED),   # depth ties are confined
        (1.0, 19, AquiferLabel.CONFINED),
        (1.0, None, AquiferLabel.UNKNOWN),
    ])
    def test_examples(self, ai, depth, label):
        assert classify_aquifer(ai, depth) is label

    def test_sweep_matches_oracle(self):
        # at least 10^4 points, dense around every threshold
        ai = np.unique(np.concatenate([np.linspace(0, 4, 101), [1.48, np.nextafter(1.48, 2),
                                                               np.nextafter(1.48, 0), 1.47, 1.49, 0.0]]))
        depth = np.unique(np.concatenate([np.linspace(0.5, 500, 101),
                                          [19, 241, np.nextafter(19, 0), np.nextafter(19, 99),
                                           np.nextafter(241, 0), np.nextafter(241, 999),
                                           18.9, 19.1, 240.9, 241.1, 1.0, 300.0]]))
        A, D = np.meshgrid(ai, depth, indexing="ij")
        assert A.size >= 10_000
        got = classify_aquifer_array(A.ravel(), D.ravel())
        want = [aquifer_oracle(a, d) for a, d in zip(A.ravel(), D.ravel())]
        assert list(got) == want
        scalar = [classify_aquifer(a, d).value for a, d in zip(A.ravel()[::37], D.ravel()[::37])]
        assert scalar == want[::37]

    def test_fixture_confusion(self):
        df = pd.read_csv(FIXTURE)
        pred = classify_aquifer_array(df["aridity_index"], df["well_depth_m"])
        agree = pred == df["label"].to_numpy()
        consistent = df["rule_consistent"].to_numpy() == 1
        assert len(df) == 1000
        assert agree[consistent].all()
        assert not agree[~consistent].any()

    @given(st.floats(0, 10), st.floats(0.01, 1000))
    def test_piecewise_constant(self, ai, depth):
        lab = classify_aquifer(ai, depth).value
        assert lab == aquifer_oracle(ai, depth)

    def test_config_overrides(self):
        cfg = WellConfig(aridity_split=1.0, wet_depth_limit=30.0)
        assert classify_aquifer(1.2, 100, cfg) is AquiferLabel.UNCONFINED
        assert classify_aquifer(0.9, 25, cfg) is AquiferLabel.UNCONFINED


class TestAggregation:
    def test_representative(self):
        assert representative_wtd([3.1, 2.0, 8.5]) == 2.0
        assert representative_wtd([4.4]) == 4.4
        with pytest.raises(EmptySeries):
            representative_wtd([])

    @pytest.mark.parametrize("values,expected", [([2, 10], 2), ([1, 5, 9], 5), ([7], 7),
                                                 ([10, 2, 7, 1], 2)])
    def test_pixel_aggregate(self, values, expected):
        assert pixel_aggregate(values) == expected

    def test_pixel_aggregate_empty(self):
        with pytest.raises(EmptySeries):
            pixel_aggregate([])

    @given(st.lists(st.floats(0, 1000), min_size=1, max_size=30))
    def test_bounds(self, vals):
        assert representative_wtd(vals) <= min(vals)
        m = pixel_aggregate(vals)
        assert min(vals) <= m <= max(vals)
        assert m in vals
        assert m == sorted(vals)[(len(vals) - 1) // 2]


def _chain_inputs(seed):
    rng = np.random.default_rng(seed)
    ai = Grid(0.0, 4.0, 1.0, rng.uniform(0.5, 3.0, (4, 4)))
    rows = []
    for w in range(40):
        lon, lat = rng.uniform(0, 4), rng.uniform(0, 4)
        depth = float(rng.choice([5.0, 15.0, 30.0, 100.0, 300.0, np.nan]))
        for k in range(int(rng.integers(1, 4))):
            rows.append((f"w{w}", lon, lat, f"20{k:02d}", float(rng.uniform(-1, 60)), depth))
    return readings(rows), ai


class TestChain:
    def test_pixel_values(self):
        df, ai = _chain_inputs(0)
        pixels, report = process_wells(df, ai)
        assert (pixels["wtd_m"] >= 0).all()
        assert report["wells_kept"] == pixels["n_wells"].sum()
        assert pixels["pixel_id"].is_unique

    @given(st.integers(0, 2**31 - 1))
    def test_order_insensitive(self, seed):
        df, ai = _chain_inputs(seed % 1000)
        a, _ = process_wells(df, ai)
        b, _ = process_wells(df.sample(frac=1.0, random_state=seed % 2**32), ai)
        pd.testing.assert_frame_equal(a, b)

    def test_missing_depth_switch(self):
        df = readings([("a", 0.5, 3.5, "2000", 4.0, np.nan)])
        ai = Grid(0.0, 4.0, 1.0, np.ones((4, 4)))
        dropped, rep = process_wells(df, ai)
        kept, _ = process_wells(df, ai, WellConfig(missing_depth="unconfined"))
        assert len(dropped) == 0 and rep["unknown"] == 1
        assert kept["wtd_m"].tolist() == [4.0] and kept["pixel_id"].tolist() == [0]

    def test_min_then_median(self):
        ai = Grid(0.0, 1.0, 1.0, np.ones((1, 1)))
        df = readings([("a", 0.2, 0.2, "1", 5.0, 10.0), ("a", 0.2, 0.2, "2", 3.0, 10.0),
                       ("b", 0.7, 0.7, "1", 9.0, 10.0),
                       ("c", 0.5, 0.5, "1", 1.0, 10.0), ("c", 0.5, 0.5, "2", 6.0, 10.0)])
        pixels, _ = process_wells(df, ai)
        # well minima 3, 9, 1 -> median 3
        assert pixels["wtd_m"].tolist() == [3.0] and pixels["n_wells"].tolist() == [3]
