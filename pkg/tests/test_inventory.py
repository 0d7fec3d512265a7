import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeloc.geometry import RigidTransform, rot_z
from treeloc.inventory import (GlobalInventory, Inventory, InventoryError, ParseError, TreeRecord, augment_window,
                               parse_inventory, radius_query, serialize_inventory)

FIXTURE = """DFI 1 7
POSE 1.5 -2.0 0.25 1.0 0.0 0.0 0.0
TREE 1 0.0 0.0 1.0 0.5 1.25 0.1 0.3 0
TREE 2 0.6 0.0 0.8 -3.0 2.0 0.0 0.45 0
TREE 5 0.0 0.0 1.0 4.0 -1.0 0.2 0.2 1
"""


def tree(i, x, y, dbh=0.3, cand=False):
    return TreeRecord(i, (0.0, 0.0, 1.0), (x, y), 0.0, dbh, cand)


def random_inventory(n, seed=0):
    r = np.random.default_rng(seed)
    trees = []
    for i in range(n):
        a = r.normal(size=3) * [0.1, 0.1, 1]
        a /= np.linalg.norm(a)
        trees.append(TreeRecord(i, a, r.uniform(-20, 20, 2), r.uniform(-1, 1), r.uniform(0.1, 0.6)))
    return Inventory(3, RigidTransform(rot_z(0.4), [1, 2, 3]), trees)


def test_fixture_round_trip_is_textual_identity():
    inv = parse_inventory(FIXTURE)
    assert serialize_inventory(inv) == FIXTURE
    assert [t.id for t in inv.trees] == [1, 2, 5]
    assert inv.trees[2].candidate


def test_random_inventory_round_trip():
    inv = random_inventory(100)
    again = parse_inventory(serialize_inventory(inv))
    assert again == inv
    assert [t.id for t in again.trees] == list(range(100))


def test_empty_inventory_rejected():
    with pytest.raises(InventoryError):
        parse_inventory("DFI 1 0\nPOSE 0 0 0 1 0 0 0\n")


def test_malformed_line_reports_line_number():
    bad = FIXTURE.replace("TREE 2 0.6", "TREE 2 zz")
    with pytest.raises(ParseError) as e:
        parse_inventory(bad)
    assert e.value.lineno == 4


def test_non_unit_axis_rejected():
    with pytest.raises(InventoryError):
        parse_inventory(FIXTURE.replace("0.6 0.0 0.8", "0.6 0.0 0.9"))


def test_comments_ignored():
    assert parse_inventory("# hi\n" + FIXTURE) == parse_inventory(FIXTURE)


@pytest.mark.parametrize("kw", [dict(dbh=0.0), dict(dbh=5.0), dict(axis=(0, 0, 2))])
def test_tree_invariants(kw):
    base = dict(id=1, axis=(0, 0, 1), center=(0, 0), base_height=0, dbh=0.3)
    base.update(kw)
    with pytest.raises(InventoryError):
        TreeRecord(**base)


def test_duplicate_ids_rejected():
    with pytest.raises(InventoryError):
        Inventory(0, RigidTransform.identity(), [tree(1, 0, 0), tree(1, 1, 1)])


@given(st.integers(0, 10_000), st.floats(0.5, 40), st.floats(-10, 110), st.floats(-10, 110))
def test_radius_query_matches_linear_scan(seed, radius, cx, cy):
    r = np.random.default_rng(seed)
    pts = r.uniform(0, 100, (200, 2))
    g = GlobalInventory([tree(i, *p) for i, p in enumerate(pts)])
    inv = radius_query(g, (cx, cy), radius)
    oracle = {i for i, p in enumerate(pts) if np.hypot(p[0] - cx, p[1] - cy) <= radius}
    assert {t.id for t in inv.trees} == oracle
    for t in inv.trees:
        assert np.allclose(np.add(t.center, (cx, cy)), pts[t.id])
    assert np.allclose(inv.pose.translation, [cx, cy, 0])


def test_radius_query_edge_cases():
    g = GlobalInventory([tree(i, i * 3.0, 0) for i in range(10)])
    assert len(radius_query(g, (10, 0), 1e3)) == 10
    assert len(radius_query(g, (1.5, 0), 1e-9)) == 0
    with pytest.raises(InventoryError):
        radius_query(g, (0, 0), 0.0)


def test_augment_window_threshold_met_returns_input():
    cur = Inventory(0, RigidTransform.identity(), [tree(i, i, 0) for i in range(10)])
    assert augment_window(cur, [], [], min_trees=10) is cur


def test_augment_window_fills_from_history():
    cur = Inventory(0, RigidTransform.identity(), [tree(i, i, 0) for i in range(3)])
    hist = Inventory(1, RigidTransform.identity(), [tree(100 + i, i * 2.0, 5.0) for i in range(10)])
    out = augment_window(cur, [hist], [RigidTransform.identity()], min_trees=8)
    assert len(out) >= 8
    assert out.trees[:3] == cur.trees
    ids = [t.id for t in out.trees]
    assert len(set(ids)) == len(ids)


def test_augment_window_deduplicates_and_uses_trajectory():
    cur = Inventory(0, RigidTransform.identity(), [tree(0, 1.0, 1.0), tree(1, 5, 5)])
    # the history frame is shifted by (1, 1): its origin tree lands on tree 0
    hist = Inventory(1, RigidTransform.identity(), [tree(0, 0.0, 0.0), tree(9, 10.0, 0.0)])
    T = RigidTransform(np.eye(3), [1.0, 1.0, 0.0])
    out = augment_window(cur, [hist], [T], min_trees=10)
    centers = sorted(t.center for t in out.trees)
    assert centers == [(1.0, 1.0), (5.0, 5.0), (11.0, 1.0)]


def test_augment_window_candidates_by_frequency():
    cur = Inventory(0, RigidTransform.identity(), [tree(0, 0, 0)])
    h1 = Inventory(1, RigidTransform.identity(), [tree(10, 3, 3, cand=True), tree(11, 8, 8, cand=True)])
    h2 = Inventory(2, RigidTransform.identity(), [tree(12, 8, 8, cand=True)])
    I = RigidTransform.identity()
    out = augment_window(cur, [h1, h2], [I, I], min_trees=2)
    # the stem seen twice wins the single open slot
    assert len(out) == 2 and out.trees[1].center == (8.0, 8.0)


def test_augment_window_length_mismatch():
    cur = Inventory(0, RigidTransform.identity(), [tree(0, 0, 0)])
    with pytest.raises(ValueError):
        augment_window(cur, [cur], [])
