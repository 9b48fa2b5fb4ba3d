import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gatenet import metrics as m


def embed(block):
    C = np.zeros((4, 4), dtype=np.int64)
    block = np.asarray(block)
    C[:len(block), :len(block)] = block
    return C


def test_confusion_examples():
    assert np.array_equal(m.confusion([0, 1, 2, 3], [0, 1, 2, 3]), np.eye(4, dtype=int))
    assert not m.confusion([], []).any()
    C = m.confusion(["N", "V", "V"], ["N", "S", "V"])
    assert C[0, 0] == 1 and C[1, 2] == 1 and C[2, 2] == 1 and C.sum() == 3
    with pytest.raises(ValueError):
        m.confusion([0, 1], [0])
    with pytest.raises(ValueError):
        m.confusion(["Q"], ["N"])


def test_j_index_cases():
    assert m.j_index(np.diag([5, 3, 2, 1])) == 4.0
    all_n = np.zeros((4, 4), int)
    all_n[:, 0] = [10, 4, 3, 1]
    assert m.j_index(all_n) == 0.0
    # SEN_S = 0.5, SEN_V = 1, PPV_S = 1, PPV_V = 0.5
    C = np.array([[10, 0, 0, 0], [0, 2, 2, 0], [0, 0, 2, 0], [0, 0, 0, 1]])
    assert m.sensitivity(C, 1) == 0.5 and m.sensitivity(C, 2) == 1.0
    assert m.ppv(C, 1) == 1.0 and m.ppv(C, 2) == 0.5
    assert m.j_index(C) == pytest.approx(3.0)


def test_kappa_cases():
    assert m.kappa(np.diag([5, 3, 2, 1])) == pytest.approx(1.0)
    all_n = np.zeros((4, 4), int)
    all_n[:, 0] = [10, 4, 3, 1]
    assert m.kappa(all_n) == pytest.approx(0.0)
    assert m.kappa(embed([[40, 10], [20, 30]])) == pytest.approx(0.40)
    assert math.isnan(m.kappa(np.zeros((4, 4))))
    assert math.isnan(m.kappa(embed([[7]])))


def test_kappa_can_be_negative():
    assert m.kappa(embed([[0, 5], [5, 0]])) < 0


def test_jk_cases():
    assert m.jk_index(np.diag([5, 3, 2, 1])) == pytest.approx(1.0)
    all_n = np.zeros((4, 4), int)
    all_n[:, 0] = [10, 4, 3, 1]
    assert m.jk_index(all_n) == pytest.approx(0.0)
    assert 3.0 / 8 + 0.4 / 2 == pytest.approx(0.575)
    assert math.isnan(m.jk_index(np.zeros((4, 4))))


matrices = st.lists(st.integers(0, 50), min_size=16, max_size=16).map(
    lambda v: np.array(v).reshape(4, 4)).filter(lambda C: C.sum() > 0)


@given(matrices, st.permutations(range(4)), st.integers(1, 9))
def test_invariances(C, perm, k):
    pe_degenerate = math.isnan(m.kappa(C))
    assert m.accuracy(k * C) == pytest.approx(m.accuracy(C))
    assert m.j_index(k * C) == pytest.approx(m.j_index(C))
    if not pe_degenerate:
        assert m.kappa(k * C) == pytest.approx(m.kappa(C))
        P = C[np.ix_(perm, perm)]
        assert m.kappa(P) == pytest.approx(m.kappa(C))
        assert m.accuracy(P) == pytest.approx(m.accuracy(C))
    assert 0.0 <= m.j_index(C) <= 4.0


def test_jk_in_unit_interval_random():
    rng = np.random.default_rng(0)
    checked = 0
    for C in rng.integers(0, 30, size=(100_000, 4, 4)):
        C = C + np.diag(rng.integers(0, 60, 4))
        k = m.kappa(C)
        if not k >= 0:
            continue
        jk = m.jk_index(C)
        assert 0.0 <= jk <= 1.0
        checked += 1
    assert checked > 50_000


def test_report_outputs():
    C = embed([[40, 10], [20, 30]])
    rows = {r["metric"]: r["value"] for r in m.report_rows(C)}
    assert rows["kappa"] == pytest.approx(0.4)
    text = m.report_csv(C)
    assert text.splitlines()[0] == "metric,value"
    assert "kappa,0.400000" in text
    assert m.confusion_csv(C).splitlines()[1] == "N,40,10,0,0"
    assert "jk" in m.report_table(C)


def test_report_for_ten_classes():
    rows = {r["metric"]: r["value"] for r in m.report_rows(np.eye(10, dtype=int))}
    assert rows["accuracy"] == 1.0 and rows["SEN_9"] == 1.0
    assert math.isnan(rows["jk_index"])
