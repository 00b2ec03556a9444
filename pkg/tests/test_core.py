import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmatch import (
    ContingencyTable,
    Dataset,
    EstimationError,
    MatchSpec,
    Unit,
    ValidationError,
    conditional_probs,
    contingency_from_partition,
    expand_table,
    estimate_pc,
    gen_example1,
    partition_dataset,
    pc_bounds,
)

from conftest import table


def test_one_unit_per_cell():
    units = [Unit(f"u{x}{y}", (0.0,), x, y) for x in (0, 1) for y in (0, 1)]
    p = partition_dataset(units)
    assert p.sizes == {"A": 1, "B": 1, "C": 1, "D": 1}
    assert p.balanced
    assert [u.cell for u in units] == ["A", "B", "C", "D"]


def test_table1_observational_expansion(table1):
    _, obs = table1
    p = partition_dataset(expand_table(obs))
    assert p.sizes == {"A": 972, "B": 28, "C": 998, "D": 2}
    assert contingency_from_partition(p).counts() == (2, 998, 28, 972)


def test_example1_sizes():
    p = partition_dataset(gen_example1(500, 0.8, 0.6, seed=0))
    assert p.sizes == {"A": 400, "B": 100, "C": 300, "D": 200}
    assert (p.set_a.x == 0).all() and (p.set_a.y == 0).all()
    assert (p.set_d.x == 1).all() and (p.set_d.y == 1).all()


def test_partition_is_exhaustive_and_exclusive():
    data = gen_example1(37, 0.7, 0.45, seed=3)
    p = partition_dataset(data)
    ids = np.concatenate([s.ids for s in (p.set_a, p.set_b, p.set_c, p.set_d)])
    assert len(ids) == len(data)
    assert set(ids) == set(data.ids)


def test_empty_d_table():
    p = partition_dataset([Unit("a", (), 0, 0), Unit("c", (), 1, 0)])
    assert contingency_from_partition(p).n_xy == 0


def test_symmetric_table():
    t = table(5, 5, 5, 5)
    p = partition_dataset(expand_table(t))
    assert contingency_from_partition(p, "experimental") == t


def test_duplicate_id_rejected():
    with pytest.raises(ValidationError, match="duplicate"):
        partition_dataset([Unit("a", (1.0,), 0, 0), Unit("a", (2.0,), 1, 1)])


@pytest.mark.parametrize("x,y", [(2, 0), (0, -1), (1, 0.5)])
def test_non_binary_rejected(x, y):
    with pytest.raises(ValidationError):
        Unit("u", (0.0,), x, y)
    with pytest.raises(ValidationError):
        Dataset(ids=["u"], covariates=[[0.0]], x=[x], y=[y])


def test_ragged_schema_rejected():
    with pytest.raises(ValidationError, match="covariates"):
        partition_dataset([Unit("a", (1.0,), 0, 0), Unit("b", (1.0, 2.0), 1, 1)])


def test_missing_covariate_rejected():
    with pytest.raises(ValidationError, match="missing"):
        Dataset(ids=["a"], covariates=[[np.nan]], x=[0], y=[0])


def test_empty_dataset_rejected():
    with pytest.raises(ValidationError):
        partition_dataset([])


def test_dataset_is_read_only():
    d = gen_example1(5, seed=1)
    with pytest.raises(ValueError):
        d.covariates[0, 0] = 3.0


def test_dataset_indexing():
    d = gen_example1(5, seed=1)
    u = d[0]
    assert isinstance(u, Unit) and u.id == d.ids[0]
    assert len(d[1:3]) == 2
    assert Dataset.from_units(d.units()).ids.tolist() == d.ids.tolist()


def test_conditional_probs_table1(table1):
    exp, _ = table1
    pr = conditional_probs(exp)
    assert pr["p_y_given_x"] == pytest.approx(0.016, abs=1e-15)
    assert pr["p_y_given_x_not"] == pytest.approx(0.014, abs=1e-15)


def test_conditional_probs_table2(table2):
    exp, _ = table2
    pr = conditional_probs(exp)
    assert pr["p_y_given_x"] == pytest.approx(0.30, abs=1e-15)
    assert pr["p_y_given_x_not"] == pytest.approx(0.12, abs=1e-15)


def test_conditional_probs_zero_y_row():
    assert conditional_probs(table(0, 10, 0, 10))["p_y_given_x"] == 0.0


def test_zero_column_names_the_column():
    with pytest.raises(EstimationError, match="column x'"):
        conditional_probs(table(3, 4, 0, 0))
    with pytest.raises(EstimationError, match="column x "):
        conditional_probs(table(0, 0, 3, 4))


@pytest.mark.parametrize("bad", [dict(n_xy=-1), dict(n_xy=1.5), dict(regime="clinical")])
def test_table_validation(bad):
    kw = dict(n_xy=1, n_xy_not=1, n_x_not_y=1, n_x_not_y_not=1)
    kw.update(bad)
    with pytest.raises(ValidationError):
        ContingencyTable(**kw)


def test_all_zero_table_rejected():
    with pytest.raises(ValidationError, match="empty"):
        table(0, 0, 0, 0)


counts = st.integers(min_value=0, max_value=40)


@settings(max_examples=60, deadline=None)
@given(counts, counts, counts, counts)
def test_table_round_trip(d, c, b, a):
    if a + b + c + d == 0:
        return
    t = table(d, c, b, a, "observational")
    p = partition_dataset(expand_table(t))
    assert contingency_from_partition(p) == t
    if t.n_x and t.n_x_not:
        assert conditional_probs(p) == conditional_probs(t)
        pr = conditional_probs(t)
        assert pr["p_y"] == pytest.approx(pr["p_xy"] + pr["p_x_not_y"], abs=1e-15)


def test_covariate_free_dataset_table_level_only():
    data = Dataset(ids=["a", "b", "c", "d"], covariates=None, x=[0, 0, 1, 1], y=[0, 1, 0, 1])
    p = partition_dataset(data)
    assert data.covariates.shape == (4, 0)
    assert pc_bounds(p) == (0.0, 1.0)
    with pytest.raises(ValidationError, match="at least one covariate"):
        estimate_pc(p, MatchSpec())
