from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from cfsurv.data import INTERCEPT, Dataset, ObservedRecord
from cfsurv.errors import ValidationError


def _small_dataset() -> Dataset:
    return Dataset(
        y=[0.5, 1.2, -0.3, 2.0],
        delta=[1, 0, 0, 0],
        xi=[0, 1, 0, 0],
        x=np.column_stack([np.ones(4), [0.1, -0.2, 0.3, 1.0]]),
        w_tilde=[0, 1, 1, 0],
        z=[0, 1, 1, 1],
        truth=pd.DataFrame({"v": [0.1, 0.2, 0.3, 0.4]}),
    )


def test_derived_columns() -> None:
    data = _small_dataset()
    assert len(data) == data.n == 4
    np.testing.assert_array_equal(data.admin, [0, 0, 1, 1])
    assert data.has_admin_censoring
    assert data.w.shape == (4, 3)
    assert data.covariate_names == (INTERCEPT, "x1")
    assert data.event_counts() == {"T": 1, "C": 1, "A": 2}


def test_records_carry_one_subject() -> None:
    data = _small_dataset().with_control(np.array([0.0, 1.0, 2.0, 3.0]))
    rec = data.record(2)
    assert isinstance(rec, ObservedRecord)
    assert rec.admin == 1
    assert rec.v == pytest.approx(2.0)
    np.testing.assert_allclose(rec.w, [1.0, 0.3, 1.0])
    assert len(list(data.records())) == 4


@pytest.mark.parametrize(
    "changes",
    [
        {"delta": [1, 1, 0, 0], "xi": [0, 1, 0, 0]},
        {"delta": [2, 0, 0, 0]},
        {"y": [0.5, np.nan, 0.1, 0.2]},
        {"z": [0, 1, 1]},
    ],
)
def test_invalid_columns_rejected(changes: dict) -> None:
    base = dict(
        y=[0.5, 1.2, -0.3, 2.0],
        delta=[1, 0, 0, 0],
        xi=[0, 1, 0, 0],
        x=np.column_stack([np.ones(4), [0.1, -0.2, 0.3, 1.0]]),
        w_tilde=[0, 1, 1, 0],
        z=[0, 1, 1, 1],
    )
    base.update(changes)
    with pytest.raises(ValidationError):
        Dataset(**base)


def test_record_validation() -> None:
    with pytest.raises(ValidationError):
        ObservedRecord(y=1.0, delta=1, xi=1, x=np.ones(2), w_tilde=0.0, z=0.0)


def test_true_control_and_subset() -> None:
    data = _small_dataset()
    np.testing.assert_allclose(data.true_control(), [0.1, 0.2, 0.3, 0.4])
    sub = data.subset([1, 3])
    assert sub.n == 2
    np.testing.assert_allclose(sub.true_control(), [0.2, 0.4])
    with pytest.raises(ValidationError):
        Dataset(y=[1.0], delta=[1], xi=[0], x=[[1.0]], w_tilde=[0.0], z=[0.0]).true_control()


def test_frame_conversion_keeps_truth_aside() -> None:
    data = _small_dataset()
    frame = data.to_frame(include_truth=True)
    assert list(frame.columns) == ["y", "delta", "xi", "x1", "w_tilde", "z", "true_v"]
    back = Dataset.from_frame(frame, covariates=["x1"])
    np.testing.assert_allclose(back.x, data.x)
    np.testing.assert_allclose(back.true_control(), data.true_control())
    assert back.v is None
    with pytest.raises(ValidationError):
        Dataset.from_frame(frame.drop(columns=["z"]), covariates=["x1"])
