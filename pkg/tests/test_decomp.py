import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmuid import schemas
from pmuid.decomp import (
    BOUND_SLACK,
    ErrorCertificate,
    RowId,
    build_col_id,
    build_row_id,
    build_two_sided_id,
    certify,
    id_from_dict,
    id_to_dict,
    reconstruct_entry,
)
from pmuid.errors import DegeneracyError, ParameterError
from pmuid.linalg_core import DataMatrix, compute_svd, spectral_norm
from pmuid.selection import PilotSet, deim_select, qdeim_select, random_select

from conftest import low_rank

SHAPES = [(10, 30), (30, 10), (20, 20)]


def test_rank_one_row_and_column():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((6, 1)) @ rng.standard_normal((1, 9))
    tol = 1e-8 * np.linalg.norm(Y)
    assert np.linalg.norm(build_row_id(Y, [3]).reconstruct() - Y) <= tol
    assert np.linalg.norm(build_col_id(Y, [5]).reconstruct() - Y) <= tol


def test_row_id_hand_example():
    Y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    rid = build_row_id(Y, [0, 1])
    assert np.allclose(rid.Z, Y)
    assert np.allclose(rid.reconstruct(), Y)


def test_pilots_reproduce_themselves():
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((12, 25))
    S, T = [7, 2, 9], [4, 20, 11]
    rid = build_row_id(Y, S)
    assert np.allclose(rid.reconstruct()[S], Y[S], rtol=1e-8, atol=1e-8 * np.abs(Y).max())
    cid = build_col_id(Y, T)
    assert np.allclose(cid.reconstruct()[:, T], Y[:, T], rtol=1e-8, atol=1e-8 * np.abs(Y).max())


def test_transpose_duality():
    rng = np.random.default_rng(2)
    Y = rng.standard_normal((8, 14))
    T = [1, 5, 9]
    a = build_col_id(Y, T).reconstruct()
    b = build_row_id(Y.T, T).reconstruct().T
    assert np.abs(a - b).max() <= 1e-10


def test_two_sided_exact_rank():
    rng = np.random.default_rng(3)
    Y = low_rank(rng, 10, 15, 3)
    S, T = [0, 4, 8], [2, 6, 13]
    assert abs(np.linalg.det(Y[np.ix_(S, T)])) > 1e-8
    err = np.linalg.norm(build_two_sided_id(Y, S, T).reconstruct() - Y)
    assert err <= 1e-8 * np.linalg.norm(Y)


def test_two_sided_all_rows_and_cols():
    Y = np.random.default_rng(4).standard_normal((4, 4))
    assert np.allclose(build_two_sided_id(Y, range(4), range(4)).reconstruct(), Y)


def test_two_sided_size_mismatch():
    with pytest.raises(ParameterError):
        build_two_sided_id(np.eye(4), [0, 1], [0])


def test_dependent_pilots_named_by_label():
    Y = DataMatrix(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 0.0]]),
                   stream_labels=("bus-a", "bus-b", "bus-c"))
    with pytest.raises(DegeneracyError, match="bus-b"):
        build_row_id(Y, [0, 1])
    with pytest.raises(DegeneracyError):
        build_two_sided_id(Y, [0, 1], [0, 2])


def test_reconstruct_entry():
    rng = np.random.default_rng(5)
    Y = low_rank(rng, 9, 30, 3)
    S = deim_select(compute_svd(Y).U)
    rid = build_row_id(Y, S)
    samples = Y[list(S.indices), 7]
    for k, i in enumerate(S.indices):
        assert reconstruct_entry(rid, samples, i) == pytest.approx(samples[k], rel=1e-8, abs=1e-10)
    j = next(i for i in range(9) if i not in S.indices)
    assert reconstruct_entry(rid, samples, j) == pytest.approx(Y[j, 7], rel=1e-8, abs=1e-10)


def test_reconstruct_entry_arithmetic():
    rid = RowId(PilotSet([0, 1], 2), np.array([[0.5, 0.5], [0.0, 0.0]]), np.eye(2))
    assert reconstruct_entry(rid, [2.0, 4.0], 0) == pytest.approx(3.0)
    assert reconstruct_entry(rid, [2.0, 4.0], 1) == 0.0
    with pytest.raises(ParameterError):
        reconstruct_entry(rid, [2.0], 0)


def test_certify_exact_rank():
    rng = np.random.default_rng(6)
    Y = low_rank(rng, 8, 12, 3)
    svd = compute_svd(Y)
    S = deim_select(svd.U)
    cert = certify(svd, S)
    assert cert.sigma_next == 0 and cert.upper_bound == 0
    assert spectral_norm(Y - build_row_id(Y, S).reconstruct()) <= 1e-8 * svd.sigma(1)


def test_certify_random_20x40_k4():
    Y = np.random.default_rng(7).standard_normal((20, 40))
    svd = compute_svd(Y)
    S = deim_select(svd.U[:, :4])
    cert = certify(svd, S)
    err = spectral_norm(Y - build_row_id(Y, S).reconstruct())
    assert cert.lower_bound - 1e-10 <= err <= cert.upper_bound + 1e-10
    assert cert.upper_bound == pytest.approx(cert.eta_S * svd.sigma(5))


def test_certify_rejects_bad_arguments():
    svd = compute_svd(np.random.default_rng(8).standard_normal((5, 6)))
    with pytest.raises(ParameterError):
        certify(svd)
    with pytest.raises(ParameterError):
        certify(svd, PilotSet([0, 1], 5), PilotSet([0], 6, "columns"))
    with pytest.raises(DegeneracyError):
        certify(compute_svd(np.ones((3, 3))), PilotSet([0, 1], 3))


def _pilots(svd, K, strategy, axis, seed):
    basis = svd.U if axis == "rows" else svd.V
    if strategy == "deim":
        return deim_select(basis[:, :K])
    if strategy == "qdeim":
        return qdeim_select(basis[:, :K])
    return random_select(basis.shape[0], K, seed)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(SHAPES), st.integers(1, 5),
       st.sampled_from(["deim", "qdeim", "random"]))
def test_sandwich_property(seed, shape, K, strategy):
    Y = np.random.default_rng(seed).standard_normal(shape)
    svd = compute_svd(Y)
    slack = BOUND_SLACK * svd.sigma(1)
    S = _pilots(svd, K, strategy, "rows", seed)
    T = _pilots(svd, K, strategy, "columns", seed + 1)
    try:
        cert = certify(svd, S, T)
    except DegeneracyError:
        return  # random pick with a singular submatrix
    sigma = svd.sigma_next(K)
    row = spectral_norm(Y - build_row_id(Y, S).reconstruct())
    col = spectral_norm(Y - build_col_id(Y, T).reconstruct())
    two = spectral_norm(Y - build_two_sided_id(Y, S, T).reconstruct())
    assert sigma - slack <= row <= cert.eta_S * sigma + slack
    assert sigma - slack <= col <= cert.eta_T * sigma + slack
    assert sigma - slack <= two <= cert.upper_bound + slack


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_weights_are_least_squares_optimal(seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((7, 12))
    S = [0, 3, 5]
    rid = build_row_id(Y, S)
    base = np.linalg.norm(Y - rid.Z @ rid.R_S)
    for i, j in [(1, 0), (2, 2), (6, 1)]:
        for d in (1e-3, -1e-3):
            Z = np.array(rid.Z)
            Z[i, j] += d
            assert np.linalg.norm(Y - Z @ rid.R_S) >= base


def test_reconstruction_rank_at_most_k():
    rng = np.random.default_rng(9)
    Y = rng.standard_normal((10, 16))
    S, T = [1, 4, 7], [0, 5, 9]
    for M in (build_row_id(Y, S).reconstruct(), build_col_id(Y, T).reconstruct(),
              build_two_sided_id(Y, S, T).reconstruct()):
        assert compute_svd(M, 1e-10).rank <= 3


@pytest.mark.parametrize("variant", ["row", "column", "two-sided"])
def test_id_document_round_trip(variant):
    rng = np.random.default_rng(10)
    Y = rng.standard_normal((6, 9))
    svd = compute_svd(Y)
    S, T = PilotSet([1, 3], 6), PilotSet([0, 4], 9, "columns")
    model = {"row": lambda: build_row_id(Y, S), "column": lambda: build_col_id(Y, T),
             "two-sided": lambda: build_two_sided_id(Y, S, T)}[variant]()
    cert = certify(svd, S if variant != "column" else None, T if variant != "row" else None)
    doc = id_to_dict(model, cert, {"K": 2, "tau": None}, include_factors=True)
    doc = json.loads(json.dumps(doc))
    schemas.validate(doc, "id")
    back = id_from_dict(doc)
    assert back.variant == variant
    assert np.array_equal(back.weights, model.weights)
    assert np.allclose(back.reconstruct(), model.reconstruct())
    assert ErrorCertificate.from_dict(doc["certificate"]) == cert


def test_id_document_labels():
    Y = DataMatrix(np.random.default_rng(11).standard_normal((4, 6)))
    doc = id_to_dict(build_row_id(Y, [2, 0]), labels=Y.stream_labels)
    assert doc["pilots"]["indices"] == [2, 0]
    assert doc["pilots"]["labels"] == ["3", "1"]
