import numpy as np
import pytest

from geoest.errors import ContractError, DegenerateScaleError
from geoest.types import (
    EuclideanBall,
    FullSpace,
    GaussianNoise,
    Identity,
    L1Ball,
    LinearCombination,
    LogisticNoise,
    LowRankCone,
    ModelParams,
    OddMonomial,
    Sign,
    SparseCone,
    contains,
    eval_link,
    mat_to_vec,
    noise_variance,
    vec_to_mat,
)


def test_contains_examples():
    assert contains(SparseCone(4, 2), np.array([1.0, 0.0, 3.0, 0.0]), 0.0)
    assert contains(L1Ball(2, 1.0), np.array([0.5, 0.5]), 0.0)
    assert not contains(SparseCone(3, 1), np.array([1.0, 1e-3, 0.0]), 1e-9)
    assert contains(FullSpace(2), np.array([1e9, -1e9]))
    assert contains(EuclideanBall(2, 1.0), np.array([0.6, 0.8]), 1e-9)
    assert not contains(EuclideanBall(2, 1.0), np.array([0.9, 0.9]), 1e-9)


def test_contains_low_rank():
    rng = np.random.default_rng(0)
    mat = np.outer(rng.standard_normal(4), rng.standard_normal(3))
    fs = LowRankCone(4, 3, 1)
    assert contains(fs, mat_to_vec(mat))
    assert not contains(LowRankCone(4, 3, 1), mat_to_vec(mat + rng.standard_normal((4, 3))))


def test_contains_dimension_mismatch():
    with pytest.raises(ContractError):
        contains(SparseCone(4, 2), np.ones(3))
    with pytest.raises(ContractError):
        contains(SparseCone(4, 2), np.ones(4), tol=-1.0)


def test_vec_mat_roundtrip_column_major():
    mat = np.array([[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]])
    v = mat_to_vec(mat)
    assert np.array_equal(v, np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
    assert np.array_equal(vec_to_mat(v, 2, 3), mat)


def test_eval_link_examples():
    assert eval_link(Sign(), -2.5) == -1.0
    assert eval_link(Sign(), 0.0) == 0.0
    assert eval_link(OddMonomial(3), 2.0) == 8.0
    combo = LinearCombination((1.0, 2.0), (Identity(), Sign()))
    assert eval_link(combo, 0.5) == pytest.approx(2.5)
    assert np.allclose(eval_link(combo, np.array([0.5, -0.5])), [2.5, -2.5])


@pytest.mark.parametrize(
    "link",
    [
        Identity(),
        Sign(),
        OddMonomial(3),
        OddMonomial(7),
        LinearCombination((0.5, 2.0, 1.5), (Identity(), Sign(), OddMonomial(3))),
    ],
)
def test_links_odd_and_monotone(link):
    rng = np.random.default_rng(11)
    u = rng.standard_normal(1000) * 2.0
    fu = eval_link(link, u)
    fmu = eval_link(link, -u)
    if isinstance(link, Sign):
        assert np.array_equal(fu, -fmu)
    else:
        assert np.all(np.abs(fu + fmu) <= 1e-12 * (1.0 + np.abs(fu)))
    order = np.argsort(u)
    assert np.all(np.diff(fu[order]) >= -1e-12)


def test_link_validation():
    with pytest.raises(ContractError):
        OddMonomial(2)
    with pytest.raises(ContractError):
        OddMonomial(-3)
    with pytest.raises(ContractError):
        LinearCombination((1.0, -2.0), (Identity(), Sign()))
    with pytest.raises(ContractError):
        LinearCombination((), ())


def test_set_validation():
    with pytest.raises(ContractError):
        SparseCone(4, 5)
    with pytest.raises(ContractError):
        LowRankCone(3, 4, 4)
    with pytest.raises(ContractError):
        L1Ball(3, 0.0)
    with pytest.raises(ContractError):
        FullSpace(0)


def _random_member(fs, rng):
    if isinstance(fs, SparseCone):
        v = np.zeros(fs.n)
        support = rng.choice(fs.n, fs.s, replace=False)
        v[support] = rng.standard_normal(fs.s)
        return v
    if isinstance(fs, LowRankCone):
        return mat_to_vec(
            rng.standard_normal((fs.d1, fs.r)) @ rng.standard_normal((fs.r, fs.d2))
        )
    if isinstance(fs, L1Ball):
        g = rng.standard_normal(fs.n)
        return g * (fs.radius * rng.uniform() / np.abs(g).sum())
    if isinstance(fs, EuclideanBall):
        g = rng.standard_normal(fs.n)
        return g * (fs.radius * rng.uniform() / np.linalg.norm(g))
    return rng.standard_normal(fs.n)


@pytest.mark.parametrize(
    "fs",
    [
        SparseCone(12, 3),
        LowRankCone(5, 4, 2),
        L1Ball(10, 1.5),
        EuclideanBall(8, 2.0),
        FullSpace(6),
    ],
)
def test_star_shape_by_sampling(fs):
    rng = np.random.default_rng(23)
    for _ in range(200):
        v = _random_member(fs, rng)
        assert contains(fs, v, 1e-9)
        for lam in rng.uniform(0.0, 1.0, size=20):
            assert contains(fs, lam * v, 1e-9)


@pytest.mark.parametrize("fs", [SparseCone(12, 3), LowRankCone(5, 4, 2), FullSpace(6)])
def test_cone_scale_invariance(fs):
    rng = np.random.default_rng(29)
    for _ in range(50):
        v = _random_member(fs, rng)
        for t in (0.01, 0.5, 3.0, 100.0):
            assert contains(fs, t * v, 1e-9)


def test_noise_variance():
    assert noise_variance(None) == 0.0
    assert noise_variance(GaussianNoise(2.0)) == 4.0
    assert noise_variance(LogisticNoise(1.0)) == pytest.approx(np.pi**2 / 3.0)
    with pytest.raises(ContractError):
        GaussianNoise(-1.0)
    with pytest.raises(ContractError):
        LogisticNoise(0.0)


def test_model_params_lambda_guard():
    params = ModelParams(mu=0.0, sigma=1.0, eta=1.0, lam=None)
    with pytest.raises(DegenerateScaleError):
        params.require_lambda()
    assert ModelParams(mu=0.5, sigma=1.0, eta=1.0, lam=2.0).require_lambda() == 2.0
