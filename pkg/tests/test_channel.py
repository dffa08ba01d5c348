import numpy as np
import pytest

from wpaircomp import (
    ChannelSet,
    NumericalError,
    PathLossModel,
    SystemParams,
    dbm_to_watt,
    harvested_power,
    path_loss,
    sample_channels,
)

from conftest import random_psd

MODEL = PathLossModel(k0=1e-3, d0=1.0, alpha0=3.0)


class TestUnits:
    def test_dbm_to_watt(self):
        assert dbm_to_watt(30.0) == pytest.approx(1.0)
        assert dbm_to_watt(0.0) == pytest.approx(1e-3)
        assert dbm_to_watt(-100.0) == pytest.approx(1e-13)


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss(MODEL, 1.0) == pytest.approx(1e-3)

    def test_ten_meters(self):
        assert path_loss(MODEL, 10.0) == pytest.approx(1e-6)

    def test_twenty_meters(self):
        assert path_loss(MODEL, 20.0) == pytest.approx(1.25e-7)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            path_loss(MODEL, 0.0)
        with pytest.raises(ValueError):
            path_loss(MODEL, -3.0)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            PathLossModel(k0=-1.0)
        with pytest.raises(ValueError):
            PathLossModel(alpha0=1.0)


class TestSystemParams:
    def test_slot_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SystemParams(M=2, K=2, P=1.0, sigma2=1.0, alpha1=0.4, alpha2=0.5)

    def test_basic_validation(self):
        with pytest.raises(ValueError):
            SystemParams(M=0, K=2, P=1.0, sigma2=1.0)
        with pytest.raises(ValueError):
            SystemParams(M=2, K=2, P=-1.0, sigma2=1.0)
        with pytest.raises(ValueError):
            SystemParams(M=2, K=2, P=1.0, sigma2=1.0, eta=1.5)


PARAMS = SystemParams(M=4, K=3, P=0.1, sigma2=1e-13)


class TestSampleChannels:
    def test_pure_los_limit(self):
        ch = sample_channels(PARAMS, MODEL, 10.0, kappa=1e16, seed=5)
        expect = np.sqrt(1e-6) * np.ones(4)
        for k in range(3):
            assert np.allclose(ch.H[k], expect, rtol=1e-6)

    def test_determinism(self):
        a = sample_channels(PARAMS, MODEL, [5.0, 10.0, 20.0], kappa=5.0, seed=77)
        b = sample_channels(PARAMS, MODEL, [5.0, 10.0, 20.0], kappa=5.0, seed=77)
        assert np.array_equal(a.H, b.H)
        c = sample_channels(PARAMS, MODEL, [5.0, 10.0, 20.0], kappa=5.0, seed=78)
        assert not np.array_equal(a.H, c.H)

    def test_rayleigh_second_moment(self):
        # kappa = 0: E||h_k||^2 = M * L(d); per-entry |h_i|^2 ~ L*Exp(1)
        draws = 100000 // PARAMS.K
        params = SystemParams(M=4, K=2, P=0.1, sigma2=1e-13)
        l10 = path_loss(MODEL, 10.0)
        vals = []
        for t in range(draws // 50):
            ch = sample_channels(params, MODEL, 10.0, kappa=0.0, seed=1000 + t)
            vals.extend(np.sum(np.abs(ch.H) ** 2, axis=1))
        vals = np.asarray(vals) / (params.M * l10)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - 1.0) <= 3 * se

    def test_rician_norm_contract(self):
        # kappa = 5 statistical contract over 1e4 draws
        params = SystemParams(M=4, K=1, P=0.1, sigma2=1e-13)
        l10 = path_loss(MODEL, 10.0)
        vals = np.empty(10000)
        for t in range(10000):
            ch = sample_channels(params, MODEL, 10.0, kappa=5.0, seed=t)
            vals[t] = np.sum(np.abs(ch.H[0]) ** 2) / (params.M * l10)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - 1.0) <= 3 * se

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            sample_channels(PARAMS, MODEL, -1.0, kappa=5.0, seed=0)
        with pytest.raises(ValueError):
            sample_channels(PARAMS, MODEL, 10.0, kappa=-0.5, seed=0)

    def test_channelset_validation(self):
        with pytest.raises(ValueError):
            ChannelSet(H=np.zeros((2, 3)), distances=[1.0, 1.0])
        with pytest.raises(ValueError):
            ChannelSet(H=np.ones((2, 3)), distances=[1.0])


class TestHarvestedPower:
    def test_identity_unit_channel(self):
        h = np.array([1.0, 0.0], dtype=complex)
        assert harvested_power(np.eye(2, dtype=complex), h, 0.5) == pytest.approx(0.5)

    def test_zero_covariance(self, rng):
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert harvested_power(np.zeros((3, 3), dtype=complex), h, 0.7) == 0.0

    def test_beamformed_covariance_monte_carlo(self, rng):
        # S = P h h^H / ||h||^2 gives eta P ||h||^2; cross-check against the
        # empirical expectation E[|h^H x|^2] with x ~ CN(0, S)
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p, eta = 2.0, 0.8
        s = p * np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
        exact = harvested_power(s, h, eta)
        assert exact == pytest.approx(eta * p * np.linalg.norm(h) ** 2, rel=1e-12)

        w, v = np.linalg.eigh(s)
        root = (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T
        n = 100000
        zeta = (rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))) / np.sqrt(2)
        x = zeta @ root.T  # rows x = root @ zeta, so E[x x^H] = root^2 = S
        samples = eta * np.abs(x @ h.conj()) ** 2
        se = samples.std(ddof=1) / np.sqrt(n)
        assert abs(samples.mean() - exact) <= 3 * se

    def test_linearity_and_monotonicity(self, rng):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s1 = random_psd(rng, 4)
        s2 = s1 + random_psd(rng, 4)  # s2 - s1 is PSD
        assert harvested_power(s2, h, 0.6) >= harvested_power(s1, h, 0.6)
        a, bca = 0.3, 1.7
        lhs = harvested_power(a * s1 + bca * s2, h, 0.6)
        rhs = a * harvested_power(s1, h, 0.6) + bca * harvested_power(s2, h, 0.6)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_materially_complex_rejected(self):
        s = np.array([[1.0, 1.0j], [1.0j, 1.0]])  # not Hermitian
        with pytest.raises(Exception):
            harvested_power(s, np.array([1.0, 1.0]), 0.5)

    def test_internal_error_on_complex_quadratic(self, monkeypatch):
        import wpaircomp.channel as chmod

        # force a complex quadratic form past the Hermitian gate
        monkeypatch.setattr(chmod, "require_hermitian", lambda s: np.asarray(s, dtype=complex))
        s = np.array([[1.0, 0.9j], [0.1j, 1.0]])
        with pytest.raises(NumericalError):
            harvested_power(s, np.array([1.0, 1.0]), 0.5)
