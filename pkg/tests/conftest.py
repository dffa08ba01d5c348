import numpy as np
import pytest

from wpaircomp import PathLossModel, SystemParams, sample_channels


def random_hermitian(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * 0.5 * (a + a.conj().T)


def random_hpd(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * (a @ a.conj().T + 0.1 * np.eye(m))


def random_psd(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * (a @ a.conj().T)


def desk_instance(seed, M=4, K=4, power_dbm=20.0, noise_dbm=-100.0,
                  distances=10.0, kappa=5.0):
    """One physically-scaled test instance (paper-style desk setup)."""
    params = SystemParams(
        M=M, K=K,
        P=10 ** ((power_dbm - 30) / 10),
        sigma2=10 ** ((noise_dbm - 30) / 10),
    )
    model = PathLossModel()
    channels = sample_channels(params, model, distances, kappa, seed)
    return params, channels


def unit_instance(rng, M=2, K=2, P=1.0, sigma2=0.5):
    """Order-one instance for oracle comparisons with bounded grids."""
    params = SystemParams(M=M, K=K, P=P, sigma2=sigma2)
    H = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    from wpaircomp import ChannelSet

    channels = ChannelSet(H=H, distances=np.full(K, 1.0), rician_kappa=0.0)
    return params, channels


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
