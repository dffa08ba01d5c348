import numpy as np
import pytest

from wpaircomp import (
    ChannelSet,
    JointOptions,
    SystemParams,
    compute_mse,
    empirical_mse,
    kkt_audit,
    phase_align,
    receive_beamformer,
    solve_joint,
)
from wpaircomp.aircomp import BeamformingSolution, beamformer_residual
from wpaircomp.dual import DualPoint, channel_gains

from conftest import desk_instance, unit_instance


def solution_feasible(solution, channels, params, rtol=1e-8, check_alignment=True):
    H = channels.H
    used = params.alpha2 * np.abs(solution.b) ** 2
    harvested = params.alpha1 * params.eta * np.real(
        np.einsum("ki,ij,kj->k", H.conj(), solution.S, H)
    )
    if np.any(used > harvested * (1 + rtol) + 1e-300):
        return False
    if np.trace(solution.S).real > params.P * (1 + rtol):
        return False
    if np.linalg.eigvalsh(solution.S)[0] < -rtol * params.P:
        return False
    if check_alignment:
        wh = H @ np.conj(solution.w)
        eff = wh * solution.b
        mask = np.abs(wh) > 0
        if np.any(np.abs(eff.imag[mask]) > 1e-9 * (1.0 + np.abs(eff[mask]))):
            return False
    return True


class TestPhaseAlign:
    def test_already_aligned(self, rng):
        w = np.array([1.0 + 0j, 0.0])
        h = np.array([2.0 + 0j, 1.0 + 0j])  # w^H h = 2, real positive
        assert phase_align(w, h, 0.7) == pytest.approx(0.7)

    def test_quarter_turn(self):
        # w^H h = i -> b = -i and w^H h b = 1
        w = np.array([1.0 + 0j])
        h = np.array([1.0j])
        b = phase_align(w, h, 1.0)
        assert b == pytest.approx(-1.0j)
        assert np.vdot(w, h) * b == pytest.approx(1.0 + 0.0j)

    def test_effective_gain_real(self, rng):
        for _ in range(20):
            w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            bt = float(rng.uniform(0, 2))
            b = phase_align(w, h, bt)
            eff = np.vdot(w, h) * b
            assert abs(eff.imag) <= 1e-12 * max(abs(eff), 1e-300)
            assert eff.real == pytest.approx(abs(np.vdot(w, h)) * bt)

    def test_zero_gain(self):
        w = np.array([1.0 + 0j, 0.0])
        h = np.array([0.0, 1.0 + 0j])
        assert phase_align(w, h, 1.0) == 0.0


class TestReceiveBeamformer:
    def test_single_device_basis_channel(self):
        channels = ChannelSet(
            H=np.array([[1.0 + 0j, 0.0]]), distances=[1.0]
        )
        w = receive_beamformer(np.array([1.0 + 0j]), channels, 1.0)
        assert np.allclose(w, [0.5, 0.0])

    def test_zero_coefficients(self, rng):
        _, channels = unit_instance(rng, M=3, K=2)
        w = receive_beamformer(np.zeros(2, dtype=complex), channels, 1.0)
        assert np.allclose(w, 0.0)

    def test_normal_equation_residual(self, rng):
        for _ in range(10):
            params, channels = unit_instance(rng, M=4, K=3)
            b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            w = receive_beamformer(b, channels, params.sigma2)
            assert beamformer_residual(w, b, channels, params.sigma2) <= 1e-10

    def test_local_minimality_probe(self, rng):
        params, channels = unit_instance(rng, M=3, K=3)
        b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        w = receive_beamformer(b, channels, params.sigma2)

        def objective(wv):
            wh = channels.H @ np.conj(wv)
            return float(
                np.sum(np.abs(wh * b - 1.0) ** 2)
                + params.sigma2 * np.real(np.vdot(wv, wv))
            )

        base = objective(w)
        for _ in range(1000):
            u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            u /= np.linalg.norm(u)
            eps = 10 ** rng.uniform(-4, -1)
            assert objective(w + eps * u) >= base - 1e-12 * (1 + base)


class TestComputeMse:
    def test_zero_receive_vector(self, rng):
        params, channels = unit_instance(rng, M=3, K=4)
        b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        # every misalignment term is 1 -> MSE = K / K^2 = 1/K
        assert compute_mse(np.zeros(3), b, channels, params.sigma2) == pytest.approx(
            1.0 / 4.0
        )

    def test_perfect_alignment_pure_noise(self, rng):
        params, channels = unit_instance(rng, M=3, K=2)
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        wh = channels.H @ np.conj(w)
        b = 1.0 / wh  # w^H h_k b_k = 1 exactly
        expect = params.sigma2 * np.real(np.vdot(w, w)) / 4.0
        assert compute_mse(w, b, channels, params.sigma2) == pytest.approx(expect)


class TestEmpiricalMse:
    def test_no_transmission(self, rng):
        params, channels = unit_instance(rng, M=3, K=4)
        sol = BeamformingSolution(
            S=np.zeros((3, 3), dtype=complex),
            w=np.zeros(3, dtype=complex),
            b=np.zeros(4, dtype=complex),
            b_tilde=np.zeros(4),
        )
        est, se = empirical_mse(sol, channels, params.sigma2, trials=200000, seed=3)
        # estimate of E[f^2] = 1/K
        assert abs(est - 0.25) <= 3 * se
        assert se > 0

    def test_noiseless_perfect_alignment(self, rng):
        params, channels = unit_instance(rng, M=3, K=2)
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        wh = channels.H @ np.conj(w)
        sol = BeamformingSolution(
            S=np.eye(3, dtype=complex), w=w, b=1.0 / wh, b_tilde=np.abs(1.0 / wh)
        )
        est, _ = empirical_mse(sol, channels, 1e-300, trials=5000, seed=1)
        assert est <= 1e-20

    def test_matches_analytic_across_seeds(self, rng):
        params, channels = unit_instance(rng, M=3, K=3)
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        bt = rng.uniform(0.1, 1.0, 3)
        wh = channels.H @ np.conj(w)
        b = np.conj(wh) / np.abs(wh) * bt
        sol = BeamformingSolution(S=np.eye(3, dtype=complex), w=w, b=b, b_tilde=bt)
        exact = compute_mse(w, b, channels, params.sigma2)
        misses = 0
        for seed in range(30):
            est, se = empirical_mse(
                sol, channels, params.sigma2, trials=100000, seed=seed
            )
            if abs(est - exact) > 3 * se:
                misses += 1
        assert misses <= 1

    def test_deterministic_per_seed_and_chunk_invariant(self, rng):
        params, channels = unit_instance(rng, M=2, K=2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        sol = BeamformingSolution(
            S=np.eye(2, dtype=complex), w=w, b=b, b_tilde=np.abs(b)
        )
        a = empirical_mse(sol, channels, params.sigma2, trials=50000, seed=9)
        bb = empirical_mse(sol, channels, params.sigma2, trials=50000, seed=9)
        assert a == bb
        # chunk size changes the partition but not the draws per chunk index
        c = empirical_mse(
            sol, channels, params.sigma2, trials=50000, seed=9, chunk=65536
        )
        assert a == c

    def test_rademacher_symbols(self, rng):
        params, channels = unit_instance(rng, M=2, K=2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        bt = rng.uniform(0.1, 1.0, 2)
        wh = channels.H @ np.conj(w)
        b = np.conj(wh) / np.abs(wh) * bt
        sol = BeamformingSolution(S=np.eye(2, dtype=complex), w=w, b=b, b_tilde=bt)
        exact = compute_mse(w, b, channels, params.sigma2)
        est, se = empirical_mse(
            sol, channels, params.sigma2, trials=100000, seed=4,
            distribution="rademacher",
        )
        assert abs(est - exact) <= 4 * se

    def test_requires_min_trials(self, rng):
        params, channels = unit_instance(rng)
        sol = BeamformingSolution(
            S=np.eye(2, dtype=complex),
            w=np.ones(2, dtype=complex),
            b=np.ones(2, dtype=complex),
            b_tilde=np.ones(2),
        )
        with pytest.raises(ValueError):
            empirical_mse(sol, channels, 1.0, trials=10)


class TestSolveJoint:
    def test_scalar_closed_form(self):
        params = SystemParams(M=1, K=1, P=1.0, sigma2=1.0, eta=1.0 - 1e-9)
        channels = ChannelSet(H=np.array([[1.0 + 0j]]), distances=[1.0])
        solution, report = solve_joint(params, channels)
        assert report.converged
        # fixed point: b = 1, S = 1, w = 1/2, error = sigma2/(1+sigma2) = 1/2
        assert report.mse_trajectory[-1] == pytest.approx(0.5, abs=1e-6)
        assert abs(solution.b_tilde[0] - 1.0) <= 1e-6
        assert solution.S[0, 0].real == pytest.approx(1.0, abs=1e-6)

    def test_noiseless_limit_perfect_alignment(self, rng):
        params = SystemParams(M=3, K=2, P=100.0, sigma2=1e-14)
        H = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        channels = ChannelSet(H=H, distances=np.ones(2))
        solution, report = solve_joint(params, channels)
        assert report.mse_trajectory[-1] <= 1e-12
        wh = channels.H @ np.conj(solution.w)
        assert np.all(np.abs(wh * solution.b - 1.0) <= 1e-5)

    def test_monotone_trajectory_and_convergence(self):
        for seed in range(6):
            params, channels = desk_instance(seed, distances=[5.0, 10.0, 15.0, 20.0])
            solution, report = solve_joint(params, channels)
            traj = np.asarray(report.mse_trajectory)
            assert np.all(np.diff(traj) <= 1e-9)
            assert report.converged
            assert report.iterations <= 200
            assert solution_feasible(solution, channels, params)

    def test_feasible_at_every_iterate(self):
        params, channels = desk_instance(11, distances=[5.0, 10.0, 15.0, 20.0])
        opts = JointOptions(record_iterates=True)
        _, report = solve_joint(params, channels, opts)
        assert report.iterates is not None and len(report.iterates) >= 2
        for it_sol in report.iterates:
            assert solution_feasible(it_sol, channels, params)

    def test_beamformer_residual_tracked(self):
        params, channels = desk_instance(3)
        _, report = solve_joint(params, channels)
        assert report.beamformer_residual_max <= 1e-10

    def test_beats_random_search(self, rng):
        params, channels = unit_instance(rng, M=2, K=2)
        solution, report = solve_joint(params, channels)
        mse_star = report.mse_trajectory[-1]

        n = 100000
        a = rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2))
        s_all = a @ a.conj().transpose(0, 2, 1)
        tr = np.real(np.trace(s_all, axis1=1, axis2=2))
        s_all *= (rng.uniform(0.05, 1.0, n) * params.P / tr)[:, None, None]
        harvested = params.alpha1 * params.eta * np.real(
            np.einsum("ki,nij,kj->nk", channels.H.conj(), s_all, channels.H)
        )
        caps = np.sqrt(np.maximum(harvested, 0.0) / params.alpha2)
        bt = caps * np.sqrt(rng.uniform(0.0, 1.0, (n, 2)))
        phases = np.exp(2j * np.pi * rng.uniform(0, 1, (n, 2)))
        b_all = bt * phases
        wn = 10 ** rng.uniform(-2, 2, n)
        wdir = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        wdir /= np.linalg.norm(wdir, axis=1, keepdims=True)
        w_all = wdir * wn[:, None]
        wh = w_all.conj() @ channels.H.T  # (n, K): w_n^H h_k
        mis = np.abs(wh * b_all - 1.0) ** 2
        noise = params.sigma2 * wn**2
        mses = (mis.sum(axis=1) + noise) / 4.0
        assert mse_star <= mses.min() + 1e-9

    def test_truncated_inversion_structure(self):
        # slack devices follow channel inversion; active multipliers come
        # with binding energy constraints (dimensionless multiplier units)
        params, channels = desk_instance(21, distances=[5.0, 10.0, 15.0, 20.0])
        solution, report = solve_joint(params, channels)
        dual = report.dual
        gamma = channel_gains(solution.w, channels.H)
        hnorm2 = np.sum(np.abs(channels.H) ** 2, axis=1)
        mu_hat = dual.mu * params.alpha1 * params.eta * hnorm2.max() * params.P
        harvested = params.alpha1 * params.eta * np.real(
            np.einsum("ki,ij,kj->k", channels.H.conj(), solution.S, channels.H)
        )
        used = params.alpha2 * solution.b_tilde**2
        for k in range(channels.K):
            if mu_hat[k] <= 1e-6:
                assert abs(solution.b_tilde[k] * gamma[k] - 1.0) <= 1e-6
            else:
                rel_slack = (harvested[k] - used[k]) / max(harvested[k], 1e-300)
                assert rel_slack <= 1e-6


class TestKktAudit:
    def test_converged_desk_instances(self):
        for seed in (0, 1):
            params, channels = desk_instance(seed, distances=[5.0, 10.0, 15.0, 20.0])
            solution, report = solve_joint(params, channels)
            assert report.kkt is not None
            assert report.kkt.max_residual <= 1e-6, repr(report.kkt)

    def test_hand_built_slack_case_has_zero_products(self, rng):
        params, channels = unit_instance(rng, M=3, K=2)
        w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        gamma = channel_gains(w, channels.H)
        bt = 1.0 / gamma
        b = channels.H @ np.conj(w)
        b = np.conj(b) / np.abs(b) * bt
        sol = BeamformingSolution(
            S=0.4 * params.P / 3 * np.eye(3, dtype=complex), w=w, b=b, b_tilde=bt
        )
        dual = DualPoint(np.zeros(2), 0.0)
        kkt = kkt_audit(sol, dual, channels, params)
        assert kkt.cs_energy == 0.0
        assert kkt.cs_trace == 0.0
        assert kkt.covariance_coupling == 0.0
        assert kkt.amplitude_stationarity <= 1e-12

    def test_detects_perturbed_amplitudes(self):
        params, channels = desk_instance(2)
        solution, report = solve_joint(params, channels)
        bad = BeamformingSolution(
            S=solution.S,
            w=solution.w,
            b=solution.b * 1.1,
            b_tilde=solution.b_tilde * 1.1,
        )
        kkt = kkt_audit(bad, report.dual, channels, params)
        assert kkt.amplitude_stationarity > 1e-3
