import numpy as np
import pytest

from app.analysis.bounds import (CodewordBasis, abep_bound, brute_force_pep, build_codeword_matrices, pep_bound,
                                 pep_from_terms, pep_terms, q_approx, q_exact, rayleigh_pep_exact)
from app.dsp.afdm import AfdmParams, DaftSymbolVector, add_cpp, daft, idaft, remove_cpp
from app.dsp.channel import ChannelGeometry, apply_time_domain, psd_sqrt
from app.dsp.constellation import get_constellation
from app.dsp.iqi import NO_IQI, apply_iqi, iqi_from_db
from app.errors import InvalidArgumentError

SINGLE_PATH = ChannelGeometry((0,), (0.0,))
TWO_PATHS = ChannelGeometry((0, 1), (1.0, -1.0))
TX = iqi_from_db(1.0, 3.0)
RX = iqi_from_db(1.0, 3.0)


@pytest.fixture
def small_params():
    return AfdmParams.from_grid(8, 1, 1, 0)


class TestQFunction:
    @pytest.mark.parametrize("x", [1.5, 2.0, 3.0, 4.0])
    def test_approximation_dominates_at_moderate_arguments(self, x):
        assert q_approx(x) >= q_exact(x)
        assert q_approx(x) == pytest.approx(q_exact(x), rel=0.5)

    def test_negative_argument(self):
        with pytest.raises(InvalidArgumentError):
            q_approx(-1.0)

    def test_rayleigh_closed_form_limits(self):
        assert rayleigh_pep_exact(0.0, 1.0) == pytest.approx(0.5)
        assert rayleigh_pep_exact(2.0, 1e-6) < 1e-5


class TestCodewordMatrices:
    def test_psi_model_matches_chain(self, small_params, rng):
        x = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) / np.sqrt(2)
        h = np.array([0.8 - 0.3j, 0.2 + 0.5j])
        cw = build_codeword_matrices(x, TWO_PATHS, TX, RX, small_params)
        chan = TWO_PATHS.with_gains(h)
        s_bar = apply_iqi(add_cpp(idaft(DaftSymbolVector(x), small_params), small_params), TX)
        r_bar = apply_iqi(apply_time_domain(s_bar, chan, small_params), RX)
        y = daft(remove_cpp(r_bar, small_params), small_params).values
        assert np.max(np.abs(cw.predict(h) - y)) < 1e-10
        assert cw.psi1.shape == (8, 2)

    def test_difference_matches_columns(self, small_params, qpsk):
        basis = CodewordBasis(TWO_PATHS, TX, RX, small_params)
        xp, xq = qpsk.points[0], qpsk.points[2]
        x_p = np.full(8, xp)
        x_q = x_p.copy()
        x_q[3] = xq
        expected = basis.columns(x_p) - basis.columns(x_q)
        diff = basis.difference(3, xp - xq)
        assert np.allclose(diff.psi1, expected.psi1)
        assert np.allclose(diff.psi2, expected.psi2)
        assert np.abs(diff.psi2).max() > 0


class TestPep:
    def test_single_path_closed_form(self, small_params, qpsk):
        sigma2 = 0.1
        d = qpsk.points[0] - qpsk.points[1]
        value = pep_bound(qpsk.points[0], qpsk.points[1], 0, SINGLE_PATH, NO_IQI, NO_IQI, sigma2, small_params,
                          channel_cov=np.ones((1, 1)))
        lam = abs(d) ** 2
        g1, g2 = 1 / (4 * sigma2), 1 / (3 * sigma2)
        assert value == pytest.approx(1 / (12 * (1 + g1 * lam)) + 1 / (4 * (1 + g2 * lam)))

    def test_identical_codewords(self, small_params, qpsk):
        value = pep_bound(qpsk.points[0], qpsk.points[0], 0, TWO_PATHS, TX, RX, 0.1, small_params)
        assert value == pytest.approx(1 / 3)

    def test_terms(self, small_params):
        delta = np.zeros((8, 2), dtype=complex)
        delta[0, 0] = 1.0
        terms = pep_terms(delta, 0.5, RX)
        # 複素の固有値 0.5 が実数化で 0.25 の組になる
        assert terms.rank_k == 2
        assert terms.epsilon == 2
        assert np.allclose(terms.eigenvalues, [0.25, 0.25])
        assert terms.sigma2_wbar == pytest.approx(RX.power_gain * 0.5)
        assert terms.sigma2_bound == pytest.approx((abs(RX.mu) + abs(RX.upsilon)) ** 2 * 0.5)
        assert terms.gamma1 == pytest.approx(1 / (4 * terms.sigma2_bound))
        assert pep_from_terms(terms) < 1 / 3

    def test_proper_case_matches_complex_eigenvalues(self, rng):
        delta = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        cov = g @ g.conj().T / 3
        sigma2 = 0.2
        root = psd_sqrt(cov)
        lam = np.linalg.eigvalsh(root @ delta.conj().T @ delta @ root)
        g1, g2 = 1 / (4 * sigma2), 1 / (3 * sigma2)
        expected = np.prod(1 / (1 + g1 * lam)) / 12 + np.prod(1 / (1 + g2 * lam)) / 4
        assert pep_from_terms(pep_terms(delta, sigma2, NO_IQI, channel_cov=cov)) == pytest.approx(expected)

    def test_improper_noise_raises_the_bound(self, small_params, qpsk):
        xp, xq = qpsk.points[0], qpsk.points[1]
        ideal_rx = pep_bound(xp, xq, 3, TWO_PATHS, TX, NO_IQI, 0.03, small_params)
        assert pep_bound(xp, xq, 3, TWO_PATHS, TX, RX, 0.03, small_params) > ideal_rx

    def test_rank_deficient_covariance(self):
        delta = np.eye(4, 2, dtype=complex)
        terms = pep_terms(delta, 0.5, NO_IQI, channel_cov=np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert terms.epsilon == 1
        assert terms.rank_k == 2

    def test_decreasing_in_snr(self, small_params, qpsk):
        values = [pep_bound(qpsk.points[0], qpsk.points[3], 2, TWO_PATHS, TX, RX, s, small_params)
                  for s in (1.0, 0.1, 0.01)]
        assert values[0] > values[1] > values[2]

    def test_position_out_of_range(self, small_params, qpsk):
        with pytest.raises(InvalidArgumentError):
            pep_bound(qpsk.points[0], qpsk.points[1], 8, TWO_PATHS, TX, RX, 0.1, small_params)


class TestBruteForce:
    def test_matches_rayleigh_closed_form(self, small_params, qpsk):
        rng = np.random.default_rng(99)
        sigma2 = 0.5
        xp, xq = qpsk.points[0], qpsk.points[1]
        est, se = brute_force_pep(xp, xq, 0, SINGLE_PATH, NO_IQI, NO_IQI, sigma2, small_params, 40_000, rng,
                                  channel_cov=np.ones((1, 1)))
        exact = rayleigh_pep_exact(abs(xp - xq) ** 2, sigma2)
        assert abs(est - exact) < 4 * se

    def test_bound_holds_at_moderate_snr(self, small_params, qpsk):
        rng = np.random.default_rng(7)
        sigma2 = 0.02
        xp, xq = qpsk.points[0], qpsk.points[1]
        est, se = brute_force_pep(xp, xq, 1, TWO_PATHS, NO_IQI, NO_IQI, sigma2, small_params, 20_000, rng)
        bound = pep_bound(xp, xq, 1, TWO_PATHS, NO_IQI, NO_IQI, sigma2, small_params)
        assert est <= bound + 3 * se

    def test_estimator_with_iqi_is_a_probability(self, small_params, qpsk):
        rng = np.random.default_rng(8)
        est, se = brute_force_pep(qpsk.points[0], qpsk.points[3], 1, TWO_PATHS, TX, RX, 0.05, small_params,
                                  10_000, rng)
        assert 0.0 <= est < 0.5
        assert se < 0.01

    @pytest.mark.parametrize("p, q, position, snr_db", [(0, 1, 3, 15.0), (0, 1, 0, 20.0), (0, 3, 5, 15.0),
                                                         (1, 2, 2, 20.0)])
    def test_bound_holds_with_joint_iqi(self, small_params, qpsk, p, q, position, snr_db):
        rng = np.random.default_rng(100 + position)
        sigma2 = 10 ** (-snr_db / 10)
        xp, xq = qpsk.points[p], qpsk.points[q]
        est, se = brute_force_pep(xp, xq, position, TWO_PATHS, TX, RX, sigma2, small_params, 40_000, rng)
        bound = pep_bound(xp, xq, position, TWO_PATHS, TX, RX, sigma2, small_params)
        assert est <= bound + 3 * se

    def test_requires_enough_trials(self, small_params, qpsk, rng):
        with pytest.raises(InvalidArgumentError):
            brute_force_pep(qpsk.points[0], qpsk.points[1], 0, SINGLE_PATH, NO_IQI, NO_IQI, 0.1, small_params,
                            100, rng)


class TestAbep:
    def test_modes(self, small_params, qpsk):
        full = abep_bound(qpsk, TWO_PATHS, TX, RX, 0.05, small_params)
        dominant = abep_bound(qpsk, TWO_PATHS, TX, RX, 0.05, small_params, terms="dominant")
        fixed = abep_bound(qpsk, TWO_PATHS, TX, RX, 0.05, small_params, positions=2)
        assert full.positions_mode == "averaged"
        assert fixed.positions_mode == "fixed(2)"
        assert len(full.per_pair_terms) == 12
        assert len(dominant.per_pair_terms) == 8
        assert 0 < dominant.bound < full.bound

    def test_not_clipped_at_low_snr(self, small_params):
        qam = get_constellation("16QAM")
        result = abep_bound(qam, TWO_PATHS, TX, RX, 1e3, small_params, positions=0)
        assert result.bound > 1.0
        assert result.bound == pytest.approx(sum(t.pep * t.n_be for t in result.per_pair_terms) / 64)

    def test_invalid_modes(self, small_params, qpsk):
        with pytest.raises(InvalidArgumentError):
            abep_bound(qpsk, TWO_PATHS, TX, RX, 0.1, small_params, terms="some")
        with pytest.raises(InvalidArgumentError):
            abep_bound(qpsk, TWO_PATHS, TX, RX, 0.1, small_params, positions=99)
