import numpy as np
import pytest

from app.dsp.constellation import demap_symbols, get_constellation, map_bits
from app.errors import InvalidArgumentError


class TestConstellation:
    @pytest.mark.parametrize("name,n_bits", [("BPSK", 1), ("QPSK", 2), ("16QAM", 4)])
    def test_unit_energy(self, name, n_bits):
        c = get_constellation(name)
        assert c.N_b == n_bits
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["QPSK", "16QAM"])
    def test_gray_neighbours_differ_in_one_bit(self, name):
        c = get_constellation(name)
        d2 = np.abs(c.points[:, None] - c.points[None, :]) ** 2
        d_min = np.min(d2[d2 > 1e-12])
        for p in range(c.size):
            for q in range(c.size):
                if p != q and d2[p, q] <= d_min * (1 + 1e-9):
                    assert c.bit_distance(p, q) == 1

    def test_qpsk_points(self, qpsk):
        assert qpsk.points[0] == pytest.approx((1 + 1j) / np.sqrt(2))
        assert qpsk.pseudo_variance == pytest.approx(0.0)

    def test_bpsk_is_improper(self):
        assert get_constellation("bpsk").pseudo_variance == pytest.approx(1.0)

    def test_unknown_name(self):
        with pytest.raises(InvalidArgumentError):
            get_constellation("8PSK")


class TestMapping:
    @pytest.mark.parametrize("name", ["BPSK", "QPSK", "16QAM"])
    def test_map_then_demap(self, name, rng):
        c = get_constellation(name)
        bits = rng.integers(0, 2, size=16 * c.N_b)
        x = map_bits(bits, c, 16)
        assert len(x) == 16
        assert np.array_equal(demap_symbols(x, c), bits)

    def test_demap_with_noise(self, qpsk):
        bits = np.array([0, 0, 1, 1, 0, 1])
        x = map_bits(bits, qpsk).values + 0.1 * np.array([1, -1j, 1 + 1j])
        assert np.array_equal(demap_symbols(x, qpsk), bits)

    def test_length_check(self, qpsk):
        with pytest.raises(InvalidArgumentError):
            map_bits(np.zeros(6), qpsk, 4)

    def test_rejects_non_binary(self, qpsk):
        with pytest.raises(InvalidArgumentError):
            map_bits([0, 2], qpsk)
