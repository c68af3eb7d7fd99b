import json
import math

import numpy as np
import pytest
from scipy import special

from macrodim.formulas import (
    CharacteristicExponent,
    LaplaceExponent,
    NoStableIndexError,
    bessel_envelope,
    bessel_k,
    fourier_alpha_c,
    fourier_transform_1d,
    graph_dim,
    peaks_dim,
    potential_alpha_c_mc,
    subordinator_range_dim,
    verify_lemma_ft,
)


@pytest.mark.parametrize("beta, g", [(0.25, 0.0), (0.5, 0.0), (0.75, 2 / 3), (1.0, 1.0),
                                     (1.5, 1.0), (2.0, 1.0), (0.6, 1 / 3)])
def test_graph_dim_values(beta, g):
    assert graph_dim(beta) == pytest.approx(g)


def test_graph_dim_shape():
    b = np.linspace(0.01, 2, 400)
    g = np.array([graph_dim(x) for x in b])
    assert np.all(np.diff(g) >= 0)
    assert np.all(g[b <= 0.5] == 0) and np.all(g[b >= 1] == 1)
    # the plotted points of the figure
    for x, y in [(0.55, 0.1818), (0.6, 0.3333), (0.65, 0.4615), (0.7, 0.5714),
                 (0.8, 0.75), (0.85, 0.8235), (0.9, 0.889), (0.95, 0.9474)]:
        assert graph_dim(x) == pytest.approx(y, abs=6e-4)
    with pytest.raises(ValueError):
        graph_dim(2.5)


def test_peaks_dim():
    beta = 0.8
    assert peaks_dim(1 / beta, beta) == 1.0
    assert peaks_dim(1.01 / beta, beta) == 0.0
    assert peaks_dim(1.0, brownian=True) == 1.0
    assert peaks_dim(1.0001, brownian=True) == 0.0
    alphas = np.linspace(0.05, 3, 300)
    vals = [peaks_dim(a, 1.3) for a in alphas]
    assert np.all(np.diff(vals) <= 0)
    jump = alphas[np.argmax(np.diff(vals) < 0)]
    assert jump <= 1 / 1.3 < jump + alphas[1] - alphas[0]


def test_subordinator_range_dim():
    assert subordinator_range_dim(LaplaceExponent.power(0.5)) == 0.5
    assert subordinator_range_dim(LaplaceExponent.power(1 - 3 / 4)) == pytest.approx(0.25)
    # user-function path, pure drift, and a non-pure power
    assert subordinator_range_dim(LaplaceExponent(lambda y: y)) == pytest.approx(1.0)
    assert subordinator_range_dim(LaplaceExponent(lambda y: y**0.5)) == pytest.approx(0.5, abs=1e-9)
    mixed = LaplaceExponent(lambda y: y**0.3 + y**0.9)
    assert subordinator_range_dim(mixed) == pytest.approx(0.3, abs=0.01)


def test_subordinator_rescaling_invariance():
    base = LaplaceExponent(lambda y: y**0.4 * (1 + y))
    for c in (0.01, 1.0, 50.0):
        scaled = LaplaceExponent(lambda y, c=c: base(c * y))
        assert subordinator_range_dim(scaled) == pytest.approx(subordinator_range_dim(base), abs=0.01)


def test_subordinator_no_stable_index():
    wobbly = LaplaceExponent(lambda y: y**0.5 * (1.5 + np.sin(np.log(y))))
    with pytest.raises(NoStableIndexError):
        subordinator_range_dim(wobbly)


def test_laplace_monotone_check():
    assert LaplaceExponent.power(0.7).is_monotone()
    assert not LaplaceExponent(lambda y: np.sin(y) + 2).is_monotone()


@pytest.mark.parametrize("beta", [0.3, 0.6, 0.9])
def test_fourier_stable_d1(beta):
    v = fourier_alpha_c(CharacteristicExponent.stable(beta), 1)
    assert abs(v.critical_alpha - beta) <= 0.01
    verdicts = [p["verdict"] for p in v.probes]
    order = {"diverges": 0, "critical": 1, "converges": 2}
    assert all(order[a] <= order[b] for a, b in zip(verdicts, verdicts[1:]))


def test_fourier_brownian_d3_and_scaling():
    v = fourier_alpha_c(CharacteristicExponent.stable(2.0), 3)
    assert abs(v.critical_alpha - 2.0) <= 0.01
    w = fourier_alpha_c(CharacteristicExponent.stable(2.0, scale=7.5), 3)
    assert w.critical_alpha == pytest.approx(v.critical_alpha, abs=1e-9)


def test_fourier_user_function_non_stable():
    # Psi(z) = |z|^0.5 + |z|^1.5 behaves like |z|^0.5 at the origin
    psi = CharacteristicExponent(lambda z: np.abs(z[:, 0]) ** 0.5 + np.abs(z[:, 0]) ** 1.5 + 0j)
    assert fourier_alpha_c(psi, 1).critical_alpha == pytest.approx(0.5, abs=0.01)


def test_fourier_d2_stable():
    v = fourier_alpha_c(CharacteristicExponent.stable(1.2), 2)
    assert abs(v.critical_alpha - 1.2) <= 0.01


def test_fourier_rejections():
    with pytest.raises(ValueError):
        fourier_alpha_c(CharacteristicExponent.stable(1.5), 1)  # recurrent
    flat = CharacteristicExponent(lambda z: np.maximum(np.abs(z[:, 0]) - 0.5, 0) + 0j)
    with pytest.raises(ValueError):
        fourier_alpha_c(flat, 1)


def test_verdict_json():
    v = fourier_alpha_c(CharacteristicExponent.stable(0.6), 1)
    obj = json.loads(v.to_json())
    assert set(obj) >= {"criterion", "inputs", "critical_alpha", "probes", "diagnostics"}
    assert v.to_json() == fourier_alpha_c(CharacteristicExponent.stable(0.6), 1).to_json()


def test_potential_mc_stable_half():
    v = potential_alpha_c_mc("symmetric-stable", 0.5, 1, 40, 200, seed=1)
    assert abs(v.critical_alpha - 0.5) <= 0.1
    again = potential_alpha_c_mc("symmetric-stable", 0.5, 1, 40, 200, seed=1)
    assert again.to_json() == v.to_json()


def test_potential_mc_brownian_d3():
    v = potential_alpha_c_mc("brownian", 2.0, 3, 16, 300, seed=2)
    assert abs(v.critical_alpha - 2.0) <= 0.15


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_oracle_consistency(beta):
    f = fourier_alpha_c(CharacteristicExponent.stable(beta), 1).critical_alpha
    m = potential_alpha_c_mc("symmetric-stable", beta, 1, 60, 200, seed=3).critical_alpha
    assert abs(f - m) <= 0.15


def test_potential_mc_edge_cases():
    v = potential_alpha_c_mc("symmetric-stable", 0.5, 1, 0, 10, seed=0)
    assert v.diagnostics["non_asymptotic"] is True
    with pytest.raises(ValueError):
        potential_alpha_c_mc("symmetric-stable", 1.5, 1, 10, 10, seed=0)


@pytest.mark.parametrize("nu", [0.0, 0.5, 0.7, 1.3, -0.25, 3.0])
def test_bessel_against_scipy(nu):
    for w in (1e-3, 0.01, 0.3, 1.0, 5.0, 12.0, 30.0):
        assert bessel_k(nu, w) == pytest.approx(special.kv(nu, w), rel=1e-8)


def test_bessel_half_order_closed_form():
    for w in (0.5, 1.0, 5.0):
        assert bessel_k(0.5, w) == pytest.approx(math.sqrt(math.pi / (2 * w)) * math.exp(-w), rel=1e-8)
    with pytest.raises(ValueError):
        bessel_k(0.5, 0.0)


def test_bessel_envelopes():
    env = bessel_envelope(0.7, np.geomspace(1e-4, 0.1, 40))
    lo, hi = env["small"]
    assert 0 < lo and hi / lo < 2.5
    env = bessel_envelope(0.7, np.linspace(5, 30, 40))
    lo, hi = env["large"]
    assert 0 < lo and hi / lo < 1.2


def test_fourier_pair_alpha_two():
    for z in (0.1, 1.0, 3.0, 5.0):
        ft = fourier_transform_1d(lambda x: 1 / (1 + x * x), z)
        assert ft == pytest.approx(math.pi * math.exp(-z), rel=1e-9)
        # K_{-1/2}(z) z^{1/2} = sqrt(pi/2) e^{-z}
        assert bessel_k(-0.5, z) * z**0.5 == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-z), rel=1e-9)
    assert verify_lemma_ft(2.0, np.linspace(0.1, 5, 25)) <= 1e-8


def test_lemma_ft_alpha_2_5():
    assert verify_lemma_ft(2.5, np.linspace(0.1, 5, 50)) <= 1e-4


def test_lemma_ft_large_z_decay():
    z = np.linspace(6, 12, 7)
    ft = np.array([fourier_transform_1d(lambda x: (1 + x * x) ** -1.25, v) for v in z])
    # exponential rate 1, up to the slowly varying z^(1/4) prefactor
    assert np.polyfit(z, np.log(ft), 1)[0] == pytest.approx(-1.0, abs=0.05)
    ratio = [fourier_transform_1d(lambda x: (1 + x * x) ** -1.25, v) / (bessel_k(-0.75, v) / v**-0.75) for v in z]
    assert max(ratio) / min(ratio) - 1 < 0.01


def test_lemma_ft_domain():
    with pytest.raises(ValueError):
        verify_lemma_ft(1.0, [1.0])
