"""Waveform identities of the truncated-Fourier flux pulse."""

import numpy as np
import pytest

from dtclink.pulse import PulseParams, normalize, sample, waveform


def make_pulse(lambdas=(1.0,), idle=0.3, amp=0.2, T=100.0):
    return PulseParams(phi_idle=idle, phi_amp=amp, lambdas=lambdas, duration=T)


def test_normalize_basic():
    assert normalize((1.0,)) == (1.0,)
    assert normalize((2.0, 0.5)) == (1.0, 0.25)


def test_normalize_zero_odd_sum():
    with pytest.raises(ValueError):
        normalize((0.0, 1.0))


def test_params_validation():
    with pytest.raises(ValueError):
        make_pulse(lambdas=(0.9,))          # odd sum != 1
    with pytest.raises(ValueError):
        make_pulse(T=0.0)
    with pytest.raises(ValueError):
        make_pulse(idle=0.9, amp=0.2)       # peak flux beyond one quantum
    with pytest.raises(ValueError):
        PulseParams(1.1, 0.0, (1.0,), 10.0)


def test_midpoint_peak():
    p = make_pulse(lambdas=normalize((1.0, -0.3, 0.1)))
    assert abs(waveform(p, 0.5 * p.duration) - (p.phi_idle + p.phi_amp)) < 1e-12


def test_boundary_returns_to_idle():
    p = make_pulse(lambdas=normalize((0.8, 0.5, 0.3)))
    assert abs(waveform(p, 0.0) - p.phi_idle) < 1e-12
    assert abs(waveform(p, p.duration) - p.phi_idle) < 1e-12


def test_even_symmetry_about_midpoint():
    p = make_pulse(lambdas=normalize((1.0, 0.2, -0.15)))
    t = np.linspace(0.0, p.duration, 37)
    assert np.abs(waveform(p, t) - waveform(p, p.duration - t)).max() < 1e-14


def test_derivative_vanishes_at_endpoints_and_midpoint():
    p = make_pulse(lambdas=normalize((1.0, 0.4, 0.2)))
    eps = 1e-6
    for t0 in (0.0, 0.5 * p.duration, p.duration):
        a = waveform(p, np.clip(t0 - eps, 0, p.duration))
        b = waveform(p, np.clip(t0 + eps, 0, p.duration))
        assert abs(b - a) / (2 * eps) < 1e-7


def test_domain_error():
    p = make_pulse()
    with pytest.raises(ValueError):
        waveform(p, -0.1)
    with pytest.raises(ValueError):
        waveform(p, p.duration + 0.1)


def test_excursion_bound():
    p = make_pulse(lambdas=normalize((1.0, 0.7, -0.4)))
    t = np.linspace(0.0, p.duration, 2001)
    max_dev = np.abs(waveform(p, t) - p.phi_idle).max()
    assert max_dev <= p.max_excursion() + 1e-12


def test_sample_midpoints():
    p = make_pulse(T=1.0)
    s = sample(p, 0.5)
    assert np.allclose(s.times, [0.25, 0.75])
    assert np.allclose(s.widths, [0.5, 0.5])


def test_sample_last_step_shortened():
    p = make_pulse(T=1.0)
    s = sample(p, 0.4)
    assert np.allclose(s.times, [0.2, 0.6, 0.9])
    assert np.allclose(s.widths, [0.4, 0.4, 0.2])
    assert np.isclose(np.sum(s.widths), p.duration)


def test_sample_constant_pulse():
    p = make_pulse(amp=0.0)
    s = sample(p, 7.0)
    assert np.allclose(s.flux, p.phi_idle)


def test_sample_refinement_keeps_peak():
    p = make_pulse(lambdas=normalize((1.0, 0.3)))
    coarse = sample(p, 1.0)
    fine = sample(p, 0.5)
    assert set(np.round(coarse.times, 12)) <= set(np.round(fine.times - 0.25, 12)) | set(
        np.round(fine.times + 0.25, 12))
    assert np.isclose(max(np.abs(fine.flux - p.phi_idle).max(),
                          np.abs(coarse.flux - p.phi_idle).max()),
                      np.abs(waveform(p, 0.5 * p.duration) - p.phi_idle), atol=1e-3)


def test_sample_validation():
    p = make_pulse(T=10.0)
    with pytest.raises(ValueError):
        sample(p, 0.0)
    with pytest.raises(ValueError):
        sample(p, 11.0)
