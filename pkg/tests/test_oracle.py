import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochdecay.errors import ConfigurationError, QuadratureAccuracyError
from stochdecay.noise import NoiseSpec, make_noise
from stochdecay.oracle import (ITO_COLUMNS, PhiSpec, conditional_log_moments, expect_phi,
                               expect_phi_mc, ito_error_scan, ito_expansion, ito_ray_scan,
                               ito_report)

NORMAL = NoiseSpec()
UNIT_VARIANCE = [NoiseSpec("standard_normal"), NoiseSpec("uniform_symmetric"),
                 NoiseSpec("rademacher"), NoiseSpec("student_t", (5.0,))]

# E[phi(1 + f h + g sqrt(h) xi)] under normal noise, by 30-digit mpmath tanh-sinh quadrature
# split at xi* and 0 (independent of scipy and of the Gauss rules used here)
MPMATH_VALUES = [
    (PhiSpec("power_alpha", 0.5), -0.3, 0.4, 1e-3, 0.9998299767405209061),
    (PhiSpec("log_abs"), -0.3, 0.4, 1e-2, -0.0038112844362821175397),
    (PhiSpec("log_abs_squared"), 0.2, -0.7, 1e-1, 0.054389801946609254632),
    (PhiSpec("inv_power_alpha", 0.5), -0.3, 0.4, 1e-1, 1.0220806868388361091),
    (PhiSpec("inv_power_alpha", 0.5), 0.5, 1.0, 0.5, 1.1355082754504827962),
]


def test_phi_catalog_derivatives():
    a = 0.3
    assert PhiSpec("power_alpha", a).derivatives == (1.0, a, a * (a - 1))
    assert PhiSpec("inv_power_alpha", a).derivatives == (1.0, -a, a * (a + 1))
    assert PhiSpec("log_abs").derivatives == (0.0, 1.0, -1.0)
    assert PhiSpec("log_abs_squared").derivatives == (0.0, 0.0, 2.0)
    assert PhiSpec("square").derivatives == (1.0, 2.0, 2.0)


@pytest.mark.parametrize("kind,alpha", [("power_alpha", 0.0), ("power_alpha", None),
                                        ("inv_power_alpha", 1.0), ("inv_power_alpha", 0.95),
                                        ("inv_power_alpha", -0.2), ("cube", None)])
def test_phi_validation(kind, alpha):
    with pytest.raises(ConfigurationError):
        PhiSpec(kind, alpha)


def test_square_example():
    for noise in UNIT_VARIANCE:
        assert expect_phi(PhiSpec("square"), -0.5, 0.3, 0.01, noise) == pytest.approx(0.990925, abs=1e-14)
    assert ito_expansion(PhiSpec("square"), -0.5, 0.3, 0.01) == pytest.approx(0.9909, abs=1e-15)


def test_log_abs_trivial():
    assert expect_phi(PhiSpec("log_abs"), 0.0, 0.0, 0.01, NORMAL) == 0.0


def test_expansion_examples():
    f, g, h = -0.2, 0.6, 0.05
    assert ito_expansion(PhiSpec("log_abs"), f, g, h) == pytest.approx(f * h - g * g * h / 2, abs=1e-16)
    assert ito_expansion(PhiSpec("log_abs_squared"), f, g, h) == pytest.approx(g * g * h, abs=1e-16)


@pytest.mark.parametrize("phi,f,g,h,want", MPMATH_VALUES, ids=lambda v: str(v))
def test_against_mpmath(phi, f, g, h, want):
    assert expect_phi(phi, f, g, h, NORMAL) == pytest.approx(want, rel=1e-10, abs=1e-14)


def test_power_half_against_large_monte_carlo():
    phi = PhiSpec("power_alpha", 0.5)
    q = expect_phi(phi, -0.3, 0.4, 1e-3, NORMAL)
    mean, se = expect_phi_mc(phi, -0.3, 0.4, 1e-3, make_noise(NORMAL, 99), 10 ** 7)
    assert abs(q - mean) < 3 * se


@pytest.mark.parametrize("kind,alpha", [("power_alpha", 0.5), ("power_alpha", 1.7),
                                        ("inv_power_alpha", 0.3), ("log_abs", None),
                                        ("log_abs_squared", None), ("square", None)])
@pytest.mark.parametrize("noise,n_triples,n_samples", [
    (NORMAL, 20, 10 ** 6),
    (NoiseSpec("uniform_symmetric"), 20, 10 ** 6),
    # inverse-t sampling is slow, so the heavy-tailed law gets a thinner check
    (NoiseSpec("student_t", (5.0,)), 4, 2 * 10 ** 5),
], ids=lambda v: getattr(v, "kind", str(v)))
def test_monte_carlo_agreement(kind, alpha, noise, n_triples, n_samples):
    phi = PhiSpec(kind, alpha)
    rng = np.random.default_rng(zlib.crc32(f"{kind}/{noise.kind}".encode()))
    src = make_noise(noise, 4242)
    for k in range(n_triples):
        f, g = rng.uniform(-1, 1, 2)
        h = 10 ** rng.uniform(-3, -0.5)
        q = expect_phi(phi, f, g, h, noise)
        mean, se = expect_phi_mc(phi, f, g, h, src, n_samples, stream=k)
        assert abs(q - mean) <= 4 * se + 1e-12, (f, g, h, q, mean, se)


def test_node_doubling_consistency():
    for phi in (PhiSpec("power_alpha", 0.5), PhiSpec("log_abs"), PhiSpec("log_abs_squared")):
        a = expect_phi(phi, -0.3, 0.4, 1e-2, NORMAL, n_nodes=64)
        b = expect_phi(phi, -0.3, 0.4, 1e-2, NORMAL, n_nodes=128)
        assert abs(a - b) <= 1e-10 * max(abs(b), 1e-300)


def test_too_few_nodes_flags_accuracy_error():
    with pytest.raises(QuadratureAccuracyError) as ei:
        expect_phi(PhiSpec("power_alpha", 0.5), -0.3, 0.4, 1e-2, NORMAL, n_nodes=2)
    assert ei.value.coarse is not None and ei.value.fine is not None


def test_singular_phi_needs_density():
    with pytest.raises(ConfigurationError, match="density"):
        expect_phi(PhiSpec("inv_power_alpha", 0.5), -0.3, 0.4, 0.1, NoiseSpec("rademacher"))


@settings(max_examples=80, deadline=None)
@given(f=st.floats(-1, 1), g=st.floats(-1, 1), h=st.floats(1e-5, 1.0),
       noise=st.sampled_from(UNIT_VARIANCE))
def test_square_identity_every_noise(f, g, h, noise):
    r = ito_report(PhiSpec("square"), f, g, h, noise)
    assert abs(r.err - f * f * h * h) <= 1e-13


@settings(max_examples=40, deadline=None)
@given(f=st.floats(-1, 1), g=st.floats(0.01, 1), h=st.floats(1e-4, 0.2),
       noise=st.sampled_from([NORMAL, NoiseSpec("uniform_symmetric"), NoiseSpec("rademacher")]),
       phi=st.sampled_from([PhiSpec("square"), PhiSpec("log_abs"), PhiSpec("log_abs_squared"),
                            PhiSpec("power_alpha", 2.0), PhiSpec("power_alpha", 0.5)]))
def test_symmetry_in_g(f, g, h, noise, phi):
    a = expect_phi(phi, f, g, h, noise)
    b = expect_phi(phi, f, -g, h, noise)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-15)


def test_square_scan_err_column():
    scan = ito_error_scan(PhiSpec("square"), -0.5, 0.3, [0.1, 0.01, 0.001], NORMAL)
    assert scan.passed
    for r in scan:
        assert r.err == pytest.approx(0.25 * r.h * r.h, abs=1e-15)
        assert r.norm_err == pytest.approx(0.25 * r.h * r.h / (r.h * 0.5), rel=1e-9)


def test_power_half_scan_and_ray():
    phi = PhiSpec("power_alpha", 0.5)
    scan = ito_error_scan(phi, -0.3, 0.4, [1e-1, 1e-2, 1e-3, 1e-4], NORMAL, tie_tol=0.0)
    assert scan.passed and len(scan) == 4
    ray = ito_ray_scan(phi, -0.3, 0.4, 1e-2, [1.0, 0.1, 0.01], NORMAL, tie_tol=0.0)
    assert ray.passed


def test_single_point_grid_skips_trend():
    scan = ito_error_scan(PhiSpec("square"), -0.5, 0.3, [0.01], NORMAL)
    assert scan.passed and "skipped" in scan.note and len(scan) == 1


def test_grid_must_decrease():
    with pytest.raises(ConfigurationError):
        ito_error_scan(PhiSpec("square"), -0.5, 0.3, [0.01, 0.1], NORMAL)


def test_report_row_columns():
    r = ito_report(PhiSpec("power_alpha", 0.5), -0.3, 0.4, 0.01, NORMAL)
    assert len(r.row()) == len(ITO_COLUMNS)
    assert math.isfinite(r.norm_err)


@pytest.mark.parametrize("f,g,h", [(-0.3, 0.4, 1e-2), (0.0, 1e-4, 1e-3), (-1.0, 1.0, 0.01),
                                   (0.2, 0.05, 1e-6)])
def test_log_moments_match_generic_quadrature(f, g, h):
    mean, var = conditional_log_moments(f, g, h, NORMAL)
    m1 = expect_phi(PhiSpec("log_abs"), f, g, h, NORMAL)
    m2 = expect_phi(PhiSpec("log_abs_squared"), f, g, h, NORMAL)
    assert mean == pytest.approx(m1, rel=1e-9, abs=1e-18)
    assert var == pytest.approx(m2 - m1 * m1, rel=1e-6, abs=1e-18)


def test_log_moments_small_increment_limits():
    # tiny g: mean -> f h - g^2 h / 2 and variance -> g^2 h to leading order
    f, g, h = -1e-4, 1e-3, 1e-2
    mean, var = conditional_log_moments(f, g, h, NORMAL)
    assert mean == pytest.approx(ito_expansion(PhiSpec("log_abs"), f, g, h), rel=1e-4)
    assert var == pytest.approx(g * g * h, rel=1e-4)
