"""Exponent profiles, gap-mass quadrature, Herglotz-type tail fit.

The constant rank-one fixture gives exact targets: branch exponents
(|u|, |u|, 0) at the gap center, average 2|u|/3, and a gap mass equal to
two thirds of the 2x2 reference value.
"""

import numpy as np
import pytest

from manakov_spectra import (
    ConfigError,
    WindowTooSmallError,
    discriminant_bounds_check,
    eps_map,
    herglotz_asymptotic,
    q0_integral,
    q_profile,
    scalar_reduction,
    scan,
    zs_q0_integral,
)
from manakov_spectra.quasimomentum import profile_csv_rows


def test_eps_map_contracts(rng):
    assert abs(eps_map(2.0) - (2.0 + np.sqrt(3.0))) <= 1e-14
    # on [-1, 1] the image sits on the unit circle
    x = rng.uniform(-1, 1, size=50)
    assert np.abs(np.abs(eps_map(x)) - 1.0).max() <= 1e-12
    assert abs(abs(eps_map(10j)) - (10.0 + np.sqrt(101.0))) <= 1e-12
    # selected branch has modulus >= 1 everywhere ...
    z = rng.normal(size=200) + 1j * rng.normal(size=200)
    w = eps_map(z)
    assert np.min(np.abs(w)) >= 1.0 - 1e-12
    # ... and satisfies the branch-independent inverse relation
    assert np.abs(w * (2.0 * z - w) - 1.0).max() <= 1e-10


def test_free_profile_identically_zero(pot_zero):
    sc = scan(pot_zero, -5.0, 5.0, step=0.01)
    prof = q_profile(pot_zero, sc)
    assert np.all(prof.q_avg == 0.0)
    assert np.all(prof.q_branches == 0.0)


def test_constant_gap_center_exponents(pot_const):
    sc = scan(pot_const, -7.0, 7.0, step=0.01)
    prof = q_profile(pot_const, sc)
    mid = int(np.argmin(np.abs(prof.grid)))
    assert abs(prof.grid[mid]) <= 5e-3
    assert abs(prof.q_avg[mid] - 0.6) <= 1e-6
    branches = np.sort(prof.q_branches[mid])
    assert np.abs(branches - np.array([0.0, 0.9, 0.9])).max() <= 1e-6
    # bands are clamped to exactly zero, gap interior strictly positive
    band = np.abs(prof.grid) > 0.95
    assert np.all(prof.q_avg[band] == 0.0)
    interior = np.abs(prof.grid) < 0.8
    assert np.all(prof.q_avg[interior] > 1e-10)


def test_gap_mass_two_thirds_of_reduced(pot_const):
    sc = scan(pot_const, -7.0, 7.0, step=0.01)
    res = q0_integral(q_profile(pot_const, sc))
    u, _ = scalar_reduction(pot_const)
    want = (2.0 / 3.0) * zs_q0_integral(u, -7.0, 7.0)
    assert abs(res.value - want) <= 1e-3 * want
    assert res.tail_estimate == 0.0
    assert len(res.per_gap) == 1


def test_window_too_small_raises(pot_const):
    sc = scan(pot_const, -2.0, 2.0, step=0.01)
    prof = q_profile(pot_const, sc)
    with pytest.raises(WindowTooSmallError):
        q0_integral(prof)


def test_herglotz_fit_matches_quadrature(pot_const):
    sc = scan(pot_const, -7.0, 7.0, step=0.01)
    quad = q0_integral(q_profile(pot_const, sc)).value
    fit = herglotz_asymptotic(pot_const, (12, 16, 20, 26, 34))
    assert abs(fit.q0 - quad) <= 0.1 * quad
    assert fit.residual_rms <= 1e-3


def test_herglotz_validation(pot_const):
    with pytest.raises(ConfigError):
        herglotz_asymptotic(pot_const, (5, 8))  # below the asymptotic regime
    with pytest.raises(ConfigError):
        herglotz_asymptotic(pot_const, (15,))  # cannot fit two parameters


def test_envelope_bounds_generic(pot_two_mode):
    sc = scan(pot_two_mode, -5.0, 5.0, step=0.01)
    rep = discriminant_bounds_check(pot_two_mode, sc)
    assert rep.ok
    assert rep.checked >= 50
    assert rep.failures == []
    assert rep.min_lower_margin >= -1e-8
    assert rep.min_upper_margin >= -1e-8


def test_envelope_bounds_refuses_flat_case(pot_const):
    # with a two-sheeted potential the skew-average vanishes identically and
    # the two-sided envelope carries no information
    sc = scan(pot_const, -7.0, 7.0, step=0.01)
    with pytest.raises(ConfigError):
        discriminant_bounds_check(pot_const, sc)


def test_profile_serialization(pot_const):
    sc = scan(pot_const, -3.5, 3.5, step=0.01)
    prof = q_profile(pot_const, sc)
    rows = list(profile_csv_rows(prof))
    assert rows[0] == ["lam", "q1", "q2", "q3", "q_avg"]
    assert len(rows) == 1 + len(prof.grid)
