import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import zeta

from qvlasov.errors import DomainError
from qvlasov.forcefield import AnalyticForce, sample_analytic
from qvlasov.grid import PhaseSpaceGrid
from qvlasov.initcond import (
    EnsembleState,
    FermiDiracParams,
    PerturbationField,
    build_ensemble,
    compute_C,
    compute_C_semianalytic,
    fermi_dirac,
    fermi_dirac_square_integral,
    fermi_dirac_state,
    load_perturbation,
    maxwell_demo,
    write_perturbation,
)
from qvlasov.propagator import DistributionState, evolve


def cosine_pert(grid, amp=0.3, mode=1):
    x = grid.x
    delta = amp * np.cos(2 * np.pi * mode * x / grid.L)
    tensor = np.zeros((grid.n_gr,) * grid.d) + delta.reshape((-1,) + (1,) * (grid.d - 1))
    flat = tensor.reshape(-1, order="F")
    return PerturbationField(flat - flat.mean(), np.zeros((grid.d, grid.n_spatial)))


def test_fermi_dirac_values():
    assert fermi_dirac(0.0, 1.0) == pytest.approx(0.5)
    assert fermi_dirac(1.0, 1.0) == pytest.approx(1 / (math.e + 1))
    assert fermi_dirac(1.0, 1.0) == pytest.approx(0.26894, abs=1e-5)
    assert fermi_dirac(1e6, 1.0) == 0.0
    with np.errstate(over="ignore"):
        assert fermi_dirac(np.array([1e308]), 1e-10)[0] == 0.0


def test_fermi_dirac_params():
    assert FermiDiracParams.from_physical(2.0, 3.0).v_th == pytest.approx(1.5)
    assert FermiDiracParams.from_physical(2.0, 3.0, k_b=2.0).v_th == pytest.approx(3.0)
    with pytest.raises(DomainError):
        FermiDiracParams(0.0)


def test_maxwell_demo_shape_and_profile():
    g = PhaseSpaceGrid(1, 8, 2.0, 1.0)
    s = maxwell_demo(g, 0.1)
    t = g.as_tensor(s.values)
    # position independent
    assert np.all(t == t[0:1])
    expected = np.exp(-(g.u**2) / 0.02) / math.sqrt(2 * math.pi * 0.01)
    np.testing.assert_allclose(t[0], expected, rtol=1e-14)
    with pytest.raises(DomainError):
        maxwell_demo(g, 0.0)


def test_maxwell_demo_2d_separable():
    g = PhaseSpaceGrid(2, 4, 1.0, 1.0)
    t = g.as_tensor(maxwell_demo(g, 0.5).values)
    gv = np.exp(-(g.u**2) / 0.5) / math.sqrt(2 * math.pi * 0.25)
    np.testing.assert_allclose(t[1, 2], np.outer(gv, gv), rtol=1e-14)


def test_fermi_dirac_state_uniform_has_reflection_symmetry():
    g = PhaseSpaceGrid(1, 8, 1.0, 1.0)
    s = fermi_dirac_state(g, FermiDiracParams(0.3), PerturbationField.zero(g))
    t = g.as_tensor(s.values)
    np.testing.assert_array_equal(t, t[:, ::-1])
    np.testing.assert_allclose(t[0], fermi_dirac(np.abs(g.u), 0.3))


def test_fermi_dirac_state_follows_delta_and_bulk_velocity():
    g = PhaseSpaceGrid(1, 8, 1.0, 1.0)
    p = cosine_pert(g)
    vb = np.linspace(-0.1, 0.1, 8)
    pert = PerturbationField(p.delta, vb)
    t = g.as_tensor(fermi_dirac_state(g, FermiDiracParams(0.3), pert).values)
    for ix in range(8):
        np.testing.assert_allclose(t[ix], (1 + p.delta[ix]) * fermi_dirac(np.abs(g.u - vb[ix]), 0.3))


def test_fermi_dirac_state_rejects_negative_density():
    g = PhaseSpaceGrid(1, 4, 1.0, 1.0)
    pert = PerturbationField(np.array([-1.5, 1.5, 0.0, 0.0]), np.zeros((1, 4)))
    with pytest.raises(DomainError):
        fermi_dirac_state(g, FermiDiracParams(0.3), pert)


def test_perturbation_field_validation():
    with pytest.raises(DomainError):
        PerturbationField(np.ones(4), np.zeros((1, 4)))
    with pytest.raises(DomainError):
        PerturbationField(np.zeros(4), np.zeros((1, 3)))
    with pytest.raises(DomainError):
        PerturbationField(np.array([np.nan, 0, 0, 0]), np.zeros((1, 4)))


def test_C_examples():
    assert compute_C(DistributionState(np.ones(16))) == pytest.approx(1.0)
    e = np.zeros(16)
    e[3] = 2.0
    assert compute_C(DistributionState(e)) == pytest.approx(1 / 16)
    assert compute_C(DistributionState(np.array([1.0, 1.0, 0.0, 0.0]))) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        compute_C(DistributionState(np.zeros(4)))


@given(st.lists(st.floats(0.0, 1e3), min_size=2, max_size=64).filter(lambda v: sum(v) > 0))
def test_C_in_unit_interval(vals):
    c = compute_C(DistributionState(np.array(vals)))
    assert 0 < c <= 1 + 1e-12


@given(m=st.integers(1, 4), scale=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_C_scale_and_permutation_invariant(m, scale, seed):
    rng = np.random.default_rng(seed)
    v = rng.random(2 ** (2 * m)) + 1e-3
    c = compute_C(DistributionState(v))
    assert compute_C(DistributionState(scale * v)) == pytest.approx(c, rel=1e-12)
    assert compute_C(DistributionState(rng.permutation(v))) == pytest.approx(c, rel=1e-12)


def test_C_conserved_under_evolution():
    g = PhaseSpaceGrid(1, 32, 2.0, 1.0)
    s0 = fermi_dirac_state(g, FermiDiracParams(0.035), cosine_pert(g, 0.2))
    ff = sample_analytic(AnalyticForce(-0.5, np.pi), g, 2)
    out, rep = evolve(s0, g, ff, 0.2, 2)
    assert rep.max_boundary_mass < 1e-8
    assert compute_C(out) == pytest.approx(compute_C(s0), abs=1e-10)


def _eta(s):
    # Dirichlet eta; eta(1) = ln 2
    return math.log(2) if s == 1 else (1 - 2 ** (1 - s)) * float(zeta(s))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_square_integral_closed_forms(d):
    # int_0^inf r^k / (e^r + 1)^2 dr = k! (eta(k+1) - eta(k)), with eta(0) = 1/2
    k = d - 1
    radial = math.factorial(k) * (_eta(k + 1) - (0.5 if k == 0 else _eta(k)))
    surface = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[d]
    v_th = 0.7
    assert fermi_dirac_square_integral(d, v_th) == pytest.approx(surface * v_th**d * radial, rel=1e-10)


@pytest.mark.parametrize("d,n", [(1, 16), (1, 32), (1, 64), (2, 16), (3, 16)])
def test_semianalytic_C_matches_grid_sum(d, n):
    v_th = 0.2
    g = PhaseSpaceGrid(d, n, 1.0, 5 * v_th)
    pert = cosine_pert(g, 0.25)
    s = fermi_dirac_state(g, FermiDiracParams(v_th), pert)
    assert compute_C_semianalytic(g, FermiDiracParams(v_th), pert) == pytest.approx(compute_C(s), rel=0.02)


def test_semianalytic_C_coarse_velocity_grid_degrades():
    # dv about 1.2 v_th: the velocity sum no longer resolves F^2
    g = PhaseSpaceGrid(1, 16, 1.0, 0.9)
    pert = PerturbationField.zero(g)
    s = fermi_dirac_state(g, FermiDiracParams(0.09), pert)
    rel = compute_C_semianalytic(g, FermiDiracParams(0.09), pert) / compute_C(s) - 1
    assert abs(rel) > 0.02


def test_ensemble_blocks_and_ket(rng):
    g = PhaseSpaceGrid(1, 4, 1.0, 1.0)
    states = [DistributionState(rng.random(16) + 0.1) for _ in range(4)]
    ens = build_ensemble(states)
    assert ens.n_iv == 4 and ens.vector.shape == (64,)
    for i, s in enumerate(states):
        np.testing.assert_allclose(ens.realization(i).values, s.values, rtol=1e-14)
        np.testing.assert_allclose(ens.vector[16 * i : 16 * (i + 1)], s.values / 2)
    ket = ens.ket()
    assert np.linalg.norm(ket) == pytest.approx(1.0)
    for i in range(4):
        assert np.linalg.norm(ket[16 * i : 16 * (i + 1)]) == pytest.approx(0.5)
    assert ens.norm == pytest.approx(math.sqrt(np.mean([s.norm**2 for s in states])))


def test_ensemble_errors():
    s = DistributionState(np.ones(16))
    with pytest.raises(DomainError):
        build_ensemble([s, s, s])
    with pytest.raises(DomainError):
        build_ensemble([])
    with pytest.raises(DomainError):
        build_ensemble([s, DistributionState(np.ones(4))])
    with pytest.raises(DomainError):
        EnsembleState(np.zeros((2, 4))).ket()


def test_perturbation_file_round_trip(tmp_path):
    g = PhaseSpaceGrid(2, 4, 1.0, 1.0)
    rng = np.random.default_rng(3)
    perts = []
    for _ in range(2):
        d = rng.standard_normal(16)
        perts.append(PerturbationField(d - d.mean(), rng.standard_normal((2, 16))))
    path = tmp_path / "p.vqff"
    write_perturbation(path, g, perts)
    back = load_perturbation(path, g)
    assert len(back) == 2
    for a, b in zip(perts, back):
        np.testing.assert_array_equal(a.delta, b.delta)
        np.testing.assert_array_equal(a.v_b, b.v_b)
    with pytest.raises(DomainError):
        load_perturbation(path, PhaseSpaceGrid(2, 8, 1.0, 1.0))


def test_perturbation_file_rejects_stray_channels(tmp_path):
    from qvlasov.forcefield import write_vqff

    g = PhaseSpaceGrid(2, 4, 1.0, 1.0)
    values = np.zeros((1, 2, 2, 16))
    values[0, 1, 1, 0] = 1.0
    path = tmp_path / "bad.vqff"
    write_vqff(path, values, 4)
    with pytest.raises(DomainError):
        load_perturbation(path, g)
