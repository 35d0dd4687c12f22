import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qvlasov.errors import DomainError, ForceFileError
from qvlasov.forcefield import (
    MAGIC,
    AnalyticForce,
    ForceEnsemble,
    ForceField,
    ensemble_force_at,
    force_at,
    load_force_ensemble,
    load_force_field,
    read_vqff,
    sample_analytic,
    write_force_field,
    write_vqff,
)
from qvlasov.grid import PhaseSpaceGrid

G4 = PhaseSpaceGrid(1, 4, 2.0, 1.0)


def test_zero_file(tmp_path):
    write_vqff(tmp_path / "z.vqff", np.zeros((1, 1, 1, 4)), 4)
    ff = load_force_field(tmp_path / "z.vqff", G4)
    assert ff.f_max == 0.0 and ff.n_t == 1


def test_sampled_demo_file(tmp_path):
    ff = sample_analytic(AnalyticForce(-1.0, np.pi), G4)
    np.testing.assert_allclose(ff.samples[0, 0], [0, -1, 0, 1], atol=1e-15)
    write_force_field(tmp_path / "d.vqff", ff)
    back = load_force_field(tmp_path / "d.vqff", G4)
    assert np.array_equal(back.samples, ff.samples)
    assert back.f_max == 1.0


def test_byte_layout(tmp_path):
    vals = np.arange(2 * 3 * 2 * 4, dtype=float).reshape(2, 3, 2, 4)
    g = PhaseSpaceGrid(2, 2, 1.0, 1.0)
    write_vqff(tmp_path / "f", vals, 2)
    raw = (tmp_path / "f").read_bytes()
    assert raw[:6] == b"VQFF1\n"
    assert struct.unpack_from("<4I", raw, 6) == (2, 2, 3, 2)
    payload = np.frombuffer(raw[22:], dtype="<f8")
    assert np.array_equal(payload, np.arange(48.0))
    ens = load_force_ensemble(tmp_path / "f", g)
    assert ens.n_iv == 2 and ens[1].samples[2, 1, 3] == vals[1, 2, 1, 3]


def test_dimension_mismatch(tmp_path):
    write_vqff(tmp_path / "f", np.zeros((1, 1, 1, 8)), 8)
    with pytest.raises(ForceFileError, match="dimension mismatch"):
        load_force_field(tmp_path / "f", G4)


def test_nt_mismatch(tmp_path):
    write_vqff(tmp_path / "f", np.zeros((1, 2, 1, 4)), 4)
    with pytest.raises(ForceFileError, match="n_t"):
        load_force_field(tmp_path / "f", G4, n_t=3)


def test_bad_magic_and_truncation(tmp_path):
    (tmp_path / "a").write_bytes(b"NOPE!!" + bytes(16))
    with pytest.raises(ForceFileError, match="magic"):
        read_vqff(tmp_path / "a")
    (tmp_path / "b").write_bytes(MAGIC + struct.pack("<4I", 1, 4, 1, 1) + bytes(8))
    with pytest.raises(ForceFileError, match="payload"):
        read_vqff(tmp_path / "b")
    (tmp_path / "c").write_bytes(MAGIC + struct.pack("<4I", 1, 3, 1, 1) + bytes(24))
    with pytest.raises(ForceFileError, match="malformed"):
        read_vqff(tmp_path / "c")


def test_non_finite_names_record(tmp_path):
    vals = np.zeros((1, 2, 1, 4))
    vals[0, 1, 0, 2] = np.nan
    write_vqff(tmp_path / "f", vals, 4)
    with pytest.raises(ForceFileError, match=r"i_t=1, axis=0, spatial=2"):
        read_vqff(tmp_path / "f")


def test_multi_realization_needs_choice(tmp_path):
    write_vqff(tmp_path / "f", np.zeros((2, 1, 1, 4)), 4)
    with pytest.raises(ForceFileError):
        load_force_field(tmp_path / "f", G4)
    assert load_force_field(tmp_path / "f", G4, realization=1).n_t == 1


@given(hnp.arrays(np.float64, (2, 3, 1, 4), elements=st.floats(-1e6, 1e6)))
def test_roundtrip_and_fmax_full_scan(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("rt") / "f"
    write_vqff(path, vals, 4)
    ens = load_force_ensemble(path, G4)
    for i in range(2):
        assert np.array_equal(ens[i].samples, vals[i])
        assert ens[i].f_max == max(abs(v) for v in vals[i].ravel())


def test_sample_analytic_examples():
    g = PhaseSpaceGrid(1, 64, 2.0, 1.0)
    ff = sample_analytic(AnalyticForce(-1.0, np.pi), g, n_t=5)
    assert ff.n_t == 5
    assert force_at(ff, 0, (16,), 0) == -1.0
    for i_t in range(5):
        assert np.array_equal(ff.slice(i_t), ff.slice(0))
    assert sample_analytic(AnalyticForce(0.0, np.pi), g).f_max == 0.0


def test_analytic_only_first_axis():
    g = PhaseSpaceGrid(2, 4, 2.0, 1.0)
    ff = sample_analytic(AnalyticForce(2.0, 1.0), g)
    assert np.all(ff.samples[:, 1] == 0)
    # the x-component depends on i_x only
    assert force_at(ff, 0, (1, 0), 0) == force_at(ff, 0, (1, 3), 0) == 2.0 * np.sin(0.5)


def test_force_at_errors():
    ff = sample_analytic(AnalyticForce(1.0, 1.0), G4, n_t=2)
    with pytest.raises(DomainError):
        force_at(ff, 2, (0,), 0)
    with pytest.raises(DomainError):
        force_at(ff, 0, (4,), 0)
    with pytest.raises(DomainError):
        force_at(ff, 0, (0,), 1)
    with pytest.raises(DomainError):
        sample_analytic(AnalyticForce(1.0, 1.0), G4, n_t=0)


def test_force_at_is_pure():
    rng = np.random.default_rng(0)
    ff = ForceField(rng.normal(size=(3, 2, 16)), 4)
    a = [force_at(ff, 1, (2, 3), 1) for _ in range(3)]
    assert a[0] == a[1] == a[2] == ff.samples[1, 1, 2 + 4 * 3]


def test_ensemble():
    a = sample_analytic(AnalyticForce(1.0, 1.0), G4)
    z = sample_analytic(AnalyticForce(0.0, 1.0), G4)
    assert ensemble_force_at([a], 0, 0, (1,), 0) == force_at(a, 0, (1,), 0)
    assert all(ensemble_force_at([a, z], 1, 0, (i,), 0) == 0 for i in range(4))
    with pytest.raises(DomainError):
        ensemble_force_at([a, z], 2, 0, (0,), 0)
    with pytest.raises(DomainError):
        ForceEnsemble((a, sample_analytic(AnalyticForce(0.0, 1.0), G4, n_t=2)))


def test_samples_immutable():
    ff = ForceField(np.zeros((1, 1, 4)), 4)
    with pytest.raises(ValueError):
        ff.samples[0, 0, 0] = 1.0
    with pytest.raises(DomainError):
        ForceField(np.full((1, 1, 4), np.inf), 4)
    with pytest.raises(DomainError):
        ForceField(np.zeros((1, 1, 5)), 4)
