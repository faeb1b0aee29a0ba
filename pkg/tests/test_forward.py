import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wglsm.forward import (
    FormatError,
    LSSystem,
    MultistaticData,
    NU0_CROSS,
    SolverError,
    add_noise,
    assemble_ls_system,
    born_scatter,
    format_nfm,
    make_array,
    parse_nfm,
    point_source_incident,
    read_nfm,
    scattered_at,
    solve_lippmann_schwinger,
    synthesize_near_field,
    write_nfm,
)
from wglsm.greens import GreensEvaluator, SeparationError
from wglsm.scatterer import Box, Geometry, Sphere, rasterize, tight_box
from wglsm.spectra import CrossSection

K = 10.0
CS = CrossSection()


@pytest.fixture(scope="module")
def ev():
    return GreensEvaluator(CS, K)


@pytest.fixture(scope="module")
def small():
    g = Geometry([Sphere((0.5, 0.45, 0.0), 0.1, 3.0 + 0.4j)])
    return rasterize(g, tight_box(g, 0.005), (6, 6, 6))


@pytest.fixture(scope="module")
def arr():
    return make_array(CS, -2.0, 3)


def test_make_array_examples():
    a1 = make_array(CS, -5.0, 1)
    assert np.allclose(a1.points, [[0.5, 0.5, -5.0]]) and np.allclose(a1.weights, [1.0])
    a8 = make_array(CS, -5.0, 8)
    assert a8.size == 64 and a8.weights.sum() == pytest.approx(1.0, rel=1e-14)
    a2 = make_array(CS, 0.0, 2)
    assert np.allclose(sorted(set(a2.points[:, 0])), [0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)])
    wide = make_array(CrossSection(2.0, 0.5), 1.0, 5)
    assert wide.weights.sum() == pytest.approx(1.0)
    assert np.all((wide.points[:, 0] > 0) & (wide.points[:, 0] < 2) & (wide.points[:, 1] < 0.5))
    with pytest.raises(ValueError):
        make_array(CS, 0.0, 0)


def test_zero_contrast(ev, arr):
    g = Geometry([Sphere((0.5, 0.5, 0.0), 0.1, 1.0)])
    v = rasterize(g, tight_box(g), (4, 4, 4))
    d = synthesize_near_field(ev, v, arr)
    assert not np.any(d.entries) and d.entries.shape == (27, 27)
    assert np.all(born_scatter(ev, v, np.ones((0, 3)), [0.5, 0.5, -2.0]) == 0)
    with pytest.raises(SolverError):
        solve_lippmann_schwinger(ev, v, np.zeros((0, 3)))


def test_single_cell_closed_form(ev):
    g = Geometry([Sphere((0.5, 0.5, 0.0), 0.01, 5.0)])
    v = rasterize(g, Box((0.45, 0.45, -0.05), (0.55, 0.55, 0.05)), (3, 3, 3))
    assert v.support.size == 1
    sys_ = assemble_ls_system(ev, v)
    Gs = sys_.gbar.reshape(3, 3)
    wi = np.array([[1.0, 2.0j, -0.5]])
    sol = solve_lippmann_schwinger(ev, sys_, wi)
    expect = np.linalg.solve(np.eye(3) - K**2 * 4.0 * v.cell_volume * Gs, wi[0])
    assert np.allclose(sol.total[0], expect, rtol=1e-12)
    # near the guide centre Gbar is diagonal up to truncation noise
    assert np.max(np.abs(Gs - np.diag(np.diag(Gs)))) < 1e-4 * np.max(np.abs(Gs))
    assert np.allclose(sol.total[0], wi[0] / (1 - K**2 * 4.0 * v.cell_volume * np.diag(Gs)), rtol=1e-5)


def test_ls_residual_and_callable_incident(ev, small):
    sol = solve_lippmann_schwinger(ev, small, lambda c: np.c_[np.exp(1j * K * c[:, 2]), 0 * c[:, :2]])
    assert sol.residual < 1e-12 and sol.total.shape == (small.support.size, 3)


def test_born_limit(ev, arr):
    g = Geometry([Sphere((0.5, 0.45, 0.0), 0.1, 1.01)])
    v = rasterize(g, tight_box(g, 0.005), (6, 6, 6))
    y, p = np.array([0.3, 0.6, -2.0]), np.array([0.0, 1.0, 0.0])
    inc = point_source_incident(ev, v, y, p)
    sol = solve_lippmann_schwinger(ev, v, inc)
    x = np.array([0.7, 0.4, -2.0])
    full, born = scattered_at(ev, sol, x), born_scatter(ev, v, inc, x)
    assert np.linalg.norm(full - born) < 0.02 * np.linalg.norm(full)
    assert np.linalg.norm(sol.total - inc) / np.linalg.norm(inc) < 0.02
    # linear in the contrast
    g2 = Geometry([Sphere((0.5, 0.45, 0.0), 0.1, 1.02)])
    v2 = rasterize(g2, tight_box(g2, 0.005), (6, 6, 6))
    assert np.allclose(born_scatter(ev, v2, inc, x), 2 * born, rtol=1e-12)


def test_born_refinement(ev):
    g = Geometry([Sphere((0.5, 0.45, 0.0), 0.1, 1.01)])
    y, x = np.array([0.3, 0.6, -2.0]), np.array([0.7, 0.4, -2.0])
    out = []
    for n in (6, 10, 14):
        v = rasterize(g, tight_box(g, 0.005), (n, n, n))
        out.append(born_scatter(ev, v, point_source_incident(ev, v, y, [1, 0, 0]), x))
    assert np.linalg.norm(out[2] - out[1]) < np.linalg.norm(out[1] - out[0])
    assert np.linalg.norm(out[2] - out[1]) < 0.1 * np.linalg.norm(out[2])


def test_reciprocity_pointwise(ev, small):
    x, z = np.array([0.2, 0.7, -1.5]), np.array([0.6, 0.3, -2.0])
    p, q = np.array([1.0, -0.5, 0.2]), np.array([0.1, 0.3, 1.0])
    a = scattered_at(ev, solve_lippmann_schwinger(ev, small, point_source_incident(ev, small, z, p)), x) @ q
    b = scattered_at(ev, solve_lippmann_schwinger(ev, small, point_source_incident(ev, small, x, q)), z) @ p
    assert abs(a - b) <= 1e-10 * abs(a)


def test_synthesized_reciprocity(ev, small, arr):
    d = synthesize_near_field(ev, small, arr)
    P = arr.size
    R = np.kron(np.eye(P), NU0_CROSS)
    # with the rotation on receiver rows, N R^T is symmetric
    S = d.entries @ R.T
    assert np.max(np.abs(S - S.T)) < 1e-10 * np.max(np.abs(S))
    assert not np.any(d.entries[2::3])
    raw = synthesize_near_field(ev, small, arr, tangential=False)
    assert np.allclose(R @ raw.entries, d.entries)


def test_separation_checks(ev, small):
    sol = solve_lippmann_schwinger(ev, small, np.ones((small.support.size, 3)))
    with pytest.raises(SeparationError):
        scattered_at(ev, sol, [0.5, 0.5, 0.0])
    with pytest.raises(SeparationError):
        synthesize_near_field(ev, small, make_array(CS, small.bbox.lo[2] - 0.01, 2))


def test_energy_sign(ev, small):
    """Im <T w_inc, w_inc> >= 0 for a lossy scatterer."""
    sys_ = assemble_ls_system(ev, small)
    chi = np.repeat(sys_.chi, 3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        wi = rng.normal(size=3 * sys_.n_cells) + 1j * rng.normal(size=3 * sys_.n_cells)
        w, _ = sys_.solve(wi)
        # T maps w_inc to the induced polarisation chi w
        val = np.vdot(wi, chi * w) * small.cell_volume
        assert val.imag >= 0


def test_add_noise_examples(rng):
    d = MultistaticData(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)), K, -2.0, 4)
    assert np.array_equal(add_noise(d, 0.0, 5).entries, d.entries)
    n1, n2 = add_noise(d, 0.01, 5), add_noise(d, 0.01, 5)
    assert np.array_equal(n1.entries, n2.entries) and n1.eta == 0.01 and n1.seed == 5
    assert not np.array_equal(n1.entries, add_noise(d, 0.01, 6).entries)
    with pytest.raises(ValueError):
        add_noise(d, -1.0, 0)


def test_noise_level_monte_carlo(rng):
    d = MultistaticData(rng.normal(size=(192, 192)) + 1j * rng.normal(size=(192, 192)), K, -5.0, 64)
    for eta in (0.001, 0.01):
        errs = [np.linalg.norm(add_noise(d, eta, s).entries - d.entries) / np.linalg.norm(d.entries)
                for s in range(20)]
        assert np.mean(errs) == pytest.approx(eta / math.sqrt(3), rel=0.1)


def _data(rng, P=2):
    m = rng.normal(size=(3 * P, 3 * P)) + 1j * rng.normal(size=(3 * P, 3 * P))
    m[0, 0] = complex(1e-300, -0.0)
    m[1, 1] = complex(math.pi, 1 / 3)
    return MultistaticData(m, 12.5, -3.0, P, 0.001, 2**64 - 1)


def test_nfm_round_trip(tmp_path, rng):
    d = _data(rng)
    path = tmp_path / "d.nfm"
    write_nfm(path, d)
    back = read_nfm(path)
    assert np.array_equal(back.entries, d.entries) and (back.k, back.r, back.P, back.eta, back.seed) == (
        d.k, d.r, d.P, d.eta, d.seed)
    text = path.read_text()
    assert text.splitlines()[0] == "NFM v1 rows=6 cols=6 k=12.5 r=-3.0 P=2 eta=0.001 seed=18446744073709551615"
    assert format_nfm(back) == text


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False), min_size=9, max_size=9))
def test_nfm_round_trip_exact(vals):
    d = MultistaticData(np.array(vals).reshape(3, 3), 20.0, -5.0, 1)
    back = parse_nfm(format_nfm(d))
    assert np.array_equal(back.entries.view(float), d.entries.view(float))


@pytest.mark.parametrize("text,where", [
    ("", "line 1"),
    ("NFM v2 rows=3 cols=3 k=1 r=0 P=1 eta=0 seed=0\n", "line 1"),
    ("NFM v1 rows=3 cols=3 k=1 r=0 P=1 eta=0\n", "line 1"),
    ("NFM v1 rows=1 cols=3 k=1 r=0 P=1 eta=0 seed=0\n1 0;1 0;1 0\n", "line 1"),
    ("NFM v1 rows=3 cols=3 k=1 r=0 P=1 eta=0 seed=0\n1 0;1 0;1 0\n1 0;1 0\n1 0;1 0;1 0\n", "line 3"),
    ("NFM v1 rows=3 cols=3 k=1 r=0 P=1 eta=0 seed=0\n1 0;1 0;1 0\n1 0;1 0;1 x\n1 0;1 0;1 0\n", "line 3, column 3"),
])
def test_nfm_malformed(text, where):
    with pytest.raises(FormatError, match=where):
        parse_nfm(text)
