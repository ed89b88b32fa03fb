import numpy as np
import pytest

from lrsidsa.geometry import build_grid
from lrsidsa.problems import builtin_names, builtin_problem, get_problem, problem_from_config, sample_materials


def test_grid_spacing_unit_square():
    g = build_grid((-1, 1), (-1, 1), 32, 32)
    assert g.dx == pytest.approx(1 / 16) and g.dy == pytest.approx(1 / 16)


def test_grid_spacing_lattice_domain():
    assert build_grid((0, 5), (0, 5), 75, 75).dx == pytest.approx(1 / 15)


def test_single_interior_point():
    assert build_grid((-1, 1), (-1, 1), 2, 2).interior_count == 1


def test_grid_points_reproducible():
    g = build_grid((-1, 1), (0, 3), 7, 5)
    assert g.x_points[0] == -1 and g.x_points[-1] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(g.x_points, -1 + np.arange(8) * g.dx)
    assert g.interior_shape == (4, 6)


def test_coarsen_and_field_embedding():
    g = build_grid((-1, 1), (-1, 1), 8, 4)
    c = g.coarsen()
    assert (c.nx, c.ny) == (4, 2)
    f = g.with_zero_boundary(np.arange(g.interior_count, dtype=float))
    assert f.shape == (5, 9) and f[0].sum() == 0 and f[1, 1] == 0.0 and f[1, 2] == 1.0


@pytest.mark.parametrize("bad", [((1, -1), (0, 1), 4, 4), ((0, 1), (0, 1), 1, 4)])
def test_bad_grids(bad):
    with pytest.raises(ValueError):
        build_grid(*bad)


def test_builtin_diffusion():
    p = builtin_problem("diffusion")
    assert p.sigma_s(0.3, -0.7) == 100 and p.source(0.0, 0.0) == 1.0


def test_builtin_variable_scattering():
    p = builtin_problem("variable_scattering")
    assert p.sigma_s(0.0, 0.0) == pytest.approx(1.0)
    assert p.sigma_s(1.0, 0.0) == pytest.approx(100.0)
    assert p.sigma_s(0.0, -1.0) == pytest.approx(100.0)


def test_builtin_pin_cell():
    p = builtin_problem("pin_cell")
    assert p.sigma_s(0.0, 0.0) == 1 and p.sigma_s(0.75, 0.0) == 100
    # interface nodes take the high-scattering side
    assert p.sigma_s(0.5, 0.0) == 100


def test_all_builtins_load():
    assert set(builtin_names()) == {"diffusion", "transport", "variable_scattering", "pin_cell", "lattice"}
    for name in builtin_names():
        assert get_problem(name).name == name
    with pytest.raises(KeyError):
        builtin_problem("nope")


def test_samples_constant_fields():
    g = build_grid((-1, 1), (-1, 1), 6, 6)
    m = sample_materials(builtin_problem("diffusion"), g)
    assert np.all(m.sigma_t_nodes == 100) and np.all(m.sigma_t_half_x == 100) and np.all(m.sigma_t_half_y == 100)
    m = sample_materials(builtin_problem("transport"), g)
    assert np.all(m.sigma_t_half_x == 1)
    assert m.sigma_t_half_x.shape == (7, 6) and m.sigma_t_half_y.shape == (6, 7)


def test_lattice_absorber_block():
    g = build_grid((0, 5), (0, 5), 20, 20)
    p = builtin_problem("lattice")
    m = sample_materials(p, g)
    # node (1.5, 1.5) lies inside an absorber block
    i = j = 6
    assert m.sigma_t_nodes[j, i] == 100 and m.sigma_s_nodes[j, i] == 0 and m.sigma_a_nodes[j, i] == 100
    assert p.source(2.5, 2.5) == 1 and p.source(0.5, 0.5) == 0


def test_nonpositive_sigma_t_rejected():
    spec = problem_from_config({"domain": {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, "sigma_s": 0.0, "sigma_a": 0.0})
    with pytest.raises(ValueError, match="strictly positive"):
        sample_materials(spec, build_grid((0, 1), (0, 1), 4, 4))


def test_problem_from_json_file(tmp_path):
    import json

    cfg = {"name": "box", "domain": {"x0": 0, "x1": 2, "y0": 0, "y1": 1},
           "sigma_s": {"formula": "constant", "value": 3.0}, "sigma_a": 0.5,
           "source": {"default": 0.0, "boxes": [{"x": [0, 1], "y": [0, 1], "value": 2.0}]}}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(cfg))
    p = get_problem(path)
    assert p.name == "box" and p.sigma_t(0.1, 0.1) == pytest.approx(3.5) and p.source(0.5, 0.5) == 2.0


def test_restrict_is_injection():
    g = build_grid((-1, 1), (-1, 1), 8, 8)
    m = sample_materials(builtin_problem("variable_scattering"), g)
    c = m.restrict()
    mc = sample_materials(builtin_problem("variable_scattering"), g.coarsen())
    for name in ("sigma_t_nodes", "sigma_t_half_x", "sigma_t_half_y", "source_nodes"):
        np.testing.assert_allclose(getattr(c, name), getattr(mc, name), rtol=1e-14)
