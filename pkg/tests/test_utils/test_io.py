import numpy as np
import pytest

from mfg_exit.errors import ConfigurationError
from mfg_exit.grid import CellField, CellVectorField, Field, build_grid
from mfg_exit.models import DiagnosticsReport
from mfg_exit.utils.io import (
    CONFIGS_DIR,
    dump_run_config,
    load_run_config,
    read_cell_csv,
    read_field_csv,
    resolve_config,
    write_field_csv,
    write_flux_csv,
    write_json,
)

CONFIG_NAMES = sorted(p.stem for p in CONFIGS_DIR.glob("*.toml"))


@pytest.mark.parametrize("name", CONFIG_NAMES)
def test_bundled_configs_load(name):
    config = load_run_config(name)
    assert len(config.n_cells) in (1, config.problem.domain.dim)


def test_load_by_name_and_by_path():
    by_name = load_run_config("positive_flux_above")
    by_path = load_run_config(CONFIGS_DIR / "positive_flux_above.toml")
    assert by_name == by_path
    assert by_name.n_cells == [200]
    assert by_name.oracle == "positive_flux_1d"
    assert by_name.problem.coupling.variant == "quadratic_positive_part"
    assert resolve_config("positive_flux_above.toml") == CONFIGS_DIR / "positive_flux_above.toml"


def test_dump_and_load_agree(tmp_path):
    config = load_run_config("model_2d")
    path = dump_run_config(config, tmp_path / "nested" / "model.json")
    assert load_run_config(path) == config


def test_unknown_config():
    with pytest.raises(ConfigurationError):
        load_run_config("no_such_config")


def test_unparsable_config(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("n_cells = [", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_run_config(path)


def test_invalid_config(tmp_path):
    path = tmp_path / "invalid.toml"
    path.write_text('n_cells = 8\n[problem.domain]\nextents = "wide"\n', encoding="utf-8")
    with pytest.raises(ConfigurationError) as info:
        load_run_config(path)
    assert "invalid run config" in str(info.value)


def test_field_csv(tmp_path, line32):
    u = Field(line32, np.linspace(1.0, 0.0, 33) ** 2)
    path = write_field_csv(u, tmp_path / "u.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 34
    np.testing.assert_array_equal(read_field_csv(path, line32).values, u.values)


def test_cell_csv_2d(tmp_path):
    grid = build_grid([(0.0, 1.0), (0.0, 2.0)], [3, 4])
    m = CellField(grid, np.arange(12.0).reshape(3, 4))
    path = write_field_csv(m, tmp_path / "m.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "x,y,value"
    np.testing.assert_array_equal(read_cell_csv(path, grid).values, m.values)


def test_csv_must_match_the_grid(tmp_path, line32):
    path = write_field_csv(Field(line32, np.zeros(33)), tmp_path / "u.csv")
    with pytest.raises(ConfigurationError):
        read_field_csv(path, build_grid((0.0, 1.0), 16))
    with pytest.raises(ConfigurationError):
        read_field_csv(path, build_grid((0.0, 2.0), 32))
    # nodal values are not cell values
    with pytest.raises(ConfigurationError):
        read_cell_csv(path, line32)


def test_flux_csv_header(tmp_path, square16):
    flux = CellVectorField(square16, np.ones(square16.cell_shape + (2,)))
    path = write_flux_csv(flux, tmp_path / "flux.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,y,value_x,value_y"
    assert len(lines) == 1 + 16 * 16


def test_write_json(tmp_path):
    path = write_json(DiagnosticsReport(neumann_error=0.5), tmp_path / "d.json")
    assert DiagnosticsReport.model_validate_json(path.read_text(encoding="utf-8")).neumann_error == 0.5
