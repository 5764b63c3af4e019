import pathlib
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pytest

from utils.config_utils import parse_config
from utils.errors import ConfigParseError
from utils.profiles import density_profile, initial_profile


def test_minimal_config_gets_defaults():
    config = parse_config("mode = evolve\nR = 10\nT = 1\nm = 1\n")
    assert config.mode == "evolve"
    assert config.solver.Y == 10.0
    assert config.solver.grade == 1.1
    assert config.solver.epsilon == 0.01
    assert config.solver.tolerances.linear_solver == "direct"
    assert config.initial_data.kind == "bump"
    assert config.density.kind == "one"
    assert config.seed == 0
    assert config.echo["solver"]["Y"] == 10.0


def test_sections_are_accepted():
    text = "[run]\nmode = verify\nseed = 7\n\n[verify]\nlevel = full\ntrials = 3\n"
    config = parse_config(text)
    assert config.level == "full"
    assert config.trials == 3
    assert config.seed == 7
    assert config.solver is None


def test_power_decay_density():
    config = parse_config("mode = evolve\nR = 4\n[density]\nrho = power-decay\nalpha = 2\n")
    x = np.linspace(-4.0, 4.0, 9)
    np.testing.assert_allclose(density_profile(config.density, x), 1.0 / (1.0 + x**2))


def test_probe_radii_list():
    config = parse_config("mode = probe-barrier\nprobe_R = 4, 8, 16, 32\nper_octave = 8\n")
    assert config.probe.R_list == (4.0, 8.0, 16.0, 32.0)
    assert config.probe.per_octave == 8


def test_mode_argument_overrides_the_text():
    assert parse_config("mode = evolve\nR = 2\n", mode="aux-solve").mode == "aux-solve"


@pytest.mark.parametrize("text, line, fragment", [
    ("mode = evolve\nR = 10\nsigma = 1\n", 3, "sigma"),
    ("mode = evolve\nR = abc\n", 2, "R"),
    ("mode = evolve\nR = 2\nepsilon = -0.1\n", 3, "epsilon"),
    ("mode = evolve\n[density]\nR = 2\n", 3, "belongs in [solver]"),
    ("mode = evolve\nR = 2\n[extras]\nfoo = 1\n", 3, "unknown section"),
    ("mode = teleport\n", 1, "unknown mode"),
    ("mode = verify\nlevel = huge\n", 2, "quick or full"),
    ("mode = probe-barrier\nprobe_R = 1.5, 4\n", 2, "2 R0"),
    ("mode = evolve\nR = 2\namp = -1\n", 3, "amp"),
    ("mode = evolve\nR = 2\n[initial_data]\nwidth = 0\n", 4, "width"),
    ("mode = probe-barrier\nntheta = 2\n", 2, "ntheta"),
    ("mode = converge\nlevels = 0\n", 2, "levels"),
    ("mode = verify\ntrials = 0\n", 2, "trials"),
    ("mode = evolve\nr = 2\n", 2, "did you mean 'R'"),
    ("mode = evolve\nR = 2\n[DEFAULT]\nm = 2\n", 3, "DEFAULT"),
])
def test_errors_carry_the_line(text, line, fragment):
    with pytest.raises(ConfigParseError) as excinfo:
        parse_config(text)
    assert excinfo.value.line == line
    assert fragment in str(excinfo.value)


def test_missing_required_key():
    with pytest.raises(ConfigParseError, match="'R'"):
        parse_config("mode = evolve\nT = 1\n")


def test_missing_mode():
    with pytest.raises(ConfigParseError, match="mode"):
        parse_config("R = 2\n")


def test_duplicate_key():
    with pytest.raises(ConfigParseError) as excinfo:
        parse_config("mode = evolve\nR = 2\nR = 3\n")
    assert excinfo.value.line == 3


def test_file_profile_is_resolved_and_interpolated(tmp_path):
    (tmp_path / "u0.csv").write_text("x,value\n-1,0\n0,2\n1,0\n")
    config = parse_config("mode = evolve\nR = 2\ninitial = file\ninitial_file = u0.csv\n", base_dir=str(tmp_path))
    values = initial_profile(config.initial_data, np.array([-2.0, -0.5, 0.0, 0.25]))
    np.testing.assert_allclose(values, [0.0, 1.0, 2.0, 1.5])


def test_missing_profile_file(tmp_path):
    with pytest.raises(ConfigParseError, match="not found"):
        parse_config("mode = evolve\nR = 2\ninitial = file\ninitial_file = nope.csv\n", base_dir=str(tmp_path))


def test_converge_defaults_to_the_linear_benchmark():
    config = parse_config("mode = converge\n")
    assert config.solver.R == 50.0
    assert config.solver.Y == 50.0
    assert config.solver.epsilon == 0.05
    assert config.solver.spacing == 0.1
    assert config.initial_data.kind == "cauchy"
    assert config.echo["initial_data"] == {"kind": "cauchy"}


def test_converge_keeps_explicit_choices():
    config = parse_config("mode = converge\nR = 20\nepsilon = 0.1\ninitial = bump\n")
    assert config.solver.R == 20.0
    assert config.solver.epsilon == 0.1
    assert config.initial_data.kind == "bump"


def test_benchmark_defaults_apply_to_converge_only():
    config = parse_config("mode = evolve\nR = 4\n")
    assert config.initial_data.kind == "bump"
    assert config.solver.epsilon == 0.01
    assert parse_config("mode = probe-barrier\n").solver is None


def test_pytest_deselects_slow_runs_by_default():
    pyproject = pathlib.Path(__file__).resolve().parent.parent / "pyproject.toml"
    options = tomllib.loads(pyproject.read_text())["tool"]["pytest"]["ini_options"]
    assert "not slow" in options["addopts"]
