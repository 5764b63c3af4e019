"""Run configuration: line-oriented ``key = value`` text with ``[section]`` headers.

Keys before the first header form the implicit ``[run]`` block and may be
any known key; inside a named section only that section's keys are allowed.
"""
import configparser
import logging
import os
import re
from dataclasses import dataclass, field

from utils.elliptic import Tolerances
from utils.errors import ConfigParseError, InvalidArgumentError
from utils.evolution import SolverConfig
from utils.profiles import DENSITY_KINDS, INITIAL_KINDS, ProfileSpec

logger = logging.getLogger(__name__)

MODES = ("evolve", "aux-solve", "probe-barrier", "verify", "converge")
VERIFY_LEVELS = ("quick", "full")


def _float_list(text):
    return [float(item) for item in re.split(r"[,\s]+", text.strip()) if item]


# key -> (section, parser)
SCHEMA = {
    "mode": ("run", str),
    "output_dir": ("run", str),
    "seed": ("run", int),
    "snapshots": ("run", int),
    "R": ("solver", float),
    "Y": ("solver", float),
    "nx": ("solver", int),
    "ny": ("solver", int),
    "spacing": ("solver", float),
    "grade": ("solver", float),
    "epsilon": ("solver", float),
    "m": ("solver", float),
    "T": ("solver", float),
    "newton_tol": ("solver", float),
    "linear_tol": ("solver", float),
    "max_newton": ("solver", int),
    "linear_solver": ("solver", str),
    "abs_slack": ("solver", float),
    "rel_slack": ("solver", float),
    "initial": ("initial_data", str),
    "amp": ("initial_data", float),
    "width": ("initial_data", float),
    "center": ("initial_data", float),
    "scale": ("initial_data", float),
    "value": ("initial_data", float),
    "separation": ("initial_data", float),
    "initial_file": ("initial_data", str),
    "rho": ("density", str),
    "alpha": ("density", float),
    "rho_scale": ("density", float),
    "rho_file": ("density", str),
    "R0": ("probe", float),
    "probe_R": ("probe", _float_list),
    "per_octave": ("probe", int),
    "ntheta": ("probe", int),
    "mass": ("probe", float),
    "level": ("verify", str),
    "trials": ("verify", int),
    "levels": ("converge", int),
    "window": ("converge", float),
    "error_bound": ("converge", float),
}
SECTIONS = ("run", "solver", "initial_data", "density", "probe", "verify", "converge")
CASE_VARIANTS = {key.lower(): key for key in SCHEMA}
REQUIRED = {"evolve": ("R",), "aux-solve": ("R",)}
# converge defaults to the linear benchmark: u0 = 1/(1+x^2), R = Y = 50
MODE_DEFAULTS = {"converge": {"R": 50.0, "epsilon": 0.05, "initial": "cauchy"}}
NONNEGATIVE = ("amp", "value", "separation")
POSITIVE = ("width", "scale", "rho_scale", "mass", "window", "error_bound")
AT_LEAST = {"ntheta": 3, "per_octave": 1, "snapshots": 1, "levels": 1, "trials": 1}


@dataclass(frozen=True)
class ProbeSettings:
    R0: float = 1.0
    R_list: tuple = (4.0, 8.0, 16.0)
    per_octave: int = 16
    ntheta: int = 33
    mass: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    """A validated run: mode, solver parameters, profiles and output settings."""

    mode: str
    solver: SolverConfig | None
    initial_data: ProfileSpec
    density: ProfileSpec
    output_dir: str = "output"
    seed: int = 0
    snapshots: int = 5
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    level: str = "quick"
    trials: int | None = None
    levels: int = 3
    window: float = 5.0
    error_bound: float = 2e-2
    echo: dict = field(default_factory=dict)


def _line_numbers(text):
    """Map section names and (section, key) pairs to their 1-based lines."""
    lines = {}
    section = "run"
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        header = re.match(r"^\[([^\]]+)\]", stripped)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section, None), number)
            continue
        key = re.match(r"^([^=:]+?)\s*[=:]", stripped)
        if key:
            lines.setdefault((section, key.group(1).strip()), number)
    return lines


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    has_header = bool(re.match(r"^\s*\[", next((l for l in text.splitlines() if l.strip() and l.strip()[0] not in "#;"), "")))
    offset = 0 if has_header else 1
    source = text if has_header else "[run]\n" + text
    try:
        parser.read_string(source)
    except configparser.DuplicateOptionError as e:
        raise ConfigParseError(f"duplicate key '{e.option}'", (e.lineno or 0) - offset) from e
    except configparser.DuplicateSectionError as e:
        raise ConfigParseError(f"duplicate section [{e.section}]", (e.lineno or 0) - offset) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else 0
        raise ConfigParseError("malformed line", line - offset) from e
    return parser


def _collect(parser, lines):
    raw = {}
    # configparser copies [DEFAULT] keys into every section
    default = parser.default_section
    if (default, None) in lines or parser.defaults():
        raise ConfigParseError(f"[{default}] is not a supported section", lines.get((default, None), 0))
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigParseError(f"unknown section [{section}]", lines.get((section, None), 0))
        for key, text in parser.items(section):
            line = lines.get((section, key), 0)
            if key not in SCHEMA:
                variant = CASE_VARIANTS.get(key.lower())
                hint = f" (keys are case-sensitive: did you mean '{variant}'?)" if variant else ""
                raise ConfigParseError(f"unknown key '{key}'{hint}", line)
            home = SCHEMA[key][0]
            if section != "run" and section != home:
                raise ConfigParseError(f"key '{key}' belongs in [{home}], not [{section}]", line)
            if key in raw:
                raise ConfigParseError(f"key '{key}' given twice", line)
            kind = SCHEMA[key][1]
            try:
                value = kind(text.strip())
            except ValueError as e:
                expected = {float: "a number", int: "an integer"}.get(kind, "a list of numbers")
                raise ConfigParseError(f"key '{key}' expects {expected}, got '{text.strip()}'", line) from e
            raw[key] = (value, line)
    return raw


def _check_ranges(raw):
    """Reject parameter values no run could use, before anything is sampled."""
    for key, (value, line) in raw.items():
        if key in NONNEGATIVE and not value >= 0:
            raise ConfigParseError(f"'{key}' must be nonnegative, got {value}", line)
        if key in POSITIVE and not value > 0:
            raise ConfigParseError(f"'{key}' must be positive, got {value}", line)
        if key in AT_LEAST and value < AT_LEAST[key]:
            raise ConfigParseError(f"'{key}' must be at least {AT_LEAST[key]}, got {value}", line)


def _profile(raw, kind_key, file_key, kinds, default, param_keys, base_dir):
    kind, line = raw.get(kind_key, (default, 0))
    if kind not in kinds:
        raise ConfigParseError(f"'{kind_key}' must be one of {', '.join(kinds)}, got '{kind}'", line)
    path = None
    if kind == "file":
        if file_key not in raw:
            raise ConfigParseError(f"'{kind_key} = file' needs '{file_key}'", line)
        path, file_line = raw[file_key]
        path = os.path.join(base_dir, path) if base_dir and not os.path.isabs(path) else path
        if not os.path.exists(path):
            raise ConfigParseError(f"file not found: {path}", file_line)
    params = {key: raw[key][0] for key in param_keys if key in raw}
    return ProfileSpec(kind, params, path)


def parse_config(text, mode=None, base_dir=""):
    """
    Parse and validate a run configuration

    Args:
        text (str): Config text
        mode (str): Mode from the command line; overrides ``mode`` in the text
        base_dir (str): Directory that relative profile paths are resolved against

    Returns:
        RunConfig: Validated config with defaults applied

    Raises:
        ConfigParseError: Unknown key or section, missing required key,
            type mismatch or invalid value; carries the line number
    """
    lines = _line_numbers(text)
    raw = _collect(_read(text), lines)
    mode_defaults = {}

    def get(key, default=None):
        return raw[key][0] if key in raw else mode_defaults.get(key, default)

    def line_of(key):
        return raw[key][1] if key in raw else 0

    mode = mode or get("mode")
    if mode is None:
        raise ConfigParseError("missing required key 'mode'")
    if mode not in MODES:
        raise ConfigParseError(f"unknown mode '{mode}'", line_of("mode"))
    for key in REQUIRED.get(mode, ()):
        if key not in raw:
            raise ConfigParseError(f"missing required key '{key}' for mode {mode}")
    mode_defaults = MODE_DEFAULTS.get(mode, {})
    _check_ranges(raw)

    density = _profile(raw, "rho", "rho_file", DENSITY_KINDS, "one", ("alpha", "rho_scale"), base_dir)
    initial = _profile(raw, "initial", "initial_file", INITIAL_KINDS, get("initial", "bump"),
                       ("amp", "width", "center", "scale", "value", "separation"), base_dir)

    solver = None
    if get("R") is not None:
        try:
            tolerances = Tolerances(
                newton_tol=get("newton_tol", 1e-10),
                linear_tol=get("linear_tol", 1e-10),
                max_newton=get("max_newton", 50),
                linear_solver=get("linear_solver", "direct"),
                abs_slack=get("abs_slack", 1e-8),
                rel_slack=get("rel_slack", 1e-6),
            )
            solver = SolverConfig(
                R=get("R"), T=get("T", 1.0), m=get("m", 1.0), epsilon=get("epsilon", 0.01),
                Y=get("Y"), nx=get("nx"), ny=get("ny"), grade=get("grade", 1.1),
                spacing=get("spacing", 0.1), rho_spec=density, tolerances=tolerances,
            )
        except InvalidArgumentError as e:
            word = str(e).split()[0]
            if word in raw:
                line = line_of(word)
            else:
                line = line_of("linear_solver") if "linear solver" in str(e) else 0
            raise ConfigParseError(str(e), line) from e

    probe = ProbeSettings(
        R0=get("R0", 1.0),
        R_list=tuple(get("probe_R", [4.0, 8.0, 16.0])),
        per_octave=get("per_octave", 16),
        ntheta=get("ntheta", 33),
        mass=get("mass", 1.0),
    )
    if not probe.R0 > 0 or any(R <= 2.0 * probe.R0 for R in probe.R_list):
        raise ConfigParseError("probe radii must exceed 2 R0", line_of("probe_R") or line_of("R0"))

    level = get("level", "quick")
    if level not in VERIFY_LEVELS:
        raise ConfigParseError(f"'level' must be quick or full, got '{level}'", line_of("level"))

    config = RunConfig(
        mode=mode,
        solver=solver,
        initial_data=initial,
        density=density,
        output_dir=get("output_dir", "output"),
        seed=get("seed", 0),
        snapshots=get("snapshots", 5),
        probe=probe,
        level=level,
        trials=get("trials", None),
        levels=get("levels", 3),
        window=get("window", 5.0),
        error_bound=get("error_bound", 2e-2),
    )
    echo = {
        "mode": mode,
        "seed": config.seed,
        "initial_data": initial.describe(),
        "density": density.describe(),
        "solver": solver.describe() if solver else None,
        "probe": {"R0": probe.R0, "R_list": list(probe.R_list), "per_octave": probe.per_octave,
                  "ntheta": probe.ntheta, "mass": probe.mass},
        "verify": {"level": level, "trials": config.trials},
        "converge": {"levels": config.levels, "window": config.window, "error_bound": config.error_bound},
    }
    object.__setattr__(config, "echo", echo)
    logger.debug(f"Parsed config for mode {mode}")
    return config
