"""Define root level vars, terminal colors and the exception hierarchy."""

import os
import pathlib
import sys

import colorama

colorama.init(autoreset=True)

# Geometric tolerances. Floorplans are meter scale, so millimeters are plenty.
AREA_EPS = 1e-6  # m^2
DIST_EPS = 1e-3  # m
OVERLAP_EPS = 1e-4  # m^2, "touching" threshold for disk and marker collisions.
COORD_LIMIT = 1000.0  # m

# Config defaults trace back to these.
PERSONAL_DIAMETER = 0.6
SURFACE_OFFSET = 0.45
D_STEP = 0.2
MARKER_LENGTH = 0.6
MARKER_THICKNESS = 0.1
MARKER_START = 0.3
MARKER_STEP = 0.1
BOUNDARY_EPSILON = 0.05
A_MIN = 4.0
GEOMETRIC_WEIGHT = 10.0
INTERACTION_WEIGHT = 100.0

# Shorten color variables
RST = colorama.Fore.RESET
if sys.platform == "win32":
    BOLD = "[1m"  # pylint: disable=invalid-character-esc
    # Windows terminal colors are hard to see, use bright.
    R = colorama.Fore.LIGHTRED_EX
    G = colorama.Fore.LIGHTGREEN_EX
    B = colorama.Fore.LIGHTBLUE_EX
    Y = colorama.Fore.LIGHTYELLOW_EX
    C = colorama.Fore.LIGHTCYAN_EX
    M = colorama.Fore.LIGHTMAGENTA_EX
else:
    BOLD = "\033[1m"
    R = colorama.Fore.RED
    G = colorama.Fore.GREEN
    B = colorama.Fore.BLUE
    Y = colorama.Fore.YELLOW
    C = colorama.Fore.CYAN
    M = colorama.Fore.MAGENTA

RB = R + colorama.Style.BRIGHT + BOLD
GB = G + colorama.Style.BRIGHT + BOLD
CB = C + colorama.Style.BRIGHT + BOLD

OUT_ENV_VAR = "MUTUALSPACE_OUT"


def default_out_dir() -> pathlib.Path:
    """Output root, MUTUALSPACE_OUT wins over the built in default."""
    return pathlib.Path(os.environ.get(OUT_ENV_VAR, "out"))


class MutualSpaceError(Exception):
    """Error running mutualspace."""


class GeometryError(MutualSpaceError):
    """Polygon or pose violates its invariants."""


class FloorplanParseError(MutualSpaceError):
    """Floorplan JSON does not follow the schema."""

    def __init__(self, message: str, field_path: str = "") -> None:
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path


class FloorplanValidationError(MutualSpaceError):
    """Floorplan parsed but breaks a semantic invariant."""

    def __init__(self, message: str, region_id: str = "") -> None:
        super().__init__(f"region [{region_id}] {message}" if region_id else message)
        self.region_id = region_id


class OutOfBoundsError(MutualSpaceError):
    """Point lies outside the floorplan boundary."""


class TargetNotFoundError(MutualSpaceError):
    """No object can act as the interaction target."""


class MatchFailedError(MutualSpaceError):
    """Optimizer found no pose where client and host overlap."""


class CorpusError(MutualSpaceError):
    """Corpus does not have the expected host/home/office shape."""


class ConfigError(MutualSpaceError):
    """Run configuration could not be loaded."""
