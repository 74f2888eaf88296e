"""Gridded benchmark data: manufactured closed-form fields, CSV bundles, finite differences.

Matrices are stored row-major with rows indexing time and columns indexing space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import sympy as sp

__all__ = [
    "Grid",
    "GroundTruthEquation",
    "FieldBundle",
    "BundleError",
    "Problem",
    "PROBLEMS",
    "generate_manufactured",
    "save_bundle",
    "load_bundle",
    "finite_difference_fields",
    "derivative_name",
    "field_filename",
]


class BundleError(ValueError):
    """Raised for malformed, missing or inconsistent dataset contents."""


@dataclass(frozen=True)
class Grid:
    nx: int
    nt: int
    x_min: float
    x_max: float
    t_min: float
    t_max: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.nt) != self.nt:
            raise ValueError("grid point counts must be integers")
        if self.nx < 2 or self.nt < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got nx={self.nx}, nt={self.nt}")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        if not self.t_min < self.t_max:
            raise ValueError(f"t_min ({self.t_min}) must be below t_max ({self.t_max})")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / (self.nt - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.nx)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, T) arrays of shape (nt, nx)."""
        return np.meshgrid(self.x, self.t)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "nt": self.nt,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "t_min": self.t_min,
            "t_max": self.t_max,
        }


@dataclass(frozen=True)
class GroundTruthEquation:
    """Reference equation ``sum(c * term) = 0`` in canonical form.

    ``terms`` maps canonical term signatures to coefficients; the coefficient of
    ``normalization_term`` is 1.
    """

    terms: dict[str, float]
    normalization_term: str

    def __post_init__(self):
        if self.terms.get(self.normalization_term, 0) == 0:
            raise ValueError(
                f"normalization term {self.normalization_term!r} must carry a nonzero coefficient"
            )

    def to_dict(self) -> dict:
        return {"terms": dict(self.terms), "normalization_term": self.normalization_term}

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthEquation":
        return cls(
            terms={str(k): float(v) for k, v in data["terms"].items()},
            normalization_term=str(data["normalization_term"]),
        )

    def render(self) -> str:
        parts = [f"{c!r}*{sig}" for sig, c in self.terms.items()]
        return " + ".join(parts) + " = 0"


@dataclass
class FieldBundle:
    grid: Grid
    fields: dict[str, np.ndarray]
    ground_truth: GroundTruthEquation | None = None
    # memo of flattened term products, keyed by signature
    _term_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name, values in self.fields.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != self.grid.shape:
                raise BundleError(
                    f"field {name!r} has shape {arr.shape}, grid expects {self.grid.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise BundleError(f"field {name!r} contains non-finite values")
            arr.setflags(write=False)
            self.fields[name] = arr

    @property
    def names(self) -> list[str]:
        return list(self.fields)

    def product(self, names) -> np.ndarray:
        """Flattened elementwise product of the named fields, cached by sorted names."""
        key = tuple(sorted(names))
        cached = self._term_cache.get(key)
        if cached is None:
            missing = [n for n in key if n not in self.fields]
            if missing:
                raise KeyError(f"bundle has no field(s) {missing}")
            cached = np.ones(self.grid.nt * self.grid.nx)
            for n in key:
                cached = cached * self.fields[n].ravel()
            cached.setflags(write=False)
            self._term_cache[key] = cached
        return cached

    def equals(self, other: "FieldBundle") -> bool:
        if self.grid != other.grid or self.ground_truth != other.ground_truth:
            return False
        if list(self.fields) != list(other.fields):
            return False
        return all(np.array_equal(self.fields[k], other.fields[k]) for k in self.fields)


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------

_X, _T = sp.symbols("x t", real=True)


def derivative_name(x_order: int, t_order: int) -> str:
    """Field name for a pure derivative, e.g. (2, 0) -> ``d^2u/dx^2``."""
    if x_order and t_order:
        raise ValueError("mixed derivatives are not part of the token set")
    if x_order == 0 and t_order == 0:
        return "u"
    axis, order = ("x", x_order) if x_order else ("t", t_order)
    if order == 1:
        return f"du/d{axis}"
    return f"d^{order}u/d{axis}^{order}"


@dataclass(frozen=True)
class Problem:
    name: str
    x_range: tuple[float, float]
    t_range: tuple[float, float]
    # (x_order, t_order) pairs emitted as token fields
    derivatives: tuple[tuple[int, int], ...]
    truth: GroundTruthEquation
    solutions: dict[str, Callable[[], tuple[sp.Expr, dict]]]
    default_solution: str
    has_forcing: bool = False
    singular: Callable[[Grid], bool] | None = None

    def default_grid(self, nx: int = 101, nt: int = 101) -> Grid:
        return Grid(nx, nt, *self.x_range, *self.t_range)


# Each closed form returns (u, substitutions). ``u`` may be written through an
# undefined function such as tau(x, t); derivatives are taken on the compact form
# and the explicit definition substituted afterwards, which keeps expressions small.


def _burgers_linear():
    return _X / (1 + _T), {}


def _wave_single():
    return sp.sin(sp.pi * _X) * sp.cos(sp.pi * _T / 5), {}


def _wave_two_mode():
    # two standing modes; a single mode is an eigenfunction and admits u_tt ~ u
    mode1 = sp.sin(sp.pi * _X) * sp.cos(sp.pi * _T / 5)
    mode2 = sp.sin(2 * sp.pi * _X) * sp.cos(2 * sp.pi * _T / 5)
    return mode1 + sp.Rational(1, 2) * mode2, {}


def _kdv_single_soliton(c=1):
    c = sp.nsimplify(c)
    return c / 2 * sp.sech(sp.sqrt(c) * (_X - c * _T) / 2) ** 2, {}


def _kdv_two_soliton(k1=1, k2=sp.Rational(3, 2), x1=-10, x2=-25):
    # Hirota form u = 2 (log tau)_xx; soliton i moves at speed k_i**2
    tau = sp.Function("tau")(_X, _T)
    eta1 = k1 * (_X - x1) - k1**3 * _T
    eta2 = k2 * (_X - x2) - k2**3 * _T
    a12 = ((k1 - k2) / (k1 + k2)) ** 2
    explicit = 1 + sp.exp(eta1) + sp.exp(eta2) + a12 * sp.exp(eta1 + eta2)
    return 2 * sp.diff(sp.log(tau), _X, 2), {tau: explicit}


def _kdv_forced():
    return sp.sin(2 * _X + 1) * sp.cos(_T) + sp.Rational(1, 2) * _X**2 * sp.exp(-_T), {}


def _burgers_cole_hopf(nu=sp.Rational(1, 10)):
    # Cole-Hopf transform of a heat solution with two exponential modes: two
    # fronts moving at different speeds, so no single traveling-wave relation holds
    phi = sp.Function("phi")(_X, _T)
    k1, x1, k2, x2 = -3, -4, 2, 4
    explicit = (
        1 + sp.exp(k1 * (_X - x1) + nu * k1**2 * _T) + sp.exp(k2 * (_X - x2) + nu * k2**2 * _T)
    )
    return -2 * nu * sp.diff(phi, _X) / phi, {phi: explicit}


_BURGERS_TOKENS = ((0, 0), (1, 0), (2, 0), (0, 1))
_KDV_TOKENS = ((0, 0), (1, 0), (2, 0), (3, 0), (0, 1))

PROBLEMS: dict[str, Problem] = {
    "burgers_inviscid": Problem(
        name="burgers_inviscid",
        x_range=(-4000.0, 4000.0),
        t_range=(0.0, 4.0),
        derivatives=_BURGERS_TOKENS,
        truth=GroundTruthEquation({"du/dt": 1.0, "du/dx*u": 1.0}, "du/dt"),
        solutions={"linear": _burgers_linear},
        default_solution="linear",
        singular=lambda g: g.t_min <= -1.0 <= g.t_max,
    ),
    "wave": Problem(
        name="wave",
        x_range=(0.0, 1.0),
        t_range=(0.0, 1.0),
        derivatives=((0, 0), (1, 0), (2, 0), (0, 1), (0, 2)),
        truth=GroundTruthEquation({"d^2u/dt^2": 1.0, "d^2u/dx^2": -1.0 / 25.0}, "d^2u/dt^2"),
        solutions={"two_mode": _wave_two_mode, "single_mode": _wave_single},
        default_solution="two_mode",
    ),
    "kdv": Problem(
        name="kdv",
        x_range=(0.0, 1.0),
        t_range=(0.0, 1.0),
        derivatives=_KDV_TOKENS,
        truth=GroundTruthEquation(
            {"du/dt": 1.0, "du/dx*u": 6.0, "d^3u/dx^3": 1.0, "forcing": -1.0}, "du/dt"
        ),
        solutions={"forced": _kdv_forced},
        default_solution="forced",
        has_forcing=True,
    ),
    "burgers_viscous": Problem(
        name="burgers_viscous",
        x_range=(-8.0, 8.0),
        t_range=(0.0, 10.0),
        derivatives=_BURGERS_TOKENS,
        truth=GroundTruthEquation(
            {"du/dt": 1.0, "du/dx*u": 1.0, "d^2u/dx^2": -0.1}, "du/dt"
        ),
        solutions={"cole_hopf": _burgers_cole_hopf},
        default_solution="cole_hopf",
    ),
    "kdv_homogeneous": Problem(
        name="kdv_homogeneous",
        x_range=(-30.0, 30.0),
        t_range=(0.0, 20.0),
        derivatives=_KDV_TOKENS,
        truth=GroundTruthEquation({"du/dt": 1.0, "du/dx*u": 6.0, "d^3u/dx^3": 1.0}, "du/dt"),
        solutions={"two_soliton": _kdv_two_soliton, "single_soliton": _kdv_single_soliton},
        default_solution="two_soliton",
    ),
}


def generate_manufactured(problem: str, grid: Grid, solution: str | None = None) -> FieldBundle:
    """Sample a closed-form solution of ``problem`` and its exact token fields on ``grid``.

    Derivatives are taken symbolically, so the emitted fields satisfy the PDE up
    to floating-point rounding. For the inhomogeneous KdV problem the forcing
    field is the residual of the chosen closed form and is emitted as the
    ``forcing`` token.
    """
    try:
        prob = PROBLEMS[problem]
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}; valid ids: {', '.join(PROBLEMS)}") from None
    solution = solution or prob.default_solution
    if solution not in prob.solutions:
        raise ValueError(
            f"unknown solution {solution!r} for {problem}; valid: {', '.join(prob.solutions)}"
        )
    if prob.singular is not None and prob.singular(grid):
        raise ValueError(f"grid intersects a singularity of the {problem} closed form")

    u, subs = prob.solutions[solution]()
    exprs: dict[str, sp.Expr] = {}
    for x_order, t_order in prob.derivatives:
        expr = u
        if x_order:
            expr = sp.diff(expr, _X, x_order)
        if t_order:
            expr = sp.diff(expr, _T, t_order)
        exprs[derivative_name(x_order, t_order)] = expr
    if prob.has_forcing:
        exprs["forcing"] = sp.diff(u, _T) + 6 * u * sp.diff(u, _X) + sp.diff(u, _X, 3)
    if subs:
        exprs = {k: e.subs(subs).doit() for k, e in exprs.items()}

    X, T = grid.mesh()
    fn = sp.lambdify((_X, _T), list(exprs.values()), modules="numpy", cse=True)
    with np.errstate(all="ignore"):
        values = fn(X, T)
    fields = {}
    for name, v in zip(exprs, values):
        arr = np.broadcast_to(np.asarray(v, dtype=float), X.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"closed form for {problem} is not finite on this grid (field {name})")
        fields[name] = arr
    return FieldBundle(grid=grid, fields=fields, ground_truth=prob.truth)


# ---------------------------------------------------------------------------
# Dataset directory I/O
# ---------------------------------------------------------------------------


def field_filename(name: str) -> str:
    return name.replace("/", "_") + ".csv"


def save_bundle(bundle: FieldBundle, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = bundle.grid.to_dict()
    manifest["fields"] = list(bundle.fields)
    manifest["ground_truth"] = bundle.ground_truth.to_dict() if bundle.ground_truth else None
    for name, values in bundle.fields.items():
        # repr() of a Python float is the shortest round-trip decimal
        lines = (",".join(repr(float(v)) for v in row) for row in values)
        (path / field_filename(name)).write_text("\n".join(lines) + "\n")
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _read_manifest(path: Path) -> dict:
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise BundleError(f"missing manifest.json in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"malformed manifest.json: {exc}") from exc
    required = ("nx", "nt", "x_min", "x_max", "t_min", "t_max", "fields")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise BundleError(f"manifest.json lacks keys {missing}")
    return manifest


def load_bundle(path) -> FieldBundle:
    path = Path(path)
    manifest = _read_manifest(path)
    try:
        grid = Grid(
            int(manifest["nx"]),
            int(manifest["nt"]),
            float(manifest["x_min"]),
            float(manifest["x_max"]),
            float(manifest["t_min"]),
            float(manifest["t_max"]),
        )
    except ValueError as exc:
        raise BundleError(f"invalid grid in manifest: {exc}") from exc
    names = manifest["fields"]
    if len(set(names)) != len(names):
        raise BundleError("manifest lists duplicate field names")
    fields = {}
    for name in names:
        fpath = path / field_filename(name)
        if not fpath.is_file():
            raise BundleError(f"missing field file {fpath.name} for field {name!r}")
        rows = [line for line in fpath.read_text().splitlines() if line.strip()]
        if len(rows) != grid.nt:
            raise BundleError(
                f"field {name!r} has {len(rows)} rows, manifest declares nt={grid.nt}"
            )
        data = np.empty(grid.shape)
        for i, line in enumerate(rows):
            cells = line.split(",")
            if len(cells) != grid.nx:
                raise BundleError(
                    f"field {name!r} row {i} has {len(cells)} columns, manifest declares nx={grid.nx}"
                )
            try:
                data[i] = [float(c) for c in cells]
            except ValueError as exc:
                raise BundleError(f"field {name!r} row {i}: {exc}") from exc
        if not np.all(np.isfinite(data)):
            raise BundleError(f"field {name!r} contains non-finite values")
        fields[name] = data
    gt = manifest.get("ground_truth")
    truth = GroundTruthEquation.from_dict(gt) if gt else None
    return FieldBundle(grid=grid, fields=fields, ground_truth=truth)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _second_order_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    n = f.shape[axis]
    if n < 3:
        raise ValueError("need at least 3 points for a second-order difference")
    return np.gradient(f, h, axis=axis, edge_order=2)


def finite_difference_fields(
    u: np.ndarray, grid: Grid, max_x_order: int, max_t_order: int
) -> FieldBundle:
    """Estimate pure derivatives of ``u`` by repeated second-order differences.

    Interior nodes use central differences and boundary nodes one-sided
    second-order stencils. Higher orders apply the first-derivative operator
    repeatedly.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ValueError(f"u has shape {u.shape}, grid expects {grid.shape}")
    if max_x_order < 1 or max_t_order < 1:
        raise ValueError("derivative orders must be at least 1")
    if not np.all(np.isfinite(u)):
        raise ValueError("u contains non-finite values")
    if grid.nx < max_x_order + 2:
        raise ValueError(f"nx={grid.nx} too small for x-order {max_x_order} (needs {max_x_order + 2})")
    if grid.nt < max_t_order + 2:
        raise ValueError(f"nt={grid.nt} too small for t-order {max_t_order} (needs {max_t_order + 2})")

    fields = {"u": u.copy()}
    d = u
    for order in range(1, max_x_order + 1):
        d = _second_order_diff(d, grid.dx, axis=1)
        fields[derivative_name(order, 0)] = d
    d = u
    for order in range(1, max_t_order + 1):
        d = _second_order_diff(d, grid.dt, axis=0)
        fields[derivative_name(0, order)] = d
    return FieldBundle(grid=grid, fields=fields)
