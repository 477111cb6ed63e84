"""Builders for adaptive-simulation and co-simulation case studies.

Solver step matrices, the error switched system, hybrid stability domains,
the Jacobi/zero-order-hold co-simulation step matrix, the inverted pendulum
instance, and small fixture languages.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .automaton import Automaton, remove_edge
from .css import Css
from .linalg import as_matrix, mat_exp, spectral_radius


class SolverMethod(str, enum.Enum):
    FORWARD_EULER = "fe"
    MIDPOINT = "md"
    RUNGE_KUTTA4 = "rk4"

    @property
    def order(self) -> int:
        return {"fe": 1, "md": 2, "rk4": 4}[self.value]

    @classmethod
    def parse(cls, text) -> "SolverMethod":
        if isinstance(text, cls):
            return text
        aliases = {
            "fe": cls.FORWARD_EULER, "euler": cls.FORWARD_EULER,
            "forward_euler": cls.FORWARD_EULER,
            "md": cls.MIDPOINT, "midpoint": cls.MIDPOINT,
            "rk4": cls.RUNGE_KUTTA4, "rg": cls.RUNGE_KUTTA4, "rk": cls.RUNGE_KUTTA4,
            "runge_kutta": cls.RUNGE_KUTTA4,
        }
        try:
            return aliases[str(text).lower()]
        except KeyError:
            raise ValueError(f"unknown solver method {text!r}") from None


def _poly_coeffs(method: SolverMethod, literal_rk4: bool = False) -> list[float]:
    if method is SolverMethod.FORWARD_EULER:
        return [1.0, 1.0]
    if method is SolverMethod.MIDPOINT:
        return [1.0, 1.0, 0.5]
    # literal_rk4 reproduces the printed (Ah)^2/12 coefficient for comparison
    return [1.0, 1.0, 1.0 / 12 if literal_rk4 else 0.5, 1.0 / 6, 1.0 / 24]


def solver_matrix(method, h: float, a_bar, literal_rk4: bool = False) -> np.ndarray:
    """One-step transition matrix of an explicit method on ``x' = a_bar x``.

    ``I + Z``, ``I + Z + Z^2/2`` and ``sum_{j<=4} Z^j/j!`` with ``Z = a_bar h``
    for Forward Euler, Midpoint and classical RK4.
    """
    method = SolverMethod.parse(method)
    if h <= 0:
        raise ValueError("step size must be positive")
    a = as_matrix(a_bar)
    z = a * h
    out = np.zeros_like(z)
    power = np.eye(z.shape[0])
    for c in _poly_coeffs(method, literal_rk4):
        out = out + c * power
        power = power @ z
    return out


def stability_function(method, z, literal_rk4: bool = False):
    """Scalar stability polynomial ``R(z)``; accepts complex arrays."""
    coeffs = _poly_coeffs(SolverMethod.parse(method), literal_rk4)
    return np.polynomial.polynomial.polyval(z, coeffs)


# ---------------------------------------------------------------------------
# adaptive simulation


@dataclass
class ErrorSystem:
    css: Css
    local_error: tuple[np.ndarray, ...]
    modes: tuple[tuple[SolverMethod, float], ...]


def error_system(a_bar, modes: Iterable[tuple], literal_rk4: bool = False) -> ErrorSystem:
    """Unconstrained error switched system of an adaptive one-step solver.

    Each ``(method, h)`` gives the mode ``A = solver_matrix(method, h)`` and
    the local-error operator ``A - exp(a_bar h)`` (multiply by the exact state
    to get the local error).  The local errors are diagnostic only.
    """
    a = as_matrix(a_bar)
    parsed = tuple((SolverMethod.parse(m), float(h)) for m, h in modes)
    mats, errs, names = [], [], []
    for meth, h in parsed:
        mat = solver_matrix(meth, h, a, literal_rk4)
        mats.append(mat)
        errs.append(mat - mat_exp(a, h))
        names.append(f"{meth.value},{h:g}")
    g = Automaton.full_shift(len(mats))
    return ErrorSystem(Css(tuple(mats), g, tuple(names)), tuple(errs), parsed)


@dataclass
class StabilityGrid:
    re: np.ndarray
    im: np.ndarray
    magnitude: np.ndarray  # shape (len(im), len(re))

    @property
    def stable(self) -> np.ndarray:
        return self.magnitude < 1.0

    def rows(self):
        for i, y in enumerate(self.im):
            for j, x in enumerate(self.re):
                mag = float(self.magnitude[i, j])
                yield float(x), float(y), mag, mag < 1.0

    def to_csv(self, fh) -> None:
        fh.write("re,im,magnitude,stable\n")
        for x, y, mag, st in self.rows():
            fh.write(f"{x:.10g},{y:.10g},{mag:.10g},{int(st)}\n")


def stability_domain_grid(methods: Sequence, re_range=(-3.0, 1.0), im_range=(-2.0, 2.0),
                          resolution: int = 201, literal_rk4: bool = False) -> StabilityGrid:
    """``|R_1(z) ... R_p(z)|^(1/p)`` of a hybrid method on a grid of ``z = lambda h``.

    ``methods`` lists the methods applied in sequence; a single method gives
    its ordinary stability region.  A point is stable iff the magnitude is < 1.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    methods = [SolverMethod.parse(m) for m in methods]
    if not methods:
        raise ValueError("at least one method is required")
    re = np.linspace(*re_range, resolution)
    im = np.linspace(*im_range, resolution)
    z = re[None, :] + 1j * im[:, None]
    prod = np.ones_like(z)
    for meth in methods:
        prod = prod * stability_function(meth, z, literal_rk4)
    mag = np.abs(prod) ** (1.0 / len(methods))
    return StabilityGrid(re, im, mag)


# ---------------------------------------------------------------------------
# co-simulation


@dataclass(frozen=True)
class Simulator:
    """Linear simulator ``x' = A x + B u``, ``y = C x + D u``.

    A simulator without internal dynamics has a 0-dimensional state.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-d")
            object.__setattr__(self, name, arr)
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx):
            raise ValueError("A must be square")
        nu = self.B.shape[1]
        ny = self.C.shape[0]
        if self.B.shape != (nx, nu) or self.C.shape != (ny, nx) or self.D.shape != (ny, nu):
            raise ValueError("inconsistent A/B/C/D dimensions")

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]

    @property
    def ny(self) -> int:
        return self.C.shape[0]

    def augmented(self) -> np.ndarray:
        """``[[A, B], [0, 0]]``: the input held constant over a step."""
        n = self.nx + self.nu
        out = np.zeros((n, n))
        out[: self.nx, : self.nx] = self.A
        out[: self.nx, self.nx:] = self.B
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Simulator":
        """Read ``{"nx", "nu", "ny", "A", "B", "C", "D"}``; empty blocks may be ``[]``."""
        nx, nu, ny = (int(d[k]) for k in ("nx", "nu", "ny"))
        shapes = {"A": (nx, nx), "B": (nx, nu), "C": (ny, nx), "D": (ny, nu)}
        return cls(*(np.array(d.get(k, []), dtype=float).reshape(shapes[k]) for k in "ABCD"))

    def to_json(self) -> dict:
        return {
            "nx": self.nx, "nu": self.nu, "ny": self.ny,
            "A": self.A.tolist(), "B": self.B.tolist(),
            "C": self.C.tolist(), "D": self.D.tolist(),
        }


@dataclass(frozen=True)
class CoupledLinearPair:
    """Two simulators in feedback, ``u1 = y2`` and ``u2 = y1``, with ``D2 = 0``."""

    sim1: Simulator
    sim2: Simulator

    def __post_init__(self):
        if np.any(self.sim2.D != 0):
            raise ValueError("D2 must be zero (algebraic loop exclusion)")
        if self.sim1.nu != self.sim2.ny or self.sim2.nu != self.sim1.ny:
            raise ValueError("feedback dimensions do not match")

    def monolithic(self) -> np.ndarray:
        """State matrix of the exactly coupled system."""
        s1, s2 = self.sim1, self.sim2
        a = np.zeros((s1.nx + s2.nx,) * 2)
        i1 = slice(0, s1.nx)
        i2 = slice(s1.nx, s1.nx + s2.nx)
        a[i1, i1] = s1.A
        a[i1, i2] = s1.B @ s2.C
        a[i2, i1] = s2.B @ s1.C
        a[i2, i2] = s2.A + s2.B @ s1.D @ s2.C
        return a

    @classmethod
    def from_json(cls, d: dict) -> "CoupledLinearPair":
        return cls(Simulator.from_json(d["simulators"][0]), Simulator.from_json(d["simulators"][1]))

    def to_json(self) -> dict:
        return {"schema": "model/1", "simulators": [self.sim1.to_json(), self.sim2.to_json()]}


@dataclass(frozen=True)
class CosimConfig:
    """Solver method and internal step of each simulator, plus communication step ``H``."""

    methods: tuple[SolverMethod, SolverMethod]
    steps: tuple[float, float]
    H: float

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(SolverMethod.parse(m) for m in self.methods))
        object.__setattr__(self, "steps", tuple(float(h) for h in self.steps))
        for h in self.steps:
            if h <= 0 or h > self.H * (1 + 1e-12):
                raise ValueError("internal steps must satisfy 0 < h <= H")
        self.internal_steps()

    def internal_steps(self) -> tuple[int, int]:
        """``k_j = H / h_j``; raises if ``h_j`` does not divide ``H``."""
        out = []
        for h in self.steps:
            ratio = Fraction(str(self.H)) / Fraction(str(h))
            if ratio.denominator != 1:
                ratio_f = self.H / h
                if abs(ratio_f - round(ratio_f)) > 1e-9:
                    raise ValueError(f"internal step {h} does not divide H = {self.H}")
                ratio = Fraction(round(ratio_f))
            out.append(int(ratio))
        return tuple(out)

    @property
    def label(self) -> str:
        return (f"H={self.H:g};S1={self.methods[0].value},{self.steps[0]:g};"
                f"S2={self.methods[1].value},{self.steps[1]:g}")

    @classmethod
    def from_json(cls, d: dict) -> "CosimConfig":
        return cls(tuple(d["methods"]), tuple(d["steps"]), float(d["H"]))

    def to_json(self) -> dict:
        return {"H": self.H, "methods": [m.value for m in self.methods], "steps": list(self.steps)}


def cosim_step_matrix(pair: CoupledLinearPair, cfg: CosimConfig, solver=None) -> np.ndarray:
    """Jacobi co-simulation step matrix with zero-order-hold inputs.

    Computes ``P diag(At1^k1, At2^k2) E`` where ``Atj`` is the one-step solver
    matrix of the augmented system ``[[Aj, Bj], [0, 0]]``, ``P`` picks
    ``(x1, x2)`` out of ``(x1, u1, x2, u2)`` and ``E`` maps ``(x1, x2)`` to
    ``(x1, C2 x2, x2, C1 x1 + D1 C2 x2)``.

    ``solver(method, h, a_aug)`` overrides the step matrix (e.g. an exact
    exponential) and defaults to :func:`solver_matrix`.
    """
    solver = solver or solver_matrix
    s1, s2 = pair.sim1, pair.sim2
    k1, k2 = cfg.internal_steps()
    blocks = []
    for sim, meth, h, k in ((s1, cfg.methods[0], cfg.steps[0], k1),
                            (s2, cfg.methods[1], cfg.steps[1], k2)):
        step = solver(meth, h, sim.augmented())
        blocks.append(np.linalg.matrix_power(step, k))
    n1, n2 = s1.nx, s2.nx
    m1, m2 = s1.nu, s2.nu
    # embedding rows: x1, u1 = C2 x2, x2, u2 = C1 x1 + D1 C2 x2
    emb = np.zeros((n1 + m1 + n2 + m2, n1 + n2))
    emb[:n1, :n1] = np.eye(n1)
    emb[n1:n1 + m1, n1:] = s2.C
    emb[n1 + m1:n1 + m1 + n2, n1:] = np.eye(n2)
    emb[n1 + m1 + n2:, :n1] = s1.C
    emb[n1 + m1 + n2:, n1:] = s1.D @ s2.C
    big = np.zeros((n1 + m1 + n2 + m2,) * 2)
    big[:n1 + m1, :n1 + m1] = blocks[0]
    big[n1 + m1:, n1 + m1:] = blocks[1]
    proj = np.zeros((n1 + n2, n1 + m1 + n2 + m2))
    proj[:n1, :n1] = np.eye(n1)
    proj[n1:, n1 + m1:n1 + m1 + n2] = np.eye(n2)
    return proj @ big @ emb


def exact_solver(method, h, a_aug) -> np.ndarray:
    """Drop-in for :func:`solver_matrix` that integrates exactly."""
    return mat_exp(a_aug, h)


# ---------------------------------------------------------------------------
# inverted pendulum


@dataclass(frozen=True)
class PendulumParams:
    M: float = 0.5
    m: float = 0.2
    b: float = 0.1
    I: float = 0.006
    g: float = 9.8
    l: float = 0.3

    def __post_init__(self):
        if min(self.M, self.m, self.b, self.I, self.g, self.l) <= 0:
            raise ValueError("pendulum parameters must be positive")

    @property
    def p(self) -> float:
        return self.I * (self.M + self.m) + self.M * self.m * self.l ** 2


#: Linear-quadratic regulator gain of the controller simulator.
LQR_GAIN = (1.0000, 1.6567, -18.6854, -3.4594)


def pendulum_pair(params: PendulumParams | None = None) -> CoupledLinearPair:
    """Controller (simulator 1, no state) in feedback with the linearised pendulum."""
    q = params or PendulumParams()
    M, m, b, I, g, l, p = q.M, q.m, q.b, q.I, q.g, q.l, q.p
    a2 = np.array([
        [0, 1, 0, 0],
        [0, -(I + m * l ** 2) * b / p, (m ** 2 * g * l ** 2) / p, 0],
        [0, 0, 0, 1],
        [0, -(m * l * b) / p, m * g * l * (M + m) / p, 0],
    ])
    b2 = np.array([[0.0], [(I + m * l ** 2) / p], [0.0], [m * l / p]])
    controller = Simulator(np.zeros((0, 0)), np.zeros((0, 4)), np.zeros((1, 0)),
                           np.array([LQR_GAIN]))
    pendulum = Simulator(a2, b2, np.eye(4), np.zeros((4, 1)))
    return CoupledLinearPair(controller, pendulum)


def pendulum_candidate_configs() -> list[CosimConfig]:
    """All (method, internal step, H) combinations with the step dividing H.

    The controller has no state, so its solver settings are pinned to the
    pendulum's.
    """
    out = []
    for H in (0.1, 0.2):
        for h in (0.01, 0.02, 0.1, 0.2):
            if h > H + 1e-12:
                continue
            for meth in (SolverMethod.FORWARD_EULER, SolverMethod.MIDPOINT):
                out.append(CosimConfig((meth, meth), (h, h), H))
    return out


def load_pendulum_mode_map() -> dict:
    text = resources.files("switchstab.data").joinpath("pendulum_modes.json").read_text()
    return json.loads(text)


class ReconstructionError(RuntimeError):
    pass


@dataclass
class PendulumInstance:
    pair: CoupledLinearPair
    configs: list[CosimConfig]
    css: Css
    mode_map: dict


def pendulum_instance(params: PendulumParams | None = None) -> PendulumInstance:
    """The 8-mode unconstrained co-simulation switched system of the pendulum.

    Modes follow the frozen map in ``data/pendulum_modes.json``.  Raises
    :class:`ReconstructionError` unless exactly three modes, labelled 2, 3 and
    4, have spectral radius above one.
    """
    pair = pendulum_pair(params)
    mode_map = load_pendulum_mode_map()
    configs = [CosimConfig.from_json(c) for c in mode_map["modes"]]
    mats = tuple(cosim_step_matrix(pair, c) for c in configs)
    names = tuple(c.label for c in configs)
    css = Css(mats, Automaton.full_shift(len(mats)), names)
    unstable = [j + 1 for j, a in enumerate(mats) if spectral_radius(a) > 1.0]
    if len(mats) != 8 or unstable != [2, 3, 4]:
        raise ReconstructionError(
            f"expected modes 2, 3, 4 unstable out of 8; got {unstable} out of {len(mats)}"
        )
    return PendulumInstance(pair, configs, css, mode_map)


# ---------------------------------------------------------------------------
# fixture languages


def no_k_run_language(k: int) -> Automaton:
    """Words over ``{1, 2}`` with no ``k`` consecutive 1s.

    Node ``c{j}`` records a current run of ``j`` ones, ``0 <= j < k``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    nodes = [f"c{j}" for j in range(k)]
    edges = []
    for j in range(k):
        edges.append((f"c{j}", "c0", 2))
        if j + 1 < k:
            edges.append((f"c{j}", f"c{j + 1}", 1))
    return Automaton(2, tuple(nodes), tuple(edges))


FIGURE4_EDGES = (
    ("v1", "v2", 2),
    ("v2", "v1", 1),
    ("v2", "v2", 2),
    ("v2", "v3", 3),
    ("v3", "v3", 3),
    ("v3", "v1", 4),
)


def figure4_fixture(check: bool = True) -> Automaton:
    """Three-node, four-symbol automaton carrying the cycle 234.

    With ``check`` the fixture validates itself: removing ``v1 -2-> v2``
    leaves Perron root 1 and removing ``v2 -3-> v3`` leaves the golden ratio.
    """
    g = Automaton(4, ("v1", "v2", "v3"), FIGURE4_EDGES)
    if check:
        from .automaton import perron_root

        r1 = perron_root(remove_edge(g, ("v1", "v2", 2)))
        r2 = perron_root(remove_edge(g, ("v2", "v3", 3)))
        golden = (1 + math.sqrt(5)) / 2
        if abs(r1 - 1.0) > 1e-9 or abs(r2 - golden) > 1e-9:
            raise ReconstructionError(f"figure-4 fixture gives {r1}, {r2}")
    return g
