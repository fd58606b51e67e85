"""Planar four-bar linkage kinematics and path-synthesis objective.

Geometry convention: crank pivot O2 at the origin, rocker pivot O4 at
(a41, 0) on the frame; a12 crank, a23 coupler, a34 rocker, all lengths in
consistent units.  The coupler point C hangs off the crank pin A at
distance a25, rotated by alpha from the coupler line A->B.  The rocker pin
B is taken on the elbow-up branch (cross((O4 - A), (B - A)) >= 0) for
every crank angle, which keeps the traced curve a single closed loop.

A crank-rocker (full crank rotation, oscillating rocker) is exactly a
strict-Grashof chain whose crank is the strictly shortest link; that is
what `grashof_class` tests and what the synthesis objective requires
before measuring the path error.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._fmt import format_float, write_csv
from .space import SearchSpace

LINK_BOUNDS = (10.0, 250.0)
ANGLE_BOUNDS = (-180.0, 180.0)

# Objective for designs that are not crank-rockers: a large plateau plus a
# slope on the Grashof violation so the search is pulled toward feasibility.
PENALTY_BASE = 1e9
PENALTY_SCALE = 1e6

_JSON_KEYS = ("a12", "a23", "a34", "a41", "a25", "alpha_deg")


class GrashofClass(enum.Enum):
    CRANK_ROCKER = "crank_rocker"
    GRASHOF_OTHER = "grashof_non_crank_rocker"
    NON_GRASHOF = "non_grashof"


class AssemblyError(ValueError):
    """The linkage cannot close at the requested crank angle."""


@dataclass(frozen=True)
class FourBarMechanism:
    """Link lengths plus the coupler-point offset (a25, alpha_deg)."""

    a12: float
    a23: float
    a34: float
    a41: float
    a25: float
    alpha_deg: float

    def __post_init__(self):
        for name in ("a12", "a23", "a34", "a41"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.a25 < 0:
            raise ValueError("a25 must be non-negative")

    @classmethod
    def from_array(cls, v) -> "FourBarMechanism":
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ValueError("expected (a12, a23, a34, a41, a25, alpha_deg)")
        return cls(*(float(x) for x in v))

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.a12, self.a23, self.a34, self.a41, self.a25, self.alpha_deg]
        )

    @classmethod
    def from_json(cls, path) -> "FourBarMechanism":
        with open(path) as fh:
            doc = json.load(fh)
        missing = [k for k in _JSON_KEYS if k not in doc]
        if missing:
            raise ValueError(f"mechanism JSON missing keys: {', '.join(missing)}")
        return cls(**{k: float(doc[k]) for k in _JSON_KEYS})

    def to_json(self, path) -> None:
        doc = {k: json.loads(format_float(getattr(self, k))) for k in _JSON_KEYS}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def grashof_class(a12, a23, a34, a41) -> GrashofClass:
    """Classify the chain; crank-rocker needs strict Grashof + shortest crank."""
    lengths = (a12, a23, a34, a41)
    if not all(x > 0 for x in lengths):
        raise ValueError("link lengths must be positive")
    s, p, q, l = sorted(lengths)
    if not l + s < p + q:
        return GrashofClass.NON_GRASHOF
    if a12 < min(a23, a34, a41):
        return GrashofClass.CRANK_ROCKER
    return GrashofClass.GRASHOF_OTHER


def coupler_point(m: FourBarMechanism, theta2: float) -> tuple[float, float]:
    """Coupler point at one crank angle (radians); raises AssemblyError."""
    ax = m.a12 * math.cos(theta2)
    ay = m.a12 * math.sin(theta2)
    dx = m.a41 - ax
    dy = -ay
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise AssemblyError("crank pin coincides with the rocker pivot")
    if d > m.a23 + m.a34 or d < abs(m.a23 - m.a34):
        raise AssemblyError(
            f"cannot assemble at theta2 = {theta2!r}: pin separation {d!r}"
        )
    a = (m.a23 * m.a23 - m.a34 * m.a34 + d * d) / (2.0 * d)
    h = math.sqrt(max(m.a23 * m.a23 - a * a, 0.0))
    ux = dx / d
    uy = dy / d
    bx = ax + a * ux - h * uy
    by = ay + a * uy + h * ux
    th3 = math.atan2(by - ay, bx - ax)
    alpha = math.radians(m.alpha_deg)
    return (
        ax + m.a25 * math.cos(th3 + alpha),
        ay + m.a25 * math.sin(th3 + alpha),
    )


def trace_path(m: FourBarMechanism, n: int) -> np.ndarray:
    """Coupler points at n equally spaced crank angles 2*pi*i/n, shape (n, 2)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    theta2 = 2.0 * np.pi * np.arange(n) / n
    cx = np.empty(n)
    cy = np.empty(n)
    bad = kernels.trace_coupler(
        m.a12, m.a23, m.a34, m.a41, m.a25, math.radians(m.alpha_deg),
        theta2, cx, cy,
    )
    if bad >= 0:
        raise AssemblyError(
            f"cannot assemble at theta2 = {theta2[bad]:.6g} rad "
            f"(sample {bad} of {n})"
        )
    return np.column_stack((cx, cy))


def path_error(m: FourBarMechanism, target, pairing: str = "cyclic") -> float:
    """Sum of squared distances from the traced path to the target points.

    The path is traced with as many samples as the target has points.
    `fixed` pairs sample i with target i from theta2 = 0; `cyclic` takes
    the minimum over all rotations of that pairing in both traversal
    directions, leaving the crank phase free.
    """
    if pairing not in ("fixed", "cyclic"):
        raise ValueError("pairing must be 'fixed' or 'cyclic'")
    target = np.ascontiguousarray(np.asarray(target, dtype=float))
    if target.ndim != 2 or target.shape[1] != 2 or target.shape[0] < 1:
        raise ValueError("target must be an (n, 2) array of points")
    path = trace_path(m, target.shape[0])
    return float(
        kernels.path_sse(
            np.ascontiguousarray(path[:, 0]), np.ascontiguousarray(path[:, 1]),
            np.ascontiguousarray(target[:, 0]), np.ascontiguousarray(target[:, 1]),
            pairing == "cyclic",
        )
    )


def synthesis_space() -> SearchSpace:
    """Five link lengths on a 1-unit grid plus alpha on a 1-degree grid."""
    lo, hi = LINK_BOUNDS
    alo, ahi = ANGLE_BOUNDS
    return SearchSpace(
        lower=(lo, lo, lo, lo, lo, alo),
        upper=(hi, hi, hi, hi, hi, ahi),
        step=(1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    )


def synthesis_objective(target, pairing: str = "cyclic"):
    """Objective over (a12, a23, a34, a41, a25, alpha_deg) vectors.

    Non-crank-rocker designs get the penalty plateau plus a slope on the
    Grashof violation (and are flagged infeasible); crank-rockers always
    assemble, so the value is the plain path error.
    """
    target = np.ascontiguousarray(np.asarray(target, dtype=float))
    if target.ndim != 2 or target.shape[1] != 2 or target.shape[0] < 3:
        raise ValueError("target must be an (n, 2) array with n >= 3")
    tx = np.ascontiguousarray(target[:, 0])
    ty = np.ascontiguousarray(target[:, 1])
    n = target.shape[0]
    theta2 = 2.0 * np.pi * np.arange(n) / n
    cyclic = pairing == "cyclic"
    if pairing not in ("fixed", "cyclic"):
        raise ValueError("pairing must be 'fixed' or 'cyclic'")

    def objective(v):
        a12, a23, a34, a41, a25, alpha_deg = (float(x) for x in v)
        lengths = sorted((a12, a23, a34, a41))
        violation = lengths[3] + lengths[0] - lengths[1] - lengths[2]
        if violation >= 0 or not a12 < min(a23, a34, a41):
            return PENALTY_BASE + PENALTY_SCALE * max(0.0, violation), False
        cx = np.empty(n)
        cy = np.empty(n)
        bad = kernels.trace_coupler(
            a12, a23, a34, a41, a25, math.radians(alpha_deg), theta2, cx, cy
        )
        if bad >= 0:  # unreachable for a crank-rocker; float-edge safety
            return PENALTY_BASE, False
        return float(kernels.path_sse(cx, cy, tx, ty, cyclic)), True

    return objective


def load_target_csv(path) -> np.ndarray:
    """Read an (n, 2) target path from a CSV with header x,y."""
    with open(path) as fh:
        header = fh.readline().strip()
        if [c.strip() for c in header.split(",")] != ["x", "y"]:
            raise ValueError(f"expected header 'x,y', got {header!r}")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if rows.size == 0 or rows.shape[1] != 2:
        raise ValueError("target CSV must have two columns")
    if not np.isfinite(rows).all():
        raise ValueError("target CSV contains non-finite values")
    return rows


def write_target_csv(points, path) -> None:
    points = np.asarray(points, dtype=float)
    rows = [(format_float(x), format_float(y)) for x, y in points]
    write_csv(path, ["x", "y"], rows)


def write_path_csv(m: FourBarMechanism, n: int, path) -> None:
    """Trace n samples and write theta2_deg,x,y rows."""
    pts = trace_path(m, n)
    theta2_deg = 360.0 * np.arange(n) / n
    rows = [
        (format_float(t), format_float(x), format_float(y))
        for t, (x, y) in zip(theta2_deg, pts)
    ]
    write_csv(path, ["theta2_deg", "x", "y"], rows)


# Reference geometry used for the bundled self-synthesis target: a
# comfortable crank-rocker whose closed coupler curve crosses itself once
# (a double point near (63.5, 11.1)).
REFERENCE_MECHANISM = FourBarMechanism(30, 52, 57, 71, 50, -52)


def reference_target(n: int = 12) -> np.ndarray:
    """The bundled target path: n samples of the reference coupler curve."""
    return trace_path(REFERENCE_MECHANISM, n)
