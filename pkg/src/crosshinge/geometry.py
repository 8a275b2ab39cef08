"""Parametric cross-hinge geometry.

A cross-hinge is described by 13 dimensionless design variables: four
angle coefficients per flexure, the length ratio alpha, the slendernesses
beta1/beta2, the width ratio gamma and the horizontal base offset delta.
This module realizes that description as explicit centerline geometry
(working in normalized units l1 = w1 = E = 1) and checks geometric
feasibility (no self-intersecting centerlines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POISSON_RATIO = 0.49  # nearly incompressible, typical for printed elastomers

DESIGN_FIELDS = (
    "theta0_1", "theta1_1", "theta2_1", "theta3_1",
    "theta0_2", "theta1_2", "theta2_2", "theta3_2",
    "alpha", "beta1", "beta2", "gamma", "delta",
)

LOWER_BOUNDS = np.array(
    [0.0, -math.pi, -math.pi, -math.pi,
     0.0, -math.pi, -math.pi, -math.pi,
     0.5, 5.0, 5.0, 0.5, 0.0]
)
UPPER_BOUNDS = np.array(
    [math.pi, math.pi, math.pi, math.pi,
     math.pi, math.pi, math.pi, math.pi,
     2.0, 20.0, 20.0, 2.0, 1.0]
)


class OutOfRange(ValueError):
    """A design variable violates its admissible range."""


@dataclass(frozen=True)
class DesignVector:
    """The 13 dimensionless design variables of a cross-hinge.

    Angle coefficients are in radians; the remaining five variables are
    ratios (length, slenderness, width, base offset).
    """

    theta0_1: float
    theta1_1: float
    theta2_1: float
    theta3_1: float
    theta0_2: float
    theta1_2: float
    theta2_2: float
    theta3_2: float
    alpha: float
    beta1: float
    beta2: float
    gamma: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in DESIGN_FIELDS])

    @classmethod
    def from_array(cls, values) -> "DesignVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (13,):
            raise ValueError(f"expected 13 design variables, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    def coefficients(self, flexure: int) -> np.ndarray:
        """Angle coefficients (theta0..theta3) of flexure 1 or 2."""
        if flexure == 1:
            return np.array([self.theta0_1, self.theta1_1, self.theta2_1, self.theta3_1])
        if flexure == 2:
            return np.array([self.theta0_2, self.theta1_2, self.theta2_2, self.theta3_2])
        raise ValueError("flexure index must be 1 or 2")

    def validate(self, lower: np.ndarray = LOWER_BOUNDS, upper: np.ndarray = UPPER_BOUNDS) -> None:
        """Raise OutOfRange naming the first variable outside its bounds."""
        values = self.as_array()
        for name, v, lo, hi in zip(DESIGN_FIELDS, values, lower, upper):
            if not (lo <= v <= hi):
                raise OutOfRange(f"{name} = {v:.6g} outside [{lo:.6g}, {hi:.6g}]")


def angle_profile(coeffs, s):
    """Cross-section rotation angle at normalized arc length s in [0, 1].

    The profile is a cubic in hierarchical (shape-function) form, so the
    first two coefficients are exactly the angles at the end points:

        theta(s) = (1-s) t0 + s t1 + 4 s (1-s) t2 + 4 s (1-s) (2s-1) t3
    """
    t0, t1, t2, t3 = coeffs
    s = np.asarray(s, dtype=float)
    bubble = 4.0 * s * (1.0 - s)
    return (1.0 - s) * t0 + s * t1 + bubble * t2 + bubble * (2.0 * s - 1.0) * t3


# 4-point Gauss-Legendre rule on [0, 1]; exceeds the smoothness of the
# trigonometric integrand at the default 80 subintervals per flexure.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def centerline(coeffs, length: float, base, n_samples: int):
    """Sample the flexure centerline by integrating the unit tangent.

    Positions follow from composite Gauss-Legendre quadrature of
    length * (cos theta, sin theta) over each subinterval of the uniform
    sample grid s_k = k / (n_samples - 1).

    Returns:
        points: (n_samples, 2) positions, points[0] == base
        angles: (n_samples,) tangent angles at the sample grid
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    s = np.linspace(0.0, 1.0, n_samples)
    ds = s[1] - s[0]
    # quadrature abscissae for every subinterval at once: (n-1, 4)
    sq = s[:-1, None] + ds * _GL_NODES[None, :]
    theta_q = angle_profile(coeffs, sq)
    increments = length * ds * np.stack(
        [np.cos(theta_q) @ _GL_WEIGHTS, np.sin(theta_q) @ _GL_WEIGHTS], axis=1
    )
    points = np.empty((n_samples, 2))
    points[0] = np.asarray(base, dtype=float)
    points[1:] = points[0] + np.cumsum(increments, axis=0)
    return points, angle_profile(coeffs, s)


@dataclass(frozen=True)
class Flexure:
    """Realized geometry of one flexure in normalized units."""

    coeffs: np.ndarray        # angle coefficients theta0..theta3
    length: float
    height: float
    width: float
    base: np.ndarray          # position of the s=0 end
    points: np.ndarray        # (n, 2) sampled centerline
    angles: np.ndarray        # (n,) tangent angles on the same grid

    @property
    def s_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.angles))


@dataclass(frozen=True)
class HingeGeometry:
    """Undeformed cross-hinge geometry with material constants.

    Normalization: the first flexure has unit length and width and the
    Young's modulus is 1, so raw computed stiffnesses and compliances
    coincide with their dimensionless counterparts.
    """

    flexures: tuple[Flexure, Flexure]
    young_modulus: float = 1.0
    poisson_ratio: float = POISSON_RATIO

    @property
    def shear_modulus(self) -> float:
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))


def build_hinge(design: DesignVector, n_samples: int = 81) -> HingeGeometry:
    """Realize a design vector as explicit geometry (l1 = w1 = E = 1).

    Raises:
        OutOfRange: if any design variable violates its admissible range.
    """
    design.validate()
    l1, w1 = 1.0, 1.0
    l2 = design.alpha * l1
    h1 = l1 / design.beta1
    h2 = l2 / design.beta2
    w2 = design.gamma * w1
    base1 = np.zeros(2)
    base2 = np.array([design.delta * l1, 0.0])

    flexures = []
    for coeffs, length, height, width, base in (
        (design.coefficients(1), l1, h1, w1, base1),
        (design.coefficients(2), l2, h2, w2, base2),
    ):
        points, angles = centerline(coeffs, length, base, n_samples)
        flexures.append(
            Flexure(coeffs=coeffs, length=length, height=height, width=width,
                    base=base, points=points, angles=angles)
        )
    return HingeGeometry(flexures=(flexures[0], flexures[1]))


def design_parameters(geometry: HingeGeometry) -> DesignVector:
    """Read the 13 design variables back from realized geometry."""
    f1, f2 = geometry.flexures
    return DesignVector(
        *(float(c) for c in f1.coeffs),
        *(float(c) for c in f2.coeffs),
        alpha=f2.length / f1.length,
        beta1=f1.length / f1.height,
        beta2=f2.length / f2.height,
        gamma=f2.width / f1.width,
        delta=float(f2.base[0]) / f1.length,
    )


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    reason: str = ""


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def polyline_self_intersects(points: np.ndarray, tol: float = 1e-12) -> bool:
    """True if any two non-adjacent segments of the polyline intersect.

    Touching within tol counts as an intersection, so exactly closed
    loops are rejected.
    """
    n_seg = len(points) - 1
    if n_seg < 3:
        return False
    a = points[:-1]
    b = points[1:]
    # all pairs (i, j) with j >= i + 2
    i_idx, j_idx = np.triu_indices(n_seg, k=2)
    return _segment_pairs_intersect(a[i_idx], b[i_idx], a[j_idx], b[j_idx], tol)


def _segment_pairs_intersect(p1, p2, p3, p4, tol) -> bool:
    """Vectorized segment-pair intersection with inclusive touching."""
    scale = max(1.0, float(np.max(np.abs(np.concatenate([p1, p2, p3, p4])))))
    eps = tol * scale * scale  # cross products scale with length squared

    d1 = _cross2(p4[:, 0] - p3[:, 0], p4[:, 1] - p3[:, 1],
                 p1[:, 0] - p3[:, 0], p1[:, 1] - p3[:, 1])
    d2 = _cross2(p4[:, 0] - p3[:, 0], p4[:, 1] - p3[:, 1],
                 p2[:, 0] - p3[:, 0], p2[:, 1] - p3[:, 1])
    d3 = _cross2(p2[:, 0] - p1[:, 0], p2[:, 1] - p1[:, 1],
                 p3[:, 0] - p1[:, 0], p3[:, 1] - p1[:, 1])
    d4 = _cross2(p2[:, 0] - p1[:, 0], p2[:, 1] - p1[:, 1],
                 p4[:, 0] - p1[:, 0], p4[:, 1] - p1[:, 1])

    proper = ((d1 > eps) & (d2 < -eps) | (d1 < -eps) & (d2 > eps)) & \
             ((d3 > eps) & (d4 < -eps) | (d3 < -eps) & (d4 > eps))
    if bool(np.any(proper)):
        return True

    # collinear / touching cases: an endpoint lies (within eps) on the
    # other segment
    for d, q, a, b in ((d1, p1, p3, p4), (d2, p2, p3, p4),
                       (d3, p3, p1, p2), (d4, p4, p1, p2)):
        near = np.abs(d) <= eps
        if not np.any(near):
            continue
        qn, an, bn = q[near], a[near], b[near]
        lo = np.minimum(an, bn) - tol * scale
        hi = np.maximum(an, bn) + tol * scale
        on = np.all((qn >= lo) & (qn <= hi), axis=1)
        if bool(np.any(on)):
            return True
    return False


def check_feasibility(geometry: HingeGeometry, strict: bool = False) -> FeasibilityReport:
    """Reject geometries whose flexure centerlines self-intersect.

    With strict=True, intersections between the two flexures are also
    rejected; by default the flexures may cross (they occupy different
    planes in the physical mechanism).
    """
    for i, flexure in enumerate(geometry.flexures, start=1):
        if polyline_self_intersects(flexure.points):
            return FeasibilityReport(False, f"flexure {i} centerline self-intersects")
    if strict:
        f1, f2 = geometry.flexures
        a1, b1 = f1.points[:-1], f1.points[1:]
        a2, b2 = f2.points[:-1], f2.points[1:]
        i_idx, j_idx = np.meshgrid(np.arange(len(a1)), np.arange(len(a2)), indexing="ij")
        i_idx, j_idx = i_idx.ravel(), j_idx.ravel()
        if _segment_pairs_intersect(a1[i_idx], b1[i_idx], a2[j_idx], b2[j_idx], 1e-12):
            return FeasibilityReport(False, "flexure centerlines intersect each other")
    return FeasibilityReport(True)


def sample_random(seed, lower: np.ndarray = LOWER_BOUNDS, upper: np.ndarray = UPPER_BOUNDS) -> DesignVector:
    """Uniform independent sample of the design space, deterministic per seed.

    `seed` may be an int or a numpy Generator (drawn from, for batches).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return DesignVector.from_array(rng.uniform(lower, upper))
