"""Proximity operators for element-wise and grouped sparsity penalties.

Four scalar penalty families are supported, each parameterized by a
multiplier lam >= 0:

* ``soft``  : f(x) = lam*|x|                       (l1)
* ``scad``  : quadratically smoothed clipped l1, shape parameter mu > 2
* ``mcp``   : minimax concave penalty, shape parameter mu >= 2
* ``lp``    : f(x) = lam^(2-p) * |x|^p, 0 < p <= 1 (lp power penalty)

All four satisfy f(0)=0, f(.;0)=0, symmetry, and the homogeneity
f(a*x; a*lam) = a^2 f(x; lam); ``soft`` (and ``lp`` with p=1) are in
addition scale-invariant, f(a*x; lam) = f(x; a*lam) = a f(x; lam), which is
what the element stage of the nested operator requires.

Besides the scalar proxes the module provides:

* :func:`scaled_prox` — argmin_t 1/2 (s-t)^2 + c * f(t; lam) for any c > 0,
  needed whenever the splitting parameter rho of the solver is not 1,
* :func:`prox_group` — prox of f applied to the Euclidean norm of a vector
  (the minimizer is a radial shrinkage of the input),
* :func:`prox_nested` — the element-within-group operator: element shrinkage
  of the magnitudes followed by a group-norm shrinkage, with the input phases
  restored.  This is the exact minimizer of the per-group objective when the
  element penalty is scale-invariant,
* :func:`partition_nested_prox` — the same operator fused over a whole group
  partition (the per-iteration hot kernel of the ADMM solver), with a
  compiled backend when the extension is available.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from . import _numpy_backend

try:  # compiled kernel is optional; the numpy path is always available
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

_FORCE = os.environ.get("DDSPARSE_FORCE_BACKEND", "").strip().lower()
if _FORCE == "numpy":
    _compiled = None
elif _FORCE == "compiled" and _compiled is None:  # pragma: no cover
    raise ImportError("DDSPARSE_FORCE_BACKEND=compiled but the extension is missing")

#: name of the partition-kernel backend selected at import time
BACKEND = "compiled" if _compiled is not None else "numpy"

_KIND_CODES = {"soft": 0, "scad": 1, "mcp": 2}


@dataclass(frozen=True)
class Regularizer:
    """A scalar penalty family plus its shape parameter.

    Use the factories ``Regularizer.soft()``, ``.scad(mu)``, ``.mcp(mu)``,
    ``.lp(p)`` or :meth:`from_name` ("soft", "scad:3", "mcp:2", "lp:0.5").
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind == "soft":
            pass
        elif self.kind == "scad":
            if not self.param > 2.0:
                raise ValueError("scad shape parameter must satisfy mu > 2")
        elif self.kind == "mcp":
            if not self.param >= 2.0:
                raise ValueError("mcp shape parameter must satisfy mu >= 2")
        elif self.kind == "lp":
            if not 0.0 < self.param <= 1.0:
                raise ValueError("lp exponent must lie in (0, 1]")
        else:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")

    # -- factories ---------------------------------------------------------
    @classmethod
    def soft(cls) -> "Regularizer":
        return cls("soft")

    @classmethod
    def scad(cls, mu: float = 3.0) -> "Regularizer":
        return cls("scad", float(mu))

    @classmethod
    def mcp(cls, mu: float = 2.0) -> "Regularizer":
        return cls("mcp", float(mu))

    @classmethod
    def lp(cls, p: float) -> "Regularizer":
        return cls("lp", float(p))

    @classmethod
    def from_name(cls, name: str) -> "Regularizer":
        """Parse "soft", "scad:<mu>", "mcp:<mu>" or "lp:<p>"."""
        head, sep, tail = name.strip().partition(":")
        head = head.lower()
        if head == "soft":
            if sep:
                raise ValueError("soft takes no parameter")
            return cls.soft()
        if not sep:
            raise ValueError(f"regularizer {name!r} needs a parameter, e.g. '{head}:3'")
        return cls(head, float(tail))

    @property
    def name(self) -> str:
        return "soft" if self.kind == "soft" else f"{self.kind}:{self.param:g}"

    @property
    def scale_invariant(self) -> bool:
        """True when f(a*x; lam) = a*f(x; lam) — required of element penalties."""
        return self.kind == "soft" or (self.kind == "lp" and self.param == 1.0)

    # -- conveniences ------------------------------------------------------
    def value(self, x, lam: float):
        return reg_value(x, lam, self)

    def prox(self, x, lam: float):
        return prox(x, lam, self)

    def scaled_prox(self, x, lam: float, scale: float):
        return scaled_prox(x, lam, self, scale)


@dataclass(frozen=True)
class GroupProxParams:
    """Multipliers of the nested operator as the solver uses them.

    ``lam_group`` and ``lam_elem`` are the rho-scaled multipliers (penalty
    weight divided by the splitting parameter rho); with rho = 1 they equal
    the raw penalty weights.
    """

    lam_group: float
    lam_elem: float
    rho: float = 1.0

    def __post_init__(self):
        if self.lam_group < 0 or self.lam_elem < 0:
            raise ValueError("penalty multipliers must be nonnegative")
        if self.rho == 0:
            raise ValueError("splitting parameter rho must be nonzero")


# ---------------------------------------------------------------------------
# penalty values
# ---------------------------------------------------------------------------


def reg_value(x, lam: float, reg: Regularizer):
    """Evaluate the penalty f(x; lam) element-wise (complex input uses |x|)."""
    t = np.abs(np.asarray(x)).astype(float)
    if lam < 0:
        raise ValueError("penalty multiplier must be nonnegative")
    if reg.kind == "soft":
        out = lam * t
    elif reg.kind == "scad":
        mu = reg.param
        out = np.where(
            t <= lam,
            lam * t,
            np.where(
                t <= mu * lam,
                -(t * t - 2.0 * mu * lam * t + lam * lam) / (2.0 * (mu - 1.0)),
                0.5 * (mu + 1.0) * lam * lam,
            ),
        )
    elif reg.kind == "mcp":
        mu = reg.param
        out = np.where(
            t <= mu * lam,
            lam * t - t * t / (2.0 * mu),
            0.5 * mu * lam * lam,
        )
    elif reg.kind == "lp":
        p = reg.param
        out = lam ** (2.0 - p) * t**p
    else:  # pragma: no cover - guarded in Regularizer
        raise ValueError(reg.kind)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# scalar proximity operators (unit scale)
# ---------------------------------------------------------------------------


def _phase(x):
    """sign(x) for real input, x/|x| for complex (0 maps to 0)."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        mag = np.abs(x)
        return np.divide(x, mag, out=np.zeros_like(x), where=mag > 0)
    return np.sign(x)


def prox_soft(x, lam: float):
    """Soft thresholding: phase(x) * max(0, |x| - lam)."""
    x = np.asarray(x)
    out = _phase(x) * np.maximum(0.0, np.abs(x) - lam)
    return out if out.ndim else out[()]


def prox_scad(x, lam: float, mu: float):
    """SCAD prox: dead zone, soft-shrink, transition ramp, then identity."""
    if not mu > 2.0:
        raise ValueError("scad prox requires mu > 2")
    x = np.asarray(x)
    t = np.abs(x)
    mid = ((mu - 1.0) * t - mu * lam) / (mu - 2.0)
    mag = np.where(
        t <= 2.0 * lam,
        np.maximum(0.0, t - lam),
        np.where(t <= mu * lam, mid, t),
    )
    out = _phase(x) * mag
    return out if out.ndim else out[()]


def prox_mcp(x, lam: float, mu: float):
    """MCP prox: dead zone, rescaled soft-shrink ramp, then identity."""
    if not mu >= 2.0:
        raise ValueError("mcp prox requires mu >= 2")
    x = np.asarray(x)
    t = np.abs(x)
    ramp = (t - lam) * mu / (mu - 1.0)
    mag = np.where(t <= lam, 0.0, np.where(t <= mu * lam, ramp, t))
    out = _phase(x) * mag
    return out if out.ndim else out[()]


def _lp_prox_mag(s: float, lam: float, p: float, c: float = 1.0) -> float:
    """argmin_{t>=0} 1/2 (s-t)^2 + c lam^(2-p) t^p for a scalar s >= 0.

    The stationarity condition g(t) = t - s + w p t^(p-1) = 0 (w = c lam^(2-p))
    has zero or two roots on t > 0; the larger one is the local minimum of the
    objective and is found by bisection, then compared against t = 0.  Ties
    resolve to 0.
    """
    if s <= 0.0 or lam == 0.0:
        return s if lam == 0.0 else 0.0
    w = c * lam ** (2.0 - p)

    def g(t):
        return t - s + w * p * t ** (p - 1.0)

    # g is minimized where g'(t) = 1 + w p (p-1) t^(p-2) = 0
    t_low = (w * p * (1.0 - p)) ** (1.0 / (2.0 - p))
    if g(t_low) > 0.0:
        return 0.0
    root = bisect(g, t_low, s, xtol=1e-10)
    obj_root = 0.5 * (s - root) ** 2 + w * root**p
    return root if obj_root < 0.5 * s * s else 0.0


def prox_lp(x, lam: float, p: float):
    """lp-power prox; p = 1 reduces to soft thresholding."""
    if not 0.0 < p <= 1.0:
        raise ValueError("lp prox requires 0 < p <= 1")
    if p == 1.0:
        return prox_soft(x, lam)
    x = np.asarray(x)
    t = np.abs(x)
    mag = np.array([_lp_prox_mag(float(s), lam, p) for s in np.ravel(t)])
    mag = mag.reshape(t.shape)
    out = _phase(x) * mag
    return out if out.ndim else out[()]


def prox(x, lam: float, reg: Regularizer):
    """Dispatch the unit-scale prox of the given penalty."""
    if lam < 0:
        raise ValueError("penalty multiplier must be nonnegative")
    if reg.kind == "soft":
        return prox_soft(x, lam)
    if reg.kind == "scad":
        return prox_scad(x, lam, reg.param)
    if reg.kind == "mcp":
        return prox_mcp(x, lam, reg.param)
    return prox_lp(x, lam, reg.param)


# ---------------------------------------------------------------------------
# scaled prox: argmin_t 1/2 (s-t)^2 + c f(t; lam)
# ---------------------------------------------------------------------------


def _pick_min(s, cands, lam, c, reg):
    """Among candidate magnitudes pick the objective minimizer (ties -> smallest)."""
    cands = np.stack(cands)
    obj = 0.5 * (s - cands) ** 2 + c * reg_value(cands, lam, reg)
    best = obj.min(axis=0)
    # ties resolve to the smallest candidate magnitude
    masked = np.where(obj <= best, cands, np.inf)
    return masked.min(axis=0)


def scaled_prox(x, lam: float, reg: Regularizer, scale: float = 1.0):
    """argmin_t 1/2 |x - t|^2 + scale * f(t; lam), element-wise.

    For scale = 1 this equals :func:`prox`.  For non-convex penalties with
    large ``scale`` the interior stationary branch can turn concave; in that
    case the minimizer jumps between branch endpoints, which the candidate
    enumeration below handles exactly.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if lam < 0:
        raise ValueError("penalty multiplier must be nonnegative")
    x = np.asarray(x)
    ph = _phase(x)
    s = np.abs(x).astype(float)
    c = float(scale)
    if c == 0.0 or lam == 0.0:
        out = ph * s
        return out if out.ndim else out[()]

    if reg.kind == "soft":
        mag = np.maximum(0.0, s - c * lam)
    elif reg.kind == "scad":
        mu = reg.param
        cands = [np.clip(s - c * lam, 0.0, lam)]
        a2 = 1.0 - c / (mu - 1.0)
        if a2 > 0.0:
            cands.append(np.clip((s - c * mu * lam / (mu - 1.0)) / a2, lam, mu * lam))
        else:  # concave middle branch: only its endpoints can win
            cands.append(np.full_like(s, lam))
            cands.append(np.full_like(s, mu * lam))
        cands.append(np.maximum(s, mu * lam))
        mag = _pick_min(s, cands, lam, c, reg)
    elif reg.kind == "mcp":
        mu = reg.param
        a1 = 1.0 - c / mu
        cands = []
        if a1 > 0.0:
            cands.append(np.clip((s - c * lam) / a1, 0.0, mu * lam))
        else:
            cands.append(np.zeros_like(s))
            cands.append(np.full_like(s, mu * lam))
        cands.append(np.maximum(s, mu * lam))
        mag = _pick_min(s, cands, lam, c, reg)
    elif reg.kind == "lp":
        if reg.param == 1.0:
            mag = np.maximum(0.0, s - c * lam)
        else:
            mag = np.array(
                [_lp_prox_mag(float(v), lam, reg.param, c) for v in np.ravel(s)]
            ).reshape(s.shape)
    else:  # pragma: no cover
        raise ValueError(reg.kind)
    out = ph * mag
    return out if out.ndim else out[()]


# ---------------------------------------------------------------------------
# group and nested operators
# ---------------------------------------------------------------------------


def prox_group(b, lam: float, f_g: Regularizer, rho: float = 1.0):
    """Prox of the group penalty g(b) = f_g(||b||_2 / rho; lam) (radial shrinkage).

    Returns gamma * b with gamma =
    argmin_t 1/2 (||b||-t)^2 + (1/rho^2) f_g(t; rho*lam), divided by ||b||;
    the zero vector maps to itself.
    """
    if rho == 0:
        raise ValueError("rho must be nonzero")
    b = np.asarray(b)
    nrm = float(np.linalg.norm(b))
    if nrm == 0.0:
        return np.zeros_like(b)
    shrunk = scaled_prox(nrm, rho * lam, f_g, 1.0 / rho**2)
    return (shrunk / nrm) * b


def prox_nested(b, params: GroupProxParams, f_e: Regularizer, f_g: Regularizer):
    """Nested element-within-group prox of one group.

    Applies the element prox to the entry magnitudes, then the group prox to
    the shrunken vector, and restores the input phases.  Exact minimizer of

        1/2 ||b - a||^2 + (1/rho^2) [ f_g(||a||; rho*lam_group)
                                      + sum_j f_e(|a_j|; rho*lam_elem) ]

    provided the element penalty is scale-invariant (soft / lp with p = 1).
    """
    if not f_e.scale_invariant:
        raise ValueError(
            "element penalty must be scale-invariant (soft or lp:1); "
            f"got {f_e.name}"
        )
    b = np.asarray(b)
    ph = _phase(b)
    mag = np.abs(b)
    u = scaled_prox(mag, params.rho * params.lam_elem, f_e, 1.0 / params.rho**2)
    v = prox_group(u, params.lam_group, f_g, params.rho)
    return ph * v


def partition_nested_prox(
    values: np.ndarray,
    perm: np.ndarray,
    starts: np.ndarray,
    params: GroupProxParams,
    f_e: Regularizer,
    f_g: Regularizer,
) -> np.ndarray:
    """Apply :func:`prox_nested` to every group of a partition at once.

    ``perm`` concatenates the member indices of all groups; group g owns
    ``perm[starts[g]:starts[g+1]]``.  Every index of ``values`` must appear
    exactly once.  Uses the compiled kernel when available and applicable,
    otherwise the vectorized numpy path; both produce identical results.
    """
    if not f_e.scale_invariant:
        raise ValueError(
            "element penalty must be scale-invariant (soft or lp:1); "
            f"got {f_e.name}"
        )
    values = np.asarray(values)
    mag = np.abs(values).astype(np.float64)
    rho = params.rho
    # element stage: scale-invariant penalty folds 1/rho^2 into the multiplier
    lam_e_eff = params.lam_elem / rho
    lam_g = rho * params.lam_group
    c = 1.0 / rho**2
    use_compiled = (
        _compiled is not None
        and f_e.kind in ("soft", "lp")  # lp here implies p == 1 == soft
        and f_g.kind in _KIND_CODES
    )
    if use_compiled:
        out_mag = np.empty_like(mag)
        _compiled.nested_prox_groups(
            mag,
            np.asarray(perm, dtype=np.int64),
            np.asarray(starts, dtype=np.int64),
            float(lam_e_eff),
            _KIND_CODES[f_g.kind],
            float(lam_g),
            float(f_g.param),
            float(c),
            out_mag,
        )
    else:
        out_mag = _numpy_backend.nested_prox_groups(
            mag, perm, starts, lam_e_eff, f_g, lam_g, c
        )
    scale = np.divide(out_mag, mag, out=np.zeros_like(mag), where=mag > 0)
    return values * scale


__all__ = [
    "BACKEND",
    "Regularizer",
    "GroupProxParams",
    "reg_value",
    "prox",
    "prox_soft",
    "prox_scad",
    "prox_mcp",
    "prox_lp",
    "scaled_prox",
    "prox_group",
    "prox_nested",
    "partition_nested_prox",
]
