"""Quasi-static dyadic of the PEC waveguide, averaged over pairs of equal boxes.

``k^2 G_e`` tends, as k -> 0, to the Hessian of the Laplace kernel
``1/(4 pi r)`` summed over the wall images of the source (electric dipole
images: tangential components flip, normal component kept). The box-box
averages use Newell's closed forms near the diagonal, a three-point product
rule at intermediate range and the point dipole far away.
"""

from __future__ import annotations

import numpy as np

NEWELL_RANGE = 6.0
QUAD_RANGE = 20.0


def _asinh_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.arcsinh(num / den)
    return np.where(den > 0, out, 0.0)


def _atan_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.arctan(num / den)
    return np.where(den > 0, out, 0.0)


def newell_f(x, y, z):
    x, y, z = np.abs(x), np.abs(y), np.abs(z)
    x2, y2, z2 = x * x, y * y, z * z
    R = np.sqrt(x2 + y2 + z2)
    out = (2.0 * x2 - y2 - z2) * R / 6.0
    out = out + np.where(y > 0, 0.5 * y * (z2 - x2) * _asinh_ratio(y, np.sqrt(x2 + z2)), 0.0)
    out = out + np.where(z > 0, 0.5 * z * (y2 - x2) * _asinh_ratio(z, np.sqrt(x2 + y2)), 0.0)
    out = out - np.where(x * y * z > 0, x * y * z * _atan_ratio(y * z, x * R), 0.0)
    return out


def newell_g(x, y, z):
    sgn = np.sign(x) * np.sign(y)
    x, y, z = np.abs(x), np.abs(y), np.abs(z)
    x2, y2, z2 = x * x, y * y, z * z
    R = np.sqrt(x2 + y2 + z2)
    out = -x * y * R / 3.0
    out = out + np.where(x * y * z > 0, x * y * z * _asinh_ratio(z, np.sqrt(x2 + y2)), 0.0)
    out = out + np.where(y > 0, y / 6.0 * (3.0 * z2 - y2) * _asinh_ratio(x, np.sqrt(y2 + z2)), 0.0)
    out = out + np.where(x > 0, x / 6.0 * (3.0 * z2 - x2) * _asinh_ratio(y, np.sqrt(x2 + z2)), 0.0)
    out = out - np.where(z > 0, z**3 / 6.0 * _atan_ratio(x * y, z * R), 0.0)
    out = out - np.where(y > 0, 0.5 * z * y2 * _atan_ratio(x * z, y * R), 0.0)
    out = out - np.where(x > 0, 0.5 * z * x2 * _atan_ratio(y * z, x * R), 0.0)
    return sgn * out


_W = {-1: -1.0, 0: 2.0, 1: -1.0}


def _second_difference(fun, X, Y, Z, d):
    acc = np.zeros(np.broadcast(X, Y, Z).shape)
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for l in (-1, 0, 1):
                acc += _W[i] * _W[j] * _W[l] * fun(X + i * d[0], Y + j * d[1], Z + l * d[2])
    return acc


def newell_tensor(offsets, d) -> np.ndarray:
    """Demagnetisation tensor of two equal boxes with centre offsets (..., 3)."""
    offsets = np.asarray(offsets, dtype=float)
    X, Y, Z = offsets[..., 0], offsets[..., 1], offsets[..., 2]
    V = d[0] * d[1] * d[2]
    pre = 1.0 / (4.0 * np.pi * V)
    out = np.empty(offsets.shape[:-1] + (3, 3))
    out[..., 0, 0] = _second_difference(newell_f, X, Y, Z, d)
    out[..., 1, 1] = _second_difference(newell_f, Y, Z, X, (d[1], d[2], d[0]))
    out[..., 2, 2] = _second_difference(newell_f, Z, X, Y, (d[2], d[0], d[1]))
    out[..., 0, 1] = out[..., 1, 0] = _second_difference(newell_g, X, Y, Z, d)
    out[..., 1, 2] = out[..., 2, 1] = _second_difference(newell_g, Y, Z, X, (d[1], d[2], d[0]))
    out[..., 0, 2] = out[..., 2, 0] = _second_difference(newell_g, X, Z, Y, (d[0], d[2], d[1]))
    return pre * out


def laplace_hessian(offsets) -> np.ndarray:
    """Hessian of 1/(4 pi r) at nonzero offsets (..., 3)."""
    offsets = np.asarray(offsets, dtype=float)
    r2 = np.sum(offsets**2, axis=-1)[..., None, None]
    r = np.sqrt(r2)
    outer = offsets[..., :, None] * offsets[..., None, :]
    return (3.0 * outer / r2 - np.eye(3)) / (4.0 * np.pi * r**3)


def box_hessian_average(offsets, d) -> np.ndarray:
    """(1/V^2) int_Bi int_Bj Hess(1/(4 pi |x - y|)) for equal boxes of size d."""
    offsets = np.asarray(offsets, dtype=float)
    d = np.asarray(d, dtype=float)
    scaled = np.max(np.abs(offsets) / d, axis=-1)
    out = np.empty(offsets.shape[:-1] + (3, 3))
    near = scaled <= NEWELL_RANGE
    mid = (~near) & (scaled <= QUAD_RANGE)
    far = scaled > QUAD_RANGE
    if np.any(near):
        V = float(np.prod(d))
        out[near] = -newell_tensor(offsets[near], d) / V
    if np.any(mid):
        # the difference of two 2-point Gauss rules: nodes 0, +/- d/sqrt(3)
        o = offsets[mid]
        acc = np.zeros(o.shape[:-1] + (3, 3))
        steps = ((-1, 0.25), (0, 0.5), (1, 0.25))
        for s1, w1 in steps:
            for s2, w2 in steps:
                for s3, w3 in steps:
                    shift = np.array([s1, s2, s3]) * d / np.sqrt(3.0)
                    acc += w1 * w2 * w3 * laplace_hessian(o + shift)
        out[mid] = acc
    if np.any(far):
        out[far] = laplace_hessian(offsets[far])
    return out


def image_terms(cs, lattice: int = 2):
    """Wall images of the rectangular guide as (s1, s2, shift1, shift2, dipole diag).

    The image of y is (s1 y1 + shift1, s2 y2 + shift2, y3); its dipole is
    ``diag(...) @ p``.
    """
    out = []
    for p in range(-lattice, lattice + 1):
        for q in range(-lattice, lattice + 1):
            for s1 in (1, -1):
                for s2 in (1, -1):
                    dip = np.ones(3)
                    if s1 < 0:
                        dip *= np.array([1.0, -1.0, -1.0])
                    if s2 < 0:
                        dip *= np.array([-1.0, 1.0, -1.0])
                    out.append((s1, s2, 2.0 * p * cs.a, 2.0 * q * cs.b, dip))
    return out


def static_box_kernel(cs, obs_c1, obs_c2, src_c1, src_c2, dz, d, lattice: int = 2) -> np.ndarray:
    """Static box-box dyadic for one axial offset ``dz``.

    Returns an array (n1o, n1s, n2o, n2s, 3, 3) for transverse box centres on
    tensor grids, all boxes of common size ``d``.
    """
    obs_c1, obs_c2 = np.asarray(obs_c1, float), np.asarray(obs_c2, float)
    src_c1, src_c2 = np.asarray(src_c1, float), np.asarray(src_c2, float)
    out = np.zeros((obs_c1.size, src_c1.size, obs_c2.size, src_c2.size, 3, 3))
    for s1, s2, t1, t2, dip in image_terms(cs, lattice):
        X1 = obs_c1[:, None] - (s1 * src_c1[None, :] + t1)
        X2 = obs_c2[:, None] - (s2 * src_c2[None, :] + t2)
        # reduce to unique offsets: the grids make these highly redundant
        u1, inv1 = np.unique(np.round(X1, 12), return_inverse=True)
        u2, inv2 = np.unique(np.round(X2, 12), return_inverse=True)
        U1, U2 = np.meshgrid(u1, u2, indexing="ij")
        offs = np.stack([U1, U2, np.full_like(U1, dz)], axis=-1)
        F = box_hessian_average(offs, d) * dip[None, None, None, :]
        F = F[inv1.reshape(X1.shape)][:, :, inv2.reshape(X2.shape)]
        out += F
    return out
