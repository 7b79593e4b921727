"""Tracing of stability crossing curves in the complex gain plane.

A crossing curve is the locus of gains L for which the characteristic
function has a root exactly on the imaginary axis; it is parameterized by
the root frequency beta through F(i beta, L(beta)) = 0.  At each frequency
the equation is polynomial in L, so tracing reduces to sweeping beta,
solving for all roots, and stitching them into branches by nearest-root
continuation.  Each node carries the curve tangent from implicit
differentiation and an unwrapped polar profile; crossing reports give the
direction in which the unstable-root count drops when stepping over the
curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .charfun import CharFun
from .eigen import poly_roots

__all__ = [
    "SccBranch",
    "CrossingReport",
    "IdenticallySingularError",
    "TraceResidualError",
    "trace",
    "polar_profile",
    "crossing_at",
    "self_intersection",
]

_POLAR_RADIUS_FLOOR = 1e-12


class IdenticallySingularError(ValueError):
    """F(i beta, L) vanishes for every L at some frequency."""


class TraceResidualError(RuntimeError):
    """A traced node failed to reach the required residual after polishing."""


@dataclass
class SccBranch:
    """One traced branch of a crossing curve.

    Arrays are indexed by node, betas ascending.  ``tangent`` holds dL/dbeta
    from the implicit formula (NaN where the L-derivative of F vanishes);
    ``theta`` is the unwrapped argument of L and ``theta_prime`` its analytic
    derivative Im(L'/L).  ``polar_ok`` is False where |L| is too small for
    polar coordinates to mean anything.
    """

    beta: np.ndarray
    L: np.ndarray
    tangent: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    theta_prime: np.ndarray
    tangent_ok: np.ndarray
    polar_ok: np.ndarray
    root_index: int
    charfun: Optional[CharFun] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.beta)

    def eval(self, beta: float) -> complex:
        """Curve point at an arbitrary beta inside the branch's range.

        Seeds from linear interpolation of the stored nodes, then polishes
        with Newton on the gain polynomial when a characteristic function is
        attached; synthetic branches fall back to the interpolant.
        """
        b = float(beta)
        if not (self.beta[0] <= b <= self.beta[-1]):
            raise ValueError(f"beta={b} outside branch range [{self.beta[0]}, {self.beta[-1]}]")
        seed = complex(np.interp(b, self.beta, self.L.real) + 1j * np.interp(b, self.beta, self.L.imag))
        if self.charfun is None:
            return seed
        return _newton_polish(self.charfun, b, seed)

    def tangent_at(self, beta: float) -> complex:
        """Implicit-formula tangent at an arbitrary beta (traced branches)."""
        if self.charfun is None:
            i = min(max(int(np.searchsorted(self.beta, beta)), 1), len(self.beta) - 1)
            return complex((self.L[i] - self.L[i - 1]) / (self.beta[i] - self.beta[i - 1]))
        L = self.eval(beta)
        dl = self.charfun.d_lambda(1j * beta, L)
        dL = self.charfun.d_L(1j * beta, L)
        if dL == 0.0:
            return complex(np.nan, np.nan)
        return -1j * dl / dL


@dataclass
class CrossingReport:
    """Local crossing data at one point of a branch.

    ``normal`` points to the side on which the unstable-root count is lower
    by one (jump_normal is always -1 across the normal).  ``jump_ray`` is
    the count change when stepping radially outward from the origin: the
    sign of theta', or 0 when that derivative is degenerate.  ``flag`` is
    None for a regular crossing.
    """

    beta_star: float
    L_star: complex
    normal: complex
    jump_normal: Optional[int]
    theta_prime: float
    jump_ray: int
    flag: Optional[str] = None


def _newton_polish(F: CharFun, beta: float, L0: complex, *, steps: int = 12, tol: float = 1e-13) -> complex:
    coeffs = F.lpoly(1j * beta)
    dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))
    L = L0
    for _ in range(steps):
        g = _horner(coeffs, L)
        if abs(g) <= tol * max(1.0, abs(L)):
            break
        gp = _horner(dcoeffs, L)
        if gp == 0.0:
            break
        L = L - g / gp
    return L


def _horner(coeffs: np.ndarray, x: complex) -> complex:
    acc = 0.0 + 0.0j
    for c in coeffs[::-1]:
        acc = acc * x + c
    return acc


def _solve_nodes(F: CharFun, beta: float) -> np.ndarray:
    coeffs = F.lpoly(1j * beta)
    scale = np.max(np.abs(coeffs))
    if scale == 0.0 or not np.isfinite(scale):
        raise IdenticallySingularError(f"characteristic function vanishes identically in L at beta={beta}")
    roots = poly_roots(coeffs)
    return np.array([_newton_polish(F, beta, r) for r in roots], dtype=complex)


def _greedy_match(prev: np.ndarray, new: np.ndarray) -> List[Tuple[int, int, float]]:
    """Minimal-distance greedy assignment between two small point sets."""
    pairs = sorted(
        ((abs(p - q), i, j) for i, p in enumerate(prev) for j, q in enumerate(new)),
        key=lambda t: t[0],
    )
    used_i, used_j, out = set(), set(), []
    for d, i, j in pairs:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        out.append((i, j, d))
    return out


def trace(
    F: CharFun,
    beta_lo: float,
    beta_hi: float,
    step: float,
    *,
    window: Optional[Tuple[float, float, float, float]] = None,
    refine_frac: float = 0.02,
    max_depth: int = 12,
    residual_tol: float = 1e-9,
    max_nodes: int = 200_000,
) -> List["SccBranch"]:
    """Trace all crossing-curve branches for beta in [beta_lo, beta_hi].

    The base grid has spacing ``step``; intervals where the curve moves more
    than ``refine_frac`` of the window diagonal (or turns by more than a
    right angle) are bisected down to ``step / 2**max_depth``.  Refinement is
    suppressed where every root is far outside the window, so off-window
    excursions stay cheap.  Frequencies where the gain polynomial degenerates
    to a nonzero constant contribute no nodes and split branches there.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if beta_hi <= beta_lo:
        raise ValueError("empty beta range")

    n_base = max(int(np.ceil((beta_hi - beta_lo) / step)) + 1, 2)
    base = np.linspace(beta_lo, beta_hi, n_base)

    if window is not None:
        re_lo, re_hi, im_lo, im_hi = window
        diag = float(np.hypot(re_hi - re_lo, im_hi - im_lo))
        center = complex((re_lo + re_hi) / 2, (im_lo + im_hi) / 2)
        far_cutoff = abs(center) + 2.0 * diag
    else:
        sample = [r for b in base[:: max(1, n_base // 32)] for r in _solve_nodes(F, b)]
        finite = np.array([x for x in sample if np.isfinite(x)], dtype=complex)
        if finite.size:
            span = np.ptp(finite.real) + 1j * np.ptp(finite.imag)
            diag = max(float(abs(span)), 1.0)
            far_cutoff = float(np.max(np.abs(finite))) + 2.0 * diag
        else:
            diag, far_cutoff = 1.0, 10.0
    refine_tol = refine_frac * diag
    min_step = step / 2.0**max_depth

    solved: List[Tuple[float, np.ndarray]] = [(base[0], _solve_nodes(F, base[0]))]
    stack = [(base[i], base[i + 1]) for i in range(n_base - 2, -1, -1)]
    cache = {base[0]: solved[0][1]}

    def needs_split(b0: float, r0: np.ndarray, b1: float, r1: np.ndarray) -> bool:
        if b1 - b0 <= min_step:
            return False
        if len(r0) != len(r1):
            return True
        if len(r0) == 0:
            return False
        if min(np.min(np.abs(r0)), np.min(np.abs(r1))) > far_cutoff:
            return False
        for i, j, d in _greedy_match(r0, r1):
            if d > refine_tol:
                return True
            a, b = r0[i], r1[j]
            if abs(a) > _POLAR_RADIUS_FLOOR and abs(b) > _POLAR_RADIUS_FLOOR:
                if abs(np.angle(b / a)) > np.pi / 2:
                    return True
        return False

    while stack:
        b0, b1 = stack.pop()
        r0 = cache[b0] if b0 in cache else _solve_nodes(F, b0)
        cache[b0] = r0
        r1 = cache[b1] if b1 in cache else _solve_nodes(F, b1)
        cache[b1] = r1
        if needs_split(b0, r0, b1, r1):
            mid = 0.5 * (b0 + b1)
            stack.append((mid, b1))
            stack.append((b0, mid))
        else:
            solved.append((b1, r1))
        if len(solved) > max_nodes:
            raise RuntimeError(f"trace exceeded {max_nodes} nodes; increase step or reduce range")

    solved.sort(key=lambda t: t[0])

    # stitch roots into branches
    open_branches: List[dict] = []
    done: List[dict] = []
    next_slot = 0
    for b, roots in solved:
        if len(roots) == 0:
            done.extend(open_branches)
            open_branches = []
            continue
        if not open_branches:
            for r in roots:
                open_branches.append({"beta": [b], "L": [r], "slot": next_slot})
                next_slot += 1
            continue
        heads = np.array([br["L"][-1] for br in open_branches])
        matches = _greedy_match(heads, roots)
        matched_i, matched_j = set(), set()
        survivors = []
        for i, j, d in matches:
            br = open_branches[i]
            if len(br["L"]) >= 2:
                motion = abs(br["L"][-1] - br["L"][-2])
            else:
                motion = refine_tol
            if d > 10.0 * max(motion, refine_tol * 0.1):
                continue
            # a far-field jump comparable to |L| itself is a pass through
            # infinity (pole of the curve), not continuation: chords drawn
            # across it would cut through the window
            lo_mag = min(abs(heads[i]), abs(roots[j]))
            if lo_mag > far_cutoff and d > 0.5 * lo_mag:
                continue
            br["beta"].append(b)
            br["L"].append(roots[j])
            matched_i.add(i)
            matched_j.add(j)
            survivors.append(br)
        for i, br in enumerate(open_branches):
            if i not in matched_i:
                done.append(br)
        open_branches = survivors
        for j, r in enumerate(roots):
            if j not in matched_j:
                open_branches.append({"beta": [b], "L": [r], "slot": next_slot})
                next_slot += 1
    done.extend(open_branches)

    branches = []
    for br in done:
        if len(br["beta"]) < 2:
            continue
        branches.append(_finalize_branch(F, br, residual_tol))
    branches.sort(key=lambda br: (br.beta[0], br.root_index))
    return branches


def _finalize_branch(F: CharFun, raw: dict, residual_tol: float) -> SccBranch:
    beta = np.asarray(raw["beta"], dtype=float)
    L = np.asarray(raw["L"], dtype=complex)
    lam = 1j * beta
    residual = np.abs(_eval_nodes(F, lam, L))
    worst = float(np.max(residual))
    if worst > residual_tol:
        raise TraceResidualError(f"branch residual {worst:.3e} exceeds {residual_tol:.1e}")
    dl = _d_lambda_nodes(F, lam, L)
    dL = _d_L_nodes(F, lam, L)
    tangent_ok = dL != 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        tangent = np.where(tangent_ok, -1j * dl / np.where(tangent_ok, dL, 1.0), np.nan + 1j * np.nan)
    r = np.abs(L)
    polar_ok = r > _POLAR_RADIUS_FLOOR
    theta = np.unwrap(np.angle(L))
    with np.errstate(invalid="ignore", divide="ignore"):
        theta_prime = np.where(polar_ok & tangent_ok, np.imag(tangent / np.where(polar_ok, L, 1.0)), np.nan)
    return SccBranch(
        beta=beta,
        L=L,
        tangent=tangent,
        r=r,
        theta=theta,
        theta_prime=theta_prime,
        tangent_ok=tangent_ok,
        polar_ok=polar_ok,
        root_index=raw["slot"],
        charfun=F,
    )


def _eval_nodes(F: CharFun, lam: np.ndarray, L: np.ndarray) -> np.ndarray:
    return np.array([F.eval(l, x) for l, x in zip(lam, L)], dtype=complex)


def _d_lambda_nodes(F: CharFun, lam: np.ndarray, L: np.ndarray) -> np.ndarray:
    return np.array([F.d_lambda(l, x) for l, x in zip(lam, L)], dtype=complex)


def _d_L_nodes(F: CharFun, lam: np.ndarray, L: np.ndarray) -> np.ndarray:
    return np.array([F.d_L(l, x) for l, x in zip(lam, L)], dtype=complex)


def polar_profile(branch: SccBranch):
    """(r, theta, theta') sampled along the branch.

    For traced branches theta' is the analytic value Im(L'/L); synthetic
    branches (no attached characteristic function) get centered differences.
    Nodes with |L| below the polar floor are flagged invalid.
    """
    r = np.abs(branch.L)
    theta = np.unwrap(np.angle(branch.L))
    if branch.charfun is not None and np.all(branch.tangent_ok):
        tp = branch.theta_prime
    else:
        dL = np.gradient(branch.L, branch.beta)
        with np.errstate(invalid="ignore", divide="ignore"):
            tp = np.imag(dL / np.where(r > _POLAR_RADIUS_FLOOR, branch.L, np.nan))
    ok = r > _POLAR_RADIUS_FLOOR
    return r, theta, np.where(ok, tp, np.nan)


def crossing_at(F: CharFun, branch: SccBranch, beta_star: float) -> CrossingReport:
    """Crossing-direction report at one branch point.

    Requires a nonzero lam-derivative of F (otherwise no single root crosses
    smoothly and the report is flagged degenerate with no jump claimed).
    """
    L_star = branch.eval(beta_star)
    lam = 1j * beta_star
    dl = F.d_lambda(lam, L_star)
    dL = F.d_L(lam, L_star)
    scale = max(1.0, abs(L_star))
    if abs(dl) <= 1e-12 * scale:
        return CrossingReport(beta_star, L_star, complex(np.nan), None, float("nan"), 0,
                              flag="regular-crossing hypothesis fails")
    if abs(dL) == 0.0:
        return CrossingReport(beta_star, L_star, complex(np.nan), None, float("nan"), 0,
                              flag="tangent undefined")
    Lp = -1j * dl / dL
    normal = 1j * Lp
    if abs(L_star) <= _POLAR_RADIUS_FLOOR:
        return CrossingReport(beta_star, L_star, normal, -1, float("nan"), 0, flag="polar undefined")
    tp = float(np.imag(Lp / L_star))
    # a vanishing angular rate (to rounding) means the ray grazes the curve:
    # no jump direction may be claimed
    if abs(tp) <= 1e-12 * max(1.0, abs(Lp / L_star)):
        return CrossingReport(beta_star, L_star, normal, -1, tp, 0, flag="ray degenerate")
    return CrossingReport(beta_star, L_star, normal, -1, tp, int(np.sign(tp)))


def _segments_intersect(p0, p1, q0, q1) -> bool:
    def cross(o, a, b):
        return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)

    d1 = cross(q0, q1, p0)
    d2 = cross(q0, q1, p1)
    d3 = cross(p0, p1, q0)
    d4 = cross(p0, p1, q1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _candidate_pairs(bA: SccBranch, bB: SccBranch, same: bool):
    """Indices (i, j) of chord pairs that cross, bounding boxes prefiltered."""
    ax0, ax1 = bA.L[:-1], bA.L[1:]
    bx0, bx1 = bB.L[:-1], bB.L[1:]
    a_lo_re = np.minimum(ax0.real, ax1.real)
    a_hi_re = np.maximum(ax0.real, ax1.real)
    a_lo_im = np.minimum(ax0.imag, ax1.imag)
    a_hi_im = np.maximum(ax0.imag, ax1.imag)
    b_lo_re = np.minimum(bx0.real, bx1.real)
    b_hi_re = np.maximum(bx0.real, bx1.real)
    b_lo_im = np.minimum(bx0.imag, bx1.imag)
    b_hi_im = np.maximum(bx0.imag, bx1.imag)
    out = []
    block = 512
    for s in range(0, len(ax0), block):
        e = min(s + block, len(ax0))
        overlap = (
            (a_lo_re[s:e, None] <= b_hi_re[None, :])
            & (a_hi_re[s:e, None] >= b_lo_re[None, :])
            & (a_lo_im[s:e, None] <= b_hi_im[None, :])
            & (a_hi_im[s:e, None] >= b_lo_im[None, :])
        )
        ii, jj = np.nonzero(overlap)
        for i, j in zip(ii + s, jj):
            if same and j <= i + 1:
                continue
            if _segments_intersect(ax0[i], ax1[i], bx0[j], bx1[j]):
                out.append((int(i), int(j)))
    return out


def self_intersection(branches, tol: float = 1e-9) -> List[Tuple[float, float, complex]]:
    """Points where the curve revisits a gain: L(beta1) = L(beta2), beta1 < beta2.

    Accepts one branch or a list; intersections within and across branches
    are found from chord crossings and sharpened by bisection on the chord
    pair, then (when a characteristic function is attached) by a Newton
    solve on the two curve parameters.
    """
    if isinstance(branches, SccBranch):
        branches = [branches]
    found: List[Tuple[float, float, complex]] = []
    for ai in range(len(branches)):
        for bi in range(ai, len(branches)):
            bA, bB = branches[ai], branches[bi]
            for i, j in _candidate_pairs(bA, bB, same=(ai == bi)):
                hit = _refine_intersection(bA, i, bB, j, tol)
                if hit is not None:
                    found.append(hit)
    # deduplicate near-identical parameter pairs
    out: List[Tuple[float, float, complex]] = []
    for b1, b2, L in sorted(found):
        if any(abs(b1 - c1) < 1e-6 and abs(b2 - c2) < 1e-6 for c1, c2, _ in out):
            continue
        out.append((b1, b2, L))
    return out


def _refine_intersection(bA: SccBranch, i: int, bB: SccBranch, j: int, tol: float):
    a0, a1 = bA.beta[i], bA.beta[i + 1]
    b0, b1 = bB.beta[j], bB.beta[j + 1]
    pa0, pa1 = complex(bA.L[i]), complex(bA.L[i + 1])
    pb0, pb1 = complex(bB.L[j]), complex(bB.L[j + 1])
    for _ in range(200):
        if max(abs(pa1 - pa0), abs(pb1 - pb0)) < max(tol, 1e-12):
            break
        if abs(pa1 - pa0) >= abs(pb1 - pb0):
            am = 0.5 * (a0 + a1)
            pam = bA.eval(am)
            if _segments_intersect(pa0, pam, pb0, pb1):
                a1, pa1 = am, pam
            elif _segments_intersect(pam, pa1, pb0, pb1):
                a0, pa0 = am, pam
            else:
                a0, a1, pa0, pa1 = a0, am, pa0, pam  # crossing lost to curvature; shrink anyway
        else:
            bm = 0.5 * (b0 + b1)
            pbm = bB.eval(bm)
            if _segments_intersect(pa0, pa1, pb0, pbm):
                b1, pb1 = bm, pbm
            elif _segments_intersect(pa0, pa1, pbm, pb1):
                b0, pb0 = bm, pbm
            else:
                b0, b1, pb0, pb1 = b0, bm, pb0, pbm
    beta1 = 0.5 * (a0 + a1)
    beta2 = 0.5 * (b0 + b1)
    if bA.charfun is not None:
        refined = _newton_pair(bA, beta1, bB, beta2)
        if refined is not None:
            beta1, beta2 = refined
    L1, L2 = bA.eval(beta1), bB.eval(beta2)
    if abs(L1 - L2) > max(1e-6, tol):
        return None
    if bA is bB and beta2 < beta1:
        beta1, beta2 = beta2, beta1
    if bA is bB and abs(beta2 - beta1) < 1e-9:
        return None
    return (float(beta1), float(beta2), 0.5 * (L1 + L2))


def _newton_pair(bA: SccBranch, beta1: float, bB: SccBranch, beta2: float):
    lo1, hi1 = bA.beta[0], bA.beta[-1]
    lo2, hi2 = bB.beta[0], bB.beta[-1]
    for _ in range(40):
        L1, L2 = bA.eval(beta1), bB.eval(beta2)
        g = L1 - L2
        if abs(g) < 1e-12 * max(1.0, abs(L1)):
            return beta1, beta2
        t1 = bA.tangent_at(beta1)
        t2 = bB.tangent_at(beta2)
        if not (np.isfinite(t1) and np.isfinite(t2)):
            return None
        J = np.array([[t1.real, -t2.real], [t1.imag, -t2.imag]])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-14:
            return None
        rhs = -np.array([g.real, g.imag])
        d1 = (rhs[0] * J[1, 1] - rhs[1] * J[0, 1]) / det
        d2 = (J[0, 0] * rhs[1] - J[1, 0] * rhs[0]) / det
        beta1 = float(np.clip(beta1 + d1, lo1, hi1))
        beta2 = float(np.clip(beta2 + d2, lo2, hi2))
    return beta1, beta2
