"""Sup-norms of sampled jets, the restriction morphism, quotient-norm upper
bounds, and resolution-qualified membership scans.

Terminology used throughout: F is the norm over the closed mask Q, E the
same computation over the open mask, G the norm of a global window jet, and
H-upper the G-norm of one particular extension, which bounds the
(uncomputable) quotient norm from above.  A membership scan never proves
membership; it reports consistency at the sampled resolution or a concrete
violation carried as a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import CertTerm, Certificate
from .errors import MaskMismatchError, NotAnExtensionError
from .grid import GridMask, SampledJet, alpha_key, sup_on_mask

DEFAULT_TOL = 1e-2
DEFAULT_C_FACTOR = 10.0


@dataclass(frozen=True)
class NormReport:
    """Per-component sups and their max over one mask."""

    space: str
    order: int
    mask_label: str
    per_alpha: dict
    overall: float
    point_count: int

    def to_payload(self) -> dict:
        return {
            "space": self.space,
            "order": self.order,
            "mask": self.mask_label,
            "overall": self.overall,
            "per_alpha": {
                alpha_key(a): v for a, v in self.per_alpha.items()
            },
            "point_count": self.point_count,
        }


def norm_report(jet: SampledJet, space: str, mask_label: str) -> NormReport:
    per = {
        alpha: sup_on_mask(jet.components[alpha], jet.mask)
        for alpha in jet.alphas()
    }
    return NormReport(
        space, jet.order, mask_label, per, max(per.values()), jet.mask.count
    )


def norm_f(jet: SampledJet, mask_label: str = "Q") -> NormReport:
    return norm_report(jet, "F", mask_label)


def norm_e(jet: SampledJet, mask_label: str = "Omega") -> NormReport:
    return norm_report(jet, "E", mask_label)


def norm_g(jet: SampledJet, mask_label: str = "window") -> NormReport:
    return norm_report(jet, "G", mask_label)


def restrict_to_omega(jet: SampledJet, omega: GridMask) -> SampledJet:
    """Same values on the smaller mask; the discrete restriction morphism."""
    if omega.grid != jet.grid:
        raise MaskMismatchError("restriction mask lives on a different lattice")
    if (omega.member & ~jet.mask.member).any():
        raise MaskMismatchError("restriction mask is not a subset of the jet's")
    components = {
        alpha: np.where(omega.member, arr, 0.0)
        for alpha, arr in jet.components.items()
    }
    return SampledJet(jet.order, jet.grid, omega, components)


def h_norm_upper_bound(x: SampledJet, xbar: SampledJet,
                       tol: float = 1e-9) -> NormReport:
    """G-norm of one extension; an upper bound for the quotient norm.

    Verifies first that xbar actually restricts to x on x's mask (same
    lattice spacing, window translated by whole steps).
    """
    if abs(x.grid.h - xbar.grid.h) > 1e-15:
        raise MaskMismatchError("extension uses a different lattice spacing")
    if x.order > xbar.order:
        raise MaskMismatchError("extension carries fewer components")
    h = x.grid.h
    offset = []
    for a in range(x.grid.dim):
        shift = (x.grid.origin[a] - xbar.grid.origin[a]) / h
        k = round(shift)
        if abs(shift - k) > 1e-9:
            raise MaskMismatchError("extension lattice is not aligned")
        offset.append(int(k))
    idx = np.nonzero(x.mask.member)
    big_idx = tuple(idx[a] + offset[a] for a in range(x.grid.dim))
    for a in range(x.grid.dim):
        if big_idx[a].size and (
            big_idx[a].min() < 0 or big_idx[a].max() >= xbar.grid.extents[a]
        ):
            raise NotAnExtensionError("extension window does not contain Q")
    if not xbar.mask.member[big_idx].all():
        raise NotAnExtensionError("extension mask does not cover Q")
    worst = 0.0
    for alpha in x.alphas():
        diff = np.abs(
            xbar.components[alpha][big_idx] - x.components[alpha][idx]
        )
        if diff.size:
            worst = max(worst, float(diff.max()))
    if worst > tol:
        raise NotAnExtensionError(
            f"restriction to Q differs from x by {worst:.3g} (tolerance {tol:g})"
        )
    return norm_report(xbar, "H-upper", "window")


@dataclass(frozen=True)
class MembershipVerdict:
    """Outcome of a resolution-h scan; violations carry their evidence."""

    space: str
    verdict: str  # consistent-at-resolution | violation
    h: float
    tolerances: dict
    fd_defect: float
    modulus: dict  # per derivative order
    certificate: Certificate | None

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent-at-resolution"

    def to_payload(self) -> dict:
        payload = {
            "space": self.space,
            "verdict": self.verdict,
            "h": self.h,
            "tolerances": {str(k): v for k, v in self.tolerances.items()},
            "fd_defect": self.fd_defect,
            "modulus": {str(k): v for k, v in self.modulus.items()},
        }
        if self.certificate is not None:
            payload["certificate"] = self.certificate.to_payload()
        return payload


def _central_triples(member: np.ndarray, axis: int):
    """Boolean array marking points whose both axis neighbors are masked."""
    ok = np.zeros_like(member)
    sl_mid = [slice(None)] * member.ndim
    sl_lo = [slice(None)] * member.ndim
    sl_hi = [slice(None)] * member.ndim
    sl_mid[axis] = slice(1, -1)
    sl_lo[axis] = slice(0, -2)
    sl_hi[axis] = slice(2, None)
    ok[tuple(sl_mid)] = (
        member[tuple(sl_mid)] & member[tuple(sl_lo)] & member[tuple(sl_hi)]
    )
    return ok


def _adjacent_pairs(member: np.ndarray, axis: int):
    """Mask pairs (p, p+e_axis) with both endpoints inside."""
    sl_lo = [slice(None)] * member.ndim
    sl_hi = [slice(None)] * member.ndim
    sl_lo[axis] = slice(0, -1)
    sl_hi[axis] = slice(1, None)
    return member[tuple(sl_lo)] & member[tuple(sl_hi)], tuple(sl_lo), tuple(sl_hi)


def _shift_diff(arr: np.ndarray, axis: int) -> np.ndarray:
    sl_lo = [slice(None)] * arr.ndim
    sl_hi = [slice(None)] * arr.ndim
    sl_lo[axis] = slice(0, -2)
    sl_hi[axis] = slice(2, None)
    out = np.zeros_like(arr)
    sl_mid = [slice(None)] * arr.ndim
    sl_mid[axis] = slice(1, -1)
    out[tuple(sl_mid)] = arr[tuple(sl_hi)] - arr[tuple(sl_lo)]
    return out


def _scan(jet: SampledJet, space: str, tol: float,
          c_factor: float, tol_by_order: dict | None) -> MembershipVerdict:
    h = jet.grid.h
    dim = jet.grid.dim
    member = jet.mask.member
    sup_all = max(
        sup_on_mask(jet.components[a], jet.mask) for a in jet.alphas()
    )
    c_bound = c_factor * max(1.0, sup_all) * h

    fd_defect = 0.0
    fd_witness = None
    for alpha in jet.alphas():
        total = sum(alpha)
        if total == 0:
            continue
        for axis in range(dim):
            if alpha[axis] == 0:
                continue
            lower = list(alpha)
            lower[axis] -= 1
            lower = tuple(lower)
            triple = _central_triples(member, axis)
            if not triple.any():
                continue
            est = _shift_diff(jet.components[lower], axis) / (2.0 * h)
            defect = np.where(triple, np.abs(est - jet.components[alpha]), 0.0)
            worst = float(defect.max())
            if worst > fd_defect:
                fd_defect = worst
                k = np.unravel_index(int(defect.argmax()), defect.shape)
                fd_witness = (alpha, lower, axis, k, float(est[k]),
                              float(jet.components[alpha][k]))

    modulus: dict[int, float] = {}
    mod_witness = None
    for alpha in jet.alphas():
        order = sum(alpha)
        arr = jet.components[alpha]
        for axis in range(dim):
            pair, sl_lo, sl_hi = _adjacent_pairs(member, axis)
            if not pair.any():
                continue
            step = np.where(pair, np.abs(arr[sl_hi] - arr[sl_lo]), 0.0)
            worst = float(step.max())
            if worst > modulus.get(order, 0.0):
                modulus[order] = worst
                k = np.unravel_index(int(step.argmax()), step.shape)
                mod_witness = (alpha, axis, k, worst)
    tolerances = {"fd_bound": c_bound, "modulus": tol}
    if tol_by_order:
        tolerances.update({f"modulus_order_{k}": v
                           for k, v in tol_by_order.items()})

    bad_fd = fd_defect > c_bound
    bad_mod_order = None
    for order, value in sorted(modulus.items()):
        bound = (tol_by_order or {}).get(order, tol)
        if value > bound:
            bad_mod_order = order
            break
    if not bad_fd and bad_mod_order is None:
        return MembershipVerdict(
            space, "consistent-at-resolution", h, tolerances,
            fd_defect, modulus, None,
        )
    terms = []
    if bad_fd:
        alpha, lower, axis, k, est, declared = fd_witness
        lo = list(k)
        hi = list(k)
        lo[axis] -= 1
        hi[axis] += 1
        terms.append(CertTerm(
            n=0,
            base=jet.grid.coord(tuple(lo)),
            probe=jet.grid.coord(tuple(hi)),
            quotient=est,
            note=(
                f"finite difference of {alpha_key(lower)} along axis {axis} "
                f"is {est:.6g} but component {alpha_key(alpha)} declares "
                f"{declared:.6g}"
            ),
        ))
        claim = f"not-in-{space}-at-resolution"
        gap = abs(est - declared)
    else:
        alpha, axis, k, worst = mod_witness
        hi = list(k)
        hi[axis] += 1
        terms.append(CertTerm(
            n=0,
            base=jet.grid.coord(tuple(k)),
            probe=jet.grid.coord(tuple(hi)),
            quotient=worst,
            note=(
                f"component {alpha_key(alpha)} jumps by {worst:.6g} across "
                f"one lattice step on axis {axis}"
            ),
        ))
        claim = f"not-in-{space}-at-resolution"
        gap = worst
    cert = Certificate(
        domain="lattice-scan",
        claim=claim,
        terms=tuple(terms),
        interior_limit=0.0,
        interior_witness=(),
        gap=gap,
        diverges=False,
        n_max=0,
        config={"h": h, **{str(k): float(v) for k, v in tolerances.items()}},
    )
    return MembershipVerdict(
        space, "violation", h, tolerances, fd_defect, modulus, cert
    )


def check_membership_f(jet: SampledJet, tol: float = DEFAULT_TOL,
                       c_factor: float = DEFAULT_C_FACTOR,
                       tol_by_order: dict | None = None) -> MembershipVerdict:
    """Scan a jet on a closed mask Q for C^i-consistency at resolution h.

    Declared partials must match central differences of the next component
    down (within c_factor * max(1, sup) * h), and every component's one-step
    modulus of continuity must stay below the tolerance.
    """
    return _scan(jet, "F", tol, c_factor, tol_by_order)


def check_membership_e(jet: SampledJet, tol: float = DEFAULT_TOL,
                       c_factor: float = DEFAULT_C_FACTOR,
                       tol_by_order: dict | None = None) -> MembershipVerdict:
    """Same scan over an open mask: the bounded-uniformly-continuous reading.

    Pairs and triples never straddle excluded points, so a field may pass
    here while failing the closed-mask scan; that asymmetry is the point.
    """
    return _scan(jet, "E", tol, c_factor, tol_by_order)
