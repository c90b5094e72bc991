"""Numerical ranges, covering disks and a-priori error bounds.

The C-numerical range of ``A = K C`` is the set of quotients
``x^* C A x / x^* C x`` over complex ``x`` with ``C x != 0``.  For
``B = G^{-1} C`` it lies in a box fixed by five spectral quantities; a disk
around that box maps under ``g(mu) = (1 + gamma/mu)^{-1}`` to a disk inside
D(1/2, 1/2), and the ratio of that disk's radius to a contour radius gives
geometric convergence of the Krylov approximation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .dense import phi_scalar
from .errors import NumericalError
from .evolve import g_map
from .model import ORACLE_MAX_N

#: Number of contour points used for max |f| on the circle.
CONTOUR_POINTS = 256


@dataclass(frozen=True)
class DiskBound:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"disk radius must be non-negative, got {self.radius!r}")

    @property
    def right_half_plane(self):
        return np.real(self.center) > self.radius

    def contains(self, z, margin=0.0):
        return np.abs(np.asarray(z) - self.center) <= self.radius + margin

    @property
    def mu1(self):
        return float(np.real(self.center) - self.radius)

    @property
    def mu2(self):
        return float(np.real(self.center) + self.radius)


@dataclass
class RangeSample:
    points: np.ndarray
    count: int
    seed: int
    redrawn: int = 0

    def hull(self, growth=1.0):
        """Vertices of the convex hull, optionally scaled about the centroid."""
        pts = np.column_stack([self.points.real, self.points.imag])
        try:
            verts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            # Degenerate (segment or point): keep the extreme points.
            verts = pts[[np.argmin(pts[:, 0]), np.argmax(pts[:, 0]),
                         np.argmin(pts[:, 1]), np.argmax(pts[:, 1])]]
        centre = verts.mean(axis=0)
        verts = centre + growth * (verts - centre)
        return verts[:, 0] + 1j * verts[:, 1]

    def real_range(self):
        return float(self.points.real.min()), float(self.points.real.max())

    def imag_range(self):
        return float(self.points.imag.min()), float(self.points.imag.max())


@dataclass(frozen=True)
class SpectralBox:
    """Eigenvalue bounds for the C-numerical range of ``G^{-1} C``.

    ``xi1, xi2``: extremes of sym(G^{-1}); ``xi3``: spectral radius of
    skew(G^{-1}); ``xi4, xi5``: extremes of the nonzero spectrum of C.
    The range lies in ``[xi1 xi4, xi2 xi5] x [-xi3 xi5, xi3 xi5]``.
    """

    xi1: float
    xi2: float
    xi3: float
    xi4: float
    xi5: float
    method: str = "product"

    @property
    def re_lo(self):
        return self.xi1 * self.xi4

    @property
    def re_hi(self):
        return self.xi2 * self.xi5

    @property
    def im_hi(self):
        return self.xi3 * self.xi5

    def corners(self):
        return np.array([complex(x, y) for x in (self.re_lo, self.re_hi)
                         for y in (-self.im_hi, self.im_hi)])


def spectral_box(system, method="product"):
    """Box around the C-numerical range of ``G^{-1} C``.

    ``method="product"`` uses the eigenvalue bounds of ``G^{-1}`` and C
    separately.  ``method="compressed"`` bounds the symmetric and skew parts
    of ``C1^{1/2} V_C^T G^{-1} V_C C1^{1/2}`` directly, which is never looser;
    it is reported with ``xi4 = xi5 = 1``.
    """
    if system.N > ORACLE_MAX_N:
        raise ValueError(f"spectral box needs dense G^{{-1}}; N = {system.N} exceeds {ORACLE_MAX_N}")
    P = system.projector
    if P.n == 0:
        raise ValueError("C is zero: the C-numerical range is empty")
    Ginv = system.g_lu.solve(np.eye(system.N))
    if method == "product":
        M = Ginv
        xi4, xi5 = float(P.C1.min()), float(P.C1.max())
    elif method == "compressed":
        s = np.sqrt(P.C1)
        V = P.V_C
        M = s[:, None] * (V.T @ Ginv @ V) * s[None, :]
        xi4 = xi5 = 1.0
    else:
        raise ValueError(f"unknown method {method!r}")
    sym = np.linalg.eigvalsh(0.5 * (M + M.T))
    skew = 0.5 * (M - M.T)
    xi3 = float(np.linalg.norm(skew, 2)) if skew.size else 0.0
    return SpectralBox(float(sym[0]), float(sym[-1]), xi3, xi4, xi5, method)


def _as_action(K):
    if callable(K):
        return K, None
    Kd = K.toarray() if hasattr(K, "toarray") else np.asarray(K, dtype=float)
    return (lambda X: Kd @ X), Kd


def sample_c_numrange(K, C, n_samples, seed=0, batch=20000):
    """Random points of the C-numerical range of ``A = K C``.

    Each point is ``y^* K y / x^* C x`` with ``y = C x`` for a complex
    Gaussian ``x``.  Samples with ``x^* C x`` below ``1e-14 ||C|| ||x||^2``
    are redrawn.  When K is given as a matrix, the real and imaginary parts
    are evaluated from its symmetric and skew parts separately, so a
    positive semi-definite symmetric part never yields a negative real part
    through cancellation.
    """
    Cd = C.toarray() if hasattr(C, "toarray") else np.asarray(C, dtype=float)
    N = Cd.shape[0]
    cnorm = np.linalg.norm(Cd, 2)
    if cnorm == 0:
        raise ValueError("C is zero: the C-numerical range is empty")
    act, Kd = _as_action(K)
    if Kd is not None:
        Ks, Kk = 0.5 * (Kd + Kd.T), 0.5 * (Kd - Kd.T)
    rng = np.random.default_rng(seed)
    out = []
    have = redrawn = 0
    while have < n_samples:
        nb = min(batch, n_samples - have)
        X = rng.standard_normal((N, nb)) + 1j * rng.standard_normal((N, nb))
        Y = Cd @ X
        den = np.real(np.sum(X.conj() * Y, axis=0))
        ok = den > 1e-14 * cnorm * np.sum(np.abs(X) ** 2, axis=0)
        redrawn += int(np.count_nonzero(~ok))
        Y, den = Y[:, ok], den[ok]
        if Kd is not None:
            re = np.real(np.sum(Y.conj() * (Ks @ Y), axis=0))
            im = np.imag(np.sum(Y.conj() * (Kk @ Y), axis=0))
            q = (re + 1j * im) / den
        else:
            q = np.sum(Y.conj() * act(Y), axis=0) / den
        out.append(q)
        have += q.size
    pts = np.concatenate(out)[:n_samples] if out else np.zeros(0, complex)
    return RangeSample(points=pts, count=pts.size, seed=seed, redrawn=redrawn)


def sample_numrange(A, n_samples, seed=0):
    """Ordinary numerical range samples ``z^* A z / z^* z``."""
    A = np.atleast_2d(np.asarray(A))
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((A.shape[0], n_samples)) + 1j * rng.standard_normal((A.shape[0], n_samples))
    q = np.sum(Z.conj() * (A @ Z), axis=0) / np.sum(np.abs(Z) ** 2, axis=0)
    return RangeSample(points=q, count=n_samples, seed=seed)


def covering_disk_from_box(box):
    """Disk ``D(c1, rho1)`` on the real axis containing the box.

    ``rho1(c) = sqrt(max(c - a, b - c)^2 + s^2)`` with ``a = xi1 xi4``,
    ``b = xi2 xi5``, ``s = xi3 xi5``.  The centre minimizing ``rho1/c``
    (which maximizes ``mu1/mu2``) is ``max((a+b)/2, (a^2+s^2)/a)``; it always
    satisfies ``c1 > rho1`` when ``a > 0``.
    """
    a, b, s = box.re_lo, box.re_hi, box.im_hi
    if not a > 0:
        raise NumericalError(
            f"right-half-plane certificate unavailable: lower real bound {a:.3e} is not positive")
    mid = 0.5 * (a + b)
    c = max(mid, (a * a + s * s) / a) if s > 0 else mid
    rho = math.sqrt(max(c - a, b - c) ** 2 + s * s)
    if not c > rho and not (s == 0 and a == b):
        raise NumericalError("right-half-plane certificate unavailable: no admissible centre")
    return DiskBound(center=c, radius=rho)


def covering_disk_from_sample(sample, growth=1.05):
    """Real-centred disk around a sampled range, inflated by ``growth``.

    Statistical, not a certificate.
    """
    lo, hi = sample.real_range()
    s = float(np.max(np.abs(sample.points.imag)))
    width = hi - lo
    lo, hi = lo - 0.5 * (growth - 1) * width, hi + 0.5 * (growth - 1) * width
    box = SpectralBox(lo, hi, growth * s, 1.0, 1.0, method="sample")
    return covering_disk_from_box(box)


def mapped_disk(d, gamma):
    """Image disk ``D(c0, rho0)`` of ``D(c1, rho1)`` under the g-map."""
    mu1, mu2 = d.mu1, d.mu2
    if not mu1 > 0:
        raise ValueError(f"mu1 = c - rho must be positive, got {mu1!r}")
    g1, g2 = g_map(mu1, gamma), g_map(mu2, gamma)
    return DiskBound(center=0.5 * (g1 + g2), radius=0.5 * (g2 - g1))


def contour_points(center, r, n=CONTOUR_POINTS):
    """``n`` points on the circle, offset by half a step from the real axis."""
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    return center + r * np.exp(1j * theta)


def contour_max(d_S, r, t, gamma, norms, time_factors=True, n=CONTOUR_POINTS):
    """``max_lambda (|f(lambda)| n0 + |f_1(lambda)| n1 + |f_2(lambda)| n2)`` on the circle."""
    c0 = float(np.real(d_S.center))
    lam = contour_points(c0, r, n)
    s = (1.0 / lam - 1.0) / gamma
    with np.errstate(over="ignore", invalid="ignore"):
        f0 = np.abs(np.exp(-t * s))
        f1 = np.abs(s * phi_scalar(-t * s, 1))
        f2 = np.abs(s * phi_scalar(-t * s, 2))
    n0, n1, n2 = norms
    w1, w2 = (t, t * t) if time_factors else (1.0, 1.0)
    vals = f0 * n0 + w1 * f1 * n1 + w2 * f2 * n2
    if not np.all(np.isfinite(vals)):
        raise NumericalError("contour values overflowed")
    return float(vals.max())


def prior_bound_thm4(d_S, r, t, gamma, m, norms, time_factors=True):
    """Cauchy-integral bound on ``||x_R(t) - x_a(t)||_C``:

        max_Gamma(|f| n0 + |f_1| n1 + |f_2| n2) * 4/(r - rho0) * (rho0/r)^m,

    on the circle of radius ``r`` about ``c0`` (default ``r = c0``, the
    circle through the origin).  ``norms`` are the C-norms of the three
    Krylov seeds; with ``time_factors`` the source terms carry their ``t``
    and ``t^2`` weights.
    """
    c0, rho0 = float(np.real(d_S.center)), float(d_S.radius)
    r = c0 if r is None else float(r)
    if not (rho0 < r <= c0):
        raise ValueError(f"contour radius r = {r!r} must lie in (rho0, c0] = ({rho0!r}, {c0!r}]")
    if rho0 == 0.0 and m >= 1:
        return 0.0
    fmax = contour_max(d_S, r, t, gamma, norms, time_factors)
    return fmax * 4.0 / (r - rho0) * (rho0 / r) ** m


def convergence_rate_fit(errors):
    """Least-squares fit ``err ~ prefactor * m^order`` in log-log scale."""
    pts = [(float(m), float(e)) for m, e in errors]
    if len(pts) < 4:
        raise ValueError("need at least 4 (m, err) points")
    if all(e == 0 for _, e in pts):
        return {"order": None, "prefactor": 0.0, "exact": True, "note": "exact, no rate"}
    pts = [(m, e) for m, e in pts if e > 0]
    if len(pts) < 4:
        return {"order": None, "prefactor": None, "exact": True, "note": "exact, no rate"}
    lm = np.log([m for m, _ in pts])
    le = np.log([e for _, e in pts])
    order, icpt = np.polyfit(lm, le, 1)
    return {"order": float(order), "prefactor": float(np.exp(icpt)), "exact": False}


def radius_ratio(mu1, mu2, gamma):
    """``rho/c0 = (mu2 - mu1) gamma / (mu1 (mu2 + gamma) + mu2 (mu1 + gamma))``."""
    gamma = np.asarray(gamma, dtype=float)
    return (mu2 - mu1) * gamma / (mu1 * (mu2 + gamma) + mu2 * (mu1 + gamma))


def _c0_rho(mu1, mu2, gamma):
    g1 = mu1 / (mu1 + gamma)
    g2 = mu2 / (mu2 + gamma)
    return 0.5 * (g1 + g2), 0.5 * (g2 - g1)


def log_e_gamma(mu1, mu2, delta, m, gamma, k):
    """``log E(gamma)`` with ``h = delta * gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    c0, rho = _c0_rho(mu1, mu2, gamma)
    base = m * np.log(radius_ratio(mu1, mu2, gamma)) - np.log(c0 - rho)
    if k == 0:
        return delta * (1.0 - 1.0 / (2.0 * c0)) + base
    return k * np.log(delta * gamma) + base


def e_gamma_curve(mu1, mu2, h_over_gamma, m, gammas, k):
    """Rows ``(gamma, E(gamma))`` with ``h/gamma`` held fixed."""
    gammas = np.asarray(gammas, dtype=float)
    if gammas.size == 0:
        raise ValueError("empty gamma grid")
    if not 0 < mu1 <= mu2:
        raise ValueError("need 0 < mu1 <= mu2")
    logE = log_e_gamma(mu1, mu2, h_over_gamma, m, gammas, k)
    return [(float(g), float(np.exp(le))) for g, le in zip(gammas, logE)]


def e_gamma_slope(mu1, mu2, delta, m, gamma, k):
    """Closed-form ``d log E / d log gamma``."""
    g = np.asarray(gamma, dtype=float)
    core = 2 * m / ((1 / mu1 + 1 / mu2) * g + 2) + g / (mu1 + g)
    if k >= 1:
        return k + core
    num = mu2 * (g + mu1) ** 2 + mu1 * (g + mu2) ** 2
    den = (2 * mu1 * mu2 + g * (mu1 + mu2)) ** 2
    return -delta * g * num / den + core


def decay_epsilon(mu1, mu2, delta, m):
    """``delta - 2 m w (1+sqrt w)^2/(1+3w) - (1+sqrt w)^2/(1+w)``, ``w = mu1/mu2``."""
    w = mu1 / mu2
    sw = (1 + math.sqrt(w)) ** 2
    return delta - 2 * m * w * sw / (1 + 3 * w) - sw / (1 + w)


def small_gamma_slope_formula(mu1, mu2, m):
    """Closed-form slope expression quoted for ``gamma = mu1`` and its ``6 mu1 m`` cap."""
    expr = 2 * mu1 * mu2 * m * (mu1 + 3 * mu2) / ((mu1 + mu2) ** 2 + 4 * mu1 * mu2)
    return expr, 6 * mu1 * m


def slope_diagnostics(curve, mu1, mu2, m, delta, k, fd_step=1e-5):
    """Shape checks for an E(gamma) curve.

    Returns a dict with finite-difference and closed-form slopes (in
    log gamma), their largest disagreement, and for ``k = 0`` the cap-shape
    test, the decay rate ``epsilon`` and whether
    ``-d log E/d gamma >= epsilon (sqrt mu1 + sqrt mu2)^{-2}`` holds on every
    grid point beyond ``mu2``.  For ``k >= 1`` it reports the minimum slope
    against ``k + 1``.
    """
    gam = np.array([g for g, _ in curve])
    le = lambda g: log_e_gamma(mu1, mu2, delta, m, g, k)
    fd = (le(gam * np.exp(fd_step)) - le(gam * np.exp(-fd_step))) / (2 * fd_step)
    an = e_gamma_slope(mu1, mu2, delta, m, gam, k)
    rep = {
        "k": k, "m": m, "delta": delta, "mu1": mu1, "mu2": mu2,
        "gamma": gam.tolist(),
        "slope_fd": fd.tolist(),
        "slope_analytic": an.tolist(),
        "slope_max_abs_diff": float(np.max(np.abs(fd - an) / np.maximum(1.0, np.abs(an)))),
        "ratio_increasing": bool(np.all(np.diff(radius_ratio(mu1, mu2, gam)) > 0)),
    }
    if k == 0:
        sign = np.sign(an)
        changes = np.flatnonzero(np.diff(sign) != 0)
        rep["sign_changes"] = int(changes.size)
        rep["cap_shape"] = bool(changes.size <= 1 and sign[0] >= 0 and
                                (changes.size == 0 or sign[-1] < 0))
        eps = decay_epsilon(mu1, mu2, delta, m)
        rep["epsilon"] = eps
        beyond = gam > mu2
        rate = eps / (math.sqrt(mu1) + math.sqrt(mu2)) ** 2
        neg_dlogE_dgamma = -an[beyond] / gam[beyond]
        rep["decay_rate_bound"] = rate
        rep["decay_points"] = int(beyond.sum())
        rep["decay_detected"] = bool(eps > 0 and beyond.any() and np.all(neg_dlogE_dgamma >= rate))
        expr, cap = small_gamma_slope_formula(mu1, mu2, m)
        rep["formula_slope"] = expr
        rep["formula_cap"] = cap
        rep["formula_holds"] = bool(expr <= cap * (1 + 1e-12))
        rep["slope_at_mu1"] = float(e_gamma_slope(mu1, mu2, delta, m, mu1, 0))
    else:
        rep["min_slope"] = float(an.min())
        rep["slope_ge_k_plus_1"] = bool(np.all(an >= k + 1 - 1e-12))
        rep["monotone_increasing"] = bool(np.all(np.diff([e for _, e in curve]) > 0))
    return rep


def phi_bound_check(h, k, mus):
    """``|h^k phi_k(-h/mu)| <= h^k/k! + 1e-15`` for every mu on the grid."""
    if k < 1:
        raise ValueError("the bound holds for k >= 1")
    mus = np.asarray(mus, dtype=float)
    vals = np.abs(h ** k * phi_scalar(-h / mus, k))
    return bool(np.all(vals <= h ** k / math.factorial(k) + 1e-15))


def c_operator_norm(K, C):
    """``||K C||_C = ||C^{1/2} K C^{1/2}||_2`` (dense)."""
    Cd = C.toarray() if hasattr(C, "toarray") else np.asarray(C, dtype=float)
    w, V = np.linalg.eigh(0.5 * (Cd + Cd.T))
    Ch = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
    return float(np.linalg.norm(Ch @ np.asarray(K) @ Ch, 2))

