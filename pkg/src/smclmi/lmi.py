"""Sector-bound maximisation by a small dense log-barrier SDP solver.

For dz/dt = A z + h(z) with h'h <= r^2 z'H'Hz, the program

    minimize alpha  s.t.  Y > 0,
    [[A Y + Y A', I, Y H'], [I, -I, 0], [H Y, 0, -alpha I]] < 0

certifies V = z' Y^-1 z for every r < 1/sqrt(alpha).  Its infimum equals
||H (sI - A)^-1||_inf^2 (bounded real lemma), which gives an independent
check by bisection on the Hamiltonian test.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, IllConditionedTransform, Infeasible


def lmi_block(Y, alpha, A_star, H) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    A = np.asarray(A_star, dtype=float)
    H = np.asarray(H, dtype=float)
    m = A.shape[0]
    I = np.eye(m)
    Z = np.zeros((m, m))
    top = A @ Y + Y @ A.T
    top = 0.5 * (top + top.T)
    HY = H @ Y
    return np.block([
        [top, I, HY.T],
        [I, -I, Z],
        [HY, Z, -alpha * I],
    ])


@dataclass(frozen=True)
class LmiProblem:
    A_star: np.ndarray
    H: np.ndarray
    margin: float = 1e-8
    tol: float = 1e-9
    max_iter: int = 2000

    def __post_init__(self):
        A = np.asarray(self.A_star, dtype=float)
        H = np.asarray(self.H, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or H.shape != A.shape:
            raise ConfigurationError(f"A* {A.shape} and H {H.shape} must be equal square shapes")
        if not np.any(H):
            raise ConfigurationError("H must be nonzero")
        object.__setattr__(self, "A_star", A)
        object.__setattr__(self, "H", H)


@dataclass(frozen=True)
class SectorCertificate:
    Y: np.ndarray
    alpha: float
    P: np.ndarray
    r_tilde: float
    r: float
    H: np.ndarray
    T: np.ndarray
    A_tilde: np.ndarray
    H_tilde: np.ndarray
    r_full: float
    r_column: float | None = None
    column: int | None = None
    iterations: int = 0
    lmi_max_eig: float = np.nan
    alpha_bisection: float = np.nan


def _basis(m):
    mats = []
    for i in range(m):
        for j in range(i, m):
            E = np.zeros((m, m))
            E[i, j] = E[j, i] = 1.0
            mats.append(E)
    return mats


def _barrier_solve(A, H, margin, tol, max_iter):
    """Path-following on -LMI >= margin I, Y >= margin I; A and H are normalised."""
    m = A.shape[0]
    Ym = _basis(m)
    nv = len(Ym) + 1
    big = 3 * m
    F0 = -lmi_block(np.zeros((m, m)), 0.0, A, H) - margin * np.eye(big)
    Fi = [-(lmi_block(E, 0.0, A, H) - lmi_block(np.zeros((m, m)), 0.0, A, H)) for E in Ym]
    Fa = np.zeros((big, big))
    Fa[2 * m:, 2 * m:] = np.eye(m)
    Fi.append(Fa)
    Gi = Ym + [np.zeros((m, m))]
    G0 = -margin * np.eye(m)
    c = np.zeros(nv)
    c[-1] = 1.0

    def chol(S):
        try:
            return sla.cho_factor(S, lower=True)
        except np.linalg.LinAlgError:
            return None

    Y0 = sla.solve_continuous_lyapunov(A, -2.0 * np.eye(m))
    Y0 = 0.5 * (Y0 + Y0.T)
    if np.min(np.linalg.eigvalsh(Y0)) <= 0:
        raise Infeasible("no positive definite Lyapunov matrix for A*")
    # Directions of Y that H does not see are unbounded; a far-away cap keeps
    # the barrier bounded without touching the optimum.
    y_cap = 1e6 * np.max(np.linalg.eigvalsh(Y0))
    blocks = [
        (F0, Fi),
        (G0, Gi),
        (y_cap * np.eye(m), [-Gk for Gk in Gi]),
    ]

    def potential(v, t):
        facs, logdet = [], 0.0
        for S0, Sk in blocks:
            f = chol(S0 + sum(vi * S for vi, S in zip(v, Sk)))
            if f is None:
                return np.inf, None
            facs.append(f)
            logdet += 2 * np.sum(np.log(np.diag(f[0])))
        return t * v[-1] - logdet, facs

    HY = H @ Y0
    a0 = 2.0 * np.max(np.linalg.eigvalsh(HY @ HY.T)) + 1.0
    v = np.array([Y0[i, j] for i in range(m) for j in range(i, m)] + [a0])
    dims = big + 2 * m
    t = dims / a0
    iterations = 0
    while True:
        quadratic = 0
        for _ in range(100):
            phi, facs = potential(v, t)
            if facs is None:
                raise Infeasible("barrier iterate left the feasible set")
            # Hessian kept in factored form G'G with columns vec(L^-1 S_k L^-T);
            # forming G'G explicitly loses the small curvatures once t is large
            cols, rhs = [], []
            for f, (_, Sk) in zip(facs, blocks):
                L = f[0]
                W = np.array([sla.solve_triangular(L, sla.solve_triangular(L, S, lower=True).T,
                                                   lower=True) for S in Sk])
                cols.append(W.reshape(nv, -1).T)
                rhs.append(np.eye(L.shape[0]).ravel())
            G = np.vstack(cols)
            g = t * c - G.T @ np.concatenate(rhs)
            R = np.linalg.qr(G, mode="r")
            w = sla.solve_triangular(R, -g, trans="T")
            dv = sla.solve_triangular(R, w)
            dec = w @ w
            iterations += 1
            lam = np.sqrt(dec)
            # from lam <= 0.25 Newton converges quadratically; after a few such
            # steps the decrement only reflects rounding in g at large t
            quadratic += lam <= 0.25
            if dec / 2 <= 1e-10 or quadratic > 4 or iterations >= max_iter:
                break
            s = 1.0
            if lam > 0.25:
                # try the full step, fall back to the damped step 1/(1 + lam),
                # which stays feasible for a self-concordant barrier
                phi_new = potential(v + dv, t)[0]
                if not phi_new <= phi - 0.25 * dec:
                    s = 1.0 / (1.0 + lam)
            while s > 1e-12 and not np.isfinite(potential(v + s * dv, t)[0]):
                s *= 0.5
            if s <= 1e-12:
                break
            v = v + s * dv
        if dims / t <= tol * v[-1] or iterations >= max_iter:
            break
        t *= 16.0
    Y = np.zeros((m, m))
    k = 0
    for i in range(m):
        for j in range(i, m):
            Y[i, j] = Y[j, i] = v[k]
            k += 1
    return Y, float(v[-1]), iterations


def _normalise(A, H):
    s = np.linalg.norm(A, 2)
    c = np.linalg.norm(H, 2)
    return s, c, A / s, H / c


def _hurwitz_check(A):
    ev = np.linalg.eigvals(A)
    top = float(np.max(ev.real))
    if not top < 0:
        raise Infeasible(f"A* is not Hurwitz (max real part of eigenvalues {top:.6g})", top)


def solve_sector_lmi(problem: LmiProblem, cross_check: bool = True,
                     T=None, column: int | None = None) -> SectorCertificate:
    """Minimise alpha; return the certificate with r_tilde = 1/sqrt(alpha), P = Y^-1.

    The problem is solved after scaling A* and H to unit spectral norm (the
    optimum scales exactly), and ``margin`` applies in those units.
    """
    A, H = problem.A_star, problem.H
    _hurwitz_check(A)
    s, c, An, Hn = _normalise(A, H)
    Yn, an, its = _barrier_solve(An, Hn, problem.margin, problem.tol, problem.max_iter)
    lmi_max = float(np.max(np.linalg.eigvalsh(lmi_block(Yn, an, An, Hn))))
    if not lmi_max < 0:
        raise Infeasible("barrier solution violates the LMI", lmi_max)
    Y = Yn / s
    alpha = an * c**2 / s**2
    r_tilde = 1.0 / np.sqrt(alpha)
    a_bis = bisection_alpha(A, H) if cross_check else np.nan
    if T is None:
        T = np.eye(A.shape[0])
    r_full = sector_back_map(r_tilde, T, "full")
    r_col = sector_back_map(r_tilde, T, "column", column) if column is not None else None
    return SectorCertificate(
        Y=Y, alpha=alpha, P=np.linalg.inv(Y), r_tilde=r_tilde,
        r=r_col if r_col is not None else r_full, H=H, T=np.asarray(T, dtype=float),
        A_tilde=A, H_tilde=H, r_full=r_full, r_column=r_col, column=column,
        iterations=its, lmi_max_eig=lmi_max, alpha_bisection=a_bis,
    )


def _lead_index(v):
    mag = np.abs(v)
    return int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])


def modal_transform(A_star, normalization: str = "columns") -> np.ndarray:
    """Real modal basis of A*, complex pairs split into Re/Im.

    Each eigenvector is rotated so that its largest entry is real and
    positive.  Columns follow eigenvalues sorted by decreasing real part.
    ``normalization="columns"`` scales every real column to unit norm;
    ``"complex"`` keeps each complex eigenvector at unit norm and leaves its
    Re/Im parts unscaled (the convention of LAPACK's geev).
    """
    if normalization not in ("columns", "complex"):
        raise ConfigurationError(f"unknown eigenvector normalization {normalization!r}")
    A = np.asarray(A_star, dtype=float)
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) > 1e12:
        raise IllConditionedTransform("A* is defective or nearly so; eigenvectors do not form a basis")
    order = np.lexsort((-lam.imag, -lam.real))
    cols = []
    for i in order:
        if lam[i].imag < 0:
            continue
        v = V[:, i]
        v = v * np.exp(-1j * np.angle(v[_lead_index(v)]))
        v = v / np.linalg.norm(v)
        parts = [v.real] if lam[i].imag == 0 else [v.real, v.imag]
        if normalization == "columns":
            parts = [p / np.linalg.norm(p) for p in parts]
        cols.extend(parts)
    return np.column_stack(cols)


def sector_back_map(r_tilde: float, T, mode: str = "full", column: int | None = None) -> float:
    """Sector radius in original coordinates.

    ``full``: r_tilde / ||T^-1||_2.  ``column``: r_tilde / ||(T^-1)[:, column]||.
    """
    T = np.asarray(T, dtype=float)
    if np.linalg.cond(T) > 1e14:
        raise IllConditionedTransform("transformation matrix is singular")
    Ti = np.linalg.inv(T)
    if mode == "full":
        return float(r_tilde / np.linalg.norm(Ti, 2))
    if mode == "column":
        if column is None:
            raise ConfigurationError("column back-map needs a column index")
        return float(r_tilde / np.linalg.norm(Ti[:, column]))
    raise ConfigurationError(f"unknown back-map mode {mode!r}")


def certify(A_star, H, transform: bool = True, column: int | None = None,
            margin: float = 1e-8, tol: float = 1e-9, cross_check: bool = True,
            normalization: str = "columns") -> SectorCertificate:
    """Solve the LMI in modal coordinates and map the radius back.

    With x = T x~ the LMI is posed for T^-1 A* T and H T.  ``column`` selects
    the per-column back-map used for ``r``; otherwise r is the full-norm map.
    """
    A = np.asarray(A_star, dtype=float)
    H = np.asarray(H, dtype=float)
    _hurwitz_check(A)
    T = modal_transform(A, normalization) if transform else np.eye(A.shape[0])
    Ti = np.linalg.inv(T)
    At = Ti @ A @ T
    Ht = H @ T
    cert = solve_sector_lmi(LmiProblem(At, Ht, margin, tol), cross_check, T, column)
    return SectorCertificate(**{**cert.__dict__, "H": H, "A_tilde": At, "H_tilde": Ht})


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    q_min_eig: float
    y_min_eig: float
    lmi_max_eig: float
    violations: tuple
    worst: float
    n_checked: int


def verify_certificate(cert: SectorCertificate, samples, r: float | None = None,
                       A=None) -> VerificationReport:
    """Check Q > 0 and -z'Qz + 2 ||Pz|| r ||Hz|| < 0 for each nonzero sample.

    Works in the coordinates the LMI was posed in (A_tilde, H_tilde) unless
    ``A`` is given; ``r`` defaults to the certified r_tilde.
    """
    A = cert.A_tilde if A is None else np.asarray(A, dtype=float)
    H = cert.H_tilde
    r = cert.r_tilde if r is None else r
    P = cert.P
    Q = -(A.T @ P + P @ A)
    q_min = float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))))
    y_min = float(np.min(np.linalg.eigvalsh(cert.Y)))
    Z = np.atleast_2d(np.asarray(samples, dtype=float))
    Z = Z[np.linalg.norm(Z, axis=1) > 0]
    quad = np.einsum("ij,jk,ik->i", Z, Q, Z)
    bound = -quad + 2 * np.linalg.norm(Z @ P.T, axis=1) * r * np.linalg.norm(Z @ H.T, axis=1)
    scale = np.maximum(np.abs(quad), 1e-300)
    bad = tuple(int(i) for i in np.flatnonzero(bound >= 0))
    worst = float(np.max(bound / scale)) if Z.size else -np.inf
    ok = q_min > 0 and y_min > 0 and cert.lmi_max_eig < 0 and not bad
    return VerificationReport(ok, q_min, y_min, cert.lmi_max_eig, bad, worst, Z.shape[0])


def lmi_feasible(A_star, H, alpha: float) -> bool:
    """Feasibility of the LMI at fixed alpha via the Hamiltonian imaginary-axis test."""
    A = np.asarray(A_star, dtype=float)
    H = np.asarray(H, dtype=float)
    if np.max(np.linalg.eigvals(A).real) >= 0:
        return False
    s, c, An, Hn = _normalise(A, H)
    gamma = c**2 / (s**2 * alpha)  # 1/alpha in normalised units
    m = A.shape[0]
    Ham = np.block([[An, np.eye(m)], [-gamma * Hn.T @ Hn, -An.T]])
    ev = np.linalg.eigvals(Ham)
    return bool(np.min(np.abs(ev.real) / np.maximum(1.0, np.abs(ev))) > 1e-9)


def bisection_alpha(A_star, H, rtol: float = 1e-12) -> float:
    """Infimum of feasible alpha by bisection on :func:`lmi_feasible`."""
    A = np.asarray(A_star, dtype=float)
    H = np.asarray(H, dtype=float)
    _hurwitz_check(A)
    hi = 1.0
    while not lmi_feasible(A, H, hi):
        hi *= 4.0
    lo = hi
    while lmi_feasible(A, H, lo):
        lo /= 4.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if lmi_feasible(A, H, mid):
            hi = mid
        else:
            lo = mid
    return hi
