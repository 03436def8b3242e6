"""Affine-parametric full-order models and the four benchmark problems.

Each benchmark is expressed in the semi-discrete affine form

    du/dt = sum_i alpha_i(mu) * A_i @ u + f,

with sparse operators A_i, scalar coefficient functions alpha_i, and a
case-specific time scheme. The viscous Burgers problem instead carries a
nonlinear right-hand side F(u) and an empty affine part.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

LAX_WENDROFF = "lax_wendroff"
RK4 = "rk4"
SEMI_IMPLICIT = "semi_implicit"
EXPLICIT_EULER = "explicit_euler"

TRANSPORT_CASES = ("transport_c1", "transport_c2", "transport_c3")
ALL_CASES = TRANSPORT_CASES + ("acoustic_wave", "adv_diff", "burgers")


class CflError(ValueError):
    """Requested resolution violates the stability limit of the scheme."""


class FomDivergenceError(RuntimeError):
    """Non-finite state produced during a full-order solve."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class ParamVector:
    """Point in the parameter domain of one benchmark case."""

    values: np.ndarray
    case_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=float)))


def make_param(values, case_id=""):
    return ParamVector(np.atleast_1d(np.asarray(values, dtype=float)), case_id)


@dataclass(frozen=True)
class AffineModel:
    """Semi-discrete full-order model with affine parameter dependence.

    ``operators``/``coeffs`` hold the affine terms; ``nonlinear_rhs`` is set
    only for the Burgers case (the affine part is then empty). ``scheme_data``
    carries scheme-internal matrices (e.g. the Lax-Wendroff stabilizer) and
    is never part of the public contract.
    """

    case_id: str
    n_dof: int
    operators: tuple
    coeffs: tuple
    forcing: np.ndarray
    initial_condition: object
    dt: float
    n_steps: int
    time_scheme: str
    boundary: str
    param_box: np.ndarray
    nonlinear_rhs: object = None
    scheme_data: dict = field(default_factory=dict)

    @property
    def n_affine(self):
        return len(self.operators)

    @property
    def final_time(self):
        return self.dt * self.n_steps


@dataclass(frozen=True)
class Trajectory:
    """Dense record of a full-order solve: column j is the state at time j*dt."""

    states: np.ndarray
    param: ParamVector

    @property
    def n_steps(self):
        return self.states.shape[1] - 1


def validate_param(model, mu):
    vals = np.atleast_1d(np.asarray(mu.values, dtype=float))
    box = model.param_box
    if vals.shape[0] != box.shape[0]:
        raise ValueError(
            f"parameter has {vals.shape[0]} coordinates, case {model.case_id} expects {box.shape[0]}"
        )
    eps = 1e-12
    for k, v in enumerate(vals):
        lo, hi = box[k]
        if not (lo - eps <= v <= hi + eps):
            raise ValueError(
                f"parameter coordinate {k} = {v} outside [{lo}, {hi}] for case {model.case_id}"
            )
    return vals


def initial_state(model, mu):
    """Initial condition u^0(mu), validated against the case's parameter box."""
    validate_param(model, mu)
    return model.initial_condition(mu)


def apply_rhs(model, mu, u):
    """Right-hand side of the semi-discrete system at state ``u``."""
    u = np.asarray(u)
    if u.shape[0] != model.n_dof:
        raise ValueError(f"state has {u.shape[0]} entries, model has {model.n_dof}")
    if model.nonlinear_rhs is not None:
        out = model.nonlinear_rhs(u)
    else:
        out = np.zeros_like(u, dtype=float)
        for op, coeff in zip(model.operators, model.coeffs):
            out += coeff(mu) * (op @ u)
    if u.ndim == 1:
        return out + model.forcing
    return out + model.forcing[:, None]


def _affine_matrix(model, mu):
    """Combined sparse operator sum_i alpha_i(mu) A_i."""
    acc = None
    for op, coeff in zip(model.operators, model.coeffs):
        term = coeff(mu) * op
        acc = term if acc is None else acc + term
    if acc is None:
        acc = sp.csr_matrix((model.n_dof, model.n_dof))
    return acc.tocsr()


def _check_finite(u, step):
    if not np.all(np.isfinite(u)):
        raise FomDivergenceError(f"non-finite state at step {step}", step=step)


def _solve_lax_wendroff(model, mu, states):
    a1 = model.coeffs[0](mu)
    stab = model.scheme_data["lw_stab"]
    dt = model.dt
    m_step = (
        sp.identity(model.n_dof, format="csr")
        + (dt * a1) * model.operators[0]
        + (0.5 * dt * dt * a1 * a1) * stab
    ).tocsr()
    u = states[:, 0]
    for j in range(1, model.n_steps + 1):
        u = m_step @ u
        _check_finite(u, j)
        states[:, j] = u


def _solve_rk4(model, mu, states):
    dt = model.dt
    f = model.forcing
    if model.nonlinear_rhs is not None:
        nl = model.nonlinear_rhs
        rhs = lambda u: nl(u) + f
    else:
        lin = _affine_matrix(model, mu)
        rhs = lambda u: lin @ u + f
    u = states[:, 0].copy()
    for j in range(1, model.n_steps + 1):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(u, j)
        states[:, j] = u


def _implicit_solver(model, mu):
    """Pre-factorized (I - dt*alpha_last*A_last) solve, cached per coefficient value."""
    idx = model.scheme_data.get("implicit_index", model.n_affine - 1)
    alpha = model.coeffs[idx](mu)
    cache = model.scheme_data.setdefault("_implicit_cache", {})
    if cache.get("key") != alpha:
        mat = sp.identity(model.n_dof, format="csc") - (model.dt * alpha) * model.operators[idx].tocsc()
        cache["key"] = alpha
        cache["solver"] = spla.splu(mat.tocsc())
    return cache["solver"], idx


def _solve_semi_implicit(model, mu, states):
    solver, idx = _implicit_solver(model, mu)
    dt = model.dt
    explicit = None
    for i, (op, coeff) in enumerate(zip(model.operators, model.coeffs)):
        if i == idx:
            continue
        term = coeff(mu) * op
        explicit = term if explicit is None else explicit + term
    m_exp = (sp.identity(model.n_dof, format="csr") + dt * explicit.tocsr()).tocsr()
    f = model.forcing
    u = states[:, 0]
    for j in range(1, model.n_steps + 1):
        u = solver.solve(m_exp @ u + dt * f)
        _check_finite(u, j)
        states[:, j] = u


def _solve_explicit_euler(model, mu, states):
    dt = model.dt
    f = model.forcing
    if model.nonlinear_rhs is not None:
        nl = model.nonlinear_rhs
        rhs = lambda u: nl(u) + f
    else:
        lin = _affine_matrix(model, mu)
        rhs = lambda u: lin @ u + f
    u = states[:, 0].copy()
    for j in range(1, model.n_steps + 1):
        u = u + dt * rhs(u)
        _check_finite(u, j)
        states[:, j] = u


_STEPPERS = {
    LAX_WENDROFF: _solve_lax_wendroff,
    RK4: _solve_rk4,
    SEMI_IMPLICIT: _solve_semi_implicit,
    EXPLICIT_EULER: _solve_explicit_euler,
}


def solve_fom(model, mu):
    """Integrate the full-order model over all N_T steps for one parameter."""
    u0 = initial_state(model, mu)
    states = np.empty((model.n_dof, model.n_steps + 1))
    states[:, 0] = u0
    _STEPPERS[model.time_scheme](model, mu, states)
    return Trajectory(states=states, param=mu)


# ---------------------------------------------------------------------------
# discrete operators


def _periodic_first_diff(n, dx):
    """Central first-derivative matrix on a periodic grid."""
    e = np.ones(n)
    d = sp.diags([e, -e], [1, -1], shape=(n, n), format="lil")
    d[0, n - 1] = -1.0
    d[n - 1, 0] = 1.0
    return (d / (2.0 * dx)).tocsr()


def _periodic_second_diff(n, dx):
    """Three-point second-derivative matrix on a periodic grid."""
    e = np.ones(n)
    d = sp.diags([e, -2.0 * e, e], [1, 0, -1], shape=(n, n), format="lil")
    d[0, n - 1] = 1.0
    d[n - 1, 0] = 1.0
    return (d / (dx * dx)).tocsr()


# ---------------------------------------------------------------------------
# benchmark builders


def _resolve_overrides(n_default, nt_default, overrides):
    overrides = dict(overrides or {})
    n = int(overrides.pop("N", n_default))
    nt = int(overrides.pop("N_T", nt_default))
    if overrides:
        raise ValueError(f"unknown override keys: {sorted(overrides)}")
    return n, nt


def _build_transport(case, overrides):
    n, nt = _resolve_overrides(2000, 4000, overrides)
    t_final = 0.1  # one full period of the c=10 pulse across the unit domain
    dx = 1.0 / n
    dt = t_final / nt
    x = np.arange(n) * dx

    c_max = 10.0
    cfl = c_max * dt / dx
    if cfl > 1.0 + 1e-12:
        raise CflError(
            f"{case}: CFL = c*dt/dx = {cfl:.4g} exceeds the Lax-Wendroff limit 1.0 "
            f"(c={c_max}, dt={dt:.4g}, dx={dx:.4g})"
        )

    a1 = -_periodic_first_diff(n, dx)
    stab = _periodic_second_diff(n, dx)

    if case == "transport_c1":
        box = np.array([[0.05, 0.25]])
        sigma = 0.01

        def ic(mu):
            x_star = mu.values[0]
            d = x - x_star
            d -= np.round(d)  # periodic distance
            return np.exp(-(d * d) / (2.0 * sigma * sigma)) / (np.sqrt(2.0 * np.pi) * sigma)

        coeff = (lambda mu: 10.0,)
    elif case == "transport_c2":
        box = np.array([[0.01, 0.1]])
        x_star = 0.5

        def ic(mu):
            sig = mu.values[0]
            d = x - x_star
            d -= np.round(d)
            return np.exp(-(d * d) / (2.0 * sig * sig)) / (np.sqrt(2.0 * np.pi) * sig)

        coeff = (lambda mu: 10.0,)
    else:  # transport_c3
        box = np.array([[1.0, 10.0]])
        x_star, sigma = 0.5, 0.01

        def ic(mu):
            d = x - x_star
            d -= np.round(d)
            return np.exp(-(d * d) / (2.0 * sigma * sigma)) / (np.sqrt(2.0 * np.pi) * sigma)

        coeff = (lambda mu: mu.values[0],)

    return AffineModel(
        case_id=case,
        n_dof=n,
        operators=(a1,),
        coeffs=coeff,
        forcing=np.zeros(n),
        initial_condition=ic,
        dt=dt,
        n_steps=nt,
        time_scheme=LAX_WENDROFF,
        boundary="periodic",
        param_box=box,
        scheme_data={"lw_stab": stab, "x": x, "dx": dx},
    )


def _build_acoustic(overrides):
    n_side, nt = _resolve_overrides(500, 1200, overrides)
    t_final = 6.0
    dt = t_final / nt
    length = 8.0
    dx = length / n_side
    coords = -4.0 + np.arange(n_side) * dx

    # RK4 covers |z| <= 2*sqrt(2) on the imaginary axis for the central scheme
    cfl = dt * np.sqrt(2.0) / dx
    if cfl > 2.8:
        raise CflError(
            f"acoustic_wave: dt*sqrt(2)/dx = {cfl:.4g} exceeds the RK4 stability limit 2.8 "
            f"(dt={dt:.4g}, dx={dx:.4g})"
        )

    d1 = _periodic_first_diff(n_side, dx)
    eye = sp.identity(n_side, format="csr")
    dx_op = sp.kron(d1, eye, format="csr")  # d/dx1 on C-ordered (x1, x2) fields
    dy_op = sp.kron(eye, d1, format="csr")

    n_cells = n_side * n_side
    zero = sp.csr_matrix((n_cells, n_cells))
    a = sp.bmat(
        [
            [zero, -dx_op, -dy_op],
            [-dx_op, zero, zero],
            [-dy_op, zero, zero],
        ],
        format="csr",
    )

    x1, x2 = np.meshgrid(coords, coords, indexing="ij")
    r2 = (x1 - 2.0) ** 2 + (x2 - 2.0) ** 2

    def ic(mu):
        sigma = mu.values[0]
        rho = np.exp(-((sigma + 6.0) ** 2) * r2).ravel()
        return np.concatenate([rho, np.zeros(2 * n_cells)])

    return AffineModel(
        case_id="acoustic_wave",
        n_dof=3 * n_cells,
        operators=(a,),
        coeffs=(lambda mu: 1.0,),
        forcing=np.zeros(3 * n_cells),
        initial_condition=ic,
        dt=dt,
        n_steps=nt,
        time_scheme=RK4,
        boundary="periodic",
        param_box=np.array([[0.0, 1.0]]),
        scheme_data={"n_side": n_side, "dx": dx, "coords": coords},
    )


def _advdiff_operators(nx, ny, dx, dy):
    """Upwind flux-divergence and Dirichlet Laplacian operators on the cell grid.

    Cell (ix, iy) maps to index ix*ny + iy. Horizontal velocity (1-x2^2)/5 is
    nonnegative, vertical velocity -(4-x1^2)/2 is nonpositive, so the upwind
    directions are fixed over the whole domain.
    """
    n = nx * ny
    xc = (np.arange(nx) + 0.5) * dx
    yc = (np.arange(ny) + 0.5) * dy

    def idx(ix, iy):
        return ix * ny + iy

    # horizontal advection: flux v1(y) * u through vertical faces, upwind = left cell
    a1 = sp.lil_matrix((n, n))
    v1 = (1.0 - yc**2) / 5.0
    for ix in range(nx):
        for iy in range(ny):
            k = idx(ix, iy)
            a1[k, k] -= v1[iy] / dx  # outflow through right face
            if ix > 0:
                a1[k, idx(ix - 1, iy)] += v1[iy] / dx  # inflow through left face
            # left boundary face carries homogeneous Dirichlet data: no term

    # vertical advection: flux v2(x) * u through horizontal faces, v2 < 0, upwind = upper cell
    a2 = sp.lil_matrix((n, n))
    v2 = -(4.0 - xc**2) / 2.0
    for ix in range(nx):
        for iy in range(ny):
            k = idx(ix, iy)
            a2[k, k] += v2[ix] / dy  # outflow through bottom face (v2 negative)
            if iy < ny - 1:
                a2[k, idx(ix, iy + 1)] -= v2[ix] / dy  # inflow through top face
            # top boundary face: inflow value is homogeneous Dirichlet -> no term

    # diffusion: 5-point Laplacian, ghost cells from Dirichlet edge values
    a3 = sp.lil_matrix((n, n))
    for ix in range(nx):
        for iy in range(ny):
            k = idx(ix, iy)
            if ix > 0:
                a3[k, idx(ix - 1, iy)] += 1.0 / dx**2
                a3[k, k] -= 1.0 / dx**2
            else:
                a3[k, k] -= 3.0 / dx**2  # ghost = 2*g - u with g = 0
            if ix < nx - 1:
                a3[k, idx(ix + 1, iy)] += 1.0 / dx**2
                a3[k, k] -= 1.0 / dx**2
            else:
                a3[k, k] -= 3.0 / dx**2
            if iy > 0:
                a3[k, idx(ix, iy - 1)] += 1.0 / dy**2
                a3[k, k] -= 1.0 / dy**2
            else:
                a3[k, k] -= 3.0 / dy**2  # bottom edge: inhomogeneous part goes to the forcing column
            if iy < ny - 1:
                a3[k, idx(ix, iy + 1)] += 1.0 / dy**2
                a3[k, k] -= 1.0 / dy**2
            else:
                a3[k, k] -= 3.0 / dy**2

    # diffusive contribution of the bottom-edge profile g(x1, t) = w(t)*phi(x1)
    g_col = np.zeros(n)
    phi = np.where(np.abs(xc - 0.5) <= 0.5, np.cos(np.pi * (xc - 0.5)) ** 2, 0.0)
    for ix in range(nx):
        g_col[idx(ix, 0)] = 2.0 * phi[ix] / dy**2

    return a1.tocsr(), a2.tocsr(), a3.tocsr(), g_col, xc, yc


def _build_advdiff(overrides):
    nx, nt = _resolve_overrides(64, 256, overrides)
    ny = nx // 2
    t_final = 1.0
    dt = t_final / nt
    dx = 2.0 / nx
    dy = 1.0 / ny

    # explicit upwind advection stability at the worst-case velocities
    cfl = (0.2 / dx + 2.0 / dy) * dt
    if cfl > 1.0 + 1e-12:
        raise CflError(
            f"adv_diff: advective CFL = {cfl:.4g} exceeds the explicit upwind limit 1.0 "
            f"(dt={dt:.4g}, dx={dx:.4g}, dy={dy:.4g})"
        )

    a1_u, a2_u, a3_u, g_col, xc, yc = _advdiff_operators(nx, ny, dx, dy)
    n_cells = nx * ny
    n = n_cells + 1  # trailing dof w(t) = exp(-2t) carries the boundary-data decay

    def pad(op, w_diag=0.0, last_col=None):
        out = sp.lil_matrix((n, n))
        out[:n_cells, :n_cells] = op
        if last_col is not None:
            out[:n_cells, n_cells] = last_col.reshape(-1, 1)
        out[n_cells, n_cells] = w_diag
        return out.tocsr()

    a1 = pad(a1_u)
    a2 = pad(a2_u, w_diag=-2.0)  # dw/dt = -2 w rides on the unit-coefficient operator
    a3 = pad(a3_u, last_col=g_col)

    def ic(mu):
        u0 = np.zeros(n)
        u0[n_cells] = 1.0
        return u0

    return AffineModel(
        case_id="adv_diff",
        n_dof=n,
        operators=(a1, a2, a3),
        coeffs=(
            lambda mu: mu.values[0],
            lambda mu: 1.0,
            lambda mu: 0.03 * mu.values[1],
        ),
        forcing=np.zeros(n),
        initial_condition=ic,
        dt=dt,
        n_steps=nt,
        time_scheme=SEMI_IMPLICIT,
        boundary="dirichlet; inflow profile exp(-2t)*cos^2(pi*(x1-1/2)) on the bottom edge, 0 elsewhere",
        param_box=np.array([[0.0, 1.0], [0.0, 1.0]]),
        scheme_data={
            "implicit_index": 2,
            "nx": nx,
            "ny": ny,
            "dx": dx,
            "dy": dy,
            "xc": xc,
            "yc": yc,
        },
    )


def _build_burgers(overrides):
    n, nt = _resolve_overrides(2000, 4000, overrides)
    t_final = 1.0
    dt = t_final / nt
    dx = 2.0 / n
    x = -1.0 + np.arange(n) * dx
    nu = 8.0e-4

    u_max = 1.3  # peak of the initial profile; the dynamics stay near this range
    cfl = u_max * dt / dx
    if cfl > 1.0 + 1e-12:
        raise CflError(
            f"burgers: advective CFL = {cfl:.4g} exceeds 1.0 (dt={dt:.4g}, dx={dx:.4g})"
        )

    d1 = _periodic_first_diff(n, dx)
    d2 = _periodic_second_diff(n, dx)

    def rhs(u):
        return -(d1 @ (0.5 * u * u)) + nu * (d2 @ u)

    def ic(mu):
        sigma = mu.values[0]
        return 0.3 * np.exp(-(sigma**2) * (x + 0.5) ** 2) + 1.0

    return AffineModel(
        case_id="burgers",
        n_dof=n,
        operators=(),
        coeffs=(),
        forcing=np.zeros(n),
        initial_condition=ic,
        dt=dt,
        n_steps=nt,
        time_scheme=RK4,
        boundary="periodic",
        param_box=np.array([[10.0, 15.0]]),
        nonlinear_rhs=rhs,
        scheme_data={"x": x, "dx": dx, "nu": nu, "d1": d1, "d2": d2},
    )


def build_benchmark(case, overrides=None):
    """Construct one of the benchmark models, optionally at reduced resolution.

    Overrides accept ``N`` (grid points; per side for acoustic, nx for
    adv_diff) and ``N_T``; scaling both together preserves the CFL number.
    """
    if case in TRANSPORT_CASES:
        return _build_transport(case, overrides)
    if case == "acoustic_wave":
        return _build_acoustic(overrides)
    if case == "adv_diff":
        return _build_advdiff(overrides)
    if case == "burgers":
        return _build_burgers(overrides)
    raise ValueError(f"unknown case id: {case!r} (expected one of {', '.join(ALL_CASES)})")


def desk_overrides(case):
    """Sanctioned reduced resolutions for fast runs; CFL matches the defaults."""
    if case in TRANSPORT_CASES or case == "burgers":
        return {"N": 500, "N_T": 1000}
    if case == "acoustic_wave":
        return {"N": 100, "N_T": 240}
    return {}
