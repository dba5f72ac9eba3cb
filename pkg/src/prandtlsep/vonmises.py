"""Marching solver for the streamfunction form of the wall equation.

With phi = int_0^y u and w = u**2 the problem becomes the degenerate
parabolic equation

    w_x - sqrt(w) w_phiphi = -2,   w(x, 0) = 0,  w -> u_E(x)**2 far out,

with u_E(x) = sqrt(2 (x0 - x)).  The tangential coordinate x acts as time.
Steps are implicit in the diffusion with the degenerate coefficient
sqrt(w) frozen at the previous station (optionally iterated to
convergence); each accepted step must preserve monotonicity in phi, else
it is retried with half the step.

The wall shear lam(x) = u_y(x, 0) is the quantity everything else watches.
Reading it straight off the wall slope of w requires resolving phi well
below lam**3, which becomes hopeless near collapse; instead we use the
identity  w_phi = 2 lam + 2 y(phi) + 2 int_0^y (u_yy - 1), whose last term
is O(y**3) by the curvature bounds, and evaluate
lam ~ w_phi(phi_j)/2 - y(phi_j)  on a window y_j ~ lam**(1/3) where the
correction is negligible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidProfileError, InvalidStateError, StepFailureError
from .gridfields import Field, Grid, cumint, interpolate

_MONO_TOL_FACTOR = 1e-9


@dataclass(frozen=True)
class MarchConfig:
    dx_init: float = 1e-4
    dx_min: float = 1e-13
    cfl_safety: float = 0.9
    lambda_stop: float = 1e-3
    scheme: str = "bdf2"   # or "semi-implicit-frozen" / "implicit-newton"
    ds_rel: float = 0.008          # target step in s, relative: ds = ds_rel * s
    n_psi: int = 2305
    psi_power: float = 5.0
    source_scale: float = 1.0      # 1: adverse gradient; 0: flat outer flow
    snapshots_per_decade: float = 8.0
    max_steps: int = 200000

    def __post_init__(self):
        if not self.dx_min < self.dx_init:
            raise ValueError("dx_min must be below dx_init")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if self.lambda_stop <= 0.0:
            raise ValueError("lambda_stop must be positive")
        if self.scheme not in ("semi-implicit-frozen", "implicit-newton", "bdf2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class VMState:
    x: float
    psi_grid: Grid
    W: Field
    lam: float
    x0_pressure: float
    source_scale: float = 1.0

    def far_target(self, x: Optional[float] = None) -> float:
        x = self.x if x is None else x
        return 2.0 * (self.x0_pressure - self.source_scale * x)

    def validate(self, far_rtol: float = 1e-3) -> None:
        w = self.W.values
        if abs(w[0]) > 1e-12:
            raise InvalidStateError("w must vanish at the wall")
        dphi = np.diff(self.psi_grid.nodes)
        mono = np.min(np.diff(w) / dphi)
        if mono < -_MONO_TOL_FACTOR * max(1.0, np.max(w)):
            raise InvalidStateError("w must be increasing in phi")
        far = self.far_target()
        if abs(w[-1] - far) > far_rtol * far:
            raise InvalidStateError("far-field value out of tolerance")
        if self.lam <= 0.0:
            raise InvalidStateError("wall shear must be positive")


# ---------------------------------------------------------------------------
# Wall-shear extraction
# ---------------------------------------------------------------------------


_GAUSS3_T = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
_GAUSS3_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _normal_coordinate(phi: np.ndarray, w: np.ndarray, upto: int,
                       n_linear: int = 6) -> np.ndarray:
    """y(phi_i) = int_0^phi_i dphi/sqrt(w), accurate through the wall layer.

    The first cells use the closed form for linear w (exact at the w = 0
    wall, where w ~ 2 lam phi); the rest use 3-point Gauss on the local
    cubic interpolant of w, which stays accurate across the crossover to
    the outer w ~ phi**(4/3) behaviour where cell-to-scale ratios are
    largest.
    """
    n = upto + 1
    phi_c = phi[:n]
    w_c = np.maximum(w[:n], 0.0)
    sq = np.sqrt(w_c)
    seg = 2.0 * np.diff(phi_c) / np.maximum(sq[1:] + sq[:-1], 1e-300)
    # the cubic interpolant needs cells clear of the solver's noise floor,
    # where w values are scattered and the interpolant can dip negative
    floor = 1e-10 * float(np.max(w_c))
    above = np.nonzero(w_c > floor)[0]
    k_trust = int(above[0]) + 2 if len(above) else n - 1
    k0 = min(max(n_linear, k_trust), n - 1)
    if k0 < n - 1:
        a = phi_c[k0:-1]
        h = phi_c[k0 + 1 :] - a
        pts = a[:, None] + h[:, None] * _GAUSS3_T[None, :]
        lo = np.clip(np.arange(k0, n - 1) - 1, 0, n - 4)
        w_pts = np.zeros_like(pts)
        for j in range(4):
            lj = np.ones_like(pts)
            xj = phi_c[lo + j]
            for m in range(4):
                if m == j:
                    continue
                xm = phi_c[lo + m]
                lj *= (pts - xm[:, None]) / (xj - xm)[:, None]
            w_pts += w_c[lo + j][:, None] * lj
        w_pts = np.maximum(w_pts, 1e-300)
        gauss = h * np.sum(_GAUSS3_W[None, :] / np.sqrt(w_pts), axis=1)
        # keep the robust linear rule wherever the interpolant breaks down
        ok = np.isfinite(gauss) & (gauss <= 4.0 * seg[k0:])
        seg[k0:] = np.where(ok, gauss, seg[k0:])
    return np.concatenate([[0.0], np.cumsum(seg)])


def _wall_restore(phi: np.ndarray, w: np.ndarray, max_cells: int = 16) -> np.ndarray:
    """Replace a leading block of noise-floor cells by the linear wall law.

    The deepest cells of the clustered grid sit below the solver's absolute
    roundoff floor; their physical values follow w ~ (w_k/phi_k) phi.
    """
    nonpos = np.nonzero(w[1 : max_cells + 1] <= 0.0)[0]
    if len(nonpos) == 0:
        return w
    kp = int(nonpos[-1]) + 2
    out = w.copy()
    out[1:kp] = w[kp] * phi[1:kp] / phi[kp]
    return out


def wall_shear(state_or_grid, w_values: Optional[np.ndarray] = None,
               lam_guess: Optional[float] = None) -> float:
    """Corrected wall-slope estimate of lam from a streamfunction profile."""
    if w_values is None:
        grid, w, guess = state_or_grid.psi_grid, state_or_grid.W.values, state_or_grid.lam
    else:
        grid, w, guess = state_or_grid, w_values, lam_guess
    phi = grid.nodes
    w = _wall_restore(phi, w)
    guess = float(guess if guess else 0.05)
    y = _normal_coordinate(phi, w, len(phi) - 1)

    def estimate(g: float):
        y_cap = 0.25 * g ** (1.0 / 3.0)
        window = (y >= 0.25 * y_cap) & (y <= y_cap)
        idx = np.nonzero(window)[0]
        idx = idx[(idx > 0) & (idx < len(phi) - 1)]
        if len(idx) < 4:
            return None
        hm = phi[idx] - phi[idx - 1]
        hp = phi[idx + 1] - phi[idx]
        w_phi = (w[idx + 1] * hm**2 - w[idx - 1] * hp**2
                 + w[idx] * (hp**2 - hm**2)) / (hm * hp * (hm + hp))
        samples = 0.5 * w_phi - y[idx]
        # the curvature-defect bias grows like y**3: extrapolate it away
        cols = np.stack([np.ones_like(idx, dtype=float), y[idx] ** 3], axis=1)
        sol, *_ = np.linalg.lstsq(cols, samples, rcond=None)
        est_ = float(sol[0])
        if not 0.0 < est_ < 20.0 * g:
            est_ = float(np.median(samples))
        return est_

    est = estimate(guess)
    if est is None:
        raise InvalidStateError("wall window under-resolved in phi")
    if est > 0.0 and abs(est - guess) > 0.05 * guess:
        # re-center the window on the new scale; keep the first estimate if
        # the refined window cannot be populated
        refined = estimate(est)
        if refined is not None and refined > 0.0:
            est = refined
    return est


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def default_psi_grid(phi_max: float, n: int = 1153, power: float = 5.0) -> Grid:
    return Grid.power_clustered(n, phi_max, power)


def to_von_mises(u: Field, x0_pressure: float = 1.0, x: float = 0.0,
                 n_psi: int = 1153, psi_power: float = 5.0,
                 source_scale: float = 1.0) -> VMState:
    """Map a physical profile u(y) to the streamfunction state."""
    if abs(u.values[0]) > 1e-12:
        raise InvalidProfileError("u must vanish at the wall")
    if np.any(np.diff(u.values) < 0.0):
        raise InvalidProfileError("u must be non-decreasing in y")
    phi = cumint(u)
    w_of_phi = Field(Grid(phi.values, "vm-image"), u.values**2) \
        if len(np.unique(phi.values)) == len(phi.values) else None
    if w_of_phi is None:
        raise InvalidProfileError("streamfunction is degenerate (u vanishes inside)")
    grid = default_psi_grid(float(phi.values[-1]), n_psi, psi_power)
    w = interpolate(w_of_phi, grid.nodes)
    w[0] = 0.0
    w = np.maximum.accumulate(np.maximum(w, 0.0))  # clip cubic overshoots
    y = u.grid.nodes
    near = (y > 0) & (y <= 0.02 * u.grid.span)
    lam0 = float(np.polyfit(y[near], u.values[near] - 0.5 * y[near] ** 2, 1)[0]) \
        if np.count_nonzero(near) >= 3 else float(u.values[1] / y[1])
    state = VMState(x=x, psi_grid=grid, W=Field(grid, w), lam=lam0,
                    x0_pressure=x0_pressure, source_scale=source_scale)
    lam = wall_shear(state)
    return replace(state, lam=lam)


def from_von_mises(state: VMState) -> Field:
    """Invert the streamfunction map: u(y) = sqrt(w) on y = int dphi/sqrt(w)."""
    phi = state.psi_grid.nodes
    w = _wall_restore(phi, state.W.values)
    if np.any(w[1:] <= 0.0):
        raise InvalidStateError("w must be positive away from the wall")
    y = _normal_coordinate(phi, w, len(phi) - 1)
    return Field(Grid(y, "vm-inverse"), np.sqrt(np.maximum(w, 0.0)))


def compute_F(state: VMState) -> Field:
    """Diffusion balance F = sqrt(w) w_phiphi - 2 on the phi grid."""
    w = state.W.values
    phi = state.psi_grid.nodes
    f = np.empty_like(w)
    hm = phi[1:-1] - phi[:-2]
    hp = phi[2:] - phi[1:-1]
    d2 = 2.0 * (w[:-2] * hp - w[1:-1] * (hm + hp) + w[2:] * hm) / (hm * hp * (hm + hp))
    f[1:-1] = np.sqrt(np.maximum(w[1:-1], 0.0)) * d2 - 2.0
    f[0] = 0.0            # exact wall limit: sqrt(w) w_phiphi -> 2 u_yy(0) = 2
    f[-1] = f[-2]
    return Field(state.psi_grid, f)


def f_roundoff_floor(state: VMState) -> np.ndarray:
    """Roundoff bound on the F diagnostic per node.

    The marching solve determines w to absolute accuracy ~ eps * max(w);
    propagated through the second difference this floor blows up on the
    first cells of the clustered grid, where F is therefore undefined in
    float arithmetic.  Audits restrict to nodes where this bound is small.
    """
    w = state.W.values
    phi = state.psi_grid.nodes
    eps_w = 8.0 * np.finfo(float).eps * float(np.max(w))
    out = np.full_like(w, np.inf)
    hm = phi[1:-1] - phi[:-2]
    hp = phi[2:] - phi[1:-1]
    out[1:-1] = np.sqrt(np.maximum(w[1:-1], 0.0)) * 4.0 * eps_w / (hm * hp)
    out[0] = 0.0
    return out


def trusted_F_mask(state: VMState, floor: float = 5e-4) -> np.ndarray:
    """Interior nodes where the F diagnostic is numerically determined."""
    mask = f_roundoff_floor(state) <= floor
    mask[0] = False
    mask[-1] = False
    return mask


# ---------------------------------------------------------------------------
# Marching
# ---------------------------------------------------------------------------


def _d2_weights(phi: np.ndarray):
    hm = phi[1:-1] - phi[:-2]
    hp = phi[2:] - phi[1:-1]
    a = 2.0 / (hm * (hm + hp))      # weight of w_{i-1}
    c = 2.0 / (hp * (hm + hp))      # weight of w_{i+1}
    return a, -(a + c), c


def _resolvent_solve(phi: np.ndarray, rhs: np.ndarray, coeff: np.ndarray,
                     tau: float, far_value: float) -> np.ndarray:
    """Solve (I - tau * coeff * D2) w = rhs with Dirichlet ends."""
    n = len(phi)
    a, b, c = _d2_weights(phi)
    r = tau * coeff[1:-1]
    ab = np.zeros((3, n))
    ab[1, 0] = 1.0
    ab[1, -1] = 1.0
    ab[1, 1:-1] = 1.0 - r * b
    ab[0, 2:] = -r * c              # superdiagonal (column-indexed)
    ab[2, :-2] = -r * a             # subdiagonal
    rhs = rhs.copy()
    rhs[0] = 0.0
    rhs[-1] = far_value
    out = solve_banded((1, 1), ab, rhs)
    out[0] = 0.0          # pivoting leaves eps-level residue on Dirichlet rows
    out[-1] = far_value
    return out


def _implicit_solve(phi: np.ndarray, w_old: np.ndarray, coeff: np.ndarray,
                    dx: float, far_value: float, source: float) -> np.ndarray:
    """Backward-Euler step of w_x = coeff * D2 w - 2 source."""
    return _resolvent_solve(phi, w_old - 2.0 * dx * source, coeff, dx, far_value)


def _bdf2_solve(phi: np.ndarray, w_n: np.ndarray, w_prev: np.ndarray,
                h_prev: float, h: float, far_value: float, source: float,
                scale: float, max_picard: int = 6) -> np.ndarray:
    """Variable-step BDF2 step with Picard-iterated degenerate coefficient.

    Second order in the step, L-stable, and structurally monotone (M-matrix
    resolvent); removes the O(dx) quasi-steady bias that a backward-Euler
    or frozen-coefficient step leaves in the stiff wall zone.
    """
    om = h / h_prev
    alpha = (1.0 + 2.0 * om) / (1.0 + om)
    beta = (1.0 + om)
    gamma = om * om / (1.0 + om)
    rhs = (beta * w_n - gamma * w_prev - 2.0 * h * source) / alpha
    tau = h / alpha
    w_new = w_n
    for _ in range(max_picard):
        # restore the wall law before forming the degenerate coefficient:
        # a clamped noise-floor cell must not decouple its row
        coeff = np.sqrt(_wall_restore(phi, np.maximum(w_new, 0.0)))
        w_next = _resolvent_solve(phi, rhs, coeff, tau, far_value)
        delta = float(np.max(np.abs(w_next - w_new)))
        w_new = w_next
        if delta <= 1e-12 * scale:
            break
    return w_new


def march_step(state: VMState, dx: float, cfg: MarchConfig,
               prev: tuple | None = None) -> VMState:
    """Advance one station; retries with halved dx on monotonicity loss.

    ``prev`` (w_previous, h_previous) enables the two-step scheme; without
    it the step falls back to the iterated backward-Euler start-up.
    """
    phi = state.psi_grid.nodes
    w_old = state.W.values
    scale = float(np.max(w_old))
    while True:
        far = state.far_target(state.x + dx)
        if far <= 0.0:
            raise StepFailureError("pressure horizon reached before separation")
        if cfg.scheme == "bdf2" and prev is not None:
            w_new = _bdf2_solve(phi, w_old, prev[0], prev[1], dx, far,
                                cfg.source_scale, scale)
        else:
            coeff = np.sqrt(np.maximum(w_old, 0.0))
            w_new = _implicit_solve(phi, w_old, coeff, dx, far, cfg.source_scale)
            if cfg.scheme in ("implicit-newton", "bdf2"):
                for _ in range(12):
                    coeff = np.sqrt(_wall_restore(phi, np.maximum(w_new, 0.0)))
                    w_next = _implicit_solve(phi, w_old, coeff, dx, far,
                                             cfg.source_scale)
                    delta = float(np.max(np.abs(w_next - w_new)))
                    w_new = w_next
                    if delta <= 1e-12 * scale:
                        break
        # the first interior cell sits at the solver's absolute noise floor;
        # clamp it to the physical w >= 0 and judge monotonicity with a
        # roundoff-relative tolerance
        w_new = np.maximum(w_new, 0.0)
        mono_ok = np.min(np.diff(w_new)) >= -_MONO_TOL_FACTOR * scale
        nonpos = np.nonzero(w_new[1:] <= 0.0)[0]
        floor_ok = len(nonpos) == 0 or (nonpos[-1] < 12 and len(nonpos) == nonpos[-1] + 1)
        if mono_ok and floor_ok:
            break
        dx *= 0.5
        if dx < cfg.dx_min:
            raise StepFailureError("step size underflow (separation reached?)")
    state_new = VMState(x=state.x + dx, psi_grid=state.psi_grid,
                        W=Field(state.psi_grid, w_new), lam=state.lam,
                        x0_pressure=state.x0_pressure,
                        source_scale=cfg.source_scale)
    lam = wall_shear(state_new)
    return replace(state_new, lam=lam)


@dataclass(frozen=True)
class Snapshot:
    index: int
    x: float
    s: float
    lam: float
    state: VMState
    pair_state: Optional[VMState] = None   # state one accepted step later
    pair_s: float = 0.0


@dataclass
class Trajectory:
    x: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    dx: np.ndarray
    F_max: np.ndarray
    mono_min: np.ndarray
    snapshots: List[Snapshot]
    s0: float
    lambda0: float
    x0_pressure: float
    config: MarchConfig
    completed: bool
    failure: str = ""

    @property
    def x_end(self) -> float:
        return float(self.x[-1])


def solve_until_separation(data, cfg: MarchConfig) -> Trajectory:
    """March from inflow data until the wall shear hits lambda_stop.

    ``data`` is an InitialData (physical profile).  The tangential step
    follows dx = cfl * lam**4 * (ds_rel * s), mirroring the slow-variable
    clock, and the full streamfunction state is snapshotted on a uniform
    schedule in log(lam), together with the state one step later (used by
    the finite-difference commutator identity).
    """
    state = to_von_mises(data.u0, x0_pressure=data.x0_pressure,
                         n_psi=cfg.n_psi, psi_power=cfg.psi_power,
                         source_scale=cfg.source_scale)
    state = replace(state, lam=float(data.lambda0))
    s = data.s0
    xs, lams, ss, dxs, fmaxs, monos = [], [], [], [], [], []
    snapshots: List[Snapshot] = []
    pending_pair: Optional[int] = None
    lam_next_snap = data.lambda0
    decade_step = 10.0 ** (-1.0 / cfg.snapshots_per_decade)
    completed, failure = False, ""

    def record(st: VMState, dx_val: float) -> None:
        F = compute_F(st).values
        mask = trusted_F_mask(st)
        xs.append(st.x)
        lams.append(st.lam)
        ss.append(s)
        dxs.append(dx_val)
        fmaxs.append(float(np.max(F[mask])) if mask.any() else np.nan)
        w = st.W.values
        monos.append(float(np.min(np.diff(w) / np.diff(st.psi_grid.nodes))))

    record(state, 0.0)
    snapshots.append(Snapshot(index=0, x=state.x, s=s, lam=state.lam, state=state))
    pending_pair = 0
    prev = None
    lam_next_snap = data.lambda0 * decade_step
    for step in range(cfg.max_steps):
        lam = state.lam
        if lam <= cfg.lambda_stop:
            completed = True
            break
        dx = min(cfg.dx_init, cfg.cfl_safety * lam**4 * cfg.ds_rel * s)
        dx = max(dx, cfg.dx_min * 10.0)
        try:
            new_state = march_step(state, dx, cfg, prev=prev)
        except (StepFailureError, InvalidStateError) as exc:
            failure = str(exc)
            break
        dx_actual = new_state.x - state.x
        if new_state.lam <= 0.0:
            failure = ("wall shear no longer resolvable on this grid "
                       "(separation reached before lambda_stop)")
            break
        prev = (state.W.values, dx_actual)
        s = s + dx_actual / lam**4
        state = new_state
        record(state, dx_actual)
        if pending_pair is not None:
            snapshots[pending_pair] = replace(
                snapshots[pending_pair], pair_state=state, pair_s=s
            )
            pending_pair = None
        if state.lam <= lam_next_snap and state.lam > cfg.lambda_stop:
            snapshots.append(Snapshot(index=len(snapshots), x=state.x, s=s,
                                      lam=state.lam, state=state))
            pending_pair = len(snapshots) - 1
            lam_next_snap = state.lam * decade_step
    else:
        failure = "max_steps exhausted"

    # drop a trailing snapshot that never received its pair
    if snapshots and snapshots[-1].pair_state is None:
        snapshots = snapshots[:-1]
    return Trajectory(
        x=np.array(xs), lam=np.array(lams), s=np.array(ss), dx=np.array(dxs),
        F_max=np.array(fmaxs), mono_min=np.array(monos),
        snapshots=snapshots, s0=data.s0, lambda0=data.lambda0,
        x0_pressure=data.x0_pressure, config=cfg,
        completed=completed, failure=failure,
    )
