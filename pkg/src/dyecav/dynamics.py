"""Coupled photon-dye rate equations and their steady-state solvers.

State variables are the per-mode photon occupations n_i and the excited
molecular fraction field f(r) on the transverse grid:

    dn_i/dt = -kappa n_i + (n_i+1) R_down_i rho G_i - n_i R_up_i rho (1-G_i)
    df/dt   = (1-f) [P + sum_i R_up_i |psi_i|^2 n_i]
              - f [Gamma + sum_i R_down_i |psi_i|^2 (n_i+1)]

with the gain G_i = integral |psi_i|^2 f.  The mode sums run over the full
basis.  Spontaneous emission (the +1) is kept everywhere; it seeds mode
selection without artificial noise.

Two steady-state solvers are provided:

``evolve_to_steady``
    An adaptive exponential (Lie-split) integrator: the f-field is
    advanced exactly for frozen occupations, then each occupation is
    advanced exactly for the frozen updated gain.  Step size is controlled
    by a scaled residual; once the residual is small the solve is finished
    by a damped Newton iteration on the occupations with f eliminated
    exactly.  Roots whose linearized photon rates are not all non-positive
    are rejected and escaped along their growing directions, so the solver
    lands on stable steady states only.

``solve_self_consistent``
    A damped fixed-point alternation: f is relaxed toward its stationary
    profile for the current occupations while the occupations step in log
    space toward their stationary values, finished by the same Newton
    polish.  Fails with an oscillation diagnostic instructing the caller
    to fall back to the integrator.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dye import DyeModel, RateTable, rates_for_basis
from .modes import ModeBasis, SpatialGrid
from .units import thz

__all__ = [
    "SystemParams",
    "SystemState",
    "SteadyState",
    "ConvergenceError",
    "OscillationDetected",
    "gain",
    "rhs",
    "analytic_occupation",
    "evolve_to_steady",
    "solve_self_consistent",
    "detect_selected",
]

# default selection detector settings: a mode counts as selected when it is
# macroscopically occupied AND its gain is clamped at the threshold level
N_SELECT = 1e3
CLAMP_TOL = 1e-2


class ConvergenceError(RuntimeError):
    """Steady-state solve did not converge; carries the residual history."""

    def __init__(self, message, residual_history=None, meta=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.meta = dict(meta or {})


class OscillationDetected(RuntimeError):
    """Fixed-point alternation oscillated; fall back to evolve_to_steady."""

    fallback = "evolve_to_steady"


@dataclass(eq=False)
class SystemParams:
    """Full experiment configuration for one steady-state problem.

    Exactly one of ``kappa`` (cavity loss, Hz) and ``xi`` (thermalization
    parameter) is given; the other is derived through
    xi = R_up_ground * rho / kappa.  ``pump`` and ``gamma`` are the pump
    and non-cavity decay rates per molecule in Hz.
    """

    basis: ModeBasis
    dye: DyeModel
    pump: float
    gamma: float = 0.2e9
    kappa: float = None
    xi: float = None
    cutoff: float = None
    rates: RateTable = None

    def __post_init__(self):
        if self.pump < 0:
            raise ValueError("pump must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.rates is None:
            if self.cutoff is None:
                raise ValueError("either rates or cutoff must be given")
            self.rates = rates_for_basis(self.dye, self.basis, self.cutoff)
        elif self.cutoff is None:
            self.cutoff = self.rates.cutoff
        if (self.kappa is None) == (self.xi is None):
            raise ValueError("exactly one of kappa and xi must be given")
        coupling = self.rates.r_up_ground * self.dye.density
        if self.kappa is None:
            if self.xi <= 0:
                raise ValueError("xi must be positive")
            self.kappa = coupling / self.xi
        else:
            # kappa = 0 (the lossless, fully thermalized limit) is allowed
            # for analytic evaluation; the steady-state solvers reject it
            if self.kappa < 0:
                raise ValueError("kappa must be non-negative")
            self.xi = coupling / self.kappa if self.kappa > 0 else math.inf

    def replace(self, **kwargs) -> "SystemParams":
        """Copy with selected fields changed (kappa/xi pairing re-derived)."""
        fields = dict(
            basis=self.basis,
            dye=self.dye,
            pump=self.pump,
            gamma=self.gamma,
            cutoff=self.cutoff,
            rates=self.rates,
        )
        if "xi" in kwargs and "kappa" not in kwargs:
            fields["xi"] = kwargs.pop("xi")
        elif "kappa" in kwargs:
            fields["kappa"] = kwargs.pop("kappa")
        else:
            fields["xi"] = self.xi
        if "cutoff" in kwargs or "rates" in kwargs:
            fields["cutoff"] = kwargs.pop("cutoff", None)
            fields["rates"] = kwargs.pop("rates", None)
        fields.update(kwargs)
        return SystemParams(**fields)


@dataclass(eq=False)
class SystemState:
    """Mode occupations and the excited-fraction field on the full grid."""

    n: np.ndarray  # (n_modes,)
    f: np.ndarray  # (N, N)

    def validate(self, basis: ModeBasis) -> None:
        if self.n.shape != (len(basis),):
            raise ValueError("occupation vector does not match the basis")
        npts = basis.grid.points_per_axis
        if self.f.shape != (npts, npts):
            raise ValueError("excited-fraction field does not match the grid")
        if np.any(self.n < 0):
            raise ValueError("occupations must be non-negative")
        if np.any(self.f < 0) or np.any(self.f > 1):
            raise ValueError("excited fraction must lie in [0, 1]")

    @staticmethod
    def dark(basis: ModeBasis) -> "SystemState":
        npts = basis.grid.points_per_axis
        return SystemState(n=np.zeros(len(basis)), f=np.zeros((npts, npts)))


@dataclass(eq=False)
class SteadyState:
    state: SystemState
    gains: np.ndarray
    residual: float
    selected: frozenset
    params: SystemParams
    meta: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        """Per-mode table: quantum numbers, energy, occupation, gain,
        clamp level, and the selection flag."""
        basis = self.params.basis
        gth = self.params.rates.threshold_gain(self.params.kappa)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["nu_x", "nu_y", "energy_THz", "n_i", "G_i", "G_i_th", "selected_flag"]
            )
            for i, m in enumerate(basis.modes):
                writer.writerow(
                    [
                        m.nu_x,
                        m.nu_y,
                        str(thz(m.transverse_energy)),
                        str(float(self.state.n[i])),
                        str(float(self.gains[i])),
                        str(float(gth[i])),
                        1 if i in self.selected else 0,
                    ]
                )

    def write_f_slice(self, path) -> None:
        """Excited fraction along the x-axis (row nearest y = 0)."""
        grid = self.params.basis.grid
        axis = grid.axis
        j = int(np.argmin(np.abs(axis)))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x_over_d", "f"])
            for x, val in zip(axis, self.state.f[:, j]):
                writer.writerow([str(float(x)), str(float(val))])


def gain(f: np.ndarray, mode_density: np.ndarray, grid: SpatialGrid) -> float:
    """Overlap of a mode density with the excited-fraction field."""
    if f.shape != mode_density.shape:
        raise ValueError("field and mode density are on different grids")
    return grid.quadrature(mode_density * f)


def rhs(state: SystemState, params: SystemParams):
    """Time derivatives (dn/dt, df/dt) of the coupled rate equations."""
    basis = params.basis
    state.validate(basis)
    rates = params.rates
    rho = params.dye.density
    dens = basis.density_matrix()  # (n_modes, N^2)
    w = basis.grid.weights
    f_flat = state.f.ravel()
    gains = dens @ (w * f_flat)
    n = state.n
    dn = (
        -params.kappa * n
        + (n + 1.0) * rates.r_down * rho * gains
        - n * rates.r_up * rho * (1.0 - gains)
    )
    pump_field = params.pump + (rates.r_up * n) @ dens
    decay_field = params.gamma + (rates.r_down * (n + 1.0)) @ dens
    df = (1.0 - f_flat) * pump_field - f_flat * decay_field
    return dn, df.reshape(state.f.shape)


def analytic_occupation(G: float, i: int, params: SystemParams) -> float:
    """Stationary occupation of mode i at a given gain.

    Inverts the single-mode balance
    n = [R_up(1-G)/(R_down G) - 1 + kappa/(R_down rho G)]^(-1); returns
    +inf (the divergence flag) when the bracket is non-positive, i.e. at or
    above the mode's gain threshold.
    """
    if not 0.0 < G <= 1.0:
        raise ValueError("gain must lie in (0, 1]")
    r_up = params.rates.r_up[i]
    r_down = params.rates.r_down[i]
    rho = params.dye.density
    bracket = (
        r_up * (1.0 - G) / (r_down * G) - 1.0 + params.kappa / (r_down * rho * G)
    )
    if bracket <= 0.0:
        return math.inf
    return 1.0 / bracket


# --------------------------------------------------------------------------
# internal solver machinery
#
# The grid axis is reflection symmetric and every mode density is even in x
# and y, so a state with a symmetric f-field can be evolved on one quadrant
# with multiplicity weights (4x fewer field nodes).  Asymmetric initial
# states fall back to the full grid transparently.
# --------------------------------------------------------------------------


class _Engine:
    def __init__(self, basis: ModeBasis, rates: RateTable, reduced: bool):
        grid = basis.grid
        axis = grid.axis
        npts = grid.points_per_axis
        if reduced:
            idx = np.where(axis <= 0.0)[0]
        else:
            idx = np.arange(npts)
        mult = np.ones(len(idx)) if not reduced else np.where(axis[idx] == 0.0, 1.0, 2.0)
        w1 = grid.axis_weights
        self.basis = basis
        self.rates = rates
        self.reduced = reduced
        self.idx = idx
        self.n_modes = len(basis)
        self.r_up = rates.r_up
        self.r_down = rates.r_down
        self.rho = rates.dye.density

        ux2 = basis._phi_x[:, idx] ** 2  # (max_quanta+1, nq1)
        uy2 = basis._phi_y[:, idx] ** 2
        nx = np.array([m.nu_x for m in basis.modes])
        ny = np.array([m.nu_y for m in basis.modes])
        # pointwise densities on the (reduced) node set
        self.D = np.einsum("mi,mj->mij", ux2[nx], uy2[ny]).reshape(self.n_modes, -1)
        wq1 = w1[idx] * mult
        self.w = np.outer(wq1, wq1).ravel()
        self.Dw = self.D * self.w  # rows integrate fields: G = Dw @ f

        if reduced:
            pos = np.full(npts, -1, dtype=int)
            pos[idx] = np.arange(len(idx))
            exp1 = np.where(pos >= 0, pos, pos[npts - 1 - np.arange(npts)])
            self._expand_ix = np.ix_(exp1, exp1)
        self.n_nodes = self.D.shape[1]

    def reduce_field(self, f_full: np.ndarray) -> np.ndarray:
        if not self.reduced:
            return f_full.ravel().copy()
        return f_full[np.ix_(self.idx, self.idx)].ravel().copy()

    def expand_field(self, f_flat: np.ndarray) -> np.ndarray:
        if not self.reduced:
            n = self.basis.grid.points_per_axis
            return f_flat.reshape(n, n).copy()
        nq = len(self.idx)
        return f_flat.reshape(nq, nq)[self._expand_ix].copy()

    # stationary-f coefficients: df/dt = a (1-f) - b f with a = P + a0
    def coeffs(self, n: np.ndarray):
        a0 = (self.r_up * n) @ self.D
        b0 = (self.r_down * (n + 1.0)) @ self.D
        return a0, b0


def _field_symmetric(f: np.ndarray) -> bool:
    return np.array_equal(f, f[::-1, :]) and np.array_equal(f, f[:, ::-1])


def _engine_for(params: SystemParams, reduced: bool) -> _Engine:
    cache = getattr(params.rates, "_engines", None)
    if cache is None:
        cache = {}
        params.rates._engines = cache
    key = "reduced" if reduced else "full"
    if key not in cache:
        cache[key] = _Engine(params.basis, params.rates, reduced)
    return cache[key]


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, stable at z = 0."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-8
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    out[small] = 1.0 + 0.5 * z[small]
    return out


def _scaled_residual(eng, n, f, P, kappa, Gamma):
    a0, b0 = eng.coeffs(n)
    a = a0 + P
    b = b0 + Gamma
    G = eng.Dw @ f
    src = eng.r_down * eng.rho * G
    up = eng.r_up * eng.rho * (1.0 - G)
    dn = -kappa * n + (n + 1.0) * src - n * up
    res_f = np.abs(a / (a + b) - f).max()
    res_n = (np.abs(dn) / ((n + 1.0) * (kappa + src + up))).max()
    return max(res_f, res_n)


def _slaved(eng, n, P, Gamma):
    """f eliminated exactly: its stationary profile for fixed occupations."""
    a0, b0 = eng.coeffs(n)
    a = a0 + P
    b = b0 + Gamma
    f = a / (a + b)
    G = eng.Dw @ f
    return f, G, a, b


def _mode_balance(eng, n, G, kappa):
    src = eng.r_down * eng.rho * G
    up = eng.r_up * eng.rho * (1.0 - G)
    F = -kappa * n + (n + 1.0) * src - n * up
    return F, F / ((n + 1.0) * (kappa + src + up))


def _jacobian(eng, n, a, b, G, kappa):
    """Jacobian of the occupation balance with f slaved."""
    s = a + b
    # divide twice: s can be large enough that s**2 overflows
    u = b / s / s
    v = a / s / s
    A_u = (eng.Dw * u) @ eng.D.T
    A_v = (eng.Dw * v) @ eng.D.T
    J_G = A_u * eng.r_up[None, :] - A_v * eng.r_down[None, :]
    src = eng.r_down * eng.rho * G
    up = eng.r_up * eng.rho * (1.0 - G)
    J = ((n + 1.0) * eng.r_down + n * eng.r_up)[:, None] * eng.rho * J_G
    ii = np.arange(eng.n_modes)
    J[ii, ii] += -kappa - up + src
    return J


def _newton_polish(eng, n, P, kappa, Gamma, res_tol, max_iter=40):
    """Damped Newton on the reduced occupation system.

    Returns (n, f, G, iterations, residual, status) with status one of
    'ok', 'unstable-root', 'singular', 'linesearch-stall', 'max-iter'.
    A converged root is accepted only if no mode has a positive linearized
    photon rate there ('unstable-root' otherwise).
    """
    n = n.copy()
    f, G, a, b = _slaved(eng, n, P, Gamma)
    F, Fs = _mode_balance(eng, n, G, kappa)
    res = np.abs(Fs).max()
    for it in range(max_iter):
        if res < res_tol:
            lam = eng.r_down * eng.rho * G - kappa - eng.r_up * eng.rho * (1.0 - G)
            if lam.max() > 1e-8 * (kappa + eng.r_up[0] * eng.rho):
                return n, f, G, it, res, "unstable-root"
            return n, f, G, it, res, "ok"
        J = _jacobian(eng, n, a, b, G, kappa)
        try:
            dn = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return n, f, G, it, res, "singular"
        t = 1.0
        neg = dn < 0
        if np.any(neg) and np.any(n[neg] > 0):
            t = min(1.0, 0.99 * np.min(n[neg] / -dn[neg]))
        ok = False
        for _ in range(30):
            n_try = n + t * dn
            if np.all(n_try >= 0):
                f2, G2, a2, b2 = _slaved(eng, n_try, P, Gamma)
                F2, Fs2 = _mode_balance(eng, n_try, G2, kappa)
                r2 = np.abs(Fs2).max()
                if r2 < res * (1.0 - 1e-4 * t) or r2 < res_tol:
                    n, f, G, a, b, F, res = n_try, f2, G2, a2, b2, F2, r2
                    ok = True
                    break
            t *= 0.5
        if not ok:
            return n, f, G, it, res, "linesearch-stall"
    return n, f, G, max_iter, res, "max-iter"


def _reduced_ptc(eng, n, P, kappa, Gamma, target, max_iter=500):
    """Implicit pseudo-transient continuation on the slaved mode system.

    Follows dn/dt = F(n) with implicit Euler steps (I - tau J) dn = tau F,
    growing tau geometrically: interpolates between damped relaxation and
    full Newton, and traverses the slow saddle channels of mode
    competition that defeat explicit stepping.
    """
    n = n.copy()
    f, G, a, b = _slaved(eng, n, P, Gamma)
    F, Fs = _mode_balance(eng, n, G, kappa)
    res = np.abs(Fs).max()
    src = eng.r_down * eng.rho * G
    up = eng.r_up * eng.rho * (1.0 - G)
    tau = 1.0 / np.max(kappa + src + up)
    eye = np.eye(eng.n_modes)
    for it in range(max_iter):
        if res < target:
            return n, it, res, "ok"
        J = _jacobian(eng, n, a, b, G, kappa)
        stepped = False
        for _ in range(40):
            try:
                dn = np.linalg.solve(eye - tau * J, tau * F)
            except np.linalg.LinAlgError:
                tau *= 0.3
                continue
            t = 1.0
            neg = dn < 0
            if np.any(neg) and np.any(n[neg] > 0):
                t = min(1.0, 0.99 * np.min(n[neg] / -dn[neg]))
            n_try = n + t * dn
            f2, G2, a2, b2 = _slaved(eng, n_try, P, Gamma)
            F2, Fs2 = _mode_balance(eng, n_try, G2, kappa)
            r2 = np.abs(Fs2).max()
            if r2 < res * 1.05 or r2 < target:
                n, f, G, a, b, F, res = n_try, f2, G2, a2, b2, F2, r2
                tau *= 1.5
                stepped = True
                break
            tau *= 0.3
        if not stepped:
            return n, it, res, "stall"
    return n, max_iter, res, "max-iter"


def _kick_unstable(eng, n_root, f_root, P, kappa):
    """Push the growing modes of an unstable root up a decade so the
    dynamics can leave its unstable manifold."""
    G = eng.Dw @ f_root
    lam = eng.r_down * eng.rho * G - kappa - eng.r_up * eng.rho * (1.0 - G)
    n = n_root.copy()
    growing = lam > 0
    n[growing] = np.maximum(10.0 * n[growing], 1.0)
    return n


def _steady_solve(eng, P, kappa, Gamma, n0, f0, res_tol, handoff, max_steps):
    """Core driver: exponential Lie-split stepping + Newton finishing.

    Returns (n, f_flat, G, residual, meta); meta['failed'] is set on
    non-convergence, and meta['history'] carries the residual tail.
    """
    n = n0.copy()
    f = f0.copy()
    kicks = rejects = newton_iters = rescues = 0
    steps_total = 0
    history = []

    def attempt_finish(n_cand):
        """Newton from a candidate; on an unstable root, kick and pull the
        kicked state back to the handoff level before giving up."""
        nonlocal newton_iters, kicks
        n_cur = n_cand
        while True:
            nn, ff, GG, nit, rr, status = _newton_polish(
                eng, n_cur, P, kappa, Gamma, res_tol
            )
            newton_iters += nit
            if status == "ok":
                return nn, ff, GG, rr
            if status == "unstable-root" and kicks < 25:
                kicks += 1
                nk = _kick_unstable(eng, nn, ff, P, kappa)
                nr, _, rres, st = _reduced_ptc(eng, nk, P, kappa, Gamma, handoff)
                if st == "ok":
                    n_cur = nr
                    continue
            return None

    res = _scaled_residual(eng, n, f, P, kappa, Gamma)
    if res < 1e-1:
        out = attempt_finish(n)
        if out is not None:
            nn, ff, GG, rr = out
            return nn, ff, GG, rr, dict(
                steps=0, rejects=0, newton=newton_iters, kicks=kicks, rescues=0
            )

    a0, b0 = eng.coeffs(n)
    a = a0 + P
    b = b0 + Gamma
    res = _scaled_residual(eng, n, f, P, kappa, Gamma)
    dt = 0.1 / np.max(a + b)
    hold = 0
    best = res
    since_best = 0
    while steps_total < max_steps:
        steps_total += 1
        fs = a / (a + b)
        f1 = fs + (f - fs) * np.exp(-(a + b) * dt)
        G1 = eng.Dw @ f1
        src = eng.r_down * eng.rho * G1
        lam = src - kappa - eng.r_up * eng.rho * (1.0 - G1)
        z = np.clip(lam * dt, -745.0, 700.0)
        n1 = n * np.exp(z) + src * dt * _phi1(z)
        a1, b1 = eng.coeffs(n1)
        a1 = a1 + P
        b1 = b1 + Gamma
        up1 = eng.r_up * eng.rho * (1.0 - G1)
        res1 = max(
            np.abs(a1 / (a1 + b1) - f1).max(),
            (
                np.abs(-kappa * n1 + (n1 + 1.0) * src - n1 * up1)
                / ((n1 + 1.0) * (kappa + src + up1))
            ).max(),
        )
        if res1 <= res * 1.05:
            n, f, a, b, res = n1, f1, a1, b1, res1
            assert np.all(n >= 0.0) and np.all(f >= 0.0) and np.all(f <= 1.0)
            history.append(res)
            if hold > 0:
                hold -= 1
            else:
                dt *= 1.35
        else:
            rejects += 1
            dt *= 0.3
            hold = 2
            if dt * np.max(a + b) < 1e-14:
                return n, f, eng.Dw @ f, res, dict(
                    steps=steps_total,
                    rejects=rejects,
                    newton=newton_iters,
                    kicks=kicks,
                    rescues=rescues,
                    failed="step-size underflow",
                    history=history[-200:],
                )
        if res < best * 0.9:
            best = res
            since_best = 0
        else:
            since_best += 1
        if res < handoff or since_best > 600:
            n_cand = n
            if res >= handoff:
                # residual plateau: the explicit dynamics crawls through a
                # mode-competition channel; pull it out implicitly
                rescues += 1
                nr, _, rres, st = _reduced_ptc(eng, n, P, kappa, Gamma, handoff)
                if st == "ok":
                    n_cand = nr
                else:
                    best = res
                    since_best = -1200
                    continue
            out = attempt_finish(n_cand)
            if out is not None:
                nn, ff, GG, rr = out
                return nn, ff, GG, rr, dict(
                    steps=steps_total,
                    rejects=rejects,
                    newton=newton_iters,
                    kicks=kicks,
                    rescues=rescues,
                )
            if res < handoff:
                handoff *= 0.1
                if handoff < 1e-13:
                    return n, f, eng.Dw @ f, res, dict(
                        steps=steps_total,
                        rejects=rejects,
                        newton=newton_iters,
                        kicks=kicks,
                        rescues=rescues,
                        failed="finisher exhausted",
                        history=history[-200:],
                    )
            best = res
            since_best = 0
    return n, f, eng.Dw @ f, res, dict(
        steps=steps_total,
        rejects=rejects,
        newton=newton_iters,
        kicks=kicks,
        rescues=rescues,
        failed="max steps exceeded",
        history=history[-200:],
    )


def _package_steady(eng, params, n, f_flat, G, res, meta, solver_name, wall):
    state = SystemState(n=n, f=eng.expand_field(f_flat))
    meta = dict(meta)
    meta["solver"] = solver_name
    meta["wall_time"] = wall
    steady = SteadyState(
        state=state,
        gains=G,
        residual=float(res),
        selected=frozenset(),
        params=params,
        meta=meta,
    )
    steady.selected = detect_selected(steady, params)
    return steady


def evolve_to_steady(
    initial: SystemState | None,
    params: SystemParams,
    rtol: float = 1e-9,
    max_steps: int = 60000,
    handoff: float = 1e-3,
) -> SteadyState:
    """Integrate the rate equations to their stable steady state.

    ``initial`` defaults to the dark state (n = 0, f = 0); warm starts
    from a nearby converged state are cheap.  Raises ConvergenceError with
    the residual history if the configured step budget is exhausted.
    """
    t0 = time.perf_counter()
    if params.kappa <= 0:
        raise ValueError("the steady-state solvers require kappa > 0")
    if initial is None:
        initial = SystemState.dark(params.basis)
    initial.validate(params.basis)
    eng = _engine_for(params, reduced=_field_symmetric(initial.f))
    n, f, G, res, meta = _steady_solve(
        eng,
        params.pump,
        params.kappa,
        params.gamma,
        initial.n,
        eng.reduce_field(initial.f),
        rtol,
        handoff,
        max_steps,
    )
    wall = time.perf_counter() - t0
    if "failed" in meta:
        raise ConvergenceError(
            f"no steady state after {meta['steps']} steps "
            f"({meta['failed']}; residual {res:.3e})",
            residual_history=meta.get("history"),
            meta=meta,
        )
    meta.pop("history", None)
    return _package_steady(eng, params, n, f, G, res, meta, "evolve_to_steady", wall)


def solve_self_consistent(
    params: SystemParams,
    rtol: float = 1e-9,
    max_iter: int = 20000,
    handoff: float = 1e-3,
) -> SteadyState:
    """Damped fixed-point alternation between f and the occupations.

    The occupations step in log space toward their stationary values (with
    a trust-region clip), f is mixed toward its stationary profile, and the
    damping adapts to the residual trend.  Finishes with the Newton polish.
    Raises OscillationDetected when the alternation cycles without
    progress; the caller should then use evolve_to_steady.
    """
    t0 = time.perf_counter()
    if params.kappa <= 0:
        raise ValueError("the steady-state solvers require kappa > 0")
    eng = _engine_for(params, reduced=True)
    P = params.pump
    kappa = params.kappa
    Gamma = params.gamma
    n = np.zeros(eng.n_modes)
    f = np.zeros(eng.n_nodes)
    theta = 0.5
    res_prev = math.inf
    best = math.inf
    since_best = 0
    attempts = 0
    for it in range(max_iter):
        a0, b0 = eng.coeffs(n)
        a = a0 + P
        b = b0 + Gamma
        fs = a / (a + b)
        G = eng.Dw @ f
        src = eng.r_down * eng.rho * G
        up = eng.r_up * eng.rho * (1.0 - G)
        denom = kappa + up - src
        res = max(
            np.abs(fs - f).max(),
            (
                np.abs(-kappa * n + (n + 1.0) * src - n * up)
                / ((n + 1.0) * (kappa + src + up))
            ).max(),
        )
        if res < handoff or since_best > 300:
            nn, ff, GG, nit, rr, status = _newton_polish(
                eng, n, P, kappa, Gamma, rtol
            )
            if status == "ok":
                wall = time.perf_counter() - t0
                meta = dict(iterations=it, newton=nit, attempts=attempts)
                return _package_steady(
                    eng, params, nn, ff, GG, rr, meta, "solve_self_consistent", wall
                )
            attempts += 1
            if attempts > 6:
                raise OscillationDetected(
                    f"fixed-point alternation oscillates (residual {res:.3e} "
                    f"after {it} iterations); fall back to evolve_to_steady"
                )
            if res < handoff:
                handoff *= 0.1
            best = res
            since_best = 0
            theta = 0.5
        if res < best * 0.9:
            best = res
            since_best = 0
        else:
            since_best += 1
        if res > res_prev * 1.0001:
            theta = max(theta * 0.7, 0.02)
        else:
            theta = min(theta * 1.05, 0.9)
        res_prev = res
        with np.errstate(divide="ignore", over="ignore"):
            n_target = np.where(denom > 0, src / denom, np.inf)
        step = np.log((n_target + 1e-300) / (n + 1e-300))
        step = np.clip(step, -2.0 * theta, 2.0 * theta)
        n = np.maximum(n * np.exp(step), 0.0)
        # seed still-dark modes from spontaneous emission so that the
        # multiplicative log step has something to scale
        n = np.where((n < 1e-12) & (src > 0), theta * src / np.maximum(denom, kappa), n)
        f = f + theta * (fs - f)
        assert np.all(n >= 0.0) and np.all(f >= 0.0) and np.all(f <= 1.0)
    raise OscillationDetected(
        f"fixed-point alternation did not converge within {max_iter} iterations; "
        "fall back to evolve_to_steady"
    )


def detect_selected(
    steady: SteadyState,
    params: SystemParams,
    n_sel: float = N_SELECT,
    clamp_tol: float = CLAMP_TOL,
) -> frozenset:
    """Selected modes: macroscopic occupation AND gain clamped at threshold.

    Both criteria and their values are recorded in the steady state's
    metadata.
    """
    gth = params.rates.threshold_gain(params.kappa)
    n = steady.state.n
    G = steady.gains
    picked = frozenset(
        int(i)
        for i in range(len(n))
        if n[i] >= n_sel and abs(G[i] - gth[i]) / gth[i] <= clamp_tol
    )
    steady.meta["selection_criteria"] = {"n_sel": n_sel, "clamp_tol": clamp_tol}
    return picked
