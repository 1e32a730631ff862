"""Per-slot transmit design for the secret and covert uplinks.

The covert user's transmit power q_c is the only scalar degree of freedom
once the received-power coupling at the adversary is enforced: the cover
power carved out at the adversary fixes the secret user's power, the
redundancy rate and both connection probabilities, so the slot reduces to a
one-dimensional rise-then-decay curve searched by derivative-sign
bisection. Beam directions enter through the received-power coefficients:
the default isotropic mode uses the full-trace antenna gains, while the
direction-aware mode projects explicit channel vectors onto a rank-one
beam family mixing the covert user's own link with the leakage direction.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from . import kernels, secmetrics

__all__ = ["CovertBudgetError", "SlotEnv", "slot_env", "env_from_vectors",
           "slot_objective", "BsaResult", "bsa_optimize",
           "BeamformDecision", "decision_at", "decide_slot",
           "h0_decision", "H0Decision",
           "DirectionDecision", "choose_directions",
           "Oracle2dResult", "oracle_2d", "write_decisions_csv"]


class CovertBudgetError(ValueError):
    """Covert cover at the adversary exceeds the secret user's budget."""


@dataclass(frozen=True)
class SlotEnv:
    """Scalar slot environment: received-power coefficients per unit
    transmit power plus the rates and weights of the sum objective."""

    c_ba: float      # secret air gain multiplying q_b
    c_ca: float      # covert air gain multiplying q_c
    c_cw: float      # covert adversary-side gain multiplying q_c
    g_bw: float      # secret adversary-side gain multiplying q_b
    q_b_max: float
    q_c_max: float
    sigma_a2: float
    sigma_w2: float
    gamma_t: float
    gamma_c: float
    neg_ln_eta: float
    kappa: float
    r_t: float
    r_c: float

    @property
    def budget(self):
        """Adversary-side received budget of the secret user at full power."""
        return self.q_b_max * self.g_bw

    @property
    def q_c_feasible(self):
        """Largest covert power honoring both the transmit cap and the
        received-power coupling."""
        if self.c_cw <= 0:
            return self.q_c_max
        return min(self.q_c_max, self.budget / self.c_cw)

    def rate(self, q_c):
        """Weighted slot rate at covert power(s) q_c (vectorized)."""
        return kernels.slot_rate_curve(
            q_c, self.c_ba, self.c_ca, self.c_cw, self.g_bw, self.q_b_max,
            self.sigma_a2, self.sigma_w2, self.gamma_t, self.gamma_c,
            self.neg_ln_eta, self.kappa, self.r_t, self.r_c)

    def split_powers(self, q_c):
        """(q_b, p_ba, p_ca, p_cw) at covert power q_c."""
        p_cw = self.c_cw * q_c
        if p_cw > self.budget * (1.0 + 1e-12):
            raise CovertBudgetError(
                f"covert cover {p_cw:.6g} W exceeds the adversary-side budget "
                f"{self.budget:.6g} W (q_c must stay <= {self.q_c_feasible:.6g} W)")
        q_b = max(self.q_b_max - p_cw / self.g_bw, 0.0)
        return q_b, self.c_ba * q_b, self.c_ca * q_c, p_cw


def slot_env(cfg, gains, slot=0):
    """Isotropic-mode environment: full-trace antenna gains at one slot."""
    return SlotEnv(
        c_ba=float(gains.g_ba[slot]), c_ca=float(gains.g_ca[slot]),
        c_cw=float(gains.g_cw), g_bw=float(gains.g_bw),
        q_b_max=cfg.q_b_max_w, q_c_max=cfg.q_c_max_w,
        sigma_a2=cfg.sigma_a2_w, sigma_w2=cfg.sigma_w2_w,
        gamma_t=cfg.gamma_t, gamma_c=cfg.gamma_c,
        neg_ln_eta=-math.log(cfg.eta_s), kappa=cfg.kappa,
        r_t=float(cfg.r_t), r_c=float(cfg.r_c))


def _mixing_basis(h_ca, h_cw):
    """Orthonormal pair spanning the covert beam family, with the phase
    folded so the leakage amplitude is |alpha| cos(theta) - beta sin(theta).

    Returns (e1, e2, |alpha|, beta); e2 is None when the leakage vector has
    no component off the covert user's own direction (single antenna, or
    parallel channels), in which case only theta = 0 is meaningful.
    """
    n1 = float(np.linalg.norm(h_ca))
    e1 = h_ca / n1
    alpha = complex(np.vdot(e1, h_cw))
    resid = h_cw - alpha * e1
    beta = float(np.linalg.norm(resid))
    if beta < 1e-12 * max(1.0, float(np.linalg.norm(h_cw))):
        return e1, None, abs(alpha), 0.0
    e2 = resid / beta
    if abs(alpha) > 0:
        e2 = e2 * np.exp(1j * np.angle(alpha))
    return e1, e2, abs(alpha), beta


def _beam(e1, e2, theta):
    if e2 is None or theta == 0.0:
        return e1
    return math.cos(theta) * e1 - math.sin(theta) * e2


def env_from_vectors(cfg, gains, h_ba, h_ca, h_cw, theta=0.0):
    """Direction-aware environment for explicit channel vectors.

    The secret beam is maximum-ratio toward the receiver; the covert beam is
    the family member at mixing angle theta. The secret user's adversary-side
    coupling stays at the full-trace gain so the carved-power bookkeeping
    remains feasible for every beam choice.
    """
    h_ba = np.asarray(h_ba, dtype=complex)
    h_ca = np.asarray(h_ca, dtype=complex)
    h_cw = np.asarray(h_cw, dtype=complex)
    for name, h in (("h_ba", h_ba), ("h_ca", h_ca), ("h_cw", h_cw)):
        if np.linalg.norm(h) == 0:
            raise ValueError(f"channel vector {name} is zero")
    e1, e2, alpha_abs, beta = _mixing_basis(h_ca, h_cw)
    u_c = _beam(e1, e2, theta)
    return SlotEnv(
        c_ba=float(np.linalg.norm(h_ba) ** 2),
        c_ca=float(np.abs(np.vdot(u_c, h_ca)) ** 2),
        c_cw=float(np.abs(np.vdot(u_c, h_cw)) ** 2),
        g_bw=float(gains.g_bw),
        q_b_max=cfg.q_b_max_w, q_c_max=cfg.q_c_max_w,
        sigma_a2=cfg.sigma_a2_w, sigma_w2=cfg.sigma_w2_w,
        gamma_t=cfg.gamma_t, gamma_c=cfg.gamma_c,
        neg_ln_eta=-math.log(cfg.eta_s), kappa=cfg.kappa,
        r_t=float(cfg.r_t), r_c=float(cfg.r_c))


def slot_objective(q_c, cfg, gains, slot=0, env=None):
    """Weighted slot rate at covert power q_c.

    Raises CovertBudgetError when the cover received by the adversary
    exceeds the secret user's full-power budget, and ValueError for powers
    outside [0, q_c_max].
    """
    env = slot_env(cfg, gains, slot) if env is None else env
    q = float(q_c)
    if not 0.0 <= q <= env.q_c_max * (1.0 + 1e-12):
        raise ValueError(f"q_c must lie in [0, {env.q_c_max:.6g}] W, got {q:.6g}")
    env.split_powers(q)  # budget check with the named-bound error
    return env.rate(q)


@dataclass(frozen=True)
class BsaResult:
    """Outcome of the per-slot power search."""

    q_c: float
    objective: float
    unimodal: bool     # False when the pre-scan saw multiple humps
    evaluations: int
    iterations: int    # bisection steps (bracket halvings)


def _derivative_sign(env, q, step, hi):
    """Sign of the numerical derivative of the slot rate at q."""
    lo_pt = max(q - step, 0.0)
    hi_pt = min(q + step, hi)
    f_lo, f_hi = env.rate(np.array([lo_pt, hi_pt]))
    return f_hi - f_lo


def bsa_optimize(cfg=None, gains=None, zeta1=None, slot=0, env=None,
                 prescan=129):
    """Derivative-sign bisection for the best covert power in one slot.

    Searches [0, q_c_feasible]. A coarse pre-scan checks the single-hump
    assumption; when it sees several interior rises the search falls back to
    a dense grid plus local bisection refinement and flags the result.
    The returned power is within zeta1 (default: the scenario tolerance)
    of the true argmax.
    """
    env = slot_env(cfg, gains, slot) if env is None else env
    if zeta1 is None:
        zeta1 = (cfg.zeta1_w if cfg is not None else 1e-4 * env.q_c_max)
    hi = env.q_c_feasible
    if hi <= 0:
        raise CovertBudgetError("no feasible covert power interval")
    step = max(1e-6 * env.q_c_max, 1e-12)
    evals = 0

    # pre-scan for the single-hump assumption (rises below noise are ignored)
    grid = np.linspace(0.0, hi, prescan)
    vals = env.rate(grid)
    evals += prescan
    diffs = np.diff(vals)
    noise = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    rises = np.flatnonzero((diffs[:-1] <= 0) & (diffs[1:] > noise))
    unimodal = rises.size == 0

    if not unimodal:
        dense = np.linspace(0.0, hi, 10_001)
        dvals = env.rate(dense)
        evals += dense.size
        best = int(np.argmax(dvals))
        lo = dense[max(best - 1, 0)]
        up = dense[min(best + 1, dense.size - 1)]
    else:
        lo, up = 0.0, hi
        if _derivative_sign(env, hi, step, hi) >= 0:
            evals += 2
            return BsaResult(q_c=hi, objective=float(env.rate(hi)),
                             unimodal=True, evaluations=evals + 1, iterations=0)
        if _derivative_sign(env, 0.0, step, hi) <= 0:
            evals += 4
            return BsaResult(q_c=0.0, objective=float(env.rate(0.0)),
                             unimodal=True, evaluations=evals + 1, iterations=0)

    iters = 0
    while up - lo > zeta1:
        mid = 0.5 * (lo + up)
        if _derivative_sign(env, mid, step, hi) > 0:
            lo = mid
        else:
            up = mid
        evals += 2
        iters += 1
    q_star = 0.5 * (lo + up)
    return BsaResult(q_c=q_star, objective=float(env.rate(q_star)),
                     unimodal=unimodal, evaluations=evals + 1, iterations=iters)


@dataclass(frozen=True)
class BeamformDecision:
    """One slot's transmit design and its achieved metrics."""

    q_c: float
    q_b: float
    u_b: np.ndarray
    u_c: np.ndarray
    theta: float
    r_w: float
    r_s: float
    scp_h1: float
    ccp: float
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "u_b", np.asarray(self.u_b, dtype=complex))
        object.__setattr__(self, "u_c", np.asarray(self.u_c, dtype=complex))
        self.u_b.setflags(write=False)
        self.u_c.setflags(write=False)

    @property
    def w_b(self):
        return math.sqrt(self.q_b) * self.u_b

    @property
    def w_c(self):
        return math.sqrt(self.q_c) * self.u_c

    def covertness_residual(self, env):
        """|budget - (p_bw + p_cw)| relative to the budget."""
        p_bw = self.q_b * env.g_bw
        p_cw = self.q_c * env.c_cw
        return abs(env.budget - (p_bw + p_cw)) / env.budget


def _decision_from_env(env, q_c, u_b, u_c, theta):
    q_b, p_ba, p_ca, p_cw = env.split_powers(q_c)
    r_w = secmetrics.secrecy_redundancy(env.budget, p_cw, env.sigma_w2,
                                        math.exp(-env.neg_ln_eta))
    r_s = secmetrics.secret_rate(env.r_t, r_w)
    scp1 = secmetrics.scp_h1(p_ba, p_ca, env.sigma_a2, env.r_t)
    cc = secmetrics.ccp(p_ba, p_ca, env.sigma_a2, env.r_t, env.r_c)
    rate = env.kappa * scp1 * r_s + (1.0 - env.kappa) * cc * env.r_c
    return BeamformDecision(q_c=q_c, q_b=q_b, u_b=u_b, u_c=u_c, theta=theta,
                            r_w=r_w, r_s=r_s, scp_h1=scp1, ccp=cc, rate=rate)


def decision_at(cfg, gains, q_c, slot=0, env=None):
    """Package the achieved per-slot metrics at a given covert power.

    Unit directions are the uniform surrogate (the isotropic model tracks
    powers, not phases).
    """
    env = slot_env(cfg, gains, slot) if env is None else env
    u_b = np.ones(cfg.n_b, dtype=complex) / math.sqrt(cfg.n_b)
    u_c = np.ones(cfg.n_c, dtype=complex) / math.sqrt(cfg.n_c)
    return _decision_from_env(env, float(q_c), u_b, u_c, theta=0.0)


def decide_slot(cfg, gains, slot=0, zeta1=None, env=None):
    """Isotropic-mode decision for one slot: run the power search and
    package the achieved metrics."""
    env = slot_env(cfg, gains, slot) if env is None else env
    res = bsa_optimize(cfg, gains, zeta1=zeta1, slot=slot, env=env)
    return decision_at(cfg, gains, res.q_c, slot=slot, env=env)


@dataclass(frozen=True)
class H0Decision:
    """Covert-user-silent design: the secret user transmits at full power
    with redundancy high enough to honor the outage cap."""

    q_b: float
    r_w: float
    r_s: float
    scp_h0: float
    sop_h0: float
    rate: float


def h0_decision(cfg, gains, slot=0):
    """Full-power maximum-ratio design with the covert user silent.

    The redundancy rate is the adversary's full-leakage capacity, raised to
    the outage-cap boundary whenever that cap binds.
    """
    p_bw = cfg.q_b_max_w * float(gains.g_bw)
    p_ba = cfg.q_b_max_w * float(gains.g_ba[slot])
    r_cap = math.log2(1.0 + p_bw / cfg.sigma_w2_w)
    r_sop = secmetrics.redundancy_for_outage_cap(p_bw, cfg.sigma_w2_w, cfg.eta_s)
    r_w = max(r_cap, r_sop)
    r_s = secmetrics.secret_rate(cfg.r_t, r_w)
    scp0 = secmetrics.scp_h0(p_ba, cfg.sigma_a2_w, cfg.r_t)
    sop0 = secmetrics.sop_h0(p_bw, cfg.sigma_w2_w, r_w)
    return H0Decision(q_b=cfg.q_b_max_w, r_w=r_w, r_s=r_s, scp_h0=scp0,
                      sop_h0=sop0, rate=scp0 * r_s)


@dataclass(frozen=True)
class DirectionDecision:
    """Joint (theta, q_c) choice over the rank-one beam family."""

    u_b: np.ndarray
    u_c: np.ndarray
    theta: float
    decision: BeamformDecision
    env: SlotEnv


def choose_directions(cfg, gains, h_ba, h_ca, h_cw, zeta1=None, thetas=33):
    """Pick beam directions from explicit channel vectors.

    The secret beam is maximum-ratio toward the receiver. The covert beam
    is selected from the two-dimensional mixing family by a coarse angle
    scan, each angle scored by its own power search; theta = 0 reproduces
    the pure maximum-ratio beam, so the scan never does worse than it.
    Returns the directions and the winning power decision; beamformers are
    exactly rank one (w = sqrt(power) * direction).
    """
    h_ba = np.asarray(h_ba, dtype=complex)
    h_ca = np.asarray(h_ca, dtype=complex)
    h_cw = np.asarray(h_cw, dtype=complex)
    for name, h in (("h_ba", h_ba), ("h_ca", h_ca), ("h_cw", h_cw)):
        if np.linalg.norm(h) == 0:
            raise ValueError(f"channel vector {name} is zero")
    u_b = h_ba / np.linalg.norm(h_ba)
    e1, e2, alpha_abs, beta = _mixing_basis(h_ca, h_cw)
    if e2 is None:
        angles = np.array([0.0])
    else:
        angles = np.linspace(0.0, 0.5 * math.pi, thetas)
        if beta > 0:
            null_theta = math.atan2(alpha_abs, beta)
            angles = np.unique(np.append(angles, null_theta))

    def score(theta):
        env = env_from_vectors(cfg, gains, h_ba, h_ca, h_cw, theta=float(theta))
        return bsa_optimize(cfg, zeta1=zeta1, env=env), env

    best = None
    for theta in angles:
        res, env = score(theta)
        if best is None or res.objective > best[1].objective:
            best = (float(theta), res, env)
    if angles.size > 1:
        # refine around the coarse winner: two shrinking local passes
        span = float(np.max(np.diff(angles)))
        center = best[0]
        for _ in range(2):
            local = np.linspace(max(center - span, 0.0),
                                min(center + span, 0.5 * math.pi), 9)
            for theta in local:
                res, env = score(theta)
                if res.objective > best[1].objective:
                    best = (float(theta), res, env)
            center = best[0]
            span /= 4.0
    theta, res, env = best
    u_c = _beam(e1, e2, theta)
    decision = _decision_from_env(env, res.q_c, u_b, u_c, theta)
    return DirectionDecision(u_b=u_b, u_c=u_c, theta=theta,
                             decision=decision, env=env)


@dataclass(frozen=True)
class Oracle2dResult:
    """Exhaustive search outcome over (covert power, mixing angle)."""

    q_c: float
    theta: float
    objective: float


def oracle_2d(cfg, gains, h_ba, h_ca, h_cw, grid=(64, 64)):
    """Brute-force search of the (q_c, theta) rectangle.

    Used by tests to bound the suboptimality of the bisection plus angle
    scan; grid resolution must be at least 64 x 64.
    """
    n_q, n_theta = grid
    if n_q < 64 or n_theta < 64:
        raise ValueError("oracle grid must be at least 64 x 64")
    _, e2, _, _ = _mixing_basis(np.asarray(h_ca, dtype=complex),
                                np.asarray(h_cw, dtype=complex))
    angles = (np.array([0.0]) if e2 is None
              else np.linspace(0.0, 0.5 * math.pi, n_theta))
    best = None
    q_grid = np.linspace(0.0, cfg.q_c_max_w, n_q)
    for theta in angles:
        env = env_from_vectors(cfg, gains, h_ba, h_ca, h_cw, theta=float(theta))
        vals = env.rate(q_grid)
        ix = int(np.argmax(vals))
        if best is None or vals[ix] > best.objective:
            best = Oracle2dResult(q_c=float(q_grid[ix]), theta=float(theta),
                                  objective=float(vals[ix]))
    return best


_DECISION_COLUMNS = ("slot", "q_b", "q_c", "theta", "r_w", "r_s",
                     "scp_h1", "ccp", "rate")


def write_decisions_csv(path, decisions):
    """One row per slot decision (atomic temp-plus-rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_DECISION_COLUMNS)
        for slot, d in enumerate(decisions):
            writer.writerow([slot, d.q_b, d.q_c, d.theta, d.r_w, d.r_s,
                             d.scp_h1, d.ccp, d.rate])
    os.replace(tmp, path)
