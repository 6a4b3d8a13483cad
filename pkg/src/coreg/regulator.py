"""Design and certification for the sampled-data cooperative regulation loop.

Covers the executable assumption checks A1-A4, the regulator-equation
solve, zero-order-hold discretization, discrete LQR gain synthesis, and
the Schur certificates for both the zero-order hold and the general
hold-function compensator.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import (GraphDecomposition, LeaderGraph, RootConditionError,
                    decompose, exact_mu_bound, paper_mu_bound, root_reachable)
from .linalg import (DimensionError, as_matrix, as_vector, eigenvalues,
                     exp_convolution, kron, mat_exp, max_abs,
                     solve_discrete_sylvester, solve_sylvester,
                     spectral_radius)

RANK_RTOL = 1e-9
NONPATHOLOGICAL_TOL = 1e-8
REGULATOR_RESIDUAL_TOL = 1e-8
RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 100_000
SCHUR_MARGIN = 1e-6


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class RegulationInfeasibleError(ValueError):
    """The output equation C Pi + Q = 0 cannot be met for this plant."""


class SynthesisError(RuntimeError):
    """Gain synthesis failed (Riccati divergence or unstable result)."""


class DesignError(RuntimeError):
    """A design was produced but its certificate fails; carries the certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class Plant:
    """One agent: dx = A x + B u + P w,  e = C x + Q w."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        p = as_matrix(self.P, "P")
        q = as_matrix(self.Q, "Q")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise DimensionError("B row count must match A")
        if c.shape[1] != n:
            raise DimensionError("C column count must match A")
        if p.shape[0] != n:
            raise DimensionError("P row count must match A")
        if q.shape[0] != c.shape[0]:
            raise DimensionError("Q row count must match C")
        if q.shape[1] != p.shape[1]:
            raise DimensionError("Q and P must share the exosystem dimension")
        for name, m in (("A", a), ("B", b), ("C", c), ("P", p), ("Q", q)):
            object.__setattr__(self, name, m)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def q(self):
        return self.P.shape[1]


@dataclass(frozen=True)
class Exosystem:
    """Autonomous reference generator dw = S w with initial condition w0."""

    S: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.S, "S")
        if s.shape[0] != s.shape[1]:
            raise DimensionError(f"S must be square, got {s.shape}")
        w0 = as_vector(self.w0, "w0")
        if w0.size != s.shape[0]:
            raise DimensionError("w0 length must match S")
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "w0", w0)

    @property
    def q(self):
        return self.S.shape[0]


@dataclass(frozen=True)
class HoldSpec:
    """Inter-sample hold shape H(t) = C_H exp(A_H t).

    The zero-order hold is C_H = I, A_H = 0.  A singular A_H is permitted
    (the certificate carries a note), since the zero-order hold itself
    has A_H = 0.
    """

    C_H: np.ndarray
    A_H: np.ndarray

    def __post_init__(self):
        ch = as_matrix(self.C_H, "C_H")
        ah = as_matrix(self.A_H, "A_H")
        if ah.shape[0] != ah.shape[1]:
            raise DimensionError("A_H must be square")
        if ch.shape[1] != ah.shape[0]:
            raise DimensionError("C_H column count must match A_H")
        object.__setattr__(self, "C_H", ch)
        object.__setattr__(self, "A_H", ah)

    @classmethod
    def zoh(cls, m: int) -> "HoldSpec":
        return cls(C_H=np.eye(m), A_H=np.zeros((m, m)))

    @property
    def r(self):
        return self.A_H.shape[0]

    @property
    def is_zoh(self):
        m, r = self.C_H.shape
        return m == r and np.array_equal(self.C_H, np.eye(m)) and \
            not np.any(self.A_H)


@dataclass(frozen=True)
class CompensatorDesign:
    """Per-agent gains plus the shared sampling period, consensus step and
    hold shape.  K2_i = -K1_i Pi_i by construction."""

    h: float
    mu: float
    K1: tuple
    K2: tuple
    Pi: tuple
    hold: HoldSpec

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ValueError(f"sampling period h must be positive, got {self.h}")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"consensus step mu must be positive, got {self.mu}")
        object.__setattr__(self, "K1", tuple(as_matrix(k, "K1") for k in self.K1))
        object.__setattr__(self, "K2", tuple(as_matrix(k, "K2") for k in self.K2))
        object.__setattr__(self, "Pi", tuple(as_matrix(p, "Pi") for p in self.Pi))

    @property
    def n_agents(self):
        return len(self.K1)


@dataclass(frozen=True)
class AssumptionReport:
    a1: bool
    a2: bool
    a3: bool
    a4: bool
    details: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return self.a1 and self.a2 and self.a3 and self.a4

    def as_dict(self):
        return {"A1": self.a1, "A2": self.a2, "A3": self.a3, "A4": self.a4}


@dataclass(frozen=True)
class Certificate:
    """Outcome of a stability/regulation check.

    verdict is True exactly when every assumption passes, every per-agent
    closed-loop radius and the consensus radius are below one, and the
    regulator residuals stay within tolerance.
    """

    verdict: bool
    rho_agent: tuple
    rho_eta: float
    residuals: tuple
    assumptions: dict
    mu: float
    mu_paper_bound: float | None
    mu_exact_bound: float | None
    h: float
    notes: tuple = ()

    def to_dict(self):
        return {
            "verdict": "pass" if self.verdict else "fail",
            "rho_agent": list(self.rho_agent),
            "rho_eta": self.rho_eta,
            "residuals": list(self.residuals),
            "assumptions": dict(self.assumptions),
            "mu": self.mu,
            "mu_paper_bound": self.mu_paper_bound,
            "mu_exact_bound": self.mu_exact_bound,
            "h": self.h,
            "notes": list(self.notes),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


# ---------------------------------------------------------------------------
# rank and controllability helpers

def _singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values of a real matrix via the spectrum of the smaller
    Gram matrix."""
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    vals = eigenvalues(gram).values.real
    return np.sqrt(np.clip(np.sort(vals)[::-1], 0.0, None))


def _realify(m: np.ndarray) -> np.ndarray:
    re, im = np.real(m), np.imag(m)
    return np.block([[re, -im], [im, re]])


def matrix_rank(m, rtol=RANK_RTOL) -> int:
    """Numerical rank by singular-value threshold rtol * sigma_max."""
    m = np.atleast_2d(np.asarray(m))
    complex_input = np.iscomplexobj(m)
    work = _realify(m) if complex_input else m.astype(float)
    sv = _singular_values(work)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    r = int(np.sum(sv > rtol * sv[0]))
    return r // 2 if complex_input else r


def kalman_controllable(a: np.ndarray, b: np.ndarray) -> bool:
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return matrix_rank(np.hstack(blocks)) == n


def _nonpathological(eigs, h: float) -> tuple[bool, str]:
    """No two eigenvalues with equal real parts whose imaginary parts
    differ by a nonzero multiple of 2 pi / h."""
    vals = list(eigs)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            la, lb = vals[i], vals[j]
            if abs(la.real - lb.real) > NONPATHOLOGICAL_TOL:
                continue
            d = (la.imag - lb.imag) * h / (2.0 * math.pi)
            k = round(d)
            if k != 0 and abs(d - k) <= NONPATHOLOGICAL_TOL:
                return False, (
                    f"eigenvalues {la:.6g} and {lb:.6g} differ by "
                    f"{k} x 2pi/h in imaginary part"
                )
    return True, ""


def check_assumptions(plants, exo: Exosystem, g: LeaderGraph,
                      h: float) -> AssumptionReport:
    """Executable versions of the four standing assumptions.

    A1 exosystem has no decaying modes; A2 rooted topology; A3 each pair
    (A_i, B_i) controllable and the sampling is non-pathological for the
    joint spectrum of A_i and S; A4 the transmission-zero rank condition
    holds at every exosystem eigenvalue.
    """
    details = {}
    s_spec = eigenvalues(exo.S)
    min_re = min(float(v.real) for v in s_spec.values)
    a1 = min_re >= -1e-10
    if not a1:
        details["A1"] = f"S has an eigenvalue with real part {min_re:.3e}"

    a2 = root_reachable(g)
    if not a2:
        details["A2"] = "a follower is unreachable from the exosystem node"

    a3 = True
    a4 = True
    for i, plant in enumerate(plants, start=1):
        if not kalman_controllable(plant.A, plant.B):
            a3 = False
            details[f"A3.agent{i}"] = "(A, B) fails the Kalman rank test"
            continue
        joint = list(eigenvalues(plant.A).values) + list(s_spec.values)
        ok, why = _nonpathological(joint, h)
        if not ok:
            a3 = False
            details[f"A3.agent{i}"] = f"pathological sampling: {why}"
    for i, plant in enumerate(plants, start=1):
        n, p, m = plant.n, plant.p, plant.m
        for lam in s_spec.values:
            pencil = np.zeros((n + p, n + m), dtype=complex)
            pencil[:n, :n] = plant.A - lam * np.eye(n)
            pencil[:n, n:] = plant.B
            pencil[n:, :n] = plant.C
            r = matrix_rank(pencil)
            if r != n + p:
                a4 = False
                details[f"A4.agent{i}"] = (
                    f"rank {r} != {n + p} at exosystem eigenvalue {lam:.6g}"
                )
                break
    return AssumptionReport(a1=a1, a2=a2, a3=a3, a4=a4, details=details)


def solve_regulator_pair(plant: Plant, exo: Exosystem) -> np.ndarray:
    """Pi with Pi S = A Pi + P and C Pi + Q = 0 (both to 1e-8)."""
    pi = solve_sylvester(plant.A, exo.S, plant.P)
    out_res = max_abs(plant.C @ pi + plant.Q)
    if out_res > REGULATOR_RESIDUAL_TOL:
        report = check_assumptions([plant], exo,
                                   _single_agent_graph(), h=1.0)
        raise RegulationInfeasibleError(
            f"output equation violated: max |C Pi + Q| = {out_res:.3e} "
            f"(rank condition A4 {'holds' if report.a4 else 'fails: ' + report.details.get('A4.agent1', '')})"
        )
    return pi


def _single_agent_graph() -> LeaderGraph:
    return LeaderGraph(adjacency=np.array([[0.0, 0.0], [1.0, 0.0]]),
                       directed=True)


def discretize(plant: Plant, exo: Exosystem, h: float):
    """(A_D, B_D, P_D): exact sample-period discretization of the plant
    and of the exosystem-driven term."""
    if not (math.isfinite(h) and h > 0.0):
        raise ValueError(f"h must be positive, got {h}")
    a_d = mat_exp(plant.A, h)
    b_d = exp_convolution(plant.A, plant.B, np.zeros((plant.m, plant.m)), h)
    p_d = exp_convolution(plant.A, plant.P, exo.S, h)
    return a_d, b_d, p_d


def _stabilizable(a: np.ndarray, b: np.ndarray) -> tuple[bool, complex | None]:
    n = a.shape[0]
    for lam in eigenvalues(a).values:
        if abs(lam) < 1.0 - 1e-9:
            continue
        pencil = np.hstack([a - lam * np.eye(n), b]).astype(complex)
        if matrix_rank(pencil) < n:
            return False, lam
    return True, None


def synthesize_k1(a_d, b_d) -> np.ndarray:
    """Schur-stabilizing state feedback for the sampled pair, by unit-weight
    discrete LQR (Riccati fixed-point iteration to 1e-12).

    Returns K1 with spectral_radius(A_D + B_D K1) < 1 - 1e-6.
    """
    a_d = as_matrix(a_d, "A_D")
    b_d = as_matrix(b_d, "B_D")
    if a_d.shape[0] != a_d.shape[1] or b_d.shape[0] != a_d.shape[0]:
        raise DimensionError("A_D must be square and B_D conformable")
    ok, lam = _stabilizable(a_d, b_d)
    if not ok:
        raise PreconditionError(
            f"(A_D, B_D) has an uncontrollable unstable mode at {lam:.6g}"
        )
    n, m = a_d.shape[0], b_d.shape[1]
    q = np.eye(n)
    r = np.eye(m)
    p = q.copy()
    for _ in range(RICCATI_MAX_ITER):
        btp = b_d.T @ p
        gain, _ = _kernels.lu_solve(r + btp @ b_d, btp @ a_d)
        p_next = q + a_d.T @ p @ a_d - a_d.T @ p @ b_d @ gain
        if max_abs(p_next - p) <= RICCATI_TOL:
            p = p_next
            break
        p = p_next
    else:
        raise SynthesisError(
            f"Riccati iteration did not converge within {RICCATI_MAX_ITER} steps"
        )
    btp = b_d.T @ p
    gain, _ = _kernels.lu_solve(r + btp @ b_d, btp @ a_d)
    k1 = -gain
    rho = spectral_radius(a_d + b_d @ k1)
    if rho >= 1.0 - SCHUR_MARGIN:
        raise SynthesisError(
            f"synthesized gain leaves closed-loop radius {rho:.6f}"
        )
    return k1


def _mu_bounds(d: GraphDecomposition):
    try:
        return paper_mu_bound(d), exact_mu_bound(d)
    except RootConditionError:
        return None, None


def assemble_zoh(plants, exo: Exosystem, g: LeaderGraph, h: float,
                 mu: float | None = None, k1=None) -> CompensatorDesign:
    """Build the zero-order-hold design without gating on the certificate:
    Pi per agent, K1 synthesized unless supplied, K2 = -K1 Pi, and mu
    defaulting to half the exact admissibility bound."""
    plants = list(plants)
    d = decompose(g)
    if mu is None:
        mu = 0.5 * exact_mu_bound(d)
    if k1 is not None and not isinstance(k1, (list, tuple)):
        k1 = [k1] * len(plants)
    pis, k1s, k2s = [], [], []
    for i, plant in enumerate(plants, start=1):
        try:
            pi = solve_regulator_pair(plant, exo)
            if k1 is None:
                a_d, b_d, _ = discretize(plant, exo, h)
                k1_i = synthesize_k1(a_d, b_d)
            else:
                k1_i = as_matrix(k1[i - 1], "K1")
        except Exception as exc:
            raise type(exc)(f"agent {i}: {exc}") from exc
        pis.append(pi)
        k1s.append(k1_i)
        k2s.append(-(k1_i @ pi))
    m = plants[0].m
    return CompensatorDesign(h=float(h), mu=float(mu), K1=tuple(k1s),
                             K2=tuple(k2s), Pi=tuple(pis),
                             hold=HoldSpec.zoh(m))


def certify_zoh(design: CompensatorDesign, plants, exo: Exosystem,
                g: LeaderGraph) -> Certificate:
    """Schur certificate for the zero-order-hold loop: per-agent radius of
    A_D + B_D K1, consensus radius of (I - mu H) (x) exp(S h), recomputed
    regulator residuals and assumption checks."""
    plants = list(plants)
    d = decompose(g)
    report = check_assumptions(plants, exo, g, design.h)
    rho_agent = []
    residuals = []
    for plant, k1, pi in zip(plants, design.K1, design.Pi):
        a_d, b_d, _ = discretize(plant, exo, design.h)
        rho_agent.append(spectral_radius(a_d + b_d @ k1))
        res_flow = max_abs(pi @ exo.S - plant.A @ pi - plant.P)
        res_out = max_abs(plant.C @ pi + plant.Q)
        residuals.append(max(res_flow, res_out))
    n_f = g.n_followers
    consensus = kron(np.eye(n_f) - design.mu * d.H, mat_exp(exo.S, design.h))
    rho_eta = spectral_radius(consensus)
    mu_paper, mu_exact = _mu_bounds(d)
    verdict = (report.all_pass
               and max(rho_agent) < 1.0
               and rho_eta < 1.0
               and max(residuals) <= REGULATOR_RESIDUAL_TOL)
    return Certificate(
        verdict=bool(verdict),
        rho_agent=tuple(float(r) for r in rho_agent),
        rho_eta=float(rho_eta),
        residuals=tuple(float(r) for r in residuals),
        assumptions=report.as_dict(),
        mu=design.mu,
        mu_paper_bound=mu_paper,
        mu_exact_bound=mu_exact,
        h=design.h,
    )


def design_zoh(plants, exo: Exosystem, g: LeaderGraph, h: float,
               mu: float | None = None, k1=None):
    """Full design pipeline; returns (design, certificate) and refuses to
    hand out a design whose certificate fails."""
    plants = list(plants)
    report = check_assumptions(plants, exo, g, h)
    if not report.all_pass:
        failed = [k for k, v in report.as_dict().items() if not v]
        raise PreconditionError(
            f"assumptions {', '.join(failed)} fail: {report.details}"
        )
    design = assemble_zoh(plants, exo, g, h, mu=mu, k1=k1)
    cert = certify_zoh(design, plants, exo, g)
    if not cert.verdict:
        raise DesignError(
            f"certificate fails (max rho_agent={max(cert.rho_agent):.4f}, "
            f"rho_eta={cert.rho_eta:.4f})",
            certificate=cert,
        )
    return design, cert


# ---------------------------------------------------------------------------
# General hold certificate (Schur check plus periodic regulator solution)

@dataclass(frozen=True)
class HoldBlocks:
    """One agent of the hold-function closed loop, in lifted coordinates
    z = [x; xi]: flow dz = F z + G w, jump z+ = M z + Gamma eta."""

    F: np.ndarray
    G: np.ndarray
    M: np.ndarray
    Gamma: np.ndarray
    C_hat: np.ndarray
    Q: np.ndarray
    plant: Plant | None = None
    hold: HoldSpec | None = None


def hold_blocks(plant: Plant, hold: HoldSpec, k1, k2) -> HoldBlocks:
    """Assemble the lifted blocks for one agent: F = [[A, B C_H], [0, A_H]],
    G = [P; 0], M = [[I, 0], [K1, 0]], Gamma = [0; K2], C_hat = [C, 0]."""
    k1 = as_matrix(k1, "K1")
    k2 = as_matrix(k2, "K2")
    n, r, q, p = plant.n, hold.r, plant.q, plant.p
    if k1.shape != (r, n) or k2.shape != (r, q):
        raise DimensionError(
            f"hold-state gains must be {r}x{n} and {r}x{q}"
        )
    f = np.zeros((n + r, n + r))
    f[:n, :n] = plant.A
    f[:n, n:] = plant.B @ hold.C_H
    f[n:, n:] = hold.A_H
    g_blk = np.zeros((n + r, q))
    g_blk[:n, :] = plant.P
    m_blk = np.zeros((n + r, n + r))
    m_blk[:n, :n] = np.eye(n)
    m_blk[n:, :n] = k1
    gam = np.zeros((n + r, q))
    gam[n:, :] = k2
    c_hat = np.zeros((p, n + r))
    c_hat[:, :n] = plant.C
    return HoldBlocks(F=f, G=g_blk, M=m_blk, Gamma=gam, C_hat=c_hat,
                      Q=plant.Q, plant=plant, hold=hold)


PI_GRID_POINTS = 32


def certify_general_hold(blocks, exo: Exosystem, g: LeaderGraph, h: float,
                         mu: float):
    """Certificate for a general hold-function compensator.

    Per agent: checks the spectral separation between M exp(F h) and
    exp(S h), the Schur radius of M exp(F h), solves the periodic
    post-jump regulator value from the discrete matrix equation, and
    reports the worst output-zeroing defect of the periodic regulator
    function over a grid of the sampling interval.  The consensus layer
    is certified exactly as in the zero-order-hold case.

    Returns (certificate, post-jump regulator matrices).
    """
    blocks = list(blocks)
    d = decompose(g)
    e_sh = mat_exp(exo.S, h)
    s_spec = eigenvalues(e_sh)

    rho_agent = []
    residuals = []
    pi_plus = []
    notes = []
    for i, blk in enumerate(blocks, start=1):
        m_hat = blk.M @ mat_exp(blk.F, h)
        m_spec = eigenvalues(m_hat)
        sep = min(abs(a - b) for a in m_spec.values for b in s_spec.values)
        sep_tol = 1e-9 * (1.0 + max(m_spec.radius, s_spec.radius))
        if sep < sep_tol:
            raise PreconditionError(
                f"agent {i}: spectra of M exp(F h) and exp(S h) overlap "
                f"(min distance {sep:.3e}); the periodic regulator equation "
                "is singular"
            )
        notes.append(f"agent {i}: spectral separation {sep:.6g}")
        rho_agent.append(m_spec.radius)
        l_h = exp_convolution(blk.F, blk.G, exo.S, h)
        rhs = blk.Gamma @ e_sh + blk.M @ l_h
        x = solve_discrete_sylvester(m_hat, e_sh, rhs)
        pi_plus.append(x)
        worst = 0.0
        for jgrid in range(1, PI_GRID_POINTS + 1):
            t = h * jgrid / PI_GRID_POINTS
            l_t = exp_convolution(blk.F, blk.G, exo.S, t)
            pi_t = (mat_exp(blk.F, t) @ x + l_t) @ _kernels.expm(-t * exo.S)
            worst = max(worst, max_abs(blk.C_hat @ pi_t + blk.Q))
        residuals.append(worst)

    hold_note = _hold_singularity_note(blocks)
    if hold_note:
        notes.append(hold_note)

    n_f = g.n_followers
    consensus = kron(np.eye(n_f) - mu * d.H, e_sh)
    rho_eta = spectral_radius(consensus)
    mu_paper, mu_exact = _mu_bounds(d)

    plants = [blk.plant for blk in blocks]
    if all(p is not None for p in plants):
        report = check_assumptions(plants, exo, g, h)
        assumptions = report.as_dict()
        all_pass = report.all_pass
    else:
        s_min_re = min(float(v.real) for v in eigenvalues(exo.S).values)
        assumptions = {"A1": s_min_re >= -1e-10, "A2": root_reachable(g),
                       "A3": True, "A4": True}
        all_pass = all(assumptions.values())
        notes.append("A3/A4 not derivable from lifted blocks alone; "
                     "attach plants for the full check")

    verdict = (all_pass and max(rho_agent) < 1.0 and rho_eta < 1.0
               and max(residuals) <= REGULATOR_RESIDUAL_TOL)
    cert = Certificate(
        verdict=bool(verdict),
        rho_agent=tuple(float(r) for r in rho_agent),
        rho_eta=float(rho_eta),
        residuals=tuple(float(r) for r in residuals),
        assumptions=assumptions,
        mu=float(mu),
        mu_paper_bound=mu_paper,
        mu_exact_bound=mu_exact,
        h=float(h),
        notes=tuple(notes),
    )
    return cert, pi_plus


def _hold_singularity_note(blocks):
    # A singular A_H contradicts the nonsingularity the general hold shape
    # nominally requires, but the zero-order hold itself has A_H = 0;
    # permitted, flagged.
    for i, blk in enumerate(blocks, start=1):
        if blk.hold is None:
            continue
        spec = eigenvalues(blk.hold.A_H)
        if min(abs(v) for v in spec.values) < 1e-12 * (1.0 + spec.radius):
            kind = "zero-order hold" if blk.hold.is_zoh else "general hold"
            return (f"agent {i}: hold matrix A_H is singular ({kind}); "
                    "permitted, noted for the record")
    return None


def closed_loop_jump_matrix(design: CompensatorDesign, plants,
                            exo: Exosystem, g: LeaderGraph) -> np.ndarray:
    """The stacked jump-to-jump matrix of the networked loop over
    [x; xi; eta]; its spectrum splits into the per-agent blocks plus the
    consensus block, which is what the certificate checks."""
    plants = list(plants)
    d = decompose(g)
    n_f = g.n_followers
    q = exo.q
    a_blocks, b_blocks = [], []
    for plant in plants:
        a_d, b_d, _ = discretize(plant, exo, design.h)
        a_blocks.append(a_d)
        b_blocks.append(b_d)
    a_t = _blockdiag(a_blocks)
    b_t = _blockdiag(b_blocks)
    k1_t = _blockdiag(design.K1)
    k2_t = _blockdiag(design.K2)
    s_t = kron(np.eye(n_f), mat_exp(exo.S, design.h))
    j_mu = np.eye(n_f * q) - design.mu * kron(d.H, np.eye(q))
    nx = a_t.shape[0]
    nxi = k1_t.shape[0]
    neta = n_f * q
    m2 = np.zeros((nx + nxi + neta, nx + nxi + neta))
    m2[:nx, :nx] = a_t + b_t @ k1_t
    m2[:nx, nx + nxi:] = b_t @ k2_t @ j_mu
    m2[nx:nx + nxi, :nx] = k1_t
    m2[nx:nx + nxi, nx + nxi:] = k2_t @ j_mu
    m2[nx + nxi:, nx + nxi:] = s_t @ j_mu
    return m2


def _blockdiag(mats):
    mats = [np.atleast_2d(m) for m in mats]
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out
