"""Exact flow/jump simulation of the networked sampled-data loop.

Between samples every state flows under one constant linear vector field,
so propagation is a single matrix exponential per step size - there is no
integration error.  At each sample instant the hold and compensator
states reset; plant states and the exogenous signal are continuous across
jumps.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import LeaderGraph, decompose
from .linalg import DimensionError, as_vector, kron
from .regulator import (CompensatorDesign, DesignError, Exosystem, HoldSpec,
                        certify_general_hold, certify_zoh, hold_blocks)

DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """State magnitude passed the divergence guard; carries the trace so far."""

    def __init__(self, message, trace=None, last_state=None):
        super().__init__(message)
        self.trace = trace
        self.last_state = last_state


@dataclass(frozen=True)
class NetworkState:
    """Snapshot of the closed loop: per-agent plant states x, hold states
    xi, local exosystem estimates eta, plus the shared exogenous w."""

    x: tuple
    xi: tuple
    eta: tuple
    w: np.ndarray
    t: float


@dataclass(frozen=True)
class TraceRecord:
    t: float
    phase: str  # flow | pre_jump | post_jump
    state: NetworkState
    errors: tuple  # per-agent e_i = C_i x_i + Q_i w


@dataclass
class HybridTrace:
    h: float
    substeps: int
    records: list

    @property
    def t_end(self):
        return self.records[-1].t if self.records else 0.0

    def pre_jump_records(self):
        return [r for r in self.records if r.phase == "pre_jump"]

    def eta_distances(self):
        """||eta - 1 (x) w|| at every pre-jump instant."""
        out = []
        for r in self.pre_jump_records():
            diff = np.concatenate([e - r.state.w for e in r.state.eta])
            out.append(float(np.sqrt(np.dot(diff, diff))))
        return out

    def max_error_series(self):
        """(t, max_i |e_i|) over every record."""
        return [(r.t, max(float(np.abs(e).max()) for e in r.errors))
                for r in self.records]

    def write_csv(self, fh):
        """One row per scalar: t,phase,agent,component,value with
        17-significant-digit decimals; w rows carry agent 0."""
        fh.write("t,phase,agent,component,value\n")
        for r in self.records:
            t_txt = format(r.t, ".17g")
            for i, (x, xi, eta, e) in enumerate(
                    zip(r.state.x, r.state.xi, r.state.eta, r.errors),
                    start=1):
                for label, vec in (("x", x), ("xi", xi), ("eta", eta), ("e", e)):
                    for j, v in enumerate(vec, start=1):
                        fh.write(f"{t_txt},{r.phase},{i},{label}{j},"
                                 f"{format(v, '.17g')}\n")
            for j, v in enumerate(r.state.w, start=1):
                fh.write(f"{t_txt},{r.phase},0,w{j},{format(v, '.17g')}\n")


def _dims(plants, hold: HoldSpec, exo: Exosystem):
    ns = [p.n for p in plants]
    return ns, hold.r, exo.q


def build_flow_matrix(plants, exo: Exosystem, hold: HoldSpec) -> np.ndarray:
    """Constant flow matrix over the stacked state
    [x_1..x_N | xi_1..xi_N | eta_1..eta_N | w]."""
    plants = list(plants)
    ns, r, q = _dims(plants, hold, exo)
    n_agents = len(plants)
    nx = sum(ns)
    dim = nx + n_agents * r + n_agents * q + q
    m = np.zeros((dim, dim))
    ox = 0
    oxi = nx
    oeta = nx + n_agents * r
    ow = oeta + n_agents * q
    for i, plant in enumerate(plants):
        n = plant.n
        m[ox:ox + n, ox:ox + n] = plant.A
        m[ox:ox + n, oxi + i * r:oxi + (i + 1) * r] = plant.B @ hold.C_H
        m[ox:ox + n, ow:] = plant.P
        m[oxi + i * r:oxi + (i + 1) * r, oxi + i * r:oxi + (i + 1) * r] = hold.A_H
        m[oeta + i * q:oeta + (i + 1) * q, oeta + i * q:oeta + (i + 1) * q] = exo.S
        ox += n
    m[ow:, ow:] = exo.S
    return m


def _stack(state: NetworkState) -> np.ndarray:
    return np.concatenate(list(state.x) + list(state.xi) + list(state.eta)
                          + [state.w])


def _unstack(v: np.ndarray, ns, r, q, t) -> NetworkState:
    n_agents = len(ns)
    xs, o = [], 0
    for n in ns:
        xs.append(v[o:o + n].copy())
        o += n
    xis = [v[o + i * r:o + (i + 1) * r].copy() for i in range(n_agents)]
    o += n_agents * r
    etas = [v[o + i * q:o + (i + 1) * q].copy() for i in range(n_agents)]
    o += n_agents * q
    return NetworkState(x=tuple(xs), xi=tuple(xis), eta=tuple(etas),
                        w=v[o:].copy(), t=t)


def flow(state: NetworkState, plants, exo: Exosystem, hold: HoldSpec,
         dt: float) -> NetworkState:
    """Propagate the stacked loop by dt with one matrix exponential."""
    if not (0.0 < dt and math.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    plants = list(plants)
    ns, r, q = _dims(plants, hold, exo)
    m = build_flow_matrix(plants, exo, hold)
    v = _kernels.expm(m * dt) @ _stack(state)
    return _unstack(v, ns, r, q, state.t + dt)


def jump(state: NetworkState, design: CompensatorDesign,
         g: LeaderGraph) -> NetworkState:
    """Sample-instant reset: xi_i+ = K1_i x_i + K2_i eta_i and the stacked
    consensus update eta+ = (I - mu (H (x) I)) eta + mu (Delta (x) I) (1 (x) w);
    x and w are continuous across the jump."""
    d = decompose(g)
    q = state.w.size
    n_agents = len(state.x)
    if n_agents != g.n_followers or n_agents != design.n_agents:
        raise DimensionError("state/design/graph agent counts disagree")
    xi_new = tuple(design.K1[i] @ state.x[i] + design.K2[i] @ state.eta[i]
                   for i in range(n_agents))
    eta_stack = np.concatenate(list(state.eta))
    j_mu = np.eye(n_agents * q) - design.mu * kron(d.H, np.eye(q))
    drive = design.mu * (kron(d.Delta, np.eye(q)) @ np.tile(state.w, n_agents))
    eta_post = j_mu @ eta_stack + drive
    eta_new = tuple(eta_post[i * q:(i + 1) * q].copy() for i in range(n_agents))
    return NetworkState(x=tuple(x.copy() for x in state.x), xi=xi_new,
                        eta=eta_new, w=state.w.copy(), t=state.t)


def _errors(state: NetworkState, plants) -> tuple:
    return tuple(plant.C @ x + plant.Q @ state.w
                 for plant, x in zip(plants, state.x))


def _check_divergence(v: np.ndarray, records, h, substeps, last_good):
    if np.abs(v).max() > DIVERGENCE_LIMIT:
        raise DivergenceError(
            f"state magnitude exceeded {DIVERGENCE_LIMIT:.0e}",
            trace=HybridTrace(h=h, substeps=substeps, records=records),
            last_state=last_good,
        )


def simulate(plants, exo: Exosystem, design: CompensatorDesign,
             g: LeaderGraph, x0, eta0, w0, T: float, substeps: int = 1,
             force: bool = False, xi0=None, certificate=None) -> HybridTrace:
    """Alternate exact flow over each sampling interval with the
    compensator jump at every sample instant, starting with a jump at
    t = 0 (the hold state before the first sample defaults to zero).

    Records pre- and post-jump states at every instant plus `substeps - 1`
    interior points per interval.  Unless ``force`` is set, the design
    must carry a passing certificate (supply one to skip recomputing it);
    the horizon is truncated to the sampling grid.
    """
    plants = list(plants)
    if not force:
        cert = certificate
        if cert is None:
            if design.hold.is_zoh:
                cert = certify_zoh(design, plants, exo, g)
            else:
                blocks = [hold_blocks(p, design.hold, k1, k2)
                          for p, k1, k2 in zip(plants, design.K1, design.K2)]
                cert, _ = certify_general_hold(blocks, exo, g, design.h,
                                               design.mu)
        if not cert.verdict:
            raise DesignError("refusing to simulate a design whose "
                              "certificate fails (pass force=True to override)",
                              certificate=cert)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    h = design.h
    n_jumps = int(math.floor(T / h + 1e-9))
    if n_jumps < 1:
        raise ValueError(f"horizon T={T} is shorter than one sampling period")

    ns, r, q = _dims(plants, design.hold, exo)
    n_agents = len(plants)
    w0 = as_vector(w0, "w0")
    x0 = [as_vector(v, "x0") for v in x0]
    eta0 = [as_vector(v, "eta0") for v in eta0]
    if xi0 is None:
        xi0 = [np.zeros(r) for _ in range(n_agents)]
    else:
        xi0 = [as_vector(v, "xi0") for v in xi0]

    m = build_flow_matrix(plants, exo, design.hold)
    e_h = _kernels.expm(m * h)
    e_sub = [_kernels.expm(m * (h * j / substeps))
             for j in range(1, substeps)]

    # jump operators assembled once; the math matches the public jump()
    d = decompose(g)
    j_mu = np.eye(n_agents * q) - design.mu * kron(d.H, np.eye(q))
    drive = design.mu * kron(d.Delta, np.eye(q))

    def _jump(state: NetworkState) -> NetworkState:
        xi_new = tuple(design.K1[i] @ state.x[i] + design.K2[i] @ state.eta[i]
                       for i in range(n_agents))
        eta_post = j_mu @ np.concatenate(state.eta) \
            + drive @ np.tile(state.w, n_agents)
        eta_new = tuple(eta_post[i * q:(i + 1) * q].copy()
                        for i in range(n_agents))
        return NetworkState(x=state.x, xi=xi_new, eta=eta_new, w=state.w,
                            t=state.t)

    state = NetworkState(x=tuple(x0), xi=tuple(xi0), eta=tuple(eta0),
                         w=w0, t=0.0)
    records = [TraceRecord(0.0, "pre_jump", state, _errors(state, plants))]
    post = _jump(state)
    records.append(TraceRecord(0.0, "post_jump", post, _errors(post, plants)))

    for k in range(1, n_jumps + 1):
        base = _stack(post)
        t_prev = (k - 1) * h
        for j, e_j in enumerate(e_sub, start=1):
            v = e_j @ base
            _check_divergence(v, records, h, substeps, post)
            s_j = _unstack(v, ns, r, q, t_prev + h * j / substeps)
            records.append(TraceRecord(s_j.t, "flow", s_j, _errors(s_j, plants)))
        v = e_h @ base
        _check_divergence(v, records, h, substeps, post)
        pre = _unstack(v, ns, r, q, k * h)
        records.append(TraceRecord(pre.t, "pre_jump", pre, _errors(pre, plants)))
        if k == n_jumps:
            break
        post = _jump(pre)
        _check_divergence(_stack(post), records, h, substeps, pre)
        records.append(TraceRecord(post.t, "post_jump", post,
                                   _errors(post, plants)))
    return HybridTrace(h=h, substeps=substeps, records=records)


@dataclass(frozen=True)
class AgentSettling:
    max_tail_error: float
    settle_time: float | None  # None means "never"


@dataclass(frozen=True)
class SettlingReport:
    agents: tuple
    contraction_estimate: float | None

    def to_dict(self):
        return {
            "agents": [
                {"max_tail_error": a.max_tail_error,
                 "settle_time": "never" if a.settle_time is None
                 else a.settle_time}
                for a in self.agents
            ],
            "eta_contraction_per_jump": self.contraction_estimate,
        }


def error_metrics(trace: HybridTrace, threshold: float = 1e-3) -> SettlingReport:
    """Per agent: worst |e_i| over the last 20% of the horizon and the first
    time |e_i| stays below ``threshold`` for good; plus the asymptotic
    per-jump contraction of ||eta - 1 (x) w|| (geometric mean over the last
    20% of jumps)."""
    if not trace.records:
        raise ValueError("empty trace")
    t_end = trace.t_end
    tail_from = 0.8 * t_end
    n_agents = len(trace.records[0].errors)
    agents = []
    for i in range(n_agents):
        tail = [float(np.abs(r.errors[i]).max()) for r in trace.records
                if r.t >= tail_from]
        settle = None
        last_bad = None
        for r in trace.records:
            if float(np.abs(r.errors[i]).max()) >= threshold:
                last_bad = r.t
        if last_bad is None:
            settle = 0.0
        else:
            after = [r.t for r in trace.records if r.t > last_bad]
            settle = min(after) if after else None
        agents.append(AgentSettling(max_tail_error=max(tail),
                                    settle_time=settle))
    dists = trace.eta_distances()
    contraction = None
    if len(dists) >= 3:
        k0 = max(1, int(0.8 * (len(dists) - 1)))
        ratios = []
        for a, b in zip(dists[k0 - 1:-1], dists[k0:]):
            if a > 1e-250 and b > 1e-250:
                ratios.append(b / a)
        if ratios:
            contraction = float(np.exp(np.mean(np.log(ratios))))
    return SettlingReport(agents=tuple(agents),
                          contraction_estimate=contraction)
