"""Parameter-complete builders for the two bundled experiments plus the
sectioned-text scenario config format.

``example41`` is the four-follower harmonic-oscillator tracking network;
``microgrid`` is the hierarchical dispatch example (incremental-cost
consensus over inverter dynamics).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import LeaderGraph
from .hybrid_sim import DIVERGENCE_LIMIT, DivergenceError
from .linalg import (as_matrix, as_vector, exp_convolution, mat_exp,
                     parse_matrix, solve_sylvester)
from .regulator import Exosystem, Plant

# Gains quoted by the worked tracking example; injected instead of
# synthesized so its reproduction does not depend on our LQR choice.
EXAMPLE41_K1 = ((-8.9637, -10.3322, -10.7802),)


@dataclass(frozen=True)
class Scenario:
    """A cooperative-regulation problem instance plus design inputs.
    mu = None defers to the default step-size rule at design time."""

    plants: tuple
    exo: Exosystem
    graph: LeaderGraph
    h: float
    mu: float | None
    k1: tuple | None = None  # reference gains, one matrix per agent


def example_4_1() -> Scenario:
    """The bundled four-agent tracking scenario: identical third-order
    agents, a 2-state oscillator reference, directed topology with two
    leader-connected followers, h = 0.1 s and mu = 0.1.

    Q is constructed as -C Pi from the regulator solution, which makes the
    output equation hold exactly.
    """
    a = np.array([[0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0],
                  [-1.0, 2.0, 3.0]])
    b = np.array([[0.0], [0.0], [1.0]])
    c = np.array([[1.0, 1.0, 1.0]])
    p = np.array([[0.0, 0.0],
                  [0.0, 0.0],
                  [0.0, 1.0]])
    s = np.array([[0.0, -2.0],
                  [2.0, 0.0]])
    pi = solve_sylvester(a, s, p)
    q = -(c @ pi)
    plant = Plant(A=a, B=b, C=c, P=p, Q=q)
    plants = (plant,) * 4

    # adjacency over nodes {0..4}: a_ij > 0 when i receives from j
    adj = np.zeros((5, 5))
    adj[1, 0] = 1.0
    adj[2, 0] = 1.0
    adj[1, 2] = 1.0
    adj[3, 2] = 1.0
    adj[4, 1] = 1.0
    adj[4, 2] = 1.0
    adj[4, 3] = 1.0
    graph = LeaderGraph(adjacency=adj, directed=True)
    exo = Exosystem(S=s, w0=np.array([1.0, 0.0]))
    k1 = tuple(np.array(EXAMPLE41_K1, dtype=float) for _ in range(4))
    return Scenario(plants=plants, exo=exo, graph=graph, h=0.1, mu=0.1, k1=k1)


def random_initial_conditions(scenario: Scenario, seed: int):
    """Seeded standard-normal initial plant states, estimator states and
    exogenous state for a scenario run."""
    rng = np.random.default_rng(seed)
    q = scenario.exo.q
    x0 = [rng.standard_normal(p.n) for p in scenario.plants]
    eta0 = [rng.standard_normal(q) for _ in scenario.plants]
    w0 = rng.standard_normal(q)
    return x0, eta0, w0


# ---------------------------------------------------------------------------
# Micro-grid: incremental-cost consensus over per-MG inverter dynamics

MG_STATE_FIELDS = ("delta", "domega", "dvolt", "p", "q")
SQRT2_HALF = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class MicrogridParams:
    """Cost curves, dispatch network and physical constants for the
    micro-grid experiment.

    alpha/beta are the quadratic incremental-cost coefficients ($/MWh^2,
    $/MWh); a0 is the main-grid access gain per MG; mu are the consensus
    step sizes.  The filter constants, droop and tracking gains are shared
    by all MGs and are not quoted by the source example; the defaults give
    visibly settled traces and are all configurable.
    """

    alpha: np.ndarray
    beta: np.ndarray
    p_r0: np.ndarray
    a0: np.ndarray
    laplacian: np.ndarray
    mu: np.ndarray
    schedule: tuple  # ((t_seconds, MWh), ...)
    dispatch_h: float = 0.01
    tau_p: float = 0.1
    tau_v: float = 0.1
    k_p: float = 0.05
    k_q: float = 0.05
    k1: float = 5.0
    k2: float = 5.0
    omega_d: float = 50.0
    v_d: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "p_r0", "a0", "mu"):
            object.__setattr__(self, name, as_vector(getattr(self, name), name))
        lap = as_matrix(self.laplacian, "laplacian")
        n = self.alpha.size
        if lap.shape != (n, n):
            raise ValueError(f"laplacian must be {n}x{n}")
        if np.abs(lap.sum(axis=1)).max() > 1e-12:
            raise ValueError("laplacian rows must sum to zero")
        if np.any(self.alpha <= 0):
            raise ValueError("alpha entries must be positive")
        for nm in ("tau_p", "tau_v", "k1", "k2"):
            if getattr(self, nm) <= 0:
                raise ValueError(f"{nm} must be positive")
        if self.dispatch_h <= 0:
            raise ValueError("dispatch_h must be positive")
        sched = tuple((float(t), float(v)) for t, v in self.schedule)
        if not sched or sched[0][0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule times must increase")
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "laplacian", lap)

    @property
    def n_mg(self):
        return self.alpha.size

    @classmethod
    def table1(cls, mu_rule: str = "row_normalized", **overrides):
        """The five-MG data set: cost curves, initial dispatch, main-grid
        access on MG 1 only, and the star communication Laplacian.

        ``mu_rule='literal'`` reproduces the quoted step sizes
        sum_j |l_ij| (which destabilize the update); the default uses their
        reciprocals.
        """
        lap = np.array([[4.0, -1, -1, -1, -1],
                        [-1, 1, 0, 0, 0],
                        [-1, 0, 1, 0, 0],
                        [-1, 0, 0, 1, 0],
                        [-1, 0, 0, 0, 1]])
        row_abs = np.abs(lap).sum(axis=1)
        if mu_rule == "row_normalized":
            mu = 1.0 / row_abs
        elif mu_rule == "literal":
            mu = row_abs.copy()
        else:
            raise ValueError(f"unknown mu_rule {mu_rule!r}")
        base = dict(
            alpha=np.array([561.0, 310.0, 78.0, 561.0, 78.0]),
            beta=np.array([7.92, 7.85, 7.8, 7.92, 7.8]),
            p_r0=np.array([200.0, 150.0, 100.0, 100.0, 100.0]),
            a0=np.array([0.0005, 0.0, 0.0, 0.0, 0.0]),
            laplacian=lap,
            mu=mu,
            schedule=((0.0, 650.0), (2.3, 850.0)),
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class DispatchState:
    """Incremental costs and dispatched power; P_r = (Lambda - beta)/alpha
    holds after every update."""

    Lambda: np.ndarray
    P_r: np.ndarray


def initial_dispatch(params: MicrogridParams) -> DispatchState:
    lam = params.alpha * params.p_r0 + params.beta
    return DispatchState(Lambda=lam, P_r=params.p_r0.copy())


def consensus_weights(params: MicrogridParams) -> np.ndarray:
    w = -params.laplacian.copy()
    np.fill_diagonal(w, 0.0)
    return w


def ic_consensus_step(state: DispatchState, params: MicrogridParams,
                      p_main: float) -> DispatchState:
    """One incremental-cost consensus update:
       Lambda_i+ = Lambda_i - (mu_i sum_j a_ij (Lambda_i - Lambda_j)
                               + a_i0 (sum_j P_j^r - p_main))
       P_i^r+    = (Lambda_i+ - beta_i) / alpha_i

    Neighbour terms are summed as weighted differences; operation order
    matches the fused simulation kernel bit for bit.
    """
    n = params.n_mg
    w = consensus_weights(params)
    lam = state.Lambda
    total = 0.0
    for i in range(n):
        total += float(state.P_r[i])
    mismatch = total - p_main
    lam_new = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            if w[i, j] != 0.0:
                s += w[i, j] * (lam[i] - lam[j])
        lam_new[i] = lam[i] - (params.mu[i] * s + params.a0[i] * mismatch)
    p_new = np.empty(n)
    for i in range(n):
        p_new[i] = (lam_new[i] - params.beta[i]) / params.alpha[i]
    return DispatchState(Lambda=lam_new, P_r=p_new)


def dispatch_update_matrix(params: MicrogridParams) -> np.ndarray:
    """Linearization of one consensus update in Lambda (P_r is slaved to
    Lambda); its spectral radius below one is the dispatch-layer
    contraction condition."""
    n = params.n_mg
    return (np.eye(n) - np.diag(params.mu) @ params.laplacian
            - np.outer(params.a0, 1.0 / params.alpha))


def mg_flow_matrix(params: MicrogridParams):
    """Per-MG flow over [delta, domega, dvolt, P, Q] with the held dispatch
    setpoint as input: returns (M, g) with dx = M x + g * P_r."""
    tp, tv = params.tau_p, params.tau_v
    m = np.array([
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0 / tp, 0.0, -params.k_p / tp, 0.0],
        [0.0, 0.0, -1.0 / tv, 0.0, -params.k_q / tv],
        [0.0, 0.0, 0.0, -params.k1, 0.0],
        [0.0, 0.0, 0.0, 0.0, -params.k2],
    ])
    g = np.array([
        0.0,
        SQRT2_HALF * params.k_p / tp,
        SQRT2_HALF * params.k_q / tv,
        SQRT2_HALF * params.k1,
        SQRT2_HALF * params.k2,
    ])
    return m, g


def flow_step_operators(params: MicrogridParams, dt: float):
    """(E, f) with state+ = E @ state + f * P_r over one interval of
    length dt (exact; f is the convolution of the exponential against the
    constant input)."""
    m, g = mg_flow_matrix(params)
    e = mat_exp(m, dt)
    f = exp_convolution(m, g.reshape(-1, 1), np.zeros((1, 1)), dt).reshape(-1)
    return e, f


def equilibrium_state(params: MicrogridParams, p_r) -> np.ndarray:
    """Physical equilibrium for held setpoints: P = Q = sqrt(2)/2 P_r,
    frequency and voltage deviations at zero."""
    p_r = as_vector(p_r, "p_r")
    phys = np.zeros((params.n_mg, 5))
    phys[:, 3] = SQRT2_HALF * p_r
    phys[:, 4] = SQRT2_HALF * p_r
    return phys


def microgrid_flow(phys: np.ndarray, params: MicrogridParams, p_r_held,
                   dt: float) -> np.ndarray:
    """Propagate every MG's physical state exactly over dt with held
    dispatch setpoints."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_r_held = as_vector(p_r_held, "p_r_held")
    e, f = flow_step_operators(params, dt)
    return phys @ e.T + np.outer(p_r_held, f)


@dataclass
class MicrogridTrace:
    params: MicrogridParams
    t: np.ndarray
    Lambda: np.ndarray  # (records, n_mg), values held since the last update
    P_r: np.ndarray
    phys: np.ndarray  # (records, n_mg, 5)
    final: DispatchState
    final_phys: np.ndarray

    @property
    def omega(self):
        return self.params.omega_d + self.phys[:, :, 1]

    @property
    def p(self):
        return self.phys[:, :, 3]

    @property
    def q(self):
        return self.phys[:, :, 4]


def _schedule_steps(params: MicrogridParams):
    vals = np.array([v for _, v in params.schedule])
    steps = np.array(
        [int(math.ceil(t / params.dispatch_h - 1e-9)) for t, _ in params.schedule],
        dtype=np.int64)
    return vals, steps


def run_microgrid(params: MicrogridParams, T: float,
                  record_every: int | None = None) -> MicrogridTrace:
    """Alternate the incremental-cost consensus update at every dispatch
    instant (starting at t = 0) with the exact physical flow between
    instants.  The physical state starts at the equilibrium of the initial
    setpoints.  Records are decimated by ``record_every`` (auto-sized to a
    few thousand rows by default); the final state is always exact.
    """
    n_steps = int(math.floor(T / params.dispatch_h + 1e-9))
    if n_steps < 1:
        raise ValueError("horizon shorter than one dispatch interval")
    if record_every is None:
        record_every = max(1, n_steps // 4000)
    d0 = initial_dispatch(params)
    phys0 = equilibrium_state(params, d0.P_r)
    e, f = flow_step_operators(params, params.dispatch_h)
    vals, steps = _schedule_steps(params)
    # diverging runs are allowed to overflow; the guard below truncates them
    with np.errstate(over="ignore", invalid="ignore"):
        rec_step, rec_lam, rec_pr, rec_phys, lam, pr, phys = \
            _kernels.microgrid_run(
                d0.Lambda, d0.P_r, phys0,
                params.alpha, params.beta, params.a0, params.mu,
                consensus_weights(params), np.ascontiguousarray(e.T), f,
                vals, steps, n_steps, record_every)
    # divergence guard: truncate the records at the first bad row so the
    # partial trace stays usable
    with np.errstate(invalid="ignore"):
        row_mag = np.maximum(np.abs(rec_lam).max(axis=1),
                             np.abs(rec_phys).reshape(rec_phys.shape[0], -1)
                             .max(axis=1))
    bad = ~np.isfinite(row_mag) | (row_mag > DIVERGENCE_LIMIT)
    if bad.any():
        cut = int(np.argmax(bad))
        partial = MicrogridTrace(
            params=params,
            t=rec_step[:cut].astype(float) * params.dispatch_h,
            Lambda=rec_lam[:cut], P_r=rec_pr[:cut], phys=rec_phys[:cut],
            final=DispatchState(Lambda=rec_lam[cut - 1] if cut else d0.Lambda,
                                P_r=rec_pr[cut - 1] if cut else d0.P_r),
            final_phys=rec_phys[cut - 1] if cut else phys0,
        )
        raise DivergenceError(
            f"micro-grid run diverged past {DIVERGENCE_LIMIT:.0e} "
            "(check mu_rule and step sizes)", trace=partial)
    return MicrogridTrace(
        params=params,
        t=rec_step.astype(float) * params.dispatch_h,
        Lambda=rec_lam, P_r=rec_pr, phys=rec_phys,
        final=DispatchState(Lambda=lam, P_r=pr),
        final_phys=phys,
    )


# ---------------------------------------------------------------------------
# Scenario config files: sectioned plain text, matrices in the shared
# text syntax, demand schedule as `t:value` pairs.

class ConfigError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_config_text(text: str) -> dict:
    """Parse `[section]` / `key = value` lines into
    {section: {key: (value, line_no)}}; comments start with '#'."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(lineno, "unterminated section header")
            name = line[1:-1].strip().lower()
            if not name:
                raise ConfigError(lineno, "empty section name")
            if name in sections:
                raise ConfigError(lineno, f"duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if current is None:
            raise ConfigError(lineno, "key before any [section] header")
        if "=" not in line:
            raise ConfigError(lineno, "expected key = value")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        value = value.strip()
        if not key:
            raise ConfigError(lineno, "empty key")
        if key in sections[current]:
            raise ConfigError(lineno, f"duplicate key {key!r} in [{current}]")
        sections[current][key] = (value, lineno)
    if not sections:
        raise ConfigError(1, "empty config")
    return sections


def _take(section: dict, key: str, line_hint: int, required=True,
          default=None):
    if key not in section:
        if required:
            raise ConfigError(line_hint, f"missing required key {key!r}")
        return default, line_hint
    return section[key]


def _as_float(value: str, line: int, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(line, f"{key}: expected a number, got {value!r}") \
            from None


def _as_bool(value: str, line: int, key: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(line, f"{key}: expected true/false, got {value!r}")


def _as_matrix(value: str, line: int, key: str) -> np.ndarray:
    try:
        return parse_matrix(value, key)
    except ValueError as exc:
        raise ConfigError(line, str(exc)) from None


def _as_vector_cfg(value: str, line: int, key: str) -> np.ndarray:
    m = _as_matrix(value, line, key)
    return m.reshape(-1)


def _section_line(sections, name):
    sec = sections[name]
    return min((ln for _, ln in sec.values()), default=1)


def parse_scenario_config(text: str):
    """Returns ("corp", Scenario) or ("microgrid", MicrogridParams)."""
    sections = parse_config_text(text)
    if "microgrid" in sections:
        return "microgrid", _microgrid_from_config(sections)
    return "corp", _corp_from_config(sections)


def _corp_from_config(sections) -> Scenario:
    for required in ("graph", "exosystem"):
        if required not in sections:
            raise ConfigError(1, f"missing [{required}] section")
    gsec = sections["graph"]
    gline = _section_line(sections, "graph")
    adj_txt, aline = _take(gsec, "adjacency", gline)
    adjacency = _as_matrix(adj_txt, aline, "adjacency")
    directed = False
    if "directed" in gsec:
        dv, dline = gsec["directed"]
        directed = _as_bool(dv, dline, "directed")
    try:
        graph = LeaderGraph(adjacency=adjacency, directed=directed)
    except ValueError as exc:
        raise ConfigError(aline, f"adjacency: {exc}") from None

    esec = sections["exosystem"]
    eline = _section_line(sections, "exosystem")
    s_txt, sline = _take(esec, "s", eline)
    s = _as_matrix(s_txt, sline, "S")
    if "w0" in esec:
        w0 = _as_vector_cfg(*esec["w0"], key="w0")
    else:
        w0 = np.eye(s.shape[0])[:, 0]
    try:
        exo = Exosystem(S=s, w0=w0)
    except ValueError as exc:
        raise ConfigError(sline, f"exosystem: {exc}") from None

    n_agents = graph.n_followers
    plants = []
    for i in range(1, n_agents + 1):
        name = f"plant.{i}"
        if name not in sections:
            raise ConfigError(1, f"missing [{name}] section "
                                 f"(graph has {n_agents} followers)")
        psec = sections[name]
        pline = _section_line(sections, name)
        mats = {}
        for key in ("a", "b", "c", "p"):
            txt, ln = _take(psec, key, pline)
            mats[key] = _as_matrix(txt, ln, key.upper())
        if "q" in psec:
            q = _as_matrix(*psec["q"], key="Q")
        else:
            try:
                pi = solve_sylvester(mats["a"], s, mats["p"])
            except Exception as exc:
                raise ConfigError(pline, f"{name}: cannot derive Q: {exc}") \
                    from None
            q = -(mats["c"] @ pi)
        try:
            plants.append(Plant(A=mats["a"], B=mats["b"], C=mats["c"],
                                P=mats["p"], Q=q))
        except ValueError as exc:
            raise ConfigError(pline, f"{name}: {exc}") from None

    h, mu, k1 = 0.1, None, None
    if "design" in sections:
        dsec = sections["design"]
        if "h" in dsec:
            h = _as_float(*dsec["h"], key="h")
        if "mu" in dsec:
            mu = _as_float(*dsec["mu"], key="mu")
        shared = None
        if "k1" in dsec:
            shared = _as_matrix(*dsec["k1"], key="k1")
        per_agent = {}
        for key, (txt, ln) in dsec.items():
            if key.startswith("k1."):
                try:
                    idx = int(key[3:])
                except ValueError:
                    raise ConfigError(ln, f"bad per-agent gain key {key!r}") \
                        from None
                if not 1 <= idx <= n_agents:
                    raise ConfigError(ln, f"{key}: agent index out of range "
                                          f"(1..{n_agents})")
                per_agent[idx] = _as_matrix(txt, ln, key)
        if shared is not None or per_agent:
            k1 = tuple(per_agent.get(i, shared) for i in range(1, n_agents + 1))
            if any(k is None for k in k1):
                raise ConfigError(_section_line(sections, "design"),
                                  "k1 given for some agents only and no "
                                  "shared k1 present")
    return Scenario(plants=tuple(plants), exo=exo, graph=graph,
                    h=h, mu=mu, k1=k1)


_MG_SCALARS = ("dispatch_h", "tau_p", "tau_v", "k_p", "k_q", "k1", "k2",
               "omega_d", "v_d")


def _microgrid_from_config(sections) -> MicrogridParams:
    sec = sections["microgrid"]
    line = _section_line(sections, "microgrid")
    kwargs = {}
    for key in ("alpha", "beta", "p_r0", "a0"):
        txt, ln = _take(sec, key, line)
        kwargs[key] = _as_vector_cfg(txt, ln, key)
    lap_txt, lap_line = _take(sec, "laplacian", line)
    kwargs["laplacian"] = _as_matrix(lap_txt, lap_line, "laplacian")
    row_abs = np.abs(kwargs["laplacian"]).sum(axis=1)
    mu_rule = "row_normalized"
    if "mu_rule" in sec:
        mu_rule, mr_line = sec["mu_rule"]
        if mu_rule not in ("row_normalized", "literal"):
            raise ConfigError(mr_line, f"mu_rule must be row_normalized or "
                                       f"literal, got {mu_rule!r}")
    if "mu" in sec:
        kwargs["mu"] = _as_vector_cfg(*sec["mu"], key="mu")
    elif mu_rule == "literal":
        kwargs["mu"] = row_abs
    else:
        kwargs["mu"] = 1.0 / row_abs
    sched_txt, sched_line = _take(sec, "schedule", line, required=False,
                                  default="0:650 2.3:850")
    schedule = []
    for tok in sched_txt.split():
        if ":" not in tok:
            raise ConfigError(sched_line, f"schedule entry {tok!r} is not "
                                          "t:value")
        t_s, v_s = tok.split(":", 1)
        schedule.append((_as_float(t_s, sched_line, "schedule t"),
                         _as_float(v_s, sched_line, "schedule value")))
    kwargs["schedule"] = tuple(schedule)
    for key in _MG_SCALARS:
        if key in sec:
            kwargs[key] = _as_float(*sec[key], key=key)
    unknown = set(sec) - set(
        ("alpha", "beta", "p_r0", "a0", "laplacian", "mu", "mu_rule",
         "schedule") + _MG_SCALARS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(sec[key][1], f"unknown key {key!r} in [microgrid]")
    try:
        return MicrogridParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(line, str(exc)) from None


def builtin_scenario(name: str):
    if name == "example41":
        return "corp", example_4_1()
    if name == "microgrid":
        return "microgrid", MicrogridParams.table1()
    raise ValueError(f"unknown builtin scenario {name!r} "
                     "(expected example41 or microgrid)")
