"""Independent oracles and generators shared across the test suite.

Everything here deliberately avoids the library's own computational paths:
truncated power series for the exponential, composite Simpson quadrature
for the convolution integral, classic RK4 for flows, power iteration for
the top singular value, and numpy's LAPACK bindings where a second
eigenvalue opinion is wanted.
"""

import numpy as np

from coreg import LeaderGraph, Plant, Exosystem
from coreg.linalg import solve_sylvester


def taylor_expm(a: np.ndarray, t: float = 1.0, terms: int = 40) -> np.ndarray:
    """Truncated power-series exponential: sum_k (A t)^k / k!."""
    n = a.shape[0]
    acc = np.eye(n)
    term = np.eye(n)
    at = a * t
    for k in range(1, terms + 1):
        term = term @ at / k
        acc = acc + term
    return acc


def simpson_convolution(f, g, s, h, panels=10_000) -> np.ndarray:
    """Composite-Simpson quadrature of exp(F(h-x)) G exp(Sx) over (0, h).

    Node exponentials are built incrementally from one small-step Taylor
    exponential, so the oracle never touches the library's expm.
    """
    m = 2 * panels
    dt = h / m
    n = f.shape[0]
    q = s.shape[0]
    step_f = taylor_expm(f, dt, terms=25)
    step_s = taylor_expm(s, dt, terms=25)
    powers_f = np.empty((m + 1, n, n))
    powers_f[0] = np.eye(n)
    for j in range(m):
        powers_f[j + 1] = powers_f[j] @ step_f
    e_s = np.eye(q)
    acc = np.zeros((n, q))
    for j in range(m + 1):
        w = 1.0 if j in (0, m) else (4.0 if j % 2 == 1 else 2.0)
        acc += w * (powers_f[m - j] @ g @ e_s)
        if j < m:
            e_s = e_s @ step_s
    return acc * (dt / 3.0)


def rk4_linear(m: np.ndarray, v0: np.ndarray, t: float,
               steps: int = 1000) -> np.ndarray:
    """Classic fixed-step RK4 for dv = M v."""
    dt = t / steps
    v = v0.astype(float).copy()
    for _ in range(steps):
        k1 = m @ v
        k2 = m @ (v + 0.5 * dt * k1)
        k3 = m @ (v + 0.5 * dt * k2)
        k4 = m @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def power_iteration_sigma(a: np.ndarray, iters: int = 5000) -> float:
    """Top singular value by power iteration on A^T A."""
    gram = a.T @ a
    v = np.ones(gram.shape[0])
    v[0] += 1e-3  # break symmetry
    v /= np.sqrt(v @ v)
    for _ in range(iters):
        w = gram @ v
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(np.sqrt(v @ gram @ v))


def kron_index_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct index-formula Kronecker product: out[p i + k, q j + l] =
    a[i, j] b[k, l]."""
    n, m = a.shape
    p, q = b.shape
    out = np.zeros((n * p, m * q))
    for i in range(n):
        for j in range(m):
            for k in range(p):
                for l in range(q):
                    out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def match_moduli(vals_a, vals_b) -> float:
    """Largest gap between the sorted modulus multisets."""
    ma = np.sort(np.abs(np.asarray(vals_a, dtype=complex)))
    mb = np.sort(np.abs(np.asarray(vals_b, dtype=complex)))
    assert ma.size == mb.size
    return float(np.abs(ma - mb).max())


def match_complex(vals_a, vals_b) -> float:
    """Largest distance under greedy nearest pairing of two complex
    multisets."""
    rem = list(np.asarray(vals_b, dtype=complex))
    worst = 0.0
    for v in np.asarray(vals_a, dtype=complex):
        dists = [abs(v - r) for r in rem]
        i = int(np.argmin(dists))
        worst = max(worst, dists[i])
        rem.pop(i)
    return worst


def random_rooted_graph(rng, n_max=8, directed=None) -> LeaderGraph:
    """Random leader graph whose followers all hang off a random tree
    rooted at node 0, plus a few extra edges."""
    n = int(rng.integers(1, n_max + 1))
    if directed is None:
        directed = bool(rng.integers(0, 2))
    adj = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        parent = int(rng.integers(0, i))
        adj[i, parent] = rng.uniform(0.5, 1.5)
        if not directed and parent != 0:
            adj[parent, i] = adj[i, parent]
    extra = int(rng.integers(0, n + 1))
    for _ in range(extra):
        i = int(rng.integers(1, n + 1))
        j = int(rng.integers(0, n + 1))
        if i == j:
            continue
        w = rng.uniform(0.5, 1.5)
        adj[i, j] = w
        if not directed and j != 0:
            adj[j, i] = w
    return LeaderGraph(adjacency=adj, directed=directed)


def random_plant(rng, exo: Exosystem, n_max=3) -> Plant:
    """Random controllable plant with Q chosen so the regulator pair is
    solvable (Q = -C Pi for the Sylvester solution Pi)."""
    q = exo.q
    for _ in range(200):
        n = int(rng.integers(1, n_max + 1))
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, 1))
        ctrb = np.hstack([np.linalg.matrix_power(a, k) @ b for k in range(n)])
        if np.linalg.matrix_rank(ctrb) < n:
            continue
        sep = min(abs(la - ls) for la in np.linalg.eigvals(a)
                  for ls in np.linalg.eigvals(exo.S))
        if sep < 1e-2:
            continue
        p = rng.standard_normal((n, q))
        c = rng.standard_normal((1, n))
        pi = solve_sylvester(a, exo.S, p)
        return Plant(A=a, B=b, C=c, P=p, Q=-(c @ pi))
    raise RuntimeError("could not draw a controllable plant")


def random_oscillator(rng) -> Exosystem:
    omega = float(rng.uniform(0.5, 3.0))
    s = np.array([[0.0, -omega], [omega, 0.0]])
    return Exosystem(S=s, w0=np.array([1.0, 0.0]))
