"""Discrete-time linear state-space model type and discretization helpers."""
import numpy as np


class ModelError(ValueError):
    pass


def _as2d(M, rows=None, cols=None):
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and A.shape[0] != rows and A.shape[1] == rows:
        A = A.T
    return A


class DiscreteStateSpace:
    """x_{k+1} = A x_k + B u_k + G w_k,   y_k = C x_k + F v_k.

    Small dense matrices only (n <= 8 in every scenario here).  Q and R are
    the process/measurement noise covariances; Ts is the sample time.
    Instances are immutable by convention -- share freely.
    """

    def __init__(self, A, B, C, G=None, F=None, Q=None, R=None, Ts=1.0):
        self.A = _as2d(A)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ModelError("A must be square")
        self.B = _as2d(B, rows=n)
        self.C = _as2d(C, cols=n)
        if self.C.shape[1] != n:
            raise ModelError("C column count must match state dimension")
        p = self.C.shape[0]
        self.G = _as2d(G, rows=n) if G is not None else np.zeros((n, 1))
        self.F = _as2d(F) if F is not None else np.eye(p)
        q = self.G.shape[1]
        self.Q = _as2d(Q) if Q is not None else np.zeros((q, q))
        self.R = _as2d(R) if R is not None else np.zeros((p, p))
        self.Ts = float(Ts)
        self._validate()

    def _validate(self):
        n = self.A.shape[0]
        p = self.C.shape[0]
        q = self.G.shape[1]
        if self.B.shape[0] != n:
            raise ModelError("B row count must match state dimension")
        if self.G.shape[0] != n:
            raise ModelError("G row count must match state dimension")
        if self.F.shape != (p, p):
            raise ModelError("F must be p x p")
        if self.Q.shape != (q, q):
            raise ModelError("Q must be q x q")
        if self.R.shape != (p, p):
            raise ModelError("R must be p x p")
        for name in ("Q", "R"):
            M = getattr(self, name)
            if not np.allclose(M, M.T, atol=1e-12):
                raise ModelError(f"{name} must be symmetric")
            if M.size and np.linalg.eigvalsh(M).min() < -1e-12:
                raise ModelError(f"{name} must be positive semidefinite")
        if not self.Ts > 0.0:
            raise ModelError("Ts must be positive")

    @property
    def n(self):
        return self.A.shape[0]

    def replace(self, **kw):
        fields = dict(A=self.A, B=self.B, C=self.C, G=self.G, F=self.F,
                      Q=self.Q, R=self.R, Ts=self.Ts)
        fields.update(kw)
        return DiscreteStateSpace(**fields)

    def __repr__(self):
        return (f"DiscreteStateSpace(n={self.n}, m={self.B.shape[1]}, "
                f"p={self.C.shape[0]}, Ts={self.Ts})")


def simulate(model, x0, u_seq, noise_seed=None):
    """Iterate the recursion; returns (states, outputs) with states[0] = x0.

    With noise_seed given, w_k and v_k are drawn from independent seeded
    streams with covariances Q and R; otherwise both are zero.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != model.n:
        raise ModelError("x0 dimension mismatch")
    U = np.asarray(u_seq, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape[0] == 0:
        raise ModelError("input sequence is empty")
    if U.shape[1] != model.B.shape[1]:
        raise ModelError("input dimension mismatch")
    N = U.shape[0]
    p = model.C.shape[0]
    q = model.G.shape[1]
    if noise_seed is not None:
        kids = np.random.SeedSequence(noise_seed).spawn(2)
        gw = np.random.Generator(np.random.PCG64(kids[0]))
        gv = np.random.Generator(np.random.PCG64(kids[1]))
        W = gw.standard_normal((N, q)) @ _factor(model.Q).T
        V = gv.standard_normal((N, p)) @ _factor(model.R).T
    else:
        W = np.zeros((N, q))
        V = np.zeros((N, p))
    xs = np.empty((N, model.n))
    ys = np.empty((N, p))
    for k in range(N):
        xs[k] = x
        ys[k] = model.C @ x + model.F @ V[k]
        x = model.A @ x + model.B @ U[k] + model.G @ W[k]
    return xs, ys


def _factor(M):
    # PSD square root; tolerates exactly-singular covariances
    if not M.size or not M.any():
        return np.zeros_like(M)
    vals, vecs = np.linalg.eigh(M)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def expm(M, rtol=1e-12):
    """Matrix exponential by scaling-and-squaring of the Taylor series.

    Truncation continues until the next term is below rtol relative to the
    running sum, with extra headroom for the squaring stage.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    nrm = np.linalg.norm(M, 1)
    s = 0
    if nrm > 0.5:
        s = int(np.ceil(np.log2(nrm / 0.5)))
    A = M / (2.0 ** s)
    X = np.eye(n)
    term = np.eye(n)
    k = 1
    inner = rtol * 1e-4
    while k < 100:
        term = term @ A / k
        X = X + term
        if np.linalg.norm(term, 1) <= inner * np.linalg.norm(X, 1):
            break
        k += 1
    for _ in range(s):
        X = X @ X
    return X


def discretize_zoh(Ac, Bc, Ts):
    """Zero-order-hold discretization via the augmented-matrix exponential."""
    if not Ts > 0.0:
        raise ModelError("Ts must be positive")
    Ac = _as2d(Ac)
    n = Ac.shape[0]
    Bc = _as2d(Bc, rows=n)
    m = Bc.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Ac * Ts
    aug[:n, n:] = Bc * Ts
    E = expm(aug)
    return E[:n, :n], E[:n, n:]
