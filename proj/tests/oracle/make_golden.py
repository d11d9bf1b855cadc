"""Independent numpy/scipy reference values for the C++ tests.

Everything here is built from the kinematical definitions (group averaging,
reduction maps as compressions of the physical projector) rather than the
closed forms used in the library. Run from the repo root:

    python3 tests/oracle/make_golden.py > tests/data/golden.json
"""
import itertools
import json

import numpy as np
from scipy.linalg import expm, logm, null_space

rng = np.random.default_rng(20261016)


def cm(m):
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def cv(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


# ---- groups ------------------------------------------------------------------

def elements(factors):
    return list(itertools.product(*[range(n) for n in factors]))


def regular(factors, g):
    els = elements(factors)
    idx = {e: k for k, e in enumerate(els)}
    m = np.zeros((len(els), len(els)))
    for h in els:
        gh = tuple((a + b) % n for a, b, n in zip(g, h, factors))
        m[idx[gh], idx[h]] = 1
    return m


def rep_tensor_power(factors, g, m):
    """Regular rep of a cyclic group on m copies, for qubit-style tests."""
    out = np.eye(1)
    for _ in range(m):
        out = np.kron(out, regular(factors, g))
    return out


class Setup:
    def __init__(self, factors, m=None):
        self.factors = factors
        self.els = elements(factors)
        self.N = len(self.els)
        self.m = m
        self.US = [regular(factors, g) if m is None else rep_tensor_power(factors, g, m) for g in self.els]
        self.dS = self.US[0].shape[0]

    def idx(self, g):
        return self.els.index(g)

    def pi_phys(self):
        acc = 0
        for k, g in enumerate(self.els):
            u = regular(self.factors, g)
            acc = acc + np.kron(np.kron(u, u), self.US[k])
        return acc / self.N

    def R(self, i, g):
        N, d = self.N, self.dS
        bra = np.zeros((1, N))
        bra[0, g] = 1
        if i == 1:
            proj = np.kron(bra, np.eye(N * d))
        else:
            proj = np.kron(np.kron(np.eye(N), bra), np.eye(d))
        return np.sqrt(N) * proj @ self.pi_phys()

    def V(self, i, gi, gj):
        j = 2 if i == 1 else 1
        return self.R(j, gj) @ self.R(i, gi).conj().T


def fixed_dim(W):
    d = W.shape[0]
    sup = np.kron(W.conj(), W) - np.eye(d * d)
    return null_space(sup, rcond=1e-10).shape[1]


def fixed_dim_joint(Ws):
    d = Ws[0].shape[0]
    sup = np.vstack([np.kron(W.conj(), W) - np.eye(d * d) for W in Ws])
    return null_space(sup, rcond=1e-10).shape[1]


sx = np.array([[0, 1], [1, 0]], dtype=complex)
sy = np.array([[0, -1j], [1j, 0]])
sz = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def ptr_first(m, d1, d2):
    return np.einsum("ajak->jk", m.reshape(d1, d2, d1, d2))


def ptr_second(m, d1, d2):
    return np.einsum("ajbj->ab", m.reshape(d1, d2, d1, d2))


def vn(rho):
    p = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    p = p[p > 1e-12]
    return float(max(0.0, -np.sum(p * np.log(p))))


def renyi(rho, a):
    p = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    p = p[p > 1e-12]
    return float(max(0.0, np.log(np.sum(p ** a)) / (1 - a)))


def rand_herm(d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def rand_rho(d, rank=None):
    rank = rank or d
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = a @ a.conj().T
    return r / np.trace(r).real


out = {}

# ---- group -----------------------------------------------------------------
f23 = [2, 3]
e23 = elements(f23)
out["group"] = {
    "z2z3_mul": [[e23.index(tuple((a + b) % n for a, b, n in zip(g, h, f23))) for h in e23] for g in e23],
    "z2z3_inv": [e23.index(tuple((-a) % n for a, n in zip(g, f23))) for g in e23],
    "z4_characters": cm([[np.exp(2j * np.pi * k * g / 4) for g in range(4)] for k in range(4)]),
}

# ---- maps ------------------------------------------------------------------
maps = []
for name, factors, m in [("z2", [2], None), ("z3", [3], None), ("z2z2", [2, 2], None), ("z2_tp2", [2], 2)]:
    s = Setup(factors, m)
    P = s.pi_phys()
    entry = {"name": name, "rank": int(np.linalg.matrix_rank(P, tol=1e-9)), "V": []}
    for i in (1, 2):
        for gi, gj in [(0, 0), (1, s.N - 1)]:
            entry["V"].append({"i": i, "gi": gi, "gj": gj, "matrix": cm(s.V(i, gi, gj))})
    entry["R1_0"] = cm(s.R(1, 0))
    maps.append(entry)
out["maps"] = maps

# ---- tps -------------------------------------------------------------------
s3 = Setup([2])  # three qubits: two frame qubits and one S qubit
U = s3.V(1, 0, 0)
Xid = np.eye(4)
Xsx = np.kron(I2, sx)
tps = {
    "three_qubit_dim_A1": fixed_dim(Xid @ U),
    "three_qubit_dim_A1sx": fixed_dim(Xsx @ U),
    "three_qubit_dim_cap": fixed_dim_joint([Xid @ U, Xsx @ U]),
    "cases": [],
}
for name, factors, m in [("z3", [3], None), ("z2z2", [2, 2], None)]:
    s = Setup(factors, m)
    for gi, gj in [(0, 0), (1, 2 % s.N)]:
        W = s.V(1, gi, gj)
        tps["cases"].append({"name": name, "gi": gi, "gj": gj, "dim_identity_X": fixed_dim(W)})
out["tps"] = tps

# ---- states ----------------------------------------------------------------
# W state on n=N-2 system qubits with frame qubit in a|0> + b|1>, perspective 1
# to perspective 2 at trivial orientations.
st = {}
for Nq, a, b in [(5, 1 / np.sqrt(2), 1 / np.sqrt(2)), (5, 0.0, 1.0), (5, 1.0, 0.0), (4, 0.6, 0.8)]:
    n = Nq - 2
    s = Setup([2], n)
    w = np.zeros(2 ** n)
    for k in range(n):
        w[1 << (n - 1 - k)] = 1
    w /= np.linalg.norm(w)
    psi = np.kron(np.array([a, b]), w)
    V = s.V(1, 0, 0)
    psi2 = V @ psi
    r1 = ptr_first(np.outer(psi, psi.conj()), 2, 2 ** n)
    r2 = ptr_first(np.outer(psi2, psi2.conj()), 2, 2 ** n)
    st.setdefault("w_state", []).append({
        "N": Nq, "a": a, "b": b,
        "S_i": vn(r1), "S_j": vn(r2),
        "renyi_j": {str(al): renyi(r2, al) for al in (0.5, 2.0, 3.0)},
    })
r = rand_rho(4)
sg = rand_rho(4)
st["relative_entropy"] = {"rho": cm(r), "sigma": cm(sg),
                          "value": float(np.trace(r @ (logm(r) - logm(sg))).real)}
st["random_rho"] = {"rho": cm(r), "S": vn(r), "renyi": {str(al): renyi(r, al) for al in (0.5, 2.0, 3.0)}}
h = rand_herm(3)
w_, v_ = np.linalg.eigh(h)
st["gibbs"] = {"h": cm(h), "beta": 0.7, "rho": cm(expm(-0.7 * h) / np.trace(expm(-0.7 * h)))}
out["states"] = st

# ---- thermo ----------------------------------------------------------------
n, d = 2, 4
H = rand_herm(8)
rho = rand_rho(8)
c = np.trace(H) / 8
hf = ptr_second(H, n, d) / d - 0.5 * c * np.eye(n)
hs = ptr_first(H, n, d) / n - 0.5 * c * np.eye(d)
hint = H - np.kron(hf, np.eye(d)) - np.kron(np.eye(n), hs)
rho_dot = -1j * (H @ rho - rho @ H)


def induced(rf, rs):
    t_s = ptr_first(hint @ np.kron(rf, np.eye(d)), n, d)
    t_f = ptr_second(hint @ np.kron(np.eye(n), rs), n, d)
    return t_f, t_s


def energetics(rho, alpha):
    rf, rs = ptr_second(rho, n, d), ptr_first(rho, n, d)
    rf_d, rs_d = ptr_second(rho_dot, n, d), ptr_first(rho_dot, n, d)
    tf, ts = induced(rf, rs)
    tf_d = ptr_second(hint @ np.kron(np.eye(n), rs_d), n, d)
    ts_d = ptr_first(hint @ np.kron(rf_d, np.eye(d)), n, d)
    bind = np.trace(hint @ np.kron(rf, rs)).real
    bind_d = np.trace(hint @ (np.kron(rf_d, rs) + np.kron(rf, rs_d))).real
    if alpha is None:
        def proj(h0, f):
            _, vecs = np.linalg.eigh(h0)
            return vecs @ np.diag(np.diag(vecs.conj().T @ f @ vecs)) @ vecs.conj().T
        hs_eff, hf_eff = hs + proj(hs, ts), hf + proj(hf, tf)
        hs_dot, hf_dot = proj(hs, ts_d), proj(hf, tf_d)
    else:
        hs_eff = hs + ts - alpha * bind * np.eye(d)
        hf_eff = hf + tf - (1 - alpha) * bind * np.eye(n)
        hs_dot = ts_d - alpha * bind_d * np.eye(d)
        hf_dot = tf_d - (1 - alpha) * bind_d * np.eye(n)
    tr = lambda a, b: float(np.trace(a @ b).real)
    estar_s = float((-1j * np.trace(hs_eff @ ((hs + ts) @ rs - rs @ (hs + ts)))).real)
    return {
        "E_s": tr(hs_eff, rs), "E_frame": tr(hf_eff, rf),
        "qdot_s": tr(hs_eff, rs_d), "wdot_s": tr(hs_dot, rs),
        "qdot_frame": tr(hf_eff, rf_d), "wdot_frame": tr(hf_dot, rf),
        "estar_s": estar_s,
    }


out["thermo"] = {
    "H": cm(H), "rho": cm(rho), "n": n, "d": d,
    "h_frame": cm(hf), "h_s": cm(hs), "h_int": cm(hint),
    "split_alpha_0.3": energetics(rho, 0.3),
    "commuting_part": energetics(rho, None),
}
# entropy balance from a product state
rf0, rs0 = rand_rho(n), rand_rho(d)
rho0 = np.kron(rf0, rs0)
Ut = expm(-1j * 0.7 * H)
rt = Ut @ rho0 @ Ut.conj().T
mi = vn(ptr_second(rt, n, d)) + vn(ptr_first(rt, n, d)) - vn(rt)
rf_t = ptr_second(rt, n, d)
rel = float(np.trace(rf_t @ (logm(rf_t) - logm(rf0))).real)
out["thermo"]["balance"] = {
    "rho0": cm(rho0), "rho_t": cm(rt),
    "sigma": mi + rel, "phi": vn(rf_t) - vn(rf0) + rel,
    "delta_S_s": vn(ptr_first(rt, n, d)) - vn(rs0),
}

# ---- dynamics --------------------------------------------------------------
s2 = Setup([2], 2)
V = s2.V(1, 0, 0)
out["dynamics"] = {
    "H_new": cm(V @ H @ V.conj().T),
    "h_tilde_s": cm(ptr_first(hint @ np.kron(ptr_second(rho, n, d), np.eye(d)), n, d)),
}

print(json.dumps(out, indent=1))
