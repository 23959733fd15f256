"""Gaussian smoothing of Ising measures and control matrices for annealing.

The smoothing decomposition writes mu_{J,h} as a mixture over z of models
(J - C, h + C z); the mixture index z is x + C^{-1/2} g with x ~ mu and g
standard normal on range(C). Control matrices M1 combine the annealed bulk
coupling with diagonal shifts on the bulk and near-forest interior; their
square roots weight the covariance checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bounds import f_gamma
from .decompose import ExcisionResult, observed_delta
from .graphs import Graph
from .ising import IsingModel, SpinConfig, _advance
from .oracle import ExactOracle, state_spins
from .rng import RngSeed, as_generator

_PSD_TOL = 1e-10


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _psd_eig(C: np.ndarray, what: str = "matrix"):
    C = np.asarray(C, dtype=np.float64)
    w, V = np.linalg.eigh(_sym(C))
    tol = _PSD_TOL * max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -tol:
        raise ValueError(f"{what} is not PSD (lambda_min = {w.min():.3e})")
    return np.maximum(w, 0.0), V, tol


def psd_sqrt(C: np.ndarray, clamp: float = 0.0) -> np.ndarray:
    w, V, _ = _psd_eig(C)
    w = np.maximum(w, clamp)
    return (V * np.sqrt(w)) @ V.T


def psd_pinv(C: np.ndarray) -> np.ndarray:
    w, V, tol = _psd_eig(C)
    inv = np.where(w > tol, 1.0 / np.where(w > tol, w, 1.0), 0.0)
    return (V * inv) @ V.T


@dataclass(frozen=True)
class HSSample:
    z: np.ndarray
    conditional: IsingModel
    support_dim: int


def hs_sample(model: IsingModel, C: np.ndarray, x, rng) -> HSSample:
    """One smoothing draw: z = x + C^{-1/2} g (noise only on range(C)),
    conditional model (J - C, h + C z)."""
    gen = as_generator(rng)
    spins = x.spins if isinstance(x, SpinConfig) else np.asarray(x)
    xf = spins.astype(np.float64)
    w, V, tol = _psd_eig(C, "control matrix")
    sup = w > tol
    z = xf.copy()
    if sup.any():
        g = gen.standard_normal(int(sup.sum()))
        z = z + V[:, sup] @ (g / np.sqrt(w[sup]))
    J = model.dense_coupling()
    cond = IsingModel(J - np.asarray(C, dtype=np.float64),
                      model.h + np.asarray(C) @ z)
    return HSSample(z, cond, int(sup.sum()))


def hs_covariance_identity_check(model: IsingModel, C: np.ndarray,
                                 samples: int = 10 ** 6, seed=None) -> float:
    """Relative residual |Cov_MC(z) - Cov(mu) - C^{-1}| / |Cov(mu) + C^{-1}|.

    Monte Carlo over z-draws against the exact identity; C must be positive
    definite so C^{-1} exists.
    """
    if model.n > 14:
        raise ValueError("identity check capped at 14 spins")
    w, V, tol = _psd_eig(C, "control matrix")
    if w.min() <= tol:
        raise ValueError("C must be positive definite")
    gen = as_generator(seed if seed is not None else RngSeed(0x10c, 0))
    oracle = ExactOracle(model)
    n = model.n
    inv_half = V * (1.0 / np.sqrt(w))
    acc = np.zeros(n)
    acc2 = np.zeros((n, n))
    done = 0
    chunk = 1 << 15
    while done < samples:
        k = min(chunk, samples - done)
        X = oracle.sample(k, gen).astype(np.float64)
        G = gen.standard_normal((k, n))
        Z = X + G @ inv_half.T
        acc += Z.sum(axis=0)
        acc2 += Z.T @ Z
        done += k
    mean = acc / samples
    cov_emp = acc2 / samples - np.outer(mean, mean)
    target = oracle.cov + (V * (1.0 / w)) @ V.T
    return float(np.linalg.norm(cov_emp - target, 2) / np.linalg.norm(target, 2))


@dataclass(frozen=True)
class MixtureCheck:
    mixture_probs: np.ndarray
    target_probs: np.ndarray
    sigma: np.ndarray
    max_sigma_units: float
    passed: bool
    n_draws: int


def mixture_check(model: IsingModel, C: np.ndarray, n_draws: int = 10 ** 6,
                  seed=None, n_batches: int = 20) -> MixtureCheck:
    """Monte Carlo average of conditional tables over z against the exact
    table, with per-state batch-means error bars (pass = within 4 sigma)."""
    if model.n > 14:
        raise ValueError("mixture check capped at 14 spins")
    gen = as_generator(seed if seed is not None else RngSeed(0x317, 0))
    oracle = ExactOracle(model)
    n = model.n
    N = 1 << n
    S = state_spins(np.arange(N), n).astype(np.float64)
    J = model.dense_coupling()
    Cd = np.asarray(C, dtype=np.float64)
    e0 = 0.5 * np.einsum("si,si->s", S @ (J - Cd), S)
    w, V, tol = _psd_eig(Cd, "control matrix")
    sup = w > tol
    inv_half = V[:, sup] * (1.0 / np.sqrt(w[sup]))

    per_batch = n_draws // n_batches
    if per_batch == 0:
        raise ValueError("n_draws must be at least n_batches")
    batch_means = np.empty((n_batches, N))
    inner = 1 << 13
    for b in range(n_batches):
        acc = np.zeros(N)
        done = 0
        while done < per_batch:
            k = min(inner, per_batch - done)
            X = oracle.sample(k, gen).astype(np.float64)
            G = gen.standard_normal((k, int(sup.sum())))
            Z = X + G @ inv_half.T
            F = Z @ Cd + model.h
            logits = e0[None, :] + F @ S.T
            logits -= logits.max(axis=1, keepdims=True)
            P = np.exp(logits)
            P /= P.sum(axis=1, keepdims=True)
            acc += P.sum(axis=0)
            done += k
        batch_means[b] = acc / per_batch
    p_hat = batch_means.mean(axis=0)
    sigma = batch_means.std(axis=0, ddof=1) / np.sqrt(n_batches)
    dev = np.abs(p_hat - oracle.probs)
    units = dev / np.maximum(sigma, 1e-15)
    ok = bool(np.all(dev <= 4.0 * sigma + 1e-12))
    return MixtureCheck(p_hat, oracle.probs, sigma, float(units.max()), ok,
                        n_batches * per_batch)


def _coupling_to_dense(J, n: int) -> np.ndarray:
    if isinstance(J, Graph):
        return J.adjacency(weighted=True).toarray()
    if sp.issparse(J):
        return J.toarray()
    out = np.asarray(J, dtype=np.float64)
    if out.shape != (n, n):
        raise ValueError("coupling shape mismatch")
    return out


def _coupling_to_sparse(J, n: int) -> sp.csr_matrix:
    if isinstance(J, Graph):
        return J.adjacency(weighted=True)
    if sp.issparse(J):
        return J.tocsr()
    return sp.csr_matrix(np.asarray(J, dtype=np.float64))


@dataclass(frozen=True)
class ControlMatrix:
    """M1 = (1-t) J_B + theta I_bulk + (rho/Delta) I_interior, assembled
    sparse; theta = t/2 + (eta + K)/2 and rho = D / (2 f(gamma) (1 + 1/delta'))."""

    matrix: sp.csr_matrix
    t: float
    eta: float
    K: float
    rho: float
    theta: float
    delta_prime: float
    Delta: float
    condition_ok: bool
    bulk_mask: np.ndarray
    interior_mask: np.ndarray

    def sqrt(self) -> np.ndarray:
        if self.matrix.shape[0] > 2000:
            raise ValueError("dense square root capped at 2000 dims")
        return psd_sqrt(self.matrix.toarray())

    def min_eigenvalue(self) -> float:
        from .spectral import smallest_eigenvalue

        return smallest_eigenvalue(self.matrix)


def build_control_matrix(excision: ExcisionResult, J_B, t: float, eta: float,
                         K_target: float, gamma: float, D: float, delta: float,
                         strict: bool = False) -> ControlMatrix:
    """Assemble the annealing control matrix for a decomposition.

    delta is the delta' of the shift formula rho = D/(2 f(gamma) (1+1/delta'));
    the admissibility condition reads K f(gamma) <= 1 - 2 delta'. A violated
    condition warns (or raises when strict), since the matrix itself is still
    well defined.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if delta <= 0:
        raise ValueError("delta must be positive")
    f = f_gamma(gamma, D)
    rho = D / (2.0 * f * (1.0 + 1.0 / delta))
    theta = t / 2.0 + (eta + K_target) / 2.0
    condition_ok = bool(K_target * f <= 1.0 - 2.0 * delta)
    if not condition_ok:
        msg = (f"admissibility violated: K f(gamma) = {K_target * f:.4g} "
               f"> 1 - 2 delta' = {1.0 - 2.0 * delta:.4g}")
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, UserWarning, stacklevel=2)

    n = excision.graph.n
    bulk_mask = excision.bulk.degrees > 0
    h_mask = excision.near_forest.degrees > 0
    boundary_mask = np.zeros(n, dtype=bool)
    boundary_mask[excision.boundary] = True
    interior_mask = h_mask & ~boundary_mask

    if excision.near_forest.m:
        Delta = observed_delta(excision.near_forest, D)[0]
    else:
        Delta = 1.0

    diag = np.zeros(n)
    diag[bulk_mask] = theta
    diag[interior_mask] = rho / Delta
    M = ((1.0 - t) * _coupling_to_sparse(J_B, n) + sp.diags(diag)).tocsr()
    return ControlMatrix(M, float(t), float(eta), float(K_target), float(rho),
                         float(theta), float(delta), float(Delta), condition_ok,
                         bulk_mask, interior_mask)


def standard_field_probes(n: int, rng, extra_gaussians: int = 5,
                          saturate: float = 50.0) -> list[tuple[str, np.ndarray]]:
    """Probe fields for uniform-in-h claims: zero, both saturating constants,
    and random Gaussians. The worst probe at one path time is automatically
    re-examined at the next since the set is fixed."""
    gen = as_generator(rng)
    probes = [("zero", np.zeros(n)),
              ("sat_plus", np.full(n, saturate)),
              ("sat_minus", np.full(n, -saturate))]
    for i in range(extra_gaussians):
        probes.append((f"gauss{i}", gen.standard_normal(n)))
    return probes


def _mc_covariance(model: IsingModel, n_samples: int, stride: int, burn: int,
                   rng, n_batches: int = 20):
    """Sample covariance from a strided Glauber trajectory with batch-means
    error estimates. Returns (cov, max elementwise stderr)."""
    gen = as_generator(rng)
    n = model.n
    state = SpinConfig.from_spins(
        (gen.integers(0, 2, size=n) * 2 - 1).astype(np.int8),
        model.interaction.sigma if model.kind == "centered" else None)
    sites = gen.integers(0, n, size=burn).astype(np.int64)
    unifs = gen.random(burn)
    _advance(model, state, sites, unifs)
    per_batch = max(1, n_samples // n_batches)
    second = np.zeros((n_batches, n, n))
    first = np.zeros((n_batches, n))
    for b in range(n_batches):
        for _ in range(per_batch):
            sites = gen.integers(0, n, size=stride).astype(np.int64)
            unifs = gen.random(stride)
            _advance(model, state, sites, unifs)
            x = state.spins.astype(np.float64)
            first[b] += x
            second[b] += np.outer(x, x)
        first[b] /= per_batch
        second[b] /= per_batch
    mean = first.mean(axis=0)
    cov = second.mean(axis=0) - np.outer(mean, mean)
    cov_b = second - np.einsum("bi,bj->bij", first, first)
    stderr = cov_b.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return _sym(cov), float(stderr.max())


@dataclass(frozen=True)
class PathCovarianceReport:
    entries: tuple[dict, ...]
    fitted_C: float
    psd_all_pass: bool
    mode: str
    mc_flagged: bool


def path_covariance_norm(excision: ExcisionResult, J_B, J_H, t_grid,
                         field_probes=None, mode: str = "exact", *,
                         eta: float, K_target: float, gamma: float, D: float,
                         delta: float, seed=None, mc_samples: int = 20000,
                         mc_stride: int | None = None, C_assert: float | None = None,
                         mc_tol: float = 0.05) -> PathCovarianceReport:
    """Covariance of mu_{(1-t)J_B + J_H, h} weighted two ways along the path.

    Per (t, probe): the control-matrix norm |M1^{1/2} Cov M1^{1/2}| and the
    domination ratio lambda_max(W^{-1/2} Cov W^{-1/2}) with W = I_bulk +
    Delta I_interior on its support. fitted_C is the max ratio over the whole
    grid; psd entries pass against C_assert when given, else the fit itself.
    """
    n = excision.graph.n
    if mode == "exact" and n > 20:
        raise ValueError("exact mode capped at 20 spins")
    gen = as_generator(seed if seed is not None else RngSeed(0xc07, 0))
    JB = _coupling_to_dense(J_B, n)
    JH = _coupling_to_dense(J_H, n)
    if field_probes is None:
        field_probes = standard_field_probes(n, gen)

    entries = []
    fitted = 0.0
    mc_flagged = False
    w_templates = None
    for t in t_grid:
        ctrl = build_control_matrix(excision, J_B, float(t), eta, K_target,
                                    gamma, D, delta)
        if w_templates is None:
            wdiag = np.zeros(n)
            wdiag[ctrl.bulk_mask] = 1.0
            wdiag[ctrl.interior_mask] = ctrl.Delta
            support = wdiag > 0
            w_templates = (wdiag, support)
        wdiag, support = w_templates
        M_half = ctrl.sqrt()
        Jt = (1.0 - float(t)) * JB + JH
        for name, h in field_probes:
            if mode == "exact":
                cov = ExactOracle(IsingModel(Jt, h)).cov
                err = 0.0
            elif mode == "mc":
                stride = mc_stride if mc_stride is not None else max(1, n)
                cov, err = _mc_covariance(IsingModel(Jt, h), mc_samples,
                                          stride, 50 * n, gen)
                if err > mc_tol:
                    mc_flagged = True
            else:
                raise ValueError("mode must be 'exact' or 'mc'")
            Mn = _sym(M_half @ cov @ M_half)
            norm = float(np.max(np.abs(np.linalg.eigvalsh(Mn))))
            if support.any():
                idx = np.flatnonzero(support)
                scal = 1.0 / np.sqrt(wdiag[idx])
                sub = cov[np.ix_(idx, idx)] * np.outer(scal, scal)
                ratio = float(np.linalg.eigvalsh(_sym(sub))[-1])
            else:
                ratio = 0.0
            fitted = max(fitted, ratio)
            entries.append({"t": float(t), "probe": name, "norm": norm,
                            "domination_ratio": ratio, "mc_err": err})
    c_ref = C_assert if C_assert is not None else fitted
    all_pass = True
    for e in entries:
        e["psd_pass"] = bool(e["domination_ratio"] <= c_ref + 1e-10)
        all_pass = all_pass and e["psd_pass"]
    return PathCovarianceReport(tuple(entries), float(fitted), all_pass, mode,
                                mc_flagged)


@dataclass(frozen=True)
class LocalizationPath:
    times: np.ndarray
    couplings: tuple[np.ndarray, ...]
    fields: tuple[np.ndarray, ...]
    means: tuple[np.ndarray, ...]


def discretized_localization_path(model: IsingModel, C: np.ndarray, steps: int,
                                  rng) -> LocalizationPath:
    """Euler-Maruyama path of the coupling/field pair under a fixed control:

        J_{k+1} = J_k - C^2 dt
        h_{k+1} = h_k + sqrt(dt) C g_k + dt C^2 mean(mu_k)

    The coupling path is deterministic; only the field carries noise. The
    per-step mean needs the exact oracle, so n <= 14.
    """
    if model.n > 14:
        raise ValueError("path simulation capped at 14 spins")
    if steps < 1:
        raise ValueError("steps must be positive")
    gen = as_generator(rng)
    Cd = np.asarray(C, dtype=np.float64)
    C2 = Cd @ Cd
    dt = 1.0 / steps
    J = model.dense_coupling()
    h = model.h.copy()
    Js = [J.copy()]
    hs = [h.copy()]
    means = []
    for _ in range(steps):
        mean = ExactOracle(IsingModel(J, h)).mean
        means.append(mean)
        g = gen.standard_normal(model.n)
        h = h + np.sqrt(dt) * (Cd @ g) + dt * (C2 @ mean)
        J = J - dt * C2
        Js.append(J.copy())
        hs.append(h.copy())
    means.append(ExactOracle(IsingModel(J, h)).mean)
    times = np.linspace(0.0, 1.0, steps + 1)
    return LocalizationPath(times, tuple(Js), tuple(hs), tuple(means))


def localization_martingale_batch(model: IsingModel, C: np.ndarray, steps: int,
                                  n_paths: int, rng):
    """Vectorized martingale check: average over paths of mean(mu_1) vs
    mean(mu_0). Returns (avg_final_mean, stderr, base_mean).

    The coupling path is shared across paths, so the per-step state energies
    are computed once and only the fields are per-path.
    """
    if model.n > 14:
        raise ValueError("path simulation capped at 14 spins")
    gen = as_generator(rng)
    n = model.n
    N = 1 << n
    S = state_spins(np.arange(N), n).astype(np.float64)
    Cd = np.asarray(C, dtype=np.float64)
    C2 = Cd @ Cd
    dt = 1.0 / steps
    J = model.dense_coupling()
    H = np.tile(model.h, (n_paths, 1))
    base_mean = ExactOracle(model).mean

    def batch_means(Jk, Hk):
        e0 = 0.5 * np.einsum("si,si->s", S @ Jk, S)
        logits = e0[None, :] + Hk @ S.T
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        return P @ S

    for _ in range(steps):
        mu = batch_means(J, H)
        G = gen.standard_normal((n_paths, n))
        H = H + np.sqrt(dt) * (G @ Cd.T) + dt * (mu @ C2.T)
        J = J - dt * C2
    final = batch_means(J, H)
    avg = final.mean(axis=0)
    stderr = final.std(axis=0, ddof=1) / np.sqrt(n_paths)
    return avg, stderr, base_mean


def covariance_transfer_check(M1: np.ndarray, M2: np.ndarray, h: np.ndarray,
                             Gamma: np.ndarray, n_z: int = 100, seed=None,
                             tol: float = 1e-8) -> dict:
    """Probe the covariance-transfer implication on oracle-sized inputs.

    Hypothesis (checked on sampled z, scales {0.3, 1, 3}):
        M1 - M1 Cov(mu_{M2, M1 z + h}) M1 >= Gamma.
    Conclusion (checked once): Cov(mu_{M1+M2, h}) <= Gamma^{-1}.
    """
    gen = as_generator(seed if seed is not None else RngSeed(0x310, 0))
    n = M1.shape[0]
    if n > 14:
        raise ValueError("pipeline check capped at 14 spins")
    w1 = np.linalg.eigvalsh(_sym(M1))
    if w1[0] <= 0:
        raise ValueError("M1 must be positive definite")
    hyp_ok = True
    min_slack = np.inf
    scales = (0.3, 1.0, 3.0)
    for i in range(n_z):
        z = scales[i % len(scales)] * gen.standard_normal(n)
        cov_z = ExactOracle(IsingModel(M2, M1 @ z + h)).cov
        slack = np.linalg.eigvalsh(_sym(M1 - M1 @ cov_z @ M1 - Gamma))[0]
        min_slack = min(min_slack, float(slack))
        if slack < -tol:
            hyp_ok = False
    cov = ExactOracle(IsingModel(M1 + M2, h)).cov
    Ghalf = psd_sqrt(Gamma)
    top = float(np.linalg.eigvalsh(_sym(Ghalf @ cov @ Ghalf))[-1])
    return {"hypothesis_ok": hyp_ok, "conclusion_ok": top <= 1.0 + tol,
            "min_hypothesis_slack": min_slack, "conclusion_max_eig": top}


def sandwich_psd_check(M: np.ndarray, L: np.ndarray, alpha: float, eta1: float,
                   eta2: float, tol: float = 1e-10) -> dict:
    """Matrix inequality: |M| <= alpha and eta1 <= L <= (1-eta2)/alpha imply
    L - L M L >= eta1 eta2."""
    normM = float(np.linalg.norm(_sym(M), 2))
    wL = np.linalg.eigvalsh(_sym(L))
    hyp = (normM <= alpha + tol and wL[0] >= eta1 - tol
           and wL[-1] <= (1.0 - eta2) / alpha + tol)
    concl_min = float(np.linalg.eigvalsh(_sym(L - L @ M @ L))[0])
    return {"hypothesis_ok": bool(hyp), "conclusion_ok": concl_min >= eta1 * eta2 - tol,
            "conclusion_min_eig": concl_min, "required": eta1 * eta2}


def random_sandwich_instance(n: int, rng):
    """Random (M, L, alpha, eta1, eta2) satisfying the hypotheses."""
    gen = as_generator(rng)
    alpha = float(gen.uniform(0.5, 2.0))
    A = gen.standard_normal((n, n))
    M = _sym(A)
    M *= alpha * gen.uniform(0.3, 1.0) / np.linalg.norm(M, 2)
    eta2 = float(gen.uniform(0.05, 0.3))
    upper = (1.0 - eta2) / alpha
    eta1 = float(gen.uniform(0.05, 0.9)) * upper
    Q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    evals = gen.uniform(eta1, upper, size=n)
    L = (Q * evals) @ Q.T
    return M, L, alpha, eta1, eta2
