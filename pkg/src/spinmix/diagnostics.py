"""Mixing measurement, entropy-contraction brute force, influence matrices,
ball-tail empirics, and covariance-bound verdicts.

Statistical verdicts here use batch means (20 batches, 3 sigma) and treat
"inconclusive" as a first-class outcome: an error bar straddling a bound is
never reported as a pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .bounds import f_gamma, tree_cov_bounds
from .decompose import ExcisionResult, observed_delta
from .graphs import Graph, connected_components
from .ising import (IsingModel, SpinConfig, _advance, all_minus, all_plus,
                    gauge_transform, random_config, tree_gauge, tv_distance)
from .localize import _mc_covariance, standard_field_probes
from .oracle import ExactOracle, state_spins
from .rng import RngSeed, as_generator


def dirichlet_form(oracle: ExactOracle, f: np.ndarray, g: np.ndarray) -> float:
    """E_{x~mu, y~P(x,.)}[(f(x)-f(y)) (g(x)-g(y))] for the single-site
    heat-bath kernel (both transition directions counted, no 1/2)."""
    n = oracle.n
    N = 1 << n
    x = np.arange(N, dtype=np.int64)
    lw = oracle.log_weights
    mu = oracle.probs
    total = 0.0
    for i in range(n):
        y = x ^ (1 << i)
        w = mu / (n * (1.0 + np.exp(lw[x] - lw[y])))
        total += float(np.sum(w * (f[x] - f[y]) * (g[x] - g[y])))
    return total


def entropy_functional(oracle: ExactOracle, f: np.ndarray) -> float:
    """Ent[f] = E[f log f] - E[f] log E[f] for f > 0."""
    mu = oracle.probs
    ef = float(mu @ f)
    return float(mu @ (f * np.log(f))) - ef * np.log(ef)


def spectral_gap_exact(model: IsingModel) -> float:
    """1 - lambda_2 of the heat-bath kernel, via its mu-symmetrized form.

    The kernel is an average of conditional-expectation projections, so its
    spectrum sits in [0, 1] and the gap lands in (0, 1].
    """
    oracle = ExactOracle(model)
    S = oracle.symmetrized_kernel()
    N = S.shape[0]
    if N <= 256:
        w = np.linalg.eigvalsh(S.toarray())
        lam2 = float(w[-2])
    else:
        w = spla.eigsh(S, k=2, which="LA", return_eigenvectors=False)
        lam2 = float(np.sort(w)[0])
    return 1.0 - lam2


@dataclass(frozen=True)
class MlsiEstimate:
    value: float
    inventory: dict

    def __float__(self) -> float:
        return self.value


def _mlsi_ratio(oracle: ExactOracle, theta: np.ndarray) -> float:
    f = np.exp(theta - theta.max())
    ent = entropy_functional(oracle, f)
    if ent < 1e-12:
        return np.inf
    return dirichlet_form(oracle, f, np.log(f)) / ent


def _mlsi_gradient_refine(oracle: ExactOracle, theta0: np.ndarray,
                          iters: int = 300) -> tuple[float, np.ndarray]:
    """Descend the ratio E(f, log f)/Ent[f] over theta = log f with analytic
    gradients and a backtracking step."""
    n = oracle.n
    N = 1 << n
    x = np.arange(N, dtype=np.int64)
    lw = oracle.log_weights
    mu = oracle.probs
    nbrs = [x ^ (1 << i) for i in range(n)]
    wts = [mu / (n * (1.0 + np.exp(lw[x] - lw[y]))) for y in nbrs]

    def parts(theta):
        f = np.exp(theta)
        ef = float(mu @ f)
        ent = float(mu @ (f * theta)) - ef * np.log(ef)
        dir_val = 0.0
        grad_dir = np.zeros(N)
        for y, w in zip(nbrs, wts):
            df = f - f[y]
            dth = theta - theta[y]
            dir_val += float(np.sum(w * df * dth))
            # d/dtheta_z of sum_x w_x (f_x - f_{x^i})(theta_x - theta_{x^i});
            # each unordered pair appears from both endpoints
            contrib = w * (f * dth + df)
            grad_dir += contrib
            back = w * (f[y] * (-dth) + (-df))
            np.add.at(grad_dir, y, back)
        grad_ent = mu * f * (theta - np.log(ef))
        return f, ent, dir_val, grad_dir, grad_ent

    m0 = float(theta0.max())
    theta = theta0 - (float(np.log(mu @ np.exp(theta0 - m0))) + m0)  # E[f] = 1
    f, ent, dv, gd, ge = parts(theta)
    if ent < 1e-12:
        return np.inf, theta
    best = dv / ent
    step = 0.5
    for _ in range(iters):
        grad = (gd * ent - dv * ge) / (ent * ent)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-14:
            break
        improved = False
        while step > 1e-10:
            cand = theta - step * grad / gnorm
            cand = cand - float(np.log(mu @ np.exp(cand - cand.max())) + cand.max())
            fc, entc, dvc, gdc, gec = parts(cand)
            if entc >= 1e-12 and dvc / entc < best - 1e-15:
                theta, f, ent, dv, gd, ge = cand, fc, entc, dvc, gdc, gec
                best = dv / ent
                improved = True
                step *= 1.5
                break
            step *= 0.5
        if not improved:
            break
    return best, theta


def mlsi_upper_estimate(model: IsingModel, probes: int = 40, rng=None,
                        refine_iters: int = 300) -> MlsiEstimate:
    """Smallest observed ratio E(f, log f) / Ent[f]: an upper bound on the
    entropy-contraction constant.

    Probe inventory: exponentials of random linear spin fields at several
    scales, indicator tilts (single sites, the modal state, random sets),
    and gradient refinement started from the best probe. Probes with
    entropy below 1e-12 are discarded.
    """
    if model.n > 12:
        raise ValueError("brute-force estimate capped at 12 spins")
    gen = as_generator(rng if rng is not None else RngSeed(0x315, 0))
    oracle = ExactOracle(model)
    n = model.n
    N = 1 << n
    S = state_spins(np.arange(N), n).astype(np.float64)
    inventory: dict[str, float] = {}
    best = np.inf
    best_theta = None

    def consider(name, theta):
        nonlocal best, best_theta
        r = _mlsi_ratio(oracle, theta)
        if np.isfinite(r):
            prev = inventory.get(name, np.inf)
            inventory[name] = min(prev, r)
            if r < best:
                best = r
                best_theta = theta

    n_linear = max(probes // 2, 6)
    scales = (0.3, 1.0, 3.0)
    for k in range(n_linear):
        a = gen.standard_normal(n) * scales[k % len(scales)]
        consider("linear_field", S @ a)
    modal = int(np.argmax(oracle.probs))
    for lam in (0.5, 2.0, 10.0):
        e = np.zeros(N)
        e[modal] = 1.0
        consider("tilt_modal", np.log1p(lam * e))
        for i in range(n):
            ind = (S[:, i] > 0).astype(np.float64)
            consider("tilt_site", np.log1p(lam * ind))
    n_sets = max(probes - n_linear - 3 * (n + 1), 4)
    for _ in range(n_sets):
        mask = gen.random(N) < 0.5
        consider("tilt_random_set", np.log1p(2.0 * mask.astype(np.float64)))
    if best_theta is not None and refine_iters > 0:
        refined, _ = _mlsi_gradient_refine(oracle, best_theta, refine_iters)
        if np.isfinite(refined):
            inventory["gradient_refined"] = refined
            best = min(best, refined)
    return MlsiEstimate(float(best), inventory)


def standard_inits(n: int, rng, n_random: int = 8, sigma=None):
    """Worst-case-start proxy: all-plus, all-minus, and random starts."""
    gen = as_generator(rng)
    out = [("plus", all_plus(n, sigma)), ("minus", all_minus(n, sigma))]
    for i in range(n_random):
        out.append((f"rand{i}", random_config(n, gen, sigma)))
    return out


@dataclass(frozen=True)
class MixingReport:
    mode: str
    times: np.ndarray
    tv: dict
    t_mix: dict
    reached: dict
    gap: float | None
    eps: float
    horizon: int


def tv_mixing_curve(model: IsingModel, inits, horizon: int, mode: str = "exact",
                    eps: float = 0.01, stride: int = 1, rng=None,
                    mc_chains: int = 200, mc_bins: int = 21) -> MixingReport:
    """Distance-to-stationarity curves from a set of initializations.

    Exact mode pushes point-mass rows through the sparse kernel and records
    true TV; t_mix(eps) per start is the first recorded time under eps
    (reached=False marks a horizon-limited lower bound). MC mode compares
    binned magnetization histograms against the final-time pool, which is a
    heuristic observable distance, not a TV bound.
    """
    names = [nm for nm, _ in inits]
    starts = {nm: st for nm, st in inits}
    rec_times = np.arange(0, horizon + 1, stride, dtype=np.int64)
    tv: dict[str, np.ndarray] = {}
    if mode == "exact":
        oracle = ExactOracle(model)
        PT = oracle.transition_matrix().T.tocsr()
        mu = oracle.probs
        gap = spectral_gap_exact(model)
        for nm in names:
            x0 = starts[nm]
            idx = int(((x0.spins > 0).astype(np.int64)
                       @ (1 << np.arange(model.n, dtype=np.int64))))
            nu = np.zeros(mu.shape[0])
            nu[idx] = 1.0
            curve = [0.5 * float(np.abs(nu - mu).sum())]
            t = 0
            for target in rec_times[1:]:
                while t < target:
                    nu = PT @ nu
                    t += 1
                curve.append(0.5 * float(np.abs(nu - mu).sum()))
            tv[nm] = np.array(curve)
    elif mode == "mc":
        gen = as_generator(rng if rng is not None else RngSeed(0x71c, 0))
        gap = None
        sigma = model.interaction.sigma if model.kind == "centered" else None
        mags = {nm: np.zeros((len(rec_times), mc_chains)) for nm in names}
        for nm in names:
            for c in range(mc_chains):
                st = starts[nm].copy()
                mags[nm][0, c] = st.s1 / model.n
                done = 0
                for k, target in enumerate(rec_times[1:], start=1):
                    take = int(target - done)
                    sites = gen.integers(0, model.n, size=take).astype(np.int64)
                    unifs = gen.random(take)
                    _advance(model, st, sites, unifs)
                    done = int(target)
                    mags[nm][k, c] = st.s1 / model.n
        edges = np.linspace(-1.0, 1.0, mc_bins + 1)
        ref = np.concatenate([mags[nm][-1] for nm in names])
        ref_hist, _ = np.histogram(ref, bins=edges)
        ref_p = ref_hist / ref_hist.sum()
        for nm in names:
            curve = []
            for k in range(len(rec_times)):
                h, _ = np.histogram(mags[nm][k], bins=edges)
                curve.append(0.5 * float(np.abs(h / h.sum() - ref_p).sum()))
            tv[nm] = np.array(curve)
    else:
        raise ValueError("mode must be 'exact' or 'mc'")

    t_mix: dict[str, float] = {}
    reached: dict[str, bool] = {}
    for nm in names:
        below = np.flatnonzero(tv[nm] < eps)
        if below.size:
            t_mix[nm] = float(rec_times[below[0]])
            reached[nm] = True
        else:
            t_mix[nm] = float(horizon)
            reached[nm] = False
    return MixingReport(mode, rec_times, tv, t_mix, reached, gap, eps, horizon)


def empirical_marginals(model: IsingModel, steps: int, stride: int, burn: int,
                        rng, n_batches: int = 20):
    """Per-site means from a strided trajectory with batch-means stderr."""
    gen = as_generator(rng)
    sigma = model.interaction.sigma if model.kind == "centered" else None
    state = random_config(model.n, gen, sigma)
    sites = gen.integers(0, model.n, size=burn).astype(np.int64)
    _advance(model, state, sites, gen.random(burn))
    n_rec = steps // stride
    per_batch = max(1, n_rec // n_batches)
    batches = np.zeros((n_batches, model.n))
    for b in range(n_batches):
        acc = np.zeros(model.n)
        for _ in range(per_batch):
            sites = gen.integers(0, model.n, size=stride).astype(np.int64)
            _advance(model, state, sites, gen.random(stride))
            acc += state.spins
        batches[b] = acc / per_batch
    mean = batches.mean(axis=0)
    stderr = batches.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return mean, stderr


def influence_matrix_bruteforce(model: IsingModel, blocks) -> np.ndarray:
    """Exact worst-case influence between blocks.

    R[i, j] = max over outside configurations agreeing except on block j of
    the TV distance between the conditional laws of block i. Exact
    enumeration over the full table; limits: 14 spins, 4 blocks.
    """
    blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
    k = len(blocks)
    if k > 4:
        raise ValueError("influence brute force capped at 4 blocks")
    n = model.n
    if n > 14:
        raise ValueError("influence brute force capped at 14 spins")
    order = np.concatenate(blocks)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("blocks must partition the vertex set")
    oracle = ExactOracle(model)
    # table axes: spin 0 .. spin n-1; regroup axes block by block
    table = oracle.table().transpose(tuple(order))
    sizes = [1 << b.shape[0] for b in blocks]
    table = table.reshape(sizes)
    R = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            rest = [a for a in range(k) if a not in (i, j)]
            T = np.transpose(table, (i, j, *rest)).reshape(sizes[i], sizes[j], -1)
            cond = T / T.sum(axis=0, keepdims=True)
            worst = 0.0
            for u2 in range(sizes[j]):  # pairwise broadcast can hit ~0.5 GB
                dv = 0.5 * np.abs(cond - cond[:, u2:u2 + 1, :]).sum(axis=0)
                worst = max(worst, float(dv.max()))
            R[i, j] = worst
    return R


@dataclass(frozen=True)
class TailHistogram:
    radii: tuple
    s_values: tuple
    d: float
    freq: np.ndarray      # (len(radii), len(s_values))
    counts: np.ndarray
    sample_size: int


def ball_tail_histogram(g: Graph, radii, s_values, d: float, sample: int,
                        rng) -> TailHistogram:
    """Empirical exceedance frequencies Pr_v[|B_r(v)| >= (s d)^r] over
    uniformly sampled vertices."""
    gen = as_generator(rng)
    radii = tuple(int(r) for r in radii)
    s_values = tuple(float(s) for s in s_values)
    if sample >= g.n:
        verts = np.arange(g.n, dtype=np.int64)
    else:
        verts = gen.choice(g.n, size=sample, replace=False).astype(np.int64)
    rmax = max(radii)
    sizes = kernels.ball_sizes_batch(g.indptr, g.indices, verts, rmax)
    freq = np.zeros((len(radii), len(s_values)))
    counts = np.zeros((len(radii), len(s_values)), dtype=np.int64)
    for a, r in enumerate(radii):
        for b, s in enumerate(s_values):
            thr = (s * d) ** r
            c = int(np.sum(sizes[:, r] >= thr))
            counts[a, b] = c
            freq[a, b] = c / verts.shape[0]
    return TailHistogram(radii, s_values, float(d), freq, counts, int(verts.shape[0]))


def gw_ball_simulator(d: float, depth: int, trials: int, rng) -> np.ndarray:
    """Cumulative ball sizes |B_r| of a Poisson(d) branching tree, one row
    per trial, columns r = 0..depth."""
    gen = as_generator(rng)
    sizes = np.ones((trials, depth + 1), dtype=np.int64)
    level = np.ones(trials, dtype=np.int64)
    for r in range(1, depth + 1):
        level = gen.poisson(d * level)
        sizes[:, r] = sizes[:, r - 1] + level
    return sizes


def gw_exceedance(sizes: np.ndarray, d: float, radii, s_values):
    """Exceedance frequencies and binomial stderr from simulated GW balls."""
    trials = sizes.shape[0]
    freq = np.zeros((len(radii), len(s_values)))
    err = np.zeros_like(freq)
    for a, r in enumerate(radii):
        for b, s in enumerate(s_values):
            thr = (s * d) ** r
            p = float(np.mean(sizes[:, r] >= thr))
            freq[a, b] = p
            err[a, b] = np.sqrt(max(p * (1 - p), 1.0 / trials) / trials)
    return freq, err


@dataclass(frozen=True)
class VerdictRow:
    component: int
    n_vertices: int
    probe: str
    which: str
    value: float
    bound: float
    err: float
    verdict: str  # pass | fail | inconclusive | not-applicable | too-large

    def to_dict(self) -> dict:
        return {"component": self.component, "n_vertices": self.n_vertices,
                "probe": self.probe, "which": self.which, "value": self.value,
                "bound": self.bound, "err": self.err, "verdict": self.verdict}


@dataclass(frozen=True)
class CovarianceVerdicts:
    rows: tuple[VerdictRow, ...]
    gamma: float
    D: float
    n_components: int
    n_skipped: int

    @property
    def failures(self) -> tuple[VerdictRow, ...]:
        return tuple(r for r in self.rows if r.verdict == "fail")

    @property
    def inconclusive_fraction(self) -> float:
        decided = [r for r in self.rows if r.verdict in ("pass", "fail", "inconclusive")]
        if not decided:
            return 0.0
        k = sum(1 for r in decided if r.verdict == "inconclusive")
        return k / len(decided)


def _decide(value: float, bound: float, err: float) -> str:
    """3-sigma verdict; a bar that straddles the bound is inconclusive."""
    if err == 0.0:
        return "pass" if value <= bound else "fail"
    if value + 3.0 * err <= bound:
        return "pass"
    if value - 3.0 * err > bound:
        return "fail"
    return "inconclusive"


def covariance_bound_verdicts(excision: ExcisionResult, coupling: Graph,
                              mode: str = "exact", field_probes=None,
                              seed=None, max_exact: int = 20,
                              mc_samples: int = 20000,
                              gamma: float | None = None) -> CovarianceVerdicts:
    """Near-forest covariance norms against the closed-form bounds.

    Per component and probe field: the boundary-restricted norm |Cov_S| vs
    f(gamma), the full norm vs f(gamma) Delta/D, and (trees only, via the
    sign gauge) |Cov A| vs 2 Delta/(sqrt(D) (1-gamma)^2). Delta is the
    component's own observed ball-growth ratio. MC verdicts compare against
    3-sigma bars and report "inconclusive" when the bar straddles the bound.
    """
    gen = as_generator(seed if seed is not None else RngSeed(0xc0f, 0))
    D = excision.D
    h_graph = excision.near_forest
    if (coupling.n != h_graph.n or coupling.m != h_graph.m
            or not np.array_equal(coupling.edge_u, h_graph.edge_u)
            or not np.array_equal(coupling.edge_v, h_graph.edge_v)):
        raise ValueError("coupling must reweight the near-forest topology")
    if gamma is None:
        gamma = float(np.sqrt(D) * np.max(np.abs(coupling.edge_w))) if coupling.m else 0.0
    if gamma >= 1.0:
        raise ValueError("couplings exceed the gamma/sqrt(D) radius with gamma < 1")
    f = f_gamma(gamma, D)
    bmask = np.zeros(h_graph.n, dtype=bool)
    bmask[excision.boundary] = True

    rows: list[VerdictRow] = []
    n_comp = 0
    n_skip = 0
    for ci, comp in enumerate(connected_components(h_graph).components):
        if comp.n_edges == 0:
            continue
        n_comp += 1
        sub, verts = coupling.induced_subgraph(comp.vertices)
        k = verts.shape[0]
        if mode == "exact" and k > max_exact:
            rows.append(VerdictRow(ci, k, "-", "all", np.nan, np.nan, 0.0, "too-large"))
            n_skip += 1
            continue
        Delta = observed_delta(sub, D)[0]
        s_local = np.flatnonzero(bmask[verts])
        is_tree = comp.excess == 0
        bounds = {"restricted": f, "full": f * Delta / D,
                  "product": 2.0 * Delta / (np.sqrt(D) * (1.0 - gamma) ** 2)}
        A = sub.adjacency(weighted=False).toarray()
        if is_tree:
            gsigns = tree_gauge(sub)
        probes = field_probes if field_probes is not None else \
            standard_field_probes(k, gen)
        for name, h in probes:
            if mode == "exact":
                cov = ExactOracle(IsingModel(sub, h)).cov
                err = 0.0
            else:
                cov, err = _mc_covariance(IsingModel(sub, h), mc_samples,
                                          max(1, k), 50 * k, gen)
                err *= k  # entrywise stderr -> crude operator-norm bar
            if s_local.size:
                vs = float(np.max(np.abs(np.linalg.eigvalsh(
                    cov[np.ix_(s_local, s_local)]))))
            else:
                vs = 0.0
            rows.append(VerdictRow(ci, k, name, "restricted", vs,
                                   bounds["restricted"], err,
                                   _decide(vs, bounds["restricted"], err)))
            vf = float(np.max(np.abs(np.linalg.eigvalsh(cov))))
            rows.append(VerdictRow(ci, k, name, "full", vf, bounds["full"], err,
                                   _decide(vf, bounds["full"], err)))
            if is_tree:
                gm = gauge_transform(IsingModel(sub, h), gsigns)
                if mode == "exact":
                    cov_g = ExactOracle(gm).cov
                    err_p = 0.0
                else:
                    cov_g, err_g = _mc_covariance(gm, mc_samples, max(1, k),
                                                  50 * k, gen)
                    err_p = err_g * k * float(np.linalg.norm(A, 2))
                vp = float(np.linalg.norm(cov_g @ A, 2))
                rows.append(VerdictRow(ci, k, name, "product", vp,
                                       bounds["product"], err_p,
                                       _decide(vp, bounds["product"], err_p)))
            else:
                rows.append(VerdictRow(ci, k, name, "product", np.nan,
                                       bounds["product"], 0.0, "not-applicable"))
    return CovarianceVerdicts(tuple(rows), float(gamma), float(D), n_comp, n_skip)
