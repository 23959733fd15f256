"""Command-line front end.

Subcommands map onto the library pipeline: generate graphs, decompose them,
run chains, query exact oracles, check spectra, exercise the localization
machinery, and assemble a full verdict report. Every command prints one JSON
document to stdout (sorted keys, schema-versioned, config hash embedded) and
optionally writes the same document plus CSV companions to an output
directory. Exit codes: 0 pass/complete, 2 verdict failure, 1 usage or
runtime error.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bounds import ball_tail_bound, mixing_time_bound
from .config import (SCHEMA_VERSION, ExperimentConfig, GeneratorSpec,
                     build_graph, build_model, canonical_json)
from .decompose import (EpsilonValidityWarning, build_cluster_graph,
                        component_stats, excise, observed_delta,
                        verify_near_forest, verify_pseudorandom)
from .diagnostics import (covariance_bound_verdicts, gw_ball_simulator,
                          gw_exceedance, ball_tail_histogram, spectral_gap_exact,
                          standard_inits, tv_mixing_curve)
from .graphs import connected_components, write_edgelist
from .ising import (IsingModel, _advance, all_minus, all_plus, random_config,
                    run_chain)
from .localize import (build_control_matrix, hs_covariance_identity_check,
                       localization_martingale_batch, mixture_check,
                       path_covariance_norm, standard_field_probes)
from .oracle import MAX_CHAIN_SPINS, exact_oracle_build
from .rng import RngSeed
from .spectral import (bethe_hessian, bethe_inverse_series_check,
                       bulk_spectral_check, distance_norm_check,
                       nonbacktracking_nilpotence_check, smallest_eigenvalue)

SUITES = {
    "quick": dict(n=2000, d=5.0, lam=0.0, epsilon=0.5, beta=0.1,
                  tail_sample=1000, tail_rmax=3, gw_trials=20000,
                  mix_n=8, beta_slow=2.0, cov_max_exact=14, dist_ell=2),
    "paper-checks": dict(n=100000, d=5.0, lam=0.0, epsilon=0.5, beta=0.1,
                         tail_sample=20000, tail_rmax=4, gw_trials=200000,
                         mix_n=10, beta_slow=2.0, cov_max_exact=18, dist_ell=3),
}
SUITES["full"] = SUITES["paper-checks"]


def _resolve_out(out, default=None):
    if out:
        return Path(out)
    env = os.environ.get("SPINMIX_OUT_DIR")
    if env:
        return Path(env)
    return Path(default) if default is not None else None


def _document(cfg: ExperimentConfig, payload: dict) -> dict:
    doc = {"schema": SCHEMA_VERSION, "version": __version__,
           "config": cfg.to_dict(), "config_sha256": cfg.sha256()}
    doc.update(payload)
    return doc


def _emit(doc: dict, out_dir, name: str) -> None:
    text = canonical_json(doc)
    click.echo(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{name}.json").write_text(text + "\n")


def _write_csv(out_dir, name: str, header, rows) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _graph_d(spec: GeneratorSpec, g, d_flag) -> float:
    if d_flag is not None:
        return float(d_flag)
    if spec.kind == "sbm":
        return spec.d
    return max(1.0, 2.0 * g.m / max(g.n, 1))


@click.group()
def cli():
    """Sparse-graph Ising toolkit: generation, decomposition, sampling,
    exact oracles, spectral checks, localization checks, and reports."""


@cli.command()
@click.option("--gen", "gen_text", required=True, help="Generator spec, e.g. sbm:1000,5,0.")
@click.option("--seed", type=int, required=True)
@click.option("--signs", type=click.Choice(["random", "plus"]), default="random")
@click.option("--stem", default="graph", help="Basename for emitted files.")
@click.option("--out", default=None, help="Output directory (default: cwd).")
def generate(gen_text, seed, signs, stem, out):
    """Draw a graph and write it as an edge list plus a metadata document."""
    spec = GeneratorSpec.parse(gen_text, signs=signs)
    cfg = ExperimentConfig(gen=spec, seed=seed)
    g, sigma = build_graph(spec, cfg.root_seed())
    out_dir = _resolve_out(out, default=".")
    out_dir.mkdir(parents=True, exist_ok=True)
    edge_path = out_dir / f"{stem}.edges"
    write_edgelist(g, edge_path)
    files = {"edges": str(edge_path)}
    if sigma is not None:
        label_path = out_dir / f"{stem}.labels"
        np.savetxt(label_path, sigma, fmt="%d")
        files["labels"] = str(label_path)
    comp = connected_components(g)
    payload = {"n": g.n, "m": g.m,
               "mean_degree": 2.0 * g.m / g.n if g.n else 0.0,
               "n_components": len(comp.components),
               "negative_edges": int(np.sum(g.edge_w < 0)),
               "files": files}
    _emit(_document(cfg, payload), out_dir, stem)
    return 0


def _decomposition_payload(g, d: float, epsilon: float, seed: RngSeed,
                           delta_flag=None, with_cluster: bool = True):
    """Shared by `decompose` and `report`: excision, certificates, stats.

    Hard failures are certificate invalidity and a bulk-degree violation;
    the near-forest property is reported as data.
    """
    with warnings.catch_warnings(record=True) as wrec:
        warnings.simplefilter("always")
        exc = excise(g, d, epsilon)
    eps_warnings = [str(w.message) for w in wrec
                    if issubclass(w.category, EpsilonValidityWarning)]
    h = exc.near_forest
    nf = verify_near_forest(h)
    delta_obs, delta_vertex, delta_radius = observed_delta(h, exc.D)
    delta_used = float(delta_flag) if delta_flag is not None else max(delta_obs, 1.0)
    cert = verify_pseudorandom(h, exc.boundary, delta_used, exc.D)
    bulk_deg = int(np.diff(exc.bulk.indptr).max()) if exc.bulk.n else 0
    hard = []
    if not cert.valid:
        hard.append(f"pseudorandom certificate invalid at delta={delta_used:g}")
    if bulk_deg > exc.D:
        hard.append(f"bulk max degree {bulk_deg} exceeds {exc.D:g}")
    sizes = sorted((c[0] for c in nf.components), reverse=True)
    payload = {
        "n": g.n, "m": g.m, "d": d, "epsilon": epsilon, "D": exc.D,
        "bulk_max_degree": bulk_deg,
        "bulk_edges": exc.bulk.m,
        "excised_edges": h.m,
        "heavy_vertices": int(np.sum(exc.ell > 0)),
        "boundary_size": int(exc.boundary.shape[0]),
        "near_forest": {"passed": nf.passed, "max_excess": nf.max_excess,
                        "n_components": len(nf.components),
                        "isolated": nf.isolated,
                        "largest_components": sizes[:10]},
        "delta_observed": delta_obs,
        "delta_witness": {"vertex": delta_vertex, "radius": delta_radius},
        "certificate": {"delta": cert.delta, "D": cert.D, "valid": cert.valid,
                        "violations": len(cert.violations),
                        "checked_vertices": cert.checked_vertices},
        "epsilon_warnings": eps_warnings,
    }
    ell_vals, ell_counts = np.unique(exc.ell, return_counts=True)
    payload["ell_histogram"] = {str(int(v)): int(c)
                                for v, c in zip(ell_vals, ell_counts)}
    stats = None
    if with_cluster:
        cluster = build_cluster_graph(g, exc)
        stats = component_stats(h, cluster)
        payload["components"] = [
            {"size": int(s), "excess": int(x), "diameter": int(dm)}
            for s, e, x, dm in stats.components if e > 0]
        payload["sum_sq_nontrivial"] = stats.sum_sq_nontrivial
        payload["cluster"] = {
            "nodes": len(cluster.nodes),
            "edges": int(cluster.edge_a.shape[0]),
            "weighted_diameter": stats.weighted_cluster_diameter,
            "max_component": stats.max_size,
        }
    return exc, payload, hard, stats


@cli.command()
@click.option("--gen", "gen_text", default=None)
@click.option("--input", "input_path", default=None,
              help="Edge-list file (alternative to --gen).")
@click.option("--seed", type=int, required=True)
@click.option("--epsilon", type=float, required=True)
@click.option("--d", "d_flag", type=float, default=None,
              help="Mean degree; required for file inputs, else from the spec.")
@click.option("--delta", "delta_flag", type=float, default=None,
              help="Certify pseudorandomness at this Delta instead of the observed one.")
@click.option("--strict", is_flag=True, help="Epsilon-validity warnings fail the run.")
@click.option("--out", default=None)
def decompose(gen_text, input_path, seed, epsilon, d_flag, delta_flag, strict, out):
    """Excise heavy balls, certify the remainder, and report structure."""
    if (gen_text is None) == (input_path is None):
        raise click.UsageError("give exactly one of --gen or --input")
    spec = GeneratorSpec.parse(gen_text if gen_text else f"file:{input_path}")
    cfg = ExperimentConfig(gen=spec, seed=seed, epsilon=epsilon, strict=strict)
    g, _ = build_graph(spec, cfg.root_seed())
    d = _graph_d(spec, g, d_flag)
    _, payload, hard, _ = _decomposition_payload(g, d, epsilon,
                                                 cfg.root_seed(), delta_flag)
    if strict and payload["epsilon_warnings"]:
        hard.append("epsilon below the validity floor (strict mode)")
    payload["hard_failures"] = hard
    _emit(_document(cfg, payload), _resolve_out(out), "decompose")
    return 2 if hard else 0


def _parse_model_text(text: str, signs="random", centered=False) -> GeneratorSpec:
    """A --model value is a generator spec or a bare edge-list path."""
    if ":" in text and text.split(":", 1)[0] in ("sbm", "er", "file"):
        return GeneratorSpec.parse(text, signs=signs, centered=centered)
    return GeneratorSpec.parse(f"file:{text}", signs=signs, centered=centered)


def _parse_field(field_text, n: int) -> np.ndarray:
    """--field takes a constant or a whitespace-separated file of n reals."""
    if field_text is None:
        return np.zeros(n)
    try:
        return np.full(n, float(field_text))
    except ValueError:
        h = np.loadtxt(field_text, dtype=np.float64).reshape(-1)
        if h.shape != (n,):
            raise click.UsageError(f"field file has {h.shape[0]} entries, model has {n}")
        return h


@cli.command()
@click.option("--model", "model_text", required=True,
              help="Generator spec (sbm:n,d,lambda) or an edge-list path.")
@click.option("--seed", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--steps", type=int, required=True)
@click.option("--chains", type=int, default=1)
@click.option("--field", "field_text", default=None,
              help="External field: a constant or a file with one value per vertex.")
@click.option("--observe", "observe_text", default="mag,energy",
              help="Comma list from {mag, energy, overlap}.")
@click.option("--stride", type=int, default=0, help="Record interval (default steps/200).")
@click.option("--burn", type=int, default=0)
@click.option("--init", "init_kind", type=click.Choice(["plus", "minus", "random"]),
              default="random")
@click.option("--signs", type=click.Choice(["random", "plus"]), default="random")
@click.option("--centered", is_flag=True,
              help="Couple through the rank-two-corrected operator (forces +1 signs).")
@click.option("--d", "d_flag", type=float, default=None)
@click.option("--out", default=None)
def sample(model_text, seed, beta, steps, chains, field_text, observe_text,
           stride, burn, init_kind, signs, centered, d_flag, out):
    """Run single-site dynamics and record observable trajectories."""
    spec = _parse_model_text(model_text, signs="plus" if centered else signs,
                             centered=centered)
    cfg = ExperimentConfig(gen=spec, seed=seed, beta=beta, steps=steps,
                           stride=stride, burn=burn)
    rs = cfg.root_seed()
    model = build_model(spec, beta, rs)
    h = _parse_field(field_text, model.n)
    if h.any():
        model = IsingModel(model.interaction, h)
    observers = tuple(s.strip() for s in observe_text.split(",") if s.strip())
    bad = set(observers) - {"mag", "energy", "overlap"}
    if bad:
        raise click.UsageError(f"unknown observers {sorted(bad)}")
    sigma = model.interaction.sigma if model.kind == "centered" else None
    reference = sigma
    if "overlap" in observers and reference is None:
        _, labels = build_graph(spec, rs)
        if labels is None:
            raise click.UsageError("overlap needs generated labels, not a file model")
        reference = labels
    stride = stride or max(1, steps // 200)
    rows = []
    finals = []
    for c in range(chains):
        gen_chain = rs.child(("chain", c)).generator()
        if init_kind == "plus":
            state = all_plus(model.n, sigma)
        elif init_kind == "minus":
            state = all_minus(model.n, sigma)
        else:
            state = random_config(model.n, gen_chain, sigma)
        if burn:
            sites = gen_chain.integers(0, model.n, size=burn).astype(np.int64)
            _advance(model, state, sites, gen_chain.random(burn))
        result = run_chain(model, state, steps, gen_chain, observers=observers,
                           stride=stride, reference=reference)
        finals.append({nm: float(result.trace[nm][-1]) for nm in observers})
        rows.extend((c, int(t)) + tuple(float(result.trace[nm][i])
                                        for nm in observers)
                    for i, t in enumerate(result.observed_at))
    payload = {"n": model.n, "steps": steps, "chains": chains,
               "stride": stride, "burn": burn,
               "observers": list(observers), "final": finals,
               "recorded_points": len(rows)}
    out_dir = _resolve_out(out)
    if out_dir is not None:
        _write_csv(out_dir, "trajectory.csv", ("chain", "step") + observers, rows)
    _emit(_document(cfg, payload), out_dir, "sample")
    return 0


@cli.command()
@click.option("--gen", "gen_text", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--signs", type=click.Choice(["random", "plus"]), default="random")
@click.option("--field", "field_text", default=None)
@click.option("--d", "d_flag", type=float, default=None)
@click.option("--mlsi", "with_mlsi", is_flag=True, help="Include the entropy-contraction estimate.")
@click.option("--out", default=None)
def oracle(gen_text, seed, beta, signs, field_text, d_flag, with_mlsi, out):
    """Exact partition function, marginals, covariance, and gap (n <= 20)."""
    spec = _parse_model_text(gen_text, signs=signs)
    cfg = ExperimentConfig(gen=spec, seed=seed, beta=beta)
    model = build_model(spec, beta, cfg.root_seed())
    h = _parse_field(field_text, model.n)
    if h.any():
        model = IsingModel(model.interaction, h)
    orc = exact_oracle_build(model)
    payload = {"n": model.n, "logZ": orc.logZ,
               "marginals": orc.marginals.tolist(),
               "covariance": orc.cov.tolist(),
               "mean_log_weight": float(orc.probs @ orc.log_weights)}
    if model.n <= MAX_CHAIN_SPINS:
        payload["spectral_gap"] = spectral_gap_exact(model)
    if with_mlsi:
        from .diagnostics import mlsi_upper_estimate
        est = mlsi_upper_estimate(model, rng=cfg.root_seed().child("mlsi"))
        payload["mlsi_upper"] = est.value
        payload["mixing_time_bound"] = mixing_time_bound(
            est.value, float(orc.probs.min()), 0.01)
    _emit(_document(cfg, payload), _resolve_out(out), "oracle")
    return 0


def _classify(value: float, bound: float, slack: float) -> str:
    if value <= bound:
        return "pass"
    if value <= slack * bound:
        return "warn"
    return "fail"


def _spectra_payload(g, d, epsilon, seed: RngSeed, slack: float, exc=None):
    if exc is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EpsilonValidityWarning)
            exc = excise(g, d, epsilon)
    raw_bound = 2.0 * np.sqrt(d * (1.0 + epsilon))
    chk = bulk_spectral_check(exc.bulk, d, epsilon, seed=seed.child("bulk"),
                              slack=slack)
    status = _classify(chk.value, raw_bound, slack)
    payload = {"bulk_norm": chk.to_dict(), "bulk_bound_raw": raw_bound,
               "bulk_status": status}
    hard = [] if status != "fail" else [f"bulk norm {chk.value:g} beyond slack band"]
    warns = [f"bulk norm {chk.value:g} above {raw_bound:g} within slack"] \
        if status == "warn" else []

    # Tree sanity block on the largest small tree component of the remainder.
    h = exc.near_forest
    tree_comp = None
    for comp in sorted(connected_components(h).components,
                       key=lambda c: -c.n_vertices):
        if comp.excess == 0 and comp.n_edges > 0 and comp.n_vertices <= 500:
            tree_comp = comp
            break
    if tree_comp is not None:
        sub, verts = h.induced_subgraph(tree_comp.vertices)
        payload["tree_component_size"] = int(verts.shape[0])
        payload["bethe_series_residual"] = bethe_inverse_series_check(sub, 0.3)
        payload["bethe_min_eig"] = smallest_eigenvalue(
            bethe_hessian(sub, 0.3).matrix, seed=seed.child("bh"))
        payload["nonbacktracking_nilpotent_power"] = \
            nonbacktracking_nilpotence_check(sub) if 2 * sub.m <= 2000 else None
        if payload["bethe_series_residual"] > 1e-8:
            hard.append("Bethe inverse series residual above 1e-8")
        if payload["bethe_min_eig"] < -1e-10:
            hard.append("Bethe Hessian not positive semidefinite on a tree")
    return exc, payload, hard, warns


@cli.command()
@click.option("--gen", "gen_text", default=None)
@click.option("--input", "input_path", default=None)
@click.option("--what", type=click.Choice(["bulk", "bethe", "nonbacktracking",
                                           "distance"]), default="bulk")
@click.option("--t", "t_param", type=float, default=0.3)
@click.option("--seed", type=int, required=True)
@click.option("--epsilon", type=float, default=0.5)
@click.option("--d", "d_flag", type=float, default=None)
@click.option("--slack", type=float, default=1.2)
@click.option("--strict", is_flag=True, help="Slack-band warnings become failures.")
@click.option("--threads", type=int, default=1)
@click.option("--out", default=None)
def spectra(gen_text, input_path, what, t_param, seed, epsilon, d_flag, slack,
            strict, threads, out):
    """Spectral checks: bulk operator norm, Bethe matrix identities on
    forests, nonbacktracking nilpotence, or distance-matrix norm bounds."""
    if (gen_text is None) == (input_path is None):
        raise click.UsageError("give exactly one of --gen or --input")
    spec = GeneratorSpec.parse(gen_text if gen_text else f"file:{input_path}")
    cfg = ExperimentConfig(gen=spec, seed=seed, epsilon=epsilon, slack=slack,
                           strict=strict, threads=threads)
    g, _ = build_graph(spec, cfg.root_seed())
    d = _graph_d(spec, g, d_flag)
    hard, warns = [], []
    if what == "bulk":
        _, payload, hard, warns = _spectra_payload(g, d, epsilon,
                                                   cfg.root_seed(), slack)
        payload.update(payload.pop("bulk_norm"))
    elif what == "bethe":
        resid = bethe_inverse_series_check(g, t_param)
        mineig = smallest_eigenvalue(bethe_hessian(g, t_param).matrix,
                                     seed=cfg.root_seed().child("bh"))
        payload = {"value": resid, "bound": 1e-8, "pass": resid <= 1e-8,
                   "iterations": 0, "converged": True, "t": t_param,
                   "min_eigenvalue": mineig}
        if not payload["pass"]:
            hard.append("Bethe inverse series residual above 1e-8")
        if mineig < -1e-10:
            hard.append("Bethe matrix not positive semidefinite on a forest")
    elif what == "nonbacktracking":
        power = nonbacktracking_nilpotence_check(g)
        payload = {"value": power, "bound": 2 * g.m, "pass": True,
                   "iterations": power, "converged": True}
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EpsilonValidityWarning)
            exc = excise(g, d, epsilon)
        payload, hard, warns = _sec_distance_norms(exc, 3,
                                                   cfg.root_seed().child("dist"))
    if strict and warns:
        hard.extend(warns)
    payload["hard_failures"] = hard
    payload["warnings"] = warns
    _emit(_document(cfg, payload), _resolve_out(out), "spectra")
    return 2 if hard else 0


@cli.command()
@click.option("--model", "model_text", required=True,
              help="Generator spec (sbm:n,d,lambda) or an edge-list path.")
@click.option("--seed", type=int, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--epsilon", type=float, default=0.5)
@click.option("--eta", type=float, default=0.05)
@click.option("--delta", "delta_prime", type=float, default=0.25)
@click.option("--t-grid", "t_grid_text", default="0,0.25,0.5,0.75,1")
@click.option("--control", "control_text", default="auto",
              help="'auto' assembles the spectral shift; or a file of a dense PSD matrix.")
@click.option("--probes", type=int, default=5, help="Random probe-field count.")
@click.option("--mode", type=click.Choice(["exact", "mc"]), default="exact")
@click.option("--draws", type=int, default=200000, help="Mixture/HS sample count.")
@click.option("--paths", type=int, default=2000)
@click.option("--sde-steps", type=int, default=200)
@click.option("--tol", type=float, default=0.05, help="HS covariance residual tolerance.")
@click.option("--strict", is_flag=True)
@click.option("--threads", type=int, default=1)
@click.option("--out", default=None)
def localize(model_text, seed, beta, epsilon, eta, delta_prime, t_grid_text,
             control_text, probes, mode, draws, paths, sde_steps, tol, strict,
             threads, out):
    """Measure-decomposition checks on an oracle-sized model: Gaussian
    mixture identity, covariance identity, martingale consistency, and the
    annealing-path covariance norms under the assembled control matrix."""
    spec = _parse_model_text(model_text)
    t_grid = tuple(float(x) for x in t_grid_text.split(","))
    cfg = ExperimentConfig(gen=spec, seed=seed, beta=beta, epsilon=epsilon,
                           t_grid=t_grid, n_probes=probes, strict=strict,
                           threads=threads)
    rs = cfg.root_seed()
    model = build_model(spec, beta, rs)
    cap = 20 if mode == "exact" else 200
    if model.n > cap:
        raise click.UsageError(f"localize in {mode} mode needs n <= {cap}")
    g, _ = build_graph(spec, rs)
    d = _graph_d(spec, g, None)
    oracle_ok = model.n <= 12

    hard, warns = [], []
    payload = {"n": model.n, "mode": mode}
    if oracle_ok:
        J = model.dense_coupling()
        if control_text == "auto":
            c_shift = float(np.linalg.norm(J, 2)) + 0.5
            C = c_shift * np.eye(model.n)
            payload["c_shift"] = c_shift
        else:
            C = np.loadtxt(control_text, dtype=np.float64).reshape(model.n, model.n)
            payload["control_file"] = control_text
        hs_resid = hs_covariance_identity_check(model, C, samples=draws,
                                                seed=rs.child("hs"))
        mix = mixture_check(model, C, n_draws=draws, seed=rs.child("mix"))
        avg_final, stderr, base_mean = localization_martingale_batch(
            model, C, sde_steps, paths, rs.child("sde"))
        mart_dev = float(np.max(np.abs(avg_final - base_mean)))
        # 4 sigma statistical bar plus an O(dt) Euler discretization budget.
        mart_tol = 4.0 * float(np.max(stderr)) + 10.0 / sde_steps
        if hs_resid > tol:
            hard.append(f"HS covariance residual {hs_resid:g} > {tol:g}")
        if not mix.passed:
            hard.append(f"mixture deviation {mix.max_sigma_units:g} sigma")
        if mart_dev > mart_tol:
            hard.append(f"martingale drift {mart_dev:g} > {mart_tol:g}")
        payload["hs_covariance_residual"] = hs_resid
        payload["hs_tolerance"] = tol
        payload["mixture_residual"] = float(np.max(np.abs(
            mix.mixture_probs - mix.target_probs)))
        payload["mixture"] = {"passed": mix.passed,
                              "max_sigma_units": mix.max_sigma_units,
                              "n_draws": mix.n_draws}
        payload["martingale"] = {"deviation": mart_dev, "tolerance": mart_tol,
                                 "stderr_max": float(np.max(stderr))}
    else:
        payload["mixture_residual"] = None
        payload["note"] = "oracle checks skipped above 12 spins"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonValidityWarning)
        exc = excise(g, d, epsilon)
    scale = beta / np.sqrt(d)
    J_B = exc.bulk.with_edge_weights(exc.bulk.edge_w * scale) if exc.bulk.m \
        else exc.bulk
    J_H = exc.near_forest.with_edge_weights(exc.near_forest.edge_w * scale) \
        if exc.near_forest.m else exc.near_forest
    gamma = min(0.95, beta * np.sqrt(1.0 + epsilon))
    K_target = eta + 4.0 * beta * (1.0 + epsilon)
    cm = build_control_matrix(exc, J_B, 0.0, eta, K_target, gamma, exc.D,
                              delta_prime)
    field_probes = standard_field_probes(model.n, rs.child("probes"),
                                         extra_gaussians=probes)
    pcn = path_covariance_norm(exc, J_B, J_H, t_grid, field_probes, mode=mode,
                               eta=eta, K_target=K_target, gamma=gamma,
                               D=exc.D, delta=delta_prime,
                               seed=rs.child("path"))
    if not pcn.psd_all_pass:
        hard.append("covariance domination failed along the path")
    if not cm.condition_ok:
        warns.append("control-matrix admissibility K f(gamma) <= 1 - 2 delta' violated")
    if strict and warns:
        hard.extend(warns)

    per_t = {}
    for e in pcn.entries:
        key = repr(e["t"])
        agg = per_t.setdefault(key, {"norm": 0.0, "psd_pass": True})
        agg["norm"] = max(agg["norm"], e["norm"])
        agg["psd_pass"] = agg["psd_pass"] and e["psd_pass"]
    payload.update({
        "control_matrix": {"theta": cm.theta, "rho": cm.rho, "K": cm.K,
                           "eta": cm.eta, "delta_prime": cm.delta_prime,
                           "Delta": cm.Delta, "condition_ok": cm.condition_ok,
                           "min_eigenvalue": cm.min_eigenvalue()},
        "per_t": per_t,
        "path": {"fitted_C": pcn.fitted_C, "psd_all_pass": pcn.psd_all_pass,
                 "mode": pcn.mode,
                 "entries": [{"t": e["t"], "probe": e["probe"],
                              "norm": e["norm"],
                              "domination_ratio": e["domination_ratio"]}
                             for e in pcn.entries]},
        "hard_failures": hard, "warnings": warns,
    })
    _emit(_document(cfg, payload), _resolve_out(out), "localize")
    return 2 if hard else 0


def _sec_covariance(exc, beta, d, max_exact, seed):
    scale = beta / np.sqrt(d)
    h = exc.near_forest
    coupling = h.with_edge_weights(h.edge_w * scale) if h.m else h
    cv = covariance_bound_verdicts(exc, coupling, mode="exact", seed=seed,
                                   max_exact=max_exact)
    counts = {}
    for r in cv.rows:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    worst = sorted((r for r in cv.rows if r.verdict == "fail"),
                   key=lambda r: r.bound - r.value)[:10]
    payload = {"gamma": cv.gamma, "D": cv.D, "n_components": cv.n_components,
               "n_skipped": cv.n_skipped, "verdict_counts": counts,
               "inconclusive_fraction": cv.inconclusive_fraction,
               "failures": [r.to_dict() for r in worst]}
    hard = [f"{len(cv.failures)} covariance bound failures"] if cv.failures else []
    return payload, hard, []


def _sec_distance_norms(exc, ell_max, seed):
    h = exc.near_forest
    bmask = np.zeros(h.n, dtype=bool)
    bmask[exc.boundary] = True
    best = None
    for comp in sorted(connected_components(h).components,
                       key=lambda c: -c.n_vertices):
        if 0 < comp.n_vertices <= 400 and comp.n_edges > 0:
            best = comp
            break
    if best is None:
        return {"checked": False}, [], []
    sub, verts = h.induced_subgraph(best.vertices)
    Delta = observed_delta(sub, exc.D)[0]
    s_local = np.flatnonzero(bmask[verts])
    rows = distance_norm_check(sub, s_local, Delta, exc.D, ell_max,
                               seed=seed)
    hard = []
    for row in rows:
        for which in ("full", "restricted", "product"):
            r = row[which]
            if r.applicable and not r.passed:
                hard.append(f"distance norm {which} fails at ell={row['ell']}")
    payload = {"checked": True, "component_size": int(verts.shape[0]),
               "Delta": Delta,
               "rows": [{"ell": row["ell"],
                         **{w: row[w].to_dict() for w in
                            ("full", "restricted", "product")}}
                        for row in rows]}
    return payload, hard, []


def _sec_mixing(preset, seed: RngSeed):
    n = preset["mix_n"]
    spec = GeneratorSpec.parse(f"sbm:{n},5,0")
    horizon = int(50 * n * np.log(n))
    stride = max(1, horizon // 100)
    curves_rows = []
    payload = {"n": n, "horizon": horizon, "eps": 0.01, "runs": {}}
    hard = []
    for label, beta in (("fast", preset["beta"]), ("slow", preset["beta_slow"])):
        model = build_model(spec, beta, seed.child(f"mixgraph-{label}"))
        inits = standard_inits(n, seed.child(f"inits-{label}"), n_random=4)
        rep = tv_mixing_curve(model, inits, horizon, mode="exact", eps=0.01,
                              stride=stride)
        if not (0.0 < rep.gap <= 1.0 + 1e-12):
            hard.append(f"spectral gap {rep.gap:g} outside (0, 1] ({label})")
        for nm in rep.tv:
            drift = np.max(np.diff(rep.tv[nm])) if rep.tv[nm].size > 1 else 0.0
            if drift > 1e-9:
                hard.append(f"TV curve not monotone for {nm} ({label})")
            for t, v in zip(rep.times, rep.tv[nm]):
                curves_rows.append((label, nm, int(t), float(v)))
        payload["runs"][label] = {
            "beta": beta, "gap": rep.gap,
            "t_mix": rep.t_mix, "reached": rep.reached,
            "all_mixed": all(rep.reached.values()),
        }
    payload["contrast_ok"] = (payload["runs"]["fast"]["all_mixed"]
                              and not payload["runs"]["slow"]["all_mixed"])
    return payload, hard, [], curves_rows


def _sec_tails(g, d, epsilon, preset, seed: RngSeed):
    radii = tuple(range(1, preset["tail_rmax"] + 1))
    s_values = (1.5, 2.0)
    hist = ball_tail_histogram(g, radii, s_values, d, preset["tail_sample"],
                               seed.child("tails"))
    sizes = gw_ball_simulator(d, preset["tail_rmax"], preset["gw_trials"],
                              seed.child("gw"))
    gw_freq, gw_err = gw_exceedance(sizes, d, radii, s_values)
    hard = []
    rows = []
    for a, r in enumerate(radii):
        for b, s in enumerate(s_values):
            gf = hist.freq[a, b]
            sigma = np.sqrt(gw_err[a, b] ** 2
                            + max(gf * (1 - gf), 1.0 / hist.sample_size)
                            / hist.sample_size)
            ok = gf <= gw_freq[a, b] + 3.0 * sigma
            if not ok:
                hard.append(f"ball tail at r={r}, s={s:g} above the GW envelope")
            rows.append((r, float(s), float(gf), float(gw_freq[a, b]),
                         float(sigma), ball_tail_bound(d, epsilon, r), ok))
    # Tail-decay direction: log-frequency against the theory's growth variable.
    xs = [(1.0 + epsilon / 4.0) ** r for a, r in enumerate(radii)
          if hist.freq[a, :].max() > 0]
    ys = [np.log(hist.freq[a, :].max()) for a, r in enumerate(radii)
          if hist.freq[a, :].max() > 0]
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 else None
    warns = [] if slope is None or slope < 0 else \
        [f"tail log-frequency slope {slope:g} is not negative"]
    payload = {"sample_size": hist.sample_size, "gw_trials": preset["gw_trials"],
               "radii": list(radii), "s_values": list(s_values),
               "graph_freq": hist.freq, "gw_freq": gw_freq,
               "slope_log_freq": slope}
    return payload, hard, warns, rows


@cli.command()
@click.option("--suite", type=click.Choice(sorted(SUITES)), default="quick")
@click.option("--seed", type=int, required=True)
@click.option("--gen", "gen_text", default=None, help="Override the suite's graph.")
@click.option("--epsilon", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--threads", type=int, default=1)
@click.option("--strict", is_flag=True)
@click.option("--out", default=None)
def report(suite, seed, gen_text, epsilon, beta, threads, strict, out):
    """Run the full verdict battery and emit report.json plus CSV companions."""
    preset = dict(SUITES[suite])
    if epsilon is not None:
        preset["epsilon"] = epsilon
    if beta is not None:
        preset["beta"] = beta
    spec = GeneratorSpec.parse(gen_text) if gen_text else \
        GeneratorSpec.parse(f"sbm:{preset['n']},{preset['d']:g},{preset['lam']:g}")
    cfg = ExperimentConfig(gen=spec, seed=seed, epsilon=preset["epsilon"],
                           beta=preset["beta"], suite=suite, threads=threads,
                           strict=strict)
    rs = cfg.root_seed()
    g, _ = build_graph(spec, rs)
    d = _graph_d(spec, g, None)

    exc, dec_payload, hard, stats = _decomposition_payload(
        g, d, preset["epsilon"], rs)
    warns = []
    if dec_payload["epsilon_warnings"]:
        warns.append("epsilon below the validity floor")

    jobs = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        jobs["spectra"] = pool.submit(_spectra_payload, g, d,
                                      preset["epsilon"],
                                      rs.child("spectra"), 1.2, exc)
        jobs["covariance"] = pool.submit(_sec_covariance, exc, preset["beta"],
                                         d, preset["cov_max_exact"],
                                         rs.child("cov"))
        jobs["distance"] = pool.submit(_sec_distance_norms, exc,
                                       preset["dist_ell"], rs.child("dist"))
        jobs["mixing"] = pool.submit(_sec_mixing, preset, rs.child("mixing"))
        jobs["tails"] = pool.submit(_sec_tails, g, d, preset["epsilon"],
                                    preset, rs.child("tails"))

    _, spec_payload, spec_hard, spec_warn = jobs["spectra"].result()
    cov_payload, cov_hard, _ = jobs["covariance"].result()
    dist_payload, dist_hard, _ = jobs["distance"].result()
    mix_payload, mix_hard, _, mix_rows = jobs["mixing"].result()
    tail_payload, tail_hard, tail_warn, tail_rows = jobs["tails"].result()
    hard += spec_hard + cov_hard + dist_hard + mix_hard + tail_hard
    warns += spec_warn + tail_warn
    if strict and warns:
        hard = hard + [f"strict: {w}" for w in warns]

    payload = {
        "suite": suite,
        "decomposition_stats": dec_payload,
        "spectral_verdicts": {**spec_payload, "distance_norms": dist_payload},
        "covariance_verdicts": cov_payload,
        "mixing": mix_payload,
        "tails": tail_payload,
        "hard_failures": hard,
        "warnings": warns,
    }
    out_dir = _resolve_out(out, default=".")
    _write_csv(out_dir, "mixing_curves.csv",
               ("regime", "init", "step", "tv"), mix_rows)
    _write_csv(out_dir, "tails.csv",
               ("r", "s", "graph_freq", "gw_freq", "sigma", "theory_bound",
                "within_envelope"), tail_rows)
    if stats is not None:
        _write_csv(out_dir, "components.csv",
                   ("size", "edges", "excess", "diameter"),
                   [tuple(int(x) for x in c) for c in stats.components])
    _emit(_document(cfg, payload), out_dir, "report")
    return 2 if hard else 0


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    raise SystemExit(main())
