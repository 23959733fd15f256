"""Experiment configuration: generator specs, run knobs, canonical JSON.

Configs round-trip losslessly through their on-disk dict form, and every
emitted artifact embeds the resolved config plus its sha256 hash so runs
can be compared and reproduced bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .generate import CenteredInteraction, gen_sbm, random_signing
from .graphs import Graph, read_edgelist
from .ising import IsingModel
from .rng import RngSeed

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GeneratorSpec:
    """What graph to build: ``sbm:n,d,lambda`` or ``file:path``.

    ``signs`` selects edge weights ("random" fair signing, "plus" all +1),
    ``centered`` asks for the rank-two-corrected coupling operator instead
    of the plain signed adjacency.
    """

    kind: str
    n: int = 0
    d: float = 0.0
    lam: float = 0.0
    path: str = ""
    signs: str = "random"
    centered: bool = False

    @staticmethod
    def parse(text: str, signs: str = "random", centered: bool = False) -> "GeneratorSpec":
        head, sep, rest = text.partition(":")
        if head == "sbm":
            parts = rest.split(",")
            if len(parts) != 3:
                raise ValueError(f"expected sbm:n,d,lambda, got {text!r}")
            return GeneratorSpec("sbm", n=int(parts[0]), d=float(parts[1]),
                                 lam=float(parts[2]), signs=signs, centered=centered)
        if head == "er":
            parts = rest.split(",")
            if len(parts) != 2:
                raise ValueError(f"expected er:n,d, got {text!r}")
            return GeneratorSpec("sbm", n=int(parts[0]), d=float(parts[1]),
                                 lam=0.0, signs=signs, centered=centered)
        if head == "file":
            if not rest:
                raise ValueError("file: spec needs a path")
            return GeneratorSpec("file", path=rest, signs=signs, centered=centered)
        raise ValueError(f"unknown generator kind {head!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d": self.d, "lam": self.lam,
                "path": self.path, "signs": self.signs, "centered": self.centered}

    @staticmethod
    def from_dict(d: dict) -> "GeneratorSpec":
        return GeneratorSpec(kind=d["kind"], n=int(d["n"]), d=float(d["d"]),
                             lam=float(d["lam"]), path=d["path"],
                             signs=d["signs"], centered=bool(d["centered"]))

    def describe(self) -> str:
        if self.kind == "file":
            return f"file:{self.path}"
        return f"sbm:{self.n},{self.d:g},{self.lam:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    gen: GeneratorSpec
    seed: int = 0
    epsilon: float = 0.5
    beta: float = 0.0
    t_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    n_probes: int = 5
    horizon: int = 0
    slack: float = 1.2
    tv_eps: float = 0.01
    steps: int = 0
    stride: int = 0
    burn: int = 0
    suite: str = ""
    threads: int = 1
    strict: bool = False

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gen"] = self.gen.to_dict()
        d["t_grid"] = list(self.t_grid)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        kw = dict(d)
        kw["gen"] = GeneratorSpec.from_dict(d["gen"])
        kw["t_grid"] = tuple(float(t) for t in d["t_grid"])
        return ExperimentConfig(**kw)

    def root_seed(self) -> RngSeed:
        return RngSeed(self.seed, 0)

    def sha256(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2)


def jsonable(obj):
    """Recursive conversion to plain JSON types; numpy scalars and arrays
    become Python numbers and lists, NaN becomes None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not np.isfinite(f) else f
    if obj is None or isinstance(obj, str):
        return obj
    if dataclasses.is_dataclass(obj):
        return jsonable(dataclasses.asdict(obj))
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def build_graph(spec: GeneratorSpec, seed: RngSeed):
    """Realize the generator: returns (graph, sigma). sigma is None for
    file inputs (no planted labels)."""
    if spec.kind == "file":
        return read_edgelist(spec.path), None
    g, sigma = gen_sbm(spec.n, spec.d, spec.lam, seed.child("graph"))
    if spec.signs == "random":
        g = random_signing(g, seed.child("signs"))
    elif spec.signs != "plus":
        raise ValueError(f"unknown sign mode {spec.signs!r}")
    return g, sigma


def build_model(spec: GeneratorSpec, beta: float, seed: RngSeed) -> IsingModel:
    """Graph draw plus coupling strength: J = (beta/sqrt d) W for the plain
    signed graph, or the centered operator when asked."""
    g, sigma = build_graph(spec, seed)
    if spec.centered:
        if sigma is None:
            raise ValueError("centered coupling needs generated labels, not a file")
        if spec.signs != "plus":
            raise ValueError("centered coupling uses the unsigned adjacency")
        return IsingModel(CenteredInteraction(g, sigma, spec.d, spec.lam, beta))
    if beta == 0.0:
        raise ValueError("beta must be nonzero for a coupled model")
    d_eff = spec.d if spec.kind == "sbm" else max(1.0, 2.0 * g.m / max(g.n, 1))
    return IsingModel(g.with_edge_weights(g.edge_w * (beta / np.sqrt(d_eff))))
