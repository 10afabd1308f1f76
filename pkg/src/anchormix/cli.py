"""Command-line pipeline: select anchors, fit the anchored mixture, compare to taxonomy.

Usage::

    anchormix select-anchors --config run.json [--method em-reg] [--seed 1] [--out DIR]
    anchormix fit --config run.json [--anchors DIR/anchors.json]
    anchormix crosstab --config run.json [--summary DIR/summary.json]
    anchormix run-all --config run.json

Exit status is 0 on success, 2 for configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cdw import cdw_anchors
from .core import AnchorSet, RegPrior, load_dataset
from .em_anchor import MvnPrior, run_anchored_em
from .gibbs import (gibbs_anchored_mixreg, label_switch_diagnostic, map_allocations,
                    taxonomy_crosstab)
from .numerics import RngStream

METHODS = ("em-reg", "em-mvn", "cdw-reg")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: Optional[str] = None
    method: str = "cdw-reg"
    k: int = 3
    m: int = 3
    seed: int = 20190101
    log_transform: bool = True
    center: bool = True
    # regression prior
    mu_beta: list = field(default_factory=lambda: [3.5, 0.6])
    v: list = field(default_factory=lambda: [1.0, 0.5])
    a: float = 5.0
    b: float = 1.0
    alpha: float = 1.0
    # Gaussian-mixture prior; mvn_mu None means the sample mean of z
    mvn_mu: Optional[list] = None
    mvn_kappa: float = 1.25
    mvn_w: list = field(default_factory=lambda: [[1.5, 0.0], [0.0, 1.5]])
    mvn_nu: float = 2.0
    # EM
    em_starts: int = 20
    em_max_iter: int = 500
    em_tol: float = 1e-8
    # case-deletion weights
    cdw_samples: int = 10_000
    cdw_burn_in: int = 1_000
    cdw_dims: int = 3
    # anchored fit
    n_samples: int = 20_000
    burn_in: int = 2_000
    eta_counts_anchored: bool = True
    taxonomy_level: str = "order"
    out: str = "anchormix-out"

    def validate(self) -> "RunConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.k < 1 or self.m < 0:
            raise ConfigError("k must be >= 1 and m >= 0")
        if self.taxonomy_level not in ("order", "suborder"):
            raise ConfigError("taxonomy_level must be 'order' or 'suborder'")
        if min(self.n_samples, self.cdw_samples, self.em_starts) < 1:
            raise ConfigError("sample counts and em_starts must be positive")
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON: {exc}") from None

    def config_hash(self) -> str:
        """Hash of every field that affects results (the output directory does not)."""
        fields = dataclasses.asdict(self)
        del fields["out"]
        canon = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def reg_prior(self) -> RegPrior:
        return RegPrior(np.array(self.mu_beta), np.array(self.v), self.a, self.b, self.alpha)

    def mvn_prior(self, z) -> MvnPrior:
        mu = z.mean(axis=0) if self.mvn_mu is None else np.array(self.mvn_mu)
        return MvnPrior(mu, self.mvn_kappa, np.array(self.mvn_w), self.mvn_nu, self.alpha)

    def streams(self):
        # fixed roles so each command sees the same stream regardless of which ran before
        select, fit = RngStream(self.seed).spawn(2)
        return select, fit


# -- output helpers ------------------------------------------------------------


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "method": cfg.method}


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path, cfg: RunConfig, header, rows) -> None:
    prov = _provenance(cfg)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={prov['config_hash']} seed={prov['seed']} method={prov['method']}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


def _load(cfg: RunConfig):
    if not cfg.dataset:
        raise ConfigError("no dataset path given")
    if not os.path.exists(cfg.dataset):
        raise ConfigError(f"dataset not found: {cfg.dataset}")
    return load_dataset(cfg.dataset, cfg.log_transform, cfg.center)


def _read_anchors(path, k) -> AnchorSet:
    if not os.path.exists(path):
        raise ConfigError(f"anchors file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    comps = sorted(doc["components"], key=lambda c: c["component"])
    if len(comps) != k:
        raise ConfigError(f"anchors file has {len(comps)} components, config k={k}")
    return AnchorSet(tuple(tuple(c["indices"]) for c in comps))


# -- commands --------------------------------------------------------------------


def select_anchors(cfg: RunConfig, data=None):
    """Run the configured strategy; returns ``(AnchorSet, extras)``."""
    data = _load(cfg) if data is None else data
    if cfg.k * cfg.m > data.n:
        raise ConfigError(f"k*m = {cfg.k * cfg.m} exceeds n = {data.n}")
    rng, _ = cfg.streams()
    if cfg.method == "cdw-reg":
        anchors, labels, summary = cdw_anchors(data, cfg.reg_prior(), cfg.k, cfg.m,
                                               cfg.cdw_samples, cfg.cdw_burn_in, cfg.cdw_dims, rng)
        return anchors, {"cluster_labels": labels, "summary": summary}
    spec = "reg" if cfg.method == "em-reg" else "mvn"
    prior = cfg.reg_prior() if spec == "reg" else cfg.mvn_prior(data.z)
    trace = run_anchored_em(spec, data, prior, cfg.k, cfg.m, cfg.em_starts, cfg.em_max_iter,
                            cfg.em_tol, rng)
    # EM labels are arbitrary: number regression components by descending slope,
    # Gaussian components by descending mean response
    key = trace.params.beta[:, 1] if spec == "reg" else trace.params.theta[:, 0]
    order = np.argsort(-key, kind="stable")
    anchors = AnchorSet(tuple(trace.anchors.sets[j] for j in order))
    return anchors, {"trace": trace, "component_order": order}


def cmd_select_anchors(cfg: RunConfig) -> str:
    data = _load(cfg)
    anchors, extras = select_anchors(cfg, data)
    os.makedirs(cfg.out, exist_ok=True)
    species = data.species or [str(i) for i in range(data.n)]
    doc = dict(_provenance(cfg), k=cfg.k, m=cfg.m, components=[
        {"component": j, "indices": list(s), "species": [species[i] for i in s]}
        for j, s in enumerate(anchors.sets)])
    if "trace" in extras:
        tr = extras["trace"]
        doc["em"] = {"final_objective": tr.final_objective, "n_iter": tr.n_iter,
                     "converged": tr.converged, "start_objectives": list(tr.start_objectives)}
    path = os.path.join(cfg.out, "anchors.json")
    _write_json(path, doc)
    if "summary" in extras:
        summ, labels = extras["summary"], extras["cluster_labels"]
        d = summ.scores.shape[1]
        _write_csv(os.path.join(cfg.out, "cdw_scores.csv"), cfg,
                   ["index", "species"] + [f"pc{c + 1}" for c in range(d)] + ["cluster", "anchored"],
                   [[i, species[i]] + [_fmt(v) for v in summ.scores[i]]
                    + [int(labels[i]), int(i in anchors.indices)] for i in range(data.n)])
    return path


def cmd_fit(cfg: RunConfig, anchors_path: Optional[str] = None) -> str:
    data = _load(cfg)
    anchors_path = anchors_path or os.path.join(cfg.out, "anchors.json")
    anchors = _read_anchors(anchors_path, cfg.k)
    anchors.check(data.n, cfg.k)
    _, rng = cfg.streams()
    chain = gibbs_anchored_mixreg(data, anchors, cfg.reg_prior(), cfg.k, cfg.n_samples,
                                  cfg.burn_in, rng, cfg.eta_counts_anchored)
    chain.check_anchored()
    fit = map_allocations(chain)
    switch = label_switch_diagnostic(chain)
    os.makedirs(cfg.out, exist_ok=True)
    k, p = cfg.k, data.p

    header = ([f"beta_{j}_{c}" for j in range(k) for c in range(p)] + ["sigma2"]
              + [f"eta_{j}" for j in range(k)] + [f"s_{i}" for i in range(data.n)])
    rows = ([_fmt(v) for v in chain.beta[t].ravel()] + [_fmt(chain.sigma2[t])]
            + [_fmt(v) for v in chain.eta[t]] + [int(v) for v in chain.s[t]]
            for t in range(len(chain)))
    _write_csv(os.path.join(cfg.out, "chain.csv"), cfg, header, rows)

    anchored = set(anchors.indices.tolist())
    species = data.species or [str(i) for i in range(data.n)]
    _write_csv(os.path.join(cfg.out, "points.csv"), cfg,
               ["index", "species", "x", "y", "s_hat", "anchored"],
               [[i, species[i], _fmt(data.x[i, 1]), _fmt(data.y[i]), int(fit.s_hat[i]),
                 int(i in anchored)] for i in range(data.n)])
    lo, hi = float(data.x[:, 1].min()), float(data.x[:, 1].max())
    _write_csv(os.path.join(cfg.out, "lines.csv"), cfg,
               ["component", "intercept", "slope", "x0", "y0", "x1", "y1"],
               [[j, _fmt(b0), _fmt(b1), _fmt(lo), _fmt(b0 + b1 * lo), _fmt(hi), _fmt(b0 + b1 * hi)]
                for j, (b0, b1) in enumerate(fit.lines)])
    summary = dict(_provenance(cfg),
                   anchors_file=os.path.basename(anchors_path),
                   lines=fit.lines.tolist(),
                   beta_mean=fit.beta_mean.tolist(),
                   sigma2_mean=float(chain.sigma2.mean()),
                   s_hat=fit.s_hat.tolist(),
                   sizes=fit.sizes.tolist(),
                   allocation_probs=fit.allocation_probs.tolist(),
                   label_switches=switch.n_switches,
                   n_samples=len(chain), burn_in=cfg.burn_in)
    path = os.path.join(cfg.out, "summary.json")
    _write_json(path, summary)
    return path


def cmd_crosstab(cfg: RunConfig, summary_path: Optional[str] = None) -> str:
    data = _load(cfg)
    summary_path = summary_path or os.path.join(cfg.out, "summary.json")
    if not os.path.exists(summary_path):
        raise ConfigError(f"summary file not found: {summary_path}")
    with open(summary_path, encoding="utf-8") as fh:
        s_hat = np.array(json.load(fh)["s_hat"], dtype=int)
    labels = getattr(data, cfg.taxonomy_level)
    if labels is None:
        raise ConfigError("dataset has no taxonomy labels")
    tab = taxonomy_crosstab(s_hat, labels, cfg.k)
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "crosstab.csv"), cfg, ["component"] + list(tab.labels),
               [[j] + row.tolist() for j, row in enumerate(tab.table)])
    path = os.path.join(cfg.out, "crosstab.json")
    _write_json(path, dict(_provenance(cfg), level=cfg.taxonomy_level, ari=tab.ari,
                           labels=list(tab.labels), table=tab.table.tolist()))
    return path


def cmd_run_all(cfg: RunConfig, methods=METHODS) -> list:
    outputs = []
    for method in methods:
        sub = dataclasses.replace(cfg, method=method, out=os.path.join(cfg.out, method)).validate()
        cmd_select_anchors(sub)
        cmd_fit(sub)
        outputs.append(cmd_crosstab(sub))
    return outputs


# -- entry point -------------------------------------------------------------------


def _build_config(args) -> RunConfig:
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            cfg = RunConfig.from_json(fh.read())
    else:
        cfg = RunConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("method", args.method),
                                   ("out", args.out), ("dataset", args.dataset)) if v is not None}
    return dataclasses.replace(cfg, **overrides).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchormix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("select-anchors", "fit", "crosstab", "run-all"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--dataset", help="species CSV (overrides the config)")
        if name == "fit":
            sp.add_argument("--anchors", help="anchors JSON (default OUT/anchors.json)")
        if name == "crosstab":
            sp.add_argument("--summary", help="summary JSON (default OUT/summary.json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "select-anchors":
            path = cmd_select_anchors(cfg)
        elif args.command == "fit":
            path = cmd_fit(cfg, args.anchors)
        elif args.command == "crosstab":
            path = cmd_crosstab(cfg, args.summary)
        else:
            path = ", ".join(cmd_run_all(cfg, (args.method,) if args.method else METHODS))
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"anchormix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError, KeyError, TypeError) as exc:
        # ConfigError plus dataset/anchor validation failures: all input problems
        print(f"anchormix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
