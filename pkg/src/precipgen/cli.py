"""Command-line interface: ``precipgen {fit,simulate,predict,evaluate,synth}``.

Failures print one JSON line ``{"error": <category>, "message": ...}`` to
stderr and exit with 2 (configuration), 3 (data) or 4 (numerical).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig
from .data import align_network, load_network, load_panel, save_network, save_panel
from .errors import ConfigError, PrecipGenError
from .evaluation import evaluate
from .generator import parametric_bootstrap, predict, simulate_conditional_one_step
from .inference import FitOptions, fit
from .occurrence import CutoffField, OccurrenceModel, estimate_cutoffs, fit_occurrence
from .synthetic import CUTOFF, PHI_DEFAULT, SCENARIOS, T_DEFAULT, make_synthetic

log = logging.getLogger("precipgen")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(args) -> RunConfig:
    doc = io.read_json(args.config, io.CONFIG_SCHEMA) if getattr(args, "config", None) else None
    return RunConfig.from_sources(doc, vars(args))


def _out_dir(cfg) -> Path:
    cfg.require("out")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cutoffs(path, panel_like, u_r):
    cut = load_panel(path)
    io.check_panel_shape(panel_like, cut, "cutoff file")
    return CutoffField(cut.values, u_r, None, cut.timestamps, cut.sites)


def cmd_fit(args) -> int:
    cfg = _config(args)
    cfg.require("data", "network", "u_r", "seed")
    out = _out_dir(cfg)
    panel = load_panel(cfg.data)
    net = align_network(panel, load_network(cfg.network))
    extra = {}
    if cfg.cutoffs:
        cutoffs = _load_cutoffs(cfg.cutoffs, panel, cfg.u_r)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            occ = fit_occurrence(panel, cfg.H_max)
        for w in caught:
            log.warning("%s", w.message)
        cutoffs = estimate_cutoffs(panel, occ, cfg.u_r)
        io.write_json(out / "occurrence.json", {"schema": io.OCCURRENCE_SCHEMA, **occ.to_dict()})
        extra["occurrence_warnings"] = occ.warnings
    save_panel(cutoffs.as_panel(panel), out / "cutoffs.csv")
    opts = FitOptions(
        nu_grid=cfg.nu_grid, gaussian_baseline=cfg.gaussian, n_starts=cfg.n_starts,
        algorithms=cfg.algorithms, seed=cfg.seed,
    )
    result = fit(panel, net, cutoffs, opts)
    extra.update({"u_r": cfg.u_r, "seed": cfg.seed, "sites": panel.sites, "T": panel.T})
    io.save_fit(result, out / "fit.json", extra)
    print(json.dumps({"fit": str(out / "fit.json"), "loglik": result.loglik, "nu": result.theta_hat.nu}))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    cfg.require("network", "cutoffs", "u_r", "seed", "K")
    if not args.fit:
        raise ConfigError("missing required setting: --fit")
    out = _out_dir(cfg)
    result = io.load_fit(args.fit)
    cut_panel = load_panel(cfg.cutoffs)
    net = align_network(cut_panel, load_network(cfg.network))
    cutoffs = CutoffField(cut_panel.values, cfg.u_r, None, cut_panel.timestamps, cut_panel.sites)
    if args.mode == "conditional":
        cfg.require("data")
        panel = load_panel(cfg.data)
        io.check_panel_shape(panel, cut_panel, "cutoff file")
        ens = simulate_conditional_one_step(result.theta_hat, net, cutoffs, panel, cfg.K, cfg.seed)
    else:
        ens = parametric_bootstrap(result, net, cutoffs, cut_panel.T, cfg.K, cfg.seed)
    io.save_ensemble(ens, out, {"fit": Path(args.fit).name})
    print(json.dumps({"ensemble": str(out / "manifest.json"), "K": ens.K, "mode": ens.mode}))
    return 0


def cmd_predict(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    ens = io.load_ensemble(args.ensemble)
    res = predict(ens, args.levels)
    panel = ens.panel(0)
    save_panel(panel.with_values(res["mean"]), out / "mean.csv")
    files = {"mean": "mean.csv"}
    for lev, (lo, hi) in res["bands"].items():
        tag = f"{lev:g}"
        save_panel(panel.with_values(lo), out / f"band_{tag}_lower.csv")
        save_panel(panel.with_values(hi), out / f"band_{tag}_upper.csv")
        files[tag] = [f"band_{tag}_lower.csv", f"band_{tag}_upper.csv"]
    io.write_json(out / "prediction.json", {"schema": "precipgen.prediction/1", "levels": list(res["bands"]),
                                            "files": files, "K": ens.K})
    print(json.dumps({"prediction": str(out / "prediction.json")}))
    return 0


def _write_qq(path, table):
    header = ["prob", "observed", "median", "lower_2.5", "upper_97.5"]
    io.write_table(path, header, table.rows())


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    cfg.require("data")
    out = _out_dir(cfg)
    panel = load_panel(cfg.data)
    ens = io.load_ensemble(args.ensemble)
    io.check_panel_shape(panel, ens.panel(0), "ensemble replicate")
    params = cutoffs = net = None
    if args.fit and cfg.cutoffs and cfg.network:
        cfg.require("u_r")
        params = io.load_fit(args.fit).theta_hat
        cutoffs = _load_cutoffs(cfg.cutoffs, panel, cfg.u_r)
        net = align_network(panel, load_network(cfg.network))
    rep = evaluate(panel, ens, params, cutoffs, net)
    files = {"qq_all": "qq_all.csv", "concurrence": "concurrence.csv", "transitions": "transitions.csv"}
    _write_qq(out / "qq_all.csv", rep.qq["all"])
    if rep.qq["positive"] is not None:
        _write_qq(out / "qq_positive.csv", rep.qq["positive"])
        files["qq_positive"] = "qq_positive.csv"
    io.write_table(
        out / "concurrence.csv", ["n_wet", "observed", "ensemble"],
        ((i, int(a), int(b)) for i, (a, b) in enumerate(zip(rep.concurrence, rep.concurrence_ensemble))),
    )
    summ = rep.summary()
    io.write_table(
        out / "transitions.csv", ["transition", "observed", "ensemble_mean"],
        ((k, rep.transitions.probs[k], summ["transitions_ensemble_mean"][k]) for k in rep.transitions.probs),
    )
    if rep.dry_prob_curve is not None:
        io.write_table(out / "dry_probability.csv", ["timestamp", "all_dry_probability"],
                       zip(np.datetime_as_string(panel.timestamps[1:], unit="s"), rep.dry_prob_curve))
        files["dry_probability"] = "dry_probability.csv"
    io.write_json(out / "report.json", {"schema": io.REPORT_SCHEMA, **summ, "files": files,
                                        "ensemble_mode": ens.mode, "K": ens.K})
    print(json.dumps({"report": str(out / "report.json"), "mrmse_percent": rep.mrmse}))
    return 0


def cmd_synth(args) -> int:
    cfg = _config(args)
    cfg.require("seed")
    out = _out_dir(cfg)
    if (args.nu is None) != (args.alpha is None):
        raise ConfigError("give both --nu and --alpha, or neither for all six scenarios")
    scenarios = SCENARIOS if args.nu is None else ((args.nu, args.alpha),)
    written = []
    for nu, alpha in scenarios:
        ds = make_synthetic(nu, alpha, cfg.seed, args.T, args.phi)
        d = out if args.nu is not None else out / f"nu{nu:g}_alpha{alpha:g}"
        d.mkdir(parents=True, exist_ok=True)
        save_panel(ds.panel, d / "panel.csv")
        save_panel(ds.cutoffs.as_panel(ds.panel), d / "cutoffs.csv")
        save_network(ds.net, d / "network.csv", as_matrix=True)
        io.write_json(d / "truth.json", {"schema": io.TRUTH_SCHEMA, "params": ds.params.to_dict(),
                                         "seed": cfg.seed, "T": args.T, "cutoff": CUTOFF})
        written.append(str(d))
    print(json.dumps({"datasets": written}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="precipgen", description="Multi-site censored skew-t precipitation generator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        return sp

    f = common(sub.add_parser("fit", help="estimate cutoffs and fit the model"))
    f.add_argument("--data")
    f.add_argument("--network")
    f.add_argument("--cutoffs", help="use this cutoff panel instead of estimating one")
    f.add_argument("--u-r", dest="u_r", type=float)
    f.add_argument("--H-max", dest="H_max", type=int)
    f.add_argument("--nu-grid", dest="nu_grid", type=_floats)
    f.add_argument("--n-starts", dest="n_starts", type=int)
    f.add_argument("--algorithms", type=lambda s: tuple(s.split(",")))
    f.add_argument("--gaussian", action="store_const", const=True, help="fit the Gaussian-error baseline only")
    f.set_defaults(func=cmd_fit)

    s = common(sub.add_parser("simulate", help="simulate an ensemble from a fit"))
    s.add_argument("--fit")
    s.add_argument("--network")
    s.add_argument("--cutoffs")
    s.add_argument("--data", help="observed panel (conditional mode)")
    s.add_argument("--u-r", dest="u_r", type=float)
    s.add_argument("-K", "--K", dest="K", type=int)
    s.add_argument("--mode", choices=("unconditional", "conditional"), default="unconditional")
    s.set_defaults(func=cmd_simulate)

    r = common(sub.add_parser("predict", help="ensemble mean and quantile bands"))
    r.add_argument("--ensemble", required=True)
    r.add_argument("--levels", type=_floats, default=(0.95,))
    r.set_defaults(func=cmd_predict)

    e = common(sub.add_parser("evaluate", help="metrics and plot-ready tables"))
    e.add_argument("--data")
    e.add_argument("--ensemble", required=True)
    e.add_argument("--fit")
    e.add_argument("--cutoffs")
    e.add_argument("--network")
    e.add_argument("--u-r", dest="u_r", type=float)
    e.set_defaults(func=cmd_evaluate)

    y = common(sub.add_parser("synth", help="generate benchmark synthetic datasets"))
    y.add_argument("--nu", type=float)
    y.add_argument("--alpha", type=float)
    y.add_argument("--T", type=int, default=T_DEFAULT)
    y.add_argument("--phi", type=float, default=PHI_DEFAULT)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except PrecipGenError as exc:
        doc = {"error": exc.category, "message": str(exc)}
        trace = getattr(exc, "trace", None)
        if trace:
            doc["trace"] = trace
        sys.stderr.write(json.dumps(io._plain(doc), sort_keys=True) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
