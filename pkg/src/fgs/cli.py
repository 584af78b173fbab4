"""``fgs`` command line.

Every tunable setting has a default in ``DEFAULTS``; a JSON file passed with
``--config`` may override any of them and explicit flags override the file.
Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import KernelFamily, KernelSpec
from .dataset import Dataset, load_csv, standardize
from .errors import DataError, FgsError, NumericalError
from .explore import explore, gamma_compare
from .forest import ForestConfig
from .jackknife import JackknifeConfig, debias, default_jackknife_grid
from .persist import dumps, load_model, save_model
from .simulate import PRESETS, DESIGNS, SimDesign, coverage_experiment, preset
from .smoother import FgsModel, default_gradient_grid, fit_fgs, gradient_path, predict

log = logging.getLogger("fgs")

CONFIG_VERSION = 1

DEFAULTS: dict = {
    "seed": 0,
    "num_trees": 500,
    "sample_fraction": 0.632,
    "with_replacement": False,
    "mtry": None,
    "min_leaf_size": 5,
    "max_depth": None,
    "c": 1.5,
    "residuals": "oob",
    "kernel": "gaussian",
    "kernel_convention": "covariance",
    "eps_rel": 1e-8,
    "scale_by_n": True,
    "standardize": False,
    "log_cols": [],
    "features": None,
    "target": "y",
    "alpha": 0.05,
    "order": 2,
    "h": 1.0,
    "h_grid": None,
    "h_min": None,
    "h_max": None,
    "h_count": None,
    "h_values": [0.5, 1.0, 2.0],
    "delta_c": 1.0,
    "permute": 0,
    "debias": False,
    "n_jobs": 1,
    "format": None,
    "design": None,
    "preset": None,
    "n": 500,
    "sigma": 1.0,
    "replicates": 100,
}


class UsageError(FgsError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- parsing helpers


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_h_grid(text: str) -> np.ndarray:
    """``min:max:count`` (linear) or ``min:max:count:log``."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise UsageError(f"--h-grid must be min:max:count[:log], got {text!r}")
    try:
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--h-grid must be min:max:count[:log], got {text!r}") from None
    if not (0 < lo < hi) or k < 2:
        raise UsageError("--h-grid needs 0 < min < max and count >= 2")
    return np.geomspace(lo, hi, k) if len(parts) == 4 else np.linspace(lo, hi, k)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def resolve(args: argparse.Namespace) -> dict:
    """flag > config file > default, for every key in ``DEFAULTS``."""
    file_cfg: dict = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.exists():
            raise DataError(f"config file not found: {p}")
        try:
            file_cfg = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {p} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise DataError("config file must hold a JSON object")
        version = file_cfg.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise DataError(f"unsupported config_version {version!r}")
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        cfg[key] = flag if flag is not None else file_cfg.get(key, default)
    return cfg


def forest_config(cfg: dict) -> ForestConfig:
    try:
        return ForestConfig(
            num_trees=int(cfg["num_trees"]),
            sample_fraction=float(cfg["sample_fraction"]),
            with_replacement=bool(cfg["with_replacement"]),
            mtry=None if cfg["mtry"] is None else int(cfg["mtry"]),
            min_leaf_size=int(cfg["min_leaf_size"]),
            max_depth=None if cfg["max_depth"] is None else int(cfg["max_depth"]),
            seed=int(cfg["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def jackknife_config(cfg: dict) -> JackknifeConfig:
    if cfg["h_grid"] is not None:
        g = cfg["h_grid"]
        grid = parse_h_grid(g) if isinstance(g, str) else np.asarray(g, dtype=float)
    elif any(cfg[k] is not None for k in ("h_min", "h_max", "h_count")):
        if any(cfg[k] is None for k in ("h_min", "h_max", "h_count")):
            raise UsageError("--h-min, --h-max and --h-count must be given together")
        grid = np.linspace(float(cfg["h_min"]), float(cfg["h_max"]), int(cfg["h_count"]))
    else:
        grid = default_jackknife_grid()
    return JackknifeConfig(grid, int(cfg["order"]), float(cfg["alpha"]))


# ---------------------------------------------------------------- output helpers


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _num(v) -> str:
    return repr(float(v))


def format_table(header: list[str], rows: list[list], digits: int = 4) -> str:
    cells = [[h for h in header]] + [
        [c if isinstance(c, str) else f"{c:.{digits}f}" for c in row] for row in rows
    ]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = []
    for i, r in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[j]) if j == 0 else c.rjust(widths[j]) for j, c in enumerate(r)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def local_report(model: FgsModel, x, labels=None, h: float = 1.0) -> tuple[str, dict]:
    """Two-column (estimate, standard error) table of the local slopes at ``x``.

    Returns the formatted table and a JSON-ready dict carrying the same numbers.
    """
    fit = predict(model, x, h)
    labels = list(labels) if labels is not None else list(model.smoothing.feature_names)
    if len(labels) != model.d:
        raise DataError(f"need {model.d} labels, got {len(labels)}")
    rows = [[lab, float(b), float(s)] for lab, b, s in zip(labels, fit.beta, fit.se_beta)]
    doc = {
        "x": np.asarray(x, dtype=float).tolist(),
        "h": float(h),
        "intercept": float(fit.beta0),
        "intercept_se": float(fit.se_beta0),
        "coefficients": [{"name": r[0], "estimate": r[1], "se": r[2]} for r in rows],
    }
    return format_table(["coefficient", "estimate", "std.error"], rows), doc


_SHADES = " .:-=+*#%@"


def heatmap_table(M: np.ndarray, names) -> str:
    """Matrix with one shade glyph per cell (darker = larger magnitude)."""
    M = np.asarray(M, dtype=float)
    top = np.abs(M).max() or 1.0
    w = max(9, max(len(n) for n in names) + 1)
    lines = [" " * w + "".join(n.rjust(w + 2) for n in names)]
    for i, n in enumerate(names):
        cells = []
        for v in M[i]:
            glyph = _SHADES[min(len(_SHADES) - 1, int(abs(v) / top * (len(_SHADES) - 1) + 0.5))]
            cells.append(f"{v:{w}.4f}{glyph}".rjust(w + 2))
        lines.append(n.ljust(w) + "".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- query points


def _query_points(args, cfg: dict, model_doc: dict, d: int, names) -> np.ndarray:
    if getattr(args, "point", None) is not None:
        x = np.asarray(args.point, dtype=float)
        if x.shape != (d,):
            raise DataError(f"--point needs {d} values, got {x.size}")
        return x[None, :]
    if getattr(args, "points", None):
        p = Path(args.points)
        if not p.exists():
            raise DataError(f"points file not found: {p}")
        with p.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), None)
        if header is None:
            raise DataError(f"points file {p} is empty")
        target = next((c for c in header if c not in names), None)
        if target is None:
            # no extra column: add a dummy response so load_csv can be reused
            return _points_without_response(p, names)
        return load_csv(p, target, names).features
    if getattr(args, "random", None):
        k = int(args.random)
        if k < 1:
            raise UsageError("--random must be >= 1")
        bounds = model_doc.get("bounds")
        if bounds is None:
            raise DataError("model has no stored bounds for --random")
        lo, hi = np.asarray(bounds, dtype=float)
        return np.random.default_rng(int(cfg["seed"])).uniform(lo, hi, size=(k, d))
    raise UsageError("give query points with --points, --random or --point")


def _points_without_response(path: Path, names) -> np.ndarray:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for i, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[n]) for n in names])
            except (TypeError, ValueError):
                raise DataError(f"{path}: row {i}: non-numeric or missing value") from None
            except KeyError as exc:
                raise DataError(f"{path}: missing column {exc.args[0]!r}") from None
    if not rows:
        raise DataError(f"points file {path} has no rows")
    return np.asarray(rows)


def _to_model_space(X: np.ndarray, scaling) -> np.ndarray:
    return X if scaling is None else scaling.apply(X)


# ---------------------------------------------------------------- commands


def cmd_fit(args, cfg: dict) -> int:
    if not args.input:
        raise UsageError("fit needs --input")
    stage = "load"
    data = load_csv(args.input, cfg["target"], cfg["features"])
    bounds = np.vstack([data.features.min(axis=0), data.features.max(axis=0)])
    scaling = None
    if cfg["standardize"] or cfg["log_cols"]:
        stage = "standardize"
        data, scaling = standardize(data, cfg["log_cols"], response_name=cfg["target"])
    log.info("%s: n=%d d=%d", stage, data.n, data.d)
    model = fit_fgs(
        data,
        forest_config(cfg),
        split_seed=int(cfg["seed"]),
        c=float(cfg["c"]),
        kernel=KernelSpec(KernelFamily(cfg["kernel"])),
        eps_rel=float(cfg["eps_rel"]),
        n_jobs=int(cfg["n_jobs"]),
        scale_by_n=bool(cfg["scale_by_n"]),
        kernel_convention=cfg["kernel_convention"],
        residuals=cfg["residuals"],
    )
    out = args.out or "model.json"
    save_model(out, model, scaling, {**cfg, "fgs_version": __version__}, bounds)
    log.info("model written to %s", out)
    return 0


def _load(args):
    if not args.model:
        raise UsageError("--model is required")
    return load_model(args.model)


def cmd_predict(args, cfg: dict) -> int:
    model, scaling, doc = _load(args)
    names = list(model.smoothing.feature_names)
    X = _query_points(args, cfg, doc, model.d, names)
    Z = _to_model_space(X, scaling)
    h = float(cfg["h"])
    fmt = cfg["format"] or "csv"
    if fmt == "table":
        parts = []
        for i, z in enumerate(Z):
            table, _ = local_report(model, z, names, h)
            parts.append(f"point {i}: " + ", ".join(f"{n}={v:g}" for n, v in zip(names, X[i])) + f"  (h={h:g})\n" + table)
        _emit("\n".join(parts), args.out)
        return 0
    fits = [predict(model, z, h) for z in Z]
    forest_pred = model.forest.predict(Z)
    if fmt == "json":
        docs = []
        for i, (x, f) in enumerate(zip(X, fits)):
            docs.append({"point_id": i, **f.to_dict(names), "x": x.tolist(), "forest": float(forest_pred[i])})
        _emit(json.dumps({"config": cfg, "h": h, "predictions": docs}, sort_keys=True, indent=2) + "\n", args.out)
        return 0
    header = ["point_id", *names, "forest", "mu_hat", "se"] + [f"beta_{n}" for n in names]
    rows = [header]
    for i, (x, f) in enumerate(zip(X, fits)):
        rows.append([i, *map(_num, x), _num(forest_pred[i]), _num(f.beta0), _num(f.se_beta0), *map(_num, f.beta)])
    _emit(_csv_text(rows), args.out)
    return 0


def cmd_ci(args, cfg: dict) -> int:
    model, scaling, doc = _load(args)
    if model.variance is None:
        raise DataError("model has no variance forest; refit with fgs fit")
    names = list(model.smoothing.feature_names)
    jk = jackknife_config(cfg)
    X = _query_points(args, cfg, doc, model.d, names)
    Z = _to_model_space(X, scaling)
    rows = [["point_id", "mu_hat", "mu_dagger", "s", "lo", "hi"]]
    records = []
    for i, z in enumerate(Z):
        res = debias(model, z, jk)
        mu_hat = predict(model, z, 1.0).beta0
        rows.append([i, _num(mu_hat), _num(res.mu_dagger), _num(res.s), _num(res.interval[0]), _num(res.interval[1])])
        records.append({"point_id": i, "x": X[i].tolist(), "mu_hat": float(mu_hat), **res.to_dict()})
    if (cfg["format"] or "csv") == "json":
        _emit(json.dumps({"config": cfg, "jackknife": jk.to_dict(), "intervals": records}, sort_keys=True, indent=2) + "\n", args.out)
    else:
        _emit(_csv_text(rows), args.out)
    return 0


def cmd_varimp(args, cfg: dict) -> int:
    model, scaling, doc = _load(args)
    if model.variance is None:
        raise DataError("model has no variance forest; refit with fgs fit")
    names = list(model.smoothing.feature_names)
    if args.point is None:
        raise UsageError("varimp needs --point")
    X = _query_points(args, cfg, doc, model.d, names)
    z = _to_model_space(X, scaling)[0]
    g = cfg["h_grid"]
    grid = default_gradient_grid() if g is None else (parse_h_grid(g) if isinstance(g, str) else np.asarray(g, float))
    path = gradient_path(model, z, grid, float(cfg["alpha"]))
    recs = path.records(names)
    fmt = cfg["format"] or "csv"
    if fmt == "json":
        _emit(json.dumps({"config": cfg, "x": X[0].tolist(), "bands": recs}, sort_keys=True, indent=2) + "\n", args.out)
        return 0
    if fmt == "table":
        rows = [[f"{r['h']:.4g}", r["name"], r["beta"], r["se"], r["lower"], r["upper"]] for r in recs]
        _emit(format_table(["h", "coefficient", "beta", "se", "lower", "upper"], rows), args.out)
        return 0
    header = ["h", "coordinate", "name", "beta", "se", "lower", "upper", "excludes_zero", "failed", "regularized"]
    rows = [header] + [
        [_num(r["h"]), r["coordinate"], r["name"], _num(r["beta"]), _num(r["se"]), _num(r["lower"]),
         _num(r["upper"]), int(r["lower"] > 0 or r["upper"] < 0), int(r["failed"]), int(r["regularized"])]
        for r in recs
    ]
    _emit(_csv_text(rows), args.out)
    return 0


def cmd_summarize(args, cfg: dict) -> int:
    model, scaling, doc = _load(args)
    names = list(model.smoothing.feature_names)
    points = None
    if args.points or args.random:
        points = _to_model_space(_query_points(args, cfg, doc, model.d, names), scaling)
    h_values = [float(v) for v in cfg["h_values"]]
    ex = explore(model, h_values, float(cfg["delta_c"]), points)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    bary = {**ex.barycenter.to_dict(), "feature_names": names, "config": cfg}
    (out_dir / "barycenter.json").write_text(json.dumps(bary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    eff = [["point_id"] + [f"delta_{n}" for n in names]]
    eff += [[i, *map(_num, row)] for i, row in enumerate(ex.effective)]
    (out_dir / "effective_bandwidths.csv").write_text(_csv_text(eff), encoding="utf-8")
    slopes = [["point_id", "h", "coordinate", "name", "beta", "se"]]
    for h in h_values:
        B, S = ex.slopes[h], ex.slope_se[h]
        for i in range(B.shape[0]):
            for j, n in enumerate(names):
                slopes.append([i, _num(h), j + 1, n, _num(B[i, j]), _num(S[i, j])])
    (out_dir / "slopes.csv").write_text(_csv_text(slopes), encoding="utf-8")
    sys.stdout.write("barycenter of local bandwidth matrices\n")
    sys.stdout.write(heatmap_table(ex.barycenter.H_bar, names))
    sys.stdout.write(f"Frechet variance: {ex.barycenter.frechet_variance:.6g} over {len(ex.bandwidths)} points\n")
    return 0


def cmd_compare(args, cfg: dict) -> int:
    if not args.input:
        raise UsageError("compare needs --input")
    data = load_csv(args.input, cfg["target"], cfg["features"])
    if cfg["standardize"] or cfg["log_cols"]:
        data, _ = standardize(data, cfg["log_cols"], response_name=cfg["target"])
    jk = jackknife_config(cfg) if cfg["debias"] else None
    est = gamma_compare(
        data,
        forest_config(cfg),
        jk,
        alpha=float(cfg["alpha"]),
        seed=int(cfg["seed"]),
        permute=int(cfg["permute"]),
        h=float(cfg["h"]),
        scale_by_n=bool(cfg["scale_by_n"]),
        kernel_convention=cfg["kernel_convention"],
    )
    _emit(json.dumps({**est.to_dict(), "config": cfg}, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args, cfg: dict) -> int:
    fc = forest_config(cfg)
    if cfg["preset"]:
        p = preset(cfg["preset"], int(cfg["replicates"]), int(cfg["seed"]))
        design, jk, points = p.design, p.jackknife, p.points
        if args.n is not None or args.sigma is not None:
            design = replace(design, n=int(cfg["n"]), sigma=float(cfg["sigma"]))
    else:
        if not cfg["design"]:
            raise UsageError("simulate needs --design or --preset")
        design = SimDesign(cfg["design"], int(cfg["n"]), float(cfg["sigma"]), int(cfg["seed"]))
        jk = jackknife_config(cfg)
        if args.points:
            points = _points_without_response(Path(args.points), [f"x{j + 1}" for j in range(design.d)])
        else:
            k = int(args.random or 10)
            points = np.random.default_rng(int(cfg["seed"]) + 1000).uniform(size=(k, design.d))
    rep = coverage_experiment(design, jk, points, int(cfg["replicates"]), fc, float(cfg["c"]), n_jobs=int(cfg["n_jobs"]))
    doc = {**rep.to_dict(), "config": cfg}
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg["preset"] or design.name
    (out_dir / f"{stem}.json").write_text(dumps(doc), encoding="utf-8")
    (out_dir / f"{stem}.csv").write_text(_csv_text(rep.csv_rows()), encoding="utf-8")
    rows = [[str(i), float(m), float(c), float(ln)] for i, (m, c, ln) in enumerate(zip(rep.truth, rep.coverage, rep.mean_length))]
    sys.stdout.write(f"{stem}: R={rep.replicates} failures={rep.failures} nominal={1 - jk.alpha:.2f}\n")
    sys.stdout.write(format_table(["point", "mu", "coverage", "length"], rows, 3))
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "ci": cmd_ci,
    "varimp": cmd_varimp,
    "summarize": cmd_summarize,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fgs", description="Forest-guided local linear smoothing.")
    parser.add_argument("--version", action="version", version=f"fgs {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with default overrides")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file (stdout if omitted)")
        p.add_argument("--format", choices=["csv", "json", "table"])

    def data_opts(p):
        p.add_argument("--input", help="CSV file with a header row")
        p.add_argument("--target")
        p.add_argument("--features", type=_str_list)
        p.add_argument("--log-cols", dest="log_cols", type=_str_list)
        p.add_argument("--standardize", type=_bool, nargs="?", const=True)

    def forest_opts(p):
        p.add_argument("--num-trees", dest="num_trees", type=int)
        p.add_argument("--sample-fraction", dest="sample_fraction", type=float)
        p.add_argument("--with-replacement", dest="with_replacement", type=_bool, nargs="?", const=True)
        p.add_argument("--mtry", type=int)
        p.add_argument("--min-leaf-size", dest="min_leaf_size", type=int)
        p.add_argument("--max-depth", dest="max_depth", type=int)
        p.add_argument("--n-jobs", dest="n_jobs", type=int)

    def smoother_opts(p):
        p.add_argument("--c", type=float, help="variance inflation factor")
        p.add_argument("--residuals", choices=["oob", "in_sample"])
        p.add_argument("--kernel", choices=[k.value for k in KernelFamily])
        p.add_argument("--kernel-convention", dest="kernel_convention", choices=["covariance", "scale"])
        p.add_argument("--eps-rel", dest="eps_rel", type=float)
        p.add_argument("--scale-by-n", dest="scale_by_n", type=_bool)

    def grid_opts(p):
        p.add_argument("--alpha", type=float)
        p.add_argument("--h-grid", dest="h_grid", help="min:max:count[:log]")
        p.add_argument("--h-min", dest="h_min", type=float)
        p.add_argument("--h-max", dest="h_max", type=float)
        p.add_argument("--h-count", dest="h_count", type=int)
        p.add_argument("--order", type=int, help="jackknife polynomial order t")

    def query_opts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--points", help="CSV of query rows (feature columns by name)")
        g.add_argument("--random", type=int, help="k points uniform on the data's bounding box")
        g.add_argument("--point", type=_float_list, help="comma-separated coordinates")

    p = sub.add_parser("fit", help="fit forest, variance forest and smoother; write a model file")
    common(p), data_opts(p), forest_opts(p), smoother_opts(p)

    p = sub.add_parser("predict", help="local linear estimates (table format prints slopes and standard errors)")
    common(p), query_opts(p)
    p.add_argument("--model")
    p.add_argument("--h", type=float)

    p = sub.add_parser("ci", help="debiased confidence intervals")
    common(p), query_opts(p), grid_opts(p)
    p.add_argument("--model")

    p = sub.add_parser("varimp", help="gradient variability bands over an h grid")
    common(p), query_opts(p)
    p.add_argument("--model")
    p.add_argument("--alpha", type=float)
    p.add_argument("--h-grid", dest="h_grid", help="min:max:count[:log]")

    p = sub.add_parser("summarize", help="barycenter, effective bandwidths and slopes")
    common(p), query_opts(p)
    p.add_argument("--model")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--h-values", dest="h_values", type=_float_list)
    p.add_argument("--delta-c", dest="delta_c", type=float)

    p = sub.add_parser("compare", help="excess squared error of the smoother over the forest")
    common(p), data_opts(p), forest_opts(p), grid_opts(p)
    p.add_argument("--permute", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--debias", type=_bool, nargs="?", const=True)
    p.add_argument("--kernel-convention", dest="kernel_convention", choices=["covariance", "scale"])
    p.add_argument("--scale-by-n", dest="scale_by_n", type=_bool)

    p = sub.add_parser("simulate", help="Monte Carlo coverage experiments")
    common(p), forest_opts(p), grid_opts(p)
    p.add_argument("--design", choices=list(DESIGNS))
    p.add_argument("--preset", choices=list(PRESETS))
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--points", help="CSV with columns x1..xd")
    p.add_argument("--random", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    command = "fgs"
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given; choose from " + ", ".join(COMMANDS))
        command = f"fgs {args.command}"
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"{command}: usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"{command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"{command}: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"{command}: data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
