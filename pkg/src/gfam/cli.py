"""Command-line interface: fit, predict, simulate and report.

Data enters as long-format CSV (``curve,t,y`` plus covariate columns);
functional covariates ride in companion wide CSVs with a grid sidecar.
Model structure comes from a JSON config. Fits are stored as versioned
JSON documents that carry everything needed to realize the design on new
data. All numeric output is formatted with 17 significant digits so
reruns are byte-identical.
"""
from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .basis import BasisSpec
from .design import FunctionalCovariate, FunctionalDataset, ModelDesign, TermSpec
from .errors import GfamError, SpecificationError
from .families import make_family
from .fitting import FitResult, assemble, optimize_outer
from .inference import predict as predict_fn
from .inference import term_estimate
from .simgen import SimScenario, run_replicate

FIT_SCHEMA = "gfam-fit-v1"
CONFIG_SCHEMA = "gfam-config-v1"
SIM_SCHEMA = "gfam-sim-v1"


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SpecificationError(f"unknown key(s) {unknown} in {where}")


# --- config parsing ------------------------------------------------------

_BASIS_KEYS = {"kind", "num_basis", "domain", "degree", "penalty_order"}
_TERM_KEYS = {"kind", "covariates", "basis_x", "basis_x2", "basis_t",
              "varies_over_t", "lag", "window", "center_covariate", "label"}
_FAMILY_KEYS = {"name", "trials", "df", "nu", "estimate_nu"}
_OPT_KEYS = {"max_outer", "gtol", "fixed_lambda"}
_CONFIG_KEYS = {"schema", "family", "terms", "functional_covariates",
                "columns", "factors", "optimizer", "level"}


def _parse_basis(obj: dict, where: str) -> BasisSpec:
    _check_keys(obj, _BASIS_KEYS, where)
    kwargs = dict(obj)
    kwargs["domain"] = tuple(kwargs.get("domain", (0.0, 1.0)))
    return BasisSpec(**kwargs)


def _parse_term(obj: dict, index: int) -> TermSpec:
    where = f"terms[{index}]"
    _check_keys(obj, _TERM_KEYS, where)
    kwargs = dict(obj)
    for key in ("basis_x", "basis_x2", "basis_t"):
        if kwargs.get(key) is not None:
            kwargs[key] = _parse_basis(kwargs[key], f"{where}.{key}")
    if kwargs.get("covariates") is not None:
        kwargs["covariates"] = tuple(kwargs["covariates"])
    if kwargs.get("window") is not None:
        kwargs["window"] = tuple(kwargs["window"])
    return TermSpec(**kwargs)


def _parse_family(obj: dict):
    _check_keys(obj, _FAMILY_KEYS, "family")
    name = obj.get("name")
    if name is None:
        raise SpecificationError("family.name is required")
    kwargs = {}
    if name == "binomial" and "trials" in obj:
        kwargs["trials"] = int(obj["trials"])
    if name == "scaled-t" and "df" in obj:
        kwargs["df"] = float(obj["df"])
    if obj.get("nu") is not None:
        kwargs["nu0"] = float(obj["nu"])
    if obj.get("estimate_nu") is not None and name != "binomial" and name != "poisson":
        kwargs["nuisance_estimated"] = bool(obj["estimate_nu"])
    return make_family(name, **kwargs)


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise SpecificationError("config must be a JSON object")
    _check_keys(cfg, _CONFIG_KEYS, "config")
    if cfg.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise SpecificationError(f"unsupported config schema {cfg.get('schema')!r}")
    if "terms" not in cfg or not cfg["terms"]:
        raise SpecificationError("config needs a non-empty term list")
    if "family" not in cfg:
        raise SpecificationError("config needs a family block")
    opt = cfg.get("optimizer", {})
    _check_keys(opt, _OPT_KEYS, "optimizer")
    return cfg


# --- data loading --------------------------------------------------------

def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpecificationError(f"{path}: empty file")
        rows = [r for r in reader if r]
    return header, rows


def load_dataset(data_path: str, cfg: dict) -> FunctionalDataset:
    columns = cfg.get("columns", {})
    c_curve = columns.get("curve", "curve")
    c_t = columns.get("t", "t")
    c_y = columns.get("y", "y")
    header, rows = _read_csv(data_path)
    for col in (c_curve, c_t, c_y):
        if col not in header:
            raise SpecificationError(f"{data_path}: missing column {col!r}")
    idx = {name: header.index(name) for name in header}
    factors = set(cfg.get("factors", []))

    curve = np.array([r[idx[c_curve]] for r in rows])
    try:
        t = np.array([float(r[idx[c_t]]) for r in rows])
        y = np.array([float(r[idx[c_y]]) for r in rows])
    except ValueError as exc:
        raise SpecificationError(f"{data_path}: non-numeric t or y value ({exc})")

    extra = [c for c in header if c not in (c_curve, c_t, c_y)]
    curves, codes = np.unique(curve, return_inverse=True)
    first = np.zeros(curves.size, dtype=int)
    first[codes[::-1]] = np.arange(len(rows) - 1, -1, -1)
    scalars, groups = {}, {}
    for col in extra:
        vals = [rows[i][idx[col]] for i in first]
        if col in factors:
            groups[col] = np.array(vals)
            continue
        try:
            scalars[col] = np.array([float(v) for v in vals])
        except ValueError:
            groups[col] = np.array(vals)

    functional = {}
    base = Path(data_path).parent
    for name, spec in cfg.get("functional_covariates", {}).items():
        _check_keys(spec, {"values", "grid"}, f"functional_covariates[{name}]")
        ghead, grows = _read_csv(str(base / spec["grid"]))
        if "s" not in ghead:
            raise SpecificationError(f"{spec['grid']}: grid sidecar needs an 's' column")
        grid = np.array([float(r[ghead.index("s")]) for r in grows])
        vhead, vrows = _read_csv(str(base / spec["values"]))
        if vhead[0] != c_curve:
            raise SpecificationError(
                f"{spec['values']}: first column must be {c_curve!r}")
        bycurve = {r[0]: [float(v) for v in r[1:]] for r in vrows}
        missing = [c for c in curves if str(c) not in bycurve]
        if missing:
            raise SpecificationError(
                f"{spec['values']}: no rows for curve(s) {missing[:3]}")
        values = np.array([bycurve[str(c)] for c in curves])
        functional[name] = FunctionalCovariate(grid, values)

    return FunctionalDataset(
        curve=curve, t=t, y=y, scalar_covariates=scalars,
        functional_covariates=functional, grouping_factors=groups,
    )


# --- fit serialization ---------------------------------------------------

def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def fit_to_json(fit: FitResult, cfg: dict) -> dict:
    design = fit.system.design
    blocks = []
    for r, blk in enumerate(design.blocks):
        blocks.append({
            "label": blk.label,
            "dim": blk.dim,
            "edf": float(fit.edf[r]),
            "constraint_transform": (
                _arr(blk.constraint_transform)
                if blk.constraint_transform is not None else None),
            "levels": (None if blk.levels is None
                       else [str(v) for v in blk.levels]),
            "x_mean": (None if blk.x_mean is None else _arr(blk.x_mean)),
        })
    return {
        "schema": FIT_SCHEMA,
        "config": cfg,
        "theta": _arr(fit.theta),
        "lambda": _arr(fit.lam),
        "lambda_labels": fit.lambda_labels,
        "nu": _arr(fit.nu),
        "edf_total": fit.edf_total,
        "laml": fit.laml_value,
        "converged": fit.converged,
        "diagnostics": {k: (v if isinstance(v, (int, str, bool)) else float(v))
                        for k, v in fit.diagnostics.items()},
        "blocks": blocks,
    }


def design_from_fit(doc: dict, dataset: FunctionalDataset) -> ModelDesign:
    """Rebuild enough of the training design to realize new data."""
    from .design import DesignBlock  # local import keeps the public API tidy

    terms = [_parse_term(t, i) for i, t in enumerate(doc["config"]["terms"])]
    blocks = []
    for term, meta in zip(terms, doc["blocks"]):
        z = meta["constraint_transform"]
        blocks.append(DesignBlock(
            Phi=np.zeros((0, meta["dim"])),
            P_x=None, P_t=None, K_x=0, K_t=0,
            label=meta["label"], term=term,
            constraint_transform=None if z is None else np.array(z),
            levels=None if meta["levels"] is None else np.array(meta["levels"]),
            x_mean=None if meta["x_mean"] is None else np.array(meta["x_mean"]),
        ))
    return ModelDesign(blocks)


# --- term estimate CSVs --------------------------------------------------

def _default_grids(block):
    term = block.term
    if term.varies_over_t:
        lo, hi = term.basis_t.domain
        t_grid = np.linspace(lo, hi, 60)
    else:
        t_grid = np.array([0.0])
    if term.kind == "intercept":
        return np.array([0.0]), t_grid, ("cov",)
    if term.kind in ("smooth-scalar", "concurrent", "linear-scalar"):
        if term.basis_x is not None:
            lo, hi = term.basis_x.domain
        else:
            lo, hi = -1.0, 1.0
        return np.linspace(lo, hi, 40), t_grid, ("cov",)
    if term.kind == "smooth-scalar-interaction":
        l1, h1 = term.basis_x.domain
        l2, h2 = term.basis_x2.domain
        g1, g2 = np.meshgrid(np.linspace(l1, h1, 20), np.linspace(l2, h2, 20),
                             indexing="ij")
        return (g1.ravel(), g2.ravel()), t_grid, ("cov1", "cov2")
    if term.kind == "functional-linear":
        lo, hi = term.basis_x.domain
        return np.linspace(lo, hi, 40), t_grid, ("s",)
    return block.levels, t_grid, ("level",)


def write_term_csvs(fit: FitResult, out_dir: Path, level: float) -> list[Path]:
    paths = []
    for r, blk in enumerate(fit.system.design.blocks):
        cov_grid, t_grid, covnames = _default_grids(blk)
        est = term_estimate(fit, r, cov_grid, t_grid, level=level)
        path = out_dir / f"term_{r}_{_slug(blk.label)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*covnames, "t", "estimate", "se", "lower", "upper"])
            n_cov, n_t = est.values.shape
            for i in range(n_cov):
                if covnames == ("cov1", "cov2"):
                    cov_cols = [_fmt(cov_grid[0][i]), _fmt(cov_grid[1][i])]
                elif covnames == ("level",):
                    cov_cols = [str(cov_grid[i])]
                else:
                    cov_cols = [_fmt(np.atleast_1d(cov_grid)[i])]
                for l in range(n_t):
                    w.writerow(cov_cols + [
                        _fmt(t_grid[l]), _fmt(est.values[i, l]),
                        _fmt(est.se[i, l]), _fmt(est.lower[i, l]),
                        _fmt(est.upper[i, l])])
        paths.append(path)
    return paths


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "-" for ch in label)


# --- commands ------------------------------------------------------------

@click.group()
def main():
    """Functional additive mixed models with penalized tensor-product splines."""


def _threads(threads):
    if threads is not None:
        return int(threads)
    env = os.environ.get("GFAMM_THREADS")
    return int(env) if env else 1


@main.command("fit")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--fixed-lambda", default=None,
              help="Comma-separated smoothing parameters; skips optimization.")
@click.option("--level", default=0.95, show_default=True)
@click.option("--threads", default=None)
def cmd_fit(data, config, out, fixed_lambda, level, threads):
    """Fit the configured model to a long-format CSV."""
    _threads(threads)  # reserved; fitting itself is single-threaded
    try:
        cfg = load_config(config)
        dataset = load_dataset(data, cfg)
        terms = [_parse_term(t, i) for i, t in enumerate(cfg["terms"])]
        family = _parse_family(cfg["family"])
        system = assemble(dataset, terms, family)
        opt = cfg.get("optimizer", {})
        fl = None
        if fixed_lambda is not None:
            fl = [float(v) for v in fixed_lambda.split(",")]
        elif opt.get("fixed_lambda") is not None:
            fl = [float(v) for v in opt["fixed_lambda"]]
        fit = optimize_outer(
            system,
            fixed_lambda=fl,
            max_outer=int(opt.get("max_outer", 100)),
            gtol=float(opt.get("gtol", 1e-5)),
        )
    except (GfamError, OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(str(exc))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = fit_to_json(fit, cfg)
    with open(out_dir / "fit.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    lvl = float(cfg.get("level", level))
    write_term_csvs(fit, out_dir, lvl)
    pred = predict_fn(fit, level=lvl)
    with open(out_dir / "fitted.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", "t", "eta_hat", "mu_hat"])
        for c, tv, e, m in zip(dataset.curve, dataset.t, pred["eta"], pred["mu"]):
            w.writerow([str(c), _fmt(tv), _fmt(e), _fmt(m)])
    click.echo(f"laml {_fmt(fit.laml_value)} edf {_fmt(fit.edf_total)} "
               f"converged {fit.converged}")
    sys.exit(0 if fit.converged else 2)


@main.command("predict")
@click.option("--fit", "fit_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_predict(fit_path, data, out):
    """Predict eta and mu for new data from a stored fit."""
    try:
        with open(fit_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema") != FIT_SCHEMA:
            raise SpecificationError(f"not a fit document: {fit_path}")
        cfg = doc["config"]
        dataset = load_dataset(data, cfg)
        design = design_from_fit(doc, dataset)
        phi = design.realize(dataset)
        theta = np.array(doc["theta"])
        if phi.shape[1] != theta.size:
            raise SpecificationError("design width does not match stored fit")
        family = _parse_family(cfg["family"])
        eta = phi @ theta
        mu = family.inv_link(eta)
    except (GfamError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        _fail(str(exc))

    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", "t", "eta_hat", "mu_hat"])
        for c, tv, e, m in zip(dataset.curve, dataset.t, eta, mu):
            w.writerow([str(c), _fmt(tv), _fmt(e), _fmt(m)])
    if family.name == "binomial":
        trials = getattr(family, "trials", 1)
        score = float(np.mean((dataset.y / trials - mu) ** 2))
        click.echo(f"brier {_fmt(score)}")
    sys.exit(0)


def _one_replicate(args):
    scenario_kwargs, rep = args
    try:
        res = run_replicate(SimScenario(**scenario_kwargs), rep)
        res["error"] = ""
        return res
    except Exception as exc:  # per-replicate failures go into the table
        return {"replicate": rep, "error": str(exc)}


_SIM_FIELDS = ["replicate", "rrimse_eta", "coverage_eta", "rrimse_ff",
               "coverage_ff", "nuisance", "edf", "laml", "converged",
               "seconds", "error"]


@main.command("simulate")
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--replicates", default=1, show_default=True)
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--threads", default=None)
def cmd_simulate(config, out, replicates, seed, threads):
    """Generate, fit and score replicates of a simulation scenario."""
    try:
        with open(config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        _check_keys(cfg, {"schema", "scenario"}, "simulation config")
        if cfg.get("schema", SIM_SCHEMA) != SIM_SCHEMA:
            raise SpecificationError(f"unsupported schema {cfg.get('schema')!r}")
        kwargs = dict(cfg["scenario"])
        if seed is not None:
            kwargs["seed"] = seed
        SimScenario(**kwargs)  # validate early
    except (GfamError, OSError, json.JSONDecodeError, TypeError) as exc:
        _fail(str(exc))

    n_threads = _threads(threads)
    jobs = [(kwargs, r) for r in range(replicates)]
    if n_threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(_one_replicate, jobs))
    else:
        results = [_one_replicate(j) for j in jobs]

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "replicates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SIM_FIELDS)
        for res in results:
            row = []
            for f in _SIM_FIELDS:
                v = res.get(f, "")
                row.append(_fmt(v) if isinstance(v, float) else str(v))
            w.writerow(row)
    ok = [r for r in results if not r.get("error")]
    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "median", "q25", "q75", "n"])
        for metric in ("rrimse_eta", "coverage_eta", "rrimse_ff", "coverage_ff",
                       "seconds"):
            vals = np.array([r[metric] for r in ok if metric in r], dtype=float)
            if vals.size:
                q25, med, q75 = np.percentile(vals, [25, 50, 75])
                w.writerow([metric, _fmt(med), _fmt(q25), _fmt(q75), str(vals.size)])
    click.echo(f"{len(ok)}/{len(results)} replicates succeeded")
    sys.exit(0 if len(ok) == len(results) else 2)


# --- report rendering ----------------------------------------------------

def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def _polyline(xs, ys, color, dash=""):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
            f'{extra} points="{pts}"/>\n')


def _line_svg(t, est, lo, hi, title):
    width, height, pad = 640, 400, 45
    ymin = min(np.min(lo), np.min(est))
    ymax = max(np.max(hi), np.max(est))
    if ymax - ymin <= 0:
        ymax = ymin + 1.0
    tmin, tmax = float(np.min(t)), float(np.max(t))

    def sx(v):
        return pad + (v - tmin) / (tmax - tmin) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - ymin) / (ymax - ymin) * (height - 2 * pad)

    parts = [_svg_header(width, height)]
    parts.append(f'<text x="{pad}" y="18" font-size="13">{title}</text>\n')
    parts.append(f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" '
                 f'y2="{height-pad}" stroke="black"/>\n')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" '
                 f'stroke="black"/>\n')
    parts.append(_polyline([sx(v) for v in t], [sy(v) for v in lo], "steelblue", "4 3"))
    parts.append(_polyline([sx(v) for v in t], [sy(v) for v in hi], "steelblue", "4 3"))
    parts.append(_polyline([sx(v) for v in t], [sy(v) for v in est], "black"))
    parts.append(f'<text x="4" y="{sy(ymin)+4:.1f}" font-size="10">{ymin:.3g}</text>\n')
    parts.append(f'<text x="4" y="{sy(ymax)+4:.1f}" font-size="10">{ymax:.3g}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def _heat_color(v):
    # blue (0) -> white (0.5) -> red (1)
    if v < 0.5:
        f = v / 0.5
        r, g, b = int(60 + 195 * f), int(90 + 165 * f), 255
    else:
        f = (v - 0.5) / 0.5
        r, g, b = 255, int(255 - 165 * f), int(255 - 195 * f)
    return f"rgb({r},{g},{b})"


def _heatmap_svg(xg, yg, z, title):
    width, height, pad = 640, 480, 45
    zmin, zmax = float(np.min(z)), float(np.max(z))
    span = (zmax - zmin) or 1.0
    nx, ny = len(xg), len(yg)
    cw = (width - 2 * pad) / nx
    ch = (height - 2 * pad) / ny
    parts = [_svg_header(width, height)]
    parts.append(f'<text x="{pad}" y="18" font-size="13">{title}</text>\n')
    for i in range(nx):
        for j in range(ny):
            color = _heat_color((z[i, j] - zmin) / span)
            x = pad + i * cw
            y = height - pad - (j + 1) * ch
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw+0.5:.2f}" '
                         f'height="{ch+0.5:.2f}" fill="{color}"/>\n')
    parts.append(f'<text x="4" y="30" font-size="10">scale-min {zmin:.6g}</text>\n')
    parts.append(f'<text x="4" y="42" font-size="10">scale-max {zmax:.6g}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def _render_term_csv(path: Path, out_dir: Path) -> str:
    header, rows = _read_csv(str(path))
    cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}
    t = np.array([float(v) for v in cols["t"]])
    est = np.array([float(v) for v in cols["estimate"]])
    name = path.stem
    first = header[0]
    covvals = cols[first]
    uniq = sorted(set(covvals))
    if first == "cov1":
        c1 = np.array([float(v) for v in cols["cov1"]])
        c2 = np.array([float(v) for v in cols["cov2"]])
        t0 = t[0]
        mask = t == t0
        u1, u2 = np.unique(c1[mask]), np.unique(c2[mask])
        z = est[mask].reshape(u1.size, u2.size)
        svg = _heatmap_svg(u1, u2, z, name)
    elif len(uniq) == 1:
        lo = np.array([float(v) for v in cols["lower"]])
        hi = np.array([float(v) for v in cols["upper"]])
        svg = _line_svg(t, est, lo, hi, name)
    else:
        try:
            u = np.array(sorted({float(v) for v in covvals}))
            cnum = np.array([float(v) for v in covvals])
        except ValueError:
            u = np.array(uniq)
            cnum = np.array(covvals)
        ut = np.unique(t)
        z = np.full((u.size, ut.size), np.nan)
        for cv, tv, ev in zip(cnum, t, est):
            z[np.searchsorted(u, cv) if u.dtype.kind == "f" else list(u).index(cv),
              np.searchsorted(ut, tv)] = ev
        svg = _heatmap_svg(u, ut, np.nan_to_num(z), name)
    out = out_dir / f"{name}.svg"
    out.write_text(svg, encoding="utf-8")
    return out.name


@main.command("report")
@click.option("--results", required=True, type=click.Path(file_okay=False))
def cmd_report(results):
    """Render term-estimate CSVs in a results directory to SVG plots."""
    res_dir = Path(results)
    csvs = sorted(res_dir.glob("term_*.csv"))
    if not csvs:
        _fail(f"no term estimate CSVs found in {results}")
    lines = ["# Model report", ""]
    for path in csvs:
        try:
            svg = _render_term_csv(path, res_dir)
        except (ValueError, KeyError, SpecificationError) as exc:
            _fail(f"{path.name}: {exc}")
        lines.append(f"- `{path.name}` -> ![{path.stem}]({svg})")
    (res_dir / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"rendered {len(csvs)} plot(s)")
    sys.exit(0)


if __name__ == "__main__":
    main()
