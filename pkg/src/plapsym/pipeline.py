"""Config parsing and the solve -> tables -> deficits -> plots pipeline.

Every output written for one configuration carries the same config hash, so a
report directory can be checked for internal consistency.
"""

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ._p1 import evaluate_at
from .deficits import (DeficitReport, LevelDeficits, boundary_deficits, hoelder_check, identity_residual,
                       isoperimetric_ratios, level_deficits, pohozaev_residual, W_lower_bound)
from .errors import AssumptionError, ConfigError, PlapsymError, PostProcessingError
from .geometry import DomainSpec, build_boundary, domain_eps
from .levelsets import critical_measure, distribution_tables, l1_distance, schwarz_rearrangement
from .mesh import Mesh, triangulate
from .solver import Field, Nonlinearity, SolverConfig, gradient_bound_check, solve
from .svg import line_plot

log = logging.getLogger(__name__)

SIGMA_FRACS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)
EPS_FLOOR = 1e-9
DOMAIN_KEYS = ("family", "R", "a", "b", "amp", "k", "n_boundary", "center")
SWEEP_COLUMNS = ("label", "family", "R", "a", "b", "amp", "k", "p", "eps", "l1_distance",
                 "identity_resid", "D3", "D4", "D5", "W_min", "M_u_slope", "status")


class StageError(PlapsymError):
    """Wraps a pipeline failure with the name of the stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


# -- configuration ---------------------------------------------------------------


def parse_number(text):
    """Float literal or a simple ratio such as ``1/1.2``."""
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/")
            return float(num) / float(den)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_key_values(text):
    """``key = value`` lines; ``#`` starts a comment.  Later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    p: float = 2.0
    f: Nonlinearity = field(default_factory=Nonlinearity)
    h: float = 0.05
    t_levels: int = 64
    output_dir: str = "out"
    seed: int = 0
    workers: int = 0
    identity_levels: int = 512
    picard_tol: float = 1e-8
    picard_max: int = 500
    cg_tol: float = 1e-12
    damping: float = 0.7
    delta_reg: float = None
    sweep_p: tuple = ()

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.t_levels < 2 or self.identity_levels < 2:
            raise ConfigError("t_levels and identity_levels must be >= 2")
        self.solver_config()

    def solver_config(self):
        return SolverConfig(p=self.p, delta_reg=self.delta_reg, picard_tol=self.picard_tol,
                            picard_max=self.picard_max, cg_tol=self.cg_tol, damping=self.damping)

    @property
    def p_values(self):
        return tuple(self.sweep_p) or (self.p,)

    def canonical(self):
        """Resolved settings as sorted key=value lines (output location and pool size excluded)."""
        items = {f"domain.{k}": v for k, v in asdict(self.domain).items()}
        for fld in fields(self):
            if fld.name in ("domain", "output_dir", "workers", "sweep_p"):
                continue
            v = getattr(self, fld.name)
            items[fld.name] = v.describe() if isinstance(v, Nonlinearity) else v
        return "\n".join(f"{k}={items[k]!r}" for k in sorted(items)) + "\n"

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_domain(self, **changes):
        return replace(self, domain=replace(self.domain, **changes))


def _domain_from(values, base=None):
    base = asdict(base) if base is not None else {}
    kw = dict(base)
    for key in DOMAIN_KEYS:
        if key not in values:
            continue
        raw = values[key]
        if key == "family":
            kw[key] = raw.strip()
        elif key in ("k", "n_boundary"):
            kw[key] = int(parse_number(raw))
        elif key == "center":
            parts = [parse_number(v) for v in raw.replace(";", ",").split(",")]
            if len(parts) != 2:
                raise ConfigError("center needs two coordinates")
            kw[key] = tuple(parts)
        else:
            kw[key] = parse_number(raw)
    return DomainSpec(**kw)


def config_from_text(text, base_dir="."):
    values = parse_key_values(text)
    known = set(DOMAIN_KEYS) | {fl.name for fl in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kw = {"domain": _domain_from(values)}
    converters = {"p": parse_number, "h": parse_number, "picard_tol": parse_number,
                  "cg_tol": parse_number, "damping": parse_number, "delta_reg": parse_number,
                  "t_levels": lambda v: int(parse_number(v)),
                  "identity_levels": lambda v: int(parse_number(v)),
                  "picard_max": lambda v: int(parse_number(v)),
                  "seed": lambda v: int(parse_number(v)),
                  "workers": lambda v: int(parse_number(v)),
                  "f": Nonlinearity.parse,
                  "sweep_p": lambda v: tuple(parse_number(s) for s in v.split(",") if s.strip())}
    for key, conv in converters.items():
        if key in values:
            kw[key] = conv(values[key])
    out = Path(values.get("output_dir", "out"))
    kw["output_dir"] = str(out if out.is_absolute() else Path(base_dir) / out)
    return RunConfig(**kw)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_text(text, base_dir=path.parent)


def load_axis(path, base):
    """One domain per non-empty line, written as space separated key=value overrides."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read axis file {path}: {exc}") from exc
    domains = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        pairs = dict(item.split("=", 1) for item in line.split() if "=" in item)
        if not pairs:
            raise ConfigError(f"axis line without key=value pairs: {raw!r}")
        domains.append(_domain_from(pairs, base.domain))
    return domains


# -- single run ------------------------------------------------------------------


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def solve_stage(cfg, out_dir=None):
    """Boundary, mesh and solution; mesh.txt and u.txt are written as soon as they exist."""
    out_dir = Path(out_dir or cfg.output_dir)
    with _Stage("geometry"):
        curve = build_boundary(cfg.domain)
    with _Stage("mesh"):
        mesh = triangulate(curve, cfg.h)
        _write(out_dir / "mesh.txt", mesh.to_text())
    with _Stage("solve"):
        u = solve(mesh, cfg.f, cfg.solver_config())
        cfg.f.check_positive(u.max)
        _write(out_dir / "u.txt", u.to_text())
    return curve, mesh, u


def analyze(cfg, curve, u):
    """All post-processing of one solution.  Returns (report, tables, level deficits, profile)."""
    f, p = cfg.f, cfg.p
    with _Stage("geometry"):
        geo = domain_eps(curve, seed=cfg.seed)
    with _Stage("tables"):
        tables = distribution_tables(u, f, p, cfg.t_levels)
    with _Stage("deficits"):
        ld = level_deficits(tables, p, f)
        bd = boundary_deficits(u, curve, p, seed=cfg.seed)
        ident = identity_residual(u, f, curve, bd, p, cfg.identity_levels)
        poh = pohozaev_residual(u, f, curve, p, x0=bd.x0)
        extras = {"solver": {"iterations": u.info["iterations"], "residual": u.info["residual"],
                             "delta_reg": u.info["delta_reg"], "n_vertices": u.mesh.n_vertices,
                             "n_triangles": u.mesh.n_triangles}}
        try:
            W_low = W_lower_bound(f, p, curve.area, u.max)
        except AssumptionError as exc:
            W_low = float("nan")
            extras["assumption_violation"] = str(exc)
        ustar = schwarz_rearrangement(u)
        l1, l1_x0 = l1_distance(u, ustar, seed=cfg.seed)
        sig = np.asarray(SIGMA_FRACS) * float(u.grad_norm.max())
        cm = critical_measure(u, sig)
        gb = gradient_bound_check(u, f, curve)
        hc = hoelder_check(u, tables, p)
        extras["hoelder_ratio_max"] = float(np.nanmax(hc.ratio)) if np.any(np.isfinite(hc.ratio)) else None
        extras["isoperimetric_ratios"] = isoperimetric_ratios(u, seed=cfg.seed)
        extras["polya_szego"] = {"ustar": ustar.gradient_p_norm(p),
                                 "u": float(np.sum(np.abs(u.mesh.signed_areas) * u.grad_norm ** p))}
        extras["D5_center"] = bd.D5_center
        extras["pohozaev_rhs_gradient"] = poh.rhs_gradient
        extras["identity_ratio_level_to_boundary"] = (
            ident.level_term / (ident.D4_term + ident.D5_term)
            if ident.D4_term + ident.D5_term > 0 else None)
    report = DeficitReport(
        config_hash=cfg.config_hash, geometry=geo.to_dict(), p=p, M=u.max,
        t=tables.t_grid, W=ld.W, D1=ld.D1, D2=ld.D2, Dlevel=ld.Dlevel, hoelder_Df=ld.Df,
        D3=bd.D3, D4=bd.D4, D5=bd.D5, x0=bd.x0,
        identity_lhs=ident.lhs, identity_rhs=ident.rhs, identity_resid=ident.resid,
        identity_scale=ident.scale,
        identity_terms={"int_W_D1": ident.int_WD1, "int_W_D2": ident.int_WD2,
                        "D3_term": ident.D3_term, "D4_term": ident.D4_term,
                        "D5_term": ident.D5_term},
        pohozaev_lhs=poh.lhs, pohozaev_rhs=poh.rhs,
        W_min=float(ld.W.min()), W_lower=W_low,
        W_lower_holds=bool(ld.W.min() >= W_low - 1e-3) if np.isfinite(W_low) else False,
        l1_distance=l1, l1_x0=[float(v) for v in l1_x0],
        M_u={"sigma": cm.sigma, "measure": cm.measure, "slope": cm.slope},
        gradient_bound=asdict(gb),
        gauss_green_max_mismatch=float(tables.gauss_green_mismatch.max()),
        extras=extras)
    return report, tables, ld, ustar


def tables_csv(cfg, tables, ld):
    tables.extra = ld.columns()
    return tables.to_csv(f"config_hash={cfg.config_hash}")


def report_json(report):
    return json.dumps(report.to_dict(), indent=2) + "\n"


def render_plots(out_dir, u, ustar, l1_x0, ld, cm_sigma, cm_measure, p):
    plots = Path(out_dir) / "plots"
    lo, hi = u.mesh.vertices.min(axis=0), u.mesh.vertices.max(axis=0)
    xs = np.linspace(lo[0], hi[0], 401)
    cy = 0.5 * float(lo[1] + hi[1])
    u_line = evaluate_at(u.mesh, u.values, np.column_stack([xs, np.full_like(xs, cy)]))
    star_line = ustar(np.hypot(xs + l1_x0[0], cy + l1_x0[1]))
    _write(plots / "profile.svg", line_plot(
        [("u", xs, u_line), ("u* (aligned)", xs, star_line)],
        "u along a horizontal chord vs Schwarz rearrangement", "x", "value"))
    _write(plots / "level_deficits.svg", line_plot(
        [("D1(t)", ld.t, ld.D1), ("D2(t)", ld.t, ld.D2)],
        "Per-level deficits", "t", "deficit"))
    exact = np.pi * (2.0 * np.asarray(cm_sigma) ** (p - 1.0)) ** 2
    _write(plots / "critical_measure.svg", line_plot(
        [("M_u(sigma)", cm_sigma, cm_measure), ("disk closed form", cm_sigma, exact)],
        "Near-critical set measure", "sigma", "M_u", logx=True, logy=True, markers=True))


def run(cfg, out_dir=None):
    """Full bundle: mesh.txt, u.txt, tables.csv, deficits.json, plots/*.svg."""
    out_dir = Path(out_dir or cfg.output_dir)
    curve, mesh, u = solve_stage(cfg, out_dir)
    report, tables, ld, ustar = analyze(cfg, curve, u)
    with _Stage("write"):
        _write(out_dir / "tables.csv", tables_csv(cfg, tables, ld))
        _write(out_dir / "deficits.json", report_json(report))
    with _Stage("plots"):
        render_plots(out_dir, u, ustar, report.l1_x0, ld,
                     report.M_u["sigma"], report.M_u["measure"], cfg.p)
    return report


# -- sweeps ----------------------------------------------------------------------


def _row_dir(base, index, cfg):
    slug = cfg.domain.label().replace("(", "_").replace(")", "").replace(",", "_").replace("=", "")
    return Path(base) / "rows" / f"{index:03d}_{slug}_p{cfg.p:g}"


def sweep_row(args):
    index, cfg, base = args
    row = {"label": cfg.domain.label(), "family": cfg.domain.family, "R": cfg.domain.R,
           "a": cfg.domain.a, "b": cfg.domain.b, "amp": cfg.domain.amp, "k": cfg.domain.k,
           "p": cfg.p}
    try:
        rep = run(cfg, _row_dir(base, index, cfg))
    except PlapsymError as exc:
        row.update({c: float("nan") for c in SWEEP_COLUMNS if c not in row})
        row["status"] = f"error: {exc}"
        return index, row
    row.update(eps=rep.geometry["eps"], l1_distance=rep.l1_distance,
               identity_resid=rep.identity_resid, D3=rep.D3, D4=rep.D4, D5=rep.D5,
               W_min=rep.W_min, M_u_slope=rep.M_u["slope"], status="ok")
    return index, row


@dataclass
class SweepResult:
    rows: list
    fit: dict
    config_hash: str

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}\n")
        if self.fit.get("slope") is not None:
            buf.write(f"# fit log_C={self.fit['log_C']!r} theta_hat={self.fit['slope']!r} "
                      f"n={self.fit['n']}\n")
        else:
            buf.write(f"# fit skipped: {self.fit['reason']}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            writer.writerow([repr(float(row[c])) if isinstance(row[c], (float, np.floating))
                             else row[c] for c in SWEEP_COLUMNS])
        return buf.getvalue()


def fit_stability(rows):
    """Least squares slope of log(l1 distance) against log(eps) over successful rows."""
    ok = [r for r in rows if r["status"] == "ok" and r["eps"] > EPS_FLOOR and r["l1_distance"] > 0]
    if len(ok) < 3:
        return {"slope": None, "log_C": None, "n": len(ok), "reason": "degenerate eps range"}
    x = np.log([r["eps"] for r in ok])
    y = np.log([r["l1_distance"] for r in ok])
    if np.ptp(x) < 1e-6:
        return {"slope": None, "log_C": None, "n": len(ok), "reason": "degenerate eps range"}
    slope, log_c = np.polyfit(x, y, 1)
    return {"slope": float(slope), "log_C": float(log_c), "n": len(ok), "reason": ""}


def sweep(base, domains, workers=None, out_dir=None):
    if len(domains) < 3:
        raise ConfigError("need ≥ 3 domains")
    out_dir = Path(out_dir or base.output_dir)
    jobs = []
    for p in base.p_values:
        for dom in domains:
            jobs.append((len(jobs), replace(base, domain=dom, p=p), out_dir))
    workers = workers or base.workers or os.cpu_count() or 1
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        results = [sweep_row(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_row, jobs))
    rows = [row for _, row in sorted(results, key=lambda r: r[0])]
    rows.sort(key=lambda r: (np.inf if not np.isfinite(r["eps"]) else r["eps"], r["p"], r["label"]))
    result = SweepResult(rows=rows, fit=fit_stability(rows), config_hash=base.config_hash)
    _write(out_dir / "sweep.csv", result.to_csv())
    ok = [r for r in rows if r["status"] == "ok" and r["eps"] > 0 and r["l1_distance"] > 0]
    if ok:
        _write(out_dir / "plots" / "stability.svg", line_plot(
            [("rows", [r["eps"] for r in ok], [r["l1_distance"] for r in ok])],
            "L1 distance to u* against domain deficit", "eps", "L1 distance",
            logx=True, logy=True, markers=True))
    return result


# -- report ----------------------------------------------------------------------


def read_hash_line(path):
    with open(path) as fh:
        first = fh.readline().strip()
    if not first.startswith("# config_hash="):
        raise PostProcessingError(f"{path} has no config hash header")
    return first.split("=", 1)[1]


def summarize_bundle(out_dir):
    """Consistency check of a run directory and a short text summary."""
    out_dir = Path(out_dir)
    lines = []
    dj, tc, sc = out_dir / "deficits.json", out_dir / "tables.csv", out_dir / "sweep.csv"
    if not dj.exists() and not sc.exists():
        raise PostProcessingError(f"{out_dir} holds neither deficits.json nor sweep.csv")
    if dj.exists():
        rep = json.loads(dj.read_text())
        if tc.exists() and read_hash_line(tc) != rep["config_hash"]:
            raise PostProcessingError("tables.csv and deficits.json carry different config hashes")
        geo = rep["geometry"]
        lines += [f"config_hash      {rep['config_hash']}",
                  f"p                {rep['p']:g}",
                  f"eps              {geo['eps']:.6g}  (iso {geo['iso_deficit']:.3g}, "
                  f"normal {geo['normal_deficit']:.3g})",
                  f"max u            {rep['M']:.6g}",
                  f"D3 D4 D5         {rep['D3']:.3g} {rep['D4']:.3g} {rep['D5']:.3g}",
                  f"min D1 / D2      {min(rep['D1']):.3g} / {min(rep['D2']):.3g}",
                  f"identity         lhs {rep['identity_lhs']:.6g} rhs {rep['identity_rhs']:.6g} "
                  f"resid {rep['identity_resid']:.3g}",
                  f"pohozaev         lhs {rep['pohozaev_lhs']:.6g} rhs {rep['pohozaev_rhs']:.6g}",
                  f"W min / C1       {rep['W_min']:.6g} / {rep['W_lower']}",
                  f"L1 distance      {rep['l1_distance']:.4g}",
                  f"M_u slope        {rep['M_u']['slope']:.4g}",
                  f"gradient bound   {rep['gradient_bound']['grad_max']:.4g} <= "
                  f"{rep['gradient_bound']['bound']:.4g}",
                  f"Gauss-Green max  {rep['gauss_green_max_mismatch']:.3g}"]
        mesh_txt, u_txt = out_dir / "mesh.txt", out_dir / "u.txt"
        if mesh_txt.exists() and u_txt.exists():
            mesh = Mesh.from_text(mesh_txt.read_text())
            u = Field.from_text(mesh, u_txt.read_text(), p=rep["p"])
            ustar = schwarz_rearrangement(u)
            t = np.asarray(rep["t"])
            ld = LevelDeficits(t, np.asarray(rep["W"]), np.asarray(rep["D1"]), np.asarray(rep["D2"]),
                               np.asarray(rep["Dlevel"]), np.asarray(rep["hoelder_Df"]))
            render_plots(out_dir, u, ustar, rep["l1_x0"], ld,
                         rep["M_u"]["sigma"], rep["M_u"]["measure"], rep["p"])
            lines.append(f"plots            {out_dir / 'plots'}")
    if sc.exists():
        lines.append(f"sweep            {sc}")
        with open(sc) as fh:
            for raw in fh:
                if raw.startswith("#"):
                    lines.append("  " + raw[2:].rstrip())
            fh.seek(0)
            reader = csv.DictReader(r for r in fh if not r.startswith("#"))
            for row in reader:
                lines.append(f"  {row['label']:<28} p={row['p']:<5} eps={float(row['eps']):.4g} "
                             f"l1={float(row['l1_distance']):.4g} {row['status']}")
    return "\n".join(lines) + "\n"
