"""Parameter sweeps over channel draws, with machine-readable result rows.

Every draw gets its own seed sequence derived from ``(seed, ..., draw)``,
so results do not depend on evaluation order and all schemes and sweep
points of a draw share channels, symbols and noise.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources

import numpy as np

from .channel import PairScenario, PrecoderPair, PskConstellation, order_pair, sample_channel
from .errors import InfeasibleError, RandomizationError, SolverError
from .powermin import solve_power_min_coma, solve_power_min_noma, solve_power_min_oma
from .receiver import SCHEMES, block_errors, complexity_coma, complexity_noma, wilson_interval
from .sermin import ser_from_snr, sermin_coma_sweep, solve_sermin_noma

EXPERIMENTS = ("PowerVsAntennas", "PowerVsTargets", "SerVsPower",
               "ComplexityVsAntennas", "ComplexityVsModOrder")
HEADER = ("experiment", "scheme", "x", "metric", "value", "ci_low", "ci_high", "n", "seed")
FLAG = ":flagged"
FAILURE_LIMIT = 0.1
Z95 = 1.959963984540054

_DESIGN_ERRORS = (InfeasibleError, SolverError, RandomizationError)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_antennas: tuple = (2,)
    var1: float = 2.0
    var2: float = 1.0
    noise: float = 1.0
    sic_err_var: float = 0.0
    r1: float = 1.0
    r2: float = 1.0
    targets: tuple = (1.0, 2.0, 3.0)
    sweep_user: int = 2
    power_db: tuple = (10.0, 14.0, 18.0, 22.0, 26.0, 30.0)
    mod_order: tuple = (4,)
    n_pairs: int = 1
    d_of_m: int = 0
    subtraction_const: int = 1
    n_draws: int = 500
    n_symbols: int = 100_000
    seed: int = 0
    schemes: tuple = SCHEMES
    workers: int = 1

    def __post_init__(self):
        for name in ("n_antennas", "targets", "power_db", "mod_order", "schemes"):
            val = getattr(self, name)
            object.__setattr__(self, name, tuple(val) if isinstance(val, (list, tuple)) else (val,))
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.schemes:
            raise ValueError("schemes must not be empty")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ValueError(f"unknown schemes {sorted(bad)}")
        for name in ("n_antennas", "targets", "power_db", "mod_order"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if any(int(n) != n or n < 1 for n in self.n_antennas):
            raise ValueError("n_antennas must be positive integers")
        for M in self.mod_order:
            PskConstellation(int(M))
        if min(self.targets) < 0 or min(self.r1, self.r2) < 0:
            raise ValueError("targets must be nonnegative")
        if self.sweep_user not in (1, 2):
            raise ValueError("sweep_user must be 1 or 2")
        if self.n_draws < 1 or self.n_symbols < 1 or self.n_pairs < 1 or self.workers < 1:
            raise ValueError("n_draws, n_symbols, n_pairs and workers must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.d_of_m < 0 or self.subtraction_const < 0:
            raise ValueError("d_of_m and subtraction_const must be nonnegative")
        if min(self.var1, self.var2) <= 0 or self.noise <= 0 or self.sic_err_var < 0:
            raise ValueError("variances must be positive")
        single = {"PowerVsTargets": ("n_antennas", "mod_order"),
                  "SerVsPower": ("n_antennas", "mod_order"),
                  "PowerVsAntennas": ("mod_order",),
                  "ComplexityVsAntennas": ("mod_order",),
                  "ComplexityVsModOrder": ("n_antennas",)}[self.experiment]
        for name in single:
            if len(getattr(self, name)) != 1:
                raise ValueError(f"{self.experiment} takes a single {name}")
        if self.experiment.startswith("Complexity") and not {"NOMA", "CoMA"} & set(self.schemes):
            raise ValueError("complexity experiments need NOMA or CoMA")

    def scenario(self, n_antennas: int, **changes) -> PairScenario:
        sc = PairScenario(n_antennas=int(n_antennas), var1=self.var1, var2=self.var2,
                          noise1=self.noise, noise2=self.noise, sic_err_var=self.sic_err_var,
                          r1=self.r1, r2=self.r2, power_budget=10.0,
                          constellation=PskConstellation(int(self.mod_order[0])))
        return sc.replace(**changes)

    def override(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    scheme: str
    x: float
    metric: str
    value: float
    ci_low: float
    ci_high: float
    n: int
    seed: int
    flagged: bool = False


# -- config files ----------------------------------------------------------------

def _parse_list(text: str, kind):
    items = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part and kind is not str:
            bits = [float(b) for b in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1.0
            if step <= 0:
                raise ValueError(f"bad range {part!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            items.extend(kind(start + i * step) for i in range(count))
        else:
            items.append(kind(part))
    return tuple(items)


_FIELD_KINDS = {"experiment": str, "n_antennas": (int,), "var1": float, "var2": float,
                "noise": float, "sic_err_var": float, "r1": float, "r2": float,
                "targets": (float,), "sweep_user": int, "power_db": (float,), "mod_order": (int,),
                "n_pairs": int, "d_of_m": int, "subtraction_const": int, "n_draws": int,
                "n_symbols": int, "seed": int, "schemes": (str,), "workers": int}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; lists are comma separated, ``a:b[:step]`` is an inclusive range."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in _FIELD_KINDS:
            raise ValueError(f"line {lineno}: unknown or malformed entry {raw.strip()!r}")
        kind = _FIELD_KINDS[key]
        try:
            values[key] = _parse_list(val, kind[0]) if isinstance(kind, tuple) else kind(val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return values


def load_config(path=None, preset: str | None = None, **overrides) -> ExperimentConfig:
    values = {}
    if preset is not None:
        values.update(parse_config_text(preset_text(preset)))
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in values:
        raise ValueError("config does not name an experiment")
    return ExperimentConfig(**values)


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("cinoma.presets").iterdir()
                  if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return resources.files("cinoma.presets").joinpath(f"{name}.cfg").read_text()


# -- helpers ---------------------------------------------------------------------

def _draw_rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _draw_pair(scenario: PairScenario, rng):
    return order_pair(sample_channel(scenario.n_antennas, scenario.var1, rng),
                      sample_channel(scenario.n_antennas, scenario.var2, rng))


def _mean_rows(cfg, scheme, x, metric, samples, n_total):
    samples = np.asarray(samples, dtype=float)
    ok = samples[np.isfinite(samples)]
    if ok.size == 0:
        return [ResultRow(cfg.experiment, scheme, x, metric, math.nan, math.nan, math.nan, 0, cfg.seed)]
    mean = float(ok.mean())
    half = Z95 * float(ok.std(ddof=1)) / math.sqrt(ok.size) if ok.size > 1 else 0.0
    rows = [ResultRow(cfg.experiment, scheme, x, metric, mean, mean - half, mean + half, ok.size, cfg.seed)]
    if metric == "power":
        lo, hi = mean - half, mean + half
        db = lambda v: 10 * math.log10(v) if v > 0 else -math.inf
        rows.append(ResultRow(cfg.experiment, scheme, x, "power_db", db(mean), db(lo), db(hi),
                              ok.size, cfg.seed))
    rate = 1.0 - ok.size / n_total
    rows.append(ResultRow(cfg.experiment, scheme, x, "failure_rate", rate, rate, rate, n_total, cfg.seed))
    return rows


def _flag(rows):
    """Mark every row of a (scheme, x) point whose failure rate exceeds the limit."""
    bad = {(r.scheme, r.x) for r in rows if r.metric == "failure_rate" and r.value > FAILURE_LIMIT}
    return [replace(r, flagged=True) if (r.scheme, r.x) in bad else r for r in rows]


def _map(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [fn(t) for t in tasks]


# -- power minimization sweeps ---------------------------------------------------------

def _power_draw(task):
    scenario, schemes, key = task
    rng = _draw_rng(*key)
    h1, h2 = _draw_pair(scenario, rng)
    idx = rng.integers(scenario.constellation.order, size=2)
    symbols = scenario.constellation.symbol(idx)
    solver_seed = int(rng.integers(2 ** 63))
    out = {}
    for scheme in schemes:
        try:
            if scheme == "CoMA":
                _, power, _ = solve_power_min_coma(scenario, h1, h2, symbols, rng=solver_seed)
            elif scheme == "NOMA":
                power = solve_power_min_noma(scenario, h1, h2, rng=solver_seed).power
            else:
                _, power = solve_power_min_oma(scenario, h1, h2)
        except _DESIGN_ERRORS:
            power = math.nan
        out[scheme] = power
    return out


def _power_sweep(cfg, points):
    """``points`` is a list of ``(x, scenario, key_prefix)``."""
    tasks = [(sc, cfg.schemes, prefix + (d,)) for _, sc, prefix in points for d in range(cfg.n_draws)]
    results = _map(_power_draw, tasks, cfg.workers)
    rows = []
    for i, (x, _, _) in enumerate(points):
        chunk = results[i * cfg.n_draws:(i + 1) * cfg.n_draws]
        for scheme in cfg.schemes:
            rows += _mean_rows(cfg, scheme, x, "power", [r[scheme] for r in chunk], cfg.n_draws)
    return rows


def power_vs_antennas(cfg: ExperimentConfig):
    pts = [(float(N), cfg.scenario(N), (cfg.seed, int(N))) for N in cfg.n_antennas]
    return _power_sweep(cfg, pts)


def power_vs_targets(cfg: ExperimentConfig):
    N = cfg.n_antennas[0]
    key = "r2" if cfg.sweep_user == 2 else "r1"
    pts = [(float(r), cfg.scenario(N, **{key: float(r)}), (cfg.seed,)) for r in cfg.targets]
    return _power_sweep(cfg, pts)


# -- SER sweep ---------------------------------------------------------------------

def _block_sizes(total, blocks):
    base, extra = divmod(total, blocks)
    return [base + (i < extra) for i in range(blocks)]


def _ser_draw(task):
    """Error counts of one fading block for every scheme and budget."""
    scenario, schemes, budgets, n_sym, key = task
    rng = _draw_rng(*key)
    h1, h2 = _draw_pair(scenario, rng)
    const = scenario.constellation
    M = const.order
    idx = rng.integers(M, size=(2, n_sym))
    idx_wide = rng.integers(M * M, size=(2, n_sym))
    solver_seed = int(rng.integers(2 ** 63))
    out = {}
    for scheme in schemes:
        designs, ser_est = [], []
        if scheme == "CoMA":
            rel = np.mod(idx[1] - idx[0], M)
            present, counts = np.unique(rel, return_counts=True)
            per_p = [dict() for _ in budgets]
            t_avg = np.zeros(len(budgets))
            failed = np.zeros(len(budgets), dtype=bool)
            for d, cnt in zip(present, counts):
                sym = np.array([1.0, np.exp(2j * np.pi * d / M)])
                try:
                    sweep = sermin_coma_sweep(scenario, h1, h2, sym, budgets, rng=solver_seed)
                except _DESIGN_ERRORS:
                    failed[:] = True
                    continue
                for i, (pair, t, _) in enumerate(sweep):
                    per_p[i][int(d)] = pair
                    t_avg[i] += cnt * ser_from_snr(t)
            designs = [None if failed[i] else per_p[i] for i in range(len(budgets))]
            ser_est = list(t_avg / n_sym)
        for i, P in enumerate(budgets):
            sc = scenario.replace(power_budget=float(P))
            if scheme == "NOMA":
                try:
                    t_ub = P * h2.gain / sc.noise2
                    pair, t = solve_sermin_noma(sc, h1, h2, tol=1e-4 * t_ub, rng=solver_seed)
                    designs.append(pair)
                    ser_est.append(ser_from_snr(t))
                except _DESIGN_ERRORS:
                    designs.append(None)
                    ser_est.append(math.nan)
            elif scheme == "OMA":
                mrt = lambda h: np.sqrt(P) * np.conj(h.coeffs) / np.sqrt(h.gain)
                designs.append(PrecoderPair(mrt(h1), mrt(h2)))
                ser_est.append(math.nan)
            design = designs[i]
            if design is None:
                out[scheme, i] = None
                continue
            # same noise realization for every budget and scheme
            noise_rng = _draw_rng(*key, 1)
            sent = idx_wide if scheme == "OMA" else idx
            e1, e2 = block_errors(scheme, sc, h1, h2, design, sent[0], sent[1], noise_rng)
            out[scheme, i] = (e1, e2, ser_est[i])
    return out


def ser_vs_power(cfg: ExperimentConfig):
    scenario = cfg.scenario(cfg.n_antennas[0])
    budgets = [10 ** (p / 10) for p in cfg.power_db]
    sizes = _block_sizes(cfg.n_symbols, cfg.n_draws)
    tasks = [(scenario, cfg.schemes, budgets, sizes[d], (cfg.seed, d))
             for d in range(cfg.n_draws) if sizes[d] > 0]
    results = _map(_ser_draw, tasks, cfg.workers)
    rows = []
    for scheme in cfg.schemes:
        for i, pdb in enumerate(cfg.power_db):
            e1 = e2 = trials = 0
            analytic, failed = [], 0
            for task, res in zip(tasks, results):
                got = res[scheme, i]
                if got is None:
                    failed += 1
                    continue
                e1, e2, trials = e1 + got[0], e2 + got[1], trials + task[3]
                analytic.append((got[2], task[3]))
            x = float(pdb)
            mk = lambda metric, v, lo, hi, n: ResultRow(cfg.experiment, scheme, x, metric, v, lo, hi,
                                                        n, cfg.seed)
            if trials:
                for metric, err in (("ser_u1", e1), ("ser_u2", e2), ("ser_max", max(e1, e2))):
                    lo, hi = wilson_interval(err, trials)
                    rows.append(mk(metric, err / trials, lo, hi, trials))
                vals = np.array([a for a, _ in analytic])
                if np.all(np.isfinite(vals)):
                    w = np.array([n for _, n in analytic], dtype=float)
                    v = float(vals @ w / w.sum())
                    rows.append(mk("ser_analytic", v, v, v, trials))
            rate = failed / len(tasks)
            rows.append(mk("failure_rate", rate, rate, rate, len(tasks)))
    return rows


# -- complexity sweeps ------------------------------------------------------------------

def _complexity_rows(cfg, x, N, M):
    rows = []
    d = cfg.d_of_m or M
    for scheme in cfg.schemes:
        if scheme == "NOMA":
            v = complexity_noma(N, M, cfg.n_pairs, cfg.subtraction_const)
        elif scheme == "CoMA":
            v = complexity_coma(N, M, cfg.n_pairs, d)
        else:
            continue
        rows.append(ResultRow(cfg.experiment, scheme, float(x), "ops", v, v, v, 1, cfg.seed))
    return rows


def complexity_vs_antennas(cfg: ExperimentConfig):
    M = int(cfg.mod_order[0])
    return [r for N in cfg.n_antennas for r in _complexity_rows(cfg, N, int(N), M)]


def complexity_vs_mod_order(cfg: ExperimentConfig):
    N = int(cfg.n_antennas[0])
    return [r for M in cfg.mod_order for r in _complexity_rows(cfg, M, N, int(M))]


_RUNNERS = {"PowerVsAntennas": power_vs_antennas, "PowerVsTargets": power_vs_targets,
            "SerVsPower": ser_vs_power, "ComplexityVsAntennas": complexity_vs_antennas,
            "ComplexityVsModOrder": complexity_vs_mod_order}


def run(config: ExperimentConfig) -> list[ResultRow]:
    """Run the configured sweep; rows are sorted by scheme, sweep coordinate and metric."""
    config.validate()
    rows = _flag(_RUNNERS[config.experiment](config))
    return sorted(rows, key=lambda r: (r.scheme, r.x, r.metric))


# -- output -----------------------------------------------------------------------------

def _num(v) -> str:
    return f"{float(v):.12g}"


def _record(row: ResultRow) -> list[str]:
    metric = row.metric + (FLAG if row.flagged else "")
    return [row.experiment, row.scheme, _num(row.x), metric, _num(row.value), _num(row.ci_low),
            _num(row.ci_high), str(int(row.n)), str(int(row.seed))]


def format_rows(rows, fmt: str = "csv") -> str:
    out = io.StringIO()
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(HEADER)
        for row in rows:
            w.writerow(_record(row))
    elif fmt == "jsonl":
        for row in rows:
            rec = _record(row)
            obj = {k: v for k, v in zip(HEADER, rec)}
            for k in ("x", "value", "ci_low", "ci_high"):
                obj[k] = float(obj[k])
            obj["n"], obj["seed"] = int(obj["n"]), int(obj["seed"])
            out.write(json.dumps(obj, allow_nan=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return out.getvalue()


def emit(rows, fmt: str = "csv", destination=None) -> None:
    """Write rows as CSV or JSON lines to a path, an open text stream, or stdout."""
    import sys
    text = format_rows(rows, fmt)
    if destination is None or destination == "-":
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        try:
            with open(destination, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {destination}: {exc.strerror or exc}") from exc


def parse_rows(text: str, fmt: str = "csv") -> list[ResultRow]:
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != HEADER:
            raise ValueError("missing or unexpected CSV header")
        recs = [dict(zip(HEADER, r)) for r in reader if r]
    elif fmt == "jsonl":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    rows = []
    for r in recs:
        metric = str(r["metric"])
        flagged = metric.endswith(FLAG)
        rows.append(ResultRow(str(r["experiment"]), str(r["scheme"]), float(r["x"]),
                              metric[:-len(FLAG)] if flagged else metric, float(r["value"]),
                              float(r["ci_low"]), float(r["ci_high"]), int(r["n"]), int(r["seed"]),
                              flagged))
    return rows


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
