"""Command-line entry point: ``blindssr <command> [options]``.

Commands
--------
design      fixed-design sample size for a planning variance
calibrate   confidence level of the conservative upper limit (one or many n_int)
reestimate  re-estimated size from blinded interim data or a summary variance
power       Monte Carlo power / type I error of the two-stage trial
simulate    distribution of the re-estimated size (mean, sd, quartiles)
casebook    built-in worked examples checked against their reference values

Exit status: 0 success, 1 invalid input, 2 numeric failure, 3 casebook mismatch.
"""

import argparse
from dataclasses import asdict, dataclass, field, fields
import itertools
import math
import sys

from . import __version__
from .calibration import calibrate_gamma, round_up_confidence
from .design import DesignSpec, Method, Rounding, initial_sample_size, inflation_factor, reestimate
from .errors import (
    BlindSSRError,
    CalibrationInfeasibleError,
    ConsistencyError,
    NumericError,
    ValidationError,
)
from .estimators import PilotSummary, one_sample_variance, split_counts
from .io import load_json, provenance_line, read_outcomes, render, sig_figs
from .power_lab import (
    TruthScenario,
    asymptotic_power_proposed,
    asymptotic_power_theoretical,
    sample_size_distribution,
    simulate_trials,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3
FORMATS = ("table", "json", "csv")
COMMANDS = ("design", "calibrate", "reestimate", "power", "simulate", "casebook")


@dataclass
class RunConfig:
    """Every setting a command may read. Lists hold sweep values."""

    command: str = ""
    alpha: float = 0.025
    power: list = field(default_factory=lambda: [0.80])
    delta: float = 1.0
    pi: float = 0.5
    two_sided: bool = False
    sigma2: list = field(default_factory=list)
    os_variance: float | None = None
    n_int: list = field(default_factory=list)
    n1_int: int | None = None
    n0_int: int | None = None
    method: list = field(default_factory=list)
    confidence: float | None = None
    effect_size: float | None = None
    delta_true: float | None = None
    replicates: int = 100_000
    seed: int = 20240101
    rounding: str | None = None
    floor: bool | None = None
    allocation: str = "fixed"
    engine: str = "summary"
    asymptotic: bool = False
    data: str | None = None
    grid: str | None = None
    fixtures: str | None = None
    out: str | None = None
    format: str = "table"
    full_precision: bool = False

    @property
    def one_sided_alpha(self):
        return self.alpha / 2 if self.two_sided else self.alpha

    def design_spec(self, power=None):
        return DesignSpec(alpha=self.one_sided_alpha,
                          power_target=self.power[0] if power is None else power,
                          delta=self.delta, pi=self.pi)

    def to_dict(self):
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}
_LIST_FIELDS = {"power", "sigma2", "n_int", "method"}


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; route them to the
    # validation exit status instead
    def error(self, message):
        raise ValidationError([message])


def _csv_list(kind):
    def parse(text):
        out = []
        for item in str(text).split(","):
            item = item.strip()
            if not item:
                continue
            try:
                out.append(kind(item))
            except ValueError:
                raise argparse.ArgumentTypeError(f"invalid value {item!r}") from None
        return out
    return parse


def _intlike(text):
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def build_parser():
    parser = _Parser(prog="blindssr", description="Blinded sample size re-estimation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    g = common.add_argument_group("design")
    g.add_argument("--alpha", type=float, help="significance level (one-sided unless --two-sided)")
    g.add_argument("--two-sided", action="store_true", default=None,
                   help="treat --alpha as two-sided and halve it")
    g.add_argument("--power", type=_csv_list(float), help="target power (comma list for calibrate)")
    g.add_argument("--delta", type=float, help="target treatment effect")
    g.add_argument("--pi", type=float, help="allocation probability of arm 1")
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=FORMATS)
    o.add_argument("--out", help="write the report here instead of stdout")
    o.add_argument("--full-precision", action="store_true", default=None,
                   help="print variances at full precision instead of 3 significant digits")
    o.add_argument("--config", help="JSON file with any of these settings (flags override it)")

    pilot = _Parser(add_help=False)
    p = pilot.add_argument_group("interim")
    p.add_argument("--n-int", type=_csv_list(_intlike), help="interim total size (comma list allowed)")
    p.add_argument("--n1-int", type=int)
    p.add_argument("--n0-int", type=int)
    p.add_argument("--method", type=_csv_list(str),
                   help="one-sample, adjusted, if, proposed, theoretical (comma list allowed)")
    p.add_argument("--confidence", type=float,
                   help="confidence level for proposed/theoretical (default: calibrated)")
    p.add_argument("--effect-size", type=float, help="true Delta/sigma, theoretical rule only")
    p.add_argument("--rounding", choices=[r.value for r in Rounding] + ["continuous"])
    p.add_argument("--floor", action="store_true", default=None,
                   help="never plan fewer subjects per arm than already enrolled")
    p.add_argument("--no-floor", dest="floor", action="store_false", default=None,
                   help="report plans below the enrolled counts as they are (simulate)")

    mc = _Parser(add_help=False)
    m = mc.add_argument_group("simulation")
    m.add_argument("--sigma2", type=_csv_list(float), help="true common variance (comma list allowed)")
    m.add_argument("--delta-true", type=float, help="true effect (default: --delta)")
    m.add_argument("--replicates", type=_intlike)
    m.add_argument("--seed", type=_intlike)
    m.add_argument("--grid", help="JSON sweep: lists under sigma2, n_int, method, delta_true")

    d = sub.add_parser("design", parents=[common], help="fixed-design sample size")
    d.add_argument("--sigma2", type=_csv_list(float), help="planning variance (comma list allowed)")

    c = sub.add_parser("calibrate", parents=[common], help="calibrate the confidence level")
    c.add_argument("--n-int", type=_csv_list(_intlike), help="interim total size(s)")

    r = sub.add_parser("reestimate", parents=[common, pilot], help="re-estimate the final size")
    r.add_argument("--data", help="CSV of blinded interim outcomes (column y)")
    r.add_argument("--os-variance", type=float, help="one-sample variance, instead of --data")

    pw = sub.add_parser("power", parents=[common, pilot, mc], help="simulate trial power")
    pw.add_argument("--allocation", choices=("fixed", "binomial"))
    pw.add_argument("--engine", choices=("summary", "outcomes"))
    pw.add_argument("--asymptotic", action="store_true", default=None,
                    help="also report the closed-form asymptotic power")

    sub.add_parser("simulate", parents=[common, pilot, mc], help="re-estimated size distribution")

    cb = sub.add_parser("casebook", parents=[common], help="check the built-in worked examples")
    cb.add_argument("--fixtures", help="JSON file replacing the built-in fixtures")
    return parser


def _normalise_keys(data):
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def build_config(args):
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = RunConfig(command=args.command)
    problems = []
    if getattr(args, "config", None):
        data = _normalise_keys(load_json(args.config))
        for key, value in data.items():
            if key not in _FIELD_NAMES or key == "command":
                problems.append(f"config: unknown setting {key!r}")
                continue
            if key in _LIST_FIELDS and not isinstance(value, list):
                value = [value]
            setattr(cfg, key, value)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        setattr(cfg, key, value)
    if problems:
        raise ValidationError(problems)
    return cfg


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def validate(cfg):
    """Collect every problem with the configuration before doing any work."""
    problems = []
    alpha = cfg.one_sided_alpha
    if not isinstance(cfg.alpha, (int, float)) or not 0 < alpha < 0.5:
        problems.append(f"alpha must give a one-sided level in (0, 0.5), got {cfg.alpha!r}")
    if not cfg.power:
        problems.append("power: no value given")
    for p in cfg.power:
        if not isinstance(p, (int, float)) or not 0.5 <= p < 1:
            problems.append(f"power must lie in [0.5, 1), got {p!r}")
    if cfg.command != "calibrate" and len(cfg.power) > 1:
        problems.append("power: a list of targets is only accepted by calibrate")
    if not isinstance(cfg.delta, (int, float)) or not (math.isfinite(cfg.delta) and cfg.delta > 0):
        problems.append(f"delta must be positive, got {cfg.delta!r}")
    if not isinstance(cfg.pi, (int, float)) or not 0 < cfg.pi < 1:
        problems.append(f"pi must lie in (0, 1), got {cfg.pi!r}")
    for s in cfg.sigma2:
        if not isinstance(s, (int, float)) or not (math.isfinite(s) and s > 0):
            problems.append(f"sigma2 must be positive, got {s!r}")
    for n in cfg.n_int:
        if not _is_int(n) or n < 2:
            problems.append(f"n_int must be an integer >= 2, got {n!r}")
    for name in ("n1_int", "n0_int"):
        value = getattr(cfg, name)
        if value is not None and (not _is_int(value) or value < 1):
            problems.append(f"{name} must be a positive integer, got {value!r}")
    methods = []
    for m in cfg.method:
        try:
            methods.append(Method.parse(m))
        except BlindSSRError as exc:
            problems.append(str(exc))
    cfg.method = [m.value for m in methods]
    if cfg.confidence is not None and not (isinstance(cfg.confidence, (int, float))
                                           and 0 < cfg.confidence < 1):
        problems.append(f"confidence must lie in (0, 1), got {cfg.confidence!r}")
    if cfg.os_variance is not None and not (isinstance(cfg.os_variance, (int, float))
                                            and math.isfinite(cfg.os_variance)
                                            and cfg.os_variance >= 0):
        problems.append(f"os_variance must be finite and nonnegative, got {cfg.os_variance!r}")
    if not _is_int(cfg.replicates) or cfg.replicates < 1:
        problems.append(f"replicates must be a positive integer, got {cfg.replicates!r}")
    if not _is_int(cfg.seed) or not 0 <= cfg.seed < 2**64:
        problems.append(f"seed must be an integer in [0, 2**64), got {cfg.seed!r}")
    if cfg.format not in FORMATS:
        problems.append(f"format must be one of {', '.join(FORMATS)}, got {cfg.format!r}")
    if cfg.rounding not in (None, "continuous", *(r.value for r in Rounding)):
        problems.append(f"unknown rounding {cfg.rounding!r}")
    if cfg.allocation not in ("fixed", "binomial"):
        problems.append(f"allocation must be 'fixed' or 'binomial', got {cfg.allocation!r}")
    if cfg.engine not in ("summary", "outcomes"):
        problems.append(f"engine must be 'summary' or 'outcomes', got {cfg.engine!r}")

    cmd = cfg.command
    if cmd == "design" and not cfg.sigma2:
        problems.append("design needs --sigma2")
    if cmd == "calibrate" and not cfg.n_int:
        problems.append("calibrate needs --n-int")
    if cmd == "reestimate":
        if (cfg.data is None) == (cfg.os_variance is None):
            problems.append("reestimate needs exactly one of --data or --os-variance")
        if cfg.os_variance is not None and not cfg.n_int:
            problems.append("--os-variance needs --n-int")
        if len(cfg.n_int) > 1:
            problems.append("reestimate takes a single --n-int")
    if cmd in ("power", "simulate") and cfg.grid is None:
        if not cfg.sigma2:
            problems.append(f"{cmd} needs --sigma2 (or --grid)")
        if not cfg.n_int:
            problems.append(f"{cmd} needs --n-int (or --grid)")
    if cmd == "reestimate":
        if Method.THEORETICAL.value in cfg.method and cfg.effect_size is None:
            problems.append("the theoretical method needs --effect-size")
        elif cfg.effect_size is not None and Method.THEORETICAL.value not in cfg.method:
            problems.append("--effect-size only applies to the theoretical method")
    elif cmd in ("power", "simulate") and cfg.effect_size is not None:
        problems.append(f"{cmd} takes the true effect from --delta-true and --sigma2, "
                        "not --effect-size")
    if problems:
        raise ValidationError(problems)
    return cfg


def _dedupe(values, label, warnings):
    seen = []
    for v in values:
        if v in seen:
            continue
        seen.append(v)
    if len(seen) < len(values):
        warnings.append(f"duplicate {label} values removed: {values} -> {seen}")
    return seen


def _report(cfg, rows, warnings, audit=None):
    out = {"tool": "blindssr", "version": __version__, "command": cfg.command,
           "config": cfg.to_dict(), "rows": rows, "warnings": warnings}
    if audit:
        out["audit"] = audit
    return out


def _rounding(cfg, default):
    name = cfg.rounding or default
    return None if name == "continuous" else Rounding(name)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_design(cfg):
    spec = cfg.design_spec()
    rounding = _rounding(cfg, "ceiling") or Rounding.CEILING
    rows = []
    for s2 in cfg.sigma2:
        res = initial_sample_size(spec, s2, rounding)
        rows.append({"sigma2": float(s2), "n_group1": res.n_group1, "n_group0": res.n_group0,
                     "n_total": res.n_total, "raw_total": res.raw_total,
                     "raw_group1": res.raw_group1})
    return _report(cfg, rows, []), EXIT_OK


def cmd_calibrate(cfg):
    warnings = []
    n_values = _dedupe(list(cfg.n_int), "n_int", warnings)
    powers = _dedupe(list(cfg.power), "power", warnings)
    rows = []
    failed = False
    for power in powers:
        spec = cfg.design_spec(power)
        for n in n_values:
            row = {"power_target": power, "n_int": n}
            try:
                res = calibrate_gamma(n, spec)
            except (CalibrationInfeasibleError, NumericError) as exc:
                failed = True
                row.update({"protocol_confidence": None, "confidence": None, "error": str(exc)})
            else:
                row.update({"protocol_confidence": res.protocol_confidence,
                            "confidence": res.confidence,
                            "achieved_lower_bound": res.achieved_lower_bound,
                            "protocol_lower_bound": res.protocol_lower_bound,
                            "solver_iterations": res.solver_iterations})
            rows.append(row)
    report = _report(cfg, rows, warnings)
    if cfg.format == "table" and len(n_values) > 1:
        report["pivot"] = True
    return report, EXIT_NUMERIC if failed else EXIT_OK


def _pivot_text(report):
    rows = report["rows"]
    n_values = list(dict.fromkeys(r["n_int"] for r in rows))
    powers = list(dict.fromkeys(r["power_target"] for r in rows))
    cell = {(r["power_target"], r["n_int"]): r.get("protocol_confidence") for r in rows}
    head = ["n_int"] + [str(n) for n in n_values]
    body = [[f"power={p:g}"] + ["err" if cell[(p, n)] is None else f"{cell[(p, n)]:.2f}"
                                 for n in n_values] for p in powers]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in [head] + body) + "\n"


def _pilot_from_config(cfg, warnings):
    audit = {}
    if cfg.data is not None:
        outcomes = read_outcomes(cfg.data)
        n = len(outcomes)
        if cfg.n_int and cfg.n_int[0] != n:
            raise ConsistencyError(f"--n-int={cfg.n_int[0]} but the data file holds {n} outcomes")
        os_var = one_sample_variance(outcomes).value
        audit["data_rows"] = n
    else:
        n = cfg.n_int[0]
        os_var = float(cfg.os_variance)
    n1, n0 = cfg.n1_int, cfg.n0_int
    if n1 is None and n0 is None:
        n1, n0 = split_counts(n, cfg.pi)
    elif n1 is None:
        n1 = n - n0
    elif n0 is None:
        n0 = n - n1
    pilot = PilotSummary(n, n1, n0, os_var)
    if os_var == 0:
        warnings.append("one-sample variance is 0: the plan collapses to the smallest allowed size")
    audit.update({"n_int": n, "n1_int": n1, "n0_int": n0, "os_variance": os_var})
    return pilot, audit


def cmd_reestimate(cfg):
    warnings = []
    spec = cfg.design_spec()
    pilot, audit = _pilot_from_config(cfg, warnings)
    methods = cfg.method or [Method.PROPOSED.value]
    confidence = cfg.confidence
    needs_conf = any(m in (Method.PROPOSED.value, Method.THEORETICAL.value) for m in methods)
    if needs_conf and confidence is None:
        cal = calibrate_gamma(pilot.n_int, spec)
        confidence = cal.protocol_confidence
        audit["calibrated_confidence"] = cal.confidence
        audit["protocol_confidence"] = cal.protocol_confidence
        audit["achieved_lower_bound"] = cal.protocol_lower_bound
    elif needs_conf:
        audit["protocol_confidence"] = confidence
    rounding = _rounding(cfg, "ceiling") or Rounding.CEILING
    audit.update({"alpha_one_sided": spec.alpha, "z_alpha": spec.z_alpha, "z_power": spec.z_power,
                  "sizing_constant": spec.sizing_constant})
    rows = []
    for name in methods:
        method = Method.parse(name)
        res = reestimate(spec, pilot, method, confidence=confidence, effect_size=cfg.effect_size,
                         rounding=rounding, floor=bool(cfg.floor))
        row = {"method": method.value, "variance": res.variance.value,
               "confidence": res.variance.confidence, "raw_total": res.raw_total,
               "n_total": res.n_total, "n_group1": res.n_group1, "n_group0": res.n_group0,
               "floor_applied": res.floor_applied, "below_pilot": res.below_pilot}
        if method is Method.INFLATION_FACTOR:
            row["inflation_factor"] = inflation_factor(pilot.n_int, spec)
        if res.variance.clamped:
            warnings.append(f"{method.value}: adjusted variance was negative and set to 0")
        if res.below_pilot and not res.floor_applied:
            warnings.append(f"{method.value}: plan is below the enrolled interim counts; "
                            "the final analysis still includes every enrolled subject")
        rows.append(row)
    return _report(cfg, rows, warnings, audit), EXIT_OK


def _grid_cells(cfg):
    """Cartesian sweep from --grid (JSON lists) or the single-run flags."""
    axes = {"sigma2": cfg.sigma2, "n_int": cfg.n_int,
            "method": cfg.method or [Method.ONE_SAMPLE.value, Method.PROPOSED.value],
            "delta_true": [cfg.delta if cfg.delta_true is None else cfg.delta_true]}
    if cfg.grid:
        data = _normalise_keys(load_json(cfg.grid, "grid"))
        problems = []
        if "n_per_arm" in data:
            data["n_int"] = [2 * int(v) for v in data.pop("n_per_arm")]
        for key, values in data.items():
            if key not in axes:
                problems.append(f"grid: unknown axis {key!r}; expected {sorted(axes)} or n_per_arm")
                continue
            axes[key] = values if isinstance(values, list) else [values]
        probe = RunConfig(command="grid", sigma2=axes["sigma2"], n_int=axes["n_int"],
                          method=axes["method"])
        try:
            validate(probe)
        except ValidationError as exc:
            problems += [f"grid: {p}" for p in exc.problems]
        if not axes["sigma2"] or not axes["n_int"]:
            problems.append("grid: needs sigma2 and n_int values")
        if problems:
            raise ValidationError(problems)
        axes["method"] = probe.method
    return [dict(zip(axes, combo)) for combo in itertools.product(*axes.values())]


def _run_grid(cfg, run_cell):
    spec = cfg.design_spec()
    rows, warnings = [], []
    failed = False
    for cell in _grid_cells(cfg):
        row = {"method": cell["method"], "sigma2": float(cell["sigma2"]), "n_int": cell["n_int"],
               "delta_true": cell["delta_true"]}
        try:
            scenario = TruthScenario.from_effect(cell["delta_true"], cell["sigma2"])
            row.update(run_cell(spec, scenario, cell))
        except (NumericError, CalibrationInfeasibleError, BlindSSRError) as exc:
            failed = True
            row["error"] = str(exc)
        rows.append(row)
    return _report(cfg, rows, warnings), EXIT_NUMERIC if failed else EXIT_OK


def _counts(cfg):
    return cfg.n1_int, cfg.n0_int


def cmd_power(cfg):
    rounding = _rounding(cfg, "nearest") or Rounding.NEAREST

    def run(spec, scenario, cell):
        n1, n0 = _counts(cfg)
        rep = simulate_trials(cell["method"], scenario, spec, cell["n_int"], n1, n0,
                              replicates=cfg.replicates, seed=cfg.seed, confidence=cfg.confidence,
                              rounding=rounding, allocation=cfg.allocation, engine=cfg.engine)
        out = {"confidence": rep.confidence, "rejection_rate": rep.rejection_rate,
               "rejection_se": rep.rejection_se, "n_fin_mean": rep.n_fin_mean,
               "n_fin_sd": rep.n_fin_sd, "n_total_mean": rep.n_total_mean,
               "replicates": rep.replicates, "seed": rep.seed}
        if cfg.asymptotic and cell["method"] in (Method.PROPOSED.value, Method.THEORETICAL.value):
            fn = (asymptotic_power_proposed if cell["method"] == Method.PROPOSED.value
                  else asymptotic_power_theoretical)
            out["asymptotic_power"] = fn(rep.confidence, cell["n_int"], scenario, spec,
                                         rep.n1_int, rep.n0_int)
        return out

    return _run_grid(cfg, run)


def cmd_simulate(cfg):
    rounding = _rounding(cfg, "continuous")
    # enrolled subjects are always analysed, so the distribution floors by default
    floor = True if cfg.floor is None else cfg.floor

    def run(spec, scenario, cell):
        n1, n0 = _counts(cfg)
        rep = sample_size_distribution(cell["method"], scenario, spec, cell["n_int"], n1, n0,
                                       replicates=cfg.replicates, seed=cfg.seed,
                                       confidence=cfg.confidence, rounding=rounding, floor=floor)
        q1, med, q3 = rep.n_fin_quartiles
        return {"confidence": rep.confidence, "n_fin_mean": rep.n_fin_mean,
                "n_fin_sd": rep.n_fin_sd, "q1": q1, "median": med, "q3": q3,
                "replicates": rep.replicates, "seed": rep.seed}

    return _run_grid(cfg, run)


# Built-in worked examples: two published trials re-sized with the
# conservative rule. Expected values are the reference results; variances are
# compared at 3 significant digits, confidences at 2 decimals, sizes exactly.
CASEBOOK = [
    {"name": "pancreatic-adc", "alpha": 0.025, "power": 0.85, "delta": 4.5e-4, "pi": 0.5,
     "n_int": 12, "os_variance": 3.67e-7,
     "expected": {"confidence": 0.62, "variance": 4.48e-7, "proposed_total": 80,
                  "one_sample_total": 65}},
    {"name": "dbs-programming-time", "alpha": 0.025, "power": 0.80, "delta": 0.40, "pi": 0.5,
     "n_int": 22, "os_variance": 0.192,
     "expected": {"confidence": 0.57, "variance": 0.210, "proposed_total": 42,
                  "one_sample_total": 38}},
]


def run_casebook(fixtures):
    """Evaluate each fixture; one verdict row per checked field."""
    rows = []
    for fx in fixtures:
        spec = DesignSpec(alpha=fx["alpha"], power_target=fx["power"], delta=fx["delta"],
                          pi=fx.get("pi", 0.5))
        n1, n0 = split_counts(fx["n_int"], spec.pi)
        pilot = PilotSummary(fx["n_int"], n1, n0, fx["os_variance"])
        cal = calibrate_gamma(pilot.n_int, spec)
        conf = cal.protocol_confidence
        prop = reestimate(spec, pilot, Method.PROPOSED, confidence=conf)
        os_plan = reestimate(spec, pilot, Method.ONE_SAMPLE)
        observed = {"confidence": round_up_confidence(cal.confidence),
                    "variance": sig_figs(prop.variance.value),
                    "proposed_total": prop.n_total, "one_sample_total": os_plan.n_total}
        raw = {"confidence": cal.confidence, "variance": prop.variance.value,
               "proposed_total": prop.raw_total, "one_sample_total": os_plan.raw_total}
        for key, expected in fx["expected"].items():
            got = observed[key]
            if key == "variance":
                ok = f"{got:.2e}" == f"{float(expected):.2e}"
            elif key == "confidence":
                ok = abs(got - expected) < 5e-9
            else:
                ok = got == expected
            rows.append({"fixture": fx["name"], "field": key, "expected": expected,
                         "observed": got, "unrounded": raw[key], "verdict": "PASS" if ok else "FAIL"})
    return rows


def cmd_casebook(cfg):
    fixtures = CASEBOOK
    if cfg.fixtures:
        data = load_json(cfg.fixtures, "fixtures")
        fixtures = data.get("fixtures")
        problems = []
        if not isinstance(fixtures, list) or not fixtures:
            problems.append("fixtures file needs a non-empty 'fixtures' list")
        else:
            required = {"name", "alpha", "power", "delta", "n_int", "os_variance", "expected"}
            for i, fx in enumerate(fixtures):
                missing = required - set(fx)
                if missing:
                    problems.append(f"fixture {i}: missing {sorted(missing)}")
        if problems:
            raise ValidationError(problems)
    rows = run_casebook(fixtures)
    bad = [r for r in rows if r["verdict"] != "PASS"]
    warnings = [f"{r['fixture']}.{r['field']}: expected {r['expected']}, observed {r['observed']}"
                for r in bad]
    return _report(cfg, rows, warnings), EXIT_MISMATCH if bad else EXIT_OK


HANDLERS = {"design": cmd_design, "calibrate": cmd_calibrate, "reestimate": cmd_reestimate,
            "power": cmd_power, "simulate": cmd_simulate, "casebook": cmd_casebook}


def _emit(cfg, report):
    if report.get("pivot"):
        text = provenance_line(report) + _pivot_text(report)
    else:
        text = render(report, cfg.format, cfg.full_precision)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for w in report.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise ValidationError([f"choose a command: {', '.join(COMMANDS)}"])
        cfg = validate(build_config(args))
        report, status = HANDLERS[cfg.command](cfg)
        _emit(cfg, report)
        return status
    except ValidationError as exc:
        print("error: invalid input", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        for key, value in getattr(exc, "diagnostics", {}).items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_NUMERIC
    except CalibrationInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BlindSSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
