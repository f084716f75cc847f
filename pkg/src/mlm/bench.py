"""Empirical speed and accuracy measurement of compiled implementations.

A driver is generated next to the emitted implementation, compiled with
the external C compiler, and run over deterministically sampled inputs;
each output is compared against a 256-bit oracle evaluation of the
implementation's target function.
"""

from __future__ import annotations

import json
import math
import os
import statistics
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from mpmath import mp, mpf

from .cgen import emit_c
from .dsl import ImplTerm, type_of
from .interp import run as interp_run
from .ir import lower
from .symexpr import SymInterval, eval_point, free_vars

DEFAULT_POINTS = 10_000


class BenchError(RuntimeError):
    pass


@dataclass
class MeasureConfig:
    domain: Optional[SymInterval] = None  # default: the implementation domain
    points: int = DEFAULT_POINTS
    seed: int = 1
    repetitions: int = 7
    compiler: Optional[str] = None  # overrides $MLM_CC and the default "cc"
    extra_flags: tuple = ("-O3", "-mtune=native", "-DNDEBUG", "-ffp-contract=off")
    oracle_bits: int = 256

    def __post_init__(self):
        if self.points < 1:
            raise BenchError("point count must be at least 1")


@dataclass
class MeasureReport:
    inputs: np.ndarray
    outputs: np.ndarray
    abs_errors: np.ndarray  # NaN where the oracle was undefined
    max_abs_error: float
    mean_abs_error: float
    ns_per_call: float
    rep_times_ns: list
    compiler: str
    excluded: int
    domain: tuple
    seed: int

    @property
    def points(self) -> int:
        return len(self.inputs)

    def aggregates(self) -> dict:
        return {
            "points": self.points,
            "max_abs_error": repr(self.max_abs_error),
            "mean_abs_error": repr(self.mean_abs_error),
            "ns_per_call": repr(self.ns_per_call),
            "excluded": self.excluded,
            "domain": [repr(self.domain[0]), repr(self.domain[1])],
            "seed": self.seed,
            "compiler": self.compiler,
        }


def _splitmix64(seed: int, n: int) -> np.ndarray:
    """Deterministic uniform doubles in [0, 1); mirrored by the C driver."""
    out = np.empty(n, dtype=np.uint64)
    state = np.uint64(seed)
    inc = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    with np.errstate(over="ignore"):
        for i in range(n):
            state = state + inc
            z = state
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            z = z ^ (z >> np.uint64(31))
            out[i] = z
    return (out >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def sample_inputs(cfg: MeasureConfig, lo: float, hi: float) -> np.ndarray:
    return lo + _splitmix64(cfg.seed, cfg.points) * (hi - lo)


_DRIVER = """
#include <stdio.h>
#include <stdint.h>
#include <time.h>

double {name}(double x);

static uint64_t mlm_state;

static double mlm_next(void) {{
    mlm_state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = mlm_state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    return (double)(z >> 11) * 0x1p-53;
}}

static double inputs[{n}];
static double outputs[{n}];
volatile double mlm_sink;

int main(void) {{
    mlm_state = {seed}ULL;
    for (int i = 0; i < {n}; i++) {{
        inputs[i] = {lo} + mlm_next() * ({hi} - {lo});
    }}
    for (int rep = 0; rep < {reps}; rep++) {{
        struct timespec t0, t1;
        clock_gettime(CLOCK_MONOTONIC, &t0);
        double acc = 0.0;
        for (int i = 0; i < {n}; i++) {{
            acc += {name}(inputs[i]);
        }}
        clock_gettime(CLOCK_MONOTONIC, &t1);
        mlm_sink = acc;
        long ns = (t1.tv_sec - t0.tv_sec) * 1000000000L + (t1.tv_nsec - t0.tv_nsec);
        printf("TIME %ld\\n", ns);
    }}
    for (int i = 0; i < {n}; i++) {{
        outputs[i] = {name}(inputs[i]);
    }}
    for (int i = 0; i < {n}; i++) {{
        printf("%a\\n", outputs[i]);
    }}
    return 0;
}}
"""


def compiler_command(cfg: MeasureConfig) -> list:
    cc = cfg.compiler or os.environ.get("MLM_CC") or "cc"
    return [cc, *cfg.extra_flags]


def compiler_identity(cfg: MeasureConfig) -> str:
    cc = compiler_command(cfg)[0]
    try:
        out = subprocess.run([cc, "--version"], capture_output=True, text=True, timeout=30)
        return out.stdout.splitlines()[0] if out.stdout else cc
    except (OSError, subprocess.TimeoutExpired):
        return cc


def compile_impl(term: ImplTerm, workdir: str, name: str = "mlm_impl",
                 cfg: MeasureConfig = None) -> str:
    """Emit implementation + driver and compile; returns the binary path."""
    cfg = cfg or MeasureConfig()
    ty = type_of(term)
    dom = cfg.domain or ty.domain
    lo, hi = dom.endpoints(64)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        raise BenchError(
            "measurement domain is unbounded; pass an explicit MeasureConfig.domain"
        )
    impl_c = emit_c(lower(term), name)
    driver_c = _DRIVER.format(
        name=name, n=cfg.points, seed=cfg.seed, reps=cfg.repetitions,
        lo=float(lo).hex(), hi=float(hi).hex(),
    )
    impl_path = os.path.join(workdir, "impl.c")
    driver_path = os.path.join(workdir, "driver.c")
    bin_path = os.path.join(workdir, "bench")
    with open(impl_path, "w") as f:
        f.write(impl_c)
    with open(driver_path, "w") as f:
        f.write(driver_c)
    cmd = compiler_command(cfg) + ["-o", bin_path, impl_path, driver_path, "-lm"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise BenchError(f"C compiler failed ({' '.join(cmd)}):\n{proc.stderr}")
    return bin_path


def measure(term: ImplTerm, cfg: MeasureConfig = None) -> MeasureReport:
    """Compile, run, time, and compare against the 256-bit oracle."""
    cfg = cfg or MeasureConfig()
    ty = type_of(term)
    dom = cfg.domain or ty.domain
    lo_m, hi_m = dom.endpoints(64)
    if not (mpmath.isfinite(lo_m) and mpmath.isfinite(hi_m)):
        raise BenchError(
            "measurement domain is unbounded; pass an explicit MeasureConfig.domain"
        )
    lo, hi = float(lo_m), float(hi_m)
    with tempfile.TemporaryDirectory(prefix="mlm-bench-") as td:
        try:
            bin_path = compile_impl(term, td, "mlm_impl", cfg)
        except FileNotFoundError as exc:
            raise BenchError(
                f"C compiler not found: {exc}; set $MLM_CC or MeasureConfig.compiler"
            ) from None
        proc = subprocess.run([bin_path], capture_output=True, text=True)
        if proc.returncode != 0:
            raise BenchError(f"measurement run failed:\n{proc.stderr}")
    times = []
    outputs = []
    for line in proc.stdout.split("\n"):
        if line.startswith("TIME "):
            times.append(int(line[5:]))
        elif line:
            outputs.append(float.fromhex(line))
    if len(outputs) != cfg.points:
        raise BenchError(f"driver produced {len(outputs)} outputs, expected {cfg.points}")
    outputs = np.array(outputs)
    inputs = sample_inputs(cfg, lo, hi)
    errors, excluded = oracle_errors(ty.target, inputs, outputs, cfg.oracle_bits)
    valid = errors[~np.isnan(errors)]
    median_ns = statistics.median(times)
    return MeasureReport(
        inputs=inputs,
        outputs=outputs,
        abs_errors=errors,
        max_abs_error=float(valid.max()) if valid.size else float("nan"),
        mean_abs_error=float(valid.mean()) if valid.size else float("nan"),
        ns_per_call=median_ns / cfg.points,
        rep_times_ns=times,
        compiler=compiler_identity(cfg),
        excluded=excluded,
        domain=(lo, hi),
        seed=cfg.seed,
    )


def oracle_errors(target, inputs, outputs, oracle_bits: int = 256):
    fv = free_vars(target)
    v = next(iter(fv)) if len(fv) == 1 else "x"
    errors = np.empty(len(inputs))
    excluded = 0
    with mp.workprec(oracle_bits):
        for i, (x, y) in enumerate(zip(inputs, outputs)):
            ref = eval_point(target, {v: mpf(float(x))}, oracle_bits)
            if ref is None:
                errors[i] = np.nan
                excluded += 1
            else:
                errors[i] = abs(float(mpf(float(y)) - ref))
    return errors, excluded


def probe_error(term: ImplTerm, points: int = 512, seed: int = 23,
                domain: Optional[SymInterval] = None, oracle_bits: int = 192) -> float:
    """Quick interpreter-based max-error probe (no C compilation)."""
    ty = type_of(term)
    dom = domain or ty.domain
    lo, hi = dom.endpoints(64)
    if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)):
        lo, hi = mpf(-64), mpf(64)
    cfg = MeasureConfig(points=points, seed=seed)
    xs = sample_inputs(cfg, float(lo), float(hi))
    ys = interp_run(lower(term), xs)
    errors, _ = oracle_errors(ty.target, xs, ys, oracle_bits)
    valid = errors[~np.isnan(errors)]
    return float(valid.max()) if valid.size else float("inf")


def export_plot_data(report: MeasureReport, csv_path: Optional[str] = None) -> str:
    """CSV sorted by input; repr() keeps shortest-round-trip decimals."""
    order = np.argsort(report.inputs)
    lines = ["input,output,abs_error"]
    for i in order:
        e = report.abs_errors[i]
        lines.append(f"{report.inputs[i]!r},{report.outputs[i]!r},{e!r}")
    text = "\n".join(lines) + "\n"
    if csv_path:
        with open(csv_path, "w") as f:
            f.write(text)
    return text


def export_json(report: MeasureReport, path: Optional[str] = None) -> str:
    payload = {
        "aggregates": report.aggregates(),
        "points": [
            {
                "input": repr(float(x)),
                "output": repr(float(y)),
                "abs_error": repr(float(e)),
            }
            for x, y, e in zip(report.inputs, report.outputs, report.abs_errors)
        ],
    }
    text = json.dumps(payload)
    if path:
        with open(path, "w") as f:
            f.write(text)
    return text


def compare(reports: dict) -> dict:
    """Max-error and runtime ratios across same-domain, same-seed reports."""
    items = list(reports.items())
    base_name, base = items[0]
    for name, rep in items[1:]:
        if rep.domain != base.domain or rep.seed != base.seed:
            raise BenchError(f"report {name} has a different domain or seed")
    best_err = min(r.max_abs_error for _, r in items)
    best_ns = min(r.ns_per_call for _, r in items)
    table = {}
    for name, rep in items:
        table[name] = {
            "max_abs_error": rep.max_abs_error,
            "ns_per_call": rep.ns_per_call,
            "error_ratio_to_best": rep.max_abs_error / best_err if best_err else 1.0,
            "time_ratio_to_best": rep.ns_per_call / best_ns if best_ns else 1.0,
            "error_winner": rep.max_abs_error == best_err,
            "time_winner": rep.ns_per_call == best_ns,
        }
    return table
