"""Run configuration: TOML schema, validation, and system construction.

A run config is a TOML file with nested tables per pipeline stage; every
methodological knob (boundary clearance, twist floor, disk constant C,
oversampling) is an explicit field so runs are reproducible from the file
alone.  Validation reports every offending field at once.
"""

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:                       # Python < 3.11
    import tomli as tomllib

from .dynamics import Disk, DiskBilliard, GaussianBump, SmoothPotential
from .errors import ConfigError


@dataclass
class RunConfig:
    raw: dict
    text: str
    path: Path

    def section(self, name, default=None):
        return self.raw.get(name, default if default is not None else {})

    def has(self, name):
        return name in self.raw


_STAGE_NAMES = ("simulate", "section", "pressure", "quantize", "resonances",
                "weyl")


def _require(problems, table, table_name, key, types, positive=False):
    if key not in table:
        problems.append(f"{table_name}.{key}: missing required field")
        return None
    value = table[key]
    if not isinstance(value, types):
        problems.append(f"{table_name}.{key}: expected {types}, got {type(value).__name__}")
        return None
    if positive and not value > 0:
        problems.append(f"{table_name}.{key}: must be > 0")
        return None
    return value


def _validate(raw):
    problems = []
    num = (int, float)

    run = raw.get("run", {})
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        problems.append("run.seed: must be a nonnegative integer")

    system = raw.get("system")
    if system is not None:
        kind = system.get("kind")
        if kind == "disk_billiard":
            disks = system.get("disks", [])
            if not disks:
                problems.append("system.disks: at least one disk required")
            for k, d in enumerate(disks):
                _require(problems, d, f"system.disks[{k}]", "radius", num,
                         positive=True)
                c = d.get("center")
                if not (isinstance(c, list) and len(c) == 2):
                    problems.append(f"system.disks[{k}].center: expected [x, y]")
        elif kind == "smooth_potential":
            _require(problems, system, "system", "support_radius", num,
                     positive=True)
            for k, b in enumerate(system.get("bumps", [])):
                _require(problems, b, f"system.bumps[{k}]", "amplitude", num)
                _require(problems, b, f"system.bumps[{k}]", "width", num,
                         positive=True)
                c = b.get("center")
                if not (isinstance(c, list) and len(c) == 2):
                    problems.append(f"system.bumps[{k}].center: expected [x, y]")
        else:
            problems.append(
                "system.kind: must be 'disk_billiard' or 'smooth_potential'")

    dyn = raw.get("dynamics")
    if dyn is not None:
        for key in ("energy", "t_max", "escape_radius"):
            _require(problems, dyn, "dynamics", key, num, positive=True)
        tol = dyn.get("integrator_tol", 1e-10)
        if not (isinstance(tol, num) and tol > 0):
            problems.append("dynamics.integrator_tol: must be > 0")

    sec = raw.get("section")
    if sec is not None:
        for key in ("max_diameter", "delta_bdry", "tau_max"):
            _require(problems, sec, "section", key, num, positive=True)
        if "twist_floor" in sec and not sec["twist_floor"] > 0:
            problems.append("section.twist_floor: must be > 0")

    quantum = raw.get("quantum")
    if quantum is not None:
        hs = quantum.get("h_values")
        if not (isinstance(hs, list) and hs
                and all(isinstance(v, num) and v > 0 for v in hs)):
            problems.append("quantum.h_values: expected a list of positive h")
        elif any(b >= a for a, b in zip(hs, hs[1:])):
            problems.append("quantum.h_values: must be strictly decreasing")

    res = raw.get("resonances")
    if res is not None:
        C = res.get("disk_constant", 1.5)
        if not (isinstance(C, num) and C > 0):
            problems.append("resonances.disk_constant: must be > 0")

    weyl = raw.get("weyl")
    if weyl is not None:
        sizes = weyl.get("baker_sizes")
        if not (isinstance(sizes, list) and len(sizes) >= 4
                and all(isinstance(n, int) and n > 0 and n % 3 == 0
                        for n in sizes)):
            problems.append(
                "weyl.baker_sizes: expected >= 4 positive multiples of 3")
        thr = weyl.get("threshold", 0.5)
        if not (isinstance(thr, num) and 0 < thr < 1):
            problems.append("weyl.threshold: must lie in (0, 1)")

    classical = raw.get("classical")
    if classical is not None:
        model = classical.get("model")
        if model not in ("two_shift", "golden_mean", "open_ternary",
                         "return_map"):
            problems.append(
                "classical.model: one of two_shift, golden_mean, "
                "open_ternary, return_map")

    if problems:
        raise ConfigError(problems)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"config file: {exc}"]) from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"config parse error: {exc}"]) from None
    _validate(raw)
    return RunConfig(raw=raw, text=text, path=path)


def build_system(config):
    system = config.section("system")
    if not system:
        raise ConfigError(["system: table required for this subcommand"])
    if system["kind"] == "disk_billiard":
        disks = [Disk(d["center"], d["radius"]) for d in system["disks"]]
        return DiskBilliard(disks, system.get("support_radius"))
    bumps = [GaussianBump(b["center"], b["amplitude"], b["width"])
             for b in system.get("bumps", [])]
    return SmoothPotential(bumps, system["support_radius"])
