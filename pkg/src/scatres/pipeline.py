"""Config-driven pipeline stages shared by the command line and demos.

Each stage takes the validated RunConfig, computes its piece of the full
reduction (trapped set, sections, pressures, quantized operators,
determinant zeros, counting fits) and returns both the in-memory objects
and a list of artifact files written into the output directory.  Stages
recompute their prerequisites from the config, so every subcommand is a
pure function of (config, seed).
"""

import numpy as np

from . import classical, io, quantum, resonances
from .config import build_system
from .dynamics import box_counting_dimension, integrate_flow, sample_trapped_set
from .errors import ConfigError, ScatresError
from .section import build_sections, fit_all_blocks, partition_blocks


def _dyn(config):
    d = config.section("dynamics")
    if not d:
        raise ConfigError(["dynamics: table required for this subcommand"])
    return d


def trapped_stage(config):
    system = build_system(config)
    d = _dyn(config)
    samples = sample_trapped_set(
        system, E=d["energy"], budget=d.get("trapped_budget", 60),
        t_max=d["t_max"], escape_radius=d["escape_radius"],
        tol=d.get("integrator_tol", 1e-10), grid=d.get("seed_grid", 41),
        per_spike=d.get("per_spike", 4))
    return system, samples


def run_simulate(config, out_dir):
    system, samples = trapped_stage(config)
    d = _dyn(config)
    artifacts = []
    io.write_phase_samples_csv(out_dir / "trapped_set.csv", samples)
    artifacts.append("trapped_set.csv")
    if samples:
        traj = integrate_flow(system, samples[0], min(d["t_max"], 10.0),
                              tol=d.get("integrator_tol", 1e-10))
        io.write_trajectory_csv(out_dir / "trajectory.csv", traj)
        artifacts.append("trajectory.csv")
    payload = {"n_samples": len(samples)}
    scales = d.get("dimension_scales")
    if scales and len(samples) >= 100:
        dim, res = box_counting_dimension(samples, scales)
        payload.update(box_dimension=dim, fit_residual=res, scales=scales)
    io.write_json(out_dir / "simulate.json", payload)
    artifacts.append("simulate.json")
    return {"system": system, "samples": samples}, artifacts


def section_stage(config):
    system, samples = trapped_stage(config)
    d = _dyn(config)
    s = config.section("section")
    if not s:
        raise ConfigError(["section: table required for this subcommand"])
    kwargs = dict(
        delta_bdry=s.get("delta_bdry", 0.05), tau_max=s.get("tau_max", 12.0),
        pad_factor=s.get("pad_factor", 1.6),
        ellipse_margin=s.get("ellipse_margin", 1.6),
        escape_radius=d["escape_radius"],
        tol=d.get("integrator_tol", 1e-10))
    if "y_halfwidth" in s:
        kwargs["y_halfwidth"] = s["y_halfwidth"]
    if "ellipse_a" in s and "ellipse_b" in s:
        kwargs["ellipse_axes"] = (s["ellipse_a"], s["ellipse_b"])
        kwargs["require_core_cover"] = s.get("require_core_cover", True)
    charts = build_sections(system, d["energy"], samples,
                            s.get("max_diameter", 4.0), **kwargs)
    rmd = partition_blocks(
        charts, system, s.get("sample_budget", 20000),
        tau_max=s.get("tau_max", 12.0), escape_radius=d["escape_radius"],
        tol=d.get("integrator_tol", 1e-10),
        extend_billiard=s.get("extend_billiard", False))
    fit_all_blocks(rmd, s.get("fit_degree", 12),
                   twist_floor=s.get("twist_floor", 1e-3))
    return system, rmd


def run_section(config, out_dir):
    system, rmd = section_stage(config)
    io.write_json(out_dir / "return_map.json", io.return_map_to_dict(rmd))
    return {"system": system, "return_map": rmd}, ["return_map.json"]


_MODELS = {
    "two_shift": classical.doubling_map,
    "golden_mean": classical.golden_mean_shift,
    "open_ternary": classical.open_ternary_map,
}


def _weight_from_config(descriptor):
    if descriptor in (None, "zero", 0, 0.0):
        return None
    if isinstance(descriptor, (int, float)):
        return float(descriptor)
    if descriptor == "neg_log_expansion":
        return "neg_log_expansion"
    raise ConfigError([f"classical.weight: unsupported value {descriptor!r}"])


def half_unstable_weight(rmd):
    """-1/2 log of the largest singular value of the fitted block Jacobian."""
    from .section import block_jacobian

    def weight(key, dep_y, dep_eta, hit):
        fit = rmd.fits[key]
        J = block_jacobian(fit, hit.y, dep_y)
        s_max = np.linalg.svd(np.asarray(J, dtype=float), compute_uv=False)[0]
        return -0.5 * np.log(s_max)

    return weight


def run_pressure(config, out_dir):
    c = config.section("classical")
    if not c:
        raise ConfigError(["classical: table required for this subcommand"])
    artifacts = []
    payload = {"model": c["model"]}
    if c["model"] == "return_map":
        system, rmd = section_stage(config)
        cells = c.get("ulam_cells", 10)
        weight = None
        if c.get("weight") == "half_unstable":
            weight = half_unstable_weight(rmd)
        base = classical.ulam_return_map_matrix(
            rmd.charts, system, cells=cells, sub=c.get("ulam_sub", 2),
            weight=weight, tau_max=config.section("section").get("tau_max", 12.0),
            escape_radius=_dyn(config)["escape_radius"])
        fine = classical.ulam_return_map_matrix(
            rmd.charts, system, cells=2 * cells, sub=c.get("ulam_sub", 2),
            weight=weight, tau_max=config.section("section").get("tau_max", 12.0),
            escape_radius=_dyn(config)["escape_radius"])
        rho_fine = fine.spectral_radius()
        rho_base = base.spectral_radius()
        if rho_fine <= 0 or rho_base <= 0:
            raise ScatresError(
                "return-map Ulam matrix is nilpotent at this resolution; "
                "increase ulam_cells or ulam_sub")
        value = float(np.log(rho_fine))
        payload.update(
            discretization=["ulam", 2 * cells], value=value,
            error_estimate=abs(value - float(np.log(rho_base))),
            note="sampled return map: only the leading pressure is certified")
    else:
        model = _MODELS[c["model"]]()
        weight = _weight_from_config(c.get("weight"))
        disc = (c.get("discretization", "collocation"), c.get("resolution", 32))
        pr = classical.topological_pressure(model, weight, disc)
        payload.update(discretization=list(disc), value=pr.value,
                       error_estimate=pr.error_estimate)
        if "orbit_T" in c:
            payload["orbit_estimate"] = classical.orbit_pressure(
                model, weight, c["orbit_T"])
        res = c.get("resonances")
        if res and res.get("enabled", True):
            res_weight = _weight_from_config(res.get("weight", c.get("weight")))
            rs = classical.ruelle_resonances(
                model, res_weight, res.get("roof", 1.0),
                resonances.RectDomain(*res["domain"]),
                resolution=res.get("resolution", 40))
            io.write_resonances_csv(out_dir / "ruelle_resonances.csv", rs)
            artifacts.append("ruelle_resonances.csv")
            payload["n_ruelle_zeros"] = len(rs.zeros)
    io.write_json(out_dir / "pressure.json", payload)
    artifacts.append("pressure.json")
    return payload, artifacts


def quantize_stage(config, rmd=None, system=None):
    q = config.section("quantum")
    if not q:
        raise ConfigError(["quantum: table required for this subcommand"])
    if rmd is None:
        system, rmd = section_stage(config)
    s = config.section("section")
    C = config.section("resonances").get("disk_constant", 1.5)
    operators = []
    for h in q["h_values"]:
        operators.append(quantum.QuantumReturnOperator(
            rmd, h=h, oversampling=q.get("oversampling", 4.0),
            min_nodes=q.get("min_nodes", 48),
            twist_floor=s.get("twist_floor", 1e-3), z_max=2.0 * C * h))
    return system, rmd, operators


def run_quantize(config, out_dir):
    system, rmd, operators = quantize_stage(config)
    artifacts = []
    sidecar = {"h_values": [], "blocks": {}}
    for op in operators:
        name = f"operator_h{op.h:.8f}.bin"
        io.write_operator_binary(out_dir / name, op.dense(0.0), op.h, 0.0)
        artifacts.append(name)
        sidecar["h_values"].append(op.h)
        sidecar["blocks"][name] = {
            "ranks": op.ranks, "dimension": op.dimension,
            "grid_sizes": [g.size for g in op.grids],
            "adjacency": sorted(f"{j}<-{i}" for (j, i) in op._pieces)}
    io.write_json(out_dir / "operators.json", sidecar)
    artifacts.append("operators.json")
    return {"system": system, "return_map": rmd, "operators": operators}, artifacts


def run_resonances(config, out_dir):
    system, rmd, operators = quantize_stage(config)
    res = config.section("resonances")
    C = res.get("disk_constant", 1.5)
    artifacts = []
    summary = []
    for op in operators:
        domain = resonances.DiskDomain(0.0 + 0.0j, C * op.h)
        rs = resonances.find_zeros(
            op.dense, domain, coarse_grid=res.get("coarse_grid", 64),
            cell_cap=res.get("cell_cap", 2), h=op.h,
            phase_scale=op.phase_rate(), provenance=f"quantum h={op.h}")
        name = f"resonances_h{op.h:.8f}.csv"
        io.write_resonances_csv(out_dir / name, rs)
        artifacts.append(name)
        entry = {"h": op.h, "n_zeros": len(rs.zeros),
                 "total_multiplicity": rs.total_multiplicity,
                 "outer_winding": rs.outer_winding,
                 "disk_radius": C * op.h}
        if rs.zeros:
            gap = resonances.spectral_gap_report(rs, pressure=float("nan"))
            entry["gap"] = gap.gap
        summary.append(entry)
    io.write_json(out_dir / "resonances.json", {"sets": summary})
    artifacts.append("resonances.json")
    return {"summary": summary}, artifacts


def run_weyl(config, out_dir):
    w = config.section("weyl")
    if not w:
        raise ConfigError(["weyl: table required for this subcommand"])
    sizes = w["baker_sizes"]
    threshold = w.get("threshold", 0.5)
    items = []
    for n in sizes:
        B = quantum.open_baker(n, open_middle=w.get("open_middle", True))
        items.append((n, np.linalg.eigvals(B)))
    exponent, residual = resonances.resonance_density(items, threshold)
    payload = {"sizes": sizes, "threshold": threshold, "exponent": exponent,
               "fit_residual": residual,
               "counts": [int(np.sum(np.abs(vals) > threshold))
                          for (_, vals) in items]}
    io.write_json(out_dir / "weyl.json", payload)
    return payload, ["weyl.json"]


STAGES = {
    "simulate": run_simulate,
    "section": run_section,
    "pressure": run_pressure,
    "quantize": run_quantize,
    "resonances": run_resonances,
    "weyl": run_weyl,
}

_STAGE_REQUIRES = {
    "simulate": ("system", "dynamics"),
    "section": ("system", "dynamics", "section"),
    "pressure": ("classical",),
    "quantize": ("system", "dynamics", "section", "quantum"),
    "resonances": ("system", "dynamics", "section", "quantum"),
    "weyl": ("weyl",),
}


def stages_available(config):
    """Subcommands whose config tables are all present."""
    out = []
    for name, needs in _STAGE_REQUIRES.items():
        if all(config.has(k) for k in needs):
            out.append(name)
    return out
