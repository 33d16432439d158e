"""Artifact writers and readers: CSV, JSON, binary operators, manifests.

All writers format floats through repr (shortest round-trip), so a rerun
with identical inputs produces byte-identical files; the run manifest
lists every artifact with its SHA-256 content hash.
"""

import hashlib
import json
import struct
from datetime import datetime, timezone

import numpy as np


def _fmt(x):
    return repr(float(x))


def write_phase_samples_csv(path, points, times=None):
    """Phase points as CSV rows t, x1, x2, xi1, xi2."""
    lines = ["t,x1,x2,xi1,xi2"]
    for k, p in enumerate(points):
        t = 0.0 if times is None else times[k]
        a = p.as_array()
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in a]))
    path.write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path, trajectory):
    lines = ["t,x1,x2,xi1,xi2"]
    for t, s in zip(trajectory.times, trajectory.states):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in s]))
    path.write_text("\n".join(lines) + "\n")


def write_resonances_csv(path, resonance_set):
    lines = ["re_z,im_z,multiplicity,residual"]
    for z in resonance_set.zeros:
        lines.append(",".join([_fmt(z.z.real), _fmt(z.z.imag),
                               str(z.multiplicity), _fmt(z.residual)]))
    path.write_text("\n".join(lines) + "\n")


def write_json(path, payload):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_operator_binary(path, matrix, h, z):
    """Dense complex matrix with a fixed little-endian header.

    Layout: uint64 rows, uint64 cols, float64 h, float64 Re z, float64
    Im z, then row-major complex128 entries.
    """
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.complex128))
    header = struct.pack("<QQddd", m.shape[0], m.shape[1], float(h),
                         float(np.real(z)), float(np.imag(z)))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(m.astype("<c16").tobytes(order="C"))


def read_operator_binary(path):
    with open(path, "rb") as fh:
        rows, cols, h, zr, zi = struct.unpack("<QQddd", fh.read(40))
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(rows, cols)
    return data.astype(np.complex128), h, complex(zr, zi)


def return_map_to_dict(rmd):
    """JSON-ready description of charts, blocks, and fitted polynomials."""
    charts = []
    for c in rmd.charts:
        meta = {"index": c.index, "kind": c.kind,
                "domain": [float(v) for v in c.domain],
                "ellipse": [c.ellipse.y0, c.ellipse.eta0,
                            c.ellipse.a, c.ellipse.b] if c.ellipse else None}
        if c.kind == "birkhoff":
            meta.update(disk_index=c.disk_index,
                        center=[float(v) for v in c.center],
                        radius=float(c.radius), phi_ref=float(c.phi_ref),
                        speed=float(c.speed))
        else:
            meta.update(x0=[float(v) for v in c.x0],
                        u_dir=[float(v) for v in c.u_dir],
                        e_dir=[float(v) for v in c.e_dir],
                        energy=float(c.energy))
        charts.append(meta)
    blocks = []
    for (j, i), b in sorted(rmd.blocks.items()):
        entry = {"target": j, "source": i,
                 "samples": {name: [float(v) for v in getattr(b, name)]
                             for name in ("dep_y", "dep_eta", "arr_y",
                                          "arr_eta", "tau", "action")},
                 "is_core": [bool(v) for v in b.is_core]}
        fit = rmd.fits.get((j, i))
        if fit is not None:
            entry["fit"] = {
                "basis": "chebyshev",
                "degree": int(fit.S.coeffs.shape[0] - 1),
                "rect": [float(v) for v in fit.S.rect],
                "S_coeffs": fit.S.coeffs.tolist(),
                "tau_coeffs": fit.tau.coeffs.tolist(),
                "residual": fit.residual,
                "tau_residual": fit.tau_residual,
            }
        blocks.append(entry)
    return {"charts": charts,
            "adjacency": {str(i): rmd.j_plus(i) for i in range(len(rmd.charts))},
            "blocks": blocks}


def fits_from_dict(payload):
    """Rebuild the fitted generating functions from a serialized map."""
    from .section import Chebyshev2D, GeneratingFit
    fits = {}
    for entry in payload["blocks"]:
        fd = entry.get("fit")
        if fd is None:
            continue
        rect = tuple(fd["rect"])
        fits[(entry["target"], entry["source"])] = GeneratingFit(
            S=Chebyshev2D(np.array(fd["S_coeffs"]), rect),
            tau=Chebyshev2D(np.array(fd["tau_coeffs"]), rect),
            residual=fd["residual"], tau_residual=fd["tau_residual"])
    return fits


def sha256_of(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir, config_text, seed, artifact_names):
    import scipy
    import sys
    from . import __version__

    manifest = {
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "seed": seed,
        "versions": {
            "scatres": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "artifacts": {name: sha256_of(out_dir / name)
                      for name in sorted(artifact_names)},
        "created": datetime.now(timezone.utc).isoformat(),
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest
