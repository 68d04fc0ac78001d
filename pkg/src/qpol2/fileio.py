"""File formats: JSON for states/ensembles/results, CSV for matrices, binary grids.

Every JSON document carries the schema tag "qpol2/v1".  Matrix CSV files
are 4 lines of 4 comma-separated values at 17 significant digits.  Image
grids are binary: a little-endian uint32 (width, height) header followed
by row-major pixels of 16 little-endian float64 tensor entries each.
"""

import csv
import json
import struct

import numpy as np

from .channels import KrausEnsemble
from .exceptions import FormatError
from .tomography import CountRecord

__all__ = [
    "SCHEMA",
    "write_json",
    "read_json",
    "density_to_json",
    "density_from_json",
    "kraus_to_json",
    "kraus_from_json",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_counts_csv",
    "read_counts_csv",
    "write_sweep_csv",
    "write_grid",
    "read_grid",
    "write_pixel_map",
    "read_mc_config",
    "load_tensor",
]

SCHEMA = "qpol2/v1"


def write_json(payload: dict, path):
    doc = {"schema": SCHEMA}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise FormatError(f"{path}: missing or unsupported schema tag")
    return doc


def _matrix_payload(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _matrix_from_payload(doc, key_re="re", key_im="im") -> np.ndarray:
    try:
        m = np.asarray(doc[key_re], dtype=float) + 1j * np.asarray(doc[key_im], dtype=float)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed matrix payload ({exc})") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise FormatError("matrix payload is not square")
    return m


def density_to_json(rho, path):
    rho = np.asarray(rho, dtype=complex)
    payload = {"dim": rho.shape[0]}
    payload.update(_matrix_payload(rho))
    write_json(payload, path)


def density_from_json(path) -> np.ndarray:
    doc = read_json(path)
    rho = _matrix_from_payload(doc)
    if doc.get("dim") not in (2, 4) or rho.shape[0] != doc["dim"]:
        raise FormatError(f"{path}: density matrix must declare dim 2 or 4")
    return rho


def kraus_to_json(ch: KrausEnsemble, path):
    items = []
    for w, j in zip(ch.weights, ch.jones):
        item = {"w": float(w)}
        item.update(_matrix_payload(j))
        items.append(item)
    write_json({"items": items}, path)


def kraus_from_json(path) -> KrausEnsemble:
    doc = read_json(path)
    items = doc.get("items")
    if not isinstance(items, list) or not items:
        raise FormatError(f"{path}: ensemble needs a nonempty 'items' list")
    weights = []
    jones = []
    for item in items:
        if "w" not in item:
            raise FormatError(f"{path}: ensemble item lacks a weight")
        weights.append(float(item["w"]))
        jones.append(_matrix_from_payload(item))
    return KrausEnsemble(np.array(weights), np.array(jones))


def write_matrix_csv(m, path):
    np.savetxt(path, np.asarray(m, dtype=float), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    try:
        m = np.loadtxt(path, delimiter=",", dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: not a numeric CSV matrix ({exc})") from exc
    if m.shape != (4, 4):
        raise FormatError(f"{path}: expected a 4x4 matrix, got shape {m.shape}")
    return m


def write_counts_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting_a", "setting_b", "pairs", "counts"])
        for rec in records:
            writer.writerow([rec.setting_a, rec.setting_b, rec.pairs, rec.counts])


def read_counts_csv(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["setting_a", "setting_b", "pairs", "counts"]:
            raise FormatError(f"{path}: unexpected counts header {reader.fieldnames}")
        for row in reader:
            try:
                pairs = int(row["pairs"])
                counts = int(row["counts"])
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: malformed counts row ({exc})") from exc
            records.append(
                CountRecord(row["setting_a"], row["setting_b"],
                            counts / pairs if pairs else 0.0, counts, pairs)
            )
    return records


SWEEP_COLUMNS = [
    "m",
    "concurrence_opp", "concurrence_tpp",
    "purity_opp", "purity_tpp",
    "entropy_opp", "entropy_tpp",
    "dephasing_opp", "dephasing_tpp",
]


def write_sweep_csv(rows, path, columns=SWEEP_COLUMNS):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])


def write_grid(tensors, path):
    tensors = np.asarray(tensors, dtype=float)
    if tensors.ndim != 4 or tensors.shape[2:] != (4, 4):
        raise ValueError("grid must have shape (H, W, 4, 4)")
    height, width = tensors.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", width, height))
        fh.write(tensors.astype("<f8").tobytes())


def read_grid(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise FormatError(f"{path}: truncated grid header")
        width, height = struct.unpack("<II", header)
        body = fh.read()
    expected = width * height * 16 * 8
    if len(body) != expected:
        raise FormatError(
            f"{path}: grid body has {len(body)} bytes, expected {expected}"
        )
    data = np.frombuffer(body, dtype="<f8").reshape(height, width, 4, 4)
    return data.astype(float)


def write_pixel_map(pixel_map, out_dir):
    """Write one CSV plane per fitted parameter, a residual plane, and a summary."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    names = ["m"] if pixel_map.model == "isotropic" else ["m11", "m22", "m33"]
    for idx, name in enumerate(names):
        np.savetxt(os.path.join(out_dir, f"{name}.csv"),
                   pixel_map.plane(idx), delimiter=",", fmt="%.17g")
    np.savetxt(os.path.join(out_dir, "residual.csv"),
               pixel_map.residuals, delimiter=",", fmt="%.17g")
    finite = pixel_map.residuals[np.isfinite(pixel_map.residuals)]
    write_json(
        {
            "model": pixel_map.model,
            "width": pixel_map.width,
            "height": pixel_map.height,
            "max_residual": float(finite.max()) if finite.size else None,
            "mean_residual": float(finite.mean()) if finite.size else None,
            "n_failed": int((~pixel_map.converged).sum()),
        },
        os.path.join(out_dir, "summary.json"),
    )


def read_mc_config(path) -> dict:
    """Read a Monte Carlo run config; requires either "d" or "eta_grid"."""
    doc = read_json(path)
    for key in ("mu_s", "g", "n_photons", "seed"):
        if key not in doc:
            raise FormatError(f"{path}: config lacks required key '{key}'")
    if ("d" in doc) == ("eta_grid" in doc):
        raise FormatError(f"{path}: config needs exactly one of 'd' or 'eta_grid'")
    return doc


def load_tensor(path) -> np.ndarray:
    """Load a correlation tensor from a tensor CSV or a density-matrix JSON."""
    from .polarization import correlation_tensor

    if str(path).endswith(".json"):
        return correlation_tensor(density_from_json(path))
    return read_matrix_csv(path)
