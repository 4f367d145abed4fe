"""JSON (de)serialization of offline artifacts for the CLI pipeline.

Artifacts persist between pipeline stages so schedule/simulate runs are
auditable and diffable. Matrices are stored row-major with explicit dims;
every file embeds the manifest hash of the run that produced it.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import MissingArtifact
from .innovation import InnovationStatistics, propagate_statistics
from .model import ScenarioModel, validate_scenario
from .quantizer import CellMomentTable
from .synthesis import RiccatiSolution

RICCATI_FILE = "riccati.json"
STATS_FILE = "innovation_stats.json"
MOMENTS_FILE = "moment_tables.json"
MANIFEST_FILE = "manifest.json"


def mat_to_json(arr):
    arr = np.asarray(arr, dtype=float)
    return {"dims": list(arr.shape), "data": arr.ravel().tolist()}


def mat_from_json(obj):
    return np.asarray(obj["data"], dtype=float).reshape(obj["dims"])


def manifest_hash(manifest: dict) -> str:
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _dump(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(path):
    if not os.path.exists(path):
        raise MissingArtifact(f"missing artifact file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_riccati(out_dir, riccati: RiccatiSolution, mhash: str):
    _dump(os.path.join(out_dir, RICCATI_FILE), {
        "manifest_hash": mhash,
        "P": mat_to_json(riccati.P), "L": mat_to_json(riccati.L),
        "N": mat_to_json(riccati.N), "r": riccati.r.tolist(),
    })


def read_riccati(art_dir) -> RiccatiSolution:
    doc = _load(os.path.join(art_dir, RICCATI_FILE))
    return RiccatiSolution(
        P=mat_from_json(doc["P"]), L=mat_from_json(doc["L"]),
        N=mat_from_json(doc["N"]), r=np.asarray(doc["r"], dtype=float),
    )


def write_stats(out_dir, stats: InnovationStatistics, mhash: str):
    _dump(os.path.join(out_dir, STATS_FILE), {
        "manifest_hash": mhash,
        "scenario": stats.model.to_dict(),
        "M": mat_to_json(stats.M),
        "Sigma_pred": mat_to_json(stats.Sigma_pred),
        "Sigma_filt": mat_to_json(stats.Sigma_filt),
        "K": mat_to_json(stats.K),
    })


def read_stats(art_dir) -> InnovationStatistics:
    doc = _load(os.path.join(art_dir, STATS_FILE))
    model = validate_scenario(doc["scenario"])
    # recompute: cheap, and guarantees internal caches (A powers) exist
    stats = propagate_statistics(model)
    return stats


def write_moments(out_dir, moments: CellMomentTable, delays, prices, mhash: str):
    _dump(os.path.join(out_dir, MOMENTS_FILE), {
        "manifest_hash": mhash,
        "delays": np.asarray(delays, dtype=int).tolist(),
        "prices": np.asarray(prices, dtype=float).tolist(),
        "probs": [[p.tolist() for p in row] for row in moments.probs],
        "means": [[m.tolist() for m in row] for row in moments.means],
        "F": mat_to_json(moments.F),
        "M_cov": mat_to_json(moments.M_cov),
    })


def read_moments(art_dir):
    """Returns (CellMomentTable, delays, prices)."""
    doc = _load(os.path.join(art_dir, MOMENTS_FILE))
    probs = tuple(tuple(np.asarray(p) for p in row) for row in doc["probs"])
    means = tuple(tuple(np.atleast_2d(np.asarray(m)) for m in row) for row in doc["means"])
    table = CellMomentTable(
        probs=probs, means=means,
        F=mat_from_json(doc["F"]), M_cov=mat_from_json(doc["M_cov"]),
    )
    return table, np.asarray(doc["delays"], dtype=int), np.asarray(doc["prices"], dtype=float)


def write_manifest(out_dir, manifest: dict):
    mhash = manifest_hash(manifest)
    _dump(os.path.join(out_dir, MANIFEST_FILE), {"hash": mhash, **manifest})
    return mhash
