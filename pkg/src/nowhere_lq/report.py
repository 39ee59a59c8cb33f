"""Deterministic report emission: canonical JSON, schema validation, CSV, figures.

Identical inputs must produce byte-identical output, so JSON is rendered
with sorted keys and fixed separators, exact values are "num/den"
strings, and real values are outward-rounded decimal strings.  Every
document emitted by the CLI validates against CERTIFICATE_SCHEMA first.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema

from .certify import LemmaChainReport
from .exact import dec_str_lower, dec_str_upper

SCHEMA_ID = "https://nowhere-lq.invalid/schema/1"

_RAT = {"type": "string", "pattern": "^-?[0-9]+(/[0-9]+)?$"}
_DECIMAL = {"type": "string", "pattern": "^-?[0-9]+\\.[0-9]+$"}
_ENCLOSURE = {
    "type": "object",
    "required": ["lo", "hi", "dec_lo", "dec_hi"],
    "properties": {"lo": _RAT, "hi": _RAT, "dec_lo": _DECIMAL, "dec_hi": _DECIMAL},
}
_INTERVAL = {"type": "array", "items": _RAT, "minItems": 2, "maxItems": 2}
_CHAIN = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
}
_DEPTHS = {
    "type": "object",
    "required": ["J", "L", "D", "m", "Jg"],
    "properties": {k: {"type": "integer", "minimum": 1} for k in ("J", "L", "D", "m", "Jg")},
}
_TRI_STATE = {"enum": ["holds", "fails", "undecided"]}

CERTIFICATE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": SCHEMA_ID,
    "type": "object",
    "required": ["schema_version", "kind"],
    "properties": {
        "schema_version": {"const": "nowhere-lq/1"},
        "kind": {
            "enum": [
                "stage",
                "tn",
                "abuilt",
                "lemma_chain",
                "divergence_integral",
                "divergence_ess_sup",
                "membership",
                "isometry",
                "projection",
                "plot_data",
                "failure",
            ]
        },
    },
    "allOf": [
        {
            "if": {"properties": {"kind": {"const": "lemma_chain"}}},
            "then": {
                "required": ["p", "q", "j0", "s", "rows"],
                "properties": {
                    "p": _RAT,
                    "q": _RAT,
                    "j0": {"type": "integer", "minimum": 1},
                    "s": _RAT,
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["n", "t_n", "lb", "safe_bound", "safe_consistent"],
                            "properties": {
                                "n": {"type": "integer", "minimum": 1},
                                "t_n": _RAT,
                                "m_tail": _RAT,
                                "lb": _ENCLOSURE,
                                "fast_step_holds": {"type": "boolean"},
                                "fast_mid": _ENCLOSURE,
                                "fast_final_holds": {"type": "boolean"},
                                "safe_bound": _ENCLOSURE,
                                "safe_step": _TRI_STATE,
                                "safe_consistent": {"type": "boolean"},
                            },
                        },
                    },
                },
            },
        },
        {
            "if": {"properties": {"kind": {"pattern": "^divergence_"}}},
            "then": {
                "required": [
                    "k",
                    "p",
                    "q",
                    "target",
                    "window",
                    "depths",
                    "witness",
                    "n_tail",
                    "bound",
                    "normalizer",
                ],
                "properties": {
                    "k": {"type": "integer", "minimum": 1},
                    "p": _RAT,
                    "q": {"anyOf": [_RAT, {"const": "inf"}]},
                    "target": _RAT,
                    "window": _INTERVAL,
                    "depths": _DEPTHS,
                    "witness": {
                        "type": "object",
                        "required": ["outer_index", "level", "chain", "hull"],
                        "properties": {
                            "outer_index": {"type": "integer", "minimum": 1},
                            "level": {"type": "integer", "minimum": 1},
                            "chain": _CHAIN,
                            "hull": _INTERVAL,
                            "component_index": {"type": "integer", "minimum": 1},
                            "term_block": {"type": "integer", "minimum": 1},
                        },
                    },
                    "n_tail": {"type": "integer", "minimum": 1},
                    "bound": _ENCLOSURE,
                    "normalizer": _ENCLOSURE,
                    "tail_mass": _RAT,
                    "point": {"anyOf": [_RAT, {"type": "null"}]},
                    "region": {"anyOf": [_INTERVAL, {"type": "null"}]},
                    "region_mass": {"anyOf": [_RAT, {"type": "null"}]},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "membership"}}},
            "then": {
                "required": ["k", "p", "depths", "mass", "norm", "identity_exact"],
                "properties": {
                    "k": {"type": "integer", "minimum": 1},
                    "p": _RAT,
                    "depths": _DEPTHS,
                    "mass": _RAT,
                    "tail_outer": _RAT,
                    "tail_components": _RAT,
                    "identity_exact": {"type": "boolean"},
                    "norm": _ENCLOSURE,
                    "corrected_weight_mass": _RAT,
                    "plain_weight_mass": _ENCLOSURE,
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "isometry"}}},
            "then": {
                "required": ["coeffs", "p", "ratio", "symbolic_identity"],
                "properties": {
                    "coeffs": {"type": "array", "items": _RAT, "minItems": 1},
                    "p": _RAT,
                    "masses": {"type": "array", "items": _RAT},
                    "lhs": _ENCLOSURE,
                    "rhs": _ENCLOSURE,
                    "ratio": _ENCLOSURE,
                    "ratio_truncated": _ENCLOSURE,
                    "truncated_power_sum": _ENCLOSURE,
                    "ideal_power_sum": _ENCLOSURE,
                    "disjoint_pairs": {"type": "integer", "minimum": 0},
                    "symbolic_identity": {"type": "boolean"},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "projection"}}},
            "then": {
                "required": ["K", "p", "delta", "delta_exact", "contraction"],
                "properties": {
                    "K": {"type": "integer", "minimum": 1},
                    "p": _RAT,
                    "delta": {"type": "array", "items": {"type": "array", "items": _ENCLOSURE}},
                    "delta_exact": {"type": "boolean"},
                    "coeffs": {"type": "array", "items": _ENCLOSURE},
                    "pf_norm": _ENCLOSURE,
                    "f_norm": _ENCLOSURE,
                    "contraction": _TRI_STATE,
                    "idempotent_on_span": {"type": "boolean"},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "stage"}}},
            "then": {
                "required": ["n", "measure", "interval_count"],
                "properties": {
                    "n": {"type": "integer", "minimum": 1},
                    "measure": _RAT,
                    "interval_count": {"type": "integer", "minimum": 1},
                    "interval_length": _RAT,
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "tn"}}},
            "then": {
                "required": ["n", "t_n", "fast_bound_holds", "safe_bound_holds"],
                "properties": {
                    "n": {"type": "integer", "minimum": 1},
                    "t_n": _RAT,
                    "fast_bound": _RAT,
                    "fast_bound_holds": {"type": "boolean"},
                    "safe_bound": _RAT,
                    "safe_bound_holds": {"type": "boolean"},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "abuilt"}}},
            "then": {
                "required": ["level", "component_count", "measure", "measure_bounds"],
                "properties": {
                    "level": {"type": "integer", "minimum": 1},
                    "component_depth": {"type": "integer", "minimum": 1},
                    "cantor_stage": {"type": "integer", "minimum": 1},
                    "component_count": {"type": "integer", "minimum": 0},
                    "measure": _RAT,
                    "measure_bounds": {"type": "array", "items": _RAT},
                    "omitted_tail": _RAT,
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "plot_data"}}},
            "then": {
                "required": ["series", "rows", "csv"],
                "properties": {
                    "series": {"const": "lb"},
                    "rows": {"type": "integer", "minimum": 1},
                    "csv": {"type": "string"},
                    "figure": {"anyOf": [{"type": "string"}, {"type": "null"}]},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "failure"}}},
            "then": {
                "required": ["reason"],
                "properties": {
                    "reason": {"type": "string"},
                    "best_bound": {"anyOf": [_ENCLOSURE, {"type": "null"}]},
                    "n_reached": {"type": "integer", "minimum": 0},
                },
            },
        },
    ],
}


def validate_document(doc: dict) -> None:
    """Schema check for every emitted document; raises on violation."""
    jsonschema.validate(doc, CERTIFICATE_SCHEMA)


def canonical_json(doc: dict, compact: bool = False) -> str:
    """Byte-stable rendering: sorted keys, fixed separators, trailing newline."""
    if compact:
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(doc, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


LB_CSV_COLUMNS = ("n", "t_n", "LB_lo", "LB_hi", "corrected_bound")


def write_lb_csv(report: LemmaChainReport, path: Path) -> int:
    """Divergence-bound series as CSV; returns the row count.

    Exact values stay "num/den"; enclosure endpoints are decimal strings
    rounded outward (LB_lo down, LB_hi up); corrected_bound is the
    certified lower endpoint of the safe bound.
    """
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LB_CSV_COLUMNS)
        for row in report.rows:
            writer.writerow(
                (
                    row.n,
                    f"{row.t_n.numerator}/{row.t_n.denominator}",
                    dec_str_lower(row.lb.lo),
                    dec_str_upper(row.lb.hi),
                    dec_str_lower(row.safe_bound.lo),
                )
            )
    return len(report.rows)


def render_lb_figure(report: LemmaChainReport, path: Path) -> None:
    """Log-scale rendering of the certified bounds next to the safe chain."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = [row.n for row in report.rows]
    lb_lo = [float(row.lb.lo) for row in report.rows]
    lb_hi = [float(row.lb.hi) for row in report.rows]
    safe = [float(row.safe_bound.lo) for row in report.rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.fill_between(ns, lb_lo, lb_hi, color="tab:blue", alpha=0.4, label="certified LB(n)")
    ax.plot(ns, lb_lo, color="tab:blue", linewidth=1)
    ax.plot(ns, safe, color="tab:orange", linestyle="--", label="safe closed-form bound")
    ax.set_yscale("log")
    ax.set_xlabel("tail index n")
    ax.set_ylabel("lower bound for the tail integral")
    ax.set_title(f"divergence bounds, s = {report.s}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
