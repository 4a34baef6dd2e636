"""Line-delimited trace files.

One JSON object per line: a self-describing header (format name, version,
seed, config), then one line per step — generation steps with the operation
and its recorded outcome, delivery steps with the applied message's event
label and chain index. Serialization is canonical (sorted keys, fixed
separators), so serialize -> parse -> serialize is byte-identical.
"""

from __future__ import annotations

import json

from .harness import DeliverStep, GenStep, Trace, TraceConfig
from .model import OpCall

FORMAT = "causalrefs-trace"
VERSION = 1


class TraceFormatError(Exception):
    pass


def _line(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def dumps(trace: Trace) -> str:
    lines = [_line({
        "format": FORMAT,
        "version": VERSION,
        "seed": trace.seed,
        "config": {
            "replicas": trace.config.replicas,
            "events": trace.config.events,
            "mode": trace.config.mode,
            "weights": trace.config.weights,
        },
    })]
    for step in trace.steps:
        if isinstance(step, GenStep):
            lines.append(_line({
                "type": "gen",
                "label": step.label,
                "replica": step.replica,
                "op": {"kind": step.op.kind, "args": step.op.args},
                "result": step.result,
            }))
        else:
            lines.append(_line({
                "type": "deliver",
                "replica": step.replica,
                "label": step.label,
                "chain_index": step.chain_index,
            }))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"header is not valid JSON: {e}") from e
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise TraceFormatError("not a trace file (bad format marker)")
    if header.get("version") != VERSION:
        raise TraceFormatError(f"unsupported trace version {header.get('version')!r}")
    try:
        cfg = header["config"]
        config = TraceConfig(
            replicas=cfg["replicas"],
            events=cfg["events"],
            mode=cfg["mode"],
            weights=dict(cfg["weights"]),
        )
        seed = header["seed"]
    except (KeyError, TypeError) as e:
        raise TraceFormatError(f"malformed header: {e}") from e
    steps: list = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(ln)
            if doc["type"] == "gen":
                steps.append(GenStep(
                    doc["label"], doc["replica"],
                    OpCall(doc["op"]["kind"], doc["op"]["args"]),
                    doc["result"],
                ))
            elif doc["type"] == "deliver":
                steps.append(DeliverStep(doc["replica"], doc["label"], doc["chain_index"]))
            else:
                raise TraceFormatError(f"line {i}: unknown record type {doc['type']!r}")
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise TraceFormatError(f"line {i}: malformed record: {e}") from e
    return Trace(seed, config, steps)


def dump(trace: Trace, fh) -> None:
    fh.write(dumps(trace))


def load(fh) -> Trace:
    return loads(fh.read())
