"""Reading channel, state and policy files; writing JSON reports and CSV curves."""
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from adaptive_sim import Policy, TestFunction, decode_history, encode_history
from channel_bounds import ChannelPair
from errors import DistributionError, DomainError, InputFormatError
from quantum_locc import DensityMatrix

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


def read_json(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise InputFormatError(f"Input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"Malformed JSON in {path}: {exc}") from exc


def _require(payload, keys, path):
    if not isinstance(payload, dict):
        raise InputFormatError(f"{path}: expected a JSON object")
    missing = [k for k in keys if k not in payload]
    if missing:
        raise InputFormatError(f"{path}: missing keys {missing}")


def _numeric_matrix(rows, name, path):
    try:
        matrix = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: {name} must be a rectangular table of numbers ({exc})") from exc
    if matrix.ndim != 2:
        raise InputFormatError(f"{path}: {name} must be a list of rows, got {matrix.ndim} dimensions")
    return matrix


def load_channel_pair(path, renormalize=False):
    payload = read_json(path)
    _require(payload, ["W", "Wbar"], path)
    for key in ("W", "Wbar"):
        rows = _numeric_matrix(payload[key], key, path)
        if renormalize:
            rows = rows / rows.sum(axis=1, keepdims=True)
        payload[key] = rows.tolist()
    pair = ChannelPair.from_json(payload)
    logger.info("Loaded channel pair with %d inputs and %d outputs from %s",
                pair.num_inputs, pair.num_outputs, path)
    return pair


def _complex_matrix(rows, name, path):
    try:
        return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: {name} must be rows of [re, im] pairs") from exc


def load_states(path):
    """(rho, sigma) from explicit complex matrices or Bloch vectors."""
    payload = read_json(path)
    if isinstance(payload, dict) and "bloch_rho" in payload:
        _require(payload, ["bloch_rho", "bloch_sigma"], path)
        return DensityMatrix.from_bloch(payload["bloch_rho"]), DensityMatrix.from_bloch(payload["bloch_sigma"])
    _require(payload, ["rho", "sigma"], path)
    rho = _complex_matrix(payload["rho"], "rho", path)
    sigma = _complex_matrix(payload["sigma"], "sigma", path)
    dim = int(payload.get("dim", rho.shape[0]))
    return DensityMatrix(dim, rho), DensityMatrix(dim, sigma)


def history_key(history):
    return "/".join(f"{x}:{y}" for x, y in history)


def _label_lookup(labels):
    return {str(label): label for label in labels}


def policy_to_json(policy):
    tree = {}
    for k, table in enumerate(policy.levels):
        for h, row in enumerate(table):
            key = history_key(decode_history(h, k, policy.input_labels, policy.output_labels))
            support = np.flatnonzero(row > 0)
            if support.size == 1 and row[support[0]] == 1.0:
                tree[key] = policy.input_labels[support[0]]
            else:
                tree[key] = {str(policy.input_labels[i]): float(row[i]) for i in support}
    return tree


def _parse_history(key, inputs, outputs):
    if key == "":
        return ()
    steps = []
    for step in key.split("/"):
        x, _, y = step.partition(":")
        if x not in inputs or y not in outputs:
            raise InputFormatError(f"Unknown labels in history key {key!r}")
        steps.append((inputs[x], outputs[y]))
    return tuple(steps)


def _parse_choice(choice, inputs, key, path):
    if isinstance(choice, dict):
        unknown = [label for label in choice if str(label) not in inputs]
        if unknown:
            raise InputFormatError(f"{path}: unknown inputs {unknown} at history {key!r}")
        try:
            return {inputs[str(label)]: float(prob) for label, prob in choice.items()}
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}: non-numeric probability at history {key!r}") from exc
    if str(choice) in inputs:
        return inputs[str(choice)]
    raise InputFormatError(f"{path}: unknown input {choice!r} at history {key!r}")


def _entries(payload, name, path):
    section = payload[name]
    if not isinstance(section, dict):
        raise InputFormatError(f"{path}: {name!r} must map history strings to entries")
    return section.items()


def load_policy(path, pair, n):
    """Policy and optional test from {"policy": {history: choice}, "test": {history: prob}}.

    A choice is an input label or a mapping from input labels to
    probabilities. Transcripts missing from "test" are never accepted as Wbar;
    a file without "test" returns None for the test.
    """
    payload = read_json(path)
    _require(payload, ["policy"], path)
    inputs = _label_lookup(pair.input_labels)
    outputs = _label_lookup(pair.output_labels)
    tree = {}
    for key, choice in _entries(payload, "policy", path):
        tree[_parse_history(key, inputs, outputs)] = _parse_choice(choice, inputs, key, path)

    def decide(history):
        if history not in tree:
            raise InputFormatError(f"{path}: no decision for history {history_key(history)!r}")
        return tree[history]

    try:
        policy = Policy.from_callback(decide, n, pair)
    except DistributionError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc
    test = None
    if "test" in payload:
        table = np.zeros((pair.num_inputs * pair.num_outputs) ** n)
        for key, prob in _entries(payload, "test", path):
            history = _parse_history(key, inputs, outputs)
            if len(history) != n:
                raise InputFormatError(f"{path}: test key {key!r} is not a full transcript")
            try:
                table[encode_history(history, pair.input_labels, pair.output_labels)] = float(prob)
            except (TypeError, ValueError) as exc:
                raise InputFormatError(f"{path}: non-numeric test value at {key!r}") from exc
        try:
            test = TestFunction(table, n)
        except DistributionError as exc:
            raise InputFormatError(f"{path}: {exc}") from exc
    return policy, test


def to_jsonable(value):
    """Plain JSON types with floats rounded to 12 significant digits and +-inf as strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            raise DomainError("Refusing to emit NaN in a report")
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


def dumps_report(report):
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_report(report, out_path=None):
    text = dumps_report(report)
    if out_path is None:
        sys.stdout.write(text)
        return None
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="utf-8")
    logger.info("Report written to %s", out_path)
    return out_path


def save_curve(frame, out_path=None):
    """Write a curve table as CSV with 12 significant digits."""
    if frame.isna().to_numpy().any():
        raise DomainError("Refusing to emit NaN in a curve")
    if out_path is None:
        frame.to_csv(sys.stdout, index=False, float_format="%.12g", lineterminator="\n")
        return None
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_path, index=False, float_format="%.12g", lineterminator="\n")
    logger.info("Curve with %d rows written to %s", len(frame), out_path)
    return out_path


def curve_frame(columns):
    """DataFrame from an ordered mapping of column name to values."""
    return pd.DataFrame({name: np.asarray(values, dtype=float) for name, values in columns.items()})
