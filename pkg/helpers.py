import csv
import json
import math
import os

import numpy as np

from exceptions import ArtifactError

# FORMAT FUNCTIONS
def format_float(value):
    """Format a float with 17 significant digits (lossless for doubles)"""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")

def format_threshold_tag(threshold):
    """File-name friendly threshold label, e.g. 9.0 -> 'p9p00', -1e9 -> 'm1000000000p00'"""
    sign = "m" if threshold < 0 else "p"
    return sign + f"{abs(threshold):.2f}".replace(".", "p")

# PARSE FUNCTIONS
def to_jsonable(value):
    """Convert numpy containers and scalars into plain Python objects"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value

def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"cannot read JSON ({e})", path) from e

# WRITE FUNCTIONS
def ensure_dir(directory):
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"cannot create output directory ({e})", directory) from e
    return directory

def write_json(path, payload):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise ArtifactError(f"cannot write JSON ({e})", path) from e
    return path

def write_csv(path, header, rows):
    """Write rows to CSV; floats go through format_float"""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as e:
        raise ArtifactError(f"cannot write CSV ({e})", path) from e
    return path
