# resonant_cr/data_manager.py
import csv
import json
import logging
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from resonant_cr import __version__

logger = logging.getLogger(__name__)

RIDX_MAGIC = b"RIDX"
TRAJ_MAGIC = b"TRAJ"
_I8 = np.dtype("<i8")
_F8 = np.dtype("<f8")
_SCHEME_BYTES = 16


def _json_default(obj: Any):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, datetime):
        return obj.isoformat()
    if hasattr(obj, "model_dump"):
        return obj.model_dump(mode="json")
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def save_to_json(data: Dict[str, Any], file_path: str):
    """Saves a dictionary to a JSON file."""
    try:
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4, default=_json_default)
    except IOError as e:
        logger.error(f"Error saving data to {file_path}: {e}")


def load_from_json(file_path: str) -> Dict[str, Any]:
    """Loads a dictionary from a JSON file."""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        logger.warning(f"File not found: {file_path}. Returning empty dictionary.")
        return {}
    except json.JSONDecodeError as e:
        logger.error(f"Error decoding JSON from {file_path}: {e}")
        return {}


def _header_lines(header: Optional[Dict[str, Any]]) -> List[str]:
    lines = [f"# resonant-cr {__version__}"]
    if header:
        resolved = json.dumps(header, sort_keys=True, default=_json_default)
        lines.append(f"# config {resolved}")
    return lines


def save_csv(
    rows: Iterable[Sequence[Any]],
    columns: Sequence[str],
    file_path: str,
    header: Optional[Dict[str, Any]] = None,
) -> int:
    """Writes fixed-column CSV preceded by `#` lines with version and config.

    Returns the number of data rows written.
    """
    count = 0
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        for line in _header_lines(header):
            f.write(line + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {file_path}")
    return count


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    return value


def load_csv(file_path: str) -> Dict[str, Any]:
    """Reads a CSV written by `save_csv` into header metadata and rows."""
    meta: Dict[str, Any] = {}
    with open(file_path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# config "):
            meta = json.loads(line[len("# config ") :])
        elif not line.startswith("#"):
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader, [])
    return {"config": meta, "columns": columns, "rows": list(reader)}


def save_dat(
    columns: Sequence[Sequence[float]],
    file_path: str,
    header: Optional[Dict[str, Any]] = None,
):
    """Plain whitespace-separated numeric columns for gnuplot."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    if data.size == 0:
        data = np.zeros((0, len(columns)))
    np.savetxt(
        file_path,
        data,
        fmt="%.17g",
        header="\n".join(line[2:] for line in _header_lines(header)),
    )


# --- Binary formats ---


def write_resonant_index(
    file_path: str,
    *,
    n: int,
    p: int,
    L: int,
    nu: int,
    R_int: int,
    base: Sequence[int],
    tuples: np.ndarray,
):
    """Writes the RIDX layout: magic, int64 header, base, then int64 tuples."""
    tuples = np.asarray(tuples, dtype=_I8)
    if tuples.ndim != 2:
        tuples = tuples.reshape(len(tuples), -1)
    count, width = tuples.shape
    header = np.array([n, p, L, nu, R_int, count, width], dtype=_I8)
    with open(file_path, "wb") as f:
        f.write(RIDX_MAGIC)
        f.write(header.tobytes())
        f.write(np.asarray(base, dtype=_I8).tobytes())
        f.write(np.ascontiguousarray(tuples).tobytes())
    logger.info(f"Wrote {count} resonant tuples to {file_path}")


def read_resonant_index(file_path: str) -> Dict[str, Any]:
    with open(file_path, "rb") as f:
        raw = f.read()
    if raw[:4] != RIDX_MAGIC:
        raise ValueError(f"{file_path} is not a resonant index file")
    header = np.frombuffer(raw, dtype=_I8, count=7, offset=4)
    n, p, L, nu, R_int, count, width = (int(v) for v in header)
    offset = 4 + 7 * 8
    base = np.frombuffer(raw, dtype=_I8, count=n, offset=offset)
    offset += n * 8
    tuples = np.frombuffer(raw, dtype=_I8, count=count * width, offset=offset)
    return {
        "n": n,
        "p": p,
        "L": L,
        "nu": nu,
        "R_int": R_int,
        "base": base.copy(),
        "tuples": tuples.reshape(count, width).copy(),
    }


class TrajectoryWriter:
    """Streams trajectory frames in the TRAJ layout."""

    def __init__(
        self,
        file_path: str,
        *,
        n: int,
        L: int,
        Lambda: int,
        eps: float,
        dt: float,
        scheme: str,
    ):
        self.file_path = file_path
        self.frames = 0
        self._f = open(file_path, "wb")
        self._f.write(TRAJ_MAGIC)
        self._f.write(np.array([n, L, Lambda], dtype=_I8).tobytes())
        self._f.write(np.array([eps, dt], dtype=_F8).tobytes())
        tag = scheme.encode("ascii")[:_SCHEME_BYTES]
        self._f.write(tag.ljust(_SCHEME_BYTES, b"\0"))

    def write_frame(self, time: float, amplitudes: np.ndarray):
        flat = np.asarray(amplitudes, dtype=complex).ravel()
        inter = np.empty(2 * flat.size, dtype=_F8)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        self._f.write(np.array([time], dtype=_F8).tobytes())
        self._f.write(inter.tobytes())
        self.frames += 1

    def close(self):
        self._f.close()
        logger.info(f"Wrote {self.frames} frames to {self.file_path}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory(file_path: str) -> Dict[str, Any]:
    with open(file_path, "rb") as f:
        raw = f.read()
    if raw[:4] != TRAJ_MAGIC:
        raise ValueError(f"{file_path} is not a trajectory file")
    n, L, Lambda = (int(v) for v in np.frombuffer(raw, dtype=_I8, count=3, offset=4))
    eps, dt = (float(v) for v in np.frombuffer(raw, dtype=_F8, count=2, offset=28))
    scheme = raw[44 : 44 + _SCHEME_BYTES].rstrip(b"\0").decode("ascii")
    modes = (2 * Lambda + 1) ** n
    frame_len = 1 + 2 * modes
    body = np.frombuffer(raw, dtype=_F8, offset=44 + _SCHEME_BYTES)
    frames = body.reshape(-1, frame_len)
    times = frames[:, 0].copy()
    amps = frames[:, 1::2] + 1j * frames[:, 2::2]
    shape = (len(times),) + (2 * Lambda + 1,) * n
    return {
        "n": n,
        "L": L,
        "Lambda": Lambda,
        "eps": eps,
        "dt": dt,
        "scheme": scheme,
        "times": times,
        "amplitudes": amps.reshape(shape),
    }
