# Read externally extracted 128-d audio embeddings, keyed by window

from pathlib import Path

import numpy as np
import pandas as pd

from ...exceptions import DataError

EMBEDDING_SIZE = 128


def _read_csv(path):
    table = pd.read_csv(path, dtype={"window_key": str})

    if "window_key" not in table.columns:
        raise DataError(f"{path} has no 'window_key' column.")

    value_columns = [c for c in table.columns if c != "window_key"]
    expected = [f"e{i}" for i in range(len(value_columns))]

    if value_columns != expected:
        raise DataError(f"Embedding columns in {path} must be named e0..e{len(value_columns) - 1}.")

    return table["window_key"].tolist(), table[value_columns].to_numpy(dtype=np.float64)


def _read_npz(path):
    with np.load(path, allow_pickle=False) as archive:
        if "keys" not in archive or "embeddings" not in archive:
            raise DataError(f"{path} must hold 'keys' and 'embeddings' arrays.")

        keys = [str(k) for k in archive["keys"]]
        values = np.asarray(archive["embeddings"], dtype=np.float64)

    if values.ndim != 2 or values.shape[0] != len(keys):
        raise DataError(f"{path}: {len(keys)} keys for embeddings of shape {values.shape}.")

    return keys, values


def load_embeddings(path, keys=None):
    """
    Read a table of window embeddings.

    Two formats are accepted: a CSV with columns `window_key,e0,...,e127`, or a NumPy `.npz`
    archive holding a `keys` string array and an `embeddings` (n, 128) array.

    Parameters
    ----------
    path : str or pathlib.Path
        The embedding file.
    keys : list of str, optional
        Window keys ("recording:start") to return, in this order. By default all rows are
        returned in file order.

    Returns
    -------
    (list of str, numpy.ndarray)
        The keys and the matching (n, 128) matrix.
    """
    path = Path(path)

    if not path.exists():
        raise DataError(f"Embedding file not found: {path}")

    if path.suffix == ".npz":
        file_keys, values = _read_npz(path)
    else:
        file_keys, values = _read_csv(path)

    if values.shape[1] != EMBEDDING_SIZE:
        raise DataError(f"Embeddings in {path} are {values.shape[1]} wide, expected "
                        f"{EMBEDDING_SIZE}.")

    if not np.all(np.isfinite(values)):
        raise DataError(f"{path} contains non-finite embedding values.")

    index = {}

    for row, key in enumerate(file_keys):
        if key in index:
            raise DataError(f"Duplicate window key in {path}: {key}")

        index[key] = row

    if keys is None:
        return file_keys, values

    keys = list(keys)
    missing = [k for k in keys if k not in index]

    if missing:
        shown = ", ".join(missing[:10])
        more = f" (and {len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"{len(missing)} window keys have no embedding in {path}: {shown}{more}")

    return keys, values[[index[k] for k in keys]]
