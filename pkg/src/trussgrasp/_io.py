"""File helpers: PNG and JSON, written atomically."""

import json
import os
from pathlib import Path

import cv2
import numpy as np


def atomic_write(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def png_bytes(img):
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = cv2.cvtColor(arr, cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(".png", arr)
    if not ok:
        raise OSError("PNG encoding failed")
    return buf.tobytes()


def dumps(obj):
    """UTF-8 JSON with sorted keys and a trailing newline."""
    return (json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def write_png(path, img):
    atomic_write(path, png_bytes(img))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_image(path, color=True):
    """RGB uint8 image (or single-channel with ``color=False``).

    Raises ``OSError`` when the file is missing or cannot be decoded.
    """
    data = np.fromfile(str(path), dtype=np.uint8)
    flag = cv2.IMREAD_COLOR if color else cv2.IMREAD_GRAYSCALE
    img = cv2.imdecode(data, flag) if data.size else None
    if img is None:
        raise OSError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB) if color else img
