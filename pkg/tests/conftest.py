import numpy as np
import pytest


def write_domain(path, vertices):
    lines = ["# polygon vertices, one 'x y' pair per line"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in vertices]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_config(path, entries):
    path.write_text("".join(f"{k} = {v}\n" for k, v in entries.items()), encoding="utf-8")


@pytest.fixture
def square_file(tmp_path):
    p = tmp_path / "square.txt"
    write_domain(p, [(0, 0), (1, 0), (1, 1), (0, 1)])
    return p


@pytest.fixture
def disk_file(tmp_path):
    ts = 2 * np.pi * np.arange(64) / 64
    p = tmp_path / "disk64.txt"
    write_domain(p, np.column_stack([np.cos(ts), np.sin(ts)]))
    return p
