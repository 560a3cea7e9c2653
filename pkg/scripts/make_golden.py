"""Regenerate the golden artifacts in tests/golden from the canonical CLI runs."""

import os
import shutil
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "tests"))

from golden_runs import GOLDEN_DIR, GOLDEN_FILES, run_canonical  # noqa: E402

from bunchkit.cli import run  # noqa: E402


def main():
    with tempfile.TemporaryDirectory() as work:
        os.chdir(work)
        outputs = run_canonical(run)
    if os.path.isdir(GOLDEN_DIR):
        shutil.rmtree(GOLDEN_DIR)
    for name in GOLDEN_FILES:
        path = os.path.join(GOLDEN_DIR, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(outputs[name])
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
