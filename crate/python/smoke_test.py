"""Smoke test for the apieval Python extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/apieval-*.whl
Then run: python python/smoke_test.py
"""

import math
import pathlib
import subprocess
import sys
import tempfile

import apieval

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def main() -> int:
    db = apieval.ApiDatabase.load(str(FIXTURES / "docs.json"))
    assert len(db) == 2
    assert db.class_names() == ["java.util.ArrayList", "java.util.Hashtable"]

    v = db.match_api("boolean remove(Object o)", "java.util.Hashtable")
    assert v.kind == "NameExistsSignatureMismatch", v
    assert v.overload_merge
    assert v.error_kind == "IncorrectReturnTypeOrParameter"
    assert db.match_api("boolean add(E e)", "java.util.ArrayList").is_exact()

    prompt = db.render_task1("java.util.ArrayList")
    assert "java.util.ArrayList" in prompt and "at most 5 API" in prompt
    assert "boolean add(E e)" in db.render_task2("java.util.ArrayList", "boolean add(E e)")

    assert apieval.extract_api_lines('1. "int size()": Returns the size.\n') == ["int size()"]
    code = apieval.extract_code("Code snippet:\n```java\npublic class Main {\n  public static void main(String[] a) { }\n}\n```\n")
    assert code is not None and code.startswith("public class Main")

    for k in (1, 2, 4, 10):
        assert abs(apieval.perplexity([math.log(1 / k)] * k) - k) < 1e-9
    d, mag = apieval.cliffs_delta([1, 2, 3], [4, 5, 6])
    assert d == -1.0 and mag == "large"
    u, p, exact = apieval.mann_whitney([1, 2, 3], [4, 5, 6])
    assert u == 0.0 and exact and abs(p - 0.1) < 1e-12
    assert apieval.representative_sample_size(1000) == 278

    cli = ROOT / "target" / "debug" / "apieval"
    if cli.exists():
        with tempfile.TemporaryDirectory() as tmp:
            out = pathlib.Path(tmp) / "out"
            subprocess.run(
                [str(cli), "run", "--config", str(FIXTURES / "run.conf"), "--out", str(out)],
                check=True,
                capture_output=True,
            )
            files = apieval.recompute(str(out / "ledger.jsonl"), str(out / "again"))
            for name in files:
                assert (out / "again" / name).read_bytes() == (out / "reports" / name).read_bytes(), name
            print(f"recomputed {len(files)} report files identically")

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
