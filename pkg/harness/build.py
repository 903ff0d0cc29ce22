"""Build one harness executable per emitted kernel file.

Usage: python harness/build.py KERNEL.hpp [-o OUT] [--cxx g++]
"""
import argparse
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).parent


def build(kernel: Path, out: Path, cxx: str = "g++") -> Path:
    kernel = kernel.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    cmd = [
        cxx, "-O2", "-std=c++17", "-pthread",
        f"-I{HERE}", f"-I{kernel.parent}",
        f"-DKERNEL_HEADER=\"{kernel.name}\"",
        str(HERE / "main.cpp"),
        "-o", str(out),
    ]
    subprocess.run(cmd, check=True)
    return out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("kernel")
    ap.add_argument("-o", "--out", default=None)
    ap.add_argument("--cxx", default="g++")
    args = ap.parse_args()
    kernel = Path(args.kernel)
    out = Path(args.out) if args.out else kernel.with_suffix(".bin")
    build(kernel, out, args.cxx)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
