"""导出一份模拟数据集 CSV，供 thin 与 bench 子命令使用。"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from toolkits.kt_regression.data import gen_sim, save_csv  # noqa: E402


def export_sim_csv(n: int, seed: int, output: Path) -> None:
    save_csv(gen_sim(n, seed), output)
    print(f"已生成 {output}")


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="导出模拟回归数据集")
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default=str(ROOT / "sim.csv"))
    args = parser.parse_args(argv)
    export_sim_csv(args.n, args.seed, Path(args.output))


if __name__ == "__main__":
    main()
