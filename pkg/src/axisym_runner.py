#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
軸対称 Laplace 境界積分方程式ソルバーのバッチ実行

機能:
- solve        : 点電荷の厳密解を境界データにして解き、評価点での誤差を出す
- convergence  : N_P × モード数の誤差表
- timing       : 各フェーズの所要時間と log-log 傾き（--compare-composite で合成 Gauss と比較）
- conditioning : モードごとの特異値の最大・最小と条件数
- quad-check   : 埋め込み求積表の検算
- defaults     : 全設定項目と既定値を設定ファイル形式で出力

実行方法:
    python src/axisym_runner.py solve --set curve=sphere --set n_panels=10
    python src/axisym_runner.py convergence --panels 5,10 --modes 25,50,100
    python src/axisym_runner.py timing --sweep panels --values 5,10,20,40
    python src/axisym_runner.py defaults > config/axisym_default.txt

終了コード: 0 成功 / 1 数値計算の失敗 / 2 設定エラー
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)]
)
logger = logging.getLogger(__name__)

import experiments  # noqa: E402
from errors import NUMERICAL_ERRORS, ConfigurationError  # noqa: E402
from run_config import defaults_text, load_config  # noqa: E402

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"カンマ区切りの整数が必要です: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("値が空です")
    return values


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axisym_runner", description="軸対称 Laplace BIE ソルバー")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value 形式の設定ファイル")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="設定の上書き（複数可）")
    common.add_argument("--output-dir", help="成果物の出力先（output_dir を上書き）")
    common.add_argument("-v", "--verbose", action="store_true", help="DEBUG ログとトレースバックを出す")
    common.add_argument("--log-file", help="ログを UTF-8 でファイルにも書く")

    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="1 回解いて誤差と σ を出力")
    conv = sub.add_parser("convergence", parents=[common], help="N_P × モード数の誤差表")
    conv.add_argument("--panels", type=_int_list, default=[5, 10])
    conv.add_argument("--modes", type=_int_list, default=[25, 50, 100])
    timing = sub.add_parser("timing", parents=[common], help="フェーズごとの所要時間")
    timing.add_argument("--sweep", choices=("panels", "modes"), default="panels")
    timing.add_argument("--values", type=_int_list, default=[5, 10, 20, 40])
    timing.add_argument("--compare-composite", action="store_true",
                        help="合成 Gauss 経路での組み立て時間も測る")
    sub.add_parser("conditioning", parents=[common], help="モードごとの特異値")
    quad = sub.add_parser("quad-check", parents=[common], help="埋め込み求積表の検算")
    quad.add_argument("--seed", type=int, default=0)
    sub.add_parser("defaults", help="既定設定を設定ファイル形式で出力")
    return ap


def _run(args) -> None:
    config = load_config(args.config, args.overrides)
    if args.output_dir:
        config = config.replace(output_dir=args.output_dir)
    out = Path(config.output_dir)

    if args.command == "solve":
        result = experiments.run_solve(config)
        experiments.write_solve_artifacts(result, out)
        print(f"相対 l∞ 誤差: {result.error:.5e}")
    elif args.command == "convergence":
        rows = experiments.run_convergence(config, args.panels, args.modes)
        experiments.write_convergence(rows, out)
    elif args.command == "timing":
        rows, summary = experiments.run_timing(config, args.sweep, args.values, args.compare_composite)
        experiments.write_dict_rows(out / "timing.csv", "timing", rows)
        experiments.write_json(out / "timing_summary.json", summary)
    elif args.command == "conditioning":
        rows = experiments.run_conditioning(config)
        experiments.write_dict_rows(out / "conditioning.csv", "conditioning", rows)
    elif args.command == "quad-check":
        rows = experiments.run_quad_check(args.seed)
        experiments.write_dict_rows(out / "quad_check.csv", "quad_check", rows)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(defaults_text())
        return EXIT_OK
    root = logging.getLogger()
    if args.verbose:
        root.setLevel(logging.DEBUG)
    file_handler = None
    if args.log_file:
        Path(args.log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(args.log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
        root.addHandler(file_handler)

    # ConfigurationError も ValueError の派生なので先に捕まえる
    try:
        _run(args)
    except (ConfigurationError, FileNotFoundError) as e:
        logger.error(f"設定エラー: {e}", exc_info=args.verbose)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as e:
        logger.error(f"数値計算に失敗しました: {type(e).__name__}: {e}", exc_info=args.verbose)
        return EXIT_NUMERICAL
    finally:
        if file_handler is not None:
            root.removeHandler(file_handler)
            file_handler.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
