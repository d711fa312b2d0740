# -*- coding: utf-8 -*-
"""axisym 共通の例外型。

CLI（axisym_runner.py）は例外の型で終了コードを決める:
  ConfigurationError / FileNotFoundError → 2（設定・入力の誤り）
  それ以外の数値系エラー                 → 1
"""


class DomainError(ValueError):
    """数学的な定義域の外（t ∉ [0,T]、χ ≤ 1、μ ≥ 1 の K など）"""


class ConfigurationError(ValueError):
    """設定値・入力ファイルの誤り。メッセージに項目名かパスを含める"""


class IntegrationError(RuntimeError):
    """適応積分（QUADPACK）が収束しなかった"""


class AssemblyError(RuntimeError):
    """行列組み立て中の異常（ブロック区分の違反、補助節点での χ ≤ 1）"""


class SingularSystemError(RuntimeError):
    """I + A_n が数値的に特異。mode 属性にモード番号を持つ"""

    def __init__(self, mode: int, rcond: float):
        self.mode = mode
        self.rcond = rcond
        super().__init__(
            f"モード n={mode} の系が数値的に特異です (rcond={rcond:.3e})。"
            "外部問題で x0 補正項を外していないか確認してください"
        )


NUMERICAL_ERRORS = (DomainError, IntegrationError, AssemblyError,
                    SingularSystemError, FloatingPointError)
