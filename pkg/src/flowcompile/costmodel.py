"""Inference economics: self-host per-token rates, per-conversation cost,
cross-condition ratios, one-time compilation cost, and break-even."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .errors import NonPositiveSaving


@dataclass(frozen=True)
class PriceSheet:
    api_input_per_mtok: float
    api_output_per_mtok: float
    gpu_hourly: float
    prefill_tps: float
    decode_tps: float

    def __post_init__(self):
        for name in ("api_input_per_mtok", "api_output_per_mtok", "prefill_tps", "decode_tps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.gpu_hourly < 0:
            raise ValueError("gpu_hourly must be >= 0")


@dataclass(frozen=True)
class TokenVolume:
    input_tokens: int
    output_tokens: int

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token volumes must be nonnegative")


def load_price_sheet(text: str) -> PriceSheet:
    doc = json.loads(text)
    return PriceSheet(
        api_input_per_mtok=doc["api_input_per_mtok"],
        api_output_per_mtok=doc["api_output_per_mtok"],
        gpu_hourly=doc["gpu_hourly"],
        prefill_tps=doc["prefill_tps"],
        decode_tps=doc["decode_tps"],
    )


def self_host_rates(sheet: PriceSheet) -> tuple[float, float]:
    """USD per million tokens when self-hosting: hourly GPU cost divided by
    sustained throughput, per direction."""
    per_in = sheet.gpu_hourly / (sheet.prefill_tps * 3600.0) * 1e6
    per_out = sheet.gpu_hourly / (sheet.decode_tps * 3600.0) * 1e6
    return per_in, per_out


def per_token_ratio(sheet: PriceSheet) -> dict:
    """API rate over self-host rate, per direction, plus their mean."""
    self_in, self_out = self_host_rates(sheet)
    ratio_in = sheet.api_input_per_mtok / self_in
    ratio_out = sheet.api_output_per_mtok / self_out
    return {"input": ratio_in, "output": ratio_out, "mean": (ratio_in + ratio_out) / 2.0}


def conversation_cost(volume: TokenVolume, in_rate_per_mtok: float,
                      out_rate_per_mtok: float) -> float:
    """Linear cost of one conversation at per-Mtok rates."""
    if in_rate_per_mtok < 0 or out_rate_per_mtok < 0:
        raise ValueError("rates must be >= 0")
    return (volume.input_tokens * in_rate_per_mtok
            + volume.output_tokens * out_rate_per_mtok) / 1e6


def breakeven(one_time_usd: float, per_conv_saving_usd: float) -> int:
    """Conversations needed for savings to cover the one-time setup cost."""
    if per_conv_saving_usd <= 0:
        raise NonPositiveSaving("per-conversation saving must be > 0")
    if one_time_usd <= 0:
        return 0
    return math.ceil(one_time_usd / per_conv_saving_usd)


def amortized_cost(one_time_usd: float, n_conversations: int, per_conv_usd: float) -> float:
    """Per-conversation cost with the one-time cost spread over n conversations."""
    if n_conversations < 1:
        raise ValueError("n_conversations must be >= 1")
    return one_time_usd / n_conversations + per_conv_usd


@dataclass(frozen=True)
class CostRow:
    domain: str
    condition: str
    input_tokens: int
    output_tokens: int
    usd: float
    ratio_vs_in_context: float


def cost_report_csv(rows: list[CostRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["domain", "condition", "in_tokens", "out_tokens", "usd",
                     "ratio_vs_in_context"])
    for r in rows:
        writer.writerow([r.domain, r.condition, r.input_tokens, r.output_tokens,
                         f"{r.usd:.8f}", f"{r.ratio_vs_in_context:.4f}"])
    return buf.getvalue()
