"""Time-bucketed crisis profiles and the proportional stacked bar chart."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

from .categories import CATEGORY_NAMES, CATEGORY_ORDER, ActionabilityType, ActionSet
from .corpus import Message

DEFAULT_BUCKET_WIDTH = 24 * 3600
MIN_BUCKET_WIDTH = 3600

# One fixed color per category code, for cross-chart comparability.
_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
]
CATEGORY_COLORS = dict(zip(CATEGORY_ORDER, _PALETTE))


@dataclass(frozen=True)
class TimeBucket:
    start: int
    width: int
    counts: dict[ActionabilityType, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class CrisisProfile:
    buckets: tuple[TimeBucket, ...]

    def proportions(self, bucket: TimeBucket) -> dict[ActionabilityType, float]:
        total = bucket.total
        if total == 0:
            return {c: 0.0 for c in CATEGORY_ORDER}
        return {c: bucket.counts.get(c, 0) / total for c in CATEGORY_ORDER}


def build_profile(
    tagged: Sequence[tuple[Message, ActionSet]],
    width: int = DEFAULT_BUCKET_WIDTH,
) -> CrisisProfile:
    """Bucket tagged messages by timestamp; a message with n tags adds n counts."""
    if width <= 0:
        raise ValueError("bucket width must be positive")
    undated = [m.id for m, _ in tagged if m.timestamp is None]
    if undated:
        raise ValueError(f"messages without timestamps cannot be profiled: {undated}")
    if not tagged:
        return CrisisProfile(())
    t_min = min(m.timestamp for m, _ in tagged)
    t_max = max(m.timestamp for m, _ in tagged)
    n_buckets = (t_max - t_min) // width + 1
    counts: list[dict[ActionabilityType, int]] = [
        {c: 0 for c in CATEGORY_ORDER} for _ in range(n_buckets)
    ]
    for message, actions in tagged:
        idx = (message.timestamp - t_min) // width
        for action in actions:
            counts[idx][action] += 1
    buckets = tuple(
        TimeBucket(start=t_min + i * width, width=width, counts=counts[i])
        for i in range(n_buckets)
    )
    return CrisisProfile(buckets)


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def profile_csv(profile: CrisisProfile) -> str:
    """Proportions table: bucket start plus one column per category."""
    header = "bucket_start," + ",".join(c.code for c in CATEGORY_ORDER)
    lines = [header]
    for bucket in profile.buckets:
        props = profile.proportions(bucket)
        lines.append(_iso(bucket.start) + "," + ",".join(f"{props[c]:.6f}" for c in CATEGORY_ORDER))
    return "\n".join(lines) + "\n"


CHART_WIDTH = 900
CHART_HEIGHT = 420
MARGIN_LEFT = 50
MARGIN_BOTTOM = 60
MARGIN_TOP = 20
LEGEND_WIDTH = 230
BAR_AREA_HEIGHT = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM


def render_chart(profile: CrisisProfile) -> str:
    """Render the proportional stacked bar chart as an SVG document.

    One full-height bar per bucket, segments stacked in fixed category
    order; empty buckets render blank.  Output is deterministic byte for
    byte for a given profile.
    """
    if not profile.buckets:
        raise ValueError("cannot render an empty profile")
    n = len(profile.buckets)
    plot_width = CHART_WIDTH - MARGIN_LEFT - LEGEND_WIDTH
    bar_gap = 4
    bar_width = max(1.0, (plot_width - bar_gap * n) / n)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_WIDTH}" '
        f'height="{CHART_HEIGHT}" viewBox="0 0 {CHART_WIDTH} {CHART_HEIGHT}">',
        f'<rect width="{CHART_WIDTH}" height="{CHART_HEIGHT}" fill="white"/>',
    ]
    for i, bucket in enumerate(profile.buckets):
        x = MARGIN_LEFT + i * (bar_width + bar_gap)
        props = profile.proportions(bucket)
        y = float(MARGIN_TOP)
        for c in CATEGORY_ORDER:
            h = props[c] * BAR_AREA_HEIGHT
            if h <= 0:
                continue
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_width:.2f}" height="{h:.2f}" '
                f'fill="{CATEGORY_COLORS[c]}"><title>{CATEGORY_NAMES[c]}: {props[c]:.4f}'
                f"</title></rect>"
            )
            y += h
        label = _iso(bucket.start)[:10]
        parts.append(
            f'<text x="{x + bar_width / 2:.2f}" y="{CHART_HEIGHT - MARGIN_BOTTOM + 14}" '
            f'font-size="9" text-anchor="middle" transform="rotate(45 '
            f'{x + bar_width / 2:.2f} {CHART_HEIGHT - MARGIN_BOTTOM + 14})">{label}</text>'
        )
    # time axis line
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + BAR_AREA_HEIGHT}" '
        f'x2="{MARGIN_LEFT + plot_width}" y2="{MARGIN_TOP + BAR_AREA_HEIGHT}" '
        f'stroke="black" stroke-width="1"/>'
    )
    # legend
    lx = CHART_WIDTH - LEGEND_WIDTH + 10
    for j, c in enumerate(CATEGORY_ORDER):
        ly = MARGIN_TOP + j * 20
        parts.append(
            f'<rect x="{lx}" y="{ly}" width="12" height="12" fill="{CATEGORY_COLORS[c]}"/>'
        )
        parts.append(
            f'<text x="{lx + 18}" y="{ly + 10}" font-size="11">{CATEGORY_NAMES[c]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
