"""Purity-vs-budget chart (static Vega-Lite JSON) and scheme comparison tables."""

from __future__ import annotations

import altair as alt
import pandas as pd

SCHEME_COLORS = {
    "uniform": "#7f7f7f",
    "clus2k": "#d62728",
    "component-join": "#1f77b4",
    "with-replacement": "#2ca02c",
}


def purity_chart(agg: pd.DataFrame, title: str = "") -> alt.Chart:
    """Mean purity per budget, one line per scheme, with a +/- one std band."""
    data = agg.assign(
        lower=(agg["meanPurity"] - agg["stdPurity"]).clip(lower=0.0),
        upper=(agg["meanPurity"] + agg["stdPurity"]).clip(upper=1.0),
    )
    schemes = list(dict.fromkeys(data["scheme"]))
    color = alt.Color(
        "scheme:N",
        title="Scheme",
        scale=alt.Scale(domain=schemes, range=[SCHEME_COLORS.get(s, "#9467bd") for s in schemes]),
    )
    base = alt.Chart(data).encode(x=alt.X("budget:Q", title="Queried edges"), color=color)
    band = base.mark_area(opacity=0.15).encode(y="lower:Q", y2="upper:Q")
    lines = base.mark_line(strokeWidth=2.5, point=alt.OverlayMarkDef(size=50)).encode(
        y=alt.Y("meanPurity:Q", title="Purity", scale=alt.Scale(domain=[0, 1])),
        tooltip=[
            alt.Tooltip("scheme:N", title="Scheme"),
            alt.Tooltip("budget:Q", title="Budget"),
            alt.Tooltip("meanPurity:Q", title="Mean purity", format=".3f"),
            alt.Tooltip("stdPurity:Q", title="Std", format=".3f"),
        ],
    )
    return (band + lines).properties(title=title, width=600, height=360)


def compare_schemes(agg: pd.DataFrame, scheme: str, baseline: str) -> pd.DataFrame:
    """Per-budget mean purity of `scheme` against `baseline`.

    `wins` marks budgets where the scheme's mean is at least the baseline's;
    `withinPooledStd` where any shortfall stays within one pooled std.
    """
    wide = agg.pivot(index="budget", columns="scheme", values=["meanPurity", "stdPurity"])
    diff = wide["meanPurity"][scheme] - wide["meanPurity"][baseline]
    pooled = ((wide["stdPurity"][scheme] ** 2 + wide["stdPurity"][baseline] ** 2) / 2) ** 0.5
    return pd.DataFrame(
        {
            "budget": wide.index,
            "difference": diff.to_numpy(),
            "wins": (diff >= 0).to_numpy(),
            "withinPooledStd": (diff >= -pooled).to_numpy(),
        }
    ).reset_index(drop=True)
