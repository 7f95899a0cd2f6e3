"""
Streamlit explorer for policyflow.
Paste or upload a labeled graph, pick a routing policy and inspect the
policy-compliant min-cut between two nodes.
"""

from pathlib import Path
from typing import Optional

import pandas as pd
import streamlit as st

from src.cli import resolve_policy
from src.config import configure_logging, get_settings
from src.decomposition import exactness_report
from src.errors import PolicyFlowError
from src.flow import CutReport, min_cut_bounds
from src.graph_core import LabeledDigraph, dump_graph, parse_graph_text
from src.policy_lang import PRESETS, parse_nfa_text
from src.reports import format_rational, render_cut_report
from src.transform import prepare_policy

SAMPLE_GRAPH = Path(__file__).parent / "data" / "vf_triangle.txt"


# Page configuration
st.set_page_config(
    page_title="policyflow explorer",
    page_icon="🔀",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.markdown("""
<style>
    .main-header {
        background: linear-gradient(90deg, #1e3a8a 0%, #3b82f6 100%);
        padding: 1rem;
        border-radius: 10px;
        color: white;
        text-align: center;
        margin-bottom: 2rem;
    }

    .exact-result {
        background: #f0fdf4;
        border: 2px solid #22c55e;
        padding: 1rem;
        border-radius: 8px;
        margin: 1rem 0;
    }

    .bounds-result {
        background: #fefbeb;
        border: 2px solid #f59e0b;
        padding: 1rem;
        border-radius: 8px;
        margin: 1rem 0;
    }
</style>
""", unsafe_allow_html=True)


def initialize_session_state():
    """Initialize session state variables."""
    if 'settings' not in st.session_state:
        st.session_state.settings = get_settings()
        configure_logging(st.session_state.settings.log_level)

    if 'graph_text' not in st.session_state:
        st.session_state.graph_text = SAMPLE_GRAPH.read_text(encoding="utf-8")

    if 'report' not in st.session_state:
        st.session_state.report = None


def display_header():
    st.markdown("""
    <div class="main-header">
        <h1>🔀 policyflow explorer</h1>
        <p>Policy-compliant path diversity and bisection bandwidth</p>
    </div>
    """, unsafe_allow_html=True)


def display_sidebar():
    """Graph and policy inputs."""
    with st.sidebar:
        st.markdown("### 🗺️ Graph")
        uploaded = st.file_uploader("Upload a graph file", type=["txt"])
        if uploaded is not None:
            st.session_state.graph_text = uploaded.getvalue().decode("utf-8")
        st.session_state.graph_text = st.text_area(
            "src|dst|label|capacity lines", st.session_state.graph_text, height=220
        )

        st.markdown("### 📜 Policy")
        source = st.radio("Policy source", ["Preset", "Regular expression", "NFA text"])
        if source == "Preset":
            st.session_state.policy_input = ("preset", st.selectbox("Preset", sorted(PRESETS), index=2))
        elif source == "Regular expression":
            st.session_state.policy_input = ("regex", st.text_input("Policy", "c2p* p2p? p2c*"))
        else:
            st.session_state.policy_input = ("nfa", st.text_area("NFA", "start: q0\naccept: q1\nq0 p2p q1\n"))

        st.markdown("---")
        unit = st.checkbox("Unit capacities (path diversity)", value=False)
        st.session_state.unit_capacities = unit


def load_policy(graph: LabeledDigraph):
    kind, value = st.session_state.policy_input
    if kind == "preset":
        return resolve_policy(None, None, value, graph.alphabet)
    if kind == "regex":
        return resolve_policy(value, None, None, graph.alphabet)
    return parse_nfa_text(value, graph.alphabet)


def parse_inputs() -> Optional[LabeledDigraph]:
    try:
        graph = parse_graph_text(st.session_state.graph_text)
    except PolicyFlowError as e:
        st.error(f"Graph: {e.message}")
        return None
    if st.session_state.unit_capacities:
        graph = graph.with_unit_capacities()
    return graph


def display_exactness(policy):
    report = exactness_report(policy, st.session_state.settings.exact_decomposition_limit)
    rows = [
        {
            "symbol": symbol,
            "n_s": d.n_s,
            "minimal": d.minimality.value,
            "blocks": " + ".join(b.to_text() for b in d.blocks) or "-",
        }
        for symbol, d in report.decompositions.items()
    ]
    st.markdown("#### 🧩 Transition blocks")
    st.dataframe(pd.DataFrame(rows), use_container_width=True, hide_index=True)


def display_results(report: CutReport):
    if report.exact:
        st.markdown(f"""
        <div class="exact-result">
            <h2>min-cut: {format_rational(report.upper)}</h2>
            <p>Every symbol maps to a single block, so the bounds coincide.</p>
        </div>
        """, unsafe_allow_html=True)
    else:
        st.markdown(f"""
        <div class="bounds-result">
            <h2>{format_rational(report.lower)} ≤ min-cut ≤ {format_rational(report.upper)}</h2>
            <p>Some symbol needs several blocks; only bounds are available.</p>
        </div>
        """, unsafe_allow_html=True)

    col1, col2, col3 = st.columns(3)
    col1.metric("Lower bound", format_rational(report.lower))
    col2.metric("Upper bound", format_rational(report.upper))
    col3.metric("Transformed edges", report.stats.get("pruned_edges", 0))

    st.markdown("#### 🛣️ Realizing paths")
    frame = pd.DataFrame(
        [{"path": p.to_text(), "flow": format_rational(p.flow), "hops": len(p.edges)} for p in report.paths],
        columns=["path", "flow", "hops"],
    )
    st.dataframe(frame, use_container_width=True, hide_index=True)

    st.download_button(
        "📥 Download report (JSON)",
        render_cut_report(report, "json"),
        file_name=f"mincut_{report.source}_{report.sink}.json",
        mime="application/json",
    )


def main():
    """Main application function."""
    initialize_session_state()
    display_header()
    display_sidebar()

    graph = parse_inputs()
    if graph is None:
        return

    nodes = sorted(graph.nodes)
    if len(nodes) < 2:
        st.info("The graph needs at least two nodes.")
        return

    try:
        policy = load_policy(graph)
    except PolicyFlowError as e:
        st.error(f"Policy: {e.message}")
        return

    col1, col2 = st.columns(2)
    with col1:
        source = st.selectbox("Source", nodes, index=0)
    with col2:
        sink = st.selectbox("Sink", nodes, index=len(nodes) - 1)

    display_exactness(policy)

    if st.button("Compute min-cut", type="primary", use_container_width=True):
        try:
            aug = prepare_policy(policy, st.session_state.settings.exact_decomposition_limit)
            st.session_state.report = min_cut_bounds(graph, aug, source, sink)
        except PolicyFlowError as e:
            st.session_state.report = None
            st.error(e.message)

    report = st.session_state.report
    if report is not None and (report.source, report.sink) == (source, sink):
        display_results(report)

    with st.expander("Normalized graph"):
        st.code(dump_graph(graph), language="text")


if __name__ == "__main__":
    main()
