"""
Demo scenarios for policyflow.
Walks through the bundled fixtures: valley-free routing, bounds-only policies,
aggregator states, exactness checks and a depeering what-if.
"""

from datetime import datetime
from pathlib import Path

from src.decomposition import exactness_report
from src.errors import PolicyFlowError
from src.experiments import synthetic_tier_one_topology
from src.flow import min_cut_bounds
from src.graph_core import build_graph, load_graph
from src.ingest import depeer
from src.policy_lang import load_nfa, parse_nfa_text, preset, waypoint_policy
from src.reports import render_cut_report, render_exactness
from src.transform import prepare_policy

DATA_DIR = Path(__file__).parent / "data"

ONE_TO_MANY = """
start: q0
accept: q3
q0 a q1
q0 a q2
q1 b q3
q2 c q3
"""


class PolicyFlowDemo:
    """Scenario runner over the data/ fixtures."""

    def __init__(self):
        print("🔀 policyflow demo")
        print("=" * 60)
        _, self.valley_free = preset("valley-free")

    def demo_valley_free_triangle(self):
        """Demo: two valley-free paths between customer A and peer C."""
        print("\n" + "🗺️ DEMO 1: VALLEY-FREE TRIANGLE" + "\n" + "=" * 50)
        print("Scenario: A buys transit from B and peers with C")
        graph = load_graph(DATA_DIR / "vf_triangle.txt")
        print(render_cut_report(min_cut_bounds(graph, self.valley_free, "A", "C")))

        print("Waypoint: paths that cross a provider link first")
        waypoint = waypoint_policy(graph.alphabet, ["c2p"])
        print(render_cut_report(min_cut_bounds(graph, waypoint, "A", "C"), with_paths=True))

    def demo_chain_bounds(self):
        """Demo: a policy whose transitions cannot be aggregated exactly."""
        print("\n" + "📏 DEMO 2: BOUNDS-ONLY POLICY" + "\n" + "=" * 50)
        print("Scenario: exactly two 'a' hops; 'a' needs two blocks, so only bounds exist")
        graph = load_graph(DATA_DIR / "chain_graph.txt")
        print(render_cut_report(min_cut_bounds(graph, load_nfa(DATA_DIR / "chain.nfa"), "v1", "v3")))

    def demo_aggregators(self):
        """Demo: one-to-many transitions collapse into an aggregator state."""
        print("\n" + "🧩 DEMO 3: AGGREGATOR STATES" + "\n" + "=" * 50)
        aug = prepare_policy(parse_nfa_text(ONE_TO_MANY))
        for symbol, blocks in aug.aggregated.items():
            for block in blocks:
                print(f"  {symbol}: {block.pair[0]} -> {block.pair[1]}")
        print(f"  added epsilon transitions: {sorted(aug.epsilon_additions)}")

        graph = build_graph({"a", "b", "c"}, [("v1", "v2", "a", 1), ("v2", "v3", "b", 1), ("v2", "v3", "c", 1)])
        report = min_cut_bounds(graph, aug, "v1", "v3")
        print(f"  min-cut v1 -> v3: {report.upper} (exact={report.exact})")

    def demo_check_exact(self):
        """Demo: exactness verdicts of the named policies."""
        print("\n" + "✅ DEMO 4: EXACTNESS CHECK" + "\n" + "=" * 50)
        for name in ("valley-free", "multiple-peering-links", "any"):
            print(render_exactness(exactness_report(preset(name)[1])))
        print(render_exactness(exactness_report(load_nfa(DATA_DIR / "chain.nfa"))))

    def demo_depeering(self):
        """Demo: diversity between two tier-one customer trees before and after depeering."""
        print("\n" + "✂️ DEMO 5: TIER-ONE DEPEERING" + "\n" + "=" * 50)
        graph = synthetic_tier_one_topology(branching=2, depth=2)
        before = min_cut_bounds(graph, self.valley_free, "T1a.3", "T1b.3")
        after = min_cut_bounds(depeer(graph, "T1a", "T1b"), self.valley_free, "T1a.3", "T1b.3")
        print(f"  T1a.3 -> T1b.3 before: {before.upper}")
        print(f"  T1a.3 -> T1b.3 after:  {after.upper}")

    def run_all_demos(self):
        print("🚀 Running all demo scenarios")
        for demo in (
            self.demo_valley_free_triangle,
            self.demo_chain_bounds,
            self.demo_aggregators,
            self.demo_check_exact,
            self.demo_depeering,
        ):
            try:
                demo()
            except PolicyFlowError as e:
                print(f"❌ {demo.__name__}: {e.message}")
        print(f"\nDemo completed at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")


def main():
    demo = PolicyFlowDemo()

    print("Select a demo to run:")
    print("1. Valley-free triangle")
    print("2. Bounds-only policy")
    print("3. Aggregator states")
    print("4. Exactness check")
    print("5. Tier-one depeering")
    print("6. Run all demos")
    print("0. Exit")

    choices = {
        "1": demo.demo_valley_free_triangle,
        "2": demo.demo_chain_bounds,
        "3": demo.demo_aggregators,
        "4": demo.demo_check_exact,
        "5": demo.demo_depeering,
        "6": demo.run_all_demos,
    }
    try:
        choice = input("\nEnter your choice (0-6): ").strip()
        if choice == "0":
            print("👋 Goodbye!")
        elif choice in choices:
            choices[choice]()
        else:
            print("❌ Invalid choice. Running all demos...")
            demo.run_all_demos()
    except KeyboardInterrupt:
        print("\n👋 Demo interrupted. Goodbye!")


if __name__ == "__main__":
    main()
